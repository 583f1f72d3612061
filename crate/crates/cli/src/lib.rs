//! Front end of the `cshlab` binary: argument and configuration handling,
//! subcommand dispatch and artifact writing.

mod args;
mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod plot;

use std::ffi::OsString;

use clap::error::ErrorKind;
use clap::Parser;
use serde::Serialize;

use crate::args::{Cli, Command};
use crate::config::{
    BilinearParams, ConfigFile, KnappParams, LieInfoParams, NullCheckParams, PlotParams, SimulateParams,
};
use crate::error::{CliError, CliResult};
use crate::output::Session;
use crate::plot::{emit_plot_script, PlotKind};

/// Parses `argv`, runs the subcommand and returns the process exit code:
/// 0 on success, 1 on usage errors, 2 when a checked invariant fails.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("cshlab {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}

fn execute<P: Serialize>(
    file: &ConfigFile,
    cli: &Cli,
    params: &P,
    body: impl FnOnce(&mut Session, &P) -> CliResult<()>,
) -> CliResult<()> {
    let mut session = Session::new(file.common(&cli.common)?)?;
    body(&mut session, params)?;
    session.finish(cli.command.name(), params)
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    let file = ConfigFile::load(cli.common.config.as_deref())?;
    match &cli.command {
        Command::LieInfo(a) => execute(&file, cli, &file.params::<LieInfoParams, _>(a)?, commands::lie_info::run),
        Command::NullCheck(a) => execute(&file, cli, &file.params::<NullCheckParams, _>(a)?, commands::null_check::run),
        Command::BilinearScan(a) => execute(&file, cli, &file.params::<BilinearParams, _>(a)?, commands::bilinear::run),
        Command::KnappScan(a) => execute(&file, cli, &file.params::<KnappParams, _>(a)?, commands::knapp::run),
        Command::Simulate(a) => execute(&file, cli, &file.params::<SimulateParams, _>(a)?, commands::simulate::run),
        Command::PlotScript(a) => {
            let p: PlotParams = file.params(a)?;
            let csv = p.csv.ok_or_else(|| CliError::Usage("plot-script needs --csv".into()))?;
            let kind = match p.kind.as_deref() {
                Some(k) => PlotKind::parse(k).ok_or_else(|| CliError::Usage(format!("unknown plot kind {k:?}")))?,
                None => PlotKind::from_file_name(&csv)
                    .ok_or_else(|| CliError::Usage(format!("cannot infer plot kind of {}; pass --kind", csv.display())))?,
            };
            let out = emit_plot_script(&csv, kind)?;
            if !cli.common.quiet {
                println!("{}", out.display());
            }
            Ok(())
        }
    }
}
