//! Artifact writing for one run: data files, checks and the manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::json;

use crate::config::Common;
use crate::error::{CliError, CliResult};

/// A named pass/fail check recorded in the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

pub struct Session {
    pub common: Common,
    outputs: Vec<String>,
    checks: Vec<Check>,
}

impl Session {
    pub fn new(common: Common) -> CliResult<Self> {
        fs::create_dir_all(&common.out_dir)?;
        Ok(Self { common, outputs: Vec::new(), checks: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.common.out_dir.join(name)
    }

    pub fn log(&self, level: u8, msg: impl AsRef<str>) {
        if self.common.verbose >= level {
            eprintln!("[cshlab] {}", msg.as_ref());
        }
    }

    pub fn say(&self, msg: impl AsRef<str>) {
        if !self.common.quiet {
            println!("{}", msg.as_ref());
        }
    }

    pub fn record(&mut self, name: &str) {
        self.outputs.push(name.to_string());
        self.log(1, format!("wrote {}", self.path(name).display()));
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(self.path(name), text)?;
        self.record(name);
        Ok(())
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> CliResult<()> {
        fs::write(self.path(name), text)?;
        self.record(name);
        Ok(())
    }

    /// Writes a header row and data rows.
    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
        let mut w = csv::Writer::from_path(self.path(name))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        self.record(name);
        Ok(())
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        let detail = detail.into();
        self.log(1, format!("check {name}: {} ({detail})", if passed { "ok" } else { "FAILED" }));
        self.checks.push(Check { name: name.into(), passed, detail });
    }

    /// Writes `manifest.json` and turns failed checks into an assertion error.
    pub fn finish<P: Serialize>(mut self, subcommand: &str, params: &P) -> CliResult<()> {
        self.outputs.sort();
        let created = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let manifest = json!({
            "program": "cshlab",
            "version": env!("CARGO_PKG_VERSION"),
            "subcommand": subcommand,
            "common": self.common,
            "params": params,
            "outputs": self.outputs,
            "checks": self.checks,
            "created_unix_seconds": created,
        });
        fs::write(self.path("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
        let failed: Vec<String> =
            self.checks.iter().filter(|c| !c.passed).map(|c| format!("{} ({})", c.name, c.detail)).collect();
        if failed.is_empty() {
            Ok(())
        } else {
            Err(CliError::Assertion(failed))
        }
    }
}

/// Shortest round-trip formatting, so repeated runs give identical bytes.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

pub fn relative_name(path: &Path) -> String {
    path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}
