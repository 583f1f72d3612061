//! Gnuplot scripts for scan CSVs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use csh_core::stats::loglog_fit;

use crate::error::{CliError, CliResult};

/// Which figure a CSV feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// Knapp amplitude against λ with its power-law fit.
    Knapp,
    /// Bilinear constants against N.
    BilinearScaling,
    /// Sampled `max|ω|` per sign tuple against λ.
    Resonance,
    /// Residuals against time.
    Monitor,
}

impl PlotKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "knapp" => Some(Self::Knapp),
            "bilinear-scaling" => Some(Self::BilinearScaling),
            "resonance" => Some(Self::Resonance),
            "monitor" => Some(Self::Monitor),
            _ => None,
        }
    }

    /// Guesses the kind from the names used by the scan subcommands.
    pub fn from_file_name(path: &Path) -> Option<Self> {
        let name = path.file_name()?.to_string_lossy();
        if name.contains("resonance") {
            Some(Self::Resonance)
        } else if name.contains("knapp") {
            Some(Self::Knapp)
        } else if name.contains("bilinear-scaling") {
            Some(Self::BilinearScaling)
        } else if name.contains("monitor") {
            Some(Self::Monitor)
        } else {
            None
        }
    }

    fn x_column(self) -> &'static str {
        match self {
            Self::Knapp | Self::Resonance => "lambda",
            Self::BilinearScaling => "n",
            Self::Monitor => "t",
        }
    }

    fn wants_y(self, column: &str) -> bool {
        match self {
            Self::Knapp => column.starts_with("abs_F_"),
            Self::BilinearScaling => column == "empirical_norm" || column == "theoretical_min_c",
            Self::Resonance => column.starts_with("max_abs_omega_"),
            Self::Monitor => column == "gauge_residual_rel" || column == "field_residual_rel",
        }
    }

    fn fits(self) -> bool {
        matches!(self, Self::Knapp | Self::BilinearScaling)
    }
}

struct Table {
    header: Vec<String>,
    columns: Vec<Vec<f64>>,
}

fn parse_error(path: &str, line: usize, message: impl Into<String>) -> CliError {
    CliError::Parse { path: path.to_string(), line, message: message.into() }
}

fn read_table(text: &str, name: &str, kind: PlotKind) -> CliResult<(Table, usize, Vec<usize>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_error(name, 1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.iter().all(String::is_empty) {
        return Err(parse_error(name, 1, "missing header row"));
    }
    let x = header
        .iter()
        .position(|h| h == kind.x_column())
        .ok_or_else(|| parse_error(name, 1, format!("no column named {}", kind.x_column())))?;
    let ys: Vec<usize> = (0..header.len()).filter(|&i| kind.wants_y(&header[i])).collect();
    if ys.is_empty() {
        return Err(parse_error(name, 1, "no plottable value columns"));
    }
    let mut columns = vec![Vec::new(); header.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_error(name, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        for &i in std::iter::once(&x).chain(&ys) {
            let field = rec.get(i).ok_or_else(|| parse_error(name, line, "missing field"))?;
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_error(name, line, format!("column {} is not a number: {field:?}", header[i])))?;
            columns[i].push(v);
        }
    }
    if columns[x].is_empty() {
        return Err(parse_error(name, 1, "no data rows"));
    }
    Ok((Table { header, columns }, x, ys))
}

/// Script text for the CSV contents `text` stored under `csv_name`.
pub fn render_plot_script(text: &str, csv_name: &str, kind: PlotKind) -> CliResult<String> {
    let (table, x, ys) = read_table(text, csv_name, kind)?;
    let stem = csv_name.strip_suffix(".csv").unwrap_or(csv_name);
    let mut s = String::new();
    let _ = writeln!(s, "# gnuplot script for {csv_name}");
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set terminal pngcairo size 900,600");
    let _ = writeln!(s, "set output '{stem}.png'");
    let _ = writeln!(s, "set key left top");
    let _ = writeln!(s, "set grid");
    let _ = writeln!(s, "{}", if kind == PlotKind::Monitor { "set logscale y" } else { "set logscale xy" });
    let _ = writeln!(s, "set xlabel '{}'", table.header[x]);
    let mut plots: Vec<String> = ys
        .iter()
        .map(|&y| format!("'{csv_name}' using {}:{} skip 1 with linespoints title '{}'", x + 1, y + 1, table.header[y]))
        .collect();
    if kind.fits() {
        let pts: Vec<(f64, f64)> = table.columns[x].iter().copied().zip(table.columns[ys[0]].iter().copied()).collect();
        if let Ok(fit) = loglog_fit(&pts, 0.0) {
            let _ = writeln!(s, "fit_slope = {:.6e}", fit.slope);
            let _ = writeln!(s, "fit_intercept = {:.6e}", fit.intercept);
            let _ = writeln!(s, "f(x) = exp(fit_intercept) * x**fit_slope");
            plots.push(format!("f(x) with lines dashtype 2 title sprintf('slope %.3f', fit_slope)"));
        }
    }
    let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
    Ok(s)
}

/// Writes `<csv stem>.gp` next to the CSV and returns its path.
pub fn emit_plot_script(csv_path: &Path, kind: PlotKind) -> CliResult<PathBuf> {
    let text = std::fs::read_to_string(csv_path)?;
    let name = csv_path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let script = render_plot_script(&text, &name, kind)?;
    let out = csv_path.with_extension("gp");
    std::fs::write(&out, script)?;
    Ok(out)
}
