//! Layered configuration: built-in defaults, then the JSON file, then
//! environment overrides, then flags.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::args::CommonArgs;
use crate::error::{CliError, CliResult};

pub const OUT_DIR_ENV: &str = "CSH_OUT_DIR";
pub const THREADS_ENV: &str = "CSH_THREADS";
const COMMON_KEYS: [&str; 3] = ["seed", "threads", "out_dir"];

/// Settings shared by every subcommand.
#[derive(Debug, Clone, Serialize)]
pub struct Common {
    pub seed: u64,
    pub threads: usize,
    pub out_dir: PathBuf,
    #[serde(skip)]
    pub verbose: u8,
    #[serde(skip)]
    pub quiet: bool,
}

/// Parsed configuration file, split into shared and subcommand entries.
#[derive(Debug, Default)]
pub struct ConfigFile {
    common: Map<String, Value>,
    params: Map<String, Value>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {} is not valid JSON: {e}", path.display())))?;
        let Value::Object(map) = value else {
            return Err(CliError::Usage(format!("config {} must be a JSON object", path.display())));
        };
        let (common, params) = map.into_iter().partition(|(k, _)| COMMON_KEYS.contains(&k.as_str()));
        Ok(Self { common, params })
    }

    pub fn common(&self, flags: &CommonArgs) -> CliResult<Common> {
        let from_file = |key: &str| self.common.get(key).cloned();
        let seed = match (flags.seed, from_file("seed")) {
            (Some(s), _) => s,
            (None, Some(v)) => serde_json::from_value(v).map_err(|e| CliError::Usage(format!("config seed: {e}")))?,
            (None, None) => 0,
        };
        let env_threads = std::env::var(THREADS_ENV)
            .ok()
            .map(|s| s.parse::<usize>().map_err(|_| CliError::Usage(format!("{THREADS_ENV}={s} is not a thread count"))))
            .transpose()?;
        let file_threads = from_file("threads")
            .map(|v| serde_json::from_value::<usize>(v).map_err(|e| CliError::Usage(format!("config threads: {e}"))))
            .transpose()?;
        let threads = flags
            .threads
            .or(env_threads)
            .or(file_threads)
            .unwrap_or_else(csh_core::parallel::default_threads)
            .max(1);
        let file_out = from_file("out_dir")
            .map(|v| serde_json::from_value::<PathBuf>(v).map_err(|e| CliError::Usage(format!("config out_dir: {e}"))))
            .transpose()?;
        let out_dir = flags
            .out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .or(file_out)
            .unwrap_or_else(|| PathBuf::from("cshlab-out"));
        Ok(Common { seed, threads, out_dir, verbose: flags.verbose, quiet: flags.quiet })
    }

    /// Subcommand parameters: defaults overlaid with the file and then with the set flags.
    pub fn params<P: DeserializeOwned, F: Serialize>(&self, flags: &F) -> CliResult<P> {
        let mut merged = self.params.clone();
        if let Value::Object(set) = serde_json::to_value(flags)? {
            merged.extend(set.into_iter().filter(|(_, v)| !v.is_null()));
        }
        serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Usage(format!("invalid configuration: {e}")))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LieInfoParams {
    pub n: usize,
}

impl Default for LieInfoParams {
    fn default() -> Self {
        Self { n: 2 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NullCheckParams {
    pub n: usize,
    pub m: usize,
    pub box_length: f64,
    pub band: usize,
    pub seeds: usize,
    pub samples: usize,
    pub tolerance: f64,
}

impl Default for NullCheckParams {
    fn default() -> Self {
        Self { n: 2, m: 128, box_length: std::f64::consts::TAU, band: 16, seeds: 20, samples: 100_000, tolerance: 1e-8 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BilinearParams {
    pub n_values: Vec<u64>,
    pub l_values: Vec<u64>,
    pub signs: Vec<String>,
    pub trials: usize,
    pub adversarial: bool,
    pub power_iterations: usize,
    pub global_constant: f64,
    pub scaling_n: Vec<u64>,
    pub scaling_signs: String,
    pub scaling_power_iterations: usize,
}

impl Default for BilinearParams {
    fn default() -> Self {
        Self {
            n_values: vec![1, 2, 4],
            l_values: vec![1, 2],
            signs: vec!["++-".into()],
            trials: 4,
            adversarial: true,
            power_iterations: 10,
            global_constant: 10.0,
            scaling_n: vec![4, 8, 16, 32, 64],
            scaling_signs: "++-".into(),
            scaling_power_iterations: 5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnappParams {
    pub amplitude: String,
    pub k_values: Option<Vec<u64>>,
    pub lambda_min: Option<f64>,
    pub lambda_decades: f64,
    pub points: usize,
    pub eps: f64,
    pub rho: f64,
    pub c: f64,
    pub m: f64,
    pub samples: usize,
    pub resonance: bool,
    pub resonance_exponents: Vec<i32>,
    pub resonance_c: f64,
    pub resonance_samples: usize,
}

impl Default for KnappParams {
    fn default() -> Self {
        Self {
            amplitude: "third".into(),
            k_values: None,
            lambda_min: None,
            lambda_decades: 2.0,
            points: 8,
            eps: 0.1,
            rho: 1e-6,
            c: 1e-2,
            m: std::f64::consts::SQRT_2,
            samples: 100_000,
            resonance: false,
            resonance_exponents: (8..=16).collect(),
            resonance_c: 1e-2,
            resonance_samples: 20_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateParams {
    pub n: usize,
    pub v: f64,
    pub m: usize,
    pub box_length: f64,
    pub dt: f64,
    pub t_final: f64,
    pub stride: usize,
    pub data: String,
    pub amplitude: f64,
    pub gradient_amplitude: f64,
    pub band: usize,
    pub higgs_sign: csh_core::evolution::HiggsSign,
    pub initial_current: csh_core::evolution::InitialCurrent,
    pub nonlinear: bool,
    pub dealias_order: usize,
    pub monitor_s: f64,
    pub snapshots: bool,
    pub picard: bool,
    pub max_gauge_residual: f64,
    pub max_field_residual: f64,
}

impl Default for SimulateParams {
    fn default() -> Self {
        let opts = csh_core::evolution::EvolutionOptions::default();
        Self {
            n: 2,
            v: 1.0,
            m: 64,
            box_length: std::f64::consts::TAU,
            dt: 0.005,
            t_final: 0.1,
            stride: 5,
            data: "constraint-compatible".into(),
            amplitude: 1e-2,
            gradient_amplitude: 0.0,
            band: 4,
            higgs_sign: opts.higgs_sign,
            initial_current: opts.initial_current,
            nonlinear: opts.nonlinear,
            dealias_order: opts.dealias_order,
            monitor_s: 0.75,
            snapshots: true,
            picard: false,
            max_gauge_residual: 1e-4,
            max_field_residual: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PlotParams {
    pub csv: Option<PathBuf>,
    pub kind: Option<String>,
}
