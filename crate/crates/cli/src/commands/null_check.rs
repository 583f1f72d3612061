use csh_core::null_forms::{make_lorenz_snapshot, make_matter_snapshot, null_symbol_bound_scan, verify_null_decomposition};
use csh_core::parallel::par_map;
use csh_core::{build_su_n_basis, Grid2D};
use serde_json::json;

use crate::config::NullCheckParams;
use crate::error::CliResult;
use crate::output::Session;

/// Offset separating the matter stream from the gauge stream of the same seed.
const MATTER_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

pub fn run(s: &mut Session, p: &NullCheckParams) -> CliResult<()> {
    let grid = Grid2D::new(p.box_length, p.m)?;
    let g = build_su_n_basis(p.n)?;
    let seeds: Vec<u64> = (0..p.seeds as u64).map(|i| s.common.seed.wrapping_add(i)).collect();
    s.log(1, format!("null decomposition on {}² for {} seeds", p.m, seeds.len()));
    let reports = par_map(&seeds, s.common.threads, |&seed| {
        let a = make_lorenz_snapshot(seed, &grid, &g, p.band);
        let phi = make_matter_snapshot(seed.wrapping_add(MATTER_STREAM), &grid, &g, p.band);
        verify_null_decomposition(&a, &phi, &g)
    });
    let reports = reports.into_iter().collect::<Result<Vec<_>, _>>()?;
    let worst = reports.iter().map(|r| r.max_residual()).fold(0.0, f64::max);
    let symbols = null_symbol_bound_scan(p.samples, s.common.seed)?;
    let per_seed: Vec<_> = seeds.iter().zip(&reports).map(|(seed, r)| json!({ "seed": seed, "report": r })).collect();
    let report = json!({
        "grid": { "m": p.m, "box_length": p.box_length, "band": p.band },
        "decomposition": per_seed,
        "max_relative_residual": worst,
        "symbols": symbols,
        "c_emp_qj0": symbols.max_ratio_j0,
    });
    s.write_json("null-check.json", &report)?;
    s.say(format!(
        "null decomposition: max relative residual {worst:e} over {} seeds\nnull symbols: max |q_jk|/(|ξ₁||ξ₂|θ) = {:.12}, C_emp(q_j0) = {:.6}, collinear violations {}",
        seeds.len(),
        symbols.max_ratio_jk,
        symbols.max_ratio_j0,
        symbols.degenerate_flagged
    ));
    s.check("decomposition", worst <= p.tolerance, format!("{worst:e} <= {:e}", p.tolerance));
    s.check("q_jk bound", symbols.max_ratio_jk <= 1.0 + 1e-9, format!("{}", symbols.max_ratio_jk));
    s.check("collinear pairs", symbols.degenerate_flagged == 0, format!("{} violations", symbols.degenerate_flagged));
    Ok(())
}
