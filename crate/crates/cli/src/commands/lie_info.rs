use csh_core::build_su_n_basis;
use csh_core::lie_kernel::check_casimir_commutation;
use serde_json::json;

use crate::config::LieInfoParams;
use crate::error::CliResult;
use crate::output::Session;

const TOLERANCE: f64 = 1e-12;

pub fn run(s: &mut Session, p: &LieInfoParams) -> CliResult<()> {
    let g = build_su_n_basis(p.n)?;
    let invariants = g.invariant_report();
    let casimir = check_casimir_commutation(&g);
    // Indices are reported 1-based, as in f^{12}_3.
    let entries: Vec<_> = g
        .structure_entries()
        .iter()
        .map(|e| json!({ "a": e.a + 1, "b": e.b + 1, "c": e.c + 1, "f": e.value }))
        .collect();
    let report = json!({
        "n": g.n(),
        "dim": g.dim(),
        "index_base": 1,
        "structure_constants": entries,
        "invariants": invariants,
        "max_invariant_residual": invariants.max_residual(),
        "casimir": casimir,
    });
    s.write_json("lie-info.json", &report)?;
    s.say(serde_json::to_string_pretty(&report)?);
    s.check("invariants", invariants.max_residual() <= TOLERANCE, format!("max residual {:e}", invariants.max_residual()));
    s.check("casimir", casimir.casimir_residual <= TOLERANCE, format!("residual {:e}", casimir.casimir_residual));
    Ok(())
}
