use csh_core::parallel::par_map;
use csh_core::stats::loglog_fit;
use csh_core::xsb_analyzer::{measure_bilinear_constant, BilinearMeasurement, BilinearOptions, DyadicBlock, Sign};
use serde_json::json;

use crate::config::BilinearParams;
use crate::error::{CliError, CliResult};
use crate::output::{num, Session};
use crate::plot::{emit_plot_script, PlotKind};

/// Slope tolerance of the scaling scan against the theoretical exponent.
const SLOPE_TOLERANCE: f64 = 0.2;

fn parse_signs(pattern: &str) -> CliResult<[Sign; 3]> {
    let signs: Vec<Sign> = pattern.chars().map(Sign::parse).collect::<Option<_>>().unwrap_or_default();
    signs
        .try_into()
        .map_err(|_| CliError::Usage(format!("sign pattern {pattern:?} must be three characters from {{+,-}}")))
}

fn signs_label(blocks: &[DyadicBlock; 3]) -> String {
    blocks.iter().map(|b| b.sign.symbol()).collect()
}

pub fn run(s: &mut Session, p: &BilinearParams) -> CliResult<()> {
    let patterns = p.signs.iter().map(|x| parse_signs(x)).collect::<CliResult<Vec<_>>>()?;
    let mut triples = Vec::new();
    for &l in &p.l_values {
        for &n0 in &p.n_values {
            for &n1 in &p.n_values {
                for &n2 in &p.n_values {
                    for sg in &patterns {
                        triples.push([
                            DyadicBlock::new(sg[0], n0, l)?,
                            DyadicBlock::new(sg[1], n1, l)?,
                            DyadicBlock::new(sg[2], n2, l)?,
                        ]);
                    }
                }
            }
        }
    }
    let opts = BilinearOptions {
        trials: p.trials,
        power_iterations: if p.adversarial { p.power_iterations } else { 0 },
        seed: s.common.seed,
        method: None,
    };
    s.log(1, format!("measuring {} block triples", triples.len()));
    let grid: Vec<BilinearMeasurement> = par_map(&triples, s.common.threads, |b| measure_bilinear_constant(*b, &opts));
    let header = [
        "n0", "l0", "n1", "l1", "n2", "l2", "signs", "feasible", "empirical_norm", "random_trial_max",
        "theoretical_min_c", "ratio", "trivial_bound", "c1", "c2_first", "c2_second", "c3",
    ];
    let rows: Vec<Vec<String>> = grid
        .iter()
        .map(|m| {
            let b = &m.blocks;
            vec![
                b[0].n.to_string(),
                b[0].l.to_string(),
                b[1].n.to_string(),
                b[1].l.to_string(),
                b[2].n.to_string(),
                b[2].l.to_string(),
                signs_label(b),
                m.feasible.to_string(),
                num(m.empirical),
                num(m.random_max),
                num(m.theoretical),
                num(m.ratio),
                num(m.trivial_bound),
                num(m.constants.c1),
                num(m.constants.c2_first),
                num(m.constants.c2_second),
                num(m.constants.c3),
            ]
        })
        .collect();
    s.write_csv("bilinear-scan.csv", &header, &rows)?;
    let feasible: Vec<&BilinearMeasurement> = grid.iter().filter(|m| m.feasible).collect();
    let worst = feasible.iter().map(|m| m.ratio).fold(0.0, f64::max);

    let scaling = if p.scaling_n.is_empty() {
        None
    } else {
        let sg = parse_signs(&p.scaling_signs)?;
        let blocks = p
            .scaling_n
            .iter()
            .map(|&n| Ok([DyadicBlock::new(sg[0], 1, 1)?, DyadicBlock::new(sg[1], n, 1)?, DyadicBlock::new(sg[2], n, 1)?]))
            .collect::<CliResult<Vec<_>>>()?;
        let sopts = BilinearOptions { power_iterations: p.scaling_power_iterations, ..opts };
        s.log(1, format!("scaling scan over N = {:?}", p.scaling_n));
        let scan: Vec<BilinearMeasurement> = par_map(&blocks, s.common.threads, |b| measure_bilinear_constant(*b, &sopts));
        let rows: Vec<Vec<String>> = scan
            .iter()
            .map(|m| {
                vec![
                    m.blocks[1].n.to_string(),
                    signs_label(&m.blocks),
                    m.feasible.to_string(),
                    num(m.empirical),
                    num(m.theoretical),
                    num(m.ratio),
                ]
            })
            .collect();
        s.write_csv("bilinear-scaling.csv", &["n", "signs", "feasible", "empirical_norm", "theoretical_min_c", "ratio"], &rows)?;
        if let Ok(script) = emit_plot_script(&s.path("bilinear-scaling.csv"), PlotKind::BilinearScaling) {
            s.record(&crate::output::relative_name(&script));
        }
        let theory: Vec<(f64, f64)> = scan.iter().map(|m| (m.blocks[1].n as f64, m.theoretical)).collect();
        let measured: Vec<(f64, f64)> =
            scan.iter().filter(|m| m.feasible).map(|m| (m.blocks[1].n as f64, m.empirical)).collect();
        let theory_fit = loglog_fit(&theory, 0.0).ok();
        let measured_fit = loglog_fit(&measured, 0.0).ok();
        Some(json!({
            "signs": p.scaling_signs,
            "n": p.scaling_n,
            "feasible": scan.iter().filter(|m| m.feasible).count(),
            "theoretical_fit": theory_fit,
            "empirical_fit": measured_fit,
            "slope_difference": match (&theory_fit, &measured_fit) {
                (Some(t), Some(e)) => Some(e.slope - t.slope),
                _ => None,
            },
            "slope_tolerance": SLOPE_TOLERANCE,
            "note": if measured_fit.is_none() { "fewer than four feasible triples: the output block cannot be reached" } else { "" },
        }))
    };
    let summary = json!({
        "triples": grid.len(),
        "feasible": feasible.len(),
        "worst_ratio": worst,
        "global_constant": p.global_constant,
        "scaling": scaling,
    });
    s.write_json("bilinear-summary.json", &summary)?;
    s.say(format!(
        "bilinear grid: {} triples ({} feasible), worst empirical/theoretical = {worst:.4} (global constant {})",
        grid.len(),
        feasible.len(),
        p.global_constant
    ));
    if let Some(sc) = &scaling {
        s.say(format!("scaling scan: {}", serde_json::to_string(sc)?));
    }
    s.check("global constant", worst <= p.global_constant, format!("worst ratio {worst:.4}"));
    Ok(())
}
