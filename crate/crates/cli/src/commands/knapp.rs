use csh_core::knapp::{
    amplitude_scan, box_norm_exponent, resonance_scan, window_indices, AmplitudeKind, AmplitudeScan, KnappConfig,
    Resonance,
};
use serde_json::{json, Value};

use crate::config::KnappParams;
use crate::error::{CliError, CliResult};
use crate::output::{num, relative_name, Session};
use crate::plot::{emit_plot_script, PlotKind};

fn kinds(amplitude: &str) -> CliResult<Vec<AmplitudeKind>> {
    match amplitude {
        "second" => Ok(vec![AmplitudeKind::Second]),
        "third" => Ok(vec![AmplitudeKind::Third]),
        "both" => Ok(vec![AmplitudeKind::Second, AmplitudeKind::Third]),
        other => Err(CliError::Usage(format!("amplitude must be second, third or both (got {other:?})"))),
    }
}

fn label(kind: AmplitudeKind) -> &'static str {
    match kind {
        AmplitudeKind::Second => "second",
        AmplitudeKind::Third => "third",
    }
}

fn write_scan(s: &mut Session, scan: &AmplitudeScan) -> CliResult<String> {
    let (total, trig, parts): (&str, &str, Vec<&str>) = match scan.kind {
        AmplitudeKind::Second => ("abs_F_d2phi", "sin_t_xi", vec!["abs_I", "ci95_I", "abs_II", "ci95_II", "abs_III", "ci95_III", "abs_IV", "ci95_IV"]),
        AmplitudeKind::Third => (
            "abs_F_d3A2",
            "cos_t_xi",
            vec!["abs_N_resonant", "ci95_N_resonant", "abs_N_nonresonant", "ci95_N_nonresonant", "abs_II", "ci95_II", "I1_bound", "I1_bound_ci95"],
        ),
    };
    let mut header = vec!["k", "lambda", total, "ci95_total"];
    header.extend(parts);
    header.push(trig);
    let rows: Vec<Vec<String>> = scan
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![r.k.to_string(), num(r.lambda), num(r.value), num(r.ci95)];
            row.extend(r.parts.iter().flat_map(|&(v, c)| [num(v), num(c)]));
            row.push(num(r.trig));
            row
        })
        .collect();
    let name = format!("knapp-{}.csv", label(scan.kind));
    s.write_csv(&name, &header, &rows)?;
    let script = emit_plot_script(&s.path(&name), PlotKind::Knapp)?;
    s.record(&relative_name(&script));
    Ok(name)
}

pub fn run(s: &mut Session, p: &KnappParams) -> CliResult<()> {
    let base = KnappConfig {
        lambda: 1e4,
        eps: p.eps,
        rho: p.rho,
        k: 1,
        c: p.c,
        m: p.m,
        mc_samples: p.samples,
        seed: s.common.seed,
        threads: s.common.threads,
    };
    let v = box_norm_exponent(p.c);
    let mut summary = serde_json::Map::new();
    let mut slopes = [None, None];
    for kind in kinds(&p.amplitude)? {
        let ks = match &p.k_values {
            Some(ks) if !ks.is_empty() => ks.clone(),
            _ => window_indices(kind.window(), p.eps, p.rho, p.lambda_min, p.lambda_decades, p.points)?,
        };
        s.log(1, format!("{} derivative scan over k = {ks:?}", label(kind)));
        let scan = amplitude_scan(kind, &base, &ks)?;
        if scan.rows.is_empty() {
            return Err(CliError::Usage(format!("no feasible λ window among k = {ks:?} (ρ = {})", p.rho)));
        }
        let csv = write_scan(s, &scan)?;
        let fit = scan.fit.as_ref();
        let (threshold_name, threshold) = match kind {
            AmplitudeKind::Second => ("sigma", fit.map(|f| f.fit.slope - v)),
            AmplitudeKind::Third => ("s", fit.map(|f| (f.fit.slope - 2.0 * v) / 2.0)),
        };
        if let Some(f) = fit {
            slopes[matches!(kind, AmplitudeKind::Third) as usize] = Some((f.fit.slope, f.fit.slope_stderr));
        }
        let finite = scan.rows.iter().all(|r| r.value.is_finite() && r.ci95.is_finite());
        s.check(&format!("{} amplitudes finite", label(kind)), finite, csv.clone());
        s.check(&format!("{} fit available", label(kind)), fit.is_some(), format!("{} points", scan.rows.len()));
        let lambda_span = scan.rows.last().map(|r| r.lambda).unwrap_or(0.0) / scan.rows[0].lambda;
        summary.insert(
            label(kind).to_string(),
            json!({
                "csv": csv,
                "k": scan.rows.iter().map(|r| r.k).collect::<Vec<_>>(),
                "lambda_decades": lambda_span.log10(),
                "skipped_windows": scan.skipped_windows,
                "fit": fit.map(|f| &f.fit),
                "slope_band_95": fit.map(|f| [f.slope_band.0, f.slope_band.1]),
                "band_excludes_zero": fit.map(|f| f.slope_band.0 > 0.0),
                "implied_threshold": { threshold_name: threshold },
            }),
        );
        if let Some(f) = fit {
            s.say(format!(
                "{} derivative: slope {:.4} (95% band [{:.4}, {:.4}]) over {:.2} decades, implied {threshold_name} ≥ {:.4}",
                label(kind),
                f.fit.slope,
                f.slope_band.0,
                f.slope_band.1,
                lambda_span.log10(),
                threshold.unwrap_or(f64::NAN)
            ));
        }
    }
    if let [Some(second), Some(third)] = slopes {
        let r = csh_core::knapp::necessary_condition_report(third, second, p.c);
        summary.insert("necessary_conditions".into(), serde_json::to_value(&r)?);
    }
    summary.insert("box_norm_exponent".into(), json!(v));
    if p.resonance {
        summary.insert("resonance".into(), run_resonance(s, p)?);
    }
    s.write_json("knapp-summary.json", &Value::Object(summary))?;
    Ok(())
}

fn run_resonance(s: &mut Session, p: &KnappParams) -> CliResult<Value> {
    let lambdas: Vec<f64> = p.resonance_exponents.iter().map(|&e| 2f64.powi(e)).collect();
    s.log(1, format!("resonance scan over {} λ values", lambdas.len()));
    let report = resonance_scan(&lambdas, p.resonance_c, p.m, p.resonance_samples, s.common.seed);
    let mut header = vec!["lambda".to_string()];
    header.extend(report.tuples.iter().map(|t| format!("max_abs_omega_{}", t.tuple)));
    let rows: Vec<Vec<String>> = lambdas
        .iter()
        .enumerate()
        .map(|(i, &l)| std::iter::once(num(l)).chain(report.tuples.iter().map(|t| num(t.max_abs_omega[i]))).collect())
        .collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    s.write_csv("knapp-resonance.csv", &header_refs, &rows)?;
    let script = emit_plot_script(&s.path("knapp-resonance.csv"), PlotKind::Resonance)?;
    s.record(&relative_name(&script));
    s.check(
        "conjugate branch support empty",
        report.tilde_support_empty.iter().all(|&e| e),
        format!("{} λ values", lambdas.len()),
    );
    for t in &report.tuples {
        let slope = t.fit.as_ref().map(|f| f.slope).unwrap_or(f64::NAN);
        let class = if t.class == Resonance::Resonant { "resonant" } else { "nonresonant" };
        s.say(format!("tuple {} {class:>11}: |ω| exponent {slope:.3}, max|ω|/λ = {:.4}", t.tuple, t.linear_constant));
    }
    Ok(serde_json::to_value(&report)?)
}
