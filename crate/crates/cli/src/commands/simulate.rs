use std::fs;

use csh_core::evolution::{constraint_compatible_data, CshSystem, EvolutionOptions, FieldState, InitialData, MonitorRow, PicardOptions};
use csh_core::snapshot::{write_snapshot, Snapshot};
use csh_core::{build_su_n_basis, Grid2D, PhysicsParams};
use serde_json::json;

use crate::config::SimulateParams;
use crate::error::{CliError, CliResult};
use crate::output::{num, relative_name, Session};
use crate::plot::{emit_plot_script, PlotKind};

fn snapshot_of(frame: &FieldState, n: usize) -> Snapshot {
    let mut fields = vec![("phi".to_string(), frame.phi.clone()), ("dphi".to_string(), frame.dphi.clone())];
    for mu in 0..3 {
        fields.push((format!("a{mu}"), frame.a[mu].clone()));
        fields.push((format!("da{mu}"), frame.da[mu].clone()));
    }
    Snapshot { n, t: frame.t, fields }
}

/// `‖F − εJ‖` relative to the combined H^s norm of the fields.
fn field_relative(r: &MonitorRow) -> f64 {
    let norm = r.phi_hs.hypot(r.a_hs);
    if norm > 0.0 {
        r.field_residual_abs / norm
    } else {
        r.field_residual_abs
    }
}

pub fn run(s: &mut Session, p: &SimulateParams) -> CliResult<()> {
    if !(p.dt > 0.0 && p.t_final > 0.0) {
        return Err(CliError::Usage("dt and t_final must be positive".into()));
    }
    let steps = (p.t_final / p.dt).round() as usize;
    if steps == 0 || ((steps as f64) * p.dt - p.t_final).abs() > 1e-9 * p.t_final {
        return Err(CliError::Usage(format!("t_final = {} is not a multiple of dt = {}", p.t_final, p.dt)));
    }
    let grid = Grid2D::new(p.box_length, p.m)?;
    let gens = build_su_n_basis(p.n)?;
    let options = EvolutionOptions {
        higgs_sign: p.higgs_sign,
        nonlinear: p.nonlinear,
        dealias_order: p.dealias_order,
        initial_current: p.initial_current,
    };
    let sys = CshSystem::new(&grid, &gens, PhysicsParams::new(p.v)?, options);
    let data = match p.data.as_str() {
        "constraint-compatible" => {
            constraint_compatible_data(s.common.seed, &grid, &gens, p.amplitude, p.gradient_amplitude, p.band)?
        }
        "zero" => InitialData::zeros(&grid, gens.dim()),
        other => return Err(CliError::Usage(format!("unknown data recipe {other:?} (constraint-compatible or zero)"))),
    };
    let constraint = sys.constraint_residual(&data)?;
    s.log(1, format!("data: H¹ norm {:e}, constraint residual {constraint:e}", data.sobolev_norm(1.0)));
    let state = sys.initial_state(&data)?;
    s.log(1, format!("evolving {steps} steps of {} on {}²", p.dt, p.m));
    let frames = sys.evolve(&state, p.dt, steps, p.stride)?;
    let monitor = sys.monitor(&frames, p.monitor_s)?;
    let header = [
        "t",
        "gauge_residual_rel",
        "gauge_residual_abs",
        "constraint_abs",
        "field_residual_rel",
        "field_residual_abs",
        "field_residual_vs_field_norm",
        "phi_hs_norm",
        "a_hs_norm",
    ];
    let rows: Vec<Vec<String>> = monitor
        .iter()
        .map(|r| {
            [
                r.t,
                r.gauge_residual,
                r.gauge_residual_abs,
                r.constraint_abs,
                r.field_residual,
                r.field_residual_abs,
                field_relative(r),
                r.phi_hs,
                r.a_hs,
            ]
            .map(num)
            .to_vec()
        })
        .collect();
    s.write_csv("simulate-monitor.csv", &header, &rows)?;
    let script = emit_plot_script(&s.path("simulate-monitor.csv"), PlotKind::Monitor)?;
    s.record(&relative_name(&script));
    if p.snapshots {
        fs::create_dir_all(s.path("frames"))?;
        for (i, frame) in frames.iter().enumerate() {
            let name = format!("frames/frame-{i:04}.bin");
            write_snapshot(&s.path(&name), &snapshot_of(frame, p.n))?;
            s.record(&name);
            s.record(&format!("frames/frame-{i:04}.json"));
        }
    }
    let max_gauge = monitor.iter().map(|r| r.gauge_residual).fold(0.0, f64::max);
    let max_field = monitor.iter().map(field_relative).fold(0.0, f64::max);

    let picard = if p.picard {
        let opts = PicardOptions { intervals: steps.max(3), ..PicardOptions::default() };
        let report = sys.picard_iterate(&data, p.t_final, &opts)?;
        let mesh_dt = p.t_final / opts.intervals as f64;
        let stepped = sys.evolve(&state, mesh_dt, opts.intervals, 1)?;
        let (mut worst, mut scale) = (0.0f64, 0.0f64);
        for (h, f) in report.trajectory.iter().zip(&stepped) {
            let hs = sys.split_to_halfwaves(f);
            worst = worst.max(sys.halfwave_distance(h, &hs, 1.0));
            scale = scale.max(sys.halfwave_norm(&hs, 1.0));
        }
        let agreement = if scale > 0.0 { worst / scale } else { worst };
        s.check("picard contraction", report.converged && !report.contraction_failed, format!("max ratio {:.3e}", report.max_ratio()));
        Some(json!({
            "intervals": opts.intervals,
            "differences": report.differences,
            "ratios": report.ratios,
            "max_ratio": report.max_ratio(),
            "converged": report.converged,
            "contraction_failed": report.contraction_failed,
            "relative_h1_distance_to_stepper": agreement,
        }))
    } else {
        None
    };
    let summary = json!({
        "steps": steps,
        "frames": frames.len(),
        "data_h1_norm": data.sobolev_norm(1.0),
        "initial_constraint_residual": constraint,
        "max_gauge_residual_rel": max_gauge,
        "max_field_residual_vs_field_norm": max_field,
        "max_field_residual_rel": monitor.iter().map(|r| r.field_residual).fold(0.0, f64::max),
        "picard": picard,
    });
    s.write_json("simulate-summary.json", &summary)?;
    s.say(format!(
        "simulate: {steps} steps to t = {}, max relative gauge residual {max_gauge:e}, max field residual relative to field norms {max_field:e}",
        p.t_final
    ));
    s.check("gauge residual", max_gauge <= p.max_gauge_residual, format!("{max_gauge:e}"));
    s.check("field residual", max_field <= p.max_field_residual, format!("{max_field:e}"));
    Ok(())
}
