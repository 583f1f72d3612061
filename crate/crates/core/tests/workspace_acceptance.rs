//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero when any criterion fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use csh_core::evolution::{constraint_compatible_data, CshSystem, EvolutionOptions, FieldState, PicardOptions};
use csh_core::knapp::{
    amplitude_scan, necessary_condition_report, resonance_scan, window_indices, AmplitudeKind, KnappConfig, Resonance,
};
use csh_core::lie_kernel::{check_casimir_commutation, higgs_gradient, higgs_potential, higgs_potential_matrix};
use csh_core::null_forms::{make_lorenz_snapshot, make_matter_snapshot, null_symbol_bound_scan, null_symbols, verify_null_decomposition};
use csh_core::stats::loglog_fit;
use csh_core::xsb_analyzer::{
    check_interaction_geometry, measure_bilinear_constant, BilinearMeasurement, BilinearOptions, DyadicBlock, SampleFamily,
    Sign,
};
use csh_core::{build_su_n_basis, Grid2D, LieElement, PhysicsParams};
use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn lie_kernel_exactness() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for n in [2, 3] {
        let g = build_su_n_basis(n).expect("basis");
        worst = worst.max(g.invariant_report().max_residual());
        worst = worst.max(check_casimir_commutation(&g).casimir_residual);
    }
    let f123 = build_su_n_basis(2).expect("basis").f(0, 1, 2);
    let t = start.elapsed();
    outcome(
        worst <= 1e-12 && (f123 - 2.0).abs() <= 1e-12 && within(t, 1.0),
        format!("max residual {worst:.2e}, f^12_3 = {f123}, {:.3}s", t.as_secs_f64()),
    )
}

fn higgs_gradient_finite_differences() -> Outcome {
    let start = Instant::now();
    let g = build_su_n_basis(2).expect("basis");
    let p = PhysicsParams::new(1.0).expect("params");
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let h = 1e-5;
    let (mut grad_err, mut pot_err): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let phi = LieElement::new((0..g.dim()).map(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect());
        let v = |x: &LieElement| higgs_potential(x, &g, &p).expect("potential");
        let analytic = higgs_gradient(&phi, &g, &p).expect("gradient");
        let mut diff2 = 0.0;
        for a in 0..g.dim() {
            let shifted = |d: C| {
                let mut x = phi.clone();
                x.coeffs[a] += d;
                v(&x)
            };
            let dx = (shifted(C::new(h, 0.0)) - shifted(C::new(-h, 0.0))) / (2.0 * h);
            let dy = (shifted(C::new(0.0, h)) - shifted(C::new(0.0, -h))) / (2.0 * h);
            diff2 += (analytic.coeffs[a] - 0.5 * C::new(dx, dy)).norm_sqr();
        }
        grad_err = grad_err.max(diff2.sqrt() / analytic.norm());
        let vm = higgs_potential_matrix(&phi, &g, &p).expect("matrix potential");
        pot_err = pot_err.max((v(&phi) - vm).abs() / vm.abs().max(1.0));
    }
    let t = start.elapsed();
    outcome(
        grad_err <= 1e-6 && pot_err <= 1e-10 && within(t, 10.0),
        format!("gradient rel. error {grad_err:.2e}, potential gap {pot_err:.2e}, {:.2}s", t.as_secs_f64()),
    )
}

fn null_decomposition() -> Outcome {
    let start = Instant::now();
    let grid = Grid2D::new(std::f64::consts::TAU, 128).expect("grid");
    let g = build_su_n_basis(2).expect("basis");
    let worst = (0..20u64)
        .map(|seed| {
            let a = make_lorenz_snapshot(seed, &grid, &g, 16);
            let phi = make_matter_snapshot(seed + 1000, &grid, &g, 16);
            verify_null_decomposition(&a, &phi, &g).expect("decomposition").max_residual()
        })
        .fold(0.0, f64::max);
    let t = start.elapsed();
    outcome(worst <= 1e-8 && within(t, 30.0), format!("max relative residual {worst:.2e} over 20 seeds, {:.1}s", t.as_secs_f64()))
}

fn null_symbol_bound() -> Outcome {
    let r = null_symbol_bound_scan(100_000, 5).expect("scan");
    let collinear = [[1.0, 2.0], [-3.0, 0.5], [1e3, -1e-2]]
        .iter()
        .map(|&x: &[f64; 2]| {
            let s = null_symbols(x, [2.5 * x[0], 2.5 * x[1]]);
            s.q_j0[0].abs().max(s.q_j0[1].abs()).max(s.q_jk.abs()) / (x[0].hypot(x[1]).powi(2) * 2.5)
        })
        .fold(0.0, f64::max);
    outcome(
        r.max_ratio_jk <= 1.0 + 1e-9 && r.max_ratio_j0.is_finite() && r.degenerate_flagged == 0 && collinear <= 1e-15,
        format!(
            "q_jk ratio {:.12}, C_emp(q_j0) = {:.6}, collinear |q| {collinear:.1e}, flagged {}",
            r.max_ratio_jk, r.max_ratio_j0, r.degenerate_flagged
        ),
    )
}

fn interaction_geometry() -> Outcome {
    let start = Instant::now();
    let r = check_interaction_geometry(1_000_000, 3, 100.0, &SampleFamily::ALL);
    let cone = check_interaction_geometry(200_000, 4, 100.0, &[SampleFamily::Cone, SampleFamily::HighHighOpposite]);
    let regime_ok = r.regime_samples > 0 && r.regime_min_theta >= 0.5 && r.regime_max_theta <= std::f64::consts::PI;
    outcome(
        r.min_angular_ratio >= 0.1 && regime_ok,
        format!(
            "min ratio {:.4} (general infimum 2/(3π²) = {:.4}; on-cone families {:.4} vs 2/π² = {:.4}), \
             opposite-sign regime θ ∈ [{:.3}, {:.3}] over {} samples, {:.1}s",
            r.min_angular_ratio,
            SampleFamily::Uniform.angular_infimum(),
            cone.min_angular_ratio,
            SampleFamily::Cone.angular_infimum(),
            r.regime_min_theta,
            r.regime_max_theta,
            r.regime_samples,
            start.elapsed().as_secs_f64()
        ),
    )
}

fn blocks(signs: [Sign; 3], n: [u64; 3], l: u64) -> [DyadicBlock; 3] {
    [0, 1, 2].map(|j| DyadicBlock::new(signs[j], n[j], l).expect("block"))
}

fn bilinear_grid() -> Outcome {
    let start = Instant::now();
    let opts = BilinearOptions { trials: 4, power_iterations: 10, seed: 0, method: None };
    let signs = [Sign::Plus, Sign::Plus, Sign::Minus];
    let mut grid = Vec::new();
    for l in [1, 2] {
        for n0 in [1, 2, 4] {
            for n1 in [1, 2, 4] {
                for n2 in [1, 2, 4] {
                    grid.push(measure_bilinear_constant(blocks(signs, [n0, n1, n2], l), &opts));
                }
            }
        }
    }
    let feasible: Vec<&BilinearMeasurement> = grid.iter().filter(|m| m.feasible).collect();
    let worst = feasible.iter().map(|m| m.ratio).fold(0.0, f64::max);
    let t = start.elapsed();
    outcome(
        grid.len() >= 50 && !feasible.is_empty() && worst <= 10.0 && within(t, 600.0),
        format!("{} triples ({} feasible), worst ratio {worst:.4} vs global constant 10, {:.1}s", grid.len(), feasible.len(), t.as_secs_f64()),
    )
}

fn scaling_slopes(signs: [Sign; 3]) -> (usize, Option<f64>, Option<f64>) {
    let opts = BilinearOptions { trials: 4, power_iterations: 5, seed: 0, method: None };
    let scan: Vec<BilinearMeasurement> =
        [4, 8, 16, 32, 64].iter().map(|&n| measure_bilinear_constant(blocks(signs, [1, n, n], 1), &opts)).collect();
    let theory: Vec<(f64, f64)> = scan.iter().map(|m| (m.blocks[1].n as f64, m.theoretical)).collect();
    let measured: Vec<(f64, f64)> = scan.iter().filter(|m| m.feasible).map(|m| (m.blocks[1].n as f64, m.empirical)).collect();
    let slope = |pts: &[(f64, f64)]| loglog_fit(pts, 0.0).ok().map(|f| f.slope);
    (measured.len(), slope(&theory), slope(&measured))
}

fn bilinear_scaling() -> Outcome {
    let start = Instant::now();
    let (feasible, theory, measured) = scaling_slopes([Sign::Plus, Sign::Plus, Sign::Minus]);
    let (same_feasible, same_theory, same_measured) = scaling_slopes([Sign::Plus, Sign::Plus, Sign::Plus]);
    let passed = matches!((theory, measured), (Some(t), Some(e)) if (e - t).abs() <= 0.2);
    let fmt = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.3}"));
    outcome(
        passed,
        format!(
            "opposite input signs: {feasible}/5 feasible, slope {} vs theory {}; same signs: {same_feasible}/5 feasible, \
             slope {} vs theory {}, {:.1}s",
            fmt(measured),
            fmt(theory),
            fmt(same_measured),
            fmt(same_theory),
            start.elapsed().as_secs_f64()
        ),
    )
}

fn evolution_sanity() -> Outcome {
    let start = Instant::now();
    let grid = Grid2D::new(std::f64::consts::TAU, 128).expect("grid");
    let g = build_su_n_basis(2).expect("basis");
    let sys = CshSystem::new(&grid, &g, PhysicsParams::new(1.0).expect("params"), EvolutionOptions::default());
    let data = constraint_compatible_data(0, &grid, &g, 1e-2, 0.0, 4).expect("data");
    let state = sys.initial_state(&data).expect("state");
    let frames = sys.evolve(&state, 0.005, 20, 5).expect("evolve");
    let rows = sys.monitor(&frames, 0.75).expect("monitor");
    let gauge = rows.iter().map(|r| r.gauge_residual).fold(0.0, f64::max);
    let field = rows.iter().map(|r| r.field_residual_abs / r.phi_hs.hypot(r.a_hs)).fold(0.0, f64::max);

    let finals: Vec<FieldState> =
        [5, 10, 20].iter().map(|&n| sys.evolve(&state, 0.1 / n as f64, n, n).expect("evolve").pop().expect("frame")).collect();
    let h: Vec<_> = finals.iter().map(|f| sys.split_to_halfwaves(f)).collect();
    let order = (sys.halfwave_distance(&h[0], &h[1], 1.0) / sys.halfwave_distance(&h[1], &h[2], 1.0)).log2();

    let opts = PicardOptions::default();
    let picard = sys.picard_iterate(&data, 0.1, &opts).expect("picard");
    let stepped = sys.evolve(&state, 0.1 / opts.intervals as f64, opts.intervals, 1).expect("evolve");
    let (mut worst, mut scale) = (0.0f64, 0.0f64);
    for (p, f) in picard.trajectory.iter().zip(&stepped) {
        let hs = sys.split_to_halfwaves(f);
        worst = worst.max(sys.halfwave_distance(p, &hs, 1.0));
        scale = scale.max(sys.halfwave_norm(&hs, 1.0));
    }
    let agreement = worst / scale;
    let ratio = picard.max_ratio();
    let t = start.elapsed();
    outcome(
        gauge <= 1e-4
            && field <= 1e-4
            && order >= 2.0
            && picard.converged
            && ratio < 0.5
            && agreement <= 1e-6
            && within(t, 300.0),
        format!(
            "gauge {gauge:.2e}, constraint/field norms {field:.2e}, temporal order {order:.2}, Picard ratio {ratio:.3e}, \
             Picard vs stepping {agreement:.2e}, {:.1}s",
            t.as_secs_f64()
        ),
    )
}

fn resonance_structure() -> Outcome {
    let start = Instant::now();
    let lambdas: Vec<f64> = (8..=16).map(|e| 2f64.powi(e)).collect();
    let r = resonance_scan(&lambdas, 1e-2, std::f64::consts::SQRT_2, 20_000, 0);
    let mut failures = Vec::new();
    let mut exponents = Vec::new();
    for t in &r.tuples {
        let p = t.fit.as_ref().map_or(f64::NAN, |f| f.slope);
        let ok = match t.class {
            Resonance::Resonant => p <= 0.6,
            Resonance::Nonresonant => (p - 1.0).abs() <= 0.1,
        };
        if t.class == Resonance::Resonant {
            exponents.push(format!("{} {p:.2}", t.tuple));
        }
        if !ok {
            failures.push(t.tuple.clone());
        }
    }
    let nonresonant = r
        .tuples
        .iter()
        .filter(|t| t.class == Resonance::Nonresonant)
        .filter_map(|t| t.fit.as_ref().map(|f| f.slope))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p), hi.max(p)));
    let empty = r.tilde_support_empty.iter().all(|&e| e);
    outcome(
        failures.is_empty() && empty,
        format!(
            "resonant exponents [{}], nonresonant in [{:.3}, {:.3}], conjugate support empty: {empty}, off-target: [{}], {:.1}s",
            exponents.join(", "),
            nonresonant.0,
            nonresonant.1,
            failures.join(" "),
            start.elapsed().as_secs_f64()
        ),
    )
}

fn knapp_scaling() -> Outcome {
    let start = Instant::now();
    let base = KnappConfig { c: 1e-2, mc_samples: 1_000_000, ..KnappConfig::default() };
    let scan = |kind: AmplitudeKind| {
        let ks = window_indices(kind.window(), base.eps, base.rho, None, 2.0, 8).expect("windows");
        amplitude_scan(kind, &base, &ks).expect("scan")
    };
    let second = scan(AmplitudeKind::Second);
    let third = scan(AmplitudeKind::Third);
    let (Some(f2), Some(f3)) = (second.fit.as_ref(), third.fit.as_ref()) else {
        return outcome(false, "no power-law fit");
    };
    let decades = |s: &csh_core::knapp::AmplitudeScan| (s.rows.last().map_or(0.0, |r| r.lambda) / s.rows[0].lambda).log10();
    let (d2, d3) = (decades(&second), decades(&third));
    let r = necessary_condition_report((f3.fit.slope, f3.fit.slope_stderr), (f2.fit.slope, f2.fit.slope_stderr), base.c);
    let t = start.elapsed();
    outcome(
        (f3.fit.slope - 2.5).abs() <= 0.2
            && (f2.fit.slope - 1.0).abs() <= 0.15
            && d2 >= 2.0
            && d3 >= 2.0
            && f2.slope_band.0 > 0.0
            && f3.slope_band.0 > 0.0
            && (r.s_threshold - 0.5).abs() <= 0.1
            && (r.sigma_threshold - 0.25).abs() <= 0.1
            && within(t, 600.0),
        format!(
            "third slope {:.4} [{:.3}, {:.3}] over {d3:.2} decades, second slope {:.4} [{:.3}, {:.3}] over {d2:.2} decades, \
             (s, σ) = ({:.3}, {:.3}), {:.1}s",
            f3.fit.slope,
            f3.slope_band.0,
            f3.slope_band.1,
            f2.fit.slope,
            f2.slope_band.0,
            f2.slope_band.1,
            r.s_threshold,
            r.sigma_threshold,
            t.as_secs_f64()
        ),
    )
}

fn cli_binary() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let bin = exe.parent()?.parent()?.join(format!("cshlab{}", std::env::consts::EXE_SUFFIX));
    bin.exists().then_some(bin)
}

fn collect_files(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) -> std::io::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else if path.file_name().is_some_and(|n| n != "manifest.json") {
            let rel = path.strip_prefix(root).expect("inside root").to_string_lossy().into_owned();
            out.insert(rel, std::fs::read(&path)?);
        }
    }
    Ok(())
}

fn run_cli(bin: &Path, dir: &Path, threads: usize, args: &[&str]) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let status = Command::new(bin)
        .args(args)
        .args(["--seed", "7", "--threads", &threads.to_string(), "--quiet", "--out-dir"])
        .arg(dir)
        .status()
        .map_err(|e| e.to_string())?;
    if !status.success() {
        return Err(format!("{} exited with {status}", args[0]));
    }
    let mut files = BTreeMap::new();
    collect_files(dir, dir, &mut files).map_err(|e| e.to_string())?;
    Ok(files)
}

fn determinism() -> Outcome {
    let start = Instant::now();
    let Some(bin) = cli_binary() else {
        return outcome(false, "cshlab binary not found next to the test executables");
    };
    let runs: [&[&str]; 6] = [
        &["lie-info", "--n", "3"],
        &["null-check", "--m", "32", "--band", "6", "--seeds", "3", "--samples", "5000"],
        &["bilinear-scan", "--n-values", "1,2", "--l-values", "1,2", "--scaling-n", "4,8,16,32"],
        &[
            "knapp-scan",
            "--amplitude",
            "both",
            "--samples",
            "20000",
            "--resonance",
            "--resonance-exponents",
            "8,10,12,14",
            "--resonance-samples",
            "2000",
        ],
        &["simulate", "--m", "32", "--band", "2", "--t-final", "0.02", "--stride", "2", "--picard"],
        &["plot-script", "--kind", "knapp"],
    ];
    let tmp = tempfile::tempdir().expect("tempdir");
    let mut compared = 0;
    for (i, args) in runs.iter().enumerate() {
        let outputs: Result<Vec<_>, String> = [1, 2]
            .iter()
            .map(|&threads| {
                let dir = tmp.path().join(format!("run{i}-{threads}"));
                if args[0] == "plot-script" {
                    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
                    let csv = dir.join("knapp-input.csv");
                    std::fs::write(&csv, "k,lambda,abs_F_d3A2,ci95_total\n1,1e3,2,0\n2,1e4,7,0\n3,1e5,19,0\n4,1e6,63,0\n")
                        .map_err(|e| e.to_string())?;
                    let csv = csv.to_string_lossy().into_owned();
                    run_cli(&bin, &dir, threads, &[args[0], "--csv", &csv, args[1], args[2]])
                } else {
                    run_cli(&bin, &dir, threads, args)
                }
            })
            .collect();
        match outputs {
            Ok(o) if o[0] == o[1] && !o[0].is_empty() => compared += o[0].len(),
            Ok(o) => {
                let differing: Vec<&String> = o[0].keys().filter(|k| o[1].get(*k) != o[0].get(*k)).collect();
                return outcome(false, format!("{} outputs differ: {differing:?}", args[0]));
            }
            Err(e) => return outcome(false, e),
        }
    }
    outcome(
        true,
        format!("{} subcommands, {compared} files byte-identical across repeated runs (1 and 2 threads), {:.1}s", runs.len(), start.elapsed().as_secs_f64()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("lie-kernel-exactness", lie_kernel_exactness),
        ("higgs-gradient-finite-differences", higgs_gradient_finite_differences),
        ("null-decomposition-residual", null_decomposition),
        ("null-symbol-bound", null_symbol_bound),
        ("interaction-geometry", interaction_geometry),
        ("bilinear-constant-grid", bilinear_grid),
        ("bilinear-opposite-sign-scaling", bilinear_scaling),
        ("evolution-sanity", evolution_sanity),
        ("resonance-structure", resonance_structure),
        ("knapp-scaling", knapp_scaling),
        ("cli-determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let o = check();
        println!("{} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        if !o.passed {
            failed += 1;
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
