//! Null forms, their symbols, and the Lorenz-gauge null decomposition of the
//! gauge couplings.
//!
//! Gauge potentials are stored with lower indices `A_μ`; with signature
//! (+,−,−) raising a spatial index flips its sign. The Lorenz condition reads
//! `∂ₜA₀ = ∂₁A₁ + ∂₂A₂` in these components.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{CshError, Result};
use crate::lie_kernel::{CMatrix, GeneratorSet, LieElement};
use crate::spectral_grid::{
    dealias_cutoff, random_band_limited, truncate_band, Axis, Grid2D, LieFieldGrid, Multiplier, Representation,
    ScalarField,
};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Physical-space samples of every su(n) component, `comps[a][x]`.
pub type PointArrays = Vec<Vec<Complex64>>;

/// Band-limits a Lie field and returns its physical samples.
pub fn physical_arrays(u: &LieFieldGrid, cutoff: usize) -> PointArrays {
    u.components()
        .iter()
        .map(|c| {
            let mut s = c.to_spectral();
            truncate_band(u.grid(), s.data_mut(), cutoff);
            s.make_physical();
            s.into_data()
        })
        .collect()
}

/// Transforms physical samples back to a spectral Lie field truncated to the band.
pub fn spectral_from_arrays(grid: &Grid2D, arrays: PointArrays, cutoff: usize) -> LieFieldGrid {
    let comps = arrays
        .into_iter()
        .map(|mut data| {
            grid.forward(&mut data);
            truncate_band(grid, &mut data, cutoff);
            ScalarField::from_data(grid, Representation::Spectral, data).expect("grid-sized array")
        })
        .collect();
    LieFieldGrid::new(comps).expect("non-empty component list")
}

pub fn zero_arrays(dim: usize, len: usize) -> PointArrays {
    vec![vec![ZERO; len]; dim]
}

/// `out_c += s · i f^{ab}_c x_a y_b` at every point.
pub fn bracket_accumulate(g: &GeneratorSet, x: &PointArrays, y: &PointArrays, s: Complex64, out: &mut PointArrays) {
    let i = Complex64::new(0.0, 1.0);
    for e in g.structure_entries() {
        let w = s * i * e.value;
        let (xa, yb) = (&x[e.a], &y[e.b]);
        for ((o, &p), &q) in out[e.c].iter_mut().zip(xa).zip(yb) {
            *o += w * p * q;
        }
    }
}

/// Pointwise commutator arrays `[x, y]`.
pub fn bracket_arrays(g: &GeneratorSet, x: &PointArrays, y: &PointArrays) -> PointArrays {
    let mut out = zero_arrays(g.dim(), x[0].len());
    bracket_accumulate(g, x, y, Complex64::new(1.0, 0.0), &mut out);
    out
}

pub fn conj_arrays(x: &PointArrays) -> PointArrays {
    x.iter().map(|c| c.iter().map(|z| z.conj()).collect()).collect()
}

pub fn axpy_arrays(out: &mut PointArrays, s: Complex64, x: &PointArrays) {
    for (o, c) in out.iter_mut().zip(x) {
        for (p, q) in o.iter_mut().zip(c) {
            *p += s * q;
        }
    }
}

/// A scalar field paired with its time derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedScalar {
    pub value: ScalarField,
    pub rate: ScalarField,
}

impl TimedScalar {
    /// `∂_α u` for α ∈ {0, 1, 2}, spectral.
    pub fn partial(&self, alpha: usize) -> ScalarField {
        match alpha {
            0 => self.rate.to_spectral(),
            j => self.value.derivative(Axis::from_index(j - 1)),
        }
    }
}

/// A Lie-valued field paired with its time derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedLie {
    pub value: LieFieldGrid,
    pub rate: LieFieldGrid,
}

impl TimedLie {
    pub fn zeros(grid: &Grid2D, dim: usize) -> Self {
        let z = LieFieldGrid::zeros(grid, dim, Representation::Spectral);
        Self { value: z.clone(), rate: z }
    }

    pub fn partial(&self, alpha: usize) -> LieFieldGrid {
        match alpha {
            0 => self.rate.to_spectral(),
            j => self.value.derivative(Axis::from_index(j - 1)),
        }
    }

    /// Applies a time-independent multiplier to both the field and its rate.
    pub fn apply_multiplier(&self, m: Multiplier) -> Self {
        Self { value: self.value.apply_multiplier(m), rate: self.rate.apply_multiplier(m) }
    }

    pub fn add(&self, other: &TimedLie) -> Result<Self> {
        Ok(Self { value: self.value.add(&other.value)?, rate: self.rate.add(&other.rate)? })
    }
}

fn check_alpha(alpha: usize) -> Result<()> {
    if alpha > 2 {
        return Err(CshError::InvalidParameter(format!("space-time index {alpha} not in 0..=2")));
    }
    Ok(())
}

/// Dealiased `Σ_k s_k · x_k · y_k` of products of scalar fields, spectral.
fn product_sum(terms: &[(f64, ScalarField, ScalarField)]) -> Result<ScalarField> {
    let grid = terms[0].1.grid().clone();
    let cutoff = dealias_cutoff(grid.m(), 2);
    let mut acc = vec![ZERO; grid.len()];
    for (s, x, y) in terms {
        x.check_compatible(y)?;
        let px = x.truncated(cutoff).to_physical();
        let py = y.truncated(cutoff).to_physical();
        for ((o, a), b) in acc.iter_mut().zip(px.data()).zip(py.data()) {
            *o += *s * a * b;
        }
    }
    grid.forward(&mut acc);
    truncate_band(&grid, &mut acc, cutoff);
    ScalarField::from_data(&grid, Representation::Spectral, acc)
}

/// `Q₀(u, v) = ∂ₜu∂ₜv − ∇u·∇v`.
pub fn q0(u: &TimedScalar, v: &TimedScalar) -> Result<ScalarField> {
    product_sum(&[
        (1.0, u.partial(0), v.partial(0)),
        (-1.0, u.partial(1), v.partial(1)),
        (-1.0, u.partial(2), v.partial(2)),
    ])
}

/// `Q_{αβ}(u, v) = ∂_αu∂_βv − ∂_βu∂_αv`.
pub fn q_alpha_beta(u: &TimedScalar, v: &TimedScalar, alpha: usize, beta: usize) -> Result<ScalarField> {
    check_alpha(alpha)?;
    check_alpha(beta)?;
    let grid = u.value.grid().clone();
    let cutoff = dealias_cutoff(grid.m(), 2);
    let pa = |f: ScalarField| f.truncated(cutoff).to_physical();
    let (ua, ub, va, vb) = (pa(u.partial(alpha)), pa(u.partial(beta)), pa(v.partial(alpha)), pa(v.partial(beta)));
    let mut acc: Vec<Complex64> = (0..grid.len())
        .map(|x| ua.data()[x] * vb.data()[x] - ub.data()[x] * va.data()[x])
        .collect();
    grid.forward(&mut acc);
    truncate_band(&grid, &mut acc, cutoff);
    ScalarField::from_data(&grid, Representation::Spectral, acc)
}

/// `Q_{αβ}[U, V] = [∂_αU, ∂_βV] − [∂_βU, ∂_αV]` through the structure-constant
/// contraction of scalar null forms on components.
pub fn q_bracket(u: &TimedLie, v: &TimedLie, alpha: usize, beta: usize, g: &GeneratorSet) -> Result<LieFieldGrid> {
    check_alpha(alpha)?;
    check_alpha(beta)?;
    let grid = u.value.grid().clone();
    let cutoff = dealias_cutoff(grid.m(), 2);
    let ua = physical_arrays(&u.partial(alpha), cutoff);
    let ub = physical_arrays(&u.partial(beta), cutoff);
    let va = physical_arrays(&v.partial(alpha), cutoff);
    let vb = physical_arrays(&v.partial(beta), cutoff);
    let mut out = zero_arrays(g.dim(), grid.len());
    bracket_accumulate(g, &ua, &vb, Complex64::new(1.0, 0.0), &mut out);
    bracket_accumulate(g, &ub, &va, Complex64::new(-1.0, 0.0), &mut out);
    Ok(spectral_from_arrays(&grid, out, cutoff))
}

/// The same commutator null form assembled from explicit n×n matrices at every point.
pub fn q_bracket_matrix(
    u: &TimedLie,
    v: &TimedLie,
    alpha: usize,
    beta: usize,
    g: &GeneratorSet,
) -> Result<LieFieldGrid> {
    check_alpha(alpha)?;
    check_alpha(beta)?;
    let grid = u.value.grid().clone();
    let cutoff = dealias_cutoff(grid.m(), 2);
    let ua = physical_arrays(&u.partial(alpha), cutoff);
    let ub = physical_arrays(&u.partial(beta), cutoff);
    let va = physical_arrays(&v.partial(alpha), cutoff);
    let vb = physical_arrays(&v.partial(beta), cutoff);
    let at = |arr: &PointArrays, x: usize| g.to_matrix(&LieElement::new(arr.iter().map(|c| c[x]).collect()));
    let mut out = zero_arrays(g.dim(), grid.len());
    for x in 0..grid.len() {
        let m: CMatrix = at(&ua, x).commutator(&at(&vb, x)).sub(&at(&ub, x).commutator(&at(&va, x)));
        for (a, c) in g.from_matrix(&m).coeffs.into_iter().enumerate() {
            out[a][x] = c;
        }
    }
    Ok(spectral_from_arrays(&grid, out, cutoff))
}

/// Sample of the null symbols at a frequency pair.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NullSymbolSample {
    pub xi1: [f64; 2],
    pub xi2: [f64; 2],
    /// `q_{j0}` for j = 1, 2.
    pub q_j0: [f64; 2],
    /// `q_{12}`.
    pub q_jk: f64,
    /// Unsigned angle between the frequencies, in `[0, π]`.
    pub angle: f64,
}

pub fn null_symbols(xi1: [f64; 2], xi2: [f64; 2]) -> NullSymbolSample {
    let n1 = xi1[0].hypot(xi1[1]);
    let n2 = xi2[0].hypot(xi2[1]);
    let q_j0 = [-xi1[0] * n2 + n1 * xi2[0], -xi1[1] * n2 + n1 * xi2[1]];
    let q_jk = -xi1[0] * xi2[1] + xi1[1] * xi2[0];
    let cross = xi1[0] * xi2[1] - xi1[1] * xi2[0];
    let dot = xi1[0] * xi2[0] + xi1[1] * xi2[1];
    NullSymbolSample { xi1, xi2, q_j0, q_jk, angle: cross.abs().atan2(dot) }
}

/// Worst observed ratios `|q| / (|ξ₁||ξ₂|θ)` over random frequency pairs.
#[derive(Debug, Clone, Serialize)]
pub struct NullSymbolReport {
    pub samples: usize,
    pub max_ratio_j0: f64,
    pub max_ratio_jk: f64,
    /// Pairs with θ = 0 and vanishing symbols (skipped).
    pub degenerate_skipped: usize,
    /// Pairs with θ = 0 but nonzero symbols (violations).
    pub degenerate_flagged: usize,
}

/// Scans random pairs; half of them are drawn nearly collinear to probe the
/// small-angle regime where the bound is tight.
pub fn null_symbol_bound_scan(samples: usize, seed: u64) -> Result<NullSymbolReport> {
    if samples == 0 {
        return Err(CshError::InvalidParameter("null symbol scan needs at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = NullSymbolReport {
        samples,
        max_ratio_j0: 0.0,
        max_ratio_jk: 0.0,
        degenerate_skipped: 0,
        degenerate_flagged: 0,
    };
    let tau = std::f64::consts::TAU;
    for i in 0..samples {
        let r1 = 10f64.powf(rng.gen_range(-2.0..2.0));
        let r2 = 10f64.powf(rng.gen_range(-2.0..2.0));
        let a1: f64 = rng.gen_range(0.0..tau);
        let delta = if i % 2 == 0 {
            rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI)
        } else {
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            sign * 10f64.powf(rng.gen_range(-8.0..0.0))
        };
        let a2 = a1 + delta;
        let s = null_symbols([r1 * a1.cos(), r1 * a1.sin()], [r2 * a2.cos(), r2 * a2.sin()]);
        let scale = r1 * r2;
        let qj0 = s.q_j0[0].abs().max(s.q_j0[1].abs());
        if s.angle == 0.0 {
            if qj0 <= 1e-12 * scale && s.q_jk.abs() <= 1e-12 * scale {
                report.degenerate_skipped += 1;
            } else {
                report.degenerate_flagged += 1;
            }
            continue;
        }
        let denom = scale * s.angle;
        report.max_ratio_j0 = report.max_ratio_j0.max(qj0 / denom);
        report.max_ratio_jk = report.max_ratio_jk.max(s.q_jk.abs() / denom);
    }
    Ok(report)
}

/// Gauge potential snapshot `(A_μ, ∂ₜA_μ)` for μ = 0, 1, 2 (lower indices).
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeSnapshot {
    pub a: [TimedLie; 3],
}

impl GaugeSnapshot {
    pub fn zeros(grid: &Grid2D, dim: usize) -> Self {
        Self { a: std::array::from_fn(|_| TimedLie::zeros(grid, dim)) }
    }
}

fn relative(diff: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// `‖∂ₜA₀ − ∂ⱼAⱼ‖ / (‖∂ₜA₀‖ + ‖∂ⱼAⱼ‖)`.
pub fn gauge_residual(a: &GaugeSnapshot) -> Result<f64> {
    let div = a.a[1].value.derivative(Axis::X).add(&a.a[2].value.derivative(Axis::Y))?;
    let rate = a.a[0].rate.to_spectral();
    Ok(relative(rate.sub(&div)?.l2_norm(), rate.l2_norm() + div.l2_norm()))
}

fn random_lie(grid: &Grid2D, dim: usize, band: usize, amplitude: f64, rng: &mut ChaCha8Rng) -> LieFieldGrid {
    LieFieldGrid::new((0..dim).map(|_| random_band_limited(grid, band, amplitude, rng)).collect())
        .expect("dim >= 1")
}

/// Random band-limited zero-mean gauge snapshot with `∂ₜA₀ := ∂ⱼAⱼ`.
pub fn make_lorenz_snapshot(seed: u64, grid: &Grid2D, g: &GeneratorSet, band: usize) -> GaugeSnapshot {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = g.dim();
    let values: Vec<LieFieldGrid> = (0..3).map(|_| random_lie(grid, dim, band, 1.0, &mut rng)).collect();
    let mut rates: Vec<LieFieldGrid> = (0..3).map(|_| random_lie(grid, dim, band, 1.0, &mut rng)).collect();
    rates[0] = values[1]
        .derivative(Axis::X)
        .add(&values[2].derivative(Axis::Y))
        .expect("shared grid");
    let mut it = values.into_iter().zip(rates).map(|(value, rate)| TimedLie { value, rate });
    GaugeSnapshot { a: std::array::from_fn(|_| it.next().expect("three components")) }
}

/// Random band-limited zero-mean matter snapshot `(φ, ∂ₜφ)`.
pub fn make_matter_snapshot(seed: u64, grid: &Grid2D, g: &GeneratorSet, band: usize) -> TimedLie {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let value = random_lie(grid, g.dim(), band, 1.0, &mut rng);
    let rate = random_lie(grid, g.dim(), band, 1.0, &mut rng);
    TimedLie { value, rate }
}

/// Residuals of the null decomposition identities on one snapshot.
#[derive(Debug, Clone, Serialize)]
pub struct NullDecompositionReport {
    pub gauge_residual: f64,
    /// Relative L² residual of the identity for `[A^μ, ∂_μφ]`.
    pub matter_residual: f64,
    /// Relative L² residuals of the identity for `[∂^νA_μ, A_ν]`, μ = 0, 1, 2.
    pub gauge_residuals: [f64; 3],
    pub matter_lhs_norm: f64,
}

impl NullDecompositionReport {
    pub fn max_residual(&self) -> f64 {
        self.gauge_residuals.iter().copied().fold(self.matter_residual, f64::max)
    }
}

fn lorentz_sign(mu: usize) -> f64 {
    if mu == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Two-dimensional Levi-Civita symbol on spatial indices 1, 2 (given zero-based).
fn eps2(j: usize, k: usize) -> f64 {
    match (j, k) {
        (0, 1) => 1.0,
        (1, 0) => -1.0,
        _ => 0.0,
    }
}

/// `[A^μ, ∂_μu]` summed over μ with the Minkowski metric.
fn contracted_bracket(a: &GaugeSnapshot, u: &TimedLie, g: &GeneratorSet) -> LieFieldGrid {
    let grid = u.value.grid().clone();
    let cutoff = dealias_cutoff(grid.m(), 2);
    let mut out = zero_arrays(g.dim(), grid.len());
    for mu in 0..3 {
        let am = physical_arrays(&a.a[mu].value, cutoff);
        let du = physical_arrays(&u.partial(mu), cutoff);
        bracket_accumulate(g, &am, &du, Complex64::new(lorentz_sign(mu), 0.0), &mut out);
    }
    spectral_from_arrays(&grid, out, cutoff)
}

/// Right-hand side of the null decomposition of `[A^μ, ∂_μu]`:
/// `½ ε^{jk} ε^{lm} Q_{jk}[D⁻¹R_lA_m, u] − Q_{j0}[R_jD⁻¹A₀, u]`.
fn null_decomposed(a: &GaugeSnapshot, u: &TimedLie, g: &GeneratorSet) -> Result<LieFieldGrid> {
    let grid = u.value.grid().clone();
    let mut out = LieFieldGrid::zeros(&grid, g.dim(), Representation::Spectral);
    for l in 0..2 {
        for m in 0..2 {
            let e_lm = eps2(l, m);
            if e_lm == 0.0 {
                continue;
            }
            let b = a.a[m + 1]
                .apply_multiplier(Multiplier::Riesz(Axis::from_index(l)))
                .apply_multiplier(Multiplier::DPow(-1.0));
            for j in 0..2 {
                for k in 0..2 {
                    let e_jk = eps2(j, k);
                    if e_jk == 0.0 {
                        continue;
                    }
                    let q = q_bracket(&b, u, j + 1, k + 1, g)?;
                    out = out.add(&q.scale(Complex64::new(0.5 * e_jk * e_lm, 0.0)))?;
                }
            }
        }
    }
    for j in 0..2 {
        let b = a.a[0]
            .apply_multiplier(Multiplier::DPow(-1.0))
            .apply_multiplier(Multiplier::Riesz(Axis::from_index(j)));
        out = out.sub(&q_bracket(&b, u, j + 1, 0, g)?)?;
    }
    Ok(out)
}

/// Checks the null decomposition of `[A^μ, ∂_μφ]` and of `[∂^νA_μ, A_ν]`
/// (the latter equals minus the decomposition with φ replaced by `A_μ`).
pub fn verify_null_decomposition(a: &GaugeSnapshot, phi: &TimedLie, g: &GeneratorSet) -> Result<NullDecompositionReport> {
    let gauge = gauge_residual(a)?;
    if gauge > 1e-12 {
        return Err(CshError::GaugeViolation { residual: gauge });
    }
    let lhs = contracted_bracket(a, phi, g);
    let rhs = null_decomposed(a, phi, g)?;
    let matter_residual = relative(lhs.sub(&rhs)?.l2_norm(), lhs.l2_norm() + rhs.l2_norm());
    let mut gauge_residuals = [0.0; 3];
    for (mu, slot) in gauge_residuals.iter_mut().enumerate() {
        let grid = phi.value.grid().clone();
        let cutoff = dealias_cutoff(grid.m(), 2);
        let mut direct = zero_arrays(g.dim(), grid.len());
        for nu in 0..3 {
            let d = physical_arrays(&a.a[mu].partial(nu), cutoff);
            let an = physical_arrays(&a.a[nu].value, cutoff);
            bracket_accumulate(g, &d, &an, Complex64::new(lorentz_sign(nu), 0.0), &mut direct);
        }
        let direct = spectral_from_arrays(&grid, direct, cutoff);
        let decomposed = null_decomposed(a, &a.a[mu], g)?.scale(Complex64::new(-1.0, 0.0));
        *slot = relative(direct.sub(&decomposed)?.l2_norm(), direct.l2_norm() + decomposed.l2_norm());
    }
    Ok(NullDecompositionReport { gauge_residual: gauge, matter_residual, gauge_residuals, matter_lhs_norm: lhs.l2_norm() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie_kernel::build_su_n_basis;
    use std::f64::consts::PI;

    fn grid(m: usize) -> Grid2D {
        Grid2D::new(2.0 * PI, m).unwrap()
    }

    fn static_mode(g: &Grid2D, kx: i64, ky: i64) -> TimedScalar {
        let value = ScalarField::mode(g, kx, ky, Complex64::new(1.0, 0.0)).unwrap();
        TimedScalar { rate: value.scale(ZERO), value }
    }

    #[test]
    fn q0_static_mode() {
        let g = grid(16);
        let u = static_mode(&g, 2, 1);
        let q = q0(&u, &u).unwrap();
        assert!((q.data()[g.index_of(4, 2).unwrap()] - Complex64::new(5.0, 0.0)).norm() < 1e-12);
        let c = static_mode(&g, 0, 0);
        assert!(q0(&c, &u).unwrap().l2_norm() < 1e-14);
    }

    #[test]
    fn q0_parallel_plane_waves_cancel() {
        let g = grid(16);
        let wave = |k: i64| {
            let value = ScalarField::mode(&g, k, 0, Complex64::new(1.0, 0.0)).unwrap();
            let rate = value.scale(Complex64::new(0.0, k as f64));
            TimedScalar { value, rate }
        };
        assert!(q0(&wave(1), &wave(2)).unwrap().l2_norm() < 1e-12);
    }

    #[test]
    fn q_alpha_beta_antisymmetry_is_exact() {
        let g = grid(16);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mk = |rng: &mut ChaCha8Rng| TimedScalar {
            value: random_band_limited(&g, 4, 1.0, rng),
            rate: random_band_limited(&g, 4, 1.0, rng),
        };
        let (u, v) = (mk(&mut rng), mk(&mut rng));
        for (a, b) in [(0, 1), (1, 2), (2, 0)] {
            let q = q_alpha_beta(&u, &v, a, b).unwrap();
            assert_eq!(q, q_alpha_beta(&v, &u, a, b).unwrap().scale(Complex64::new(-1.0, 0.0)));
            assert_eq!(q, q_alpha_beta(&u, &v, b, a).unwrap().scale(Complex64::new(-1.0, 0.0)));
        }
        assert!(q_alpha_beta(&u, &v, 3, 0).is_err());
    }

    #[test]
    fn symbol_examples() {
        let s = null_symbols([1.0, 0.0], [0.0, 1.0]);
        assert_eq!(s.q_jk, -1.0);
        assert!((s.angle - PI / 2.0).abs() < 1e-15);
        assert!((s.q_jk.abs() / s.angle - 2.0 / PI).abs() < 1e-15);
        let c = null_symbols([1.0, 2.0], [2.0, 4.0]);
        assert_eq!(c.angle, 0.0);
        assert_eq!(c.q_jk, 0.0);
        assert!(c.q_j0[0].abs() < 1e-14 && c.q_j0[1].abs() < 1e-14);
    }

    #[test]
    fn lorenz_snapshot_properties() {
        let gr = grid(32);
        let g = build_su_n_basis(2).unwrap();
        let a = make_lorenz_snapshot(7, &gr, &g, 6);
        assert!(gauge_residual(&a).unwrap() <= 1e-12);
        assert_eq!(a, make_lorenz_snapshot(7, &gr, &g, 6));
        for t in &a.a {
            for c in t.value.components() {
                assert_eq!(c.mean(), ZERO);
            }
        }
    }

    #[test]
    fn gauge_violation_is_rejected() {
        let gr = grid(16);
        let g = build_su_n_basis(2).unwrap();
        let mut a = make_lorenz_snapshot(1, &gr, &g, 3);
        a.a[0].rate = a.a[0].rate.scale(Complex64::new(2.0, 0.0));
        let phi = make_matter_snapshot(2, &gr, &g, 3);
        assert!(matches!(verify_null_decomposition(&a, &phi, &g), Err(CshError::GaugeViolation { .. })));
    }

    #[test]
    fn decomposition_on_small_grid() {
        let gr = grid(32);
        let g = build_su_n_basis(2).unwrap();
        let a = make_lorenz_snapshot(3, &gr, &g, 5);
        let phi = make_matter_snapshot(4, &gr, &g, 5);
        let r = verify_null_decomposition(&a, &phi, &g).unwrap();
        assert!(r.max_residual() <= 1e-10, "{r:?}");
        let zero = verify_null_decomposition(&GaugeSnapshot::zeros(&gr, 3), &phi, &g).unwrap();
        assert_eq!(zero.matter_lhs_norm, 0.0);
    }
}
