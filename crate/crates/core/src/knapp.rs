//! Knapp-box amplitudes for the derivatives of the data-to-solution map.
//!
//! Data concentrate on anisotropic frequency boxes
//! `W_λ = {|ξ₁ − λ| ≤ cλ, |ξ₂| ≤ cλ^{1/2}}`. The second derivative of the
//! Higgs field and the third derivative of the gauge field at the origin are
//! closed-form Duhamel integrals over products of such boxes; this module
//! evaluates them by Monte-Carlo quadrature on the exact support polytopes
//! and turns the growth of the amplitudes in `λ` into regularity thresholds.
//!
//! The integrands use the massive dispersion `√(m² + |ξ|²)` for the Higgs
//! field and `|ξ|` for the gauge field, independently of the evolution module.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CshError, Result};
use crate::lie_kernel::{build_su_n_basis, CMatrix};
use crate::parallel::par_map;
use crate::stats::{loglog_fit, LogLogFit};
use crate::xsb_analyzer::Sign;

const I: Complex64 = Complex64::new(0.0, 1.0);
const Z95: f64 = 1.959_963_984_540_054;

/// Parameters of a Knapp-box evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnappConfig {
    pub lambda: f64,
    /// Time scale factor: the amplitudes are evaluated at `t = ε λ^{-1/2}`.
    pub eps: f64,
    /// Relative half-width of the shell `|ξ| ∈ [2(1−ρ)λ, 2(1+ρ)λ]`.
    pub rho: f64,
    pub k: u64,
    /// Box constant.
    pub c: f64,
    pub m: f64,
    pub mc_samples: usize,
    pub seed: u64,
    pub threads: usize,
}

impl Default for KnappConfig {
    fn default() -> Self {
        Self {
            lambda: 1e4,
            eps: 0.1,
            rho: 1e-6,
            k: 1,
            c: 1e-6,
            m: std::f64::consts::SQRT_2,
            mc_samples: 100_000,
            seed: 0,
            threads: 1,
        }
    }
}

impl KnappConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CshError::InvalidParameter(msg));
        if !(self.lambda > 1.0 + self.m * self.m) {
            return bad(format!("λ = {} must exceed 1 + m² = {}", self.lambda, 1.0 + self.m * self.m));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad(format!("ρ = {} must lie in (0, 1)", self.rho));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return bad(format!("ε = {} must lie in (0, 1)", self.eps));
        }
        if !(self.c > 0.0 && self.c < 0.25) {
            return bad(format!("box constant c = {} must lie in (0, 1/4)", self.c));
        }
        if self.mc_samples == 0 {
            return bad("Monte-Carlo sample count must be positive".into());
        }
        Ok(())
    }

    pub fn time(&self) -> f64 {
        self.eps / self.lambda.sqrt()
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self { lambda, ..*self }
    }

    /// Whether the shell width covers the box: every `ξ ∈ 2W_λ` has
    /// `|ξ| ∈ [2(1−ρ)λ, 2(1+ρ)λ]` once `ρ ≥ c + c²/λ`.
    pub fn shell_covers_box(&self) -> bool {
        self.rho >= self.c + self.c * self.c / self.lambda
    }
}

/// The box `s·W_λ`: `|ξ₁ − sλ| ≤ |s|cλ`, `|ξ₂| ≤ |s|cλ^{1/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnappBox {
    pub lambda: f64,
    pub c: f64,
    pub scale: f64,
}

impl KnappBox {
    pub fn new(lambda: f64, c: f64, scale: f64) -> Self {
        Self { lambda, c, scale }
    }

    pub fn half_widths(&self) -> [f64; 2] {
        let s = self.scale.abs();
        [s * self.c * self.lambda, s * self.c * self.lambda.sqrt()]
    }

    pub fn centre(&self) -> [f64; 2] {
        [self.scale * self.lambda, 0.0]
    }

    /// Closed interval of coordinate `axis`.
    pub fn interval(&self, axis: usize) -> Interval {
        let (c, h) = (self.centre()[axis], self.half_widths()[axis]);
        Interval::new(c - h, c + h)
    }

    pub fn contains(&self, xi: [f64; 2]) -> bool {
        (0..2).all(|a| self.interval(a).contains(xi[a]))
    }

    pub fn area(&self) -> f64 {
        let [a, b] = self.half_widths();
        4.0 * a * b
    }

    /// Minkowski sum with another box.
    pub fn sum(&self, other: &KnappBox) -> [Interval; 2] {
        [0, 1].map(|a| self.interval(a).add(other.interval(a)))
    }

    /// Minkowski difference `self − other`.
    pub fn minus(&self, other: &KnappBox) -> [Interval; 2] {
        [0, 1].map(|a| self.interval(a).add(other.interval(a).neg()))
    }
}

/// Closed real interval (empty when `lo > hi`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    pub fn len(&self) -> f64 {
        (self.hi - self.lo).max(0.0)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn intersect(&self, o: Interval) -> Interval {
        Interval::new(self.lo.max(o.lo), self.hi.min(o.hi))
    }

    pub fn add(&self, o: Interval) -> Interval {
        Interval::new(self.lo + o.lo, self.hi + o.hi)
    }

    pub fn neg(&self) -> Interval {
        Interval::new(-self.hi, -self.lo)
    }

    pub fn shift(&self, x: f64) -> Interval {
        Interval::new(self.lo + x, self.hi + x)
    }
}

/// A tuple of half-wave signs `(±₁, …, ±_K)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SignTuple<const K: usize>(pub [Sign; K]);

impl<const K: usize> SignTuple<K> {
    /// All `2^K` tuples, `+` before `−` in every slot, first slot slowest.
    pub fn all() -> Vec<Self> {
        (0..1usize << K)
            .map(|bits| {
                SignTuple(std::array::from_fn(|j| {
                    if bits >> (K - 1 - j) & 1 == 0 {
                        Sign::Plus
                    } else {
                        Sign::Minus
                    }
                }))
            })
            .collect()
    }

    pub fn value(&self, j: usize) -> f64 {
        self.0[j].value()
    }

    pub fn label(&self) -> String {
        self.0.iter().map(|s| s.symbol()).collect()
    }
}

/// Resonance class of a sign tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resonance {
    Resonant,
    Nonresonant,
}

/// The listed resonant four-tuples: `±₁ = ±₃` with `±₂ = ±₄` (which contains
/// the case `(±₁ = ±₃) ≠ (±₂ = ±₄)`), and the two mixed tuples
/// `(±₁,±₃) = (+,−), (±₂,±₄) = (−,+)` and its mirror.
pub fn classify_resonance4(t: &SignTuple<4>) -> Resonance {
    let [s1, s2, s3, s4] = t.0;
    let paired = s1 == s3 && s2 == s4;
    let mixed = (s1, s3, s2, s4) == (Sign::Plus, Sign::Minus, Sign::Minus, Sign::Plus)
        || (s1, s3, s2, s4) == (Sign::Minus, Sign::Plus, Sign::Plus, Sign::Minus);
    if paired || mixed {
        Resonance::Resonant
    } else {
        Resonance::Nonresonant
    }
}

/// The three-wave resonance: `±₁ = ±₂ = ±₃`.
pub fn classify_resonance3(t: &SignTuple<3>) -> Resonance {
    if t.0[0] == t.0[1] && t.0[1] == t.0[2] {
        Resonance::Resonant
    } else {
        Resonance::Nonresonant
    }
}

/// Census of the four-wave classifier.
#[derive(Debug, Clone, Serialize)]
pub struct ResonanceCensus {
    pub resonant: Vec<String>,
    pub with_first_equal_third: usize,
    pub with_first_differing_third: usize,
}

pub fn resonance_census() -> ResonanceCensus {
    let res: Vec<SignTuple<4>> = SignTuple::<4>::all()
        .into_iter()
        .filter(|t| classify_resonance4(t) == Resonance::Resonant)
        .collect();
    ResonanceCensus {
        with_first_equal_third: res.iter().filter(|t| t.0[0] == t.0[2]).count(),
        with_first_differing_third: res.iter().filter(|t| t.0[0] != t.0[2]).count(),
        resonant: res.iter().map(SignTuple::label).collect(),
    }
}

fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn massive(m: f64, v: [f64; 2]) -> f64 {
    (m * m + v[0] * v[0] + v[1] * v[1]).sqrt()
}

/// `ω₁₂₃₄ = ±₁|ξ| ±₂√(m²+|ζ−η|²) − ±₃|ζ| − ±₄√(m²+|ξ−η|²)`.
pub fn modulation4(xi: [f64; 2], eta: [f64; 2], zeta: [f64; 2], t: &SignTuple<4>, m: f64) -> f64 {
    t.value(0) * norm(xi) + t.value(1) * massive(m, sub(zeta, eta))
        - t.value(2) * norm(zeta)
        - t.value(3) * massive(m, sub(xi, eta))
}

/// `ω̃₁₂₃₄`: as [`modulation4`] with `+±₃|ζ|`.
pub fn modulation4_tilde(xi: [f64; 2], eta: [f64; 2], zeta: [f64; 2], t: &SignTuple<4>, m: f64) -> f64 {
    modulation4(xi, eta, zeta, t, m) + 2.0 * t.value(2) * norm(zeta)
}

/// `ω₁₂₃ = ±₁√(m²+|ξ|²) − ±₂|ξ−η| − ±₃|η|`.
pub fn modulation3(xi: [f64; 2], eta: [f64; 2], t: &SignTuple<3>, m: f64) -> f64 {
    t.value(0) * massive(m, xi) - t.value(1) * norm(sub(xi, eta)) - t.value(2) * norm(eta)
}

/// Duhamel multiplier `(e^{itω} − 1)/(iω) = ∫₀ᵗ e^{isω} ds`, by a four-term
/// series when `|tω| < 1e-4`.
pub fn duhamel_multiplier(t: f64, omega: f64) -> Complex64 {
    let x = t * omega;
    if x.abs() < 1e-4 {
        let ix = I * x;
        t * (1.0 + ix / 2.0 + ix * ix / 6.0 + ix * ix * ix / 24.0)
    } else {
        (Complex64::from_polar(1.0, x) - 1.0) / (I * omega)
    }
}

/// Which `λ`-window family to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    /// `λ^{1/2} ∈ [(2kπ−ε)/(ε(1−ρ)), (2kπ+ε)/(ε(1+ρ))]`, where `cos(t|ξ|) ≈ 1`.
    ThirdDerivative,
    /// `λ^{1/2} ∈ [(kπ+π/8)/(ε(1−ρ)), (kπ+3π/8)/(ε(1+ρ))]`, where `|sin(t|ξ|)|` is bounded below.
    SecondDerivative,
}

/// Admissible `λ^{1/2}` interval for a window index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaWindow {
    pub window: Window,
    pub k: u64,
    pub sqrt_lo: f64,
    pub sqrt_hi: f64,
    pub feasible: bool,
    /// The failed condition when the interval is empty.
    pub reason: Option<&'static str>,
}

impl LambdaWindow {
    pub fn lambda_range(&self) -> Option<(f64, f64)> {
        self.feasible.then(|| (self.sqrt_lo * self.sqrt_lo, self.sqrt_hi * self.sqrt_hi))
    }

    /// `λ` at the midpoint of the `λ^{1/2}` interval.
    pub fn midpoint(&self) -> Option<f64> {
        self.feasible.then(|| (0.5 * (self.sqrt_lo + self.sqrt_hi)).powi(2))
    }
}

pub fn choose_lambda(eps: f64, rho: f64, k: u64, window: Window) -> Result<LambdaWindow> {
    if !(eps > 0.0 && eps < 1.0 && rho > 0.0 && rho < 1.0) || k == 0 {
        return Err(CshError::InvalidParameter(format!("window needs ε, ρ ∈ (0,1) and k ≥ 1 (got {eps}, {rho}, {k})")));
    }
    let kf = k as f64;
    let (lo, hi, reason) = match window {
        Window::ThirdDerivative => (
            (2.0 * kf * PI - eps) / (eps * (1.0 - rho)),
            (2.0 * kf * PI + eps) / (eps * (1.0 + rho)),
            "(2kπ−ε)(1+ρ) > (2kπ+ε)(1−ρ): ρ too large for k and ε",
        ),
        Window::SecondDerivative => (
            (kf * PI + PI / 8.0) / (eps * (1.0 - rho)),
            (kf * PI + 3.0 * PI / 8.0) / (eps * (1.0 + rho)),
            "(kπ+π/8)(1+ρ) > (kπ+3π/8)(1−ρ): ρ too large for k",
        ),
    };
    let feasible = lo <= hi;
    Ok(LambdaWindow { window, k, sqrt_lo: lo, sqrt_hi: hi, feasible, reason: (!feasible).then_some(reason) })
}

/// Nearest window index for a target `λ` (at least 1).
pub fn window_index(lambda: f64, eps: f64, window: Window) -> u64 {
    let r = eps * lambda.sqrt();
    let k = match window {
        Window::ThirdDerivative => r / (2.0 * PI),
        Window::SecondDerivative => (r - PI / 4.0) / PI,
    };
    k.round().max(1.0) as u64
}

/// Window indices for `points` geometric targets from `lambda_min` over
/// `decades` decades. Duplicates are dropped, and the last index is raised until
/// its window midpoint reaches the requested span.
pub fn window_indices(window: Window, eps: f64, rho: f64, lambda_min: Option<f64>, decades: f64, points: usize) -> Result<Vec<u64>> {
    if points < 2 || !(decades > 0.0) {
        return Err(CshError::InvalidParameter(format!("need ≥ 2 points over a positive span (got {points}, {decades})")));
    }
    let lo = match lambda_min {
        Some(l) => l,
        None => choose_lambda(eps, rho, 1, window)?
            .midpoint()
            .ok_or_else(|| CshError::InvalidParameter("first window is empty".into()))?,
    };
    let mut ks: Vec<u64> = (0..points)
        .map(|i| window_index(lo * 10f64.powf(decades * i as f64 / (points - 1) as f64), eps, window))
        .collect();
    ks.dedup();
    let start = choose_lambda(eps, rho, ks[0], window)?.midpoint().unwrap_or(lo);
    let target = start * 10f64.powf(decades);
    let last = ks.last_mut().expect("nonempty");
    for _ in 0..1_000_000 {
        match choose_lambda(eps, rho, *last, window)?.midpoint() {
            Some(l) if l >= target => break,
            Some(_) => *last += 1,
            None => return Err(CshError::InvalidParameter(format!("window {} is empty for ρ = {rho}", *last))),
        }
    }
    Ok(ks)
}

/// A Monte-Carlo estimate with its 95% confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub value: Complex64,
    pub ci95: f64,
}

impl McEstimate {
    pub const ZERO: McEstimate = McEstimate { value: Complex64::new(0.0, 0.0), ci95: 0.0 };

    pub fn abs(&self) -> f64 {
        self.value.norm()
    }
}

/// Running sums for `Q` complex integrands.
#[derive(Debug, Clone)]
struct Accumulator<const Q: usize> {
    n: usize,
    sum: [Complex64; Q],
    sum_sq: [f64; Q],
}

impl<const Q: usize> Accumulator<Q> {
    fn new() -> Self {
        Self { n: 0, sum: [Complex64::new(0.0, 0.0); Q], sum_sq: [0.0; Q] }
    }

    fn push(&mut self, v: &[Complex64; Q]) {
        self.n += 1;
        for q in 0..Q {
            self.sum[q] += v[q];
            self.sum_sq[q] += v[q].norm_sqr();
        }
    }

    fn merge(mut self, o: Self) -> Self {
        self.n += o.n;
        for q in 0..Q {
            self.sum[q] += o.sum[q];
            self.sum_sq[q] += o.sum_sq[q];
        }
        self
    }

    /// Estimates of `volume · E[g_q]`.
    fn estimates(&self, volume: f64) -> [McEstimate; Q] {
        let n = self.n.max(1) as f64;
        std::array::from_fn(|q| {
            let mean = self.sum[q] / n;
            let var = (self.sum_sq[q] / n - mean.norm_sqr()).max(0.0);
            McEstimate { value: mean * volume, ci95: Z95 * volume * (var / n).sqrt() }
        })
    }
}

const BATCH: usize = 1 << 14;

/// Runs `samples` draws in fixed batches (seeded per batch, so results do not
/// depend on the thread count).
fn monte_carlo<const Q: usize, F>(samples: usize, seed: u64, threads: usize, draw: F) -> Accumulator<Q>
where
    F: Fn(&mut ChaCha8Rng) -> [Complex64; Q] + Sync,
{
    let batches: Vec<(u64, usize)> = (0..samples.div_ceil(BATCH))
        .map(|b| (b as u64, BATCH.min(samples - b * BATCH)))
        .collect();
    let partial = par_map(&batches, threads, |&(b, n)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(b + 1);
        let mut acc = Accumulator::<Q>::new();
        for _ in 0..n {
            acc.push(&draw(&mut rng));
        }
        acc
    });
    partial.into_iter().fold(Accumulator::new(), Accumulator::merge)
}

fn commutator_norms() -> (f64, f64) {
    let g = build_su_n_basis(2).expect("su(2) basis");
    let t = g.generators();
    let c21: CMatrix = t[1].commutator(&t[0]);
    let c1_21 = t[0].commutator(&c21);
    (c21.frobenius_norm(), c1_21.frobenius_norm())
}

/// Second-derivative amplitude and its four-part decomposition (coefficients of `[T², T¹]`).
#[derive(Debug, Clone, Serialize)]
pub struct SecondDerivativeAmplitude {
    pub lambda: f64,
    pub t: f64,
    pub xi: [f64; 2],
    /// Area of `W_λ ∩ (ξ − W_λ)`; zero means the amplitude vanishes identically.
    pub support_area: f64,
    pub empty_support: bool,
    pub total: McEstimate,
    /// Resonant main term (multiplier replaced by `t`, mass-shell factor).
    pub i: McEstimate,
    /// Resonant term with the Riesz factor.
    pub ii: McEstimate,
    /// Resonant correction from `m₁₂₃ − t`.
    pub iii: McEstimate,
    /// Nonresonant remainder.
    pub iv: McEstimate,
    /// `(t/2)|sin(t|ξ|)|/|ξ| ∫ √(m²+|η|²)` as a closed-form cross-check of `|I|`.
    pub sin_t_xi: f64,
    /// Frobenius norm of `[T², T¹]` for `su(2)`.
    pub commutator_norm: f64,
}

/// `∂²_δ φ` at the origin in Fourier space, at frequency `ξ`, with `f̂₁ = â₀,₂ = χ_{W_λ}`.
pub fn second_derivative_amplitude(cfg: &KnappConfig, xi: [f64; 2]) -> Result<SecondDerivativeAmplitude> {
    cfg.validate()?;
    let w = KnappBox::new(cfg.lambda, cfg.c, 1.0);
    let t = cfg.time();
    let m = cfg.m;
    // η ∈ W ∩ (ξ − W): a rectangle.
    let rect = [0, 1].map(|a| w.interval(a).intersect(w.interval(a).neg().shift(xi[a])));
    let area = rect[0].len() * rect[1].len();
    let abs_xi = norm(xi);
    let mut out = SecondDerivativeAmplitude {
        lambda: cfg.lambda,
        t,
        xi,
        support_area: area,
        empty_support: area == 0.0 || rect.iter().any(Interval::is_empty),
        total: McEstimate::ZERO,
        i: McEstimate::ZERO,
        ii: McEstimate::ZERO,
        iii: McEstimate::ZERO,
        iv: McEstimate::ZERO,
        sin_t_xi: (t * massive(m, xi)).sin(),
        commutator_norm: commutator_norms().0,
    };
    if out.empty_support {
        return Ok(out);
    }
    let tuples = SignTuple::<3>::all();
    let phase: Vec<Complex64> = tuples
        .iter()
        .map(|s| Complex64::from_polar(1.0, -s.value(0) * t * massive(m, xi)) / abs_xi)
        .collect();
    let acc = monte_carlo::<5, _>(cfg.mc_samples, cfg.seed, cfg.threads, |rng| {
        let eta = [rng.gen_range(rect[0].lo..=rect[0].hi), rng.gen_range(rect[1].lo..=rect[1].hi)];
        let d = sub(xi, eta);
        let shell = massive(m, eta);
        let riesz = d[0] / norm(d);
        let mut v = [Complex64::new(0.0, 0.0); 5];
        for (s, ph) in tuples.iter().zip(&phase) {
            let weight = -s.value(2) * shell + s.value(1) * riesz;
            let mult = duhamel_multiplier(t, modulation3(xi, eta, s, m));
            let pre = -0.25 * ph;
            v[0] += pre * mult * weight;
            if classify_resonance3(s) == Resonance::Resonant {
                v[1] += pre * t * (-s.value(2) * shell);
                v[2] += pre * t * (s.value(1) * riesz);
                v[3] += pre * (mult - t) * weight;
            } else {
                v[4] += pre * mult * weight;
            }
        }
        v
    });
    [out.total, out.i, out.ii, out.iii, out.iv] = acc.estimates(area);
    Ok(out)
}

/// Third-derivative amplitude of `A₂` (coefficients of `[T¹, [T², T¹]]`).
#[derive(Debug, Clone, Serialize)]
pub struct ThirdDerivativeAmplitude {
    pub lambda: f64,
    pub t: f64,
    pub xi: [f64; 2],
    /// Volume of `{ζ ∈ 2W, ζ−η ∈ W, ξ−η ∈ W}`.
    pub support_volume: f64,
    /// `vol/|ξ|`, the size of the boundary term.
    pub i1_bound: f64,
    /// Resonant part of the main quadrilinear integral.
    pub resonant: McEstimate,
    pub nonresonant: McEstimate,
    /// Main integral over all sixteen tuples.
    pub main: McEstimate,
    pub ii_resonant: McEstimate,
    pub ii_nonresonant: McEstimate,
    pub ii: McEstimate,
    /// `main + II`.
    pub total: McEstimate,
    /// The conjugate-branch support `(−W − 2W) ∩ (2W − W)` is empty (exact interval check).
    pub tilde_support_empty: bool,
    pub cos_t_xi: f64,
    pub sin_t_xi: f64,
    /// Frobenius norm of `[T¹, [T², T¹]]` for `su(2)`.
    pub double_commutator_norm: f64,
    /// Largest `|m₁₂₃₄|/t` seen (never above 1).
    pub max_multiplier_ratio: f64,
}

/// Convex polygon as a vertex list.
type Polygon = Vec<[f64; 2]>;

/// Clips a convex polygon to the half-plane `a·p ≤ b`.
fn clip(poly: &Polygon, a: [f64; 2], b: f64) -> Polygon {
    let inside = |p: &[f64; 2]| a[0] * p[0] + a[1] * p[1] <= b;
    let mut out = Vec::new();
    for i in 0..poly.len() {
        let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
        let (ip, iq) = (inside(&p), inside(&q));
        if ip {
            out.push(p);
        }
        if ip != iq {
            let fp = a[0] * p[0] + a[1] * p[1] - b;
            let fq = a[0] * q[0] + a[1] * q[1] - b;
            let s = fp / (fp - fq);
            out.push([p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])]);
        }
    }
    out
}

fn rect_polygon(x: Interval, y: Interval) -> Polygon {
    if x.is_empty() || y.is_empty() {
        return Vec::new();
    }
    vec![[x.lo, y.lo], [x.hi, y.lo], [x.hi, y.hi], [x.lo, y.hi]]
}

/// Fan triangulation with cumulative areas, for uniform sampling.
struct PolygonSampler {
    tris: Vec<[[f64; 2]; 3]>,
    cumulative: Vec<f64>,
    area: f64,
}

impl PolygonSampler {
    fn new(poly: &Polygon) -> Self {
        let mut tris = Vec::new();
        let mut cumulative = Vec::new();
        let mut area = 0.0;
        for i in 1..poly.len().saturating_sub(1) {
            let (a, b, c) = (poly[0], poly[i], poly[i + 1]);
            let ar = 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs();
            area += ar;
            tris.push([a, b, c]);
            cumulative.push(area);
        }
        Self { tris, cumulative, area }
    }

    fn sample(&self, rng: &mut impl Rng) -> [f64; 2] {
        let u = rng.gen::<f64>() * self.area;
        let i = self.cumulative.partition_point(|&c| c < u).min(self.tris.len() - 1);
        let [a, b, c] = self.tris[i];
        let (mut r1, mut r2) = (rng.gen::<f64>(), rng.gen::<f64>());
        if r1 + r2 > 1.0 {
            r1 = 1.0 - r1;
            r2 = 1.0 - r2;
        }
        [a[0] + r1 * (b[0] - a[0]) + r2 * (c[0] - a[0]), a[1] + r1 * (b[1] - a[1]) + r2 * (c[1] - a[1])]
    }
}

/// Per-coordinate polygon in the `(η_a, ζ_a)` plane of
/// `{ζ ∈ 2W, ζ − η ∈ W, ξ − η ∈ W}`; the full set is the product over `a`.
fn support_polygons(lambda: f64, c: f64, xi: [f64; 2]) -> [Polygon; 2] {
    let w = KnappBox::new(lambda, c, 1.0);
    let w2 = KnappBox::new(lambda, c, 2.0);
    [0, 1].map(|a| {
        let wa = w.interval(a);
        let eta = wa.neg().shift(xi[a]);
        let poly = rect_polygon(eta, w2.interval(a));
        // wa.lo ≤ ζ − η ≤ wa.hi
        let poly = clip(&poly, [-1.0, 1.0], wa.hi);
        clip(&poly, [1.0, -1.0], -wa.lo)
    })
}

/// The conjugate branch needs `η ∈ (−W − 2W) ∩ (2W − W)`.
pub fn tilde_support_empty(lambda: f64, c: f64) -> bool {
    let w = KnappBox::new(lambda, c, 1.0);
    let w2 = KnappBox::new(lambda, c, 2.0);
    let wneg = KnappBox::new(lambda, c, -1.0);
    let left = wneg.sum(&KnappBox::new(lambda, c, -2.0));
    let right = w2.minus(&w);
    (0..2).any(|a| left[a].intersect(right[a]).is_empty())
}

/// `∂³_δ A₂` at the origin in Fourier space at frequency `ξ`, with
/// `f̂₁ = χ_{W_λ}` and `â₀,₂ = χ_{2W_λ}`.
pub fn third_derivative_amplitude(cfg: &KnappConfig, xi: [f64; 2]) -> Result<ThirdDerivativeAmplitude> {
    cfg.validate()?;
    let t = cfg.time();
    let m = cfg.m;
    let polys = support_polygons(cfg.lambda, cfg.c, xi);
    let samplers = [PolygonSampler::new(&polys[0]), PolygonSampler::new(&polys[1])];
    let volume = samplers[0].area * samplers[1].area;
    let abs_xi = norm(xi);
    let mut out = ThirdDerivativeAmplitude {
        lambda: cfg.lambda,
        t,
        xi,
        support_volume: volume,
        i1_bound: volume / abs_xi,
        resonant: McEstimate::ZERO,
        nonresonant: McEstimate::ZERO,
        main: McEstimate::ZERO,
        ii_resonant: McEstimate::ZERO,
        ii_nonresonant: McEstimate::ZERO,
        ii: McEstimate::ZERO,
        total: McEstimate::ZERO,
        tilde_support_empty: tilde_support_empty(cfg.lambda, cfg.c),
        cos_t_xi: (t * abs_xi).cos(),
        sin_t_xi: (t * abs_xi).sin(),
        double_commutator_norm: commutator_norms().1,
        max_multiplier_ratio: 0.0,
    };
    if volume == 0.0 {
        return Ok(out);
    }
    let tuples = SignTuple::<4>::all();
    let resonant: Vec<bool> = tuples.iter().map(|s| classify_resonance4(s) == Resonance::Resonant).collect();
    let phase: Vec<Complex64> = tuples.iter().map(|s| Complex64::from_polar(1.0, -s.value(0) * t * abs_xi)).collect();
    let pref = I * (3.0 / 8.0);
    let riesz_xi = xi[0] / abs_xi;
    let acc = monte_carlo::<5, _>(cfg.mc_samples, cfg.seed, cfg.threads, |rng| {
        let p = [samplers[0].sample(rng), samplers[1].sample(rng)];
        let eta = [p[0][0], p[1][0]];
        let zeta = [p[0][1], p[1][1]];
        let riesz_zeta = zeta[0] / norm(zeta);
        let mut v = [Complex64::new(0.0, 0.0); 5];
        let mut worst = 0.0f64;
        for ((s, ph), &res) in tuples.iter().zip(&phase).zip(&resonant) {
            let mult = duhamel_multiplier(t, modulation4(xi, eta, zeta, s, m));
            worst = worst.max(mult.norm() / t);
            let main = pref * s.value(0) * ph * mult * (s.value(2) * riesz_zeta);
            let second = pref * (-s.value(0)) * ph * riesz_xi * mult;
            let slot = if res { 0 } else { 1 };
            v[slot] += main;
            v[2 + slot] += second;
        }
        v[4] = Complex64::new(worst, 0.0);
        v
    });
    let [res, nonres, ii_r, ii_n, _] = acc.estimates(volume);
    let sum = |a: McEstimate, b: McEstimate| McEstimate { value: a.value + b.value, ci95: a.ci95.hypot(b.ci95) };
    out.resonant = res;
    out.nonresonant = nonres;
    out.main = sum(res, nonres);
    out.ii_resonant = ii_r;
    out.ii_nonresonant = ii_n;
    out.ii = sum(ii_r, ii_n);
    out.total = sum(out.main, out.ii);
    out.max_multiplier_ratio = monte_carlo_max_multiplier(cfg, xi, &samplers, &tuples);
    Ok(out)
}

fn monte_carlo_max_multiplier(cfg: &KnappConfig, xi: [f64; 2], samplers: &[PolygonSampler; 2], tuples: &[SignTuple<4>]) -> f64 {
    let t = cfg.time();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5151);
    (0..cfg.mc_samples.min(4096))
        .map(|_| {
            let p = [samplers[0].sample(&mut rng), samplers[1].sample(&mut rng)];
            let (eta, zeta) = ([p[0][0], p[1][0]], [p[0][1], p[1][1]]);
            tuples
                .iter()
                .map(|s| duhamel_multiplier(t, modulation4(xi, eta, zeta, s, cfg.m)).norm() / t)
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// Fitted power law with a slope interval from the Monte-Carlo confidence bands.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingFit {
    pub fit: LogLogFit,
    /// Smallest and largest slopes of the fits through the ends of the 95% bands.
    pub slope_band: (f64, f64),
}

/// Least-squares log-log fit of `(λ, value)`; requires ≥ 4 points over ≥ 2 decades.
pub fn scaling_fit(amplitudes: &[(f64, f64)]) -> Result<LogLogFit> {
    loglog_fit(amplitudes, 2.0)
}

/// Fit including the confidence bands `(λ, value, ci95)`.
pub fn scaling_fit_with_bands(points: &[(f64, f64, f64)]) -> Result<ScalingFit> {
    let central: Vec<(f64, f64)> = points.iter().map(|p| (p.0, p.1)).collect();
    let fit = scaling_fit(&central)?;
    let mid = points.len() / 2;
    let tilt = |up_high: bool| -> Result<f64> {
        let pts: Vec<(f64, f64)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let up = (i >= mid) == up_high;
                (p.0, if up { p.1 + p.2 } else { (p.1 - p.2).max(p.1 * 1e-12) })
            })
            .collect();
        Ok(scaling_fit(&pts)?.slope)
    };
    let (a, b) = (tilt(false)?, tilt(true)?);
    Ok(ScalingFit { fit, slope_band: (a.min(b), a.max(b)) })
}

/// Which amplitude a scan evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeKind {
    Second,
    Third,
}

impl AmplitudeKind {
    pub fn window(self) -> Window {
        match self {
            AmplitudeKind::Second => Window::SecondDerivative,
            AmplitudeKind::Third => Window::ThirdDerivative,
        }
    }
}

/// One `λ` point of an amplitude scan.
#[derive(Debug, Clone, Serialize)]
pub struct ScanRow {
    pub k: u64,
    pub lambda: f64,
    pub value: f64,
    pub ci95: f64,
    /// Magnitudes of the named parts, in the order given by [`AmplitudeScan::part_names`].
    pub parts: Vec<(f64, f64)>,
    pub trig: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AmplitudeScan {
    pub kind: AmplitudeKind,
    pub config: KnappConfig,
    pub part_names: Vec<&'static str>,
    pub rows: Vec<ScanRow>,
    pub fit: Option<ScalingFit>,
    pub skipped_windows: Vec<u64>,
}

/// Evaluates an amplitude at `ξ = (2λ, 0)` for `λ` at the window midpoint of each `k`.
pub fn amplitude_scan(kind: AmplitudeKind, base: &KnappConfig, ks: &[u64]) -> Result<AmplitudeScan> {
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for &k in ks {
        let win = choose_lambda(base.eps, base.rho, k, kind.window())?;
        let Some(lambda) = win.midpoint() else {
            skipped.push(k);
            continue;
        };
        let cfg = KnappConfig { lambda, k, seed: base.seed.wrapping_add(k), ..*base };
        let xi = [2.0 * lambda, 0.0];
        let row = match kind {
            AmplitudeKind::Second => {
                let a = second_derivative_amplitude(&cfg, xi)?;
                ScanRow {
                    k,
                    lambda,
                    value: a.total.abs(),
                    ci95: a.total.ci95,
                    parts: [a.i, a.ii, a.iii, a.iv].iter().map(|e| (e.abs(), e.ci95)).collect(),
                    trig: a.sin_t_xi,
                }
            }
            AmplitudeKind::Third => {
                let a = third_derivative_amplitude(&cfg, xi)?;
                ScanRow {
                    k,
                    lambda,
                    value: a.total.abs(),
                    ci95: a.total.ci95,
                    parts: [a.resonant, a.nonresonant, a.ii]
                        .iter()
                        .map(|e| (e.abs(), e.ci95))
                        .chain([(a.i1_bound, 0.0)])
                        .collect(),
                    trig: a.cos_t_xi,
                }
            }
        };
        rows.push(row);
    }
    let pts: Vec<(f64, f64, f64)> = rows.iter().map(|r| (r.lambda, r.value, r.ci95)).collect();
    let part_names = match kind {
        AmplitudeKind::Second => vec!["I", "II", "III", "IV"],
        AmplitudeKind::Third => vec!["resonant", "nonresonant", "II", "I1_bound"],
    };
    Ok(AmplitudeScan { kind, config: *base, part_names, fit: scaling_fit_with_bands(&pts).ok(), rows, skipped_windows: skipped })
}

/// Per-tuple growth of `|ω₁₂₃₄|` over the support.
#[derive(Debug, Clone, Serialize)]
pub struct TupleGrowth {
    pub tuple: String,
    pub class: Resonance,
    pub max_abs_omega: Vec<f64>,
    pub fit: Option<LogLogFit>,
    /// `max_λ max|ω|/λ^{1/2}`.
    pub sqrt_constant: f64,
    /// `max_λ max|ω|/λ`.
    pub linear_constant: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResonanceReport {
    pub lambdas: Vec<f64>,
    pub c: f64,
    pub m: f64,
    pub samples: usize,
    pub tuples: Vec<TupleGrowth>,
    pub tilde_support_empty: Vec<bool>,
    pub census: ResonanceCensus,
}

/// Samples `ξ ∈ 2W`, then `(η, ζ)` uniformly in the support polytope, and
/// records `max|ω₁₂₃₄|` per tuple and `λ`.
pub fn resonance_scan(lambdas: &[f64], c: f64, m: f64, samples: usize, seed: u64) -> ResonanceReport {
    let tuples = SignTuple::<4>::all();
    let mut maxima = vec![vec![0.0f64; lambdas.len()]; tuples.len()];
    for (li, &lambda) in lambdas.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(li as u64);
        let w2 = KnappBox::new(lambda, c, 2.0);
        let mut drawn = 0;
        while drawn < samples {
            let xi = [
                rng.gen_range(w2.interval(0).lo..=w2.interval(0).hi),
                rng.gen_range(w2.interval(1).lo..=w2.interval(1).hi),
            ];
            let polys = support_polygons(lambda, c, xi);
            let s = [PolygonSampler::new(&polys[0]), PolygonSampler::new(&polys[1])];
            if s[0].area <= 0.0 || s[1].area <= 0.0 {
                continue;
            }
            for _ in 0..16 {
                let p = [s[0].sample(&mut rng), s[1].sample(&mut rng)];
                let (eta, zeta) = ([p[0][0], p[1][0]], [p[0][1], p[1][1]]);
                for (ti, t) in tuples.iter().enumerate() {
                    let w = modulation4(xi, eta, zeta, t, m).abs();
                    maxima[ti][li] = maxima[ti][li].max(w);
                }
            }
            drawn += 16;
        }
    }
    let tuples_out = tuples
        .iter()
        .zip(maxima)
        .map(|(t, mx)| {
            let pts: Vec<(f64, f64)> = lambdas.iter().copied().zip(mx.iter().copied()).collect();
            TupleGrowth {
                tuple: t.label(),
                class: classify_resonance4(t),
                fit: loglog_fit(&pts, 0.0).ok(),
                sqrt_constant: pts.iter().map(|(l, w)| w / l.sqrt()).fold(0.0, f64::max),
                linear_constant: pts.iter().map(|(l, w)| w / l).fold(0.0, f64::max),
                max_abs_omega: mx,
            }
        })
        .collect();
    ResonanceReport {
        lambdas: lambdas.to_vec(),
        c,
        m,
        samples,
        tuples: tuples_out,
        tilde_support_empty: lambdas.iter().map(|&l| tilde_support_empty(l, c)).collect(),
        census: resonance_census(),
    }
}

/// Exponent of `‖χ_{W_λ}‖_{L²} = vol(W_λ)^{1/2}` in `λ` (exactly 3/4).
pub fn box_norm_exponent(c: f64) -> f64 {
    let v = |l: f64| KnappBox::new(l, c, 1.0).area().sqrt();
    let (a, b) = (1e4, 1e8);
    (v(b) / v(a)).ln() / (b / a).ln()
}

/// Regularity thresholds implied by the measured amplitude exponents.
#[derive(Debug, Clone, Serialize)]
pub struct NecessaryConditions {
    pub third_exponent: f64,
    pub second_exponent: f64,
    pub box_exponent: f64,
    /// From `ελ^{p₃}·λ^{σ+v} ≲ λ^{2s+2v}·λ^{σ+v}`: `s ≥ (p₃ − 2v)/2`.
    pub s_threshold: f64,
    pub s_uncertainty: f64,
    /// From `ελ^{p₂}·λ^{s+v} ≲ λ^{s+v}·λ^{σ+v}`: `σ ≥ p₂ − v`.
    pub sigma_threshold: f64,
    pub sigma_uncertainty: f64,
}

/// Thresholds from exponents `p₃`, `p₂` with slope uncertainties.
pub fn necessary_condition_report(third: (f64, f64), second: (f64, f64), c: f64) -> NecessaryConditions {
    let v = box_norm_exponent(c);
    NecessaryConditions {
        third_exponent: third.0,
        second_exponent: second.0,
        box_exponent: v,
        s_threshold: (third.0 - 2.0 * v) / 2.0,
        s_uncertainty: third.1 / 2.0,
        sigma_threshold: second.0 - v,
        sigma_uncertainty: second.1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tuple4(s: &str) -> SignTuple<4> {
        let v: Vec<Sign> = s.chars().map(|c| Sign::parse(c).unwrap()).collect();
        SignTuple([v[0], v[1], v[2], v[3]])
    }

    #[test]
    fn classifier_examples_and_census() {
        assert_eq!(classify_resonance4(&tuple4("++++")), Resonance::Resonant);
        assert_eq!(classify_resonance4(&tuple4("+--+")), Resonance::Resonant);
        assert_eq!(classify_resonance4(&tuple4("++-+")), Resonance::Nonresonant);
        let c = resonance_census();
        assert_eq!(c.resonant.len(), 6);
        assert_eq!((c.with_first_equal_third, c.with_first_differing_third), (4, 2));
        assert_eq!(SignTuple::<4>::all().len(), 16);
    }

    #[test]
    fn modulation_examples() {
        let xi = [3.0, 4.0];
        let w = modulation4(xi, [0.0, 0.0], xi, &tuple4("++++"), 0.0);
        assert!(w.abs() < 1e-12);
        let t = SignTuple([Sign::Plus, Sign::Minus, Sign::Plus]);
        let w3 = modulation3([3.0, 4.0], [0.0, 1.0], &t, 1.0);
        let expected = 26f64.sqrt() + 18f64.sqrt() - 1.0;
        assert!((w3 - expected).abs() < 1e-12);
        let tilde = modulation4_tilde(xi, [1.0, 0.0], [0.0, 2.0], &tuple4("+-+-"), 0.5);
        let direct = 5.0 - (0.25f64 + 5.0).sqrt() + 2.0 + (0.25f64 + 20.0).sqrt();
        assert!((tilde - direct).abs() < 1e-12);
    }

    #[test]
    fn duhamel_multiplier_is_bounded_and_continuous() {
        let t = 0.3;
        for w in [0.0, 1e-9, 3e-4 / t, 1e-4 / t * 0.999, 1.0, 10.0, -7.5, 1e6] {
            let m = duhamel_multiplier(t, w);
            assert!(m.norm() <= t * (1.0 + 1e-15), "{w}");
            // Compare with the closed form where it is accurate.
            if (t * w).abs() > 1e-3 {
                let direct = (Complex64::from_polar(1.0, t * w) - 1.0) / (I * w);
                assert!((m - direct).norm() < 1e-14);
            }
        }
        assert_eq!(duhamel_multiplier(t, 0.0), Complex64::new(t, 0.0));
        let w = 0.99e-4 / t;
        let series = duhamel_multiplier(t, w);
        let direct = (Complex64::from_polar(1.0, t * w) - 1.0) / (I * w);
        assert!((series - direct).norm() < 1e-10 * t);
    }

    #[test]
    fn lambda_windows() {
        let w = choose_lambda(0.1, 1e-6, 100, Window::ThirdDerivative).unwrap();
        assert!(w.feasible);
        assert!((w.sqrt_lo - 6282.19).abs() < 0.01 && (w.sqrt_hi - 6284.18).abs() < 0.01, "{w:?}");
        let bad = choose_lambda(0.1, 0.1, 100, Window::ThirdDerivative).unwrap();
        assert!(!bad.feasible && bad.reason.is_some() && bad.midpoint().is_none());
        let w = choose_lambda(0.1, 1e-6, 10, Window::SecondDerivative).unwrap();
        assert!(w.feasible && w.sqrt_lo < w.sqrt_hi);
        assert!(choose_lambda(0.1, 1e-6, 0, Window::SecondDerivative).is_err());
    }

    #[test]
    fn window_indices_span_requested_decades() {
        for window in [Window::ThirdDerivative, Window::SecondDerivative] {
            let ks = window_indices(window, 0.1, 1e-6, None, 2.0, 8).unwrap();
            assert!(ks.windows(2).all(|w| w[0] < w[1]), "{ks:?}");
            let mid = |k| choose_lambda(0.1, 1e-6, k, window).unwrap().midpoint().unwrap();
            assert!(mid(*ks.last().unwrap()) / mid(ks[0]) >= 100.0);
            let k = 7;
            assert_eq!(window_index(mid(k), 0.1, window), k);
        }
    }

    #[test]
    fn boxes_and_tilde_emptiness() {
        let b = KnappBox::new(100.0, 0.01, 2.0);
        assert!(b.contains([201.9, 0.19]) && !b.contains([202.1, 0.0]));
        assert!((b.area() - 4.0 * 2.0 * 0.2).abs() < 1e-12);
        assert!((KnappBox::new(1e4, 1e-6, 1.0).area() - (2e-6 * 1e4) * (2e-6 * 1e2)).abs() < 1e-18);
        assert!(tilde_support_empty(1e4, 1e-2));
        assert!(!tilde_support_empty(1e4, 0.7));
        assert!((box_norm_exponent(1e-6) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn polygon_clipping_area() {
        let sq = rect_polygon(Interval::new(0.0, 2.0), Interval::new(0.0, 2.0));
        let half = clip(&sq, [1.0, 1.0], 2.0);
        assert!((PolygonSampler::new(&half).area - 2.0).abs() < 1e-12);
        assert!(clip(&sq, [1.0, 0.0], -1.0).is_empty());
    }

    #[test]
    fn support_volume_matches_grid_count() {
        let (lambda, c) = (400.0, 0.05);
        let xi = [2.0 * lambda + 3.0, 0.4];
        let polys = support_polygons(lambda, c, xi);
        let vol: f64 = polys.iter().map(|p| PolygonSampler::new(p).area).product();
        // Brute force on a fine grid per coordinate pair.
        let w = KnappBox::new(lambda, c, 1.0);
        let w2 = KnappBox::new(lambda, c, 2.0);
        let area = |a: usize, n: usize| {
            let (e, z) = (w.interval(a).neg().shift(xi[a]), w2.interval(a));
            let (de, dz) = (e.len() / n as f64, z.len() / n as f64);
            let mut hits = 0usize;
            for i in 0..n {
                for j in 0..n {
                    let (ev, zv) = (e.lo + (i as f64 + 0.5) * de, z.lo + (j as f64 + 0.5) * dz);
                    if w.interval(a).contains(zv - ev) {
                        hits += 1;
                    }
                }
            }
            hits as f64 * de * dz
        };
        let brute = area(0, 800) * area(1, 800);
        assert!((vol - brute).abs() < 5e-3 * vol, "{vol} vs {brute}");
    }

    #[test]
    fn empty_second_derivative_support() {
        let cfg = KnappConfig { lambda: 1e4, c: 1e-2, mc_samples: 100, ..Default::default() };
        let a = second_derivative_amplitude(&cfg, [3.5e4, 0.0]).unwrap();
        assert!(a.empty_support);
        assert_eq!(a.total.abs(), 0.0);
    }

    #[test]
    fn second_derivative_decomposition_and_main_term() {
        let win = choose_lambda(0.1, 1e-6, 6, Window::SecondDerivative).unwrap();
        let lambda = win.midpoint().unwrap();
        let cfg = KnappConfig { lambda, c: 1e-2, mc_samples: 40_000, seed: 3, ..Default::default() };
        let xi = [2.0 * lambda, 0.0];
        let a = second_derivative_amplitude(&cfg, xi).unwrap();
        let sum = a.i.value + a.ii.value + a.iii.value + a.iv.value;
        assert!((sum - a.total.value).norm() <= 1e-10 * a.total.abs());
        // |I| = (t/2)|sin(t√(m²+|ξ|²))|/|ξ| ∫ √(m²+|η|²) dη; the integrand varies by O(c) over the box.
        let t = cfg.time();
        let closed = t / 2.0 * a.sin_t_xi.abs() / norm(xi) * a.support_area * lambda;
        assert!((a.i.abs() / closed - 1.0).abs() < 0.03, "{} vs {closed}", a.i.abs());
        assert!(a.i.abs() > a.ii.abs() && a.i.abs() > a.iii.abs() && a.i.abs() > a.iv.abs());
        assert!((a.commutator_norm - 2.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn third_derivative_parts_are_consistent() {
        let win = choose_lambda(0.1, 1e-6, 3, Window::ThirdDerivative).unwrap();
        let lambda = win.midpoint().unwrap();
        let cfg = KnappConfig { lambda, c: 1e-3, mc_samples: 30_000, seed: 5, ..Default::default() };
        let a = third_derivative_amplitude(&cfg, [2.0 * lambda, 0.0]).unwrap();
        assert!(a.tilde_support_empty);
        assert!((a.resonant.value + a.nonresonant.value + a.ii.value - a.total.value).norm() < 1e-9 * a.total.abs());
        assert!(a.max_multiplier_ratio <= 1.0 + 1e-12);
        assert!(a.cos_t_xi > 0.9);
        assert!(a.resonant.abs() > 10.0 * a.nonresonant.abs());
        // Six resonant tuples contribute about (3/8)·|Σ ±₁e^{∓₁it|ξ|}±₃|·t·vol; here ≈ (3/4)·t·vol·cos.
        let scale = 0.75 * cfg.time() * a.support_volume * a.cos_t_xi;
        assert!(a.resonant.abs() > 0.5 * scale && a.resonant.abs() < 2.0 * scale, "{} vs {scale}", a.resonant.abs());
        assert!((a.double_commutator_norm - 4.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_error_shrinks_with_samples() {
        let cfg = KnappConfig { lambda: 5e3, c: 1e-2, seed: 9, ..Default::default() };
        let xi = [2.0 * cfg.lambda, 0.0];
        let ci = |n| second_derivative_amplitude(&KnappConfig { mc_samples: n, ..cfg }, xi).unwrap().total.ci95;
        let ratio = ci(160_000) / ci(40_000);
        assert!((ratio - 0.5).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn results_do_not_depend_on_threads() {
        let cfg = KnappConfig { lambda: 5e3, c: 1e-2, mc_samples: 50_000, seed: 2, ..Default::default() };
        let xi = [2.0 * cfg.lambda, 0.0];
        let a = third_derivative_amplitude(&cfg, xi).unwrap();
        let b = third_derivative_amplitude(&KnappConfig { threads: 3, ..cfg }, xi).unwrap();
        assert_eq!(a.total.value, b.total.value);
    }

    #[test]
    fn scaling_fit_examples() {
        let grid: Vec<f64> = (0..9).map(|i| 10f64.powf(2.0 + 0.5 * i as f64)).collect();
        let exact: Vec<_> = grid.iter().map(|&l| (l, 0.3 * l.powf(2.5))).collect();
        assert!((scaling_fit(&exact).unwrap().slope - 2.5).abs() < 1e-6);
        let flat: Vec<_> = grid.iter().map(|&l| (l, 4.0)).collect();
        assert!(scaling_fit(&flat).unwrap().slope.abs() < 1e-12);
        assert!(scaling_fit(&exact[..3]).is_err());
    }

    #[test]
    fn thresholds_from_exact_exponents() {
        let r = necessary_condition_report((2.5, 0.0), (1.0, 0.0), 1e-6);
        assert!((r.s_threshold - 0.5).abs() < 1e-12);
        assert!((r.sigma_threshold - 0.25).abs() < 1e-12);
    }
}
