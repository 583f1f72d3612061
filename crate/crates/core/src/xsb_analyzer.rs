//! Space-time Fourier analysis on dyadic blocks.
//!
//! Two lattices appear here. [`SpaceTimeField`] lives on the physical dual
//! lattice of a torus of side `box_length` sampled over a time window `T`,
//! so temporal frequencies are multiples of `2π/T`. The bilinear and
//! multilinear measurements work directly on the unit frequency lattice
//! `(τ, ξ) ∈ ℤ³`, where products of fields become plain lattice convolutions.
//!
//! A block `K^±_{N,L}` collects the frequencies with `|ξ| ∈ [N, 2N)` and
//! `|τ ± |ξ|| ∈ [L, 2L)`; the `N = 1` and `L = 1` blocks absorb everything
//! below 2, so for a fixed sign the blocks tile the lattice.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{CshError, Result};
use crate::spectral_grid::{dyadic_shell, Grid2D, Representation, ScalarField};
use crate::stats::{loglog_fit, LogLogFit};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Sign of a half-wave cone: `+` selects `τ + |ξ| ≈ 0`, `−` selects `τ − |ξ| ≈ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }

    pub fn parse(c: char) -> Option<Sign> {
        match c {
            '+' => Some(Sign::Plus),
            '-' => Some(Sign::Minus),
            _ => None,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// Modulation `τ ± |ξ|` of a space-time frequency relative to a cone.
pub fn modulation(tau: f64, abs_xi: f64, sign: Sign) -> f64 {
    tau + sign.value() * abs_xi
}

/// A dyadic block `K^±_{N,L}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicBlock {
    pub sign: Sign,
    pub n: u64,
    pub l: u64,
}

impl DyadicBlock {
    pub fn new(sign: Sign, n: u64, l: u64) -> Result<Self> {
        if !n.is_power_of_two() || !l.is_power_of_two() {
            return Err(CshError::InvalidParameter(format!("block sizes N = {n}, L = {l} must be powers of two")));
        }
        Ok(Self { sign, n, l })
    }

    /// Block containing the frequency `(τ, ξ)` for the given sign.
    pub fn classify(tau: f64, abs_xi: f64, sign: Sign) -> Self {
        Self { sign, n: dyadic_shell(abs_xi), l: dyadic_shell(modulation(tau, abs_xi, sign).abs()) }
    }

    pub fn contains(&self, tau: f64, abs_xi: f64) -> bool {
        Self::classify(tau, abs_xi, self.sign) == *self
    }

    /// All points of the block on the unit lattice, ordered by `(τ, k_y, k_x)`.
    pub fn lattice_points(&self) -> Vec<[i64; 3]> {
        let kmax = 2 * self.n as i64 - 1;
        let reach = 2 * self.l as i64 + 1;
        let mut pts = Vec::new();
        for ky in -kmax..=kmax {
            for kx in -kmax..=kmax {
                let r = ((kx * kx + ky * ky) as f64).sqrt();
                if dyadic_shell(r) != self.n {
                    continue;
                }
                let centre = (-self.sign.value() * r).round() as i64;
                for tau in (centre - reach)..=(centre + reach) {
                    if self.contains(tau as f64, r) {
                        pts.push([tau, kx, ky]);
                    }
                }
            }
        }
        pts.sort_unstable();
        pts
    }
}

impl fmt::Display for DyadicBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "K{}(N={},L={})", self.sign, self.n, self.l)
    }
}

/// Regularity indices of an `X^{s,b}` norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XsbParams {
    pub s: f64,
    pub b: f64,
}

impl XsbParams {
    pub fn new(s: f64, b: f64) -> Self {
        Self { s, b }
    }

    /// `s = 1/4 + δ`, `b = 1/2 + ε`.
    pub fn from_offsets(delta: f64, eps: f64) -> Self {
        Self { s: 0.25 + delta, b: 0.5 + eps }
    }

    pub fn delta(&self) -> f64 {
        self.s - 0.25
    }

    pub fn eps(&self) -> f64 {
        self.b - 0.5
    }

    /// Warning text when the offsets leave the regime `0 < 100ε < δ ≪ 1`.
    pub fn regime_warning(&self) -> Option<String> {
        let (d, e) = (self.delta(), self.eps());
        (!(e > 0.0 && 100.0 * e < d && d < 0.25))
            .then(|| format!("offsets δ = {d:.4}, ε = {e:.4} are outside 0 < 100ε < δ ≪ 1"))
    }

    pub fn shifted(&self, ds: f64, db: f64) -> Self {
        Self { s: self.s + ds, b: self.b + db }
    }
}

/// `X^{s,b}` norm from dyadic block masses `(N, L, ‖P_K u‖²)`.
fn xsb_from_masses(masses: impl IntoIterator<Item = (u64, u64, f64)>, p: XsbParams) -> f64 {
    masses
        .into_iter()
        .map(|(n, l, m2)| (n as f64).powf(2.0 * p.s) * (l as f64).powf(2.0 * p.b) * m2)
        .sum::<f64>()
        .sqrt()
}

/// Temporal taper applied before the time transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Taper {
    None,
    /// Tukey window whose cosine ramps occupy `rolloff ∈ (0, 1]` of the window
    /// (1 gives the Hann window), rescaled so that the mean of `w²` is 1.
    RaisedCosine { rolloff: f64 },
}

impl Taper {
    pub fn hann() -> Self {
        Taper::RaisedCosine { rolloff: 1.0 }
    }

    pub fn weights(&self, mt: usize) -> Vec<f64> {
        match *self {
            Taper::None => vec![1.0; mt],
            Taper::RaisedCosine { rolloff } => {
                let a = rolloff.clamp(1e-6, 1.0);
                let raw: Vec<f64> = (0..mt)
                    .map(|j| {
                        let x = j as f64 / mt as f64;
                        let edge = x.min(1.0 - x);
                        if edge < a / 2.0 {
                            0.5 * (1.0 - (2.0 * PI * edge / a).cos())
                        } else {
                            1.0
                        }
                    })
                    .collect();
                let ms = raw.iter().map(|w| w * w).sum::<f64>() / mt as f64;
                raw.into_iter().map(|w| w / ms.sqrt()).collect()
            }
        }
    }
}

/// Complex space-time samples on `[0, T) × torus`, stored `[it][iy][ix]`.
#[derive(Debug, Clone)]
pub struct SpaceTimeField {
    grid: Grid2D,
    t_window: f64,
    mt: usize,
    values: Vec<Complex64>,
    rep: Representation,
    taper: Taper,
}

impl SpaceTimeField {
    pub fn from_physical(grid: &Grid2D, t_window: f64, mt: usize, values: Vec<Complex64>) -> Result<Self> {
        if mt < 2 || mt % 2 != 0 {
            return Err(CshError::InvalidGrid(format!("M_t = {mt} must be even and at least 2")));
        }
        if !(t_window > 0.0 && t_window.is_finite()) {
            return Err(CshError::InvalidParameter(format!("time window {t_window} must be positive")));
        }
        if values.len() != mt * grid.len() {
            return Err(CshError::DimensionMismatch { expected: mt * grid.len(), found: values.len() });
        }
        Ok(Self { grid: grid.clone(), t_window, mt, values, rep: Representation::Physical, taper: Taper::None })
    }

    /// Samples `f(t, x, y)` at `t_j = j·T/M_t`.
    pub fn from_fn(grid: &Grid2D, t_window: f64, mt: usize, f: impl Fn(f64, f64, f64) -> Complex64) -> Result<Self> {
        let dt = t_window / mt as f64;
        let mut values = Vec::with_capacity(mt * grid.len());
        for it in 0..mt {
            let t = it as f64 * dt;
            values.extend((0..grid.len()).map(|idx| {
                let [x, y] = grid.point(idx);
                f(t, x, y)
            }));
        }
        Self::from_physical(grid, t_window, mt, values)
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn t_window(&self) -> f64 {
        self.t_window
    }

    pub fn mt(&self) -> usize {
        self.mt
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn representation(&self) -> Representation {
        self.rep
    }

    /// Taper applied by the transform that produced this field.
    pub fn taper(&self) -> Taper {
        self.taper
    }

    /// Spacing of the temporal dual lattice, `2π/T`.
    pub fn dtau(&self) -> f64 {
        2.0 * PI / self.t_window
    }

    pub fn tau(&self, it: usize) -> f64 {
        let m = self.mt as i64;
        let k = if (it as i64) < m / 2 { it as i64 } else { it as i64 - m };
        k as f64 * self.dtau()
    }

    /// Largest resolvable temporal frequency; modulation blocks beyond it are cut off.
    pub fn modulation_cap(&self) -> f64 {
        self.mt as f64 / 2.0 * self.dtau()
    }

    /// Coefficient-`ℓ²` norm in spectral form, continuum `L²` norm in physical form.
    /// The two agree up to the factor `1/sqrt(T·area)` when no taper is used.
    pub fn l2_norm(&self) -> f64 {
        let s2: f64 = self.values.iter().map(|z| z.norm_sqr()).sum();
        match self.rep {
            Representation::Spectral => s2.sqrt(),
            Representation::Physical => {
                (s2 * self.t_window / self.mt as f64 * self.grid.area() / self.grid.len() as f64).sqrt()
            }
        }
    }

    /// Factor converting the physical `L²` norm to the coefficient norm.
    pub fn parseval_factor(&self) -> f64 {
        1.0 / (self.t_window * self.grid.area()).sqrt()
    }

    /// Spectral coefficient at temporal index `it` and integer wavenumbers.
    pub fn coefficient(&self, it: usize, kx: i64, ky: i64) -> Option<Complex64> {
        let idx = self.grid.index_of(kx, ky)?;
        Some(self.values[it * self.grid.len() + idx])
    }

    /// Temporal index of the integer multiple `k` of `2π/T`.
    pub fn tau_index(&self, k: i64) -> Option<usize> {
        let m = self.mt as i64;
        (k >= -m / 2 && k < m / 2).then(|| k.rem_euclid(m) as usize)
    }

    fn require_spectral(&self) -> Result<()> {
        if self.rep != Representation::Spectral {
            return Err(CshError::InvalidParameter("operation needs the space-time spectral representation".into()));
        }
        Ok(())
    }

    /// Space-time Fourier coefficients, `u = Σ c(τ, ξ) e^{i(τt + ξ·x)}`.
    pub fn to_spectral(&self, taper: Taper) -> SpaceTimeField {
        if self.rep == Representation::Spectral {
            return self.clone();
        }
        let n2 = self.grid.len();
        let w = taper.weights(self.mt);
        let mut data = self.values.clone();
        for (it, frame) in data.chunks_mut(n2).enumerate() {
            frame.iter_mut().for_each(|z| *z *= w[it]);
            self.grid.forward(frame);
        }
        let plan = FftPlanner::new().plan_fft_forward(self.mt);
        time_transform(&mut data, self.mt, n2, &plan, 1.0 / self.mt as f64);
        SpaceTimeField { values: data, rep: Representation::Spectral, taper, ..self.clone() }
    }

    /// Physical samples (the taper is not undone).
    pub fn to_physical(&self) -> SpaceTimeField {
        if self.rep == Representation::Physical {
            return self.clone();
        }
        let n2 = self.grid.len();
        let mut data = self.values.clone();
        let plan = FftPlanner::new().plan_fft_inverse(self.mt);
        time_transform(&mut data, self.mt, n2, &plan, 1.0);
        for frame in data.chunks_mut(n2) {
            self.grid.inverse(frame);
        }
        SpaceTimeField { values: data, rep: Representation::Physical, ..self.clone() }
    }

    /// Iterates `(τ, |ξ|, coefficient)` over all spectral modes.
    fn modes(&self) -> impl Iterator<Item = (f64, f64, Complex64)> + '_ {
        let n2 = self.grid.len();
        self.values.iter().enumerate().map(move |(i, z)| (self.tau(i / n2), self.grid.abs_xi(i % n2), *z))
    }

    /// Sharp restriction to a block.
    pub fn project_block(&self, block: &DyadicBlock) -> Result<SpaceTimeField> {
        self.require_spectral()?;
        let values = self
            .modes()
            .map(|(tau, r, z)| if block.contains(tau, r) { z } else { ZERO })
            .collect();
        Ok(SpaceTimeField { values, ..self.clone() })
    }

    /// Squared mass of every occupied block for the given sign.
    pub fn block_masses(&self, sign: Sign) -> Result<BTreeMap<DyadicBlock, f64>> {
        self.require_spectral()?;
        let mut out = BTreeMap::new();
        for (tau, r, z) in self.modes() {
            let m2 = z.norm_sqr();
            if m2 > 0.0 {
                *out.entry(DyadicBlock::classify(tau, r, sign)).or_insert(0.0) += m2;
            }
        }
        Ok(out)
    }

    /// `X^{s,b}_±` norm: `(Σ_{N,L} (N^s L^b ‖P_K u‖)²)^{1/2}`.
    pub fn xsb_norm(&self, p: XsbParams, sign: Sign) -> Result<f64> {
        Ok(xsb_from_masses(self.block_masses(sign)?.into_iter().map(|(k, m2)| (k.n, k.l, m2)), p))
    }
}

fn time_transform(data: &mut [Complex64], mt: usize, n2: usize, plan: &Arc<dyn Fft<f64>>, scale: f64) {
    let mut line = vec![ZERO; mt];
    for idx in 0..n2 {
        for (it, z) in line.iter_mut().enumerate() {
            *z = data[it * n2 + idx];
        }
        plan.process(&mut line);
        for (it, z) in line.iter().enumerate() {
            data[it * n2 + idx] = z * scale;
        }
    }
}

/// Space-time transform of frames sampled uniformly at `t_j = j·T/M_t`.
pub fn spacetime_transform(frames: &[ScalarField], t_window: f64, taper: Taper) -> Result<SpaceTimeField> {
    let first = frames.first().ok_or_else(|| CshError::InvalidParameter("no frames".into()))?;
    let grid = first.grid().clone();
    let mut values = Vec::with_capacity(frames.len() * grid.len());
    for f in frames {
        first.check_compatible(f)?;
        values.extend_from_slice(f.to_physical().data());
    }
    Ok(SpaceTimeField::from_physical(&grid, t_window, frames.len(), values)?.to_spectral(taper))
}

// ---------------------------------------------------------------------------
// Unit-lattice fields and convolutions
// ---------------------------------------------------------------------------

/// Field on the unit space-time frequency lattice, listed as `((τ, k_x, k_y), c)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LatticeField {
    pub modes: Vec<([i64; 3], Complex64)>,
}

impl LatticeField {
    pub fn from_points(points: &[[i64; 3]], values: impl IntoIterator<Item = Complex64>) -> Self {
        Self { modes: points.iter().copied().zip(values).collect() }
    }

    pub fn norm(&self) -> f64 {
        self.modes.iter().map(|(_, z)| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Spectral representation of the complex conjugate field.
    pub fn conjugate(&self) -> Self {
        Self { modes: self.modes.iter().map(|&([t, x, y], z)| ([-t, -x, -y], z.conj())).collect() }
    }

    /// Multiplies every mode by `symbol(τ, k_x, k_y)`.
    pub fn apply(&self, symbol: impl Fn([i64; 3]) -> Complex64) -> Self {
        Self { modes: self.modes.iter().map(|&(x, z)| (x, z * symbol(x))).collect() }
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        let s = if n > 0.0 { 1.0 / n } else { 0.0 };
        Self { modes: self.modes.iter().map(|&(x, z)| (x, z * s)).collect() }
    }

    pub fn xsb_norm(&self, p: XsbParams, sign: Sign) -> f64 {
        let mut masses: BTreeMap<(u64, u64), f64> = BTreeMap::new();
        for &([t, x, y], z) in &self.modes {
            let k = DyadicBlock::classify(t as f64, ((x * x + y * y) as f64).sqrt(), sign);
            *masses.entry((k.n, k.l)).or_insert(0.0) += z.norm_sqr();
        }
        xsb_from_masses(masses.into_iter().map(|((n, l), m)| (n, l, m)), p)
    }

    fn support_box(&self) -> Option<([i64; 3], [i64; 3])> {
        let mut it = self.modes.iter().map(|(x, _)| *x);
        let first = it.next()?;
        Some(it.fold((first, first), |(mut lo, mut hi), x| {
            for a in 0..3 {
                lo[a] = lo[a].min(x[a]);
                hi[a] = hi[a].max(x[a]);
            }
            (lo, hi)
        }))
    }
}

fn random_gaussian(points: &[[i64; 3]], rng: &mut impl Rng) -> LatticeField {
    let values: Vec<Complex64> = points
        .iter()
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        })
        .collect();
    LatticeField::from_points(points, values)
}

/// Three-dimensional FFT on a dense `[t][y][x]` box.
struct Fft3 {
    dims: [usize; 3],
    plans: [(Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>); 3],
}

impl Fft3 {
    fn new(dims: [usize; 3]) -> Self {
        let mut planner = FftPlanner::new();
        let mut plan = |n| (planner.plan_fft_forward(n), planner.plan_fft_inverse(n));
        Self { dims, plans: [plan(dims[0]), plan(dims[1]), plan(dims[2])] }
    }

    fn len(&self) -> usize {
        self.dims.iter().product()
    }

    fn process(&self, data: &mut [Complex64], inverse: bool) {
        let [nt, ny, nx] = self.dims;
        let strides = [ny * nx, nx, 1];
        for axis in 0..3 {
            let plan = if inverse { &self.plans[axis].1 } else { &self.plans[axis].0 };
            let n = self.dims[axis];
            let stride = strides[axis];
            let mut line = vec![ZERO; n];
            for base in 0..nt * ny * nx {
                if (base / stride) % n != 0 {
                    continue;
                }
                for (j, z) in line.iter_mut().enumerate() {
                    *z = data[base + j * stride];
                }
                plan.process(&mut line);
                for (j, z) in line.iter().enumerate() {
                    data[base + j * stride] = *z;
                }
            }
        }
    }
}

/// Exact lattice convolution of several fields by FFT on a shifted window that
/// holds the whole product support without wrap-around.
struct WindowProduct {
    origin: [i64; 3],
    dims: [usize; 3],
    values: Vec<Complex64>,
}

impl WindowProduct {
    fn new(factors: &[&LatticeField]) -> Self {
        let boxes: Vec<_> = factors.iter().map(|f| f.support_box()).collect();
        if boxes.iter().any(Option::is_none) {
            return Self { origin: [0; 3], dims: [0; 3], values: Vec::new() };
        }
        let boxes: Vec<_> = boxes.into_iter().flatten().collect();
        let mut origin = [0i64; 3];
        let mut dims = [0usize; 3];
        for a in 0..3 {
            origin[a] = boxes.iter().map(|b| b.0[a]).sum();
            let width: i64 = boxes.iter().map(|b| b.1[a] - b.0[a] + 1).sum();
            dims[a] = (width as usize).next_power_of_two();
        }
        let fft = Fft3::new(dims);
        let mut acc = vec![Complex64::new(1.0, 0.0); fft.len()];
        for (f, (lo, _)) in factors.iter().zip(&boxes) {
            let mut dense = vec![ZERO; fft.len()];
            for &(x, z) in &f.modes {
                let i = [(x[0] - lo[0]) as usize, (x[1] - lo[1]) as usize, (x[2] - lo[2]) as usize];
                dense[(i[0] * dims[1] + i[1]) * dims[2] + i[2]] += z;
            }
            fft.process(&mut dense, true);
            acc.iter_mut().zip(&dense).for_each(|(a, d)| *a *= d);
        }
        fft.process(&mut acc, false);
        let scale = 1.0 / fft.len() as f64;
        acc.iter_mut().for_each(|z| *z *= scale);
        Self { origin, dims, values: acc }
    }

    fn get(&self, x: [i64; 3]) -> Complex64 {
        let mut flat = 0usize;
        for a in 0..3 {
            let i = x[a] - self.origin[a];
            if i < 0 || i >= self.dims[a] as i64 {
                return ZERO;
            }
            flat = flat * self.dims[a] + i as usize;
        }
        self.values[flat]
    }

    fn into_field(self, threshold: f64) -> LatticeField {
        let [_, ny, nx] = self.dims;
        let modes = self
            .values
            .iter()
            .enumerate()
            .filter(|(_, z)| z.norm() > threshold)
            .map(|(i, z)| {
                let x = [
                    self.origin[0] + (i / (ny * nx)) as i64,
                    self.origin[1] + ((i / nx) % ny) as i64,
                    self.origin[2] + (i % nx) as i64,
                ];
                (x, *z)
            })
            .collect();
        LatticeField { modes }
    }
}

fn sub(a: [i64; 3], b: [i64; 3]) -> [i64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn add(a: [i64; 3], b: [i64; 3]) -> [i64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

/// How the restricted bilinear map `P_{K₀}(u₁ū₂)` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvolutionMethod {
    Direct,
    Fft,
}

/// Work bound below which the direct lattice convolution is used.
const DIRECT_WORK_LIMIT: usize = 20_000_000;

/// The map `(u₁, u₂) ↦ P_{K₀}(u₁ū₂)` between fields supported on three blocks,
/// together with the two partial adjoints used by the power iteration.
struct RestrictedBilinear {
    k: [Vec<[i64; 3]>; 3],
    index: [HashMap<[i64; 3], usize>; 3],
    method: ConvolutionMethod,
}

impl RestrictedBilinear {
    fn new(blocks: [DyadicBlock; 3], method: Option<ConvolutionMethod>) -> Self {
        let k = blocks.map(|b| b.lattice_points());
        let index = [0, 1, 2].map(|j| k[j].iter().enumerate().map(|(i, x)| (*x, i)).collect());
        let work = k[0].len() * k[1].len().max(k[2].len());
        let method = method.unwrap_or(if work <= DIRECT_WORK_LIMIT {
            ConvolutionMethod::Direct
        } else {
            ConvolutionMethod::Fft
        });
        Self { k, index, method }
    }

    fn field(&self, j: usize, values: &[Complex64]) -> LatticeField {
        LatticeField::from_points(&self.k[j], values.iter().copied())
    }

    fn read(&self, j: usize, w: WindowProduct) -> Vec<Complex64> {
        self.k[j].iter().map(|x| w.get(*x)).collect()
    }

    /// `B(u₁,u₂)(X₀) = Σ_{X₁} u₁(X₁)·conj(u₂(X₁ − X₀))`.
    fn apply(&self, u1: &[Complex64], u2: &[Complex64]) -> Vec<Complex64> {
        match self.method {
            ConvolutionMethod::Direct => self.k[0]
                .iter()
                .map(|&x0| {
                    self.k[1]
                        .iter()
                        .zip(u1)
                        .filter_map(|(&x1, a)| self.index[2].get(&sub(x1, x0)).map(|&i| a * u2[i].conj()))
                        .sum()
                })
                .collect(),
            ConvolutionMethod::Fft => {
                let f2 = self.field(2, u2).conjugate();
                self.read(0, WindowProduct::new(&[&self.field(1, u1), &f2]))
            }
        }
    }

    /// `(B₁* w)(X₁) = Σ_{X₀} w(X₀)·u₂(X₁ − X₀)`.
    fn adjoint_first(&self, w: &[Complex64], u2: &[Complex64]) -> Vec<Complex64> {
        match self.method {
            ConvolutionMethod::Direct => self.k[1]
                .iter()
                .map(|&x1| {
                    self.k[0]
                        .iter()
                        .zip(w)
                        .filter_map(|(&x0, c)| self.index[2].get(&sub(x1, x0)).map(|&i| c * u2[i]))
                        .sum()
                })
                .collect(),
            ConvolutionMethod::Fft => self.read(1, WindowProduct::new(&[&self.field(0, w), &self.field(2, u2)])),
        }
    }

    /// `g(X₂) = Σ_{X₀} conj(w(X₀))·u₁(X₂ + X₀)`, the maximizer direction for `u₂`.
    fn adjoint_second(&self, w: &[Complex64], u1: &[Complex64]) -> Vec<Complex64> {
        match self.method {
            ConvolutionMethod::Direct => self.k[2]
                .iter()
                .map(|&x2| {
                    self.k[0]
                        .iter()
                        .zip(w)
                        .filter_map(|(&x0, c)| self.index[1].get(&add(x2, x0)).map(|&i| c.conj() * u1[i]))
                        .sum()
                })
                .collect(),
            ConvolutionMethod::Fft => {
                let fw = self.field(0, w).conjugate();
                self.read(2, WindowProduct::new(&[&self.field(1, u1), &fw]))
            }
        }
    }

    /// Whether some `X₁ ∈ K₁`, `X₂ ∈ K₂` has `X₁ − X₂ ∈ K₀`.
    fn feasible(&self) -> bool {
        if self.k.iter().any(Vec::is_empty) {
            return false;
        }
        match self.method {
            ConvolutionMethod::Direct => self.k[0]
                .iter()
                .any(|&x0| self.k[1].iter().any(|&x1| self.index[2].contains_key(&sub(x1, x0)))),
            ConvolutionMethod::Fft => {
                let ones = |j: usize| vec![Complex64::new(1.0, 0.0); self.k[j].len()];
                self.apply(&ones(1), &ones(2)).iter().any(|z| z.re > 0.5)
            }
        }
    }
}

fn l2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn normalize(v: &mut [Complex64]) -> f64 {
    let n = l2(v);
    if n > 0.0 {
        v.iter_mut().for_each(|z| *z /= n);
    }
    n
}

/// The three constants of the bilinear block estimate and their minimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BilinearConstants {
    pub c1: f64,
    pub c2_first: f64,
    pub c2_second: f64,
    pub c3: f64,
}

impl BilinearConstants {
    pub fn new(blocks: [DyadicBlock; 3]) -> Self {
        let n = blocks.map(|b| b.n as f64);
        let l = blocks.map(|b| b.l as f64);
        let min2 = |v: [f64; 3], i: usize, j: usize| v[i].min(v[j]);
        let max2 = |v: [f64; 3], i: usize, j: usize| v[i].max(v[j]);
        let n012 = n[0].min(n[1]).min(n[2]);
        let l012 = l[0].min(l[1]).min(l[2]);
        let c2 = |j: usize| (n012 * min2(l, 0, j)).sqrt() * (min2(n, 0, j) * max2(l, 0, j)).powf(0.25);
        Self {
            c1: (n012 * min2(l, 1, 2)).sqrt() * (min2(n, 1, 2) * max2(l, 1, 2)).powf(0.25),
            c2_first: c2(1),
            c2_second: c2(2),
            c3: (n012 * n012 * l012).sqrt(),
        }
    }

    pub fn min(&self) -> f64 {
        self.c1.min(self.c2_first).min(self.c2_second).min(self.c3)
    }
}

/// Options for [`measure_bilinear_constant`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BilinearOptions {
    pub trials: usize,
    /// Alternating power-iteration steps on top of the random trials (0 disables).
    pub power_iterations: usize,
    pub seed: u64,
    pub method: Option<ConvolutionMethod>,
}

impl Default for BilinearOptions {
    fn default() -> Self {
        Self { trials: 8, power_iterations: 0, seed: 0, method: None }
    }
}

/// Outcome of one block-triple measurement.
#[derive(Debug, Clone, Serialize)]
pub struct BilinearMeasurement {
    pub blocks: [DyadicBlock; 3],
    pub feasible: bool,
    pub method: ConvolutionMethod,
    pub block_sizes: [usize; 3],
    /// Largest `‖P_{K₀}(u₁ū₂)‖/(‖u₁‖‖u₂‖)` over random Gaussian trials.
    pub random_max: f64,
    /// Power-iteration estimate of the operator norm (equals `random_max` when disabled).
    pub empirical: f64,
    pub constants: BilinearConstants,
    pub theoretical: f64,
    /// `empirical / theoretical`.
    pub ratio: f64,
    /// Cauchy-Schwarz bound `sqrt(min_j |K_j|)` on the unit lattice.
    pub trivial_bound: f64,
}

/// Measures the restricted bilinear constant for the triple `(K₀, K₁, K₂)`.
pub fn measure_bilinear_constant(blocks: [DyadicBlock; 3], opts: &BilinearOptions) -> BilinearMeasurement {
    let op = RestrictedBilinear::new(blocks, opts.method);
    let constants = BilinearConstants::new(blocks);
    let block_sizes = [op.k[0].len(), op.k[1].len(), op.k[2].len()];
    let trivial_bound = (*block_sizes.iter().min().unwrap_or(&0) as f64).sqrt();
    let feasible = op.feasible();
    let mut out = BilinearMeasurement {
        blocks,
        feasible,
        method: op.method,
        block_sizes,
        random_max: 0.0,
        empirical: 0.0,
        constants,
        theoretical: constants.min(),
        ratio: 0.0,
        trivial_bound,
    };
    if !feasible {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<(f64, Vec<Complex64>, Vec<Complex64>)> = None;
    for _ in 0..opts.trials.max(1) {
        let mut u1: Vec<Complex64> = random_gaussian(&op.k[1], &mut rng).modes.into_iter().map(|m| m.1).collect();
        let mut u2: Vec<Complex64> = random_gaussian(&op.k[2], &mut rng).modes.into_iter().map(|m| m.1).collect();
        normalize(&mut u1);
        normalize(&mut u2);
        let r = l2(&op.apply(&u1, &u2));
        if best.as_ref().map_or(true, |b| r > b.0) {
            best = Some((r, u1, u2));
        }
    }
    let (random_max, mut u1, mut u2) = best.expect("at least one trial");
    let mut value = random_max;
    for _ in 0..opts.power_iterations {
        let mut w = op.apply(&u1, &u2);
        if normalize(&mut w) == 0.0 {
            break;
        }
        u1 = op.adjoint_first(&w, &u2);
        normalize(&mut u1);
        let mut w = op.apply(&u1, &u2);
        normalize(&mut w);
        u2 = op.adjoint_second(&w, &u1);
        normalize(&mut u2);
        value = value.max(l2(&op.apply(&u1, &u2)));
    }
    out.random_max = random_max;
    out.empirical = value;
    out.ratio = value / out.theoretical;
    out
}

// ---------------------------------------------------------------------------
// Interaction geometry
// ---------------------------------------------------------------------------

/// A bilinear interaction `X₀ = X₁ − X₂` with its modulations and angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InteractionSample {
    /// `(τ, ξ₁, ξ₂)` components of each frequency.
    pub x: [[f64; 3]; 3],
    pub signs: [Sign; 3],
    pub h: [f64; 3],
    /// `|∠(±₁ξ₁, ±₂ξ₂)| ∈ [0, π]`.
    pub theta: f64,
}

fn norm2(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

impl InteractionSample {
    pub fn new(x1: [f64; 3], x2: [f64; 3], signs: [Sign; 3]) -> Self {
        let x0 = [x1[0] - x2[0], x1[1] - x2[1], x1[2] - x2[2]];
        let x = [x0, x1, x2];
        let h = [0, 1, 2].map(|j| modulation(x[j][0], norm2([x[j][1], x[j][2]]), signs[j]));
        let (s1, s2) = (signs[1].value(), signs[2].value());
        let a = [s1 * x1[1], s1 * x1[2]];
        let b = [s2 * x2[1], s2 * x2[2]];
        let theta = (a[0] * b[1] - a[1] * b[0]).abs().atan2(a[0] * b[0] + a[1] * b[1]);
        Self { x, signs, h, theta }
    }

    pub fn abs_xi(&self, j: usize) -> f64 {
        norm2([self.x[j][1], self.x[j][2]])
    }

    pub fn max_h(&self) -> f64 {
        self.h.iter().fold(0.0f64, |m, h| m.max(h.abs()))
    }

    /// `max|h| / (min(|ξ₁|,|ξ₂|)·θ²)`; `None` for the degenerate `0/0` case.
    pub fn angular_ratio(&self) -> Option<f64> {
        ratio_or_degenerate(self.max_h(), self.abs_xi(1).min(self.abs_xi(2)) * self.theta * self.theta)
    }

    /// `max|h|·|ξ₀| / (|ξ₁||ξ₂|·θ²)`; `None` for the degenerate `0/0` case.
    pub fn high_low_ratio(&self) -> Option<f64> {
        ratio_or_degenerate(self.max_h() * self.abs_xi(0), self.abs_xi(1) * self.abs_xi(2) * self.theta * self.theta)
    }

    /// `|ξ₀| ≪ |ξ₁| ~ |ξ₂|` with opposite input signs, read as `|ξ₀| ≤ 0.1·min(|ξ₁|,|ξ₂|)`
    /// and `|ξ₁|/|ξ₂| ∈ [1/2, 2]`.
    pub fn in_opposite_sign_regime(&self) -> bool {
        let (r0, r1, r2) = (self.abs_xi(0), self.abs_xi(1), self.abs_xi(2));
        self.signs[1] != self.signs[2] && r0 <= 0.1 * r1.min(r2) && r1 <= 2.0 * r2 && r2 <= 2.0 * r1
    }
}

fn ratio_or_degenerate(num: f64, den: f64) -> Option<f64> {
    const TINY: f64 = 1e-12;
    match (num.abs() <= TINY, den.abs() <= TINY) {
        (true, true) => None,
        (_, true) => Some(f64::INFINITY),
        _ => Some(num / den),
    }
}

/// Family of random interactions drawn by [`check_interaction_geometry`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleFamily {
    /// `ξ₁, ξ₂` uniform in a disk of radius `R`, `τ₁, τ₂` uniform in `[−R, R]`.
    Uniform,
    /// Both inputs exactly on their cones (`h₁ = h₂ = 0`).
    Cone,
    /// Cone points with independent temporal offsets up to `|ξ_j|/2`.
    Perturbed,
    /// `ξ₂ = ξ₁ − ξ₀` with `|ξ₀| < 0.09|ξ₁|`, opposite input signs, on the cones.
    HighHighOpposite,
    /// `ξ₂` a rescaled copy of `ξ₁` rotated by at most 0.05 rad, on the cones.
    NearlyCollinear,
}

impl SampleFamily {
    pub const ALL: [SampleFamily; 5] = [
        SampleFamily::Uniform,
        SampleFamily::Cone,
        SampleFamily::Perturbed,
        SampleFamily::HighHighOpposite,
        SampleFamily::NearlyCollinear,
    ];

    /// Exact infimum of the angular ratio over the family's support, when known in closed form.
    /// On the cones `|h₀| ≥ (2/π²)·min(|ξ₁|,|ξ₂|)θ²`; off the cones
    /// `h₀ = h₁ − h₂ + H` with `H` the on-cone value, so only a third of it survives.
    pub fn angular_infimum(self) -> f64 {
        let cone = 2.0 / (PI * PI);
        match self {
            SampleFamily::Uniform | SampleFamily::Perturbed => cone / 3.0,
            _ => cone,
        }
    }
}

/// Summary of a sampled interaction-geometry check.
#[derive(Debug, Clone, Serialize)]
pub struct GeometryReport {
    pub families: Vec<SampleFamily>,
    pub samples: usize,
    /// Samples where both sides vanish (collinear cone interactions), counted as passes.
    pub degenerate: usize,
    pub min_angular_ratio: f64,
    pub argmin: Option<InteractionSample>,
    /// Samples with a zero ratio but an angle above tolerance (should be none).
    pub zero_ratio_with_angle: usize,
    pub regime_samples: usize,
    pub regime_min_theta: f64,
    pub regime_max_theta: f64,
    /// Minimum of the high-low ratio outside the opposite-sign regime.
    pub min_high_low_ratio: f64,
}

fn random_in_disk(rng: &mut impl Rng, radius: f64) -> [f64; 2] {
    let r = radius * rng.gen::<f64>().sqrt().max(1e-3);
    let a = rng.gen_range(0.0..2.0 * PI);
    [r * a.cos(), r * a.sin()]
}

fn random_sign(rng: &mut impl Rng) -> Sign {
    if rng.gen::<bool>() {
        Sign::Plus
    } else {
        Sign::Minus
    }
}

fn draw_interaction(family: SampleFamily, radius: f64, rng: &mut ChaCha8Rng) -> InteractionSample {
    let mut signs = [random_sign(rng), random_sign(rng), random_sign(rng)];
    let xi1 = random_in_disk(rng, radius);
    let xi2 = match family {
        SampleFamily::HighHighOpposite => {
            signs[2] = signs[1].flip();
            let small = random_in_disk(rng, 0.09 * norm2(xi1));
            [xi1[0] - small[0], xi1[1] - small[1]]
        }
        SampleFamily::NearlyCollinear => {
            let scale = rng.gen_range(-3.0..3.0f64);
            let rot = rng.gen_range(-0.05..0.05f64);
            let (c, s) = (rot.cos(), rot.sin());
            [scale * (c * xi1[0] - s * xi1[1]), scale * (s * xi1[0] + c * xi1[1])]
        }
        _ => random_in_disk(rng, radius),
    };
    let mut tau = |xi: [f64; 2], sign: Sign| {
        let on_cone = -sign.value() * norm2(xi);
        match family {
            SampleFamily::Uniform => rng.gen_range(-radius..radius),
            SampleFamily::Perturbed => on_cone + rng.gen_range(-0.5..0.5) * norm2(xi),
            _ => on_cone,
        }
    };
    let t1 = tau(xi1, signs[1]);
    let t2 = tau(xi2, signs[2]);
    InteractionSample::new([t1, xi1[0], xi1[1]], [t2, xi2[0], xi2[1]], signs)
}

/// Draws `samples` interactions cycling through `families` (random signs
/// throughout) and records the angular ratio, the degenerate cases, the
/// opposite-sign high-high angles and the high-low ratio.
pub fn check_interaction_geometry(samples: usize, seed: u64, radius: f64, families: &[SampleFamily]) -> GeometryReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let families = if families.is_empty() { SampleFamily::ALL.to_vec() } else { families.to_vec() };
    let mut report = GeometryReport {
        families: families.clone(),
        samples,
        degenerate: 0,
        min_angular_ratio: f64::INFINITY,
        argmin: None,
        zero_ratio_with_angle: 0,
        regime_samples: 0,
        regime_min_theta: f64::INFINITY,
        regime_max_theta: 0.0,
        min_high_low_ratio: f64::INFINITY,
    };
    for i in 0..samples {
        let s = draw_interaction(families[i % families.len()], radius, &mut rng);
        if s.abs_xi(1) == 0.0 || s.abs_xi(2) == 0.0 {
            continue;
        }
        match s.angular_ratio() {
            None => report.degenerate += 1,
            Some(r) => {
                if r == 0.0 && s.theta > 1e-9 {
                    report.zero_ratio_with_angle += 1;
                }
                if r < report.min_angular_ratio {
                    report.min_angular_ratio = r;
                    report.argmin = Some(s);
                }
            }
        }
        if s.in_opposite_sign_regime() {
            report.regime_samples += 1;
            report.regime_min_theta = report.regime_min_theta.min(s.theta);
            report.regime_max_theta = report.regime_max_theta.max(s.theta);
        } else if let Some(r) = s.high_low_ratio() {
            report.min_high_low_ratio = report.min_high_low_ratio.min(r);
        }
    }
    report
}

// ---------------------------------------------------------------------------
// Multilinear ratios
// ---------------------------------------------------------------------------

/// The multilinear expressions whose `X^{s,b}` ratios are tabulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MultilinearKind {
    /// `Q₁₂(D⁻¹A, φ)`
    QjkPotentialHiggs,
    /// `Q₁₀(D⁻¹A, φ)`
    Qj0PotentialHiggs,
    /// `Q₁₂(D⁻¹A₁, A₂)`
    QjkPotentialPotential,
    /// `Q₁₀(D⁻¹A₁, A₂)`
    Qj0PotentialPotential,
    /// `Q₁₂(φ̄₁, φ₂)`
    QjkHiggsHiggs,
    /// `Q₁₀(φ̄₁, φ₂)`
    Qj0HiggsHiggs,
    /// `A₁A₂φ₃`
    PotentialPotentialHiggs,
    /// `φ̄₁A₂φ₃`
    HiggsBarPotentialHiggs,
    /// `φ₁φ₂φ₃`
    HiggsCubic,
    /// `φ₁⋯φ₅`
    HiggsQuintic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum InputClass {
    Potential,
    Higgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symbol {
    One,
    Dx,
    Dy,
    Dt,
    RieszX,
    RieszY,
    RieszT,
}

impl Symbol {
    fn eval(self, x: [i64; 3]) -> Complex64 {
        let r = ((x[1] * x[1] + x[2] * x[2]) as f64).sqrt();
        let inv = if r > 0.0 { 1.0 / r } else { 0.0 };
        let i = Complex64::new(0.0, 1.0);
        match self {
            Symbol::One => Complex64::new(1.0, 0.0),
            Symbol::Dx => i * x[1] as f64,
            Symbol::Dy => i * x[2] as f64,
            Symbol::Dt => i * x[0] as f64,
            Symbol::RieszX => i * x[1] as f64 * inv,
            Symbol::RieszY => i * x[2] as f64 * inv,
            Symbol::RieszT => i * x[0] as f64 * inv,
        }
    }
}

impl MultilinearKind {
    pub const ALL: [MultilinearKind; 10] = [
        MultilinearKind::QjkPotentialHiggs,
        MultilinearKind::Qj0PotentialHiggs,
        MultilinearKind::QjkPotentialPotential,
        MultilinearKind::Qj0PotentialPotential,
        MultilinearKind::QjkHiggsHiggs,
        MultilinearKind::Qj0HiggsHiggs,
        MultilinearKind::PotentialPotentialHiggs,
        MultilinearKind::HiggsBarPotentialHiggs,
        MultilinearKind::HiggsCubic,
        MultilinearKind::HiggsQuintic,
    ];

    pub fn label(self) -> &'static str {
        match self {
            MultilinearKind::QjkPotentialHiggs => "qjk-a-phi",
            MultilinearKind::Qj0PotentialHiggs => "qj0-a-phi",
            MultilinearKind::QjkPotentialPotential => "qjk-a-a",
            MultilinearKind::Qj0PotentialPotential => "qj0-a-a",
            MultilinearKind::QjkHiggsHiggs => "qjk-phibar-phi",
            MultilinearKind::Qj0HiggsHiggs => "qj0-phibar-phi",
            MultilinearKind::PotentialPotentialHiggs => "a-a-phi",
            MultilinearKind::HiggsBarPotentialHiggs => "phibar-a-phi",
            MultilinearKind::HiggsCubic => "phi3",
            MultilinearKind::HiggsQuintic => "phi5",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.label() == s)
    }

    /// Input classes and whether each input enters conjugated.
    fn inputs(self) -> Vec<(InputClass, bool)> {
        use InputClass::*;
        match self {
            MultilinearKind::QjkPotentialHiggs | MultilinearKind::Qj0PotentialHiggs => {
                vec![(Potential, false), (Higgs, false)]
            }
            MultilinearKind::QjkPotentialPotential | MultilinearKind::Qj0PotentialPotential => {
                vec![(Potential, false), (Potential, false)]
            }
            MultilinearKind::QjkHiggsHiggs | MultilinearKind::Qj0HiggsHiggs => vec![(Higgs, true), (Higgs, false)],
            MultilinearKind::PotentialPotentialHiggs => vec![(Potential, false), (Potential, false), (Higgs, false)],
            MultilinearKind::HiggsBarPotentialHiggs => vec![(Higgs, true), (Potential, false), (Higgs, false)],
            MultilinearKind::HiggsCubic => vec![(Higgs, false); 3],
            MultilinearKind::HiggsQuintic => vec![(Higgs, false); 5],
        }
    }

    /// Terms `(coefficient, per-input symbol)` of the expression.
    fn terms(self) -> Vec<(f64, Vec<Symbol>)> {
        use Symbol::*;
        let n = self.inputs().len();
        let riesz_first = matches!(
            self,
            MultilinearKind::QjkPotentialHiggs
                | MultilinearKind::Qj0PotentialHiggs
                | MultilinearKind::QjkPotentialPotential
                | MultilinearKind::Qj0PotentialPotential
        );
        let (x1, y1, t1) = if riesz_first { (RieszX, RieszY, RieszT) } else { (Dx, Dy, Dt) };
        match self {
            MultilinearKind::QjkPotentialHiggs
            | MultilinearKind::QjkPotentialPotential
            | MultilinearKind::QjkHiggsHiggs => vec![(1.0, vec![x1, Dy]), (-1.0, vec![y1, Dx])],
            MultilinearKind::Qj0PotentialHiggs
            | MultilinearKind::Qj0PotentialPotential
            | MultilinearKind::Qj0HiggsHiggs => vec![(1.0, vec![x1, Dt]), (-1.0, vec![t1, Dx])],
            _ => vec![(1.0, vec![One; n])],
        }
    }

    /// Offsets `(Δs, Δb)` of the output norm relative to `(s, b)`.
    fn output_shift(self) -> (f64, f64) {
        match self {
            MultilinearKind::QjkPotentialHiggs
            | MultilinearKind::Qj0PotentialHiggs
            | MultilinearKind::PotentialPotentialHiggs
            | MultilinearKind::HiggsCubic
            | MultilinearKind::HiggsQuintic => (-0.5, -1.0),
            MultilinearKind::HiggsBarPotentialHiggs => (0.0, -1.0),
            _ => (-1.0, -1.0),
        }
    }
}

impl fmt::Display for MultilinearKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Evaluates the multilinear expression on lattice inputs, returning the output field.
fn evaluate_multilinear(kind: MultilinearKind, inputs: &[LatticeField]) -> LatticeField {
    let classes = kind.inputs();
    let prepared: Vec<LatticeField> = inputs
        .iter()
        .zip(&classes)
        .map(|(u, (_, conj))| if *conj { u.conjugate() } else { u.clone() })
        .collect();
    let mut acc: HashMap<[i64; 3], Complex64> = HashMap::new();
    for (coef, symbols) in kind.terms() {
        let factors: Vec<LatticeField> = prepared.iter().zip(&symbols).map(|(u, s)| u.apply(|x| s.eval(x))).collect();
        let refs: Vec<&LatticeField> = factors.iter().collect();
        for (x, z) in WindowProduct::new(&refs).into_field(0.0).modes {
            *acc.entry(x).or_insert(ZERO) += z * coef;
        }
    }
    let mut modes: Vec<_> = acc.into_iter().collect();
    modes.sort_unstable_by_key(|m| m.0);
    LatticeField { modes }
}

/// Ratio of the output norm to the product of input norms, maximized over the output sign.
fn multilinear_ratio(kind: MultilinearKind, inputs: &[LatticeField], signs: &[Sign], p: XsbParams) -> f64 {
    let (ds, db) = kind.output_shift();
    let out = evaluate_multilinear(kind, inputs);
    let lhs = Sign::BOTH.iter().map(|&s| out.xsb_norm(p.shifted(ds, db), s)).fold(0.0, f64::max);
    let rhs: f64 = inputs
        .iter()
        .zip(kind.inputs())
        .zip(signs)
        .map(|((u, (class, _)), &sign)| {
            let q = if class == InputClass::Higgs { p.shifted(0.5, 0.0) } else { p };
            u.xsb_norm(q, sign)
        })
        .product();
    if rhs > 0.0 {
        lhs / rhs
    } else {
        0.0
    }
}

/// Random input concentrated on a sub-box of `K^±_{N,1}`: lattice points within
/// radius `min(N/2, 4)` of `1.5·N·(cos α, sin α)`.
fn random_block_input(n: u64, sign: Sign, rng: &mut impl Rng) -> LatticeField {
    let block = DyadicBlock { sign, n, l: 1 };
    let angle = rng.gen_range(0.0..2.0 * PI);
    let centre = [1.5 * n as f64 * angle.cos(), 1.5 * n as f64 * angle.sin()];
    let w = (n as f64 / 2.0).min(4.0);
    let pts: Vec<[i64; 3]> = block
        .lattice_points()
        .into_iter()
        .filter(|p| (p[1] as f64 - centre[0]).hypot(p[2] as f64 - centre[1]) <= w)
        .collect();
    random_gaussian(&pts, rng)
}

/// One row of a multilinear scan.
#[derive(Debug, Clone, Serialize)]
pub struct MultilinearRow {
    pub n: u64,
    pub max_ratio: f64,
    pub mean_ratio: f64,
}

/// Multilinear ratio table across frequency scales.
#[derive(Debug, Clone, Serialize)]
pub struct MultilinearReport {
    pub kind: MultilinearKind,
    pub params: XsbParams,
    pub trials: usize,
    pub rows: Vec<MultilinearRow>,
    /// Log-log fit of the maximal ratio against `N` (absent with fewer than four scales).
    pub fit: Option<LogLogFit>,
    pub regime_warning: Option<String>,
}

/// Tabulates the output-to-input norm ratio of `kind` with every input on a
/// random sub-box of a block at spatial scale `N`, for each `N` in `scales`.
pub fn measure_multilinear_ratio(
    kind: MultilinearKind,
    p: XsbParams,
    trials: usize,
    scales: &[u64],
    seed: u64,
) -> MultilinearReport {
    let arity = kind.inputs().len();
    let rows: Vec<MultilinearRow> = scales
        .iter()
        .map(|&n| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ n.wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let ratios: Vec<f64> = (0..trials.max(1))
                .map(|_| {
                    let signs: Vec<Sign> = (0..arity).map(|_| random_sign(&mut rng)).collect();
                    let inputs: Vec<LatticeField> =
                        signs.iter().map(|&s| random_block_input(n, s, &mut rng)).collect();
                    multilinear_ratio(kind, &inputs, &signs, p)
                })
                .collect();
            MultilinearRow {
                n,
                max_ratio: ratios.iter().copied().fold(0.0, f64::max),
                mean_ratio: ratios.iter().sum::<f64>() / ratios.len() as f64,
            }
        })
        .collect();
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.max_ratio)).collect();
    MultilinearReport { kind, params: p, trials, fit: loglog_fit(&pts, 0.0).ok(), rows, regime_warning: p.regime_warning() }
}

/// Ratio for caller-supplied inputs (each paired with its cone sign).
pub fn multilinear_ratio_for(kind: MultilinearKind, inputs: &[(LatticeField, Sign)], p: XsbParams) -> Result<f64> {
    if inputs.len() != kind.inputs().len() {
        return Err(CshError::DimensionMismatch { expected: kind.inputs().len(), found: inputs.len() });
    }
    let (fields, signs): (Vec<_>, Vec<_>) = inputs.iter().cloned().unzip();
    Ok(multilinear_ratio(kind, &fields, &signs, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral_grid::random_band_limited;

    fn unit_grid(m: usize) -> Grid2D {
        Grid2D::new(2.0 * PI, m).unwrap()
    }

    #[test]
    fn single_mode_on_exact_period() {
        let g = unit_grid(16);
        let (t0, k0) = (3.0, [2.0, -1.0]);
        let u = SpaceTimeField::from_fn(&g, 2.0 * PI, 16, |t, x, y| Complex64::from_polar(1.0, t0 * t + k0[0] * x + k0[1] * y))
            .unwrap()
            .to_spectral(Taper::None);
        let it = u.tau_index(3).unwrap();
        assert!((u.coefficient(it, 2, -1).unwrap() - 1.0).norm() < 1e-12);
        assert!((u.l2_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parseval_without_taper() {
        let g = Grid2D::new(5.0, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let frames: Vec<ScalarField> = (0..8).map(|_| random_band_limited(&g, 5, 1.0, &mut rng)).collect();
        let phys = SpaceTimeField::from_physical(
            &g,
            3.0,
            8,
            frames.iter().flat_map(|f| f.to_physical().into_data()).collect(),
        )
        .unwrap();
        let field = spacetime_transform(&frames, 3.0, Taper::None).unwrap();
        let expected = phys.l2_norm() * phys.parseval_factor();
        assert!((field.l2_norm() - expected).abs() <= 1e-10 * expected);
        assert_eq!(field.taper(), Taper::None);
    }

    #[test]
    fn tapers_have_unit_mean_square() {
        for taper in [Taper::None, Taper::hann(), Taper::RaisedCosine { rolloff: 0.3 }] {
            let w = taper.weights(64);
            let ms = w.iter().map(|x| x * x).sum::<f64>() / 64.0;
            assert!((ms - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tapered_half_wave_sits_on_its_cone() {
        let g = unit_grid(16);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u0 = random_band_limited(&g, 3, 1.0, &mut rng);
        for (sign, dir) in [(Sign::Plus, -1.0), (Sign::Minus, 1.0)] {
            let t_window = 8.0 * PI;
            let frames: Vec<ScalarField> = (0..64)
                .map(|j| {
                    let t = j as f64 * t_window / 64.0;
                    let mut f = u0.clone();
                    for (idx, z) in f.data_mut().iter_mut().enumerate() {
                        *z *= Complex64::from_polar(1.0, dir * t * g.abs_xi(idx));
                    }
                    f
                })
                .collect();
            let st = spacetime_transform(&frames, t_window, Taper::hann()).unwrap();
            let masses = st.block_masses(sign).unwrap();
            let total: f64 = masses.values().sum();
            let near: f64 = masses.iter().filter(|(k, _)| k.l == 1).map(|(_, m)| m).sum();
            assert!(near >= 0.9 * total, "sign {sign}: {near} of {total}");
        }
    }

    #[test]
    fn mode_classification_and_projection() {
        let k = DyadicBlock::classify(-4.0, 4.0, Sign::Plus);
        assert_eq!(k, DyadicBlock::new(Sign::Plus, 4, 1).unwrap());
        assert!(DyadicBlock::new(Sign::Plus, 3, 1).is_err());

        let g = unit_grid(16);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let frames: Vec<ScalarField> = (0..16).map(|_| random_band_limited(&g, 7, 1.0, &mut rng)).collect();
        let st = spacetime_transform(&frames, 2.0 * PI, Taper::None).unwrap();
        let a = DyadicBlock::new(Sign::Minus, 2, 4).unwrap();
        let b = DyadicBlock::new(Sign::Minus, 4, 4).unwrap();
        let pa = st.project_block(&a).unwrap();
        assert!(pa.l2_norm() > 0.0);
        assert_eq!(pa.project_block(&b).unwrap().l2_norm(), 0.0);
        for sign in Sign::BOTH {
            let total: f64 = st.block_masses(sign).unwrap().keys().map(|k| st.project_block(k).unwrap().l2_norm().powi(2)).sum();
            assert!((total - st.l2_norm().powi(2)).abs() <= 1e-12 * total);
        }
        assert!(st.to_physical().project_block(&a).is_err());
    }

    #[test]
    fn xsb_norm_examples() {
        let g = unit_grid(16);
        // |ξ| = 2 and τ = 6: τ + |ξ| = 8 would be L = 8, τ − |ξ| = 4 gives L = 4 for the minus cone.
        let u = SpaceTimeField::from_fn(&g, 2.0 * PI, 16, |t, x, _| Complex64::from_polar(1.0, 6.0 * t + 2.0 * x))
            .unwrap()
            .to_spectral(Taper::None);
        assert!((u.xsb_norm(XsbParams::new(1.0, 0.5), Sign::Minus).unwrap() - 4.0).abs() < 1e-12);
        assert!((u.xsb_norm(XsbParams::new(0.0, 0.0), Sign::Plus).unwrap() - 1.0).abs() < 1e-12);

        let field = LatticeField { modes: vec![([6, 2, 0], Complex64::new(0.6, 0.0)), ([1, 5, 0], Complex64::new(0.0, 0.8))] };
        let p = XsbParams::new(0.7, 0.3);
        let first = 0.6 * 2f64.powf(0.7) * 8f64.powf(0.3);
        let second = 0.8 * 4f64.powf(0.7) * 4f64.powf(0.3);
        assert!((field.xsb_norm(p, Sign::Plus) - first.hypot(second)).abs() < 1e-12);
    }

    #[test]
    fn xsb_norm_monotone_for_high_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts = DyadicBlock::new(Sign::Plus, 4, 2).unwrap().lattice_points();
        let u = random_gaussian(&pts, &mut rng);
        let base = u.xsb_norm(XsbParams::new(0.3, 0.3), Sign::Plus);
        assert!(u.xsb_norm(XsbParams::new(0.5, 0.3), Sign::Plus) > base);
        assert!(u.xsb_norm(XsbParams::new(0.3, 0.5), Sign::Plus) > base);
    }

    #[test]
    fn blocks_tile_the_lattice() {
        let mut seen = std::collections::HashSet::new();
        for n in [1, 2, 4] {
            for l in [1, 2, 4, 8, 16] {
                for p in DyadicBlock::new(Sign::Minus, n, l).unwrap().lattice_points() {
                    assert!(seen.insert(p));
                }
            }
        }
        for t in -8..8 {
            for kx in -7i64..=7 {
                for ky in -7i64..=7 {
                    let r = ((kx * kx + ky * ky) as f64).sqrt();
                    let k = DyadicBlock::classify(t as f64, r, Sign::Minus);
                    if r < 8.0 && k.l <= 16 {
                        assert!(seen.contains(&[t, kx, ky]));
                    }
                }
            }
        }
    }

    #[test]
    fn window_product_matches_direct_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_gaussian(&DyadicBlock::new(Sign::Plus, 2, 1).unwrap().lattice_points(), &mut rng);
        let b = random_gaussian(&DyadicBlock::new(Sign::Minus, 1, 2).unwrap().lattice_points(), &mut rng);
        let prod = WindowProduct::new(&[&a, &b]);
        let mut direct: HashMap<[i64; 3], Complex64> = HashMap::new();
        for (x, u) in &a.modes {
            for (y, v) in &b.modes {
                *direct.entry(add(*x, *y)).or_insert(ZERO) += u * v;
            }
        }
        for (x, z) in &direct {
            assert!((prod.get(*x) - z).norm() < 1e-10);
        }
        let total: f64 = direct.values().map(|z| z.norm_sqr()).sum();
        let fft_total = prod.into_field(0.0).norm().powi(2);
        assert!((total - fft_total).abs() < 1e-9 * total);
    }

    #[test]
    fn incompatible_shells_are_infeasible() {
        let k0 = DyadicBlock::new(Sign::Plus, 16, 1).unwrap();
        let k = DyadicBlock::new(Sign::Plus, 1, 1).unwrap();
        let m = measure_bilinear_constant([k0, k, k], &BilinearOptions::default());
        assert!(!m.feasible);
        assert_eq!(m.empirical, 0.0);
    }

    #[test]
    fn bilinear_methods_agree_and_respect_trivial_bound() {
        let blocks = [
            DyadicBlock::new(Sign::Plus, 1, 1).unwrap(),
            DyadicBlock::new(Sign::Plus, 2, 1).unwrap(),
            DyadicBlock::new(Sign::Minus, 2, 2).unwrap(),
        ];
        let run = |method| {
            measure_bilinear_constant(
                blocks,
                &BilinearOptions { trials: 3, power_iterations: 10, seed: 4, method: Some(method) },
            )
        };
        let d = run(ConvolutionMethod::Direct);
        let f = run(ConvolutionMethod::Fft);
        assert!(d.feasible && f.feasible);
        assert!((d.random_max - f.random_max).abs() < 1e-10);
        assert!((d.empirical - f.empirical).abs() < 1e-8 * d.empirical);
        assert!(d.empirical >= d.random_max);
        assert!(d.empirical <= d.trivial_bound * (1.0 + 1e-12));
        assert_eq!(d.theoretical, 1.0);
    }

    #[test]
    fn bilinear_constants_formula() {
        let b = |n, l| DyadicBlock::new(Sign::Plus, n, l).unwrap();
        let c = BilinearConstants::new([b(8, 2), b(4, 16), b(16, 1)]);
        assert!((c.c1 - (4.0f64 * 1.0).sqrt() * (4.0f64 * 16.0).powf(0.25)).abs() < 1e-12);
        assert!((c.c2_first - (4.0f64 * 2.0).sqrt() * (4.0f64 * 16.0).powf(0.25)).abs() < 1e-12);
        assert!((c.c2_second - (4.0f64 * 1.0).sqrt() * (8.0f64 * 2.0).powf(0.25)).abs() < 1e-12);
        assert!((c.c3 - 4.0).abs() < 1e-12);
        assert!((c.min() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn geometry_examples() {
        let s = InteractionSample::new([-2.0, 2.0, 0.0], [-1.0, 1.0, 0.0], [Sign::Plus; 3]);
        assert_eq!(s.theta, 0.0);
        assert!(s.angular_ratio().is_none());

        let s = InteractionSample::new([-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0], [Sign::Plus; 3]);
        assert!((s.max_h() - 2f64.sqrt()).abs() < 1e-12);
        let expected = 2f64.sqrt() / (PI / 2.0).powi(2);
        assert!((s.angular_ratio().unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.573).abs() < 1e-3);
    }

    #[test]
    fn geometry_sampling_respects_family_infima() {
        for family in SampleFamily::ALL {
            let r = check_interaction_geometry(20_000, 1, 50.0, &[family]);
            assert!(r.min_angular_ratio >= family.angular_infimum() * (1.0 - 1e-9), "{family:?}: {r:?}");
            assert_eq!(r.zero_ratio_with_angle, 0);
        }
        let r = check_interaction_geometry(20_000, 2, 50.0, &[SampleFamily::HighHighOpposite]);
        assert_eq!(r.regime_samples, 20_000);
        assert!(r.regime_min_theta >= 0.5 && r.regime_max_theta <= PI);
    }

    #[test]
    fn off_cone_infimum_is_attained() {
        // θ = π, equal magnitudes, with the on-cone modulation split evenly across h₀, h₁, −h₂.
        let r = 10.0;
        let (h1, h2) = (2.0 * r / 3.0, -2.0 * r / 3.0);
        let s = InteractionSample::new([-r + h1, r, 0.0], [-r + h2, -r, 0.0], [Sign::Minus, Sign::Plus, Sign::Plus]);
        assert!((s.theta - PI).abs() < 1e-12);
        let ratio = s.angular_ratio().unwrap();
        assert!(ratio < 0.1 && ratio >= SampleFamily::Perturbed.angular_infimum() * (1.0 - 1e-12), "{s:?} {ratio}");
    }

    #[test]
    fn multilinear_zero_and_low_block() {
        let p = XsbParams::new(0.26, 0.51);
        let zero = LatticeField::from_points(&[[0, 1, 0]], [ZERO]);
        let r = multilinear_ratio_for(MultilinearKind::HiggsCubic, &vec![(zero, Sign::Plus); 3], p).unwrap();
        assert_eq!(r, 0.0);
        for kind in MultilinearKind::ALL {
            let rep = measure_multilinear_ratio(kind, p, 2, &[1], 3);
            let v = rep.rows[0].max_ratio;
            assert!(v.is_finite() && v >= 0.0, "{kind}: {v}");
            assert_eq!(MultilinearKind::from_label(kind.label()), Some(kind));
        }
    }

    #[test]
    fn null_form_of_parallel_inputs_vanishes() {
        // Two modes with parallel spatial frequencies: Q₁₂ cancels exactly.
        let u = LatticeField { modes: vec![([-3, 3, 0], Complex64::new(1.0, 0.0))] };
        let v = LatticeField { modes: vec![([-5, 5, 0], Complex64::new(1.0, 0.0))] };
        let out = evaluate_multilinear(MultilinearKind::QjkHiggsHiggs, &[u, v]);
        assert!(out.norm() < 1e-12);
    }

    #[test]
    fn regime_warning() {
        assert!(XsbParams::from_offsets(0.01, 0.0001 / 2.0).regime_warning().is_none());
        assert!(XsbParams::new(0.26, 0.51).regime_warning().is_some());
    }
}
