//! Periodic 2D pseudospectral engine.
//!
//! Layout: values are stored row-major with `x` as the fast axis, so entry
//! `iy * M + ix` holds the sample at `(ix·h, iy·h)` in physical space or the
//! coefficient of `exp(i(k_x x + k_y y))` in spectral space. Spectral arrays
//! use standard FFT ordering: index `i < M/2` is wavenumber `i`, the rest are
//! `i − M`, and the Nyquist index `M/2` carries wavenumber `−M/2`.
//!
//! Spectral coefficients are Fourier-series coefficients: the single mode
//! `exp(iξ·x)` has coefficient exactly 1.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{CshError, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Spatial axis of the torus (x₁ or x₂).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub const BOTH: [Axis; 2] = [Axis::X, Axis::Y];

    /// Zero-based spatial index (x₁ ↦ 0, x₂ ↦ 1).
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
        }
    }

    pub fn from_index(j: usize) -> Axis {
        if j == 0 {
            Axis::X
        } else {
            Axis::Y
        }
    }
}

struct GridInner {
    box_length: f64,
    m: usize,
    wavenumbers: Vec<i64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Uniform periodic grid on `[0, box_length)²` with M points per axis.
#[derive(Clone)]
pub struct Grid2D {
    inner: Arc<GridInner>,
}

impl fmt::Debug for Grid2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid2D")
            .field("box_length", &self.inner.box_length)
            .field("m", &self.inner.m)
            .finish()
    }
}

impl PartialEq for Grid2D {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.m == other.inner.m && self.inner.box_length == other.inner.box_length)
    }
}

impl Grid2D {
    pub fn new(box_length: f64, m: usize) -> Result<Self> {
        if m < 8 || m % 2 != 0 {
            return Err(CshError::InvalidGrid(format!("M = {m} must be even and at least 8")));
        }
        if !(box_length > 0.0 && box_length.is_finite()) {
            return Err(CshError::InvalidGrid(format!("box length {box_length} must be positive")));
        }
        let mut planner = FftPlanner::new();
        let wavenumbers = (0..m).map(|i| if i < m / 2 { i as i64 } else { i as i64 - m as i64 }).collect();
        Ok(Self {
            inner: Arc::new(GridInner {
                box_length,
                m,
                wavenumbers,
                forward: planner.plan_fft_forward(m),
                inverse: planner.plan_fft_inverse(m),
            }),
        })
    }

    pub fn m(&self) -> usize {
        self.inner.m
    }

    pub fn box_length(&self) -> f64 {
        self.inner.box_length
    }

    /// Number of grid points, M².
    pub fn len(&self) -> usize {
        self.inner.m * self.inner.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.inner.box_length / self.inner.m as f64
    }

    pub fn area(&self) -> f64 {
        self.inner.box_length * self.inner.box_length
    }

    /// Lattice unit `2π / box_length`.
    pub fn dk(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.inner.box_length
    }

    /// Integer wavenumber of FFT index `i`.
    pub fn wavenumber(&self, i: usize) -> i64 {
        self.inner.wavenumbers[i]
    }

    /// Integer wavenumbers `(k_x, k_y)` of flat index `idx`.
    pub fn lattice(&self, idx: usize) -> (i64, i64) {
        let m = self.inner.m;
        (self.wavenumber(idx % m), self.wavenumber(idx / m))
    }

    /// Physical frequency `ξ` of flat index `idx`.
    pub fn xi(&self, idx: usize) -> [f64; 2] {
        let (kx, ky) = self.lattice(idx);
        let dk = self.dk();
        [kx as f64 * dk, ky as f64 * dk]
    }

    pub fn abs_xi(&self, idx: usize) -> f64 {
        let [a, b] = self.xi(idx);
        a.hypot(b)
    }

    /// Flat index of the integer wavenumber pair, if representable.
    pub fn index_of(&self, kx: i64, ky: i64) -> Option<usize> {
        let m = self.inner.m as i64;
        let wrap = |k: i64| -> Option<usize> {
            if k >= -m / 2 && k < m / 2 {
                Some(k.rem_euclid(m) as usize)
            } else {
                None
            }
        };
        Some(wrap(ky)? * self.inner.m + wrap(kx)?)
    }

    /// Physical coordinates of flat index `idx`.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let m = self.inner.m;
        let h = self.spacing();
        [(idx % m) as f64 * h, (idx / m) as f64 * h]
    }

    /// Symbol of `∂_j`, with the Nyquist wavenumber dropped so that real fields stay real.
    pub fn derivative_symbol(&self, idx: usize, axis: Axis) -> Complex64 {
        let m = self.inner.m;
        let i = match axis {
            Axis::X => idx % m,
            Axis::Y => idx / m,
        };
        if i == m / 2 {
            ZERO
        } else {
            I * (self.wavenumber(i) as f64 * self.dk())
        }
    }

    /// Whether the mode lies in the square band `max(|k_x|, |k_y|) ≤ cutoff`.
    pub fn in_band(&self, idx: usize, cutoff: usize) -> bool {
        let (kx, ky) = self.lattice(idx);
        kx.unsigned_abs().max(ky.unsigned_abs()) as usize <= cutoff
    }

    /// Physical samples to Fourier coefficients (normalized by 1/M²).
    pub fn forward(&self, data: &mut [Complex64]) {
        self.fft2(data, &self.inner.forward);
        let scale = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|z| *z *= scale);
    }

    /// Fourier coefficients to physical samples.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.fft2(data, &self.inner.inverse);
    }

    fn fft2(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let m = self.inner.m;
        debug_assert_eq!(data.len(), m * m);
        plan.process(data);
        transpose(data, m);
        plan.process(data);
        transpose(data, m);
    }
}

fn transpose(data: &mut [Complex64], m: usize) {
    for i in 0..m {
        for j in (i + 1)..m {
            data.swap(i * m + j, j * m + i);
        }
    }
}

/// Largest retained integer wavenumber when dealiasing a nonlinearity of the
/// given polynomial degree: products of `order` band-limited factors must not
/// wrap back into the band, which requires `(order + 1)·K < M`.
pub fn dealias_cutoff(m: usize, order: usize) -> usize {
    (m - 1) / (order + 1)
}

/// Zeroes every spectral mode outside the square band.
pub fn truncate_band(grid: &Grid2D, data: &mut [Complex64], cutoff: usize) {
    for (idx, z) in data.iter_mut().enumerate() {
        if !grid.in_band(idx, cutoff) {
            *z = ZERO;
        }
    }
}

/// Dyadic shell index of a frequency magnitude: 1 for values below 2, otherwise
/// the power of two `N` with `N ≤ x < 2N`.
pub fn dyadic_shell(x: f64) -> u64 {
    let mut n = 1u64;
    while x >= 2.0 * n as f64 {
        n *= 2;
    }
    n
}

/// Whether a field currently holds physical samples or Fourier coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Representation {
    Physical,
    Spectral,
}

impl Representation {
    pub fn tag(self) -> u8 {
        match self {
            Representation::Physical => 0,
            Representation::Spectral => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Representation::Physical),
            1 => Some(Representation::Spectral),
            _ => None,
        }
    }
}

/// Fourier multipliers acting diagonally on spectral coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Multiplier {
    /// `D^σ`, symbol `|ξ|^σ`.
    DPow(f64),
    /// `R_j = D⁻¹∂_j`, symbol `iξ_j/|ξ|`.
    Riesz(Axis),
    /// Plain derivative `∂_j`.
    Derivative(Axis),
    /// `exp(t Δ)`, symbol `exp(−t|ξ|²)`.
    Heat(f64),
}

impl Multiplier {
    /// Symbol at flat index `idx`; the zero mode is annihilated by negative powers and Riesz.
    pub fn symbol(&self, grid: &Grid2D, idx: usize) -> Complex64 {
        let r = grid.abs_xi(idx);
        match *self {
            Multiplier::DPow(sigma) => {
                if r == 0.0 {
                    if sigma == 0.0 {
                        Complex64::new(1.0, 0.0)
                    } else {
                        ZERO
                    }
                } else {
                    Complex64::new(r.powf(sigma), 0.0)
                }
            }
            Multiplier::Riesz(axis) => {
                if r == 0.0 {
                    ZERO
                } else {
                    grid.derivative_symbol(idx, axis) / r
                }
            }
            Multiplier::Derivative(axis) => grid.derivative_symbol(idx, axis),
            Multiplier::Heat(t) => Complex64::new((-t * r * r).exp(), 0.0),
        }
    }
}

/// Complex scalar field on a grid, tagged with its representation.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid2D,
    rep: Representation,
    data: Vec<Complex64>,
}

impl ScalarField {
    pub fn zeros(grid: &Grid2D, rep: Representation) -> Self {
        Self { grid: grid.clone(), rep, data: vec![ZERO; grid.len()] }
    }

    pub fn from_data(grid: &Grid2D, rep: Representation, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(CshError::DimensionMismatch { expected: grid.len(), found: data.len() });
        }
        Ok(Self { grid: grid.clone(), rep, data })
    }

    /// Samples a function of the physical coordinates.
    pub fn from_fn(grid: &Grid2D, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let data = (0..grid.len())
            .map(|idx| {
                let [x, y] = grid.point(idx);
                f(x, y)
            })
            .collect();
        Self { grid: grid.clone(), rep: Representation::Physical, data }
    }

    /// Single Fourier mode `amplitude·exp(i(k_x x + k_y y)·2π/L)` in spectral form.
    pub fn mode(grid: &Grid2D, kx: i64, ky: i64, amplitude: Complex64) -> Result<Self> {
        let idx = grid
            .index_of(kx, ky)
            .ok_or_else(|| CshError::InvalidParameter(format!("mode ({kx}, {ky}) not on the grid")))?;
        let mut f = Self::zeros(grid, Representation::Spectral);
        f.data[idx] = amplitude;
        Ok(f)
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn representation(&self) -> Representation {
        self.rep
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn make_spectral(&mut self) {
        if self.rep == Representation::Physical {
            self.grid.forward(&mut self.data);
            self.rep = Representation::Spectral;
        }
    }

    pub fn make_physical(&mut self) {
        if self.rep == Representation::Spectral {
            self.grid.inverse(&mut self.data);
            self.rep = Representation::Physical;
        }
    }

    pub fn to_spectral(&self) -> Self {
        let mut f = self.clone();
        f.make_spectral();
        f
    }

    pub fn to_physical(&self) -> Self {
        let mut f = self.clone();
        f.make_physical();
        f
    }

    pub fn check_compatible(&self, other: &ScalarField) -> Result<()> {
        if self.grid != other.grid {
            return Err(CshError::GridMismatch);
        }
        Ok(())
    }

    /// Elementwise combination in a shared representation (the left operand's).
    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        self.check_compatible(other)?;
        let converted;
        let rhs = if other.rep == self.rep {
            other
        } else {
            converted = match self.rep {
                Representation::Physical => other.to_physical(),
                Representation::Spectral => other.to_spectral(),
            };
            &converted
        };
        Ok(Self {
            grid: self.grid.clone(),
            rep: self.rep,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &ScalarField) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self { grid: self.grid.clone(), rep: self.rep, data: self.data.iter().map(|&z| z * s).collect() }
    }

    pub fn conj_physical(&self) -> Self {
        let mut f = self.to_physical();
        f.data.iter_mut().for_each(|z| *z = z.conj());
        f
    }

    /// Real part in physical space.
    pub fn real_part(&self) -> Self {
        let mut f = self.to_physical();
        f.data.iter_mut().for_each(|z| *z = Complex64::new(z.re, 0.0));
        f
    }

    /// L² norm over the torus, `(∫|u|² dx)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        match self.rep {
            Representation::Spectral => {
                (self.grid.area() * self.data.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
            }
            Representation::Physical => {
                let h = self.grid.spacing();
                (h * h * self.data.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
            }
        }
    }

    /// L^p norm computed from physical samples.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let phys = self.to_physical();
        let h = self.grid.spacing();
        (h * h * phys.data.iter().map(|z| z.norm().powf(p)).sum::<f64>()).powf(1.0 / p)
    }

    /// Coefficient of the zero mode.
    pub fn mean(&self) -> Complex64 {
        self.to_spectral().data[0]
    }

    pub fn apply_multiplier(&self, m: Multiplier) -> Self {
        let mut f = self.to_spectral();
        for (idx, z) in f.data.iter_mut().enumerate() {
            *z *= m.symbol(&self.grid, idx);
        }
        f
    }

    pub fn derivative(&self, axis: Axis) -> Self {
        self.apply_multiplier(Multiplier::Derivative(axis))
    }

    /// Sharp Littlewood-Paley projection onto `|ξ| ∈ [N, 2N)` (or `|ξ| < 2` for N = 1).
    pub fn littlewood_paley(&self, n: u64) -> Self {
        let mut f = self.to_spectral();
        for (idx, z) in f.data.iter_mut().enumerate() {
            if dyadic_shell(self.grid.abs_xi(idx)) != n {
                *z = ZERO;
            }
        }
        f
    }

    /// Squared L² mass per dyadic shell, in increasing N.
    pub fn shell_masses(&self) -> Vec<(u64, f64)> {
        let f = self.to_spectral();
        let area = self.grid.area();
        let mut masses: std::collections::BTreeMap<u64, f64> = Default::default();
        for (idx, z) in f.data.iter().enumerate() {
            *masses.entry(dyadic_shell(self.grid.abs_xi(idx))).or_default() += area * z.norm_sqr();
        }
        masses.into_iter().collect()
    }

    /// Dyadic Sobolev norm `(Σ_N N^{2s} ‖P_N u‖²)^{1/2}`.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        self.shell_masses().into_iter().map(|(n, mass)| (n as f64).powf(2.0 * s) * mass).sum::<f64>().sqrt()
    }

    /// Restricts the spectral content to the square band `|k|_∞ ≤ cutoff`.
    pub fn truncated(&self, cutoff: usize) -> Self {
        let mut f = self.to_spectral();
        truncate_band(&self.grid, &mut f.data, cutoff);
        f
    }

    /// Empirical Bernstein ratio `‖P_N u‖_{L⁴} / (N^{1/2} ‖P_N u‖_{L²})`.
    pub fn bernstein_ratio(&self, n: u64) -> f64 {
        let p = self.littlewood_paley(n);
        let l2 = p.l2_norm();
        if l2 == 0.0 {
            return 0.0;
        }
        p.lp_norm(4.0) / ((n as f64).sqrt() * l2)
    }
}

/// Pointwise product of two fields of a nonlinearity with total degree `order`,
/// dealiased by truncating inputs and output to the band that cannot alias.
/// The result is spectral.
pub fn dealiased_product(u: &ScalarField, v: &ScalarField, order: usize) -> Result<ScalarField> {
    u.check_compatible(v)?;
    let cutoff = dealias_cutoff(u.grid.m(), order);
    let a = u.truncated(cutoff).to_physical();
    let b = v.truncated(cutoff).to_physical();
    let mut out = a.zip_with(&b, |x, y| x * y)?;
    out.make_spectral();
    truncate_band(&u.grid, &mut out.data, cutoff);
    Ok(out)
}

/// Random zero-mean field with independent complex Gaussian coefficients on
/// `1 ≤ |k|_∞ ≤ band`, scaled by `amplitude`. Returned in spectral form.
pub fn random_band_limited<R: Rng>(grid: &Grid2D, band: usize, amplitude: f64, rng: &mut R) -> ScalarField {
    let mut f = ScalarField::zeros(grid, Representation::Spectral);
    let b = band as i64;
    for ky in -b..=b {
        for kx in -b..=b {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            if (kx, ky) == (0, 0) {
                continue;
            }
            if let Some(idx) = grid.index_of(kx, ky) {
                if kx.unsigned_abs() as usize * 2 != grid.m() && ky.unsigned_abs() as usize * 2 != grid.m() {
                    f.data[idx] = Complex64::new(re, im) * amplitude;
                }
            }
        }
    }
    f
}

/// Field whose components are the su(n) coefficient functions of a Lie-valued field.
#[derive(Debug, Clone, PartialEq)]
pub struct LieFieldGrid {
    components: Vec<ScalarField>,
}

impl LieFieldGrid {
    pub fn new(components: Vec<ScalarField>) -> Result<Self> {
        let first = components.first().ok_or(CshError::DimensionMismatch { expected: 1, found: 0 })?;
        for c in &components[1..] {
            first.check_compatible(c)?;
        }
        let rep = first.rep;
        let mut out = Self { components };
        for c in &mut out.components {
            match rep {
                Representation::Physical => c.make_physical(),
                Representation::Spectral => c.make_spectral(),
            }
        }
        Ok(out)
    }

    pub fn zeros(grid: &Grid2D, dim: usize, rep: Representation) -> Self {
        Self { components: vec![ScalarField::zeros(grid, rep); dim] }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.components[0].grid
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn representation(&self) -> Representation {
        self.components[0].rep
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn components_mut(&mut self) -> &mut [ScalarField] {
        &mut self.components
    }

    pub fn component(&self, a: usize) -> &ScalarField {
        &self.components[a]
    }

    pub fn map(&self, f: impl Fn(&ScalarField) -> ScalarField) -> Self {
        Self { components: self.components.iter().map(f).collect() }
    }

    pub fn zip_map(&self, other: &LieFieldGrid, f: impl Fn(&ScalarField, &ScalarField) -> Result<ScalarField>) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(CshError::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(Self { components: self.components.iter().zip(&other.components).map(|(a, b)| f(a, b)).collect::<Result<_>>()? })
    }

    pub fn add(&self, other: &LieFieldGrid) -> Result<Self> {
        self.zip_map(other, |a, b| a.add(b))
    }

    pub fn sub(&self, other: &LieFieldGrid) -> Result<Self> {
        self.zip_map(other, |a, b| a.sub(b))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        self.map(|c| c.scale(s))
    }

    pub fn to_spectral(&self) -> Self {
        self.map(ScalarField::to_spectral)
    }

    pub fn to_physical(&self) -> Self {
        self.map(ScalarField::to_physical)
    }

    pub fn apply_multiplier(&self, m: Multiplier) -> Self {
        self.map(|c| c.apply_multiplier(m))
    }

    pub fn derivative(&self, axis: Axis) -> Self {
        self.apply_multiplier(Multiplier::Derivative(axis))
    }

    /// Coefficients of `u†`, i.e. conjugated coefficient functions.
    pub fn dagger(&self) -> Self {
        self.map(ScalarField::conj_physical)
    }

    pub fn l2_norm(&self) -> f64 {
        self.components.iter().map(|c| c.l2_norm().powi(2)).sum::<f64>().sqrt()
    }

    pub fn sobolev_norm(&self, s: f64) -> f64 {
        self.components.iter().map(|c| c.sobolev_norm(s).powi(2)).sum::<f64>().sqrt()
    }
}

/// Splits a spatial vector field `(A₁, A₂)` into divergence-free and curl-free
/// parts. The zero mode is assigned to the curl-free part. Returned spectral.
pub fn df_cf_split(a1: &ScalarField, a2: &ScalarField) -> Result<([ScalarField; 2], [ScalarField; 2])> {
    a1.check_compatible(a2)?;
    let grid = a1.grid.clone();
    let s1 = a1.to_spectral();
    let s2 = a2.to_spectral();
    let mut cf = [ScalarField::zeros(&grid, Representation::Spectral), ScalarField::zeros(&grid, Representation::Spectral)];
    for idx in 0..grid.len() {
        let (kx, ky) = grid.lattice(idx);
        if (kx, ky) == (0, 0) {
            cf[0].data[idx] = s1.data[idx];
            cf[1].data[idx] = s2.data[idx];
            continue;
        }
        let k = [kx as f64, ky as f64];
        let k2 = k[0] * k[0] + k[1] * k[1];
        let dot = s1.data[idx] * k[0] + s2.data[idx] * k[1];
        cf[0].data[idx] = dot * (k[0] / k2);
        cf[1].data[idx] = dot * (k[1] / k2);
    }
    let df = [s1.sub(&cf[0])?, s2.sub(&cf[1])?];
    Ok((df, cf))
}

/// `∂₁A₁ + ∂₂A₂`, spectral.
pub fn divergence(a1: &ScalarField, a2: &ScalarField) -> Result<ScalarField> {
    a1.derivative(Axis::X).add(&a2.derivative(Axis::Y))
}

/// `∂₁A₂ − ∂₂A₁`, spectral.
pub fn curl(a1: &ScalarField, a2: &ScalarField) -> Result<ScalarField> {
    a2.derivative(Axis::X).sub(&a1.derivative(Axis::Y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid(m: usize) -> Grid2D {
        Grid2D::new(2.0 * PI, m).unwrap()
    }

    fn one() -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    fn max_diff(a: &ScalarField, b: &ScalarField) -> f64 {
        let b = match a.representation() {
            Representation::Physical => b.to_physical(),
            Representation::Spectral => b.to_spectral(),
        };
        a.data().iter().zip(b.data()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid2D::new(1.0, 6).is_err());
        assert!(Grid2D::new(1.0, 9).is_err());
        assert!(Grid2D::new(-1.0, 16).is_err());
    }

    #[test]
    fn single_mode_transform() {
        let g = grid(16);
        let u = ScalarField::from_fn(&g, |x, y| Complex64::from_polar(1.0, 3.0 * x - 2.0 * y));
        let s = u.to_spectral();
        let idx = g.index_of(3, -2).unwrap();
        assert!((s.data()[idx] - one()).norm() < 1e-13);
        let total: f64 = s.data().iter().map(|z| z.norm()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(max_diff(&u, &s.to_physical()) < 1e-13);
    }

    #[test]
    fn multiplier_examples() {
        let g = grid(16);
        let u = ScalarField::mode(&g, 2, 0, one()).unwrap();
        let d = u.apply_multiplier(Multiplier::DPow(1.0));
        assert!((d.data()[g.index_of(2, 0).unwrap()] - 2.0).norm() < 1e-14);
        let c = ScalarField::mode(&g, 0, 0, one()).unwrap();
        assert_eq!(c.apply_multiplier(Multiplier::DPow(-1.0)).l2_norm(), 0.0);
        let r = ScalarField::mode(&g, 3, 4, one()).unwrap().apply_multiplier(Multiplier::Riesz(Axis::X));
        assert!((r.data()[g.index_of(3, 4).unwrap()] - Complex64::new(0.0, 0.6)).norm() < 1e-14);
    }

    #[test]
    fn littlewood_paley_partition() {
        let g = grid(32);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_band_limited(&g, 15, 1.0, &mut rng);
        let mut sum = ScalarField::zeros(&g, Representation::Spectral);
        let mut mass = 0.0;
        for n in [1u64, 2, 4, 8, 16, 32] {
            let p = u.littlewood_paley(n);
            mass += p.l2_norm().powi(2);
            sum = sum.add(&p).unwrap();
        }
        assert_eq!(sum.data(), u.data());
        assert!((mass - u.l2_norm().powi(2)).abs() <= 1e-12 * mass);
        let v = ScalarField::mode(&g, 3, 0, one()).unwrap();
        assert_eq!(v.littlewood_paley(2), v);
        assert_eq!(v.littlewood_paley(4).l2_norm(), 0.0);
    }

    #[test]
    fn sobolev_examples() {
        let g = grid(32);
        let unit = 1.0 / g.area().sqrt();
        let u = ScalarField::mode(&g, 4, 0, Complex64::new(unit, 0.0)).unwrap();
        assert!((u.sobolev_norm(1.0) - 4.0).abs() < 1e-12);
        assert!((u.sobolev_norm(0.0) - u.l2_norm()).abs() < 1e-12);
        let w = u
            .scale(Complex64::new(0.0, 0.0))
            .add(&ScalarField::mode(&g, 2, 0, Complex64::new(unit, 0.0)).unwrap())
            .unwrap()
            .add(&ScalarField::mode(&g, 0, 9, Complex64::new(unit, 0.0)).unwrap())
            .unwrap();
        assert!((w.sobolev_norm(0.5) - 10f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn dealiased_product_examples() {
        let g = grid(16);
        let c = ScalarField::mode(&g, 0, 0, one()).unwrap();
        let p = dealiased_product(&c, &c, 2).unwrap();
        assert!((p.data()[0] - one()).norm() < 1e-14);

        let u = ScalarField::mode(&g, 2, 1, Complex64::new(2.0, 0.0)).unwrap();
        let v = ScalarField::mode(&g, 1, -1, Complex64::new(0.0, 3.0)).unwrap();
        let p = dealiased_product(&u, &v, 2).unwrap();
        assert!((p.data()[g.index_of(3, 0).unwrap()] - Complex64::new(0.0, 6.0)).norm() < 1e-13);

        // 5 + 5 = 10 wraps to −6 on a 16-point grid; the double-resolution
        // product lives at 10, which is outside the retained band.
        let u = ScalarField::mode(&g, 5, 0, one()).unwrap();
        let p = dealiased_product(&u, &u, 2).unwrap();
        assert!(p.l2_norm() < 1e-13);
        let fine = grid(32);
        let uf = ScalarField::mode(&fine, 5, 0, one()).unwrap().to_physical();
        let exact = uf.zip_with(&uf, |a, b| a * b).unwrap().truncated(dealias_cutoff(16, 2));
        assert!(exact.l2_norm() < 1e-13);
    }

    #[test]
    fn df_cf_examples() {
        let g = grid(32);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let psi = random_band_limited(&g, 8, 1.0, &mut rng);
        let (df, _) = df_cf_split(&psi.derivative(Axis::X), &psi.derivative(Axis::Y)).unwrap();
        assert!(df[0].l2_norm() < 1e-12 && df[1].l2_norm() < 1e-12);
        let rot = [psi.derivative(Axis::Y).scale(-one()), psi.derivative(Axis::X)];
        let (_, cf) = df_cf_split(&rot[0], &rot[1]).unwrap();
        assert!(cf[0].l2_norm() < 1e-12 && cf[1].l2_norm() < 1e-12);

        let a1 = random_band_limited(&g, 8, 1.0, &mut rng);
        let a2 = random_band_limited(&g, 8, 1.0, &mut rng);
        let (df, cf) = df_cf_split(&a1, &a2).unwrap();
        assert!(max_diff(&df[0].add(&cf[0]).unwrap(), &a1) < 1e-12);
        assert!(divergence(&df[0], &df[1]).unwrap().l2_norm() < 1e-12);
        assert!(curl(&cf[0], &cf[1]).unwrap().l2_norm() < 1e-12);
    }

    #[test]
    fn dyadic_shells() {
        assert_eq!(dyadic_shell(0.0), 1);
        assert_eq!(dyadic_shell(1.99), 1);
        assert_eq!(dyadic_shell(2.0), 2);
        assert_eq!(dyadic_shell(3.0), 2);
        assert_eq!(dyadic_shell(63.9), 32);
    }

    #[test]
    fn d_power_inverts_on_zero_mean() {
        let g = grid(32);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = random_band_limited(&g, 10, 1.0, &mut rng);
        let back = u.apply_multiplier(Multiplier::DPow(1.5)).apply_multiplier(Multiplier::DPow(-1.5));
        assert!(max_diff(&back, &u) < 1e-12);
    }
}
