//! su(n) generators, structure constants and the sixth-order Higgs potential.
//!
//! Generators are Hermitian, traceless and normalized by `Tr(T^a T^b) = 2 δ^{ab}`,
//! so that for n = 2 they are exactly the Pauli matrices. Lie-algebra valued
//! quantities are stored as complex coefficient vectors over this basis.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{CshError, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Dense square complex matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![ZERO; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn mul(&self, other: &CMatrix) -> CMatrix {
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn commutator(&self, other: &CMatrix) -> CMatrix {
        self.mul(other).sub(&other.mul(self))
    }

    pub fn add(&self, other: &CMatrix) -> CMatrix {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &CMatrix) -> CMatrix {
        self.zip(other, |a, b| a - b)
    }

    pub fn scale(&self, s: Complex64) -> CMatrix {
        CMatrix { n: self.n, data: self.data.iter().map(|&a| a * s).collect() }
    }

    pub fn adjoint(&self) -> CMatrix {
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = self[(j, i)].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    fn zip(&self, other: &CMatrix, f: impl Fn(Complex64, Complex64) -> Complex64) -> CMatrix {
        CMatrix {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.n + j]
    }
}

/// One nonzero structure constant `f^{ab}_c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StructureEntry {
    pub a: usize,
    pub b: usize,
    pub c: usize,
    pub value: f64,
}

/// Nonzero entry of the double contraction `g^{abc}_e = f^{ab}_d f^{dc}_e`.
#[derive(Debug, Clone, Copy)]
struct QuarticEntry {
    a: usize,
    b: usize,
    c: usize,
    e: usize,
    value: f64,
}

/// Basis of su(n) together with its cached structure constants.
#[derive(Debug, Clone)]
pub struct GeneratorSet {
    n: usize,
    generators: Vec<CMatrix>,
    structure: Vec<f64>,
    sparse: Vec<StructureEntry>,
    quartic: Vec<QuarticEntry>,
}

/// Generalized Gell-Mann basis. For each column k the symmetric and
/// antisymmetric off-diagonal pairs (j, k), j < k, come first, followed by the
/// diagonal generator that involves the first k entries.
pub fn build_su_n_basis(n: usize) -> Result<GeneratorSet> {
    if n < 2 {
        return Err(CshError::InvalidDimension(n));
    }
    let one = Complex64::new(1.0, 0.0);
    let mut generators = Vec::with_capacity(n * n - 1);
    for k in 1..n {
        for j in 0..k {
            let mut sym = CMatrix::zeros(n);
            sym[(j, k)] = one;
            sym[(k, j)] = one;
            generators.push(sym);
            let mut anti = CMatrix::zeros(n);
            anti[(j, k)] = -I;
            anti[(k, j)] = I;
            generators.push(anti);
        }
        let l = k as f64;
        let norm = (2.0 / (l * (l + 1.0))).sqrt();
        let mut diag = CMatrix::zeros(n);
        for j in 0..k {
            diag[(j, j)] = Complex64::new(norm, 0.0);
        }
        diag[(k, k)] = Complex64::new(-l * norm, 0.0);
        generators.push(diag);
    }
    Ok(GeneratorSet::from_generators(n, generators))
}

impl GeneratorSet {
    fn from_generators(n: usize, generators: Vec<CMatrix>) -> Self {
        let dim = generators.len();
        let mut structure = vec![0.0; dim * dim * dim];
        let mut sparse = Vec::new();
        for a in 0..dim {
            for b in 0..dim {
                let comm = generators[a].commutator(&generators[b]);
                for c in 0..dim {
                    let value = (comm.mul(&generators[c]).trace() / (2.0 * I)).re;
                    if value.abs() > 1e-14 {
                        structure[(a * dim + b) * dim + c] = value;
                        sparse.push(StructureEntry { a, b, c, value });
                    }
                }
            }
        }
        let mut quartic = Vec::new();
        for a in 0..dim {
            for b in 0..dim {
                for c in 0..dim {
                    for e in 0..dim {
                        let value: f64 = (0..dim)
                            .map(|d| {
                                structure[(a * dim + b) * dim + d]
                                    * structure[(d * dim + c) * dim + e]
                            })
                            .sum();
                        if value.abs() > 1e-14 {
                            quartic.push(QuarticEntry { a, b, c, e, value });
                        }
                    }
                }
            }
        }
        Self { n, generators, structure, sparse, quartic }
    }

    /// Matrix dimension n.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of generators, n² − 1.
    pub fn dim(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[CMatrix] {
        &self.generators
    }

    /// `f^{ab}_c` with zero-based indices.
    pub fn f(&self, a: usize, b: usize, c: usize) -> f64 {
        let d = self.dim();
        self.structure[(a * d + b) * d + c]
    }

    /// Nonzero structure constants.
    pub fn structure_entries(&self) -> &[StructureEntry] {
        &self.sparse
    }

    pub fn zero(&self) -> LieElement {
        LieElement { coeffs: vec![ZERO; self.dim()] }
    }

    /// Unit coefficient vector along generator `a` (zero-based).
    pub fn unit(&self, a: usize) -> LieElement {
        let mut e = self.zero();
        e.coeffs[a] = Complex64::new(1.0, 0.0);
        e
    }

    pub fn check(&self, x: &LieElement) -> Result<()> {
        if x.coeffs.len() != self.dim() {
            return Err(CshError::DimensionMismatch { expected: self.dim(), found: x.coeffs.len() });
        }
        Ok(())
    }

    /// `Σ_a X_a T^a`.
    pub fn to_matrix(&self, x: &LieElement) -> CMatrix {
        let mut m = CMatrix::zeros(self.n);
        for (coeff, t) in x.coeffs.iter().zip(&self.generators) {
            if *coeff != ZERO {
                m = m.add(&t.scale(*coeff));
            }
        }
        m
    }

    /// Projects a matrix onto the generators via `X_a = Tr(M T^a) / 2`.
    /// The identity component of `M` is discarded.
    pub fn from_matrix(&self, m: &CMatrix) -> LieElement {
        LieElement { coeffs: self.generators.iter().map(|t| m.mul(t).trace() * 0.5).collect() }
    }

    /// Coefficient-space commutator on raw slices: `out_c += i f^{ab}_c x_a y_b`.
    pub fn commutator_accumulate(&self, x: &[Complex64], y: &[Complex64], out: &mut [Complex64]) {
        for e in &self.sparse {
            out[e.c] += I * e.value * x[e.a] * y[e.b];
        }
    }

    /// Residual report for the algebraic invariants of the basis.
    pub fn invariant_report(&self) -> InvariantReport {
        let dim = self.dim();
        let mut hermitian: f64 = 0.0;
        let mut traceless: f64 = 0.0;
        let mut normalization: f64 = 0.0;
        let mut commutator: f64 = 0.0;
        let mut antisymmetry: f64 = 0.0;
        for (a, ta) in self.generators.iter().enumerate() {
            hermitian = hermitian.max(ta.sub(&ta.adjoint()).max_abs());
            traceless = traceless.max(ta.trace().norm());
            for (b, tb) in self.generators.iter().enumerate() {
                let expected = if a == b { 2.0 } else { 0.0 };
                normalization = normalization.max((ta.mul(tb).trace() - expected).norm());
                let mut rebuilt = CMatrix::zeros(self.n);
                for c in 0..dim {
                    rebuilt = rebuilt.add(&self.generators[c].scale(I * self.f(a, b, c)));
                }
                commutator = commutator.max(ta.commutator(tb).sub(&rebuilt).max_abs());
                for c in 0..dim {
                    antisymmetry = antisymmetry.max((self.f(a, b, c) + self.f(b, a, c)).abs());
                }
            }
        }
        InvariantReport {
            n: self.n,
            hermitian,
            traceless,
            normalization,
            commutator,
            antisymmetry,
            jacobi: self.jacobi_residual(),
        }
    }

    /// Max over (a,b,c,e) of `f^{ab}_d f^{dc}_e + f^{bc}_d f^{da}_e + f^{ca}_d f^{db}_e`.
    pub fn jacobi_residual(&self) -> f64 {
        let dim = self.dim();
        let mut worst: f64 = 0.0;
        for a in 0..dim {
            for b in 0..dim {
                for c in 0..dim {
                    for e in 0..dim {
                        let s: f64 = (0..dim)
                            .map(|d| {
                                self.f(a, b, d) * self.f(d, c, e)
                                    + self.f(b, c, d) * self.f(d, a, e)
                                    + self.f(c, a, d) * self.f(d, b, e)
                            })
                            .sum();
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }
}

/// Residuals of the basis invariants (all should be at round-off).
#[derive(Debug, Clone, Serialize)]
pub struct InvariantReport {
    pub n: usize,
    pub hermitian: f64,
    pub traceless: f64,
    pub normalization: f64,
    pub commutator: f64,
    pub antisymmetry: f64,
    pub jacobi: f64,
}

impl InvariantReport {
    pub fn max_residual(&self) -> f64 {
        [
            self.hermitian,
            self.traceless,
            self.normalization,
            self.commutator,
            self.antisymmetry,
            self.jacobi,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Coefficients `φ_a` of `φ = φ_a T^a`.
#[derive(Debug, Clone, PartialEq)]
pub struct LieElement {
    pub coeffs: Vec<Complex64>,
}

impl LieElement {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        Self { coeffs }
    }

    /// Coefficients of `φ†`, which are the conjugates because the basis is Hermitian.
    pub fn dagger(&self) -> LieElement {
        LieElement { coeffs: self.coeffs.iter().map(|z| z.conj()).collect() }
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// `[X, Y]` in coefficient space.
pub fn commutator(x: &LieElement, y: &LieElement, g: &GeneratorSet) -> Result<LieElement> {
    g.check(x)?;
    g.check(y)?;
    let mut out = g.zero();
    g.commutator_accumulate(&x.coeffs, &y.coeffs, &mut out.coeffs);
    Ok(out)
}

/// Physical parameters of the Higgs sector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct PhysicsParams {
    pub v: f64,
    pub kappa: f64,
}

impl PhysicsParams {
    pub fn new(v: f64) -> Result<Self> {
        if !(v > 0.0 && v.is_finite()) {
            return Err(CshError::InvalidParameter(format!("symmetry-breaking scale v = {v} must be positive")));
        }
        Ok(Self { v, kappa: 1.0 })
    }

    /// Higgs mass `m = √2 v²`.
    pub fn mass(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.v * self.v
    }
}

impl Default for PhysicsParams {
    fn default() -> Self {
        Self { v: 1.0, kappa: 1.0 }
    }
}

impl GeneratorSet {
    /// `X_e = g^{abc}_e φ_a φ_b^* φ_c + v² φ_e`, so that
    /// `[[φ,φ†],φ] − v²φ = −X_e T^e`.
    fn higgs_inner(&self, phi: &[Complex64], v2: f64) -> Vec<Complex64> {
        let mut x: Vec<Complex64> = phi.iter().map(|&p| p * v2).collect();
        for q in &self.quartic {
            x[q.e] += q.value * phi[q.a] * phi[q.b].conj() * phi[q.c];
        }
        x
    }

    /// Pointwise Higgs potential on raw coefficients.
    pub fn higgs_potential_raw(&self, phi: &[Complex64], p: &PhysicsParams) -> f64 {
        let x = self.higgs_inner(phi, p.v * p.v);
        2.0 * x.iter().map(|z| z.norm_sqr()).sum::<f64>() / (p.kappa * p.kappa)
    }

    /// Pointwise Wirtinger gradient `∂V/∂φ_k^*`, written into `out`.
    pub fn higgs_gradient_raw(&self, phi: &[Complex64], p: &PhysicsParams, out: &mut [Complex64]) {
        let v2 = p.v * p.v;
        let x = self.higgs_inner(phi, v2);
        let scale = 2.0 / (p.kappa * p.kappa);
        for (o, xe) in out.iter_mut().zip(&x) {
            *o = scale * v2 * xe;
        }
        for q in &self.quartic {
            let xe = x[q.e];
            let w = scale * q.value;
            out[q.a] += w * phi[q.b] * phi[q.c].conj() * xe;
            out[q.c] += w * phi[q.a].conj() * phi[q.b] * xe;
            out[q.b] += w * xe.conj() * phi[q.a] * phi[q.c];
        }
    }
}

/// `V(φ, φ†) = 2 Σ_e |f^{ab}_d f^{dc}_e φ_a φ_b^* φ_c + v² φ_e|²`.
pub fn higgs_potential(phi: &LieElement, g: &GeneratorSet, p: &PhysicsParams) -> Result<f64> {
    g.check(phi)?;
    Ok(g.higgs_potential_raw(&phi.coeffs, p))
}

/// The same potential as `Tr(Y† Y)` with `Y = [[φ,φ†],φ] − v² φ`, evaluated with matrices.
pub fn higgs_potential_matrix(phi: &LieElement, g: &GeneratorSet, p: &PhysicsParams) -> Result<f64> {
    g.check(phi)?;
    let m = g.to_matrix(phi);
    let y = m
        .commutator(&m.adjoint())
        .commutator(&m)
        .sub(&m.scale(Complex64::new(p.v * p.v, 0.0)));
    Ok(y.adjoint().mul(&y).trace().re / (p.kappa * p.kappa))
}

/// `𝒱 = ∂V/∂φ^*`: linear, cubic and quintic pieces together.
pub fn higgs_gradient(phi: &LieElement, g: &GeneratorSet, p: &PhysicsParams) -> Result<LieElement> {
    g.check(phi)?;
    let mut out = g.zero();
    g.higgs_gradient_raw(&phi.coeffs, p, &mut out.coeffs);
    Ok(out)
}

/// Residuals of `[T^a, Σ_b T^b T^b]` (the quadratic Casimir) and of the
/// individual pair commutators `[T^a, T^b T^b]`.
#[derive(Debug, Clone, Serialize)]
pub struct CasimirReport {
    /// Max entry of `[T^a, Σ_b T^b T^b]` over a.
    pub casimir_residual: f64,
    /// Max entry of `[T^a, T^b T^b]` over all pairs (a, b), no summation.
    pub max_pair_residual: f64,
    /// Pairs whose individual commutator is not zero.
    pub noncommuting_pairs: usize,
    /// Scalar value of the Casimir, `Σ_b T^b T^b = c·1`.
    pub casimir_value: f64,
}

pub fn check_casimir_commutation(g: &GeneratorSet) -> CasimirReport {
    let gens = g.generators();
    let mut casimir = CMatrix::zeros(g.n());
    for t in gens {
        casimir = casimir.add(&t.mul(t));
    }
    let casimir_residual = gens.iter().map(|t| t.commutator(&casimir).max_abs()).fold(0.0, f64::max);
    let mut max_pair_residual: f64 = 0.0;
    let mut noncommuting_pairs = 0;
    for ta in gens {
        for tb in gens {
            let r = ta.commutator(&tb.mul(tb)).max_abs();
            if r > 1e-12 {
                noncommuting_pairs += 1;
            }
            max_pair_residual = max_pair_residual.max(r);
        }
    }
    CasimirReport {
        casimir_residual,
        max_pair_residual,
        noncommuting_pairs,
        casimir_value: casimir[(0, 0)].re,
    }
}
