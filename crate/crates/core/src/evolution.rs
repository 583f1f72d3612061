//! Chern-Simons-Higgs dynamics in Lorenz gauge: right-hand sides, constraint
//! and gauge residuals, the half-wave split and time integration.
//!
//! Potentials take values in su(n): on the Hermitian generators their
//! coefficients are purely imaginary. The matter field has arbitrary complex
//! coefficients.
//!
//! Every field solves `□u = F(u)` with `□ = ∂ₜ² − Δ`. Away from the zero
//! frequency the state is carried as half-waves `u_± = ½(u ± ∂ₜu/(iD))`, which
//! obey `∂ₜu_± = ±iDu_± ∓ iF/(2D)`. At the zero frequency `D` vanishes, so the
//! mean of `∂ₜu` is carried separately and obeys `∂ₜ(mean rate) = mean F`.
//!
//! Time stepping is the fourth-order Lawson (integrating factor) Runge-Kutta
//! method: the linear flow is applied exactly and the forcing is integrated in
//! the interaction picture.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CshError, Result};
use crate::lie_kernel::{GeneratorSet, PhysicsParams};
use crate::null_forms::{
    axpy_arrays, bracket_accumulate, bracket_arrays, conj_arrays, physical_arrays, spectral_from_arrays, zero_arrays,
    PointArrays,
};
use crate::spectral_grid::{
    dealias_cutoff, random_band_limited, Axis, Grid2D, LieFieldGrid, Representation, ScalarField,
};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Minkowski metric diagonal for signature (+,−,−).
fn eta(mu: usize) -> f64 {
    if mu == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Levi-Civita symbol with `ε_{012} = 1`.
pub fn eps3(mu: usize, nu: usize, alpha: usize) -> f64 {
    match (mu, nu, alpha) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// Sign in front of the Higgs gradient in the matter equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum HiggsSign {
    /// `□φ = … − 𝒱`.
    #[default]
    Minus,
    /// `□φ = … + 𝒱`.
    Plus,
}

impl HiggsSign {
    fn factor(self) -> f64 {
        match self {
            HiggsSign::Minus => -1.0,
            HiggsSign::Plus => 1.0,
        }
    }
}

/// Which spatial derivative of the matter field enters `∂ₜAⱼ(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InitialCurrent {
    /// Plain derivative `∂^k f`. Consistent with the field equations only when
    /// `[f†, [aₖ, f]] − [[aₖ, f]†, f]` vanishes, e.g. for `aⱼ(0) = 0`.
    #[default]
    Plain,
    /// Covariant derivative `𝒟^k f`, which makes `F₀ⱼ = ε₀ⱼₖJ^k` hold at t = 0.
    Covariant,
}

/// Knobs of the dynamical system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionOptions {
    pub higgs_sign: HiggsSign,
    /// When false every forcing term is dropped and only free waves remain.
    pub nonlinear: bool,
    /// Polynomial degree used for the dealiasing band of the forcing.
    pub dealias_order: usize,
    pub initial_current: InitialCurrent,
}

impl Default for EvolutionOptions {
    fn default() -> Self {
        Self {
            higgs_sign: HiggsSign::Minus,
            nonlinear: true,
            dealias_order: 5,
            initial_current: InitialCurrent::Plain,
        }
    }
}

/// Full state `(φ, ∂ₜφ, A_μ, ∂ₜA_μ)` at time t, spectral, lower-index potentials.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub phi: LieFieldGrid,
    pub dphi: LieFieldGrid,
    pub a: [LieFieldGrid; 3],
    pub da: [LieFieldGrid; 3],
    pub t: f64,
}

impl FieldState {
    pub fn zeros(grid: &Grid2D, dim: usize) -> Self {
        let z = LieFieldGrid::zeros(grid, dim, Representation::Spectral);
        Self {
            phi: z.clone(),
            dphi: z.clone(),
            a: [z.clone(), z.clone(), z.clone()],
            da: [z.clone(), z.clone(), z],
            t: 0.0,
        }
    }

    pub fn grid(&self) -> &Grid2D {
        self.phi.grid()
    }

    /// `(u, ∂ₜu)` pairs for φ, A₀, A₁, A₂.
    pub fn fields(&self) -> [(&LieFieldGrid, &LieFieldGrid); 4] {
        [
            (&self.phi, &self.dphi),
            (&self.a[0], &self.da[0]),
            (&self.a[1], &self.da[1]),
            (&self.a[2], &self.da[2]),
        ]
    }
}

/// Initial data `(φ, ∂ₜφ)(0) = (f, g)` and `A_μ(0) = a_μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub f: LieFieldGrid,
    pub g: LieFieldGrid,
    pub a: [LieFieldGrid; 3],
}

impl InitialData {
    pub fn zeros(grid: &Grid2D, dim: usize) -> Self {
        let z = LieFieldGrid::zeros(grid, dim, Representation::Spectral);
        Self { f: z.clone(), g: z.clone(), a: [z.clone(), z.clone(), z] }
    }

    /// Combined H^s norm of all data fields.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        std::iter::once(&self.f)
            .chain(std::iter::once(&self.g))
            .chain(self.a.iter())
            .map(|u| u.sobolev_norm(s).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Half-wave form of a [`FieldState`]; `mean_rates[f][a]` holds the zero-mode of
/// `∂ₜ` for field f (φ, A₀, A₁, A₂) and component a.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfWaveState {
    pub phi_plus: LieFieldGrid,
    pub phi_minus: LieFieldGrid,
    pub a_plus: [LieFieldGrid; 3],
    pub a_minus: [LieFieldGrid; 3],
    pub mean_rates: [Vec<Complex64>; 4],
    pub t: f64,
}

/// Forcing terms `F` of `□u = F` for the matter field and the three potentials.
#[derive(Debug, Clone)]
pub struct Forcing {
    pub phi: LieFieldGrid,
    pub a: [LieFieldGrid; 3],
}

/// Flat working vector used by the integrators: for each field and component a
/// plus and a minus array, followed by the zero-mode rates.
#[derive(Debug, Clone)]
struct Flat {
    waves: Vec<Vec<Complex64>>,
    rates: Vec<Complex64>,
}

impl Flat {
    fn zeros_like(other: &Flat) -> Flat {
        Flat {
            waves: other.waves.iter().map(|w| vec![ZERO; w.len()]).collect(),
            rates: vec![ZERO; other.rates.len()],
        }
    }

    fn axpy(&mut self, s: f64, x: &Flat) {
        for (a, b) in self.waves.iter_mut().zip(&x.waves) {
            for (p, q) in a.iter_mut().zip(b) {
                *p += s * q;
            }
        }
        for (p, q) in self.rates.iter_mut().zip(&x.rates) {
            *p += s * q;
        }
    }

    fn is_finite(&self) -> bool {
        self.waves.iter().flatten().chain(&self.rates).all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// The Chern-Simons-Higgs system on a fixed grid.
#[derive(Debug, Clone)]
pub struct CshSystem {
    grid: Grid2D,
    gens: GeneratorSet,
    params: PhysicsParams,
    options: EvolutionOptions,
    abs_xi: Vec<f64>,
}

impl CshSystem {
    pub fn new(grid: &Grid2D, gens: &GeneratorSet, params: PhysicsParams, options: EvolutionOptions) -> Self {
        let abs_xi = (0..grid.len()).map(|i| grid.abs_xi(i)).collect();
        Self { grid: grid.clone(), gens: gens.clone(), params, options, abs_xi }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn generators(&self) -> &GeneratorSet {
        &self.gens
    }

    pub fn options(&self) -> &EvolutionOptions {
        &self.options
    }

    fn cutoff(&self) -> usize {
        dealias_cutoff(self.grid.m(), self.options.dealias_order)
    }

    fn partial(u: &LieFieldGrid, du: &LieFieldGrid, alpha: usize) -> LieFieldGrid {
        match alpha {
            0 => du.to_spectral(),
            j => u.derivative(Axis::from_index(j - 1)),
        }
    }

    /// Evaluates the forcing of every field equation.
    pub fn forcing(&self, s: &FieldState) -> Result<Forcing> {
        let dim = self.gens.dim();
        if !self.options.nonlinear {
            let z = LieFieldGrid::zeros(&self.grid, dim, Representation::Spectral);
            return Ok(Forcing { phi: z.clone(), a: [z.clone(), z.clone(), z] });
        }
        let g = &self.gens;
        let k = self.cutoff();
        let len = self.grid.len();
        let phi = physical_arrays(&s.phi, k);
        let dphi: Vec<PointArrays> = (0..3).map(|al| physical_arrays(&Self::partial(&s.phi, &s.dphi, al), k)).collect();
        let a: Vec<PointArrays> = s.a.iter().map(|x| physical_arrays(x, k)).collect();
        let da: Vec<Vec<PointArrays>> = (0..3)
            .map(|mu| (0..3).map(|al| physical_arrays(&Self::partial(&s.a[mu], &s.da[mu], al), k)).collect())
            .collect();
        let phi_dag = conj_arrays(&phi);
        let dphi_dag: Vec<PointArrays> = dphi.iter().map(conj_arrays).collect();

        // Matter equation.
        let mut f_phi = zero_arrays(dim, len);
        for mu in 0..3 {
            let e = eta(mu);
            bracket_accumulate(g, &a[mu], &dphi[mu], Complex64::new(-2.0 * e, 0.0), &mut f_phi);
            let inner = bracket_arrays(g, &a[mu], &phi);
            bracket_accumulate(g, &a[mu], &inner, Complex64::new(-e, 0.0), &mut f_phi);
        }
        let sign = self.options.higgs_sign.factor();
        let mut point = vec![ZERO; dim];
        let mut grad = vec![ZERO; dim];
        for x in 0..len {
            for (c, comp) in point.iter_mut().zip(&phi) {
                *c = comp[x];
            }
            g.higgs_gradient_raw(&point, &self.params, &mut grad);
            for (out, gv) in f_phi.iter_mut().zip(&grad) {
                out[x] += sign * gv;
            }
        }
        let f_phi = spectral_from_arrays(&self.grid, f_phi, k);

        // Cubic currents C^α = η_α([φ†, [A_α, φ]] − [[A_α, φ]†, φ]) and their time derivatives.
        let mut currents = Vec::with_capacity(3);
        let mut current_rates = Vec::with_capacity(3);
        for al in 0..3 {
            let e = Complex64::new(eta(al), 0.0);
            let b = bracket_arrays(g, &a[al], &phi);
            let mut bt = bracket_arrays(g, &da[al][0], &phi);
            bracket_accumulate(g, &a[al], &dphi[0], ONE, &mut bt);
            let (b_dag, bt_dag) = (conj_arrays(&b), conj_arrays(&bt));
            let mut c = zero_arrays(dim, len);
            bracket_accumulate(g, &phi_dag, &b, e, &mut c);
            bracket_accumulate(g, &b_dag, &phi, -e, &mut c);
            let mut ct = zero_arrays(dim, len);
            bracket_accumulate(g, &dphi_dag[0], &b, e, &mut ct);
            bracket_accumulate(g, &phi_dag, &bt, e, &mut ct);
            bracket_accumulate(g, &bt_dag, &phi, -e, &mut ct);
            bracket_accumulate(g, &b_dag, &dphi[0], -e, &mut ct);
            currents.push(spectral_from_arrays(&self.grid, c, k));
            current_rates.push(ct);
        }

        let mut f_a = Vec::with_capacity(3);
        for mu in 0..3 {
            let mut out = zero_arrays(dim, len);
            for nu in 0..3 {
                bracket_accumulate(g, &da[mu][nu], &a[nu], Complex64::new(eta(nu), 0.0), &mut out);
            }
            for nu in 0..3 {
                for al in 0..3 {
                    let e = eps3(mu, nu, al);
                    if e == 0.0 {
                        continue;
                    }
                    let w = Complex64::new(-e * eta(nu) * eta(al), 0.0);
                    bracket_accumulate(g, &dphi_dag[nu], &dphi[al], w, &mut out);
                    bracket_accumulate(g, &dphi[nu], &dphi_dag[al], w, &mut out);
                    if nu == 0 {
                        axpy_arrays(&mut out, Complex64::new(-e, 0.0), &current_rates[al]);
                    }
                }
            }
            let mut spectral = spectral_from_arrays(&self.grid, out, k);
            for nu in 1..3 {
                for al in 0..3 {
                    let e = eps3(mu, nu, al);
                    if e == 0.0 {
                        continue;
                    }
                    let d = currents[al].derivative(Axis::from_index(nu - 1));
                    spectral = spectral.add(&d.scale(Complex64::new(-e * eta(nu), 0.0)))?;
                }
            }
            f_a.push(spectral);
        }
        let mut it = f_a.into_iter();
        Ok(Forcing { phi: f_phi, a: std::array::from_fn(|_| it.next().expect("three potentials")) })
    }

    /// `□φ` right-hand side.
    pub fn rhs_phi(&self, s: &FieldState) -> Result<LieFieldGrid> {
        Ok(self.forcing(s)?.phi)
    }

    /// `□A_μ` right-hand side.
    pub fn rhs_a(&self, s: &FieldState, mu: usize) -> Result<LieFieldGrid> {
        if mu > 2 {
            return Err(CshError::InvalidParameter(format!("potential index {mu} not in 0..=2")));
        }
        Ok(self.forcing(s)?.a[mu].clone())
    }

    /// `∂ₜA₀(0) = ∂ⱼaⱼ` and
    /// `∂ₜAⱼ(0) = ∂ⱼa₀ − [a₀, aⱼ] + ε_{0jk}([f†, ∂^k f] − [(∂^k f)†, f])`,
    /// with `∂^k f` replaced by `𝒟^k f` under [`InitialCurrent::Covariant`].
    pub fn initial_time_derivatives(&self, data: &InitialData) -> Result<[LieFieldGrid; 3]> {
        let g = &self.gens;
        let k = self.cutoff();
        let len = self.grid.len();
        let dt_a0 = data.a[1].derivative(Axis::X).add(&data.a[2].derivative(Axis::Y))?;
        let f = physical_arrays(&data.f, k);
        let f_dag = conj_arrays(&f);
        let a0 = physical_arrays(&data.a[0], k);
        let mut rates = Vec::with_capacity(2);
        for j in 1..3 {
            let aj = physical_arrays(&data.a[j], k);
            let mut out = zero_arrays(g.dim(), len);
            bracket_accumulate(g, &a0, &aj, -ONE, &mut out);
            for kk in 1..3 {
                let e = eps3(0, j, kk);
                if e == 0.0 {
                    continue;
                }
                // ∂^k = −∂_k on spatial indices.
                let mut dkf = physical_arrays(&data.f.derivative(Axis::from_index(kk - 1)), k);
                if self.options.initial_current == InitialCurrent::Covariant {
                    let ak = physical_arrays(&data.a[kk], k);
                    bracket_accumulate(g, &ak, &f, ONE, &mut dkf);
                }
                let w = Complex64::new(-e, 0.0);
                bracket_accumulate(g, &f_dag, &dkf, w, &mut out);
                bracket_accumulate(g, &conj_arrays(&dkf), &f, -w, &mut out);
            }
            let nonlinear = spectral_from_arrays(&self.grid, out, k);
            rates.push(data.a[0].derivative(Axis::from_index(j - 1)).add(&nonlinear)?);
        }
        let mut it = rates.into_iter();
        Ok([dt_a0, it.next().expect("j = 1"), it.next().expect("j = 2")])
    }

    /// Assembles the full state at t = 0.
    pub fn initial_state(&self, data: &InitialData) -> Result<FieldState> {
        Ok(FieldState {
            phi: data.f.to_spectral(),
            dphi: data.g.to_spectral(),
            a: [data.a[0].to_spectral(), data.a[1].to_spectral(), data.a[2].to_spectral()],
            da: self.initial_time_derivatives(data)?,
            t: 0.0,
        })
    }

    /// `∂₁a₂ − ∂₂a₁ + [a₁, a₂] − [f†, h] + [h†, f]` with `h = g + [a₀, f]`, spectral.
    fn constraint_field(&self, data: &InitialData) -> Result<LieFieldGrid> {
        let gens = &self.gens;
        let k = dealias_cutoff(self.grid.m(), 3);
        let f = physical_arrays(&data.f, k);
        let a0 = physical_arrays(&data.a[0], k);
        let a1 = physical_arrays(&data.a[1], k);
        let a2 = physical_arrays(&data.a[2], k);
        let mut h = physical_arrays(&data.g, k);
        bracket_accumulate(gens, &a0, &f, ONE, &mut h);
        let mut out = zero_arrays(gens.dim(), self.grid.len());
        bracket_accumulate(gens, &a1, &a2, ONE, &mut out);
        bracket_accumulate(gens, &conj_arrays(&f), &h, -ONE, &mut out);
        bracket_accumulate(gens, &conj_arrays(&h), &f, ONE, &mut out);
        let nonlinear = spectral_from_arrays(&self.grid, out, k);
        data.a[2]
            .derivative(Axis::X)
            .sub(&data.a[1].derivative(Axis::Y))?
            .add(&nonlinear)
    }

    /// L² norm of the initial-data constraint.
    pub fn constraint_residual(&self, data: &InitialData) -> Result<f64> {
        Ok(self.constraint_field(data)?.l2_norm())
    }

    /// Splits every field into half-waves; zero modes of the rates are kept aside.
    pub fn split_to_halfwaves(&self, s: &FieldState) -> HalfWaveState {
        let split = |u: &LieFieldGrid, du: &LieFieldGrid| -> (LieFieldGrid, LieFieldGrid, Vec<Complex64>) {
            let mut plus = Vec::new();
            let mut minus = Vec::new();
            let mut rates = Vec::new();
            for (uc, dc) in u.components().iter().zip(du.components()) {
                let (us, ds) = (uc.to_spectral(), dc.to_spectral());
                let mut p = vec![ZERO; self.grid.len()];
                let mut m = vec![ZERO; self.grid.len()];
                for idx in 0..self.grid.len() {
                    let r = self.abs_xi[idx];
                    let v = us.data()[idx];
                    let w = if r == 0.0 { ZERO } else { ds.data()[idx] / (I * r) };
                    p[idx] = 0.5 * (v + w);
                    m[idx] = 0.5 * (v - w);
                }
                rates.push(ds.data()[0]);
                plus.push(ScalarField::from_data(&self.grid, Representation::Spectral, p).expect("grid sized"));
                minus.push(ScalarField::from_data(&self.grid, Representation::Spectral, m).expect("grid sized"));
            }
            (LieFieldGrid::new(plus).expect("dim >= 1"), LieFieldGrid::new(minus).expect("dim >= 1"), rates)
        };
        let (pp, pm, r0) = split(&s.phi, &s.dphi);
        let (a0p, a0m, r1) = split(&s.a[0], &s.da[0]);
        let (a1p, a1m, r2) = split(&s.a[1], &s.da[1]);
        let (a2p, a2m, r3) = split(&s.a[2], &s.da[2]);
        HalfWaveState {
            phi_plus: pp,
            phi_minus: pm,
            a_plus: [a0p, a1p, a2p],
            a_minus: [a0m, a1m, a2m],
            mean_rates: [r0, r1, r2, r3],
            t: s.t,
        }
    }

    /// Inverse of [`split_to_halfwaves`](Self::split_to_halfwaves).
    pub fn merge_halfwaves(&self, h: &HalfWaveState) -> FieldState {
        let merge = |p: &LieFieldGrid, m: &LieFieldGrid, rates: &[Complex64]| -> (LieFieldGrid, LieFieldGrid) {
            let mut us = Vec::new();
            let mut ds = Vec::new();
            for ((pc, mc), rate) in p.components().iter().zip(m.components()).zip(rates) {
                let (pc, mc) = (pc.to_spectral(), mc.to_spectral());
                let mut u = vec![ZERO; self.grid.len()];
                let mut d = vec![ZERO; self.grid.len()];
                for idx in 0..self.grid.len() {
                    u[idx] = pc.data()[idx] + mc.data()[idx];
                    d[idx] = I * self.abs_xi[idx] * (pc.data()[idx] - mc.data()[idx]);
                }
                d[0] = *rate;
                us.push(ScalarField::from_data(&self.grid, Representation::Spectral, u).expect("grid sized"));
                ds.push(ScalarField::from_data(&self.grid, Representation::Spectral, d).expect("grid sized"));
            }
            (LieFieldGrid::new(us).expect("dim >= 1"), LieFieldGrid::new(ds).expect("dim >= 1"))
        };
        let (phi, dphi) = merge(&h.phi_plus, &h.phi_minus, &h.mean_rates[0]);
        let (a0, da0) = merge(&h.a_plus[0], &h.a_minus[0], &h.mean_rates[1]);
        let (a1, da1) = merge(&h.a_plus[1], &h.a_minus[1], &h.mean_rates[2]);
        let (a2, da2) = merge(&h.a_plus[2], &h.a_minus[2], &h.mean_rates[3]);
        FieldState { phi, dphi, a: [a0, a1, a2], da: [da0, da1, da2], t: h.t }
    }

    fn to_flat(&self, h: &HalfWaveState) -> Flat {
        let pairs = [
            (&h.phi_plus, &h.phi_minus),
            (&h.a_plus[0], &h.a_minus[0]),
            (&h.a_plus[1], &h.a_minus[1]),
            (&h.a_plus[2], &h.a_minus[2]),
        ];
        let mut waves = Vec::new();
        for (p, m) in pairs {
            for (pc, mc) in p.components().iter().zip(m.components()) {
                waves.push(pc.to_spectral().into_data());
                waves.push(mc.to_spectral().into_data());
            }
        }
        Flat { waves, rates: h.mean_rates.iter().flatten().copied().collect() }
    }

    fn from_flat(&self, flat: Flat, t: f64) -> HalfWaveState {
        let dim = self.gens.dim();
        let mut waves = flat.waves.into_iter();
        let mut field = || {
            let mut p = Vec::with_capacity(dim);
            let mut m = Vec::with_capacity(dim);
            for _ in 0..dim {
                let wp = waves.next().expect("flat layout");
                let wm = waves.next().expect("flat layout");
                p.push(ScalarField::from_data(&self.grid, Representation::Spectral, wp).expect("grid sized"));
                m.push(ScalarField::from_data(&self.grid, Representation::Spectral, wm).expect("grid sized"));
            }
            (LieFieldGrid::new(p).expect("dim >= 1"), LieFieldGrid::new(m).expect("dim >= 1"))
        };
        let (pp, pm) = field();
        let (a0p, a0m) = field();
        let (a1p, a1m) = field();
        let (a2p, a2m) = field();
        let mut chunks = flat.rates.chunks(dim).map(<[Complex64]>::to_vec);
        HalfWaveState {
            phi_plus: pp,
            phi_minus: pm,
            a_plus: [a0p, a1p, a2p],
            a_minus: [a0m, a1m, a2m],
            mean_rates: std::array::from_fn(|_| chunks.next().expect("four fields")),
            t,
        }
    }

    /// Exact linear flow over a time `h` (negative `h` runs backwards).
    fn propagate(&self, flat: &mut Flat, h: f64) {
        let phases: Vec<Complex64> = self.abs_xi.iter().map(|&r| Complex64::from_polar(1.0, h * r)).collect();
        for (w, wave) in flat.waves.iter_mut().enumerate() {
            let plus = w % 2 == 0;
            for (z, ph) in wave.iter_mut().zip(&phases) {
                *z *= if plus { *ph } else { ph.conj() };
            }
            // Zero mode: the mean drifts with its rate, shared evenly between the halves.
            let rate = flat.rates[w / 2];
            wave[0] += 0.5 * h * rate;
        }
    }

    /// Interaction-picture forcing: `∓iF/(2D)` on the half-waves, `F` on the mean rates.
    fn nonlinear_flat(&self, flat: &Flat, t: f64) -> Result<Flat> {
        let state = self.merge_halfwaves(&self.from_flat(flat.clone(), t));
        let f = self.forcing(&state)?;
        let mut out = Flat::zeros_like(flat);
        let forcings = [&f.phi, &f.a[0], &f.a[1], &f.a[2]];
        let dim = self.gens.dim();
        for (fi, forcing) in forcings.iter().enumerate() {
            for (a, comp) in forcing.components().iter().enumerate() {
                let comp = comp.to_spectral();
                let slot = fi * dim + a;
                for idx in 1..self.grid.len() {
                    let r = self.abs_xi[idx];
                    let v = comp.data()[idx] * I / (2.0 * r);
                    out.waves[2 * slot][idx] = -v;
                    out.waves[2 * slot + 1][idx] = v;
                }
                out.rates[slot] = comp.data()[0];
            }
        }
        Ok(out)
    }

    /// One Lawson RK4 step of size `dt`.
    pub fn step(&self, state: &HalfWaveState, dt: f64) -> Result<HalfWaveState> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(CshError::InvalidParameter(format!("time step {dt} must be positive")));
        }
        let t = state.t;
        let u = self.to_flat(state);
        let half = 0.5 * dt;

        let k1 = self.nonlinear_flat(&u, t)?;
        let mut ua = u.clone();
        ua.axpy(half, &k1);
        self.propagate(&mut ua, half);

        let k2 = self.nonlinear_flat(&ua, t + half)?;
        let mut u_half = u.clone();
        self.propagate(&mut u_half, half);
        let mut ub = u_half.clone();
        ub.axpy(half, &k2);

        let k3 = self.nonlinear_flat(&ub, t + half)?;
        let mut uc = u_half;
        uc.axpy(dt, &k3);
        self.propagate(&mut uc, half);

        let k4 = self.nonlinear_flat(&uc, t + dt)?;
        // u' = E(h/2)[E(h/2)(u + h/6·k1) + h/3·(k2 + k3)] + h/6·k4
        let mut next = u;
        next.axpy(dt / 6.0, &k1);
        self.propagate(&mut next, half);
        next.axpy(dt / 3.0, &k2);
        next.axpy(dt / 3.0, &k3);
        self.propagate(&mut next, half);
        next.axpy(dt / 6.0, &k4);
        if !next.is_finite() {
            return Err(CshError::BlowUp { t: t + dt });
        }
        Ok(self.from_flat(next, t + dt))
    }

}

/// `½ e^{∓itD}(ψ ∓ ∂ₜψ/(iD))`, the free half-wave launched by `(ψ, ∂ₜψ)`.
/// Upper sign for `sign = +1`. The zero frequency carries `½ψ`.
pub fn homogeneous_solution(psi: &LieFieldGrid, psi_t: &LieFieldGrid, t: f64, sign: i8) -> Result<LieFieldGrid> {
    let s = if sign >= 0 { 1.0 } else { -1.0 };
    let grid = psi.grid().clone();
    psi.zip_map(psi_t, |u, ut| {
        let (u, ut) = (u.to_spectral(), ut.to_spectral());
        let data = (0..grid.len())
            .map(|idx| {
                let r = grid.abs_xi(idx);
                let w = if r == 0.0 { ZERO } else { ut.data()[idx] / (I * r) };
                0.5 * Complex64::from_polar(1.0, -s * t * r) * (u.data()[idx] - s * w)
            })
            .collect();
        ScalarField::from_data(&grid, Representation::Spectral, data)
    })
}

/// Settings of the Picard iteration on a fixed time mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardOptions {
    /// Number of mesh intervals on `[0, T]` (at least 3).
    pub intervals: usize,
    pub max_iterations: usize,
    /// Data with combined H¹ norm above this bound are rejected.
    pub smallness_bound: f64,
    /// Maximal admissible constraint residual of the data.
    pub constraint_tolerance: f64,
    /// Sobolev index of the reported differences.
    pub sobolev_s: f64,
    /// Relative size below which successive iterates count as converged.
    pub convergence_tol: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            intervals: 20,
            max_iterations: 30,
            smallness_bound: 1.0,
            constraint_tolerance: 1e-10,
            sobolev_s: 1.0,
            convergence_tol: 1e-12,
        }
    }
}

/// Outcome of a Picard run.
#[derive(Debug, Clone)]
pub struct PicardReport {
    pub times: Vec<f64>,
    /// `sup_t ‖u^{k+1}(t) − u^k(t)‖_{H^s}` for k = 0, 1, ...
    pub differences: Vec<f64>,
    /// Ratios of successive differences above the round-off floor.
    pub ratios: Vec<f64>,
    pub converged: bool,
    /// Set when three consecutive ratios reached 1.
    pub contraction_failed: bool,
    /// Last iterate on the mesh.
    pub trajectory: Vec<HalfWaveState>,
}

impl PicardReport {
    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().copied().fold(0.0, f64::max)
    }
}

/// Quadrature weights (in units of the mesh step) and first node of the
/// four-point rule integrating over interval `i` of `n`.
fn interval_rule(i: usize, n: usize) -> (usize, [f64; 4]) {
    if i == 0 {
        (0, [9.0 / 24.0, 19.0 / 24.0, -5.0 / 24.0, 1.0 / 24.0])
    } else if i == n - 1 {
        (n - 3, [1.0 / 24.0, -5.0 / 24.0, 19.0 / 24.0, 9.0 / 24.0])
    } else {
        (i - 1, [-1.0 / 24.0, 13.0 / 24.0, 13.0 / 24.0, -1.0 / 24.0])
    }
}

impl CshSystem {
    /// Integrates from `state` with `steps` Lawson steps of size `dt`, keeping
    /// every `stride`-th state (the first and last are always kept).
    pub fn evolve(&self, state: &FieldState, dt: f64, steps: usize, stride: usize) -> Result<Vec<FieldState>> {
        let stride = stride.max(1);
        let mut h = self.split_to_halfwaves(state);
        let mut frames = vec![state.clone()];
        for n in 1..=steps {
            h = self.step(&h, dt)?;
            if n % stride == 0 || n == steps {
                frames.push(self.merge_halfwaves(&h));
            }
        }
        Ok(frames)
    }

    fn flat_weights(&self, s: f64) -> Vec<f64> {
        let area = self.grid.area();
        self.abs_xi
            .iter()
            .map(|&r| area * (crate::spectral_grid::dyadic_shell(r) as f64).powf(2.0 * s))
            .collect()
    }

    fn flat_norm(flat: &Flat, weights: &[f64], area: f64) -> f64 {
        let waves: f64 = flat
            .waves
            .iter()
            .map(|w| w.iter().zip(weights).map(|(z, wt)| wt * z.norm_sqr()).sum::<f64>())
            .sum();
        let rates: f64 = flat.rates.iter().map(|z| area * z.norm_sqr()).sum();
        (waves + rates).sqrt()
    }

    fn flat_distance(a: &Flat, b: &Flat, weights: &[f64], area: f64) -> f64 {
        let mut d = a.clone();
        d.axpy(-1.0, b);
        Self::flat_norm(&d, weights, area)
    }

    /// Combined H^s norm of all half-wave components of a state.
    pub fn halfwave_norm(&self, h: &HalfWaveState, s: f64) -> f64 {
        Self::flat_norm(&self.to_flat(h), &self.flat_weights(s), self.grid.area())
    }

    /// H^s distance between two half-wave states.
    pub fn halfwave_distance(&self, a: &HalfWaveState, b: &HalfWaveState, s: f64) -> f64 {
        Self::flat_distance(&self.to_flat(a), &self.to_flat(b), &self.flat_weights(s), self.grid.area())
    }

    /// Picard iteration of the Duhamel formulation on a fixed mesh of `[0, T]`.
    pub fn picard_iterate(&self, data: &InitialData, t_final: f64, opts: &PicardOptions) -> Result<PicardReport> {
        if opts.intervals < 3 {
            return Err(CshError::InvalidParameter("Picard mesh needs at least 3 intervals".into()));
        }
        if !(t_final > 0.0) {
            return Err(CshError::InvalidParameter(format!("final time {t_final} must be positive")));
        }
        let norm = data.sobolev_norm(1.0);
        if norm > opts.smallness_bound {
            return Err(CshError::DataTooLarge { norm, bound: opts.smallness_bound });
        }
        let residual = self.constraint_residual(data)?;
        if residual > opts.constraint_tolerance {
            return Err(CshError::ConstraintViolation { residual, tolerance: opts.constraint_tolerance });
        }
        let n = opts.intervals;
        let h = t_final / n as f64;
        let times: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
        let u0 = self.to_flat(&self.split_to_halfwaves(&self.initial_state(data)?));
        let weights = self.flat_weights(opts.sobolev_s);
        let area = self.grid.area();

        let mut current: Vec<Flat> = times
            .iter()
            .map(|&t| {
                let mut u = u0.clone();
                self.propagate(&mut u, t);
                u
            })
            .collect();
        let mut differences = Vec::new();
        let mut ratios = Vec::new();
        let mut converged = false;
        let mut contraction_failed = false;
        let mut streak = 0;
        for _ in 0..opts.max_iterations {
            let integrand: Vec<Flat> = current
                .iter()
                .zip(&times)
                .map(|(u, &t)| {
                    let mut g = self.nonlinear_flat(u, t)?;
                    self.propagate(&mut g, -t);
                    Ok(g)
                })
                .collect::<Result<_>>()?;
            let mut next = Vec::with_capacity(n + 1);
            let mut w = u0.clone();
            for i in 0..=n {
                if i > 0 {
                    let (first, rule) = interval_rule(i - 1, n);
                    for (j, c) in rule.iter().enumerate() {
                        w.axpy(h * c, &integrand[first + j]);
                    }
                }
                let mut u = w.clone();
                self.propagate(&mut u, times[i]);
                if !u.is_finite() {
                    return Err(CshError::BlowUp { t: times[i] });
                }
                next.push(u);
            }
            let diff = next
                .iter()
                .zip(&current)
                .map(|(a, b)| Self::flat_distance(a, b, &weights, area))
                .fold(0.0, f64::max);
            let scale = next.iter().map(|u| Self::flat_norm(u, &weights, area)).fold(0.0, f64::max);
            current = next;
            if let Some(&prev) = differences.last() {
                let floor = 1e3 * f64::EPSILON * scale;
                if prev > floor && diff > floor {
                    let ratio = diff / prev;
                    ratios.push(ratio);
                    streak = if ratio >= 1.0 { streak + 1 } else { 0 };
                }
            }
            differences.push(diff);
            if diff <= opts.convergence_tol * scale {
                converged = true;
                break;
            }
            if streak >= 3 {
                contraction_failed = true;
                break;
            }
        }
        let trajectory = current.into_iter().zip(&times).map(|(u, &t)| self.from_flat(u, t)).collect();
        Ok(PicardReport { times, differences, ratios, converged, contraction_failed, trajectory })
    }
}

/// Residuals and norms of one trajectory frame.
#[derive(Debug, Clone, Serialize)]
pub struct MonitorRow {
    pub t: f64,
    /// `‖∂ₜA₀ − ∂ⱼAⱼ‖ / (‖∂ₜA₀‖ + ‖∂ⱼAⱼ‖)`.
    pub gauge_residual: f64,
    pub gauge_residual_abs: f64,
    /// `‖F₁₂ − ε₁₂₀J⁰‖`, the initial-data constraint evaluated along the flow.
    pub constraint_abs: f64,
    /// `‖F − εJ‖ / (‖F‖ + ‖εJ‖)` over all components μ < ν.
    pub field_residual: f64,
    pub field_residual_abs: f64,
    pub phi_hs: f64,
    pub a_hs: f64,
}

impl CshSystem {
    /// Residual report for each frame, with H^s norms at index `s`.
    pub fn monitor(&self, frames: &[FieldState], s: f64) -> Result<Vec<MonitorRow>> {
        frames.iter().map(|f| self.monitor_frame(f, s)).collect()
    }

    fn monitor_frame(&self, st: &FieldState, s: f64) -> Result<MonitorRow> {
        let g = &self.gens;
        let k = dealias_cutoff(self.grid.m(), 3);
        let len = self.grid.len();
        let div = st.a[1].derivative(Axis::X).add(&st.a[2].derivative(Axis::Y))?;
        let rate = st.da[0].to_spectral();
        let gauge_abs = rate.sub(&div)?.l2_norm();
        let gauge_scale = rate.l2_norm() + div.l2_norm();

        let phi = physical_arrays(&st.phi, k);
        let phi_dag = conj_arrays(&phi);
        let a: Vec<PointArrays> = st.a.iter().map(|x| physical_arrays(x, k)).collect();
        let mut currents = Vec::with_capacity(3);
        for al in 0..3 {
            let mut cov = physical_arrays(&Self::partial(&st.phi, &st.dphi, al), k);
            bracket_accumulate(g, &a[al], &phi, ONE, &mut cov);
            for comp in cov.iter_mut() {
                for z in comp.iter_mut() {
                    *z *= eta(al);
                }
            }
            let mut j = zero_arrays(g.dim(), len);
            bracket_accumulate(g, &phi_dag, &cov, ONE, &mut j);
            bracket_accumulate(g, &conj_arrays(&cov), &phi, -ONE, &mut j);
            currents.push(j);
        }
        let (mut e2, mut f2, mut j2) = (0.0, 0.0, 0.0);
        let mut constraint_abs = 0.0;
        for (mu, nu) in [(0, 1), (0, 2), (1, 2)] {
            let mut comm = zero_arrays(g.dim(), len);
            bracket_accumulate(g, &a[mu], &a[nu], ONE, &mut comm);
            let f = Self::partial(&st.a[nu], &st.da[nu], mu)
                .sub(&Self::partial(&st.a[mu], &st.da[mu], nu))?
                .add(&spectral_from_arrays(&self.grid, comm, k))?;
            let mut ej = zero_arrays(g.dim(), len);
            for (al, j) in currents.iter().enumerate() {
                let e = eps3(mu, nu, al);
                if e != 0.0 {
                    axpy_arrays(&mut ej, Complex64::new(e, 0.0), j);
                }
            }
            let ej = spectral_from_arrays(&self.grid, ej, k);
            let e = f.sub(&ej)?.l2_norm();
            if (mu, nu) == (1, 2) {
                constraint_abs = e;
            }
            e2 += e * e;
            f2 += f.l2_norm().powi(2);
            j2 += ej.l2_norm().powi(2);
        }
        let field_scale = f2.sqrt() + j2.sqrt();
        let rel = |x: f64, scale: f64| if scale == 0.0 { x } else { x / scale };
        let a_hs = st.a.iter().map(|x| x.sobolev_norm(s).powi(2)).sum::<f64>().sqrt();
        Ok(MonitorRow {
            t: st.t,
            gauge_residual: rel(gauge_abs, gauge_scale),
            gauge_residual_abs: gauge_abs,
            constraint_abs,
            field_residual: rel(e2.sqrt(), field_scale),
            field_residual_abs: e2.sqrt(),
            phi_hs: st.phi.sobolev_norm(s),
            a_hs,
        })
    }
}

/// Random smooth data satisfying the initial-data constraint exactly.
///
/// Every coefficient function is band-limited to `band` and has root mean
/// square `amplitude`.
///
/// The potentials are skew-Hermitian (imaginary coefficients) and `f` is
/// Hermitian. `aⱼ = ∂ⱼ(iψ)·T¹` is a pure gradient along one generator with
/// `ψ` of root mean square `gradient_amplitude` (zero gives `aⱼ = 0`), so its curvature
/// vanishes, and `g = ik − [a₀, f]` with `k` real-valued makes
/// `g + [a₀, f]` skew-Hermitian, so the charge density vanishes. `f` lives on
/// even lattice points (`kx + ky` even) and `a₀` on odd ones, which keeps
/// `[a₀, f]` and hence `g` zero-mean.
pub fn constraint_compatible_data(
    seed: u64,
    grid: &Grid2D,
    gens: &GeneratorSet,
    amplitude: f64,
    gradient_amplitude: f64,
    band: usize,
) -> Result<InitialData> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = gens.dim();
    let real_scalar = |rng: &mut ChaCha8Rng, amp: f64, parity: Option<i64>| {
        let mut u = random_band_limited(grid, band, amp, rng).real_part().to_spectral();
        if let Some(p) = parity {
            for (idx, z) in u.data_mut().iter_mut().enumerate() {
                let (kx, ky) = grid.lattice(idx);
                if (kx + ky).rem_euclid(2) != p {
                    *z = ZERO;
                }
            }
        }
        let rms = u.l2_norm() / grid.area().sqrt();
        if rms > 0.0 {
            u = u.scale(Complex64::new(amp / rms, 0.0));
        }
        u
    };
    let lie = |rng: &mut ChaCha8Rng, parity: Option<i64>, phase: Complex64| {
        LieFieldGrid::new((0..dim).map(|_| real_scalar(rng, amplitude, parity).scale(phase)).collect())
    };
    let f = lie(&mut rng, Some(0), ONE)?;
    let a0 = lie(&mut rng, Some(1), I)?;
    let kf = lie(&mut rng, None, ONE)?;
    let psi = real_scalar(&mut rng, gradient_amplitude, None).scale(I);
    let zero = ScalarField::zeros(grid, Representation::Spectral);
    let gradient = |axis: Axis| {
        let mut comps = vec![zero.clone(); dim];
        comps[0] = psi.derivative(axis);
        LieFieldGrid::new(comps)
    };
    let a1 = gradient(Axis::X)?;
    let a2 = gradient(Axis::Y)?;

    let k = dealias_cutoff(grid.m(), 3);
    let mut br = zero_arrays(dim, grid.len());
    bracket_accumulate(gens, &physical_arrays(&a0, k), &physical_arrays(&f, k), ONE, &mut br);
    let br = spectral_from_arrays(grid, br, k);
    let g = kf.scale(I).sub(&br)?;
    Ok(InitialData { f, g, a: [a0, a1, a2] })
}
