//! Artificial compressibility system
//!
//! ```text
//! ∂ₜu + ∇p = νΔu − (u·∇)u − ½(div u)u
//! ε∂ₜp + div u = 0
//! ```
//!
//! integrated by Strang splitting: half a step of the exact per-mode
//! acoustic-viscous propagator, a classical RK4 step on the quadratic terms,
//! and another half step of the propagator. The acoustic speed `1/√ε` only
//! enters the exact propagator, so the step size is limited by advection.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::TorusGrid;
use crate::norms::{l2_norm_sq, sobolev_norm_sq};
use crate::ops::{dealias_inplace, divergence, gradient, laplacian, velocity_gradient};
use crate::quadrature::cumulative_integral;

/// Velocity/pressure pair at one instant.
#[derive(Clone, Debug)]
pub struct AcState {
    pub u: SpectralField,
    pub p: SpectralField,
    /// Relaxation parameter; `0` marks incompressible reference states.
    pub eps: f64,
    pub t: f64,
}

impl AcState {
    pub fn new(u: SpectralField, p: SpectralField, eps: f64, t: f64) -> Result<Self> {
        let g = u.grid().clone();
        if u.ncomp() != g.dim() || p.ncomp() != 1 {
            return Err(Error::ShapeMismatch("state needs a vector velocity and a scalar pressure".into()));
        }
        p.check_grid(&g)?;
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("eps must be finite and nonnegative, got {eps}")));
        }
        Ok(Self { u, p, eps, t })
    }

    pub fn zeros(grid: &Arc<TorusGrid>, eps: f64) -> Self {
        Self {
            u: SpectralField::vector_zeros(grid),
            p: SpectralField::scalar_zeros(grid),
            eps,
            t: 0.0,
        }
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        self.u.grid()
    }

    /// `½‖u‖² + (ε/2)‖p‖²`.
    pub fn energy(&self) -> f64 {
        0.5 * l2_norm_sq(&self.u) + 0.5 * self.eps * l2_norm_sq(&self.p)
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.p.is_finite()
    }
}

/// Physical parameters of a relaxed run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcParams {
    pub eps: f64,
    pub nu: f64,
    /// When `false` the quadratic terms are switched off (linear runs).
    #[serde(default = "default_true")]
    pub nonlinear: bool,
    #[serde(default)]
    pub scheme: TimeScheme,
}

/// How the quadratic terms are combined with the exact linear propagator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeScheme {
    /// Second-order Strang splitting, see [`step`].
    Strang,
    /// Fourth-order integrating-factor RK4, see [`lawson_step`].
    #[default]
    Lawson,
}

fn default_true() -> bool {
    true
}

impl AcParams {
    pub fn new(eps: f64, nu: f64) -> Self {
        Self { eps, nu, nonlinear: true, scheme: TimeScheme::default() }
    }

    pub fn linear(eps: f64, nu: f64) -> Self {
        Self { eps, nu, nonlinear: false, scheme: TimeScheme::default() }
    }

    pub fn with_scheme(self, scheme: TimeScheme) -> Self {
        Self { scheme, ..self }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return Err(Error::InvalidParameter(format!("nu must be nonnegative, got {}", self.nu)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Ac,
    Ns,
}

/// Uniformly recorded run.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub grid: Arc<TorusGrid>,
    pub solver: SolverKind,
    pub eps: f64,
    pub nu: f64,
    pub nonlinear: bool,
    pub dt: f64,
    pub dt_rec: f64,
    pub samples: Vec<AcState>,
    /// `ν‖∇u‖²` after every time step (first entry at `t0`), kept by the
    /// solvers so the energy balance does not depend on the recording stride.
    pub rate_history: Option<Vec<f64>>,
}

impl Trajectory {
    /// Validates the recording invariants: uniform strictly increasing time
    /// stamps, a shared grid and a shared `ε`.
    pub fn new(
        solver: SolverKind,
        nu: f64,
        nonlinear: bool,
        dt: f64,
        dt_rec: f64,
        samples: Vec<AcState>,
    ) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::InvalidParameter("trajectory needs at least one sample".into()))?;
        let grid = first.grid().clone();
        let eps = first.eps;
        for (j, s) in samples.iter().enumerate() {
            s.u.check_grid(&grid)?;
            s.p.check_grid(&grid)?;
            if s.eps != eps {
                return Err(Error::Mismatch(format!("sample {j} has eps {} instead of {eps}", s.eps)));
            }
            let want = first.t + j as f64 * dt_rec;
            if (s.t - want).abs() > 1e-9 * dt_rec.max(1.0) {
                return Err(Error::Mismatch(format!("sample {j} at t = {} breaks the uniform stride", s.t)));
            }
        }
        if samples.len() > 1 && !(dt_rec > 0.0) {
            return Err(Error::InvalidParameter("recording stride must be positive".into()));
        }
        Ok(Self { grid, solver, eps, nu, nonlinear, dt, dt_rec, samples, rate_history: None })
    }

    pub fn with_rate_history(mut self, rates: Vec<f64>) -> Result<Self> {
        let steps = whole_ratio(self.t_end() - self.t0(), self.dt, "step history").unwrap_or(0);
        if rates.len() != steps + 1 {
            return Err(Error::SizeMismatch { expected: steps + 1, found: rates.len() });
        }
        self.rate_history = Some(rates);
        Ok(self)
    }

    /// Recorded samples per stride of the step history.
    pub(crate) fn steps_per_record(&self) -> usize {
        whole_ratio(self.dt_rec, self.dt, "recording stride").unwrap_or(1)
    }

    pub fn t0(&self) -> f64 {
        self.samples[0].t
    }

    pub fn t_end(&self) -> f64 {
        self.samples.last().map(|s| s.t).unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }
}

/// Velocity and gradient samples used by every quadratic term.
struct PhysicalKinematics {
    u: Vec<Vec<f64>>,
    /// `grad[c * d + a] = ∂_a u_c`
    grad: Vec<Vec<f64>>,
    div: Vec<f64>,
}

fn kinematics(u: &SpectralField) -> Result<PhysicalKinematics> {
    let d = u.grid().dim();
    let up = u.to_physical();
    let grad = velocity_gradient(u)?.to_physical();
    let len = u.grid().len();
    let div = (0..len).map(|i| (0..d).map(|a| grad[a * d + a][i]).sum()).collect();
    Ok(PhysicalKinematics { u: up, grad, div })
}

/// Pointwise advection `(u·∇)u` and stabilizer `(div u)u` on the collocation grid.
pub fn quadratic_terms_physical(u: &SpectralField) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let d = u.grid().dim();
    let len = u.grid().len();
    let k = kinematics(u)?;
    let adv = (0..d)
        .map(|c| (0..len).map(|i| (0..d).map(|a| k.u[a][i] * k.grad[c * d + a][i]).sum()).collect())
        .collect();
    let stab = (0..d).map(|c| (0..len).map(|i| k.div[i] * k.u[c][i]).collect()).collect();
    Ok((adv, stab))
}

/// `(u·∇)u + ½(div u)u`, truncated by the 2/3 rule.
pub fn nonlinear_term(u: &SpectralField) -> Result<SpectralField> {
    let d = u.grid().dim();
    let len = u.grid().len();
    let k = kinematics(u)?;
    let samples: Vec<Vec<f64>> = (0..d)
        .map(|c| {
            (0..len)
                .map(|i| {
                    let adv: f64 = (0..d).map(|a| k.u[a][i] * k.grad[c * d + a][i]).sum();
                    adv + 0.5 * k.div[i] * k.u[c][i]
                })
                .collect()
        })
        .collect();
    let mut out = SpectralField::from_physical(u.grid(), &samples)?;
    dealias_inplace(&mut out);
    Ok(out)
}

/// `Σ_{i,j} ∂_i u_j ∂_j u_i`, truncated by the 2/3 rule.
pub fn velocity_gradient_trace_sq(u: &SpectralField) -> Result<SpectralField> {
    let d = u.grid().dim();
    let len = u.grid().len();
    let k = kinematics(u)?;
    let tr: Vec<f64> = (0..len)
        .map(|i| {
            let mut s = 0.0;
            for a in 0..d {
                for b in 0..d {
                    s += k.grad[a * d + b][i] * k.grad[b * d + a][i];
                }
            }
            s
        })
        .collect();
    let mut out = SpectralField::from_physical(u.grid(), &[tr])?;
    dealias_inplace(&mut out);
    Ok(out)
}

/// Right-hand side `(∂ₜu, ∂ₜp)` of the relaxed system.
pub fn ac_rhs(state: &AcState, params: &AcParams) -> Result<(SpectralField, SpectralField)> {
    params.validate()?;
    let mut du = laplacian(&state.u).scaled(params.nu);
    if params.nonlinear {
        du.axpy(-1.0, &nonlinear_term(&state.u)?);
    }
    du.axpy(-1.0, &gradient(&state.p)?);
    let dp = divergence(&state.u)?.scaled(-1.0 / params.eps);
    Ok((du, dp))
}

/// Entries of `exp(M t)` for `M = [[-ν|k|², -iκ], [-iκ/ε, 0]]`, with `κ` the
/// magnitude of the odd-operator wavevector.
#[derive(Clone, Copy, Debug)]
struct ModePropagator {
    uu: Complex64,
    up: Complex64,
    pu: Complex64,
    pp: Complex64,
}

fn mode_propagator(visc: f64, kappa: f64, eps: f64, t: f64) -> ModePropagator {
    // exp(Mt) = e^{μt} [C I + S (M - μI)], μ = tr M / 2, ω² = μ² - det M
    let mu = -0.5 * visc;
    let omega2 = mu * mu - kappa * kappa / eps;
    let (ec, es) = if omega2 >= 0.0 {
        let omega = omega2.sqrt();
        let x = omega * t;
        if x < 1e-4 {
            let e = (mu * t).exp();
            (e * (1.0 + 0.5 * x * x), e * t * (1.0 + x * x / 6.0))
        } else {
            let plus = ((mu + omega) * t).exp();
            let minus = ((mu - omega) * t).exp();
            (0.5 * (plus + minus), (plus - minus) / (2.0 * omega))
        }
    } else {
        let theta = (-omega2).sqrt();
        let e = (mu * t).exp();
        (e * (theta * t).cos(), e * (theta * t).sin() / theta)
    };
    let i = Complex64::new(0.0, 1.0);
    ModePropagator {
        uu: Complex64::from(ec + es * mu),
        up: -i * (es * kappa),
        pu: -i * (es * kappa / eps),
        pp: Complex64::from(ec - es * mu),
    }
}

/// Exact solution operator of the linear part
/// `∂ₜu = νΔu − ∇p`, `ε∂ₜp = −div u` over a time `dt`.
///
/// Transverse velocity decays by `e^{-ν|k|²dt}`; the longitudinal velocity
/// and the pressure evolve by the closed-form exponential of their 2×2
/// system.
pub fn acoustic_viscous_propagator(state: &AcState, params: &AcParams, dt: f64) -> Result<AcState> {
    params.validate()?;
    if !(dt >= 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be nonnegative, got {dt}")));
    }
    let g = state.grid().clone();
    let d = g.dim();
    let mut u = state.u.clone();
    let mut p = state.p.clone();
    for i in 0..g.len() {
        let visc = params.nu * g.k2(i);
        let ko = g.wavevector_odd(i);
        let kappa = ko[..d].iter().map(|x| x * x).sum::<f64>().sqrt();
        if kappa == 0.0 {
            let decay = (-visc * dt).exp();
            for c in 0..d {
                u.comp_mut(c)[i] *= decay;
            }
            continue;
        }
        let mut khat = [0.0; 3];
        for a in 0..d {
            khat[a] = ko[a] / kappa;
        }
        let along: Complex64 = (0..d).map(|a| state.u.comp(a)[i] * khat[a]).sum();
        let decay = (-visc * dt).exp();
        let m = mode_propagator(visc, kappa, params.eps, dt);
        let p_old = state.p.comp(0)[i];
        let along_new = m.uu * along + m.up * p_old;
        p.comp_mut(0)[i] = m.pu * along + m.pp * p_old;
        for a in 0..d {
            let transverse = state.u.comp(a)[i] - along * khat[a];
            u.comp_mut(a)[i] = transverse * decay + along_new * khat[a];
        }
    }
    Ok(AcState { u, p, eps: state.eps, t: state.t + dt })
}

/// Advective CFL number `dt · max_x Σ_a |u_a| / Δx`.
pub fn advective_cfl(u: &SpectralField, dt: f64) -> f64 {
    let phys = u.to_physical();
    let len = u.grid().len();
    let vmax = (0..len)
        .map(|i| phys.iter().map(|c| c[i].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    dt * vmax / u.grid().spacing()
}

fn rk4_nonlinear(u: &SpectralField, dt: f64) -> Result<SpectralField> {
    let k1 = nonlinear_term(u)?.scaled(-1.0);
    let mut tmp = u.clone();
    tmp.axpy(0.5 * dt, &k1);
    let k2 = nonlinear_term(&tmp)?.scaled(-1.0);
    tmp = u.clone();
    tmp.axpy(0.5 * dt, &k2);
    let k3 = nonlinear_term(&tmp)?.scaled(-1.0);
    tmp = u.clone();
    tmp.axpy(dt, &k3);
    let k4 = nonlinear_term(&tmp)?.scaled(-1.0);
    let mut out = u.clone();
    out.axpy(dt / 6.0, &k1);
    out.axpy(dt / 3.0, &k2);
    out.axpy(dt / 3.0, &k3);
    out.axpy(dt / 6.0, &k4);
    Ok(out)
}

/// One Strang step: half propagator, RK4 on `−(u·∇)u − ½(div u)u`, half propagator.
pub fn step(state: &AcState, params: &AcParams, dt: f64) -> Result<AcState> {
    params.validate()?;
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    if !params.nonlinear {
        return acoustic_viscous_propagator(state, params, dt);
    }
    let cfl = advective_cfl(&state.u, dt);
    if cfl > 1.0 {
        return Err(Error::CflViolation { cfl });
    }
    let mut half = acoustic_viscous_propagator(state, params, 0.5 * dt)?;
    half.u = rk4_nonlinear(&half.u, dt)?;
    acoustic_viscous_propagator(&half, params, 0.5 * dt)
}

fn state_axpy(x: &mut AcState, a: f64, y: &AcState) {
    x.u.axpy(a, &y.u);
    x.p.axpy(a, &y.p);
}

fn nonlinear_increment(s: &AcState) -> Result<AcState> {
    Ok(AcState {
        u: nonlinear_term(&s.u)?.scaled(-1.0),
        p: SpectralField::scalar_zeros(s.grid()),
        eps: s.eps,
        t: s.t,
    })
}

/// One integrating-factor (Lawson) RK4 step: the quadratic terms are
/// integrated by RK4 in the frame moving with the exact acoustic-viscous
/// propagator `E_τ`, giving fourth order in time.
pub fn lawson_step(state: &AcState, params: &AcParams, dt: f64) -> Result<AcState> {
    params.validate()?;
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    if !params.nonlinear {
        return acoustic_viscous_propagator(state, params, dt);
    }
    let cfl = advective_cfl(&state.u, dt);
    if cfl > 1.0 {
        return Err(Error::CflViolation { cfl });
    }
    let half = |s: &AcState| acoustic_viscous_propagator(s, params, 0.5 * dt);
    let full = |s: &AcState| acoustic_viscous_propagator(s, params, dt);
    let k1 = nonlinear_increment(state)?;
    let mut a = state.clone();
    state_axpy(&mut a, 0.5 * dt, &k1);
    let k2 = nonlinear_increment(&half(&a)?)?;
    let mut b = half(state)?;
    state_axpy(&mut b, 0.5 * dt, &k2);
    let k3 = nonlinear_increment(&b)?;
    let mut c = full(state)?;
    state_axpy(&mut c, dt, &half(&k3)?);
    let k4 = nonlinear_increment(&c)?;
    let mut mid = k2;
    state_axpy(&mut mid, 1.0, &k3);
    let mut out = full(state)?;
    state_axpy(&mut out, dt / 6.0, &full(&k1)?);
    state_axpy(&mut out, dt / 3.0, &half(&mid)?);
    state_axpy(&mut out, dt / 6.0, &k4);
    out.t = state.t + dt;
    Ok(out)
}

/// Initial data for the relaxed family: `u^ε₀ = u₀` and the incompressible
/// pressure `p^ε₀ = (−Δ)⁻¹ Σ ∂ᵢu₀ⱼ ∂ⱼu₀ᵢ` (mean free), both independent of `ε`.
pub fn make_initial_data(u0: &SpectralField, eps: f64) -> Result<AcState> {
    let p0 = crate::ns::poisson_pressure(u0)?;
    AcState::new(u0.clone(), p0, eps, 0.0)
}

/// Number of `small` steps that make up `big`, if it is a whole number.
pub(crate) fn whole_ratio(big: f64, small: f64, what: &str) -> Result<usize> {
    let r = big / small;
    let n = r.round();
    if n < 1.0 || (r - n).abs() > 1e-9 * n.max(1.0) {
        return Err(Error::InvalidParameter(format!("{what}: {small} does not divide {big}")));
    }
    Ok(n as usize)
}

/// Integrates from `initial` up to `t_end`, recording every `dt_rec`.
pub fn simulate(initial: &AcState, params: &AcParams, t_end: f64, dt: f64, dt_rec: f64) -> Result<Trajectory> {
    params.validate()?;
    let per_rec = whole_ratio(dt_rec, dt, "recording stride")?;
    let n_rec = whole_ratio(t_end, dt_rec, "horizon")?;
    let t0 = initial.t;
    let mut state = initial.clone();
    state.eps = params.eps;
    let mut samples = Vec::with_capacity(n_rec + 1);
    let mut rates = Vec::with_capacity(n_rec * per_rec + 1);
    samples.push(state.clone());
    rates.push(dissipation_rate(&state.u, params.nu));
    for r in 1..=n_rec {
        for s in 1..=per_rec {
            state = match params.scheme {
                TimeScheme::Strang => step(&state, params, dt)?,
                TimeScheme::Lawson => lawson_step(&state, params, dt)?,
            };
            state.t = t0 + ((r - 1) * per_rec + s) as f64 * dt;
            if !state.is_finite() {
                return Err(Error::NonFinite { t: state.t });
            }
            rates.push(dissipation_rate(&state.u, params.nu));
        }
        state.t = t0 + r as f64 * dt_rec;
        samples.push(state.clone());
    }
    Trajectory::new(SolverKind::Ac, params.nu, params.nonlinear, dt, dt_rec, samples)?.with_rate_history(rates)
}

/// `ν‖∇u‖²`.
pub fn dissipation_rate(u: &SpectralField, nu: f64) -> f64 {
    nu * sobolev_norm_sq(u, 1.0, true).expect("nonnegative index")
}

/// Convenience wrapper: builds the initial pressure from `u0` and simulates.
pub fn simulate_from_velocity(
    u0: &SpectralField,
    params: &AcParams,
    t_end: f64,
    dt: f64,
    dt_rec: f64,
) -> Result<Trajectory> {
    let init = make_initial_data(u0, params.eps)?;
    simulate(&init, params, t_end, dt, dt_rec)
}

/// Energy bookkeeping along a trajectory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnergyReport {
    pub times: Vec<f64>,
    /// `E(t) = ½‖u‖² + (ε/2)‖p‖²`
    pub energy: Vec<f64>,
    /// `D(t) = ν ∫₀ᵗ ‖∇u‖²`
    pub dissipation: Vec<f64>,
    /// `E(t) + D(t) − E(0)`
    pub deficit: Vec<f64>,
}

impl EnergyReport {
    pub fn initial_energy(&self) -> f64 {
        self.energy.first().copied().unwrap_or(0.0)
    }

    pub fn max_deficit(&self) -> f64 {
        self.deficit.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_deficit(&self) -> f64 {
        self.deficit.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Global energy balance. The dissipation integral uses the fourth-order
/// corrected trapezoid rule, over the per-step rate history when the
/// trajectory carries one and over the recorded samples otherwise.
pub fn global_energy_check(traj: &Trajectory) -> EnergyReport {
    let times = traj.times();
    let energy: Vec<f64> = traj.samples.iter().map(AcState::energy).collect();
    let dissipation = match &traj.rate_history {
        Some(rates) => {
            let per = traj.steps_per_record();
            let all = cumulative_integral(rates, traj.dt);
            (0..traj.len()).map(|j| all[j * per]).collect()
        }
        None => {
            let rate: Vec<f64> = traj.samples.iter().map(|s| dissipation_rate(&s.u, traj.nu)).collect();
            cumulative_integral(&rate, traj.dt_rec)
        }
    };
    let e0 = energy.first().copied().unwrap_or(0.0);
    let deficit = energy.iter().zip(&dissipation).map(|(e, d)| e + d - e0).collect();
    EnergyReport { times, energy, dissipation, deficit }
}
