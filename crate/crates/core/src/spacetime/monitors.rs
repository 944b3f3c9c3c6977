//! Measured counterparts of the ε-uniform bounds: every monitor returns a
//! norm of a computed trajectory whose boundedness along an ε-sweep is the
//! quantity of interest.

use serde::{Deserialize, Serialize};

use super::{
    exponent_relations, joint_sobolev_norm, spacetime_norm, spacetime_norm_modal, time_dft,
    ExtendedTrajectory, FieldSeries, ModalSeries, NormSpec, Region,
};
use crate::ac::{nonlinear_term, quadratic_terms_physical};
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::norms::{lp_norm, lp_of_samples, magnitude, neg_sobolev_lp_norm, sobolev_norm};
use crate::ops::{divergence, gradient, laplacian};
use crate::quadrature::time_lp;

/// One measured norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorReport {
    pub label: String,
    pub eps: f64,
    pub value: f64,
    /// Human-readable norm descriptor, e.g. `H^-0.51(Hdot^-0.5)` or `L^4(W^-2,4)`.
    pub indices: String,
}

impl MonitorReport {
    fn new(label: &str, eps: f64, value: f64, indices: String) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::NonFinite { t: f64::NAN });
        }
        Ok(Self { label: label.to_string(), eps, value, indices })
    }
}

/// Index choices of the monitor suites. The defaults sit strictly inside
/// the admissible open ranges.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MonitorIndices {
    /// Lebesgue pair for the nonlinear-term estimate, `2/p + 3/q = 4`.
    pub p: f64,
    pub q: f64,
    /// Space index of the velocity and pressure estimates, in `[1/2, 3/2)`.
    pub s: f64,
    /// In `[1/4, 1/2)`.
    pub alpha: f64,
    /// `r = r̄ + r_offset`.
    pub r_offset: f64,
    /// `τ = τ̄ − tau_offset`.
    pub tau_offset: f64,
    /// In `(0, 1/12)`.
    pub delta: f64,
    /// In `(0, (1 − 12δ)/10)`.
    pub beta: f64,
}

impl Default for MonitorIndices {
    fn default() -> Self {
        let delta = 1.0 / 24.0;
        Self {
            p: 4.0 / 3.0,
            q: 6.0 / 5.0,
            s: 0.5,
            alpha: 0.3,
            r_offset: 0.01,
            tau_offset: 0.01,
            delta,
            beta: (1.0 - 12.0 * delta) / 20.0,
        }
    }
}

impl MonitorIndices {
    pub fn validate(&self) -> Result<()> {
        exponent_relations(self.p, self.q)?;
        let bad = |what: &str| Err(Error::InvalidParameter(format!("index {what} outside its admissible range")));
        if !(0.5..1.5).contains(&self.s) {
            return bad("s");
        }
        if !(0.25..0.5).contains(&self.alpha) {
            return bad("alpha");
        }
        if !(self.r_offset > 0.0 && self.tau_offset > 0.0) {
            return bad("offset");
        }
        if !(self.delta > 0.0 && self.delta < 1.0 / 12.0) {
            return bad("delta");
        }
        if !(self.beta > 0.0 && self.beta < (1.0 - 12.0 * self.delta) / 10.0) {
            return bad("beta");
        }
        Ok(())
    }

    /// `r̄ = 3/4 − s/2` for the velocity/pressure space index `s`.
    pub fn r_bar(&self) -> f64 {
        0.75 - 0.5 * self.s
    }

    pub fn r(&self) -> f64 {
        self.r_bar() + self.r_offset
    }

    /// `τ̄ = (2/5)(1 + α)` as stated with the velocity estimate.
    pub fn tau_bar_statement(&self) -> f64 {
        0.4 * (1.0 + self.alpha)
    }

    /// `τ̄ = (1 + α)(1 − r̄)/(1 + s)` as set in its proof.
    pub fn tau_bar_proof(&self) -> f64 {
        (1.0 + self.alpha) * (1.0 - self.r_bar()) / (1.0 + self.s)
    }
}

/// Spatial mean removed from every sample before homogeneous negative norms.
fn mean_free(series: &FieldSeries) -> FieldSeries {
    series.mean_free()
}

fn nonlinear_spec(idx: &MonitorIndices) -> Result<NormSpec> {
    let (s, r_bar) = exponent_relations(idx.p, idx.q)?;
    Ok(NormSpec::new(-(r_bar + idx.r_offset), -s, false, true))
}

/// Per-sample `(u·∇)u + ½(div u)u` over the recorded run, extended like the
/// velocity (ramp of its value at `t = 0`, hold, times `φ`).
pub fn nonlinear_series(ext: &ExtendedTrajectory) -> Result<FieldSeries> {
    let recorded = ext.base.samples.iter().map(|s| nonlinear_term(&s.u)).collect::<Result<Vec<_>>>()?;
    ext.extend(&nonlinear_term(&ext.u0)?, &recorded)
}

/// `‖(u·∇)u + ½(div u)u‖_{H^{−r}(Ḣ^{−s})}` with `(s, r̄)` from the pair
/// `(p, q)` and `r = r̄ + r_offset`.
pub fn nonlinear_term_norm(ext: &ExtendedTrajectory, idx: &MonitorIndices) -> Result<MonitorReport> {
    let spec = nonlinear_spec(idx)?;
    let value = spacetime_norm(&mean_free(&nonlinear_series(ext)?), &spec)?;
    MonitorReport::new("nonlinear_term", ext.eps(), value, spec.describe())
}

/// The forcing that turns the extension into a solution of the momentum
/// equation, assembled literally from its piecewise definition:
/// `(1+t)φ′u₀ + φu₀ − (1+t)φ N(u₀)` for `t < 0` and `φ′ū − φ N(ū)` otherwise,
/// where `N(u) = (u·∇)u + ½(div u)u` and `ū` is the unmultiplied extension.
pub fn forcing_series(ext: &ExtendedTrajectory) -> Result<FieldSeries> {
    let n0 = nonlinear_term(&ext.u0)?;
    let last = &ext.base.samples.last().expect("nonempty").u;
    let n_last = nonlinear_term(last)?;
    let samples = ext
        .regions
        .iter()
        .enumerate()
        .map(|(j, r)| -> Result<SpectralField> {
            let (phi, dphi, t) = (ext.phi[j], ext.dphi[j], ext.times[j]);
            Ok(match r {
                Region::Ramp => {
                    let mut f = ext.u0.scaled((1.0 + t) * dphi + phi);
                    f.axpy(-(1.0 + t) * phi, &n0);
                    f
                }
                Region::Recorded(i) => nonlinear_term(&ext.base.samples[*i].u)?.scaled(-1.0),
                Region::Hold => {
                    let mut f = last.scaled(dphi);
                    f.axpy(-phi, &n_last);
                    f
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;
    FieldSeries::new(ext.times[0], ext.h, samples)
}

pub fn forcing_term_norm(ext: &ExtendedTrajectory, idx: &MonitorIndices) -> Result<MonitorReport> {
    let spec = nonlinear_spec(idx)?;
    let value = spacetime_norm(&mean_free(&forcing_series(ext)?), &spec)?;
    MonitorReport::new("forcing_term", ext.eps(), value, spec.describe())
}

/// `‖∂ₜu‖_{H^{−r}(Ḣ^{−s})}`, `‖Δu‖_{H^{−r}(Ḣ^{−s})}` and `‖u‖_{H^{τ}(Ḣ^{−α})}`
/// at both admissible thresholds `τ̄` (the statement's and the proof's).
/// The time derivative is spectral: `2πik` on the time DFT of the extension.
pub fn velocity_estimate_suite(ext: &ExtendedTrajectory, idx: &MonitorIndices) -> Result<Vec<MonitorReport>> {
    idx.validate()?;
    let eps = ext.eps();
    let r = idx.r();
    let modal = time_dft(&mean_free(&ext.u))?;
    let neg = NormSpec::new(-r, -idx.s, false, true);
    let dt = spacetime_norm_modal(&modal.time_derivative(), &neg)?;
    let lap = spacetime_norm_modal(&modal.map_fields(|f| Ok(laplacian(f)))?, &neg)?;
    let mut out = vec![
        MonitorReport::new("velocity_dt", eps, dt, neg.describe())?,
        MonitorReport::new("velocity_laplacian", eps, lap, neg.describe())?,
    ];
    for (label, tau_bar) in [
        ("velocity_tau_statement", idx.tau_bar_statement()),
        ("velocity_tau_proof", idx.tau_bar_proof()),
    ] {
        let spec = NormSpec::new(tau_bar - idx.tau_offset, -idx.alpha, false, true);
        out.push(MonitorReport::new(label, eps, spacetime_norm_modal(&modal, &spec)?, spec.describe())?);
    }
    Ok(out)
}

/// `‖p‖_{H^{−r}(Ḣ^{1−s})}` and `‖√ε p‖_{Ḣ^{1/2+β/4}(H^{−1/2+δ})}`.
pub fn pressure_estimate_suite(ext: &ExtendedTrajectory, idx: &MonitorIndices) -> Result<Vec<MonitorReport>> {
    idx.validate()?;
    let eps = ext.eps();
    let modal = time_dft(&ext.p)?;
    let first = NormSpec::new(-idx.r(), 1.0 - idx.s, false, true);
    let second = NormSpec::new(0.5 + idx.beta / 4.0, -0.5 + idx.delta, true, false);
    Ok(vec![
        MonitorReport::new("pressure_neg", eps, spacetime_norm_modal(&modal, &first)?, first.describe())?,
        MonitorReport::new(
            "pressure_sqrt_eps",
            eps,
            eps.sqrt() * spacetime_norm_modal(&modal, &second)?,
            format!("sqrt(eps) {}", second.describe()),
        )?,
    ])
}

/// Outcome of the modal identity check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModalResidual {
    /// `(‖R_momentum‖ + ‖R_mass‖) / (sum of the norms of all terms)`.
    pub relative: f64,
    pub momentum: f64,
    pub mass: f64,
    pub scale: f64,
    /// Highest time frequency included.
    pub band: f64,
}

fn band_limited(modal: &ModalSeries, band: f64) -> ModalSeries {
    let mut out = modal.clone();
    for (m, c) in out.coeffs.iter_mut().enumerate() {
        if modal.freqs[m].abs() > band || modal.nyquist == Some(m) {
            c.scale(0.0);
        }
    }
    out
}

fn h_minus_one(modal: &ModalSeries) -> f64 {
    super::weighted_norm(modal, |_, k2| 1.0 / (1.0 + k2))
}

/// Evaluates the time-Fourier form of the relaxed system on the extension,
///
/// ```text
/// 2πik ũ − νΔũ + ∇p̃ = f̃,    ε 2πik p̃ + div ũ = g̃,
/// ```
///
/// with `f`, `g` the forcings that make the extension an exact solution on
/// every piece of the window (ramp, recorded run, hold), over time
/// frequencies `|k| ≤ band`, in `L²(k; H⁻¹)`.
pub fn modal_residual_check(ext: &ExtendedTrajectory, band: f64) -> Result<ModalResidual> {
    let nu = ext.base.nu;
    let eps = ext.eps();
    let grad_p0 = gradient(&ext.p0)?;
    let lap_u0 = laplacian(&ext.u0);
    let div_u0 = divergence(&ext.u0)?;
    let end = ext.base.samples.last().expect("nonempty");
    let grad_pe = gradient(&end.p)?;
    let lap_ue = laplacian(&end.u);
    let div_ue = divergence(&end.u)?;
    let mut fs = Vec::with_capacity(ext.len());
    let mut gs = Vec::with_capacity(ext.len());
    for (j, r) in ext.regions.iter().enumerate() {
        let (phi, dphi, t) = (ext.phi[j], ext.dphi[j], ext.times[j]);
        match r {
            Region::Ramp => {
                let a = (1.0 + t) * phi;
                let mut f = ext.u0.scaled((1.0 + t) * dphi + phi);
                f.axpy(-nu * a, &lap_u0);
                f.axpy(a, &grad_p0);
                let mut g = ext.p0.scaled(eps * ((1.0 + t) * dphi + phi));
                g.axpy(a, &div_u0);
                fs.push(f);
                gs.push(g);
            }
            Region::Recorded(i) => {
                let u = &ext.base.samples[*i].u;
                let mut f = if ext.base.nonlinear {
                    nonlinear_term(u)?.scaled(-1.0)
                } else {
                    SpectralField::vector_zeros(u.grid())
                };
                let mut g = SpectralField::scalar_zeros(u.grid());
                // the forcing jumps at both ends of the recorded interval;
                // the trapezoid sum wants the mean of the one-sided limits
                let outer = if *i == 0 {
                    Some((&ext.u0, &lap_u0, &grad_p0, &ext.p0, &div_u0, 1.0))
                } else if *i + 1 == ext.base.len() {
                    Some((&end.u, &lap_ue, &grad_pe, &end.p, &div_ue, 0.0))
                } else {
                    None
                };
                if let Some((u_side, lap_side, grad_side, p_side, div_side, ramp)) = outer {
                    let mut fo = u_side.scaled(ramp);
                    fo.axpy(-nu, lap_side);
                    fo.axpy(1.0, grad_side);
                    let mut go = p_side.scaled(eps * ramp);
                    go.axpy(1.0, div_side);
                    f.scale(0.5);
                    f.axpy(0.5, &fo);
                    g.axpy(0.5, &go);
                }
                fs.push(f);
                gs.push(g);
            }
            Region::Hold => {
                let mut f = end.u.scaled(dphi);
                f.axpy(-nu * phi, &lap_ue);
                f.axpy(phi, &grad_pe);
                let mut g = end.p.scaled(eps * dphi);
                g.axpy(phi, &div_ue);
                fs.push(f);
                gs.push(g);
            }
        }
    }
    let f = band_limited(&time_dft(&FieldSeries::new(ext.times[0], ext.h, fs)?)?, band);
    let g = band_limited(&time_dft(&FieldSeries::new(ext.times[0], ext.h, gs)?)?, band);
    let u = band_limited(&time_dft(&ext.u)?, band);
    let p = band_limited(&time_dft(&ext.p)?, band);

    let du = u.time_derivative();
    let lap = u.map_fields(|v| Ok(laplacian(v).scaled(-nu)))?;
    let gp = p.map_fields(gradient)?;
    let dp = p.time_derivative().map_fields(|v| Ok(v.scaled(eps)))?;
    let dv = u.map_fields(divergence)?;

    let mut r1 = du.clone();
    let mut r2 = dp.clone();
    for m in 0..r1.len() {
        r1.coeffs[m].axpy(1.0, &lap.coeffs[m]);
        r1.coeffs[m].axpy(1.0, &gp.coeffs[m]);
        r1.coeffs[m].axpy(-1.0, &f.coeffs[m]);
        r2.coeffs[m].axpy(1.0, &dv.coeffs[m]);
        r2.coeffs[m].axpy(-1.0, &g.coeffs[m]);
    }
    let momentum = h_minus_one(&r1);
    let mass = h_minus_one(&r2);
    let scale = [&du, &lap, &gp, &f, &dp, &dv, &g].iter().map(|m| h_minus_one(m)).sum::<f64>();
    let relative = if scale == 0.0 { 0.0 } else { (momentum + mass) / scale };
    Ok(ModalResidual { relative, momentum, mass, scale, band })
}

/// Second-order finite-difference time derivative of recorded samples:
/// centered inside, one-sided three-point at the ends.
pub fn finite_difference_dt(samples: &[SpectralField], h: f64) -> Result<Vec<SpectralField>> {
    let n = samples.len();
    if n < 3 {
        return Err(Error::InvalidParameter("finite differences need at least three samples".into()));
    }
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let mut d = SpectralField::zeros(samples[0].grid(), samples[0].ncomp());
        if j == 0 {
            d.axpy(-3.0, &samples[0]);
            d.axpy(4.0, &samples[1]);
            d.axpy(-1.0, &samples[2]);
        } else if j == n - 1 {
            d.axpy(3.0, &samples[n - 1]);
            d.axpy(-4.0, &samples[n - 2]);
            d.axpy(1.0, &samples[n - 3]);
        } else {
            d.axpy(1.0, &samples[j + 1]);
            d.axpy(-1.0, &samples[j - 1]);
        }
        d.scale(0.5 / h);
        out.push(d);
    }
    Ok(out)
}

fn mixed(values: &[f64], p: f64, h: f64) -> f64 {
    time_lp(values, p, h)
}

/// All eight groups of ε-uniform bounds of the energy estimate, measured on
/// the recorded run (`ext` supplies the window for the space-time `H⁻¹` norm).
pub fn energy_bound_suite(ext: &ExtendedTrajectory) -> Result<Vec<MonitorReport>> {
    let traj = &ext.base;
    let eps = traj.eps;
    let h = traj.dt_rec;
    let grid = &traj.grid;
    let cell = grid.cell_volume();
    let mut out = Vec::new();
    let mut push = |label: &str, value: f64, indices: String| -> Result<()> {
        out.push(MonitorReport::new(label, eps, value, indices)?);
        Ok(())
    };

    let p_l2: Vec<f64> = traj.samples.iter().map(|s| crate::norms::l2_norm(&s.p)).collect();
    push("sqrt_eps_p", eps.sqrt() * mixed(&p_l2, f64::INFINITY, h), "sqrt(eps) L^inf(L^2)".into())?;

    let div_series = ext.u.map(|_, u| divergence(u))?;
    push("eps_dt_p", joint_sobolev_norm(&div_series, -1.0)?, "H^-1(spacetime)".into())?;

    let grad: Vec<f64> = traj.samples.iter().map(|s| sobolev_norm(&s.u, 1.0, true)).collect::<Result<_>>()?;
    push("grad_u", mixed(&grad, 2.0, h), "L^2(L^2) of grad".into())?;

    let u_l2: Vec<f64> = traj.samples.iter().map(|s| crate::norms::l2_norm(&s.u)).collect();
    push("u_energy", mixed(&u_l2, f64::INFINITY, h), "L^inf(L^2)".into())?;
    let u_l6: Vec<f64> = traj.samples.iter().map(|s| lp_norm(&s.u, 6.0)).collect::<Result<_>>()?;
    push("u_l6", mixed(&u_l6, 2.0, h), "L^2(L^6)".into())?;

    let mut adv = (Vec::new(), Vec::new());
    let mut stab = (Vec::new(), Vec::new());
    for s in &traj.samples {
        let (a, b) = quadratic_terms_physical(&s.u)?;
        let (ma, mb) = (magnitude(&a), magnitude(&b));
        adv.0.push(lp_of_samples(&ma, 1.0, cell));
        adv.1.push(lp_of_samples(&ma, 1.5, cell));
        stab.0.push(lp_of_samples(&mb, 1.0, cell));
        stab.1.push(lp_of_samples(&mb, 1.5, cell));
    }
    push("advection_l2l1", mixed(&adv.0, 2.0, h), "L^2(L^1)".into())?;
    push("advection_l1l32", mixed(&adv.1, 1.0, h), "L^1(L^3/2)".into())?;
    push("stabilizer_l2l1", mixed(&stab.0, 2.0, h), "L^2(L^1)".into())?;
    push("stabilizer_l1l32", mixed(&stab.1, 1.0, h), "L^1(L^3/2)".into())?;

    let pw: Vec<f64> = traj.samples.iter().map(|s| neg_sobolev_lp_norm(&s.p, 2.0, 4.0)).collect::<Result<_>>()?;
    push("p_w24", eps.powf(0.375) * mixed(&pw, 4.0, h), "eps^3/8 L^4(W^-2,4)".into())?;
    let ps: Vec<SpectralField> = traj.samples.iter().map(|s| s.p.clone()).collect();
    let dp = finite_difference_dt(&ps, h)?;
    let dpw: Vec<f64> = dp.iter().map(|f| neg_sobolev_lp_norm(f, 3.0, 4.0)).collect::<Result<_>>()?;
    push("dt_p_w34", eps.powf(0.875) * mixed(&dpw, 4.0, h), "eps^7/8 L^4(W^-3,4)".into())?;
    Ok(out)
}
