//! Incompressible Navier-Stokes reference solver.
//!
//! Integrates `∂ₜu = νΔu − P((u·∇)u)` with a fourth-order integrating-factor
//! Runge-Kutta scheme: the viscous factor `e^{−ν|k|²τ}` is applied exactly,
//! so only advection limits the step.

use std::sync::Arc;

use crate::ac::{advective_cfl, velocity_gradient_trace_sq, whole_ratio, AcState, SolverKind, Trajectory};
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::TorusGrid;
use crate::norms::l2_norm;
use crate::ops::{dealias_inplace, divergence, inverse_laplacian_mean_free, laplacian, leray_p, velocity_gradient};

/// Relative divergence above which a velocity is rejected as compressible.
pub const SOLENOIDAL_TOLERANCE: f64 = 1e-12;

/// `(u·∇)u` truncated by the 2/3 rule.
pub fn advection(u: &SpectralField) -> Result<SpectralField> {
    let g = u.grid();
    let d = g.dim();
    let up = u.to_physical();
    let grad = velocity_gradient(u)?.to_physical();
    let samples: Vec<Vec<f64>> = (0..d)
        .map(|c| (0..g.len()).map(|i| (0..d).map(|a| up[a][i] * grad[c * d + a][i]).sum()).collect())
        .collect();
    let mut out = SpectralField::from_physical(g, &samples)?;
    dealias_inplace(&mut out);
    Ok(out)
}

/// `−P((u·∇)u)`.
fn projected_advection(u: &SpectralField) -> Result<SpectralField> {
    Ok(leray_p(&advection(u)?)?.scaled(-1.0))
}

/// `νΔu − P((u·∇)u)`.
pub fn ns_rhs(u: &SpectralField, nu: f64) -> Result<SpectralField> {
    let mut out = laplacian(u).scaled(nu);
    out.axpy(1.0, &projected_advection(u)?);
    Ok(out)
}

/// `p = (−Δ)⁻¹ Σ ∂ᵢuⱼ ∂ⱼuᵢ`, mean free, with no solenoidality check.
pub fn poisson_pressure(u: &SpectralField) -> Result<SpectralField> {
    let tr = velocity_gradient_trace_sq(u)?;
    Ok(inverse_laplacian_mean_free(&tr).scaled(-1.0))
}

/// Incompressible pressure of a divergence-free velocity.
pub fn pressure_from_velocity(u: &SpectralField) -> Result<SpectralField> {
    let div = l2_norm(&divergence(u)?);
    let scale = crate::norms::sobolev_norm(u, 1.0, true)?;
    if div > SOLENOIDAL_TOLERANCE * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NotSolenoidal { residual: div / scale.max(f64::MIN_POSITIVE) });
    }
    poisson_pressure(u)
}

fn viscous_factor(u: &SpectralField, nu: f64, tau: f64) -> SpectralField {
    let g = u.grid().clone();
    u.map_modes(|i| (-nu * g.k2(i) * tau).exp())
}

/// One integrating-factor RK4 step.
pub fn ns_step(u: &SpectralField, nu: f64, h: f64) -> Result<SpectralField> {
    let half = |f: &SpectralField| viscous_factor(f, nu, 0.5 * h);
    let full = |f: &SpectralField| viscous_factor(f, nu, h);
    let k1 = projected_advection(u)?;
    let mut a = u.clone();
    a.axpy(0.5 * h, &k1);
    let k2 = projected_advection(&half(&a))?;
    let mut b = half(u);
    b.axpy(0.5 * h, &k2);
    let k3 = projected_advection(&b)?;
    let mut c = full(u);
    c.axpy(h, &half(&k3));
    let k4 = projected_advection(&c)?;
    let mut mid = k2.clone();
    mid.axpy(1.0, &k3);
    let mut out = full(u);
    out.axpy(h / 6.0, &full(&k1));
    out.axpy(h / 3.0, &half(&mid));
    out.axpy(h / 6.0, &k4);
    Ok(out)
}

/// Reference run. Samples carry `eps = 0` and the incompressible pressure.
pub fn simulate_ns(u0: &SpectralField, nu: f64, t_end: f64, dt: f64, dt_rec: f64) -> Result<Trajectory> {
    if !(nu >= 0.0 && nu.is_finite()) {
        return Err(Error::InvalidParameter(format!("nu must be nonnegative, got {nu}")));
    }
    let per_rec = whole_ratio(dt_rec, dt, "recording stride")?;
    let n_rec = whole_ratio(t_end, dt_rec, "horizon")?;
    let mut u = u0.clone();
    let sample = |u: &SpectralField, t: f64| -> Result<AcState> {
        Ok(AcState { u: u.clone(), p: poisson_pressure(u)?, eps: 0.0, t })
    };
    pressure_from_velocity(u0)?;
    let mut samples = vec![sample(&u, 0.0)?];
    let mut rates = vec![crate::ac::dissipation_rate(&u, nu)];
    for r in 1..=n_rec {
        for s in 1..=per_rec {
            let cfl = advective_cfl(&u, dt);
            if cfl > 1.0 {
                return Err(Error::CflViolation { cfl });
            }
            u = ns_step(&u, nu, dt)?;
            if !u.is_finite() {
                return Err(Error::NonFinite { t: ((r - 1) * per_rec + s) as f64 * dt });
            }
            rates.push(crate::ac::dissipation_rate(&u, nu));
        }
        samples.push(sample(&u, r as f64 * dt_rec)?);
    }
    Trajectory::new(SolverKind::Ns, nu, true, dt, dt_rec, samples)?.with_rate_history(rates)
}

/// Two-dimensional Taylor-Green vortex `u = e^{−2νt}(sin x₁ cos x₂, −cos x₁ sin x₂)`
/// with pressure `e^{−4νt}(cos 2x₁ + cos 2x₂)/4`. On a 3D grid the third
/// component is zero and nothing depends on `x₃`. Requires `L = 2π`.
pub fn taylor_green(t: f64, nu: f64, grid: &Arc<TorusGrid>) -> (SpectralField, SpectralField) {
    let a = (-2.0 * nu * t).exp();
    let u = SpectralField::from_fn(grid, grid.dim(), |x, c| match c {
        0 => a * x[0].sin() * x[1].cos(),
        1 => -a * x[0].cos() * x[1].sin(),
        _ => 0.0,
    });
    let p = SpectralField::from_fn(grid, 1, |x, _| a * a * 0.25 * ((2.0 * x[0]).cos() + (2.0 * x[1]).cos()));
    (u, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ac::global_energy_check;

    #[test]
    fn taylor_green_is_a_stationary_profile() {
        let g = TorusGrid::new(2, 16).unwrap();
        let (u, p) = taylor_green(0.0, 1.0, &g);
        // advection is a pure gradient, so the projected rhs is just viscous
        assert!(ns_rhs(&u, 1.0).unwrap().max_diff(&u.scaled(-2.0)) < 1e-14);
        assert!(pressure_from_velocity(&u).unwrap().max_diff(&p) < 1e-14);
    }

    #[test]
    fn taylor_green_run_matches_closed_form() {
        let g = TorusGrid::new(2, 16).unwrap();
        let (u0, _) = taylor_green(0.0, 1.0, &g);
        let traj = simulate_ns(&u0, 1.0, 0.5, 0.01, 0.1).unwrap();
        for s in &traj.samples {
            let (u, p) = taylor_green(s.t, 1.0, &g);
            assert!(s.u.max_diff(&u) < 1e-12, "t = {}", s.t);
            assert!(s.p.max_diff(&p) < 1e-12);
            assert_eq!(s.eps, 0.0);
        }
    }

    #[test]
    fn compressible_data_is_rejected() {
        let g = TorusGrid::new(2, 8).unwrap();
        let u = SpectralField::from_fn(&g, 2, |x, c| if c == 0 { x[0].sin() } else { 0.0 });
        assert!(matches!(pressure_from_velocity(&u), Err(Error::NotSolenoidal { .. })));
        assert!(simulate_ns(&u, 1.0, 0.1, 0.01, 0.01).is_err());
    }

    #[test]
    fn random_run_is_fourth_order_and_dissipates() {
        let g = TorusGrid::new(2, 16).unwrap();
        let u0 = crate::testing::random_solenoidal(&g, 9).scaled(2.0);
        let end = |dt: f64| simulate_ns(&u0, 0.05, 0.4, dt, 0.4).unwrap().samples[1].u.clone();
        let fine = end(0.0025);
        let e1 = end(0.02).max_diff(&fine);
        let e2 = end(0.01).max_diff(&fine);
        let order = (e1 / e2).log2();
        assert!(order > 3.5, "order {order}");
        let traj = simulate_ns(&u0, 0.05, 0.4, 0.01, 0.01).unwrap();
        let rep = global_energy_check(&traj);
        assert!(rep.max_deficit().abs() < 1e-6 * rep.initial_energy());
    }
}
