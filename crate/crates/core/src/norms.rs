//! Spatial norms: Plancherel sums for Sobolev norms, collocation
//! quadrature for Lebesgue norms.

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::ops::{bessel_potential, MEAN_TOLERANCE};

/// `L²` inner product `∫ a·b dx` of two real fields of equal shape.
pub fn inner(a: &SpectralField, b: &SpectralField) -> Result<f64> {
    a.check_same_shape(b)?;
    let vol = a.grid().volume();
    let s: f64 = a
        .comps()
        .iter()
        .zip(b.comps())
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p.re * q.re + p.im * q.im).sum::<f64>())
        .sum();
    Ok(vol * s)
}

/// Squared `L²` norm.
pub fn l2_norm_sq(f: &SpectralField) -> f64 {
    let vol = f.grid().volume();
    vol * f.comps().iter().flat_map(|c| c.iter()).map(|z| z.norm_sqr()).sum::<f64>()
}

pub fn l2_norm(f: &SpectralField) -> f64 {
    l2_norm_sq(f).sqrt()
}

/// Squared `H^s` (or `Ḣ^s`) norm.
pub fn sobolev_norm_sq(f: &SpectralField, s: f64, homogeneous: bool) -> Result<f64> {
    let g = f.grid();
    if homogeneous && s < 0.0 {
        let norm = f.coeff_norm();
        for c in f.comps() {
            if c[0].norm() > MEAN_TOLERANCE * norm {
                return Err(Error::NegativePowerOfMeanMode { mean: c[0].norm(), norm });
            }
        }
    }
    let mut acc = 0.0;
    for i in 0..g.len() {
        let k2 = g.k2(i);
        let w = if homogeneous {
            if k2 == 0.0 {
                if s == 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                k2.powf(s)
            }
        } else {
            (1.0 + k2).powf(s)
        };
        if w == 0.0 {
            continue;
        }
        let m: f64 = f.comps().iter().map(|c| c[i].norm_sqr()).sum();
        acc += w * m;
    }
    Ok(acc * g.volume())
}

/// `‖f‖_{H^s}` with weight `(1+|k|²)^s`, or `‖f‖_{Ḣ^s}` with `|k|^{2s}`.
///
/// Homogeneous norms ignore the mean mode; for `s < 0` they require it to vanish.
pub fn sobolev_norm(f: &SpectralField, s: f64, homogeneous: bool) -> Result<f64> {
    Ok(sobolev_norm_sq(f, s, homogeneous)?.sqrt())
}

/// Pointwise Euclidean magnitude of a field on the collocation grid.
pub fn magnitude(samples: &[Vec<f64>]) -> Vec<f64> {
    let len = samples[0].len();
    (0..len)
        .map(|i| samples.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt())
        .collect()
}

/// `(∫ |v|^p dx)^{1/p}` from pointwise magnitudes by the rectangle rule;
/// `p = ∞` returns the maximum.
pub fn lp_of_samples(mag: &[f64], p: f64, cell_volume: f64) -> f64 {
    if p.is_infinite() {
        return mag.iter().fold(0.0, |m, &v| m.max(v));
    }
    let s: f64 = mag.iter().map(|v| v.powf(p)).sum();
    (s * cell_volume).powf(1.0 / p)
}

/// `‖f‖_{L^p}` by collocation quadrature (exact for integrands band-limited below `n`).
pub fn lp_norm(f: &SpectralField, p: f64) -> Result<f64> {
    check_p(p)?;
    let mag = magnitude(&f.to_physical());
    Ok(lp_of_samples(&mag, p, f.grid().cell_volume()))
}

/// `‖(I-Δ)^{-m/2} f‖_{L^p}`, i.e. the `W^{-m,p}` norm.
pub fn neg_sobolev_lp_norm(f: &SpectralField, m: f64, p: f64) -> Result<f64> {
    if m < 0.0 {
        return Err(Error::InvalidParameter(format!("order must be >= 0, got {m}")));
    }
    lp_norm(&bessel_potential(f, -m), p)
}

fn check_p(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidParameter(format!("Lebesgue exponent must be in [1, ∞], got {p}")));
    }
    Ok(())
}
