//! Fourier-multiplier operators: derivatives, Leray projectors, fractional
//! Laplacians and the 2/3-rule truncation.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::SpectralField;

/// Relative size of the mean mode below which a field counts as mean-free.
pub const MEAN_TOLERANCE: f64 = 1e-14;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn require_scalar(f: &SpectralField, op: &str) -> Result<()> {
    if f.ncomp() != 1 {
        return Err(Error::ShapeMismatch(format!("{op} expects a scalar field, got {} components", f.ncomp())));
    }
    Ok(())
}

fn require_vector(v: &SpectralField, op: &str) -> Result<()> {
    if v.ncomp() != v.grid().dim() {
        return Err(Error::ShapeMismatch(format!(
            "{op} expects a {}-component vector field, got {}",
            v.grid().dim(),
            v.ncomp()
        )));
    }
    Ok(())
}

/// `∇f`: multiplication by `ik` per mode.
pub fn gradient(f: &SpectralField) -> Result<SpectralField> {
    require_scalar(f, "gradient")?;
    let g = f.grid();
    let src = f.comp(0);
    let comps = (0..g.dim())
        .map(|a| (0..g.len()).map(|i| I * g.wavevector_odd(i)[a] * src[i]).collect())
        .collect();
    SpectralField::from_coeffs(g, comps)
}

/// `div v`: `ik · v̂` per mode.
pub fn divergence(v: &SpectralField) -> Result<SpectralField> {
    require_vector(v, "divergence")?;
    let g = v.grid();
    let out = (0..g.len())
        .map(|i| {
            let k = g.wavevector_odd(i);
            (0..g.dim()).map(|a| I * k[a] * v.comp(a)[i]).sum()
        })
        .collect();
    SpectralField::from_coeffs(g, vec![out])
}

/// Componentwise `Δf`: multiplication by `-|k|^2`.
pub fn laplacian(f: &SpectralField) -> SpectralField {
    let g = f.grid().clone();
    f.map_modes(|i| -g.k2(i))
}

/// Per-mode gradient of each component of a vector field, returned as
/// `d*d` scalar coefficient arrays ordered `[∂_0 v_0, ∂_1 v_0, ..., ∂_{d-1} v_{d-1}]`.
pub fn velocity_gradient(v: &SpectralField) -> Result<SpectralField> {
    require_vector(v, "velocity_gradient")?;
    let g = v.grid();
    let d = g.dim();
    let mut comps = Vec::with_capacity(d * d);
    for c in 0..d {
        for a in 0..d {
            comps.push((0..g.len()).map(|i| I * g.wavevector_odd(i)[a] * v.comp(c)[i]).collect());
        }
    }
    SpectralField::from_coeffs(g, comps)
}

/// Gradient component `Q v̂ = (k·v̂) k / |k|^2`; the mean mode goes to `P`.
pub fn leray_q(v: &SpectralField) -> Result<SpectralField> {
    require_vector(v, "leray_q")?;
    let g = v.grid();
    let d = g.dim();
    let mut out = SpectralField::vector_zeros(g);
    for i in 0..g.len() {
        let k = g.wavevector_odd(i);
        let k2: f64 = k[..d].iter().map(|x| x * x).sum();
        if k2 == 0.0 {
            continue;
        }
        let kv: Complex64 = (0..d).map(|a| v.comp(a)[i] * k[a]).sum();
        for a in 0..d {
            out.comp_mut(a)[i] = kv * (k[a] / k2);
        }
    }
    Ok(out)
}

/// Divergence-free component `P = I - Q`.
pub fn leray_p(v: &SpectralField) -> Result<SpectralField> {
    Ok(v.sub(&leray_q(v)?))
}

fn check_mean_free(f: &SpectralField) -> Result<()> {
    let norm = f.coeff_norm();
    for c in f.comps() {
        let mean = c[0].norm();
        if mean > MEAN_TOLERANCE * norm {
            return Err(Error::NegativePowerOfMeanMode { mean, norm });
        }
    }
    Ok(())
}

/// `(-Δ)^{a/2}`: multiplication by `|k|^a`, zero mode mapped to zero.
///
/// Negative exponents require a mean-free field.
pub fn frac_laplacian(f: &SpectralField, a: f64) -> Result<SpectralField> {
    if a < 0.0 {
        check_mean_free(f)?;
    }
    let g = f.grid().clone();
    Ok(f.map_modes(|i| {
        let k2 = g.k2(i);
        if k2 == 0.0 {
            0.0
        } else {
            k2.powf(0.5 * a)
        }
    }))
}

/// Bessel potential `(I - Δ)^{a/2}`.
pub fn bessel_potential(f: &SpectralField, a: f64) -> SpectralField {
    let g = f.grid().clone();
    f.map_modes(|i| (1.0 + g.k2(i)).powf(0.5 * a))
}

/// `Δ^{-1}` on the mean-free part; the mean of the result is zero.
pub fn inverse_laplacian_mean_free(f: &SpectralField) -> SpectralField {
    let g = f.grid().clone();
    f.map_modes(|i| {
        let k2 = g.k2(i);
        if k2 == 0.0 {
            0.0
        } else {
            -1.0 / k2
        }
    })
}

/// Zeroes every mode outside the 2/3-rule band. Idempotent.
pub fn dealias(f: &SpectralField) -> SpectralField {
    let mut out = f.clone();
    dealias_inplace(&mut out);
    out
}

pub fn dealias_inplace(f: &mut SpectralField) {
    let g = f.grid().clone();
    for c in 0..f.ncomp() {
        for (i, z) in f.comp_mut(c).iter_mut().enumerate() {
            if !g.retained(i) {
                *z = Complex64::default();
            }
        }
    }
}

/// Pointwise product of two scalar fields, computed on the collocation grid
/// and truncated by the 2/3 rule.
pub fn dealiased_product(a: &SpectralField, b: &SpectralField) -> Result<SpectralField> {
    require_scalar(a, "dealiased_product")?;
    require_scalar(b, "dealiased_product")?;
    a.check_grid(b.grid())?;
    let pa = a.to_physical();
    let pb = b.to_physical();
    let prod: Vec<f64> = pa[0].iter().zip(&pb[0]).map(|(x, y)| x * y).collect();
    let mut out = SpectralField::from_physical(a.grid(), &[prod])?;
    dealias_inplace(&mut out);
    Ok(out)
}
