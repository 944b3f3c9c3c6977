//! Real-valued periodic fields stored as Fourier coefficients.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::TorusGrid;

/// Scalar or vector field on a [`TorusGrid`], stored as the coefficients
/// `f̂(k)` of `f(x) = Σ_k f̂(k) e^{ik·x}`.
///
/// Fields built through the public constructors are real-valued, i.e.
/// `f̂(-k) = conj(f̂(k))`.
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: Arc<TorusGrid>,
    comps: Vec<Vec<Complex64>>,
}

impl SpectralField {
    pub fn zeros(grid: &Arc<TorusGrid>, ncomp: usize) -> Self {
        Self {
            grid: Arc::clone(grid),
            comps: vec![vec![Complex64::default(); grid.len()]; ncomp],
        }
    }

    pub fn scalar_zeros(grid: &Arc<TorusGrid>) -> Self {
        Self::zeros(grid, 1)
    }

    pub fn vector_zeros(grid: &Arc<TorusGrid>) -> Self {
        Self::zeros(grid, grid.dim())
    }

    /// Wraps raw coefficient arrays. Symmetry is the caller's responsibility.
    pub fn from_coeffs(grid: &Arc<TorusGrid>, comps: Vec<Vec<Complex64>>) -> Result<Self> {
        for c in &comps {
            if c.len() != grid.len() {
                return Err(Error::SizeMismatch { expected: grid.len(), found: c.len() });
            }
        }
        Ok(Self { grid: Arc::clone(grid), comps })
    }

    /// Forward transform of physical samples (one slice per component).
    pub fn from_physical(grid: &Arc<TorusGrid>, samples: &[Vec<f64>]) -> Result<Self> {
        let norm = 1.0 / grid.len() as f64;
        let mut comps = Vec::with_capacity(samples.len());
        for s in samples {
            if s.len() != grid.len() {
                return Err(Error::SizeMismatch { expected: grid.len(), found: s.len() });
            }
            let mut data: Vec<Complex64> = s.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            grid.fft_inplace(&mut data, false);
            data.iter_mut().for_each(|c| *c *= norm);
            comps.push(data);
        }
        Ok(Self { grid: Arc::clone(grid), comps })
    }

    /// Samples an analytic field `f(x, component)` on the collocation points.
    pub fn from_fn<F>(grid: &Arc<TorusGrid>, ncomp: usize, f: F) -> Self
    where
        F: Fn(&[f64; 3], usize) -> f64,
    {
        let samples: Vec<Vec<f64>> = (0..ncomp)
            .map(|c| (0..grid.len()).map(|i| f(&grid.point(i), c)).collect())
            .collect();
        Self::from_physical(grid, &samples).expect("sizes match by construction")
    }

    /// Inverse transform to physical samples.
    pub fn to_physical(&self) -> Vec<Vec<f64>> {
        self.comps
            .iter()
            .map(|c| {
                let mut data = c.clone();
                self.grid.fft_inplace(&mut data, true);
                data.into_iter().map(|z| z.re).collect()
            })
            .collect()
    }

    /// Physical samples on a finer grid of the same torus (trigonometric
    /// interpolation by zero padding). The Nyquist coefficient of `self` is
    /// split evenly between `±n/2` so the result stays real.
    pub fn to_physical_on(&self, fine: &Arc<TorusGrid>) -> Result<Vec<Vec<f64>>> {
        let g = &self.grid;
        if fine.dim() != g.dim() || fine.length() != g.length() || fine.n() < g.n() {
            return Err(Error::ShapeMismatch(format!("cannot interpolate {g:?} onto {fine:?}")));
        }
        if fine.n() == g.n() {
            return Ok(self.to_physical());
        }
        let (n, nf, d) = (g.n(), fine.n(), g.dim());
        let half = n / 2;
        let lift = |j: usize| if j < half { j } else if j > half { nf - (n - j) } else { half };
        let mut out = Vec::with_capacity(self.ncomp());
        for c in &self.comps {
            let mut data = vec![Complex64::default(); fine.len()];
            for (i, z) in c.iter().enumerate() {
                let idx = g.unflatten(i);
                // every Nyquist index contributes to both images
                let mut targets = vec![(0usize, 1.0f64)];
                for a in 0..d {
                    let mut next = Vec::with_capacity(targets.len() * 2);
                    for (base, w) in targets {
                        if idx[a] == half {
                            next.push((base * nf + half, 0.5 * w));
                            next.push((base * nf + (nf - half), 0.5 * w));
                        } else {
                            next.push((base * nf + lift(idx[a]), w));
                        }
                    }
                    targets = next;
                }
                for (t, w) in targets {
                    data[t] += z * w;
                }
            }
            fine.fft_inplace(&mut data, true);
            out.push(data.into_iter().map(|z| z.re).collect());
        }
        Ok(out)
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn ncomp(&self) -> usize {
        self.comps.len()
    }

    pub fn comp(&self, c: usize) -> &[Complex64] {
        &self.comps[c]
    }

    pub fn comp_mut(&mut self, c: usize) -> &mut [Complex64] {
        &mut self.comps[c]
    }

    pub fn comps(&self) -> &[Vec<Complex64>] {
        &self.comps
    }

    pub fn into_comps(self) -> Vec<Vec<Complex64>> {
        self.comps
    }

    /// Single component as a scalar field.
    pub fn component(&self, c: usize) -> SpectralField {
        Self { grid: Arc::clone(&self.grid), comps: vec![self.comps[c].clone()] }
    }

    /// Stacks scalar fields into a vector field.
    pub fn stack(parts: &[SpectralField]) -> Result<Self> {
        let grid = parts
            .first()
            .map(|p| Arc::clone(&p.grid))
            .ok_or_else(|| Error::ShapeMismatch("cannot stack zero fields".into()))?;
        let mut comps = Vec::new();
        for p in parts {
            p.check_grid(&grid)?;
            comps.extend(p.comps.iter().cloned());
        }
        Ok(Self { grid, comps })
    }

    pub fn check_grid(&self, grid: &TorusGrid) -> Result<()> {
        if *self.grid != *grid {
            return Err(Error::ShapeMismatch(format!("fields live on different grids: {:?} vs {:?}", self.grid, grid)));
        }
        Ok(())
    }

    pub fn check_same_shape(&self, other: &SpectralField) -> Result<()> {
        self.check_grid(&other.grid)?;
        if self.ncomp() != other.ncomp() {
            return Err(Error::ShapeMismatch(format!(
                "component count {} vs {}",
                self.ncomp(),
                other.ncomp()
            )));
        }
        Ok(())
    }

    pub fn scale(&mut self, a: f64) {
        for c in &mut self.comps {
            c.iter_mut().for_each(|z| *z *= a);
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &SpectralField) {
        debug_assert_eq!(self.ncomp(), other.ncomp());
        for (x, y) in self.comps.iter_mut().zip(&other.comps) {
            x.iter_mut().zip(y).for_each(|(x, y)| *x += y * a);
        }
    }

    pub fn add(&self, other: &SpectralField) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &SpectralField) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Applies a real per-mode multiplier to every component.
    pub fn map_modes<F: Fn(usize) -> f64>(&self, m: F) -> Self {
        let mut out = self.clone();
        for c in &mut out.comps {
            for (idx, z) in c.iter_mut().enumerate() {
                *z *= m(idx);
            }
        }
        out
    }

    /// Mean value of each component (the `k = 0` coefficient).
    pub fn mean(&self) -> Vec<f64> {
        self.comps.iter().map(|c| c[0].re).collect()
    }

    /// Copy with the `k = 0` mode removed.
    pub fn mean_free(&self) -> Self {
        let mut out = self.clone();
        for c in &mut out.comps {
            c[0] = Complex64::default();
        }
        out
    }

    /// Euclidean norm of the raw coefficient vector.
    pub fn coeff_norm(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0f64, |m, z| m.max(z.norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().flat_map(|c| c.iter()).all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Largest violation of `f̂(-k) = conj(f̂(k))`.
    pub fn hermitian_defect(&self) -> f64 {
        let g = &self.grid;
        self.comps
            .iter()
            .flat_map(|c| (0..g.len()).map(move |i| (c[i] - c[g.mirror(i)].conj()).norm()))
            .fold(0.0, f64::max)
    }

    /// Largest coefficient-wise difference to another field.
    pub fn max_diff(&self, other: &SpectralField) -> f64 {
        self.comps
            .iter()
            .zip(&other.comps)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).norm()))
            .fold(0.0, f64::max)
    }
}
