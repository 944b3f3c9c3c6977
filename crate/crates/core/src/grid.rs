//! Uniform collocation grid on the periodic torus and its wavenumber lattice.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Discretization of the torus `[0, L)^d` with `n` points per axis.
///
/// Coefficients and samples are stored in C row-major order with axis 0
/// varying slowest. Wavenumbers follow FFT ordering: index `j` maps to `j`
/// for `j <= n/2` and to `j - n` above.
pub struct TorusGrid {
    dim: usize,
    n: usize,
    length: f64,
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Wavevector per mode, Nyquist index counted as `+n/2`.
    wavevec: Vec<[f64; 3]>,
    /// Wavevector used by odd-order operators: Nyquist components set to 0
    /// so that derivatives keep the Hermitian symmetry of real fields.
    wavevec_odd: Vec<[f64; 3]>,
    k2: Vec<f64>,
    mask: Vec<bool>,
    mirror: Vec<usize>,
}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid")
            .field("dim", &self.dim)
            .field("n", &self.n)
            .field("length", &self.length)
            .finish()
    }
}

impl PartialEq for TorusGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.n == other.n && self.length == other.length
    }
}

impl TorusGrid {
    /// Grid with the default period `2π`, so wavenumbers are integers.
    pub fn new(dim: usize, n: usize) -> Result<Arc<Self>> {
        Self::with_length(dim, n, 2.0 * PI)
    }

    pub fn with_length(dim: usize, n: usize, length: f64) -> Result<Arc<Self>> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidGrid(format!("dim must be 2 or 3, got {dim}")));
        }
        if n < 8 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!("n must be even and >= 8, got {n}")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("period must be positive, got {length}")));
        }
        let len = n.pow(dim as u32);
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);

        let scale = 2.0 * PI / length;
        let signed = |j: usize| -> i64 {
            if j <= n / 2 {
                j as i64
            } else {
                j as i64 - n as i64
            }
        };
        let cutoff = n as f64 / 3.0;
        let mut wavevec = Vec::with_capacity(len);
        let mut wavevec_odd = Vec::with_capacity(len);
        let mut k2 = Vec::with_capacity(len);
        let mut mask = Vec::with_capacity(len);
        let mut mirror = Vec::with_capacity(len);
        for idx in 0..len {
            let ijk = Self::unflatten_with(idx, dim, n);
            let mut kv = [0.0; 3];
            let mut ko = [0.0; 3];
            let mut keep = true;
            let mut mirror_idx = 0usize;
            for a in 0..dim {
                let s = signed(ijk[a]);
                kv[a] = s as f64 * scale;
                ko[a] = if 2 * ijk[a] == n { 0.0 } else { kv[a] };
                if (s.unsigned_abs() as f64) > cutoff {
                    keep = false;
                }
                mirror_idx = mirror_idx * n + (n - ijk[a]) % n;
            }
            k2.push(kv.iter().map(|k| k * k).sum());
            wavevec.push(kv);
            wavevec_odd.push(ko);
            mask.push(keep);
            mirror.push(mirror_idx);
        }

        Ok(Arc::new(Self {
            dim,
            n,
            length,
            len,
            forward,
            inverse,
            wavevec,
            wavevec_odd,
            k2,
            mask,
            mirror,
        }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Number of modes (equivalently, of collocation points).
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Torus volume `L^d`.
    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    /// Quadrature weight of one collocation point.
    pub fn cell_volume(&self) -> f64 {
        self.volume() / self.len as f64
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn wavevector(&self, idx: usize) -> &[f64; 3] {
        &self.wavevec[idx]
    }

    pub fn wavevector_odd(&self, idx: usize) -> &[f64; 3] {
        &self.wavevec_odd[idx]
    }

    /// `|k|^2` of a mode.
    pub fn k2(&self, idx: usize) -> f64 {
        self.k2[idx]
    }

    /// `|k|^2` using the odd-operator wavevector.
    pub fn k2_odd(&self, idx: usize) -> f64 {
        self.wavevec_odd[idx].iter().map(|k| k * k).sum()
    }

    /// `true` if the mode survives the 2/3 truncation.
    pub fn retained(&self, idx: usize) -> bool {
        self.mask[idx]
    }

    pub fn dealias_mask(&self) -> &[bool] {
        &self.mask
    }

    /// Index of the mode `-k`.
    pub fn mirror(&self, idx: usize) -> usize {
        self.mirror[idx]
    }

    pub fn unflatten(&self, idx: usize) -> [usize; 3] {
        Self::unflatten_with(idx, self.dim, self.n)
    }

    fn unflatten_with(mut idx: usize, dim: usize, n: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        for a in (0..dim).rev() {
            out[a] = idx % n;
            idx /= n;
        }
        out
    }

    /// Physical coordinates of collocation point `idx`.
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let ijk = self.unflatten(idx);
        let h = self.spacing();
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = ijk[a] as f64 * h;
        }
        x
    }

    /// In-place multidimensional FFT (unnormalized) along every axis.
    pub(crate) fn fft_inplace(&self, data: &mut [Complex64], inverse: bool) {
        debug_assert_eq!(data.len(), self.len);
        let plan = if inverse { &self.inverse } else { &self.forward };
        let n = self.n;
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        // last axis is contiguous
        plan.process_with_scratch(data, &mut scratch);
        let mut line = vec![Complex64::default(); n];
        for axis in 0..self.dim - 1 {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            let block = stride * n;
            for start in (0..self.len).step_by(block) {
                for offset in 0..stride {
                    let base = start + offset;
                    for (j, v) in line.iter_mut().enumerate() {
                        *v = data[base + j * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (j, v) in line.iter().enumerate() {
                        data[base + j * stride] = *v;
                    }
                }
            }
        }
    }
}
