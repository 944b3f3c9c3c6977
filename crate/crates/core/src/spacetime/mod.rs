//! Space-time analysis of recorded runs.
//!
//! A trajectory on `[0,T]` is extended to the window `[−1, T+1]`: a linear
//! ramp `(t+1)u₀` before `0`, the recorded samples on `[0,T]`, the final
//! state held on `(T, T+1)`, all multiplied by a smooth plateau `φ` that is
//! `1` on `[0,T]` and vanishes at both window ends. Time-fractional norms are
//! weighted sums over the time DFT of the extended series, with frequency
//! spacing `1/(T+2)`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::ac::Trajectory;
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::TorusGrid;
use crate::ops::MEAN_TOLERANCE;

pub mod exponents;
pub mod monitors;

pub use exponents::{exponent_relations, exponent_relations_exact};
pub use monitors::*;

/// `e^{−1/x}` for `x > 0`, else `0`.
fn psi(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

fn smoothstep(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let a = psi(x);
    a / (a + psi(1.0 - x))
}

fn smoothstep_derivative(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    let (a, b) = (psi(x), psi(1.0 - x));
    let (da, db) = (a / (x * x), b / ((1.0 - x) * (1.0 - x)));
    (da * b + a * db) / ((a + b) * (a + b))
}

/// Smooth plateau on `(−1, T+1)`, identically `1` on `[0, T]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cutoff {
    pub t_end: f64,
}

impl Cutoff {
    pub fn value(&self, t: f64) -> f64 {
        if t < 0.0 {
            smoothstep(t + 1.0)
        } else if t <= self.t_end {
            1.0
        } else {
            smoothstep(self.t_end + 1.0 - t)
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        if t < 0.0 {
            smoothstep_derivative(t + 1.0)
        } else if t <= self.t_end {
            0.0
        } else {
            -smoothstep_derivative(self.t_end + 1.0 - t)
        }
    }
}

/// Uniformly sampled field-valued time series.
#[derive(Clone, Debug)]
pub struct FieldSeries {
    pub t_start: f64,
    pub h: f64,
    pub samples: Vec<SpectralField>,
}

impl FieldSeries {
    pub fn new(t_start: f64, h: f64, samples: Vec<SpectralField>) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty series".into()))?;
        for s in &samples {
            first.check_same_shape(s)?;
        }
        Ok(Self { t_start, h, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        self.samples[0].grid()
    }

    pub fn ncomp(&self) -> usize {
        self.samples[0].ncomp()
    }

    pub fn time(&self, j: usize) -> f64 {
        self.t_start + j as f64 * self.h
    }

    pub fn map<F: Fn(usize, &SpectralField) -> Result<SpectralField>>(&self, f: F) -> Result<Self> {
        let samples = self.samples.iter().enumerate().map(|(j, s)| f(j, s)).collect::<Result<_>>()?;
        Self::new(self.t_start, self.h, samples)
    }

    pub fn mean_free(&self) -> Self {
        Self { t_start: self.t_start, h: self.h, samples: self.samples.iter().map(|s| s.mean_free()).collect() }
    }
}

/// Where a window time falls relative to the recorded interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    /// `t < 0`: ramp `(t+1)·(value at 0)`.
    Ramp,
    /// Recorded sample index.
    Recorded(usize),
    /// `t > T`: final value held.
    Hold,
}

/// A trajectory extended to `[−1, T+1]`, sampled at the recording stride.
///
/// Sample `j` sits at `t_j = −1 + j h`, `j = 0..M` with `M h = T + 2`; the
/// right window end is the periodic image of the left one. Both `u` and `p`
/// already include the factor `φ`.
#[derive(Clone, Debug)]
pub struct ExtendedTrajectory {
    pub base: Arc<Trajectory>,
    pub cutoff: Cutoff,
    pub h: f64,
    pub times: Vec<f64>,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    pub regions: Vec<Region>,
    pub u0: SpectralField,
    pub p0: SpectralField,
    pub u: FieldSeries,
    pub p: FieldSeries,
}

impl ExtendedTrajectory {
    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.base.grid
    }

    pub fn eps(&self) -> f64 {
        self.base.eps
    }

    pub fn t_end(&self) -> f64 {
        self.cutoff.t_end
    }

    pub fn window_length(&self) -> f64 {
        self.t_end() + 2.0
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Extends any per-sample quantity with the same recipe: `base0` is the
    /// value ramped on `[−1, 0]`, `recorded[i]` the value at recorded sample
    /// `i`; the result includes `φ`.
    pub fn extend(&self, base0: &SpectralField, recorded: &[SpectralField]) -> Result<FieldSeries> {
        if recorded.len() != self.base.len() {
            return Err(Error::SizeMismatch { expected: self.base.len(), found: recorded.len() });
        }
        let last = recorded.last().expect("nonempty");
        let samples = self
            .regions
            .iter()
            .enumerate()
            .map(|(j, r)| match r {
                Region::Ramp => base0.scaled(self.phi[j] * (self.times[j] + 1.0)),
                Region::Recorded(i) => recorded[*i].clone(),
                Region::Hold => last.scaled(self.phi[j]),
            })
            .collect();
        FieldSeries::new(self.times[0], self.h, samples)
    }
}

/// Builds the extension of `traj` (which must start at `t = 0`), ramping
/// `u0` and the initial recorded pressure on `[−1, 0]`.
pub fn extend_trajectory(traj: &Arc<Trajectory>, u0: &SpectralField) -> Result<ExtendedTrajectory> {
    if traj.t0().abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!("trajectory must start at 0, starts at {}", traj.t0())));
    }
    u0.check_same_shape(&traj.samples[0].u)?;
    let h = traj.dt_rec;
    let t_end = traj.t_end();
    if traj.len() < 2 {
        return Err(Error::InvalidParameter("extension needs at least two recorded samples".into()));
    }
    let per_unit = crate::ac::whole_ratio(1.0, h, "unit padding")?;
    let recorded = traj.len() - 1;
    let m = 2 * per_unit + recorded;
    let cutoff = Cutoff { t_end };
    let times: Vec<f64> = (0..m)
        .map(|j| {
            if j < per_unit {
                -1.0 + j as f64 * h
            } else if j <= per_unit + recorded {
                traj.samples[j - per_unit].t
            } else {
                t_end + (j - per_unit - recorded) as f64 * h
            }
        })
        .collect();
    let regions: Vec<Region> = (0..m)
        .map(|j| {
            if j < per_unit {
                Region::Ramp
            } else if j <= per_unit + recorded {
                Region::Recorded(j - per_unit)
            } else {
                Region::Hold
            }
        })
        .collect();
    let phi: Vec<f64> = times.iter().map(|&t| cutoff.value(t)).collect();
    let dphi: Vec<f64> = times.iter().map(|&t| cutoff.derivative(t)).collect();
    let p0 = traj.samples[0].p.clone();
    let mut ext = ExtendedTrajectory {
        base: Arc::clone(traj),
        cutoff,
        h,
        times,
        phi,
        dphi,
        regions,
        u0: u0.clone(),
        p0: p0.clone(),
        u: FieldSeries { t_start: -1.0, h, samples: Vec::new() },
        p: FieldSeries { t_start: -1.0, h, samples: Vec::new() },
    };
    let us: Vec<SpectralField> = traj.samples.iter().map(|s| s.u.clone()).collect();
    let ps: Vec<SpectralField> = traj.samples.iter().map(|s| s.p.clone()).collect();
    ext.u = ext.extend(u0, &us)?;
    ext.p = ext.extend(&p0, &ps)?;
    Ok(ext)
}

/// Time-DFT of a series: per frequency `k_m = m/(Mh)` (signed FFT order)
/// the field `ṽ(k_m) = h Σ_j v_j e^{−2πi k_m t_j}`.
#[derive(Clone, Debug)]
pub struct ModalSeries {
    pub freqs: Vec<f64>,
    pub dk: f64,
    pub coeffs: Vec<SpectralField>,
    /// Index of the unpaired Nyquist frequency, if the sample count is even.
    pub nyquist: Option<usize>,
    t_start: f64,
    h: f64,
}

impl ModalSeries {
    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// Multiplies frequency `m` by `f(k_m)`.
    pub fn map_freq<F: Fn(f64) -> Complex64>(&self, f: F) -> Self {
        let mut out = self.clone();
        for (m, c) in out.coeffs.iter_mut().enumerate() {
            let z = f(self.freqs[m]);
            for comp in 0..c.ncomp() {
                c.comp_mut(comp).iter_mut().for_each(|v| *v *= z);
            }
        }
        out
    }

    /// `∂ₜ` as multiplication by `2πik`, Nyquist coefficient dropped.
    pub fn time_derivative(&self) -> Self {
        let mut out = self.map_freq(|k| Complex64::new(0.0, 2.0 * PI * k));
        if let Some(ny) = self.nyquist {
            out.coeffs[ny].scale(0.0);
        }
        out
    }

    /// Applies a per-frequency field map (e.g. a spatial operator).
    pub fn map_fields<F: Fn(&SpectralField) -> Result<SpectralField>>(&self, f: F) -> Result<Self> {
        let coeffs = self.coeffs.iter().map(f).collect::<Result<Vec<_>>>()?;
        Ok(Self { coeffs, ..self.clone() })
    }
}

fn dft_core<'a, G: Fn(usize, usize) -> &'a [Complex64]>(
    grid: &Arc<TorusGrid>,
    ncomp: usize,
    m: usize,
    get: G,
    inverse: bool,
) -> Vec<Vec<Vec<Complex64>>> {
    let mut planner = FftPlanner::new();
    let fft = if inverse { planner.plan_fft_inverse(m) } else { planner.plan_fft_forward(m) };
    let len = grid.len();
    let mut out = vec![vec![vec![Complex64::default(); len]; ncomp]; m];
    let mut buf = vec![Complex64::default(); m];
    for c in 0..ncomp {
        for i in 0..len {
            for (j, b) in buf.iter_mut().enumerate() {
                *b = get(j, c)[i];
            }
            fft.process(&mut buf);
            for (mm, b) in buf.iter().enumerate() {
                out[mm][c][i] = *b;
            }
        }
    }
    out
}

pub fn time_dft(series: &FieldSeries) -> Result<ModalSeries> {
    let m = series.len();
    let grid = series.grid().clone();
    let ncomp = series.ncomp();
    let h = series.h;
    let window = m as f64 * h;
    let raw = dft_core(&grid, ncomp, m, |j, c| series.samples[j].comp(c), false);
    let freqs: Vec<f64> = (0..m)
        .map(|j| {
            let s = if j <= m / 2 { j as f64 } else { j as f64 - m as f64 };
            s / window
        })
        .collect();
    let coeffs = raw
        .into_iter()
        .enumerate()
        .map(|(mm, comps)| {
            let phase = Complex64::from_polar(h, -2.0 * PI * freqs[mm] * series.t_start);
            let comps = comps.into_iter().map(|c| c.into_iter().map(|z| z * phase).collect()).collect();
            SpectralField::from_coeffs(&grid, comps)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ModalSeries {
        freqs,
        dk: 1.0 / window,
        coeffs,
        nyquist: if m % 2 == 0 { Some(m / 2) } else { None },
        t_start: series.t_start,
        h,
    })
}

/// Inverse of [`time_dft`].
pub fn inverse_time_dft(modal: &ModalSeries) -> Result<FieldSeries> {
    let m = modal.len();
    let grid = modal.coeffs[0].grid().clone();
    let ncomp = modal.coeffs[0].ncomp();
    let scaled: Vec<SpectralField> = modal
        .coeffs
        .iter()
        .enumerate()
        .map(|(mm, c)| {
            let phase = Complex64::from_polar(1.0 / (modal.h * m as f64), 2.0 * PI * modal.freqs[mm] * modal.t_start);
            let comps = c.comps().iter().map(|v| v.iter().map(|z| z * phase).collect()).collect();
            SpectralField::from_coeffs(&grid, comps)
        })
        .collect::<Result<_>>()?;
    let raw = dft_core(&grid, ncomp, m, |j, c| scaled[j].comp(c), true);
    let samples = raw.into_iter().map(|comps| SpectralField::from_coeffs(&grid, comps)).collect::<Result<_>>()?;
    FieldSeries::new(modal.t_start, modal.h, samples)
}

/// Indices of a space-time norm `H^γ_t(H^s_x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub gamma: f64,
    pub s: f64,
    /// Time weight `|k|^{2γ}` instead of `(1+|k|)^{2γ}`.
    pub homog_time: bool,
    /// Space weight `|ξ|^{2s}` instead of `(1+|ξ|²)^s`.
    pub homog_space: bool,
}

impl NormSpec {
    pub fn new(gamma: f64, s: f64, homog_time: bool, homog_space: bool) -> Self {
        Self { gamma, s, homog_time, homog_space }
    }

    fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.s.is_finite()) {
            return Err(Error::InvalidParameter("norm indices must be finite".into()));
        }
        Ok(())
    }

    fn time_weight(&self, k: f64) -> Option<f64> {
        let a = k.abs();
        if self.homog_time {
            if a == 0.0 {
                return if self.gamma == 0.0 {
                    Some(1.0)
                } else if self.gamma > 0.0 {
                    Some(0.0)
                } else {
                    None
                };
            }
            Some(a.powf(2.0 * self.gamma))
        } else {
            Some((1.0 + a).powf(2.0 * self.gamma))
        }
    }

    pub fn describe(&self) -> String {
        let t = if self.homog_time { "Hdot" } else { "H" };
        let x = if self.homog_space { "Hdot" } else { "H" };
        format!("{t}^{}({x}^{})", fmt_index(self.gamma), fmt_index(self.s))
    }
}

pub(crate) fn fmt_index(v: f64) -> String {
    let r = (v * 1e6).round() / 1e6;
    format!("{r}")
}

fn check_mean_free_modal(modal: &ModalSeries) -> Result<()> {
    let norm: f64 = modal.coeffs.iter().map(|c| c.coeff_norm().powi(2)).sum::<f64>().sqrt();
    for c in &modal.coeffs {
        for comp in c.comps() {
            if comp[0].norm() > MEAN_TOLERANCE * norm {
                return Err(Error::NegativePowerOfMeanMode { mean: comp[0].norm(), norm });
            }
        }
    }
    Ok(())
}

/// `(Σ_m Σ_ξ w(k_m, ξ) |ṽ(k_m, ξ)|² |𝕋^d| Δk)^{1/2}` for a general weight.
pub fn weighted_norm<W: Fn(f64, f64) -> f64>(modal: &ModalSeries, weight: W) -> f64 {
    let grid = modal.coeffs[0].grid();
    let vol = grid.volume();
    let mut acc = 0.0;
    for (m, c) in modal.coeffs.iter().enumerate() {
        let k = modal.freqs[m];
        for i in 0..grid.len() {
            let mag: f64 = c.comps().iter().map(|v| v[i].norm_sqr()).sum();
            if mag == 0.0 {
                continue;
            }
            acc += weight(k, grid.k2(i)) * mag;
        }
    }
    (acc * vol * modal.dk).sqrt()
}

/// Space-time norm of an already transformed series.
pub fn spacetime_norm_modal(modal: &ModalSeries, spec: &NormSpec) -> Result<f64> {
    spec.validate()?;
    if spec.homog_space && spec.s < 0.0 {
        check_mean_free_modal(modal)?;
    }
    if spec.homog_time && spec.gamma < 0.0 {
        if let Some(zero) = modal.freqs.iter().position(|k| *k == 0.0) {
            let c = &modal.coeffs[zero];
            if c.coeff_norm() > 0.0 {
                return Err(Error::InvalidParameter(
                    "negative homogeneous time index needs a vanishing zero-frequency coefficient".into(),
                ));
            }
        }
    }
    let space = |k2: f64| -> f64 {
        if spec.homog_space {
            if k2 == 0.0 {
                if spec.s == 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                k2.powf(spec.s)
            }
        } else {
            (1.0 + k2).powf(spec.s)
        }
    };
    Ok(weighted_norm(modal, |k, k2| spec.time_weight(k).unwrap_or(0.0) * space(k2)))
}

/// Space-time norm `(Σ_k w(k) ‖ṽ(k)‖²_{H^s} Δk)^{1/2}` of a sampled series.
///
/// On an extended trajectory this is an upper bound for the quotient norm on
/// `(0,T)`, which is an infimum over all extensions.
pub fn spacetime_norm(series: &FieldSeries, spec: &NormSpec) -> Result<f64> {
    spacetime_norm_modal(&time_dft(series)?, spec)
}

/// Joint space-time `H^m` norm with multiplier `(1 + |ξ|² + (2πk)²)^m`.
pub fn joint_sobolev_norm(series: &FieldSeries, m: f64) -> Result<f64> {
    let modal = time_dft(series)?;
    Ok(weighted_norm(&modal, |k, k2| (1.0 + k2 + (2.0 * PI * k).powi(2)).powf(m)))
}
