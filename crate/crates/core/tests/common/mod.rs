//! Brute-force oracles: direct trigonometric sums in space and direct sums
//! in time, no FFTs and no use of the library's transforms or weights.

#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;

use acns::SpectralField;

/// Lattice bookkeeping rebuilt from `(dim, n, L)` alone.
#[derive(Clone, Copy, Debug)]
pub struct Lattice {
    pub dim: usize,
    pub n: usize,
    pub length: f64,
}

impl Lattice {
    pub fn of(f: &SpectralField) -> Self {
        let g = f.grid();
        Self { dim: g.dim(), n: g.n(), length: g.length() }
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    fn digits(&self, mut idx: usize) -> [usize; 3] {
        let mut out = [0; 3];
        for a in (0..self.dim).rev() {
            out[a] = idx % self.n;
            idx /= self.n;
        }
        out
    }

    pub fn signed(&self, idx: usize) -> [i64; 3] {
        let d = self.digits(idx);
        let mut out = [0; 3];
        for a in 0..self.dim {
            let j = d[a] as i64;
            out[a] = if 2 * j > self.n as i64 { j - self.n as i64 } else { j };
        }
        out
    }

    pub fn wave(&self, idx: usize) -> [f64; 3] {
        let s = self.signed(idx);
        let c = 2.0 * PI / self.length;
        [s[0] as f64 * c, s[1] as f64 * c, s[2] as f64 * c]
    }

    pub fn xi2(&self, idx: usize) -> f64 {
        self.wave(idx).iter().map(|k| k * k).sum()
    }

    pub fn point(&self, idx: usize) -> [f64; 3] {
        let d = self.digits(idx);
        let h = self.length / self.n as f64;
        [d[0] as f64 * h, d[1] as f64 * h, d[2] as f64 * h]
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    pub fn cell(&self) -> f64 {
        self.volume() / self.len() as f64
    }

    /// Modes outside the two-thirds band.
    pub fn truncated(&self, idx: usize) -> bool {
        let s = self.signed(idx);
        (0..self.dim).any(|a| 3 * s[a].unsigned_abs() as usize > self.n)
    }

    fn phase(&self, k: usize, x: usize) -> Complex64 {
        let kv = self.wave(k);
        let xv = self.point(x);
        let arg: f64 = (0..self.dim).map(|a| kv[a] * xv[a]).sum();
        Complex64::from_polar(1.0, arg)
    }

    /// `Σ_k ĉ_k e^{ik·x}` at every collocation point.
    pub fn synth(&self, coeffs: &[Complex64]) -> Vec<f64> {
        (0..self.len())
            .map(|x| (0..self.len()).map(|k| coeffs[k] * self.phase(k, x)).sum::<Complex64>().re)
            .collect()
    }

    /// `ĉ_k = N^{−d} Σ_x f(x) e^{−ik·x}`.
    pub fn analyse(&self, values: &[f64]) -> Vec<Complex64> {
        let inv = 1.0 / self.len() as f64;
        (0..self.len())
            .map(|k| (0..self.len()).map(|x| values[x] * self.phase(k, x).conj()).sum::<Complex64>() * inv)
            .collect()
    }

    /// Physical values of every component of a field.
    pub fn physical(&self, f: &SpectralField) -> Vec<Vec<f64>> {
        f.comps().iter().map(|c| self.synth(c)).collect()
    }

    /// `∂_a` of a field given by coefficients, evaluated physically.
    pub fn derivative(&self, coeffs: &[Complex64], a: usize) -> Vec<f64> {
        let d: Vec<Complex64> = (0..self.len())
            .map(|k| Complex64::new(0.0, self.wave(k)[a]) * coeffs[k])
            .collect();
        self.synth(&d)
    }

    /// `(Σ_x |v(x)|^p · cell)^{1/p}` from per-component point values.
    pub fn space_lp(&self, comps: &[Vec<f64>], p: f64) -> f64 {
        let mut acc = 0.0;
        let mut max: f64 = 0.0;
        for x in 0..self.len() {
            let m = comps.iter().map(|c| c[x] * c[x]).sum::<f64>().sqrt();
            max = max.max(m);
            acc += m.powf(p);
        }
        if p.is_infinite() {
            max
        } else {
            (acc * self.cell()).powf(1.0 / p)
        }
    }

    /// Advection `(u·∇)u + ½(div u)u` evaluated pointwise, then cut to the
    /// two-thirds band.
    pub fn nonlinear(&self, u: &SpectralField) -> Vec<Vec<Complex64>> {
        let (adv, stab) = self.quadratic(u);
        (0..self.dim)
            .map(|c| {
                let vals: Vec<f64> = (0..self.len()).map(|x| adv[c][x] + 0.5 * stab[c][x]).collect();
                let mut co = self.analyse(&vals);
                for (k, z) in co.iter_mut().enumerate() {
                    if self.truncated(k) {
                        *z = Complex64::default();
                    }
                }
                co
            })
            .collect()
    }

    /// Pointwise `(u·∇)u` and `(div u)u`.
    pub fn quadratic(&self, u: &SpectralField) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let d = self.dim;
        let up: Vec<Vec<f64>> = self.physical(u);
        let grad: Vec<Vec<Vec<f64>>> = (0..d).map(|c| (0..d).map(|a| self.derivative(u.comp(c), a)).collect()).collect();
        let len = self.len();
        let div: Vec<f64> = (0..len).map(|x| (0..d).map(|a| grad[a][a][x]).sum()).collect();
        let adv = (0..d)
            .map(|c| (0..len).map(|x| (0..d).map(|a| up[a][x] * grad[c][a][x]).sum()).collect())
            .collect();
        let stab = (0..d).map(|c| (0..len).map(|x| div[x] * up[c][x]).collect()).collect();
        (adv, stab)
    }
}

/// `(∫|g|^p dt)^{1/p}` by the trapezoid rule written out; `∞` is the max.
pub fn time_lp(values: &[f64], p: f64, h: f64) -> f64 {
    if p.is_infinite() {
        return values.iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    let n = values.len();
    let mut acc = 0.0;
    for j in 0..n {
        let w = if j == 0 || j + 1 == n { 0.5 } else { 1.0 };
        acc += w * values[j].abs().powf(p);
    }
    (acc * h).powf(1.0 / p)
}

/// Signed time frequency of DFT slot `m` for `total` samples of stride `h`.
pub fn time_freq(m: usize, total: usize, h: f64) -> f64 {
    let s = if 2 * m <= total { m as f64 } else { m as f64 - total as f64 };
    s / (total as f64 * h)
}

/// Space-time coefficients `h Σ_j ĉ_j(ξ) e^{−2πi k t_j}` of a series given as
/// per-sample spatial coefficients (component-major inside each sample).
pub fn spacetime_coeffs(series: &[Vec<Vec<Complex64>>], t_start: f64, h: f64) -> Vec<Vec<Vec<Complex64>>> {
    let total = series.len();
    let ncomp = series[0].len();
    let modes = series[0][0].len();
    (0..total)
        .map(|m| {
            let k = time_freq(m, total, h);
            let ph: Vec<Complex64> = (0..total)
                .map(|j| Complex64::from_polar(h, -2.0 * PI * k * (t_start + j as f64 * h)))
                .collect();
            (0..ncomp)
                .map(|c| (0..modes).map(|i| (0..total).map(|j| series[j][c][i] * ph[j]).sum()).collect())
                .collect()
        })
        .collect()
}

/// `(Σ_m Σ_ξ w(m, k_m, |ξ|²) |ṽ|² |𝕋^d| Δk)^{1/2}`.
pub fn weighted<W: Fn(usize, f64, f64) -> f64>(lat: &Lattice, st: &[Vec<Vec<Complex64>>], h: f64, w: W) -> f64 {
    let total = st.len();
    let dk = 1.0 / (total as f64 * h);
    let mut acc = 0.0;
    for (m, comps) in st.iter().enumerate() {
        let k = time_freq(m, total, h);
        for i in 0..lat.len() {
            let mag: f64 = comps.iter().map(|c| c[i].norm_sqr()).sum();
            if mag > 0.0 {
                acc += w(m, k, lat.xi2(i)) * mag;
            }
        }
    }
    (acc * lat.volume() * dk).sqrt()
}

/// `H^γ(H^s)` weight with the homogeneous variants; zero frequencies of a
/// homogeneous factor get weight `0` (their coefficients are required to
/// vanish whenever the exponent is negative).
pub fn sobolev_weight(gamma: f64, s: f64, homog_t: bool, homog_x: bool) -> impl Fn(usize, f64, f64) -> f64 {
    move |_, k, xi2| {
        let wt = if homog_t {
            if k == 0.0 {
                if gamma == 0.0 { 1.0 } else { 0.0 }
            } else {
                k.abs().powf(2.0 * gamma)
            }
        } else {
            (1.0 + k.abs()).powf(2.0 * gamma)
        };
        let wx = if homog_x {
            if xi2 == 0.0 {
                if s == 0.0 { 1.0 } else { 0.0 }
            } else {
                xi2.powf(s)
            }
        } else {
            (1.0 + xi2).powf(s)
        };
        wt * wx
    }
}

/// Smooth plateau: `1` on `[0,T]`, vanishing at `−1` and `T+1`.
pub fn plateau(t: f64, t_end: f64) -> f64 {
    let step = |x: f64| -> f64 {
        if x <= 0.0 {
            0.0
        } else if x >= 1.0 {
            1.0
        } else {
            let a = (-1.0 / x).exp();
            let b = (-1.0 / (1.0 - x)).exp();
            a / (a + b)
        }
    };
    if t < 0.0 {
        step(t + 1.0)
    } else if t <= t_end {
        1.0
    } else {
        step(t_end + 1.0 - t)
    }
}

/// Extends per-sample data to `[−1, T+1)` with stride `h`: ramp `(1+t)·first`
/// before 0, the samples, then the last one held, all times the plateau.
/// `first` is the value ramped in (not necessarily `recorded[0]`).
pub fn extend_samples<T: Clone>(
    first: &T,
    recorded: &[T],
    h: f64,
    scale: impl Fn(&T, f64) -> T,
) -> (Vec<f64>, Vec<T>) {
    let per_unit = (1.0 / h).round() as usize;
    let t_end = (recorded.len() - 1) as f64 * h;
    let total = 2 * per_unit + recorded.len() - 1;
    let mut times = Vec::with_capacity(total);
    let mut out = Vec::with_capacity(total);
    for j in 0..total {
        let t = -1.0 + j as f64 * h;
        let phi = plateau(t, t_end);
        times.push(t);
        out.push(if j < per_unit {
            scale(first, phi * (1.0 + t))
        } else if j < per_unit + recorded.len() {
            recorded[j - per_unit].clone()
        } else {
            scale(recorded.last().unwrap(), phi)
        });
    }
    (times, out)
}

pub fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}
