//! Quadrature over uniformly sampled time series.

/// Composite trapezoid rule.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => h * (values[1..n - 1].iter().sum::<f64>() + 0.5 * (values[0] + values[n - 1])),
    }
}

/// Running integral `∫_0^{t_j} f` at every sample, fourth-order accurate.
///
/// Uses the Gregory end corrections of the trapezoid rule (up to second
/// differences); the first interval uses the four-point rule
/// `h(9f₀ + 19f₁ − 5f₂ + f₃)/24`. Falls back to lower order with fewer than
/// four samples.
pub fn cumulative_integral(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    if n == 2 {
        out[1] = 0.5 * h * (values[0] + values[1]);
        return out;
    }
    let f = values;
    out[1] = if n >= 4 {
        h * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]) / 24.0
    } else {
        h * (5.0 * f[0] + 8.0 * f[1] - f[2]) / 12.0
    };
    let mut partial = 0.5 * f[0];
    let d1_left = f[1] - f[0];
    let d2_left = f[2] - 2.0 * f[1] + f[0];
    for j in 1..n {
        if j >= 2 {
            let trap = partial + 0.5 * f[j];
            let d1_right = f[j] - f[j - 1];
            let d2_right = f[j] - 2.0 * f[j - 1] + f[j - 2];
            out[j] = h * (trap - (d1_right - d1_left) / 12.0 - (d2_right + d2_left) / 24.0);
        }
        partial += f[j];
    }
    out
}

/// `(∫ |g|^p dt)^{1/p}` over a uniformly sampled series (trapezoid rule);
/// `p = ∞` gives the maximum.
pub fn time_lp(values: &[f64], p: f64, h: f64) -> f64 {
    if p.is_infinite() {
        return values.iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    let pw: Vec<f64> = values.iter().map(|v| v.abs().powf(p)).collect();
    trapezoid(&pw, h).powf(1.0 / p)
}

/// Gauss-Legendre nodes and weights on `[a, b]`, by Newton iteration on the
/// three-term recurrence.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = mid - half * z;
        x[n - 1 - i] = mid + half * z;
        w[i] = half * wi;
        w[n - 1 - i] = half * wi;
    }
    (x, w)
}
