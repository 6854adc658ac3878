//! Oracles shared by the integration tests. Nothing here calls into the
//! library's own special functions.
#![allow(dead_code)]

use statrs::function::gamma::gamma;

/// `Ai(x)` by RK4 integration of `y'' = x y` from the closed-form values at
/// the origin. Stable towards negative `x`; for `x ≤ 3` the growing `Bi`
/// contamination stays below 1e-10.
pub fn airy_ode(x: f64) -> f64 {
    let mut y = 1.0 / (3f64.powf(2.0 / 3.0) * gamma(2.0 / 3.0));
    let mut dy = -1.0 / (3f64.powf(1.0 / 3.0) * gamma(1.0 / 3.0));
    if x == 0.0 {
        return y;
    }
    let steps = (x.abs() / 5e-4).ceil() as usize;
    let h = x / steps as f64;
    let mut t = 0.0;
    for _ in 0..steps {
        let f = |t: f64, y: f64, dy: f64| (dy, t * y);
        let (k1y, k1d) = f(t, y, dy);
        let (k2y, k2d) = f(t + h / 2.0, y + h / 2.0 * k1y, dy + h / 2.0 * k1d);
        let (k3y, k3d) = f(t + h / 2.0, y + h / 2.0 * k2y, dy + h / 2.0 * k2d);
        let (k4y, k4d) = f(t + h, y + h * k3y, dy + h * k3d);
        y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
        dy += h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
        t += h;
    }
    y
}

/// `Ai` tabulated on `[lo, hi]` (`lo < 0 < hi`) by one RK4 sweep each way from
/// the origin, interpolated linearly. Spacing 5e-4 keeps the interpolation
/// error under 1e-7.
pub struct AiryTable {
    lo: f64,
    h: f64,
    values: Vec<f64>,
}

impl AiryTable {
    pub fn new(lo: f64, hi: f64) -> Self {
        let h = 5e-4;
        let n = ((hi - lo) / h).ceil() as usize + 1;
        let i0 = (-lo / h).round() as usize;
        let mut out = vec![0.0; n];
        let y0 = airy_ode(0.0);
        let dy0 = -1.0 / (3f64.powf(1.0 / 3.0) * gamma(1.0 / 3.0));
        for dir in [-1.0, 1.0] {
            let (mut y, mut dy, mut t) = (y0, dy0, 0.0);
            let step = dir * h;
            let mut i = i0 as isize;
            out[i0] = y0;
            loop {
                let f = |t: f64, y: f64, dy: f64| (dy, t * y);
                let (k1y, k1d) = f(t, y, dy);
                let (k2y, k2d) = f(t + step / 2.0, y + step / 2.0 * k1y, dy + step / 2.0 * k1d);
                let (k3y, k3d) = f(t + step / 2.0, y + step / 2.0 * k2y, dy + step / 2.0 * k2d);
                let (k4y, k4d) = f(t + step, y + step * k3y, dy + step * k3d);
                y += step / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
                dy += step / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
                t += step;
                i += dir as isize;
                if i < 0 || i as usize >= n {
                    break;
                }
                out[i as usize] = y;
            }
        }
        Self { lo, h, values: out }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let s = (x - self.lo) / self.h;
        let i = (s.floor() as usize).min(self.values.len() - 2);
        let f = s - i as f64;
        self.values[i] * (1.0 - f) + self.values[i + 1] * f
    }
}

/// First five zeros of `Ai`, for the main-lobe window.
pub const FIFTH_ZERO: f64 = -7.944_133_587_120_853;

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}
