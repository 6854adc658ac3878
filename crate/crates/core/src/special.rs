//! Airy function of the first kind.
//!
//! Maclaurin series on `[-8, 2]`, a saddle-point integral above and the
//! Poincaré asymptotic expansion below.

use std::f64::consts::{FRAC_PI_4, PI};

const AI0: f64 = 0.355_028_053_887_817_2;
const AIP0: f64 = 0.258_819_403_792_806_8; // -Ai'(0)

/// Zeros of `Ai` bounding the first five lobes.
pub const AIRY_ZEROS: [f64; 5] = [
    -2.338_107_410_459_767,
    -4.087_949_444_130_971,
    -5.520_559_828_095_551,
    -6.786_708_090_071_759,
    -7.944_133_587_120_853,
];

pub fn airy_ai(x: f64) -> f64 {
    if x > 2.0 {
        saddle_integral(x)
    } else if x < -8.0 {
        asymptotic_negative(-x)
    } else {
        series(x)
    }
}

fn series(x: f64) -> f64 {
    let x3 = x * x * x;
    let mut f = 1.0;
    let mut g = x;
    let mut tf = 1.0;
    let mut tg = x;
    for k in 0..200 {
        let kf = k as f64;
        tf *= x3 / ((3.0 * kf + 2.0) * (3.0 * kf + 3.0));
        tg *= x3 / ((3.0 * kf + 3.0) * (3.0 * kf + 4.0));
        f += tf;
        g += tg;
        if tf.abs() < 1e-18 * f.abs().max(1.0) && tg.abs() < 1e-18 * g.abs().max(1.0) {
            break;
        }
    }
    AI0 * f - AIP0 * g
}

fn u_coefficients(count: usize) -> Vec<f64> {
    let mut u = vec![1.0; count];
    for k in 1..count {
        let kf = k as f64;
        u[k] = u[k - 1] * (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0)
            / ((2.0 * kf - 1.0) * 216.0 * kf);
    }
    u
}

// Ai(x) = e^{-ζ}/π ∫₀^∞ exp(-√x t²) cos(t³/3) dt after shifting the contour
// through the saddle. The integrand is even and smooth, so the trapezoid
// rule over the whole line converges geometrically.
fn saddle_integral(x: f64) -> f64 {
    let s = x.sqrt();
    let zeta = 2.0 / 3.0 * x * s;
    let h = (0.3 / s.sqrt()).min(0.05);
    let t_max = (40.0 / s).sqrt();
    let steps = (t_max / h).ceil() as usize;
    let mut sum = 0.5;
    for m in 1..=steps {
        let t = m as f64 * h;
        sum += (-s * t * t).exp() * (t * t * t / 3.0).cos();
    }
    (-zeta).exp() / PI * h * sum
}

fn asymptotic_negative(x: f64) -> f64 {
    let zeta = 2.0 / 3.0 * x.powf(1.5);
    let u = u_coefficients(24);
    let (mut even, mut odd) = (0.0, 0.0);
    let mut zk = 1.0;
    let mut last = f64::INFINITY;
    for (k, uk) in u.iter().enumerate() {
        let term = uk / zk;
        if term > last {
            break;
        }
        last = term;
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            even += sign * term;
        } else {
            odd += sign * term;
        }
        zk *= zeta;
    }
    let phase = zeta + FRAC_PI_4;
    (phase.sin() * even - phase.cos() * odd) / (PI.sqrt() * x.powf(0.25))
}
