//! Detector apertures, conditional coincidence scans with Poisson counting,
//! and weighted Gaussian peak fitting.

use std::io::Write;

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::biphoton::{conditional_slice, Arm, CoincidenceMap, ConditionalSlice};
use crate::error::{Error, Result};
use crate::grid::{plan, Domain};

/// Generator used for count sampling; recorded in every scan's metadata.
pub const RNG_ALGORITHM: &str = "ChaCha20Rng seed_from_u64 + rand_distr::Poisson";

/// Minimum samples per aperture width accepted by [`blur_slice`].
pub const MIN_SAMPLES_PER_SIGMA: f64 = 2.0;

const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub aperture_sigma: f64,
    pub efficiency: f64,
}

impl DetectorSpec {
    pub fn new(aperture_sigma: f64, efficiency: f64) -> Result<Self> {
        let spec = Self {
            aperture_sigma,
            efficiency,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Point detector with unit efficiency.
    pub fn ideal() -> Self {
        Self {
            aperture_sigma: 0.0,
            efficiency: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.aperture_sigma >= 0.0) || !self.aperture_sigma.is_finite() {
            return Err(Error::param("aperture_sigma", "must be finite and >= 0"));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::param("efficiency", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Convolve samples of pitch `pitch` with a unit-area Gaussian of width
/// `sigma`. The total is preserved exactly.
pub fn blur_slice(values: &[f64], pitch: f64, sigma: f64) -> Result<Vec<f64>> {
    if sigma == 0.0 {
        return Ok(values.to_vec());
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::param("aperture_sigma", "must be finite and >= 0"));
    }
    if sigma < MIN_SAMPLES_PER_SIGMA * pitch {
        return Err(Error::Sampling(format!(
            "aperture sigma {sigma:.3e} is under-resolved by pitch {pitch:.3e}"
        )));
    }
    let half = ((6.0 * sigma / pitch).ceil() as usize).min(values.len());
    let kernel: Vec<f64> = (0..=2 * half)
        .map(|m| {
            let d = (m as f64 - half as f64) * pitch / sigma;
            (-0.5 * d * d).exp()
        })
        .collect();
    let ksum: f64 = kernel.iter().sum();
    let n = values.len();
    let mut out = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate() {
        let lo = i.saturating_sub(half);
        let hi = (i + half).min(n - 1);
        *o = (lo..=hi)
            .map(|j| values[j] * kernel[j + half - i])
            .sum::<f64>()
            / ksum;
    }
    let before: f64 = values.iter().sum();
    let after: f64 = out.iter().sum();
    if after > 0.0 {
        out.iter_mut().for_each(|v| *v *= before / after);
    }
    Ok(out)
}

fn pitch(map: &CoincidenceMap, arm: Arm) -> f64 {
    let g = map.grid(arm);
    match map.domain(arm) {
        Domain::Position => g.dx(),
        Domain::Wavenumber => g.dq(),
    }
}

/// Blur a coincidence map with the signal and idler collection apertures.
pub fn blur_map(
    map: &CoincidenceMap,
    signal: &DetectorSpec,
    idler: &DetectorSpec,
) -> Result<CoincidenceMap> {
    signal.validate()?;
    idler.validate()?;
    let (n1, n2) = map.shape();
    let mut values = map.values().to_vec();
    if idler.aperture_sigma > 0.0 {
        let p = pitch(map, Arm::Idler);
        for row in values.chunks_mut(n2) {
            let b = blur_slice(row, p, idler.aperture_sigma)?;
            row.copy_from_slice(&b);
        }
    }
    if signal.aperture_sigma > 0.0 {
        let p = pitch(map, Arm::Signal);
        for j in 0..n2 {
            let col: Vec<f64> = (0..n1).map(|i| values[i * n2 + j]).collect();
            let b = blur_slice(&col, p, signal.aperture_sigma)?;
            for (i, v) in b.into_iter().enumerate() {
                values[i * n2 + j] = v;
            }
        }
    }
    CoincidenceMap::from_weights(
        [*map.grid(Arm::Signal), *map.grid(Arm::Idler)],
        [map.domain(Arm::Signal), map.domain(Arm::Idler)],
        values,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    Position,
    Momentum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    /// Scanned-detector positions, strictly increasing.
    pub positions: Vec<f64>,
    pub fixed_position: f64,
    pub integration_time: f64,
    pub mean_rate_at_peak: f64,
    pub rng_seed: u64,
}

impl ScanSpec {
    /// `points` equally spaced positions spanning `[center - span/2, center + span/2]`.
    pub fn uniform(
        center: f64,
        span: f64,
        points: usize,
        fixed_position: f64,
        integration_time: f64,
        mean_rate_at_peak: f64,
        rng_seed: u64,
    ) -> Result<Self> {
        if points < 2 || !(span > 0.0) {
            return Err(Error::param("scan", "need at least two points over a positive span"));
        }
        let step = span / (points - 1) as f64;
        let positions = (0..points).map(|i| center - 0.5 * span + i as f64 * step).collect();
        let spec = Self {
            positions,
            fixed_position,
            integration_time,
            mean_rate_at_peak,
            rng_seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.integration_time > 0.0) || !self.integration_time.is_finite() {
            return Err(Error::param("integration_time", "must be > 0"));
        }
        if !(self.mean_rate_at_peak >= 0.0) || !self.mean_rate_at_peak.is_finite() {
            return Err(Error::param("mean_rate_at_peak", "must be finite and >= 0"));
        }
        if self.positions.is_empty() {
            return Err(Error::param("positions", "empty scan"));
        }
        if self.positions.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("positions", "must be strictly increasing"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub uncertainty: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub amplitude: Estimate,
    pub center: Estimate,
    pub sigma: Estimate,
    pub offset: Estimate,
    pub chi2_reduced: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl GaussianFit {
    pub fn eval(&self, x: f64) -> f64 {
        gaussian(
            &Vector4::new(self.amplitude.value, self.center.value, self.sigma.value, self.offset.value),
            x,
        )
    }

    fn failed(p: Vector4<f64>, iterations: usize) -> Self {
        let est = |value| Estimate {
            value,
            uncertainty: f64::NAN,
        };
        Self {
            amplitude: est(p[0]),
            center: est(p[1]),
            sigma: est(p[2].abs()),
            offset: est(p[3]),
            chi2_reduced: f64::NAN,
            converged: false,
            iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanMetadata {
    pub basis: Basis,
    pub z: f64,
    pub seed: u64,
    pub rng: String,
    pub scanned_arm: Arm,
    pub fixed_position: f64,
    /// Fixed detector coordinate actually used after snapping to the grid.
    pub fixed_sample: f64,
    pub off_grid: bool,
    pub integration_time: f64,
    pub mean_rate_at_peak: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub positions: Vec<f64>,
    pub counts: Vec<u64>,
    pub count_errors: Vec<f64>,
    /// Noise-free rate × time at each position.
    pub expected: Vec<f64>,
    pub fit: GaussianFit,
    pub metadata: ScanMetadata,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    fit: &'a GaussianFit,
    metadata: &'a ScanMetadata,
}

impl ScanResult {
    /// CSV with header `position_m,counts,count_error`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "position_m,counts,count_error")?;
        for ((x, c), e) in self.positions.iter().zip(&self.counts).zip(&self.count_errors) {
            writeln!(w, "{x:e},{c},{e:e}")?;
        }
        Ok(())
    }

    /// JSON sidecar holding the fit and metadata.
    pub fn sidecar_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&Sidecar {
            fit: &self.fit,
            metadata: &self.metadata,
        })?)
    }

    /// Mean and variance of the raw counts as weights.
    pub fn moment_variance(&self) -> Result<(f64, f64)> {
        let w: Vec<f64> = self.counts.iter().map(|&c| c as f64).collect();
        crate::grid::moments(&self.positions, &w)
    }
}

/// Linear interpolation of a slice at `x`; zero outside the grid.
fn interpolate(slice: &ConditionalSlice, x: f64) -> f64 {
    let n = slice.values.len();
    let (x0, step) = (slice.coordinate(0), slice.coordinate(1) - slice.coordinate(0));
    let t = (x - x0) / step;
    if t < 0.0 || t > (n - 1) as f64 {
        return 0.0;
    }
    let i = (t.floor() as usize).min(n - 2);
    let f = t - i as f64;
    slice.values[i] * (1.0 - f) + slice.values[i + 1] * f
}

/// Scan the detector on `scanned_arm` with the partner fixed at
/// `spec.fixed_position`, drawing Poisson counts.
pub fn simulate_scan(
    map: &CoincidenceMap,
    scanned_arm: Arm,
    spec: &ScanSpec,
    signal: &DetectorSpec,
    idler: &DetectorSpec,
    basis: Basis,
    z: f64,
) -> Result<ScanResult> {
    spec.validate()?;
    let blurred = blur_map(map, signal, idler)?;
    let fixed_arm = scanned_arm.other();
    let slice = conditional_slice(&blurred, fixed_arm, spec.fixed_position)?;
    let peak = slice.values.iter().cloned().fold(0.0, f64::max);
    let scale = spec.mean_rate_at_peak * spec.integration_time * signal.efficiency * idler.efficiency
        / peak;
    let expected: Vec<f64> = spec
        .positions
        .iter()
        .map(|&x| interpolate(&slice, x) * scale)
        .collect();
    let mut rng = ChaCha20Rng::seed_from_u64(spec.rng_seed);
    let counts: Vec<u64> = expected
        .iter()
        .map(|&mu| {
            if mu > 0.0 {
                Poisson::new(mu).map(|d| d.sample(&mut rng) as u64).unwrap_or(0)
            } else {
                0
            }
        })
        .collect();
    let count_errors: Vec<f64> = counts.iter().map(|&c| (c.max(1) as f64).sqrt()).collect();
    let y: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let fit = fit_gaussian(&spec.positions, &y, &count_errors);
    let fixed_grid = blurred.grid(fixed_arm);
    let fixed_sample = match blurred.domain(fixed_arm) {
        Domain::Position => fixed_grid.x(slice.fixed_index),
        Domain::Wavenumber => fixed_grid.q(slice.fixed_index),
    };
    Ok(ScanResult {
        positions: spec.positions.clone(),
        counts,
        count_errors,
        expected,
        fit,
        metadata: ScanMetadata {
            basis,
            z,
            seed: spec.rng_seed,
            rng: RNG_ALGORITHM.to_string(),
            scanned_arm,
            fixed_position: spec.fixed_position,
            fixed_sample,
            off_grid: slice.off_grid,
            integration_time: spec.integration_time,
            mean_rate_at_peak: spec.mean_rate_at_peak,
        },
    })
}

fn gaussian(p: &Vector4<f64>, x: f64) -> f64 {
    let d = (x - p[1]) / p[2];
    p[0] * (-0.5 * d * d).exp() + p[3]
}

fn jacobian_row(p: &Vector4<f64>, x: f64) -> Vector4<f64> {
    let d = (x - p[1]) / p[2];
    let e = (-0.5 * d * d).exp();
    Vector4::new(e, p[0] * e * d / p[2], p[0] * e * d * d / p[2], 1.0)
}

/// Starting point: amplitude = max - min, center = argmax, sigma from the
/// half-maximum crossings, offset = min.
pub fn initial_guess(x: &[f64], y: &[f64]) -> [f64; 4] {
    let (imax, &ymax) = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let ymin = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let half = 0.5 * (ymax + ymin);
    let crossing = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut prev = imax;
        for i in range {
            if y[i] < half {
                let f = (y[prev] - half) / (y[prev] - y[i]);
                return Some(x[prev] + f * (x[i] - x[prev]));
            }
            prev = i;
        }
        None
    };
    let left = crossing(&mut (0..imax).rev()).unwrap_or(x[0]);
    let right = crossing(&mut (imax + 1..y.len())).unwrap_or(x[x.len() - 1]);
    let fwhm = (right - left).abs().max(f64::MIN_POSITIVE);
    [ymax - ymin, x[imax], fwhm / FWHM_PER_SIGMA, ymin]
}

const MAX_ITERATIONS: usize = 200;

/// Weighted Levenberg-Marquardt fit of `A exp(-(x-x0)²/2s²) + B`.
///
/// Degenerate input (fewer than five points, constant counts, singular
/// normal matrix, no convergence) yields `converged = false`.
pub fn fit_gaussian(x: &[f64], y: &[f64], errors: &[f64]) -> GaussianFit {
    fit_gaussian_from(x, y, errors, None)
}

/// As [`fit_gaussian`], starting from `start` when given.
pub fn fit_gaussian_from(
    x: &[f64],
    y: &[f64],
    errors: &[f64],
    start: Option<[f64; 4]>,
) -> GaussianFit {
    let n = x.len();
    if n < 5 || y.len() != n || errors.len() != n {
        return GaussianFit::failed(Vector4::from_element(f64::NAN), 0);
    }
    let ymin = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let ymax = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(ymax > ymin) || errors.iter().any(|e| !(*e > 0.0)) {
        return GaussianFit::failed(Vector4::from_element(f64::NAN), 0);
    }
    let w: Vec<f64> = errors.iter().map(|e| 1.0 / (e * e)).collect();
    let mut p = Vector4::from(start.unwrap_or_else(|| initial_guess(x, y)));
    if !(p[2] > 0.0) {
        return GaussianFit::failed(p, 0);
    }
    let chi2_of = |p: &Vector4<f64>| -> f64 {
        x.iter()
            .zip(y)
            .zip(&w)
            .map(|((&xi, &yi), &wi)| {
                let r = yi - gaussian(p, xi);
                wi * r * r
            })
            .sum()
    };
    let normal = |p: &Vector4<f64>| -> (Matrix4<f64>, Vector4<f64>) {
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for ((&xi, &yi), &wi) in x.iter().zip(y).zip(&w) {
            let j = jacobian_row(p, xi);
            jtj += wi * j * j.transpose();
            jtr += wi * (yi - gaussian(p, xi)) * j;
        }
        (jtj, jtr)
    };
    let mut chi2 = chi2_of(&p);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    let span = x[n - 1] - x[0];
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let (jtj, jtr) = normal(&p);
        let mut stepped = false;
        while lambda < 1e16 {
            let mut a = jtj;
            for d in 0..4 {
                a[(d, d)] *= 1.0 + lambda;
            }
            let Some(delta) = a.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = p + delta;
            let c = chi2_of(&trial);
            if c.is_finite() && c <= chi2 {
                let scale_a = p[0].abs() + p[3].abs();
                let small = delta[0].abs() <= 1e-12 * scale_a
                    && delta[1].abs() <= 1e-12 * p[2].abs()
                    && delta[2].abs() <= 1e-12 * p[2].abs()
                    && delta[3].abs() <= 1e-12 * scale_a.max(f64::MIN_POSITIVE);
                let flat = chi2 - c <= 1e-15 * chi2;
                p = trial;
                chi2 = c;
                lambda = (lambda * 0.1).max(1e-12);
                stepped = true;
                converged = small || flat;
                break;
            }
            lambda *= 10.0;
        }
        // No downhill step at any damping: the minimum is resolved to
        // floating-point precision.
        if !stepped {
            converged = true;
        }
        if converged {
            break;
        }
    }
    p[2] = p[2].abs();
    let (jtj, _) = normal(&p);
    let Some(cov) = jtj.try_inverse() else {
        return GaussianFit::failed(p, iterations);
    };
    let plausible = p.iter().all(|v| v.is_finite()) && p[2] > 0.0 && p[2] < 10.0 * span;
    let err = |d: usize| cov[(d, d)].max(0.0).sqrt();
    let dof = (n - 4).max(1) as f64;
    GaussianFit {
        amplitude: Estimate {
            value: p[0],
            uncertainty: err(0),
        },
        center: Estimate {
            value: p[1],
            uncertainty: err(1),
        },
        sigma: Estimate {
            value: p[2],
            uncertainty: err(2),
        },
        offset: Estimate {
            value: p[3],
            uncertainty: err(3),
        },
        chi2_reduced: chi2 / dof,
        converged: converged && plausible,
        iterations,
    }
}

/// `(sigma², 2 sigma δsigma)`.
pub fn variance_from_fit(fit: &GaussianFit) -> Result<(f64, f64)> {
    if !fit.converged {
        return Err(Error::NotConverged("Gaussian fit did not converge".into()));
    }
    let s = fit.sigma.value;
    Ok((s * s, 2.0 * s * fit.sigma.uncertainty))
}

/// Peak of a smooth, well-sampled profile on a uniform grid.
///
/// The samples are interpolated band-limitedly by zero-padding their
/// spectrum `upsample` times; the maximum of the fine profile is then refined
/// with a parabola through its neighbours.
pub fn band_limited_peak(x: &[f64], y: &[f64], upsample: usize) -> Result<f64> {
    let n = y.len();
    if n < 4 || x.len() != n || upsample == 0 {
        return Err(Error::param("profile", "need at least four samples"));
    }
    let m = n * upsample;
    let mut buf: Vec<Complex64> = y.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan(n, true).process(&mut buf);
    let mut fine = vec![Complex64::new(0.0, 0.0); m];
    let half = n / 2;
    fine[..half].copy_from_slice(&buf[..half]);
    for k in half + 1..n {
        fine[m - n + k] = buf[k];
    }
    if n.is_multiple_of(2) {
        fine[half] = 0.5 * buf[half];
        fine[m - half] = 0.5 * buf[half];
    } else {
        fine[half] = buf[half];
    }
    plan(m, false).process(&mut fine);
    let values: Vec<f64> = fine.iter().map(|v| v.re).collect();
    let j = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(j, _)| j)
        .unwrap();
    let (l, c, r) = (values[(j + m - 1) % m], values[j], values[(j + 1) % m]);
    let denom = l - 2.0 * c + r;
    let offset = if denom < 0.0 { 0.5 * (l - r) / denom } else { 0.0 };
    let step = (x[n - 1] - x[0]) / (n - 1) as f64 / upsample as f64;
    Ok(x[0] + (j as f64 + offset) * step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TransverseGrid;

    fn gauss_map(n: usize, dx: f64, w1: f64, w2: f64) -> CoincidenceMap {
        let g = TransverseGrid::new(n, dx, 0.0).unwrap();
        let mut v = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (g.x(i) / w1, g.x(j) / w2);
                v.push((-0.5 * (a * a + b * b)).exp());
            }
        }
        CoincidenceMap::from_weights([g, g], [Domain::Position; 2], v).unwrap()
    }

    #[test]
    fn band_limited_peak_is_sub_sample_accurate() {
        let x: Vec<f64> = (0..128).map(|i| i as f64 * 0.5 - 32.0).collect();
        for c in [0.0, 0.13, -3.37, 7.71] {
            let y: Vec<f64> = x.iter().map(|&xi| (-(xi - c) * (xi - c) / 18.0).exp()).collect();
            let p = band_limited_peak(&x, &y, 32).unwrap();
            assert!((p - c).abs() < 1e-4, "{p} vs {c}");
        }
    }

    #[test]
    fn zero_aperture_is_identity() {
        let v = vec![0.0, 1.0, 3.0, 2.0, 0.5];
        assert_eq!(blur_slice(&v, 1.0, 0.0).unwrap(), v);
    }

    #[test]
    fn blurred_delta_is_gaussian() {
        let n = 257;
        let mut v = vec![0.0; n];
        v[128] = 1.0;
        let b = blur_slice(&v, 0.1, 1.0).unwrap();
        let x: Vec<f64> = (0..n).map(|i| (i as f64 - 128.0) * 0.1).collect();
        let (m, var) = crate::grid::moments(&x, &b).unwrap();
        assert!(m.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-6, "{var}");
        assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn under_resolved_aperture_is_rejected() {
        assert!(matches!(blur_slice(&[1.0; 16], 1.0, 1.5), Err(Error::Sampling(_))));
    }

    #[test]
    fn blur_preserves_map_total() {
        let m = gauss_map(64, 1.0, 3.0, 5.0);
        let d = DetectorSpec::new(2.0, 1.0).unwrap();
        let b = blur_map(&m, &d, &d).unwrap();
        assert!((b.sum() - 1.0).abs() < 1e-12);
        let (_, v0) = m.combination_moments(0.0, 1.0);
        let (_, v1) = b.combination_moments(0.0, 1.0);
        assert!((v1 - v0 - 4.0).abs() < 1e-3, "{v0} {v1}");
    }

    #[test]
    fn noiseless_fit_is_exact() {
        let x: Vec<f64> = (0..41).map(|i| -4.0 + 0.2 * i as f64).collect();
        let truth = [120.0, 0.3, 0.9, 7.0];
        let p = Vector4::from(truth);
        let y: Vec<f64> = x.iter().map(|&xi| gaussian(&p, xi)).collect();
        let e: Vec<f64> = y.iter().map(|v| v.sqrt()).collect();
        let fit = fit_gaussian(&x, &y, &e);
        assert!(fit.converged);
        for (got, want) in [fit.amplitude.value, fit.center.value, fit.sigma.value, fit.offset.value]
            .iter()
            .zip(truth)
        {
            assert!((got - want).abs() < 1e-9 * want.abs().max(1.0), "{got} vs {want}");
        }
        assert!(fit.chi2_reduced < 1e-18);
    }

    #[test]
    fn flat_data_does_not_converge() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let fit = fit_gaussian(&x, &[5.0; 10], &[5f64.sqrt(); 10]);
        assert!(!fit.converged);
    }

    #[test]
    fn too_few_points_do_not_converge() {
        let fit = fit_gaussian(&[0.0, 1.0, 2.0, 3.0], &[1.0, 3.0, 2.0, 1.0], &[1.0; 4]);
        assert!(!fit.converged);
    }

    #[test]
    fn variance_propagation() {
        let mut fit = GaussianFit::failed(Vector4::new(1.0, 0.0, 2.0, 0.0), 1);
        assert!(variance_from_fit(&fit).is_err());
        fit.converged = true;
        fit.sigma = Estimate {
            value: 2.0,
            uncertainty: 0.1,
        };
        let (v, dv) = variance_from_fit(&fit).unwrap();
        assert!((v - 4.0).abs() < 1e-15 && (dv - 0.4).abs() < 1e-15);
        fit.sigma = Estimate {
            value: 1.0,
            uncertainty: 0.0,
        };
        assert_eq!(variance_from_fit(&fit).unwrap(), (1.0, 0.0));
    }

    #[test]
    fn scans_are_deterministic() {
        let m = gauss_map(64, 1.0, 4.0, 4.0);
        let spec = ScanSpec::uniform(0.0, 30.0, 31, 0.0, 10.0, 100.0, 42).unwrap();
        let d = DetectorSpec::ideal();
        let a = simulate_scan(&m, Arm::Idler, &spec, &d, &d, Basis::Position, 0.0).unwrap();
        let b = simulate_scan(&m, Arm::Idler, &spec, &d, &d, Basis::Position, 0.0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.metadata.rng, RNG_ALGORITHM);
        assert!(!a.metadata.off_grid);
    }

    #[test]
    fn high_count_limit_follows_slice() {
        let m = gauss_map(128, 1.0, 6.0, 5.0);
        let spec = ScanSpec::uniform(0.0, 30.0, 31, 0.0, 1.0, 1e8, 3).unwrap();
        let d = DetectorSpec::ideal();
        let r = simulate_scan(&m, Arm::Idler, &spec, &d, &d, Basis::Position, 0.0).unwrap();
        let peak = 1e8;
        let rms = (r
            .counts
            .iter()
            .zip(&r.positions)
            .map(|(&c, &x)| {
                let want = (-0.5 * (x / 5.0) * (x / 5.0)).exp();
                (c as f64 / peak - want).powi(2)
            })
            .sum::<f64>()
            / r.counts.len() as f64)
            .sqrt();
        assert!(rms < 0.005, "rms {rms}");
    }

    #[test]
    fn off_grid_fixed_detector_is_flagged() {
        let m = gauss_map(32, 1.0, 4.0, 4.0);
        let spec = ScanSpec::uniform(0.0, 10.0, 11, 0.4, 1.0, 10.0, 0).unwrap();
        let d = DetectorSpec::ideal();
        let r = simulate_scan(&m, Arm::Idler, &spec, &d, &d, Basis::Position, 0.0).unwrap();
        assert!(r.metadata.off_grid);
        assert_eq!(r.metadata.fixed_sample, 0.0);
    }

    #[test]
    fn bad_scan_specs_are_rejected() {
        let mut s = ScanSpec::uniform(0.0, 10.0, 11, 0.0, 1.0, 10.0, 0).unwrap();
        s.positions.swap(2, 3);
        assert!(s.validate().is_err());
        s.positions.sort_by(f64::total_cmp);
        s.integration_time = 0.0;
        assert!(s.validate().is_err());
        assert!(DetectorSpec::new(-1.0, 1.0).is_err());
        assert!(DetectorSpec::new(0.0, 0.0).is_err());
    }

    #[test]
    fn csv_and_sidecar() {
        let m = gauss_map(32, 1.0, 4.0, 4.0);
        let spec = ScanSpec::uniform(0.0, 10.0, 11, 0.0, 1.0, 100.0, 9).unwrap();
        let d = DetectorSpec::ideal();
        let r = simulate_scan(&m, Arm::Idler, &spec, &d, &d, Basis::Momentum, 2.0).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("position_m,counts,count_error\n"));
        assert_eq!(text.lines().count(), 12);
        let json: serde_json::Value = serde_json::from_str(&r.sidecar_json().unwrap()).unwrap();
        assert_eq!(json["metadata"]["basis"], "momentum");
        assert_eq!(json["metadata"]["seed"], 9);
        assert!(json["fit"]["sigma"]["value"].is_number());
    }
}
