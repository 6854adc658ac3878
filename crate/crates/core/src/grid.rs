//! Uniform transverse sampling, complex fields and the unitary DFT.
//!
//! A grid of `n` samples with pitch `dx` places the coordinate `center` at
//! index `n/2`:
//!
//! ```text
//! x_j = center + (j - n/2) dx        q_j = (j - n/2) dq,   dq = 2π / (n dx)
//! ```
//!
//! The spectrum uses the symmetric continuous-transform convention
//! `F(q) = (2π)^{-1/2} ∫ f(x) e^{-iqx} dx`, sampled so that
//! `Σ|f_j|² dx = Σ|F_k|² dq` holds exactly.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if forward {
            p.plan_fft_forward(n)
        } else {
            p.plan_fft_inverse(n)
        }
    })
}

/// Representation of a sampled axis. A position-domain mask multiplies field
/// samples; a wavenumber-domain mask multiplies the spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Position,
    Wavenumber,
}

/// Uniform 1D sampling of a transverse axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransverseGrid {
    n: usize,
    dx: f64,
    center: f64,
}

impl TransverseGrid {
    pub fn new(n: usize, dx: f64, center: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "sample count {n} must be a power of two >= 8"
            )));
        }
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(Error::InvalidGrid(format!("pitch {dx} must be positive")));
        }
        if !center.is_finite() {
            return Err(Error::InvalidGrid("center must be finite".into()));
        }
        Ok(Self { n, dx, center })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    /// Conjugate (wavenumber) pitch.
    pub fn dq(&self) -> f64 {
        2.0 * PI / (self.n as f64 * self.dx)
    }

    /// Nyquist wavenumber `π/dx`.
    pub fn q_nyquist(&self) -> f64 {
        PI / self.dx
    }

    pub fn x(&self, j: usize) -> f64 {
        self.center + (j as f64 - (self.n / 2) as f64) * self.dx
    }

    pub fn q(&self, k: usize) -> f64 {
        (k as f64 - (self.n / 2) as f64) * self.dq()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.q(k)).collect()
    }

    /// Nearest sample index to `x`, clamped to the grid, and whether `x`
    /// lies on a sample (within 1e-6 of a pitch).
    pub fn nearest_index(&self, x: f64) -> (usize, bool) {
        let t = (x - self.center) / self.dx + (self.n / 2) as f64;
        let j = t.round();
        let clamped = j.clamp(0.0, (self.n - 1) as f64);
        let on_grid = (t - clamped).abs() < 1e-6;
        (clamped as usize, on_grid)
    }

    /// Fractional index of coordinate `x`.
    pub fn fractional_index(&self, x: f64) -> f64 {
        (x - self.center) / self.dx + (self.n / 2) as f64
    }

    /// Same sample count with a new pitch and center.
    pub fn with_pitch(&self, dx: f64, center: f64) -> Result<Self> {
        Self::new(self.n, dx, center)
    }

    pub fn same_as(&self, other: &TransverseGrid) -> bool {
        self.n == other.n
            && ((self.dx - other.dx).abs() <= 1e-12 * self.dx)
            && ((self.center - other.center).abs() <= 1e-9 * self.dx)
    }
}

/// Sampled complex amplitude in the position representation.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: TransverseGrid,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: TransverseGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} samples",
                values.len(),
                grid.n()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("field"));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: TransverseGrid, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let values = (0..grid.n()).map(|j| f(grid.x(j))).collect();
        Self::new(grid, values)
    }

    pub(crate) fn from_parts_unchecked(grid: TransverseGrid, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.n());
        Self { grid, values }
    }

    pub fn grid(&self) -> &TransverseGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// `‖f‖² = Σ|f_j|² dx`.
    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    pub fn norm_l2(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn centroid(&self) -> Result<f64> {
        moments(&self.grid.positions(), &self.intensity()).map(|m| m.0)
    }

    /// Second central moment of `|f|²` (a variance, not a width).
    pub fn variance(&self) -> Result<f64> {
        moments(&self.grid.positions(), &self.intensity()).map(|m| m.1)
    }

    pub fn spectrum(&self) -> Spectrum {
        fft_unitary(self)
    }

    pub fn scaled(mut self, s: Complex64) -> Self {
        self.values.iter_mut().for_each(|v| *v *= s);
        self
    }
}

/// Field in the wavenumber representation, tied to the position grid it
/// was transformed from.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: TransverseGrid,
    values: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(grid: TransverseGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::GridMismatch(format!(
                "{} spectral values for a grid of {} samples",
                values.len(),
                grid.n()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("spectrum"));
        }
        Ok(Self { grid, values })
    }

    /// Position grid this spectrum belongs to; wavenumbers are `grid.q(k)`.
    pub fn grid(&self) -> &TransverseGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn power(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// `Σ|F_k|² dq`.
    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.dq()
    }

    pub fn centroid(&self) -> Result<f64> {
        moments(&self.grid.wavenumbers(), &self.power()).map(|m| m.0)
    }

    pub fn variance(&self) -> Result<f64> {
        moments(&self.grid.wavenumbers(), &self.power()).map(|m| m.1)
    }

    pub fn to_field(&self) -> ComplexField {
        ifft_unitary(self)
    }
}

/// Forward unitary DFT of a position-domain field.
pub fn fft_unitary(field: &ComplexField) -> Spectrum {
    let grid = *field.grid();
    let mut buf = field.values().to_vec();
    forward_in_place(&grid, &mut buf, &*plan(grid.n(), true));
    Spectrum { grid, values: buf }
}

/// Inverse of [`fft_unitary`].
pub fn ifft_unitary(spectrum: &Spectrum) -> ComplexField {
    let grid = *spectrum.grid();
    let mut buf = spectrum.values().to_vec();
    inverse_in_place(&grid, &mut buf, &*plan(grid.n(), false));
    ComplexField {
        grid,
        values: buf,
    }
}

// n is a multiple of 4, so e^{-iπ n/2} = 1 and the centred kernel reduces to
// (-1)^{j+k} times the plain DFT kernel.
pub(crate) fn forward_in_place(grid: &TransverseGrid, buf: &mut [Complex64], fft: &dyn Fft<f64>) {
    for (j, v) in buf.iter_mut().enumerate() {
        if j % 2 == 1 {
            *v = -*v;
        }
    }
    fft.process(buf);
    let scale = grid.dx() / (2.0 * PI).sqrt();
    let c = grid.center();
    for (k, v) in buf.iter_mut().enumerate() {
        let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
        let phase = Complex64::from_polar(sign * scale, -grid.q(k) * c);
        *v *= phase;
    }
}

pub(crate) fn inverse_in_place(grid: &TransverseGrid, buf: &mut [Complex64], fft: &dyn Fft<f64>) {
    let c = grid.center();
    for (k, v) in buf.iter_mut().enumerate() {
        let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
        *v *= Complex64::from_polar(sign, grid.q(k) * c);
    }
    fft.process(buf);
    let scale = grid.dq() / (2.0 * PI).sqrt();
    for (j, v) in buf.iter_mut().enumerate() {
        let sign = if j % 2 == 1 { -scale } else { scale };
        *v *= sign;
    }
}

/// Mean and variance of `coords` weighted by non-negative `weights`.
pub fn moments(coords: &[f64], weights: &[f64]) -> Result<(f64, f64)> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroNorm);
    }
    let mean = coords.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>() / total;
    let var = coords
        .iter()
        .zip(weights)
        .map(|(x, w)| (x - mean) * (x - mean) * w)
        .sum::<f64>()
        / total;
    Ok((mean, var))
}
