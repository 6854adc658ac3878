//! Two-photon transverse amplitude `c(x₁, x₂)` on a pair of grids.
//!
//! Rows index the signal coordinate, columns the idler coordinate. Each axis
//! carries its own representation flag, so a single arm can be transformed
//! without touching the other.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{forward_in_place, inverse_in_place, plan, ComplexField, Domain, TransverseGrid};
use crate::propagation::{apply_element, check_fresnel_sampling, OpticalElement, OpticalSystem};

/// Minimum samples per correlation width demanded of source grids.
pub const SAMPLES_PER_WIDTH: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Signal,
    Idler,
}

impl Arm {
    fn axis(self) -> usize {
        match self {
            Arm::Signal => 0,
            Arm::Idler => 1,
        }
    }

    pub fn other(self) -> Arm {
        match self {
            Arm::Signal => Arm::Idler,
            Arm::Idler => Arm::Signal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceSpec {
    /// Momentum anti-correlation limit; `sigma_plus` is fixed at two
    /// wavenumber pitches. Without `sigma_minus` the amplitude is flat along
    /// `q₁ - q₂` over the whole window, the grid version of `δ(q₁ + q₂)`.
    IdealEpr { sigma_minus: Option<f64> },
    /// Double-Gaussian amplitude with widths of `q₁ + q₂` and `q₁ - q₂`.
    GaussianSpdc { sigma_plus: f64, sigma_minus: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiphotonAmplitude {
    grids: [TransverseGrid; 2],
    domains: [Domain; 2],
    amp: Vec<Complex64>,
}

impl BiphotonAmplitude {
    pub fn new(
        grids: [TransverseGrid; 2],
        domains: [Domain; 2],
        amp: Vec<Complex64>,
    ) -> Result<Self> {
        if amp.len() != grids[0].n() * grids[1].n() {
            return Err(Error::GridMismatch(format!(
                "{} amplitudes for a {}x{} grid pair",
                amp.len(),
                grids[0].n(),
                grids[1].n()
            )));
        }
        if amp.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("biphoton amplitude"));
        }
        let state = Self { grids, domains, amp };
        if !(state.norm_sqr() > 0.0) {
            return Err(Error::ZeroNorm);
        }
        Ok(state)
    }

    /// Product state `f(x₁) g(x₂)`.
    pub fn product(f: &ComplexField, g: &ComplexField) -> Result<Self> {
        let amp = f
            .values()
            .iter()
            .flat_map(|a| g.values().iter().map(move |b| a * b))
            .collect();
        Self::new([*f.grid(), *g.grid()], [Domain::Position; 2], amp)
    }

    pub fn grid(&self, arm: Arm) -> &TransverseGrid {
        &self.grids[arm.axis()]
    }

    pub fn domain(&self, arm: Arm) -> Domain {
        self.domains[arm.axis()]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.grids[0].n(), self.grids[1].n())
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amp
    }

    pub fn value(&self, i: usize, j: usize) -> Complex64 {
        self.amp[i * self.grids[1].n() + j]
    }

    fn measure(&self, axis: usize) -> f64 {
        match self.domains[axis] {
            Domain::Position => self.grids[axis].dx(),
            Domain::Wavenumber => self.grids[axis].dq(),
        }
    }

    /// `Σ|c|² d₁ d₂` with the measure of each axis' representation.
    pub fn norm_sqr(&self) -> f64 {
        self.amp.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.measure(0) * self.measure(1)
    }

    /// Rescaled to unit norm (the post-selected state).
    pub fn normalized(mut self) -> Self {
        let s = 1.0 / self.norm_sqr().sqrt();
        self.amp.iter_mut().for_each(|v| *v *= s);
        self
    }

    pub fn to_domain(&self, arm: Arm, domain: Domain) -> Self {
        let axis = arm.axis();
        if self.domains[axis] == domain {
            return self.clone();
        }
        let grid = self.grids[axis];
        let fft = plan(grid.n(), domain == Domain::Wavenumber);
        let out = self.map_lines(arm, |line| {
            let mut buf = line.to_vec();
            match domain {
                Domain::Wavenumber => forward_in_place(&grid, &mut buf, &*fft),
                Domain::Position => inverse_in_place(&grid, &mut buf, &*fft),
            }
            buf
        });
        let mut domains = self.domains;
        domains[axis] = domain;
        Self {
            grids: self.grids,
            domains,
            amp: out,
        }
    }

    pub fn to_position(&self) -> Self {
        self.to_domain(Arm::Signal, Domain::Position)
            .to_domain(Arm::Idler, Domain::Position)
    }

    pub fn to_wavenumber(&self) -> Self {
        self.to_domain(Arm::Signal, Domain::Wavenumber)
            .to_domain(Arm::Idler, Domain::Wavenumber)
    }

    fn lines(&self, arm: Arm) -> Vec<Vec<Complex64>> {
        let (n1, n2) = self.shape();
        match arm {
            Arm::Idler => self.amp.chunks(n2).map(<[_]>::to_vec).collect(),
            Arm::Signal => (0..n2)
                .map(|j| (0..n1).map(|i| self.amp[i * n2 + j]).collect())
                .collect(),
        }
    }

    fn assemble(arm: Arm, lines: Vec<Vec<Complex64>>, other_n: usize) -> Vec<Complex64> {
        match arm {
            Arm::Idler => lines.into_iter().flatten().collect(),
            Arm::Signal => {
                let n = lines.first().map_or(0, Vec::len);
                let mut amp = vec![Complex64::new(0.0, 0.0); n * other_n];
                for (j, line) in lines.into_iter().enumerate() {
                    for (i, v) in line.into_iter().enumerate() {
                        amp[i * other_n + j] = v;
                    }
                }
                amp
            }
        }
    }

    fn map_lines<F>(&self, arm: Arm, f: F) -> Vec<Complex64>
    where
        F: Fn(&[Complex64]) -> Vec<Complex64> + Sync,
    {
        let other_n = self.grids[arm.other().axis()].n();
        let lines: Vec<_> = self.lines(arm).par_iter().map(|l| f(l)).collect();
        Self::assemble(arm, lines, other_n)
    }
}

/// Source amplitude in the wavenumber representation, normalized to one:
/// `c(q₁, q₂) ∝ exp(-(q₁+q₂)²/4σ₊²) exp(-(q₁-q₂)²/4σ₋²)`.
pub fn make_source(
    spec: SourceSpec,
    signal: TransverseGrid,
    idler: TransverseGrid,
) -> Result<BiphotonAmplitude> {
    let dq = signal.dq().max(idler.dq());
    let q_edge = signal.q_nyquist().min(idler.q_nyquist());
    let (sigma_plus, sigma_minus) = match spec {
        SourceSpec::IdealEpr { sigma_minus } => (2.0 * dq, sigma_minus),
        SourceSpec::GaussianSpdc {
            sigma_plus,
            sigma_minus,
        } => {
            if !(sigma_plus > 0.0) || !sigma_plus.is_finite() {
                return Err(Error::param("sigma_plus", "must be > 0"));
            }
            if sigma_plus < SAMPLES_PER_WIDTH * dq {
                return Err(Error::Sampling(format!(
                    "sigma_plus = {sigma_plus:.4e} spans fewer than {SAMPLES_PER_WIDTH} \
                     wavenumber samples (dq = {dq:.4e})"
                )));
            }
            (sigma_plus, Some(sigma_minus))
        }
    };
    if let Some(sigma_minus) = sigma_minus {
        if !(sigma_minus > 0.0) || !sigma_minus.is_finite() {
            return Err(Error::param("sigma_minus", "must be > 0"));
        }
        if sigma_minus < SAMPLES_PER_WIDTH * dq {
            return Err(Error::Sampling(format!(
                "sigma_minus = {sigma_minus:.4e} spans fewer than {SAMPLES_PER_WIDTH} \
                 wavenumber samples (dq = {dq:.4e})"
            )));
        }
        let widest = sigma_plus.max(sigma_minus);
        if 4.0 * widest > q_edge {
            return Err(Error::Sampling(format!(
                "correlation width {widest:.4e} is not covered by the wavenumber window ±{q_edge:.4e}"
            )));
        }
    }
    let (n1, n2) = (signal.n(), idler.n());
    let a = 1.0 / (4.0 * sigma_plus * sigma_plus);
    let b = sigma_minus.map_or(0.0, |s| 1.0 / (4.0 * s * s));
    let q2s = idler.wavenumbers();
    let mut amp = Vec::with_capacity(n1 * n2);
    for i in 0..n1 {
        let q1 = signal.q(i);
        amp.extend(q2s.iter().map(|&q2| {
            let s = q1 + q2;
            let d = q1 - q2;
            Complex64::new((-a * s * s - b * d * d).exp(), 0.0)
        }));
    }
    Ok(BiphotonAmplitude::new([signal, idler], [Domain::Wavenumber; 2], amp)?.normalized())
}

/// Apply a single-arm optical system to one index of `c`.
///
/// The arm is first brought to the position representation. Free-space
/// steps are guarded using the spectral power summed over all lines.
pub fn apply_arm(
    state: &BiphotonAmplitude,
    arm: Arm,
    system: &OpticalSystem,
) -> Result<BiphotonAmplitude> {
    let k = system.wavenumber();
    let axis = arm.axis();
    let mut current = state.to_domain(arm, Domain::Position);
    for element in system.elements() {
        let grid = current.grids[axis];
        if let OpticalElement::FreeSpace { distance } = element {
            let spectral = current.to_domain(arm, Domain::Wavenumber);
            let power = marginal_power(&spectral, arm);
            check_fresnel_sampling(&grid, &power, *distance, k)?;
        }
        let other_n = current.grids[arm.other().axis()].n();
        let results: Vec<Result<ComplexField>> = current
            .lines(arm)
            .into_par_iter()
            .map(|line| {
                let field = ComplexField::new(grid, line)?;
                apply_element(&field, element, k)
            })
            .collect();
        let fields = results.into_iter().collect::<Result<Vec<_>>>()?;
        let new_grid = fields
            .first()
            .map(|f| *f.grid())
            .ok_or_else(|| Error::InvalidGrid("empty amplitude".into()))?;
        let lines = fields.into_iter().map(ComplexField::into_values).collect();
        current.amp = BiphotonAmplitude::assemble(arm, lines, other_n);
        current.grids[axis] = new_grid;
    }
    Ok(current)
}

fn marginal_power(state: &BiphotonAmplitude, arm: Arm) -> Vec<f64> {
    let (n1, n2) = state.shape();
    match arm {
        Arm::Signal => (0..n1)
            .map(|i| state.amp[i * n2..(i + 1) * n2].iter().map(|v| v.norm_sqr()).sum())
            .collect(),
        Arm::Idler => {
            let mut p = vec![0.0; n2];
            for row in state.amp.chunks(n2) {
                for (acc, v) in p.iter_mut().zip(row) {
                    *acc += v.norm_sqr();
                }
            }
            p
        }
    }
}

/// Coincidence probability map `|c|²`, normalized to unit sum.
#[derive(Debug, Clone, PartialEq)]
pub struct CoincidenceMap {
    grids: [TransverseGrid; 2],
    domains: [Domain; 2],
    values: Vec<f64>,
}

pub fn coincidence_map(state: &BiphotonAmplitude) -> CoincidenceMap {
    let values: Vec<f64> = state.amp.iter().map(|v| v.norm_sqr()).collect();
    CoincidenceMap::from_weights(state.grids, state.domains, values)
        .expect("a valid amplitude has positive norm")
}

impl CoincidenceMap {
    /// Normalizes `weights` to unit sum.
    pub fn from_weights(
        grids: [TransverseGrid; 2],
        domains: [Domain; 2],
        mut weights: Vec<f64>,
    ) -> Result<Self> {
        if weights.len() != grids[0].n() * grids[1].n() {
            return Err(Error::GridMismatch("map size does not match grids".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::NonFinite("coincidence map"));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::ZeroNorm);
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self {
            grids,
            domains,
            values: weights,
        })
    }

    pub fn grid(&self, arm: Arm) -> &TransverseGrid {
        &self.grids[arm.axis()]
    }

    pub fn domain(&self, arm: Arm) -> Domain {
        self.domains[arm.axis()]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.grids[0].n(), self.grids[1].n())
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grids[1].n() + j]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Coordinate of sample `j` on `arm`, in that axis' representation.
    pub fn coordinate(&self, arm: Arm, j: usize) -> f64 {
        let g = self.grid(arm);
        match self.domain(arm) {
            Domain::Position => g.x(j),
            Domain::Wavenumber => g.q(j),
        }
    }

    pub fn coordinates(&self, arm: Arm) -> Vec<f64> {
        (0..self.grid(arm).n()).map(|j| self.coordinate(arm, j)).collect()
    }

    /// Nearest sample on `arm` to `coordinate`, and whether it was exact.
    pub fn nearest_index(&self, arm: Arm, coordinate: f64) -> (usize, bool) {
        let g = self.grid(arm);
        match self.domain(arm) {
            Domain::Position => g.nearest_index(coordinate),
            Domain::Wavenumber => {
                let t = coordinate / g.dq() + (g.n() / 2) as f64;
                let j = t.round().clamp(0.0, (g.n() - 1) as f64);
                (j as usize, (t - j).abs() < 1e-6)
            }
        }
    }

    pub fn marginal(&self, arm: Arm) -> Vec<f64> {
        let (n1, n2) = self.shape();
        match arm {
            Arm::Signal => (0..n1).map(|i| self.values[i * n2..(i + 1) * n2].iter().sum()).collect(),
            Arm::Idler => {
                let mut m = vec![0.0; n2];
                for row in self.values.chunks(n2) {
                    m.iter_mut().zip(row).for_each(|(a, v)| *a += v);
                }
                m
            }
        }
    }

    /// Mean of `α x₁ + β x₂` and its variance under the map.
    pub fn combination_moments(&self, alpha: f64, beta: f64) -> (f64, f64) {
        let x1 = self.coordinates(Arm::Signal);
        let x2 = self.coordinates(Arm::Idler);
        let n2 = x2.len();
        let mut mean = 0.0;
        for (i, a) in x1.iter().enumerate() {
            for (j, b) in x2.iter().enumerate() {
                mean += self.values[i * n2 + j] * (alpha * a + beta * b);
            }
        }
        let mut var = 0.0;
        for (i, a) in x1.iter().enumerate() {
            for (j, b) in x2.iter().enumerate() {
                let d = alpha * a + beta * b - mean;
                var += self.values[i * n2 + j] * d * d;
            }
        }
        (mean, var)
    }

    /// Pearson correlation between the two coordinates.
    pub fn correlation(&self) -> f64 {
        let (_, v1) = self.combination_moments(1.0, 0.0);
        let (_, v2) = self.combination_moments(0.0, 1.0);
        let (_, vs) = self.combination_moments(1.0, 1.0);
        let cov = 0.5 * (vs - v1 - v2);
        if v1 > 0.0 && v2 > 0.0 {
            cov / (v1 * v2).sqrt()
        } else {
            0.0
        }
    }

    /// CSV rows `x1,x2,C`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x1,x2,C")?;
        let (n1, n2) = self.shape();
        for i in 0..n1 {
            let a = self.coordinate(Arm::Signal, i);
            for j in 0..n2 {
                writeln!(w, "{:e},{:e},{:e}", a, self.coordinate(Arm::Idler, j), self.values[i * n2 + j])?;
            }
        }
        Ok(())
    }

    /// Binary dump: `"BIPH"`, version, n₁, n₂ as little-endian u32, then
    /// row-major little-endian f64 values.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let (n1, n2) = self.shape();
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&BINARY_VERSION.to_le_bytes())?;
        w.write_all(&(n1 as u32).to_le_bytes())?;
        w.write_all(&(n2 as u32).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }
}

pub const BINARY_MAGIC: &[u8; 4] = b"BIPH";
pub const BINARY_VERSION: u32 = 1;

/// Read a binary dump written by [`CoincidenceMap::write_binary`].
/// Returns `(n1, n2, values)`.
pub fn read_binary<R: Read>(mut r: R) -> Result<(usize, usize, Vec<f64>)> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header)?;
    if &header[0..4] != BINARY_MAGIC {
        return Err(Error::param("magic", "not a BIPH dump"));
    }
    let word = |k: usize| u32::from_le_bytes(header[k..k + 4].try_into().unwrap());
    if word(4) != BINARY_VERSION {
        return Err(Error::param("version", format!("unsupported version {}", word(4))));
    }
    let (n1, n2) = (word(8) as usize, word(12) as usize);
    let mut values = Vec::with_capacity(n1 * n2);
    let mut buf = [0u8; 8];
    for _ in 0..n1 * n2 {
        r.read_exact(&mut buf)?;
        values.push(f64::from_le_bytes(buf));
    }
    Ok((n1, n2, values))
}

/// One row or column of a coincidence map, normalized to unit sum.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalSlice {
    pub grid: TransverseGrid,
    pub domain: Domain,
    pub values: Vec<f64>,
    pub fixed_arm: Arm,
    pub fixed_index: usize,
    /// Set when the requested coordinate was not on a sample and the
    /// nearest one was used.
    pub off_grid: bool,
}

impl ConditionalSlice {
    pub fn coordinate(&self, j: usize) -> f64 {
        match self.domain {
            Domain::Position => self.grid.x(j),
            Domain::Wavenumber => self.grid.q(j),
        }
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.grid.n()).map(|j| self.coordinate(j)).collect()
    }

    pub fn moments(&self) -> Result<(f64, f64)> {
        crate::grid::moments(&self.coordinates(), &self.values)
    }
}

/// Profile of the scanned arm with `fixed_arm` held at `coordinate`.
pub fn conditional_slice(map: &CoincidenceMap, fixed_arm: Arm, coordinate: f64) -> Result<ConditionalSlice> {
    let (index, on_grid) = map.nearest_index(fixed_arm, coordinate);
    let (n1, n2) = map.shape();
    let mut values: Vec<f64> = match fixed_arm {
        Arm::Signal => map.values[index * n2..(index + 1) * n2].to_vec(),
        Arm::Idler => (0..n1).map(|i| map.values[i * n2 + index]).collect(),
    };
    let total: f64 = values.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroNorm);
    }
    values.iter_mut().for_each(|v| *v /= total);
    let scanned = fixed_arm.other();
    Ok(ConditionalSlice {
        grid: *map.grid(scanned),
        domain: map.domain(scanned),
        values,
        fixed_arm,
        fixed_index: index,
        off_grid: !on_grid,
    })
}

/// Singular values of the amplitude matrix, descending, with `Σλ² = 1`.
pub fn schmidt_spectrum(state: &BiphotonAmplitude) -> Vec<f64> {
    let (n1, n2) = state.shape();
    let m = DMatrix::from_row_slice(n1, n2, &state.amp);
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let norm = sv.iter().map(|s| s * s).sum::<f64>().sqrt();
    sv.iter_mut().for_each(|s| *s /= norm);
    sv
}

/// Schmidt number `K = 1 / Σλ⁴` for a spectrum normalized to `Σλ² = 1`.
pub fn schmidt_number(spectrum: &[f64]) -> f64 {
    1.0 / spectrum.iter().map(|s| s.powi(4)).sum::<f64>()
}
