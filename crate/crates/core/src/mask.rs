//! Complex transmittance masks, including the cubic-phase Airy mask.
//!
//! The Airy mask is defined on a spectral variable `q`:
//!
//! ```text
//! t(q) = exp(i x0³ q³ / 3) · exp(-a (x0 q)²) · exp(-i q² Z / 2k)
//! ```
//!
//! With `a = 0, Z = 0` this is the (flat-modulus) Fourier transform of
//! `Ai(x / x0)`. The last factor is a Fresnel transfer phase, so a mask with
//! parameter `Z` followed by propagation over `z` equals the `Z = 0` mask
//! followed by propagation over `z + Z`.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{fft_unitary, ifft_unitary, ComplexField, Domain, TransverseGrid};

pub const DEFAULT_APODIZATION: f64 = 0.05;

/// Transmittance below which the phase-sampling guard ignores a sample.
pub const PHASE_GUARD_FLOOR: f64 = 1e-6;

/// Where an Airy mask sits relative to the surrounding optics; fixes the
/// map from grid sample to the spectral variable `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MaskPlacement {
    /// Acts directly on the spectrum: `q = q_j`.
    Spectral,
    /// Front plane of a Fourier lens: `q = -k ξ / f`, so a plane wave
    /// leaves the lens with spectrum `t(q)`.
    LensInput { focal: f64 },
    /// Back focal plane of a Fourier lens: `q = k ξ / f`, filtering the
    /// spectrum of the field entering the lens.
    FourierPlane { focal: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AiryMaskSpec {
    /// Transverse Airy scale [m].
    pub x0: f64,
    /// Apodization `a >= 0`; `exp(-a (x0 q)²)` on the spectral side.
    pub apodization: f64,
    /// Virtual propagation distance [m].
    pub z: f64,
    /// Wavenumber [1/m].
    pub wavenumber: f64,
}

impl AiryMaskSpec {
    pub fn new(x0: f64, apodization: f64, z: f64, wavenumber: f64) -> Result<Self> {
        let spec = Self {
            x0,
            apodization,
            z,
            wavenumber,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x0 > 0.0) || !self.x0.is_finite() {
            return Err(Error::param("x0", format!("{} must be > 0", self.x0)));
        }
        if !(self.apodization >= 0.0) || !self.apodization.is_finite() {
            return Err(Error::param("apodization", "must be >= 0"));
        }
        if !(self.z >= 0.0) || !self.z.is_finite() {
            return Err(Error::param("z", format!("{} must be >= 0", self.z)));
        }
        if !(self.wavenumber > 0.0) || !self.wavenumber.is_finite() {
            return Err(Error::param("wavenumber", "must be > 0"));
        }
        Ok(())
    }

    pub fn phase(&self, q: f64) -> f64 {
        let x0 = self.x0;
        x0 * x0 * x0 * q * q * q / 3.0 - q * q * self.z / (2.0 * self.wavenumber)
    }

    pub fn transmittance(&self, q: f64) -> Complex64 {
        let s = self.x0 * q;
        Complex64::from_polar((-self.apodization * s * s).exp(), self.phase(q))
    }

    /// Transverse shift of the main lobe produced by `Z`: `Z² / (4 k² x0³)`.
    pub fn peak_shift(&self) -> f64 {
        self.z * self.z / (4.0 * self.wavenumber.powi(2) * self.x0.powi(3))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    grid: TransverseGrid,
    domain: Domain,
    transmittance: Vec<Complex64>,
}

impl Mask {
    pub fn new(grid: TransverseGrid, domain: Domain, transmittance: Vec<Complex64>) -> Result<Self> {
        if transmittance.len() != grid.n() {
            return Err(Error::GridMismatch(format!(
                "{} transmittance samples for a grid of {}",
                transmittance.len(),
                grid.n()
            )));
        }
        for t in &transmittance {
            if !t.re.is_finite() || !t.im.is_finite() {
                return Err(Error::NonFinite("mask"));
            }
            if t.norm() > 1.0 + 1e-12 {
                return Err(Error::param("transmittance", format!("|t| = {} exceeds 1", t.norm())));
            }
        }
        Ok(Self {
            grid,
            domain,
            transmittance,
        })
    }

    pub fn ones(grid: TransverseGrid, domain: Domain) -> Self {
        Self {
            grid,
            domain,
            transmittance: vec![Complex64::new(1.0, 0.0); grid.n()],
        }
    }

    /// Binary aperture passing coordinates in `[lo, hi]` (positions or
    /// wavenumbers, per `domain`).
    pub fn slit(grid: TransverseGrid, domain: Domain, lo: f64, hi: f64) -> Self {
        let transmittance = (0..grid.n())
            .map(|j| {
                let c = match domain {
                    Domain::Position => grid.x(j),
                    Domain::Wavenumber => grid.q(j),
                };
                if (lo..=hi).contains(&c) {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        Self {
            grid,
            domain,
            transmittance,
        }
    }

    pub fn grid(&self) -> &TransverseGrid {
        &self.grid
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn transmittance(&self) -> &[Complex64] {
        &self.transmittance
    }

    pub fn coordinate(&self, j: usize) -> f64 {
        match self.domain {
            Domain::Position => self.grid.x(j),
            Domain::Wavenumber => self.grid.q(j),
        }
    }

    pub fn is_phase_only(&self, tol: f64) -> bool {
        self.transmittance.iter().all(|t| (t.norm() - 1.0).abs() <= tol)
    }

    /// CSV with one row per sample: coordinate, Re t, Im t.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let label = match self.domain {
            Domain::Position => "x_m",
            Domain::Wavenumber => "q_per_m",
        };
        writeln!(w, "{label},re_t,im_t")?;
        for (j, t) in self.transmittance.iter().enumerate() {
            writeln!(w, "{:e},{:e},{:e}", self.coordinate(j), t.re, t.im)?;
        }
        Ok(())
    }
}

/// Spectral variable seen by each sample of `grid` for a given placement.
pub fn spectral_coordinates(
    grid: &TransverseGrid,
    placement: MaskPlacement,
    wavenumber: f64,
) -> Result<(Domain, Vec<f64>)> {
    match placement {
        MaskPlacement::Spectral => Ok((Domain::Wavenumber, grid.wavenumbers())),
        MaskPlacement::LensInput { focal } | MaskPlacement::FourierPlane { focal } => {
            if !(focal > 0.0) {
                return Err(Error::param("focal", format!("{focal} must be > 0")));
            }
            let sign = if matches!(placement, MaskPlacement::LensInput { .. }) {
                -1.0
            } else {
                1.0
            };
            let qs = grid
                .positions()
                .into_iter()
                .map(|x| sign * wavenumber * x / focal)
                .collect();
            Ok((Domain::Position, qs))
        }
    }
}

/// Cubic-phase Airy mask sampled on `grid`.
///
/// Fails with [`Error::Sampling`] when the mask phase changes by π or more
/// between neighbouring samples anywhere the transmittance exceeds
/// [`PHASE_GUARD_FLOOR`].
pub fn airy_mask(spec: &AiryMaskSpec, grid: &TransverseGrid, placement: MaskPlacement) -> Result<Mask> {
    spec.validate()?;
    let (domain, qs) = spectral_coordinates(grid, placement, spec.wavenumber)?;
    let transmittance: Vec<Complex64> = qs.iter().map(|&q| spec.transmittance(q)).collect();
    for j in 0..qs.len() - 1 {
        if transmittance[j].norm().max(transmittance[j + 1].norm()) <= PHASE_GUARD_FLOOR {
            continue;
        }
        let step = (spec.phase(qs[j + 1]) - spec.phase(qs[j])).abs();
        if step >= PI {
            return Err(Error::Sampling(format!(
                "Airy mask phase step {step:.3} rad between samples {j} and {} \
                 (q = {:.4e} 1/m); refine the grid or raise the apodization",
                j + 1,
                qs[j]
            )));
        }
    }
    Mask::new(*grid, domain, transmittance)
}

/// Pointwise product in the mask's domain.
pub fn apply_mask(field: &ComplexField, mask: &Mask) -> Result<ComplexField> {
    if !field.grid().same_as(mask.grid()) {
        return Err(Error::GridMismatch(format!(
            "field grid {:?} vs mask grid {:?}",
            field.grid(),
            mask.grid()
        )));
    }
    match mask.domain() {
        Domain::Position => {
            let values = field
                .values()
                .iter()
                .zip(mask.transmittance())
                .map(|(u, t)| u * t)
                .collect();
            Ok(ComplexField::from_parts_unchecked(*field.grid(), values))
        }
        Domain::Wavenumber => {
            let mut s = fft_unitary(field);
            s.values_mut()
                .iter_mut()
                .zip(mask.transmittance())
                .for_each(|(u, t)| *u *= t);
            Ok(ifft_unitary(&s))
        }
    }
}
