//! Paraxial single-arm optics.
//!
//! The main path is the transfer-function method: free space multiplies the
//! spectrum by `exp(-i q² z / 2k)`. [`propagate_quadrature`] sums the Fresnel
//! convolution kernel directly and exists only as an independent check.

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{fft_unitary, ifft_unitary, ComplexField, Spectrum, TransverseGrid};
use crate::mask::{apply_mask, Mask};

/// Fraction of spectral energy allowed outside the band used by the
/// sampling guard.
pub const GUARD_ENERGY_FRACTION: f64 = 1e-12;

#[derive(Debug, Clone)]
pub enum OpticalElement {
    FreeSpace { distance: f64 },
    FourierLens { focal: f64 },
    Imaging { magnification: f64, invert: bool },
    Mask(Mask),
}

impl OpticalElement {
    pub fn validate(&self) -> Result<()> {
        match self {
            OpticalElement::FreeSpace { distance } if !(*distance >= 0.0) => {
                Err(Error::param("distance", format!("{distance} must be >= 0")))
            }
            OpticalElement::FourierLens { focal } if !(*focal > 0.0) => {
                Err(Error::param("focal", format!("{focal} must be > 0")))
            }
            OpticalElement::Imaging { magnification, .. }
                if *magnification == 0.0 || !magnification.is_finite() =>
            {
                Err(Error::param("magnification", "must be finite and nonzero"))
            }
            _ => Ok(()),
        }
    }

    pub fn is_lossless(&self) -> bool {
        !matches!(self, OpticalElement::Mask(_))
    }
}

/// Ordered elements acting on one arm at a fixed wavelength.
#[derive(Debug, Clone)]
pub struct OpticalSystem {
    wavelength: f64,
    elements: Vec<OpticalElement>,
}

impl OpticalSystem {
    pub fn new(wavelength: f64, elements: Vec<OpticalElement>) -> Result<Self> {
        if !(wavelength > 0.0) || !wavelength.is_finite() {
            return Err(Error::param("wavelength", format!("{wavelength} must be > 0")));
        }
        for e in &elements {
            e.validate()?;
        }
        Ok(Self {
            wavelength,
            elements,
        })
    }

    pub fn identity(wavelength: f64) -> Result<Self> {
        Self::new(wavelength, Vec::new())
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    pub fn elements(&self) -> &[OpticalElement] {
        &self.elements
    }

    pub fn then(mut self, element: OpticalElement) -> Result<Self> {
        element.validate()?;
        self.elements.push(element);
        Ok(self)
    }

    pub fn is_lossless(&self) -> bool {
        self.elements.iter().all(OpticalElement::is_lossless)
    }
}

/// Smallest wavenumber magnitude containing all but `fraction` of the
/// spectral power.
pub fn effective_bandwidth(grid: &TransverseGrid, power: &[f64], fraction: f64) -> f64 {
    let total: f64 = power.iter().sum();
    if !(total > 0.0) {
        return 0.0;
    }
    let n = grid.n();
    let mid = n / 2;
    // Walk inward from the band edges, accumulating the tail energy.
    let mut tail = 0.0;
    let mut outer = mid; // number of shells
    for r in (0..=mid).rev() {
        let shell = match r {
            0 => power[mid],
            r if r == mid => power[0],
            r => power[mid - r] + power[mid + r],
        };
        if tail + shell > fraction * total {
            outer = r;
            break;
        }
        tail += shell;
    }
    outer as f64 * grid.dq()
}

/// Check that the Fresnel transfer phase is resolved over the band occupied
/// by `power`: the phase step between neighbouring wavenumber samples must
/// stay below π.
pub fn check_fresnel_sampling(
    grid: &TransverseGrid,
    power: &[f64],
    distance: f64,
    wavenumber: f64,
) -> Result<()> {
    let q_eff = effective_bandwidth(grid, power, GUARD_ENERGY_FRACTION);
    let step = q_eff * distance.abs() * grid.dq() / wavenumber;
    if step >= PI {
        return Err(Error::Sampling(format!(
            "Fresnel phase step {step:.3} rad at |q| = {q_eff:.4e} for z = {distance:.4e} m \
             exceeds π (grid n = {}, dx = {:.4e}); enlarge the window or shorten z",
            grid.n(),
            grid.dx()
        )));
    }
    Ok(())
}

/// Multiply the spectrum by `exp(-i q² z / 2k)`. Negative `z` propagates
/// backwards (the conjugate transfer function).
pub fn fresnel_transfer(field: &ComplexField, distance: f64, wavenumber: f64) -> ComplexField {
    if distance == 0.0 {
        return field.clone();
    }
    let mut spectrum = fft_unitary(field);
    apply_transfer(&mut spectrum, distance, wavenumber);
    ifft_unitary(&spectrum)
}

pub(crate) fn apply_transfer(spectrum: &mut Spectrum, distance: f64, wavenumber: f64) {
    let grid = *spectrum.grid();
    for (k, v) in spectrum.values_mut().iter_mut().enumerate() {
        let q = grid.q(k);
        *v *= Complex64::from_polar(1.0, -q * q * distance / (2.0 * wavenumber));
    }
}

/// Free-space Fresnel propagation over `distance >= 0`.
pub fn propagate_free(field: &ComplexField, distance: f64, wavenumber: f64) -> Result<ComplexField> {
    if !(distance >= 0.0) {
        return Err(Error::param("distance", format!("{distance} must be >= 0")));
    }
    check_wavenumber(wavenumber)?;
    Ok(fresnel_transfer(field, distance, wavenumber))
}

/// Direct summation of the Fresnel convolution integral
/// `u(x) = (k / 2πiz)^{1/2} ∫ u₀(x') exp(ik(x - x')² / 2z) dx'` on the input grid.
///
/// O(n²); meant for n ≤ 512.
pub fn propagate_quadrature(
    field: &ComplexField,
    distance: f64,
    wavenumber: f64,
) -> Result<ComplexField> {
    if !(distance > 0.0) {
        return Err(Error::param(
            "distance",
            format!("{distance}: quadrature kernel needs z > 0"),
        ));
    }
    check_wavenumber(wavenumber)?;
    let grid = *field.grid();
    let xs = grid.positions();
    let pre = Complex64::from_polar((wavenumber / (2.0 * PI * distance)).sqrt(), -FRAC_PI_4)
        * grid.dx();
    let a = wavenumber / (2.0 * distance);
    let values = xs
        .iter()
        .map(|&x| {
            let sum: Complex64 = xs
                .iter()
                .zip(field.values())
                .map(|(&xp, &u)| u * Complex64::from_polar(1.0, a * (x - xp) * (x - xp)))
                .sum();
            pre * sum
        })
        .collect();
    ComplexField::new(grid, values)
}

/// Grid produced by a Fourier-transforming lens of focal length `focal`.
pub fn fourier_plane_grid(
    input: &TransverseGrid,
    focal: f64,
    wavenumber: f64,
) -> Result<TransverseGrid> {
    TransverseGrid::new(input.n(), input.dq() * focal / wavenumber, 0.0)
}

/// Optical Fourier transform: the output amplitude at `x` is the input
/// spectrum at `q = k x / f`, scaled by `(k/f)^{1/2} e^{-iπ/4}` to keep the norm.
pub fn fourier_lens(field: &ComplexField, focal: f64, wavenumber: f64) -> Result<ComplexField> {
    if !(focal > 0.0) {
        return Err(Error::param("focal", format!("{focal} must be > 0")));
    }
    check_wavenumber(wavenumber)?;
    let out = fourier_plane_grid(field.grid(), focal, wavenumber)?;
    let scale = Complex64::from_polar((wavenumber / focal).sqrt(), -FRAC_PI_4);
    let values = fft_unitary(field)
        .values()
        .iter()
        .map(|v| v * scale)
        .collect();
    Ok(ComplexField::from_parts_unchecked(out, values))
}

/// Output grid of an imaging stage and whether samples are reversed.
pub fn imaging_grid(
    input: &TransverseGrid,
    magnification: f64,
    invert: bool,
) -> Result<(TransverseGrid, bool)> {
    if magnification == 0.0 || !magnification.is_finite() {
        return Err(Error::param("magnification", "must be finite and nonzero"));
    }
    let m = if invert { -magnification } else { magnification };
    let grid = TransverseGrid::new(input.n(), input.dx() * m.abs(), input.center() * m)?;
    Ok((grid, m < 0.0))
}

/// `f(x) -> |M|^{-1/2} f(s x / M)` with `s = -1` when inverting.
///
/// The output grid is the input grid scaled by `|M|`; a reversed image maps
/// sample `j` to `n - j` (mod n), so double inversion is exact.
pub fn imaging(field: &ComplexField, magnification: f64, invert: bool) -> Result<ComplexField> {
    let (grid, reversed) = imaging_grid(field.grid(), magnification, invert)?;
    let amp = 1.0 / magnification.abs().sqrt();
    let n = grid.n();
    let src = field.values();
    let values = (0..n)
        .map(|j| {
            let i = if reversed { (n - j) % n } else { j };
            src[i] * amp
        })
        .collect();
    Ok(ComplexField::from_parts_unchecked(grid, values))
}

/// Apply a single element without the sampling guard.
pub fn apply_element(
    field: &ComplexField,
    element: &OpticalElement,
    wavenumber: f64,
) -> Result<ComplexField> {
    match element {
        OpticalElement::FreeSpace { distance } => propagate_free(field, *distance, wavenumber),
        OpticalElement::FourierLens { focal } => fourier_lens(field, *focal, wavenumber),
        OpticalElement::Imaging {
            magnification,
            invert,
        } => imaging(field, *magnification, *invert),
        OpticalElement::Mask(mask) => apply_mask(field, mask),
    }
}

/// Fold the system's elements over the field, in order. Free-space steps are
/// checked against the sampling guard before they run.
pub fn apply_system(field: &ComplexField, system: &OpticalSystem) -> Result<ComplexField> {
    let k = system.wavenumber();
    let mut current = field.clone();
    for element in system.elements() {
        if let OpticalElement::FreeSpace { distance } = element {
            let power = fft_unitary(&current).power();
            check_fresnel_sampling(current.grid(), &power, *distance, k)?;
        }
        current = apply_element(&current, element, k)?;
    }
    Ok(current)
}

fn check_wavenumber(k: f64) -> Result<()> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::param("wavenumber", format!("{k} must be > 0")));
    }
    Ok(())
}
