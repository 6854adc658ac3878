//! Separability witnesses on position/momentum coincidence data.
//!
//! Variables are made dimensionless with a length `x_scale`: `u = (x₁ - x₂)/x_scale`
//! and `v = (p₁ + p₂)·x_scale`, with `p` the transverse wavenumber. Separable
//! states obey `Var(u)·Var(v) ≥ 1` and the product of two independent
//! minimum-uncertainty modes sits exactly on the bound. `Δ` always denotes a
//! variance, never a standard deviation.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::biphoton::{Arm, CoincidenceMap};
use crate::error::{Error, Result};
use crate::grid::Domain;
use crate::measurement::{variance_from_fit, Basis, ScanResult};

/// Pearson correlations smaller than this in magnitude carry no sign.
pub const SIGN_THRESHOLD: f64 = 0.05;

/// Tolerance on the unit-sum normalization of input maps.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

pub const MGVT_BOUND: f64 = 1.0;
pub const DUAN_BOUND: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitConvention {
    x_scale: f64,
}

impl UnitConvention {
    pub fn new(x_scale: f64) -> Result<Self> {
        if !(x_scale > 0.0) || !x_scale.is_finite() {
            return Err(Error::param("x_scale", "must be finite and > 0"));
        }
        Ok(Self { x_scale })
    }

    pub fn x_scale(&self) -> f64 {
        self.x_scale
    }

    pub fn p_scale(&self) -> f64 {
        1.0 / self.x_scale
    }
}

/// Lens and imaging parameters that map detector coordinates back to the
/// source plane: `x = x_det / M`, `q = k x_det / f`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct OpticsMetadata {
    pub focal: Option<f64>,
    pub magnification: Option<f64>,
    pub wavelength: Option<f64>,
}

impl OpticsMetadata {
    pub fn new(focal: f64, magnification: f64, wavelength: f64) -> Self {
        Self {
            focal: Some(focal),
            magnification: Some(magnification),
            wavelength: Some(wavelength),
        }
    }

    fn require(value: Option<f64>, name: &'static str) -> Result<f64> {
        match value {
            Some(v) if v.is_finite() && v != 0.0 => Ok(v),
            Some(_) => Err(Error::param(name, "must be finite and nonzero")),
            None => Err(Error::MissingMetadata(name)),
        }
    }

    /// Source-plane position per detector metre.
    pub fn position_factor(&self) -> Result<f64> {
        Ok(1.0 / Self::require(self.magnification, "magnification")?.abs())
    }

    /// Source-plane wavenumber per detector metre.
    pub fn momentum_factor(&self) -> Result<f64> {
        let f = Self::require(self.focal, "focal")?;
        let lambda = Self::require(self.wavelength, "wavelength")?;
        Ok(2.0 * std::f64::consts::PI / lambda / f.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessKind {
    /// `Var(u)·Var(v) ≥ 1`.
    Mgvt,
    /// `Var(u) + Var(v) ≥ 2`.
    Duan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// True difference and sum variances of the joint distribution.
    Joint,
    /// Conditional slice variances standing in for the joint ones.
    ConditionalProxy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrelationSigns {
    pub position: i8,
    pub momentum: i8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessResult {
    pub kind: WitnessKind,
    pub estimator: Estimator,
    pub var_x_minus: f64,
    pub var_p_plus: f64,
    /// Product (MGVT) or sum (Duan) of the two variances.
    pub value: f64,
    pub uncertainty: f64,
    pub bound: f64,
    pub violated: bool,
    /// `(bound - value) / uncertainty`; `None` for exact (zero-uncertainty) values.
    pub significance: Option<f64>,
    pub correlation_signs: CorrelationSigns,
}

impl WitnessResult {
    fn new(
        kind: WitnessKind,
        estimator: Estimator,
        var_x: f64,
        var_p: f64,
        uncertainty: f64,
        signs: CorrelationSigns,
    ) -> Self {
        let (value, bound) = match kind {
            WitnessKind::Mgvt => (var_x * var_p, MGVT_BOUND),
            WitnessKind::Duan => (var_x + var_p, DUAN_BOUND),
        };
        Self {
            kind,
            estimator,
            var_x_minus: var_x,
            var_p_plus: var_p,
            value,
            uncertainty,
            bound,
            violated: value < bound,
            significance: (uncertainty > 0.0).then(|| (bound - value) / uncertainty),
            correlation_signs: signs,
        }
    }
}

fn sign_of(correlation: f64) -> i8 {
    if correlation > SIGN_THRESHOLD {
        1
    } else if correlation < -SIGN_THRESHOLD {
        -1
    } else {
        0
    }
}

fn check_normalized(map: &CoincidenceMap) -> Result<()> {
    let s = map.sum();
    if (s - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::Unnormalized(s));
    }
    Ok(())
}

/// Source-plane coordinate factor for each axis of a position-basis map.
fn position_factor(map: &CoincidenceMap, optics: Option<&OpticsMetadata>) -> Result<f64> {
    if map.domain(Arm::Signal) != Domain::Position || map.domain(Arm::Idler) != Domain::Position {
        return Err(Error::param("position_map", "must be in the position representation"));
    }
    match optics {
        Some(o) if o.magnification.is_some() => o.position_factor(),
        _ => Ok(1.0),
    }
}

/// Source-plane wavenumber factor for a momentum-basis map: one for maps held
/// in the wavenumber representation, `k/f` for far-field detector maps.
fn momentum_factor(map: &CoincidenceMap, optics: Option<&OpticsMetadata>) -> Result<f64> {
    match (map.domain(Arm::Signal), map.domain(Arm::Idler)) {
        (Domain::Wavenumber, Domain::Wavenumber) => Ok(1.0),
        (Domain::Position, Domain::Position) => optics
            .ok_or(Error::MissingMetadata("focal"))?
            .momentum_factor(),
        _ => Err(Error::param("momentum_map", "mixed representations")),
    }
}

/// `Var(x₁ - x₂)` under a position map and `Var(p₁ + p₂)` under a momentum map,
/// both dimensionless, without any sign checks.
pub fn joint_variances(
    position_map: &CoincidenceMap,
    momentum_map: &CoincidenceMap,
    units: &UnitConvention,
    optics: Option<&OpticsMetadata>,
) -> Result<(f64, f64)> {
    let fx = position_factor(position_map, optics)? / units.x_scale();
    let fp = momentum_factor(momentum_map, optics)? / units.p_scale();
    let (_, vx) = position_map.combination_moments(fx, -fx);
    let (_, vp) = momentum_map.combination_moments(fp, fp);
    Ok((vx, vp))
}

fn from_maps(
    kind: WitnessKind,
    position_map: &CoincidenceMap,
    momentum_map: &CoincidenceMap,
    units: &UnitConvention,
    optics: Option<&OpticsMetadata>,
) -> Result<WitnessResult> {
    check_normalized(position_map)?;
    check_normalized(momentum_map)?;
    let signs = CorrelationSigns {
        position: sign_of(position_map.correlation()),
        momentum: sign_of(momentum_map.correlation()),
    };
    if signs.position < 0 {
        return Err(Error::SignConvention(
            "positions are anti-correlated; x1 - x2 is not the correlated combination".into(),
        ));
    }
    if signs.momentum > 0 {
        return Err(Error::SignConvention(
            "momenta are correlated; p1 + p2 is not the anti-correlated combination".into(),
        ));
    }
    let (vx, vp) = joint_variances(position_map, momentum_map, units, optics)?;
    Ok(WitnessResult::new(kind, Estimator::Joint, vx, vp, 0.0, signs))
}

/// Product criterion on exact maps.
///
/// `optics` is needed only when the momentum map is in detector coordinates
/// (or the position map is magnified).
pub fn witness_from_map(
    position_map: &CoincidenceMap,
    momentum_map: &CoincidenceMap,
    units: &UnitConvention,
    optics: Option<&OpticsMetadata>,
) -> Result<WitnessResult> {
    from_maps(WitnessKind::Mgvt, position_map, momentum_map, units, optics)
}

/// Sum criterion on exact maps.
pub fn duan_witness(
    position_map: &CoincidenceMap,
    momentum_map: &CoincidenceMap,
    units: &UnitConvention,
    optics: Option<&OpticsMetadata>,
) -> Result<WitnessResult> {
    from_maps(WitnessKind::Duan, position_map, momentum_map, units, optics)
}

/// Product criterion from fitted conditional scans.
///
/// The fitted conditional variances stand in for the difference and sum
/// variances. Fit uncertainties propagate to first order.
pub fn witness_from_scans(
    position_scan: &ScanResult,
    momentum_scan: &ScanResult,
    units: &UnitConvention,
    optics: &OpticsMetadata,
) -> Result<WitnessResult> {
    if position_scan.metadata.basis != Basis::Position {
        return Err(Error::param("position_scan", "scan basis is not position"));
    }
    if momentum_scan.metadata.basis != Basis::Momentum {
        return Err(Error::param("momentum_scan", "scan basis is not momentum"));
    }
    let fx = optics.position_factor()? / units.x_scale();
    let fp = optics.momentum_factor()? / units.p_scale();
    let (vx, dvx) = variance_from_fit(&position_scan.fit)?;
    let (vp, dvp) = variance_from_fit(&momentum_scan.fit)?;
    let (vx, dvx) = (vx * fx * fx, dvx * fx * fx);
    let (vp, dvp) = (vp * fp * fp, dvp * fp * fp);
    let product = vx * vp;
    let uncertainty = product * ((dvx / vx).powi(2) + (dvp / vp).powi(2)).sqrt();
    Ok(WitnessResult::new(
        WitnessKind::Mgvt,
        Estimator::ConditionalProxy,
        vx,
        vp,
        uncertainty,
        CorrelationSigns {
            position: 0,
            momentum: 0,
        },
    ))
}

/// Machine-readable witness report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    #[serde(rename = "Z")]
    pub z: f64,
    pub basis_config: String,
    pub var_x: f64,
    pub var_p: f64,
    pub product: f64,
    pub uncertainty: f64,
    pub violated: bool,
    pub significance: Option<f64>,
    pub estimator: Estimator,
    pub variance_convention: String,
}

impl WitnessReport {
    pub fn new(z: f64, basis_config: impl Into<String>, result: &WitnessResult) -> Self {
        Self {
            z,
            basis_config: basis_config.into(),
            var_x: result.var_x_minus,
            var_p: result.var_p_plus,
            product: result.value,
            uncertainty: result.uncertainty,
            violated: result.violated,
            significance: result.significance,
            estimator: result.estimator,
            variance_convention: "variances (not standard deviations)".into(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Table with columns `Z,product,uncertainty`, one row per report.
pub fn write_table<W: Write>(mut w: W, reports: &[WitnessReport]) -> Result<()> {
    writeln!(w, "Z,product,uncertainty")?;
    for r in reports {
        writeln!(w, "{},{:.6},{:.6}", r.z, r.product, r.uncertainty)?;
    }
    Ok(())
}
