//! Line-oriented experiment configuration.
//!
//! ```text
//! # comment
//! [section]
//! key = value
//! list = 0, 2, 4
//! ```
//!
//! Unknown sections or keys and malformed values are reported with their line
//! number. Absent keys keep their defaults.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::measurement::DetectorSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub pump_wavelength: f64,
    pub wavelength: f64,

    /// `gaussian_spdc` or `ideal_epr`.
    pub source_kind: String,
    pub sigma_plus: f64,
    pub sigma_minus: f64,

    pub grid_n: usize,
    pub grid_dx: f64,

    pub magnification: f64,
    pub invert: bool,
    pub fourier_focal: f64,

    /// Far-field Airy scale at the momentum detector [m].
    pub mask_x0: f64,
    pub mask_apodization: f64,
    /// Length of one unit of the mask parameter `Z` [m].
    pub z_unit: f64,

    pub crystal_face_z: Vec<f64>,
    pub propagated_z: Vec<f64>,
    pub propagation_distance: f64,

    pub signal_detector: DetectorSpec,
    pub idler_detector: DetectorSpec,

    pub scan_points: usize,
    pub position_span: f64,
    pub momentum_span: f64,
    pub integration_time: f64,
    pub peak_rate: f64,
    pub seed: u64,

    pub x_scale: f64,

    pub calibrate: bool,
    pub target_product: f64,

    pub oracles: Vec<String>,
}

pub const ORACLES: [&str; 4] = ["quadrature", "gaussian_beam", "airy_ballistics", "witness_saturation"];

impl Default for ExperimentConfig {
    fn default() -> Self {
        let n = 1024;
        let dx = 14e-6;
        let dq = 2.0 * std::f64::consts::PI / (n as f64 * dx);
        let wavelength = 810e-9;
        let focal = 0.3;
        let out_dx = dq * focal * wavelength / (2.0 * std::f64::consts::PI);
        Self {
            pump_wavelength: 405e-9,
            wavelength,
            source_kind: "gaussian_spdc".into(),
            sigma_plus: 10.0 * dq,
            // output of `calibrate` for the target product 0.090
            sigma_minus: 5.909 * 10.0 * dq,
            grid_n: n,
            grid_dx: dx,
            magnification: 3.0,
            invert: true,
            fourier_focal: focal,
            mask_x0: 20.0 * out_dx,
            mask_apodization: 0.75,
            z_unit: 0.05,
            crystal_face_z: vec![0.0, 2.0, 4.0, 6.0, 8.0],
            propagated_z: vec![0.0, 6.0, 12.0],
            propagation_distance: 0.02,
            signal_detector: DetectorSpec {
                aperture_sigma: 90e-6,
                efficiency: 1.0,
            },
            idler_detector: DetectorSpec {
                aperture_sigma: 90e-6,
                efficiency: 1.0,
            },
            scan_points: 61,
            position_span: 1.6e-3,
            momentum_span: 1.6e-3,
            integration_time: 10.0,
            peak_rate: 100.0,
            seed: 2024,
            x_scale: 1e-4,
            calibrate: false,
            target_product: 0.090,
            oracles: ORACLES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

fn config_err(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

fn parse_f64(line: usize, key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .parse()
        .map_err(|_| config_err(line, format!("`{key}`: `{v}` is not a number")))?;
    if !x.is_finite() {
        return Err(config_err(line, format!("`{key}` must be finite")));
    }
    Ok(x)
}

fn parse_list(line: usize, key: &str, v: &str) -> Result<Vec<f64>> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| parse_f64(line, key, s.trim())).collect()
}

fn parse_bool(line: usize, key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(config_err(line, format!("`{key}`: expected true or false, got `{v}`"))),
    }
}

fn parse_usize(line: usize, key: &str, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|_| config_err(line, format!("`{key}`: `{v}` is not a non-negative integer")))
}

fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-3..1e6).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(", ")
}

impl ExperimentConfig {
    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut lines = BTreeMap::new();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| config_err(line, "unterminated section header"))?
                    .trim();
                if !SECTIONS.contains(&name) {
                    return Err(config_err(line, format!("unknown section [{name}]")));
                }
                section = name.to_string();
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| config_err(line, format!("expected `key = value`, got `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let full = format!("{section}.{key}");
            if lines.insert(full.clone(), line).is_some() {
                return Err(config_err(line, format!("duplicate key `{full}`")));
            }
            cfg.set(line, &full, value)?;
        }
        cfg.validate_with(&lines)?;
        Ok(cfg)
    }

    fn set(&mut self, line: usize, key: &str, v: &str) -> Result<()> {
        let f = |v| parse_f64(line, key, v);
        match key {
            "light.pump_wavelength" => self.pump_wavelength = f(v)?,
            "light.wavelength" => self.wavelength = f(v)?,
            "source.kind" => self.source_kind = v.to_string(),
            "source.sigma_plus" => self.sigma_plus = f(v)?,
            "source.sigma_minus" => self.sigma_minus = f(v)?,
            "grid.n" => self.grid_n = parse_usize(line, key, v)?,
            "grid.dx" => self.grid_dx = f(v)?,
            "optics.magnification" => self.magnification = f(v)?,
            "optics.invert" => self.invert = parse_bool(line, key, v)?,
            "optics.fourier_focal" => self.fourier_focal = f(v)?,
            "mask.x0" => self.mask_x0 = f(v)?,
            "mask.apodization" => self.mask_apodization = f(v)?,
            "mask.z_unit" => self.z_unit = f(v)?,
            "campaign.crystal_face_airy.z" => self.crystal_face_z = parse_list(line, key, v)?,
            "campaign.propagated_plane_airy.z" => self.propagated_z = parse_list(line, key, v)?,
            "campaign.propagated_plane_airy.distance" => self.propagation_distance = f(v)?,
            "detector.signal.aperture_sigma" => self.signal_detector.aperture_sigma = f(v)?,
            "detector.signal.efficiency" => self.signal_detector.efficiency = f(v)?,
            "detector.idler.aperture_sigma" => self.idler_detector.aperture_sigma = f(v)?,
            "detector.idler.efficiency" => self.idler_detector.efficiency = f(v)?,
            "scan.points" => self.scan_points = parse_usize(line, key, v)?,
            "scan.position_span" => self.position_span = f(v)?,
            "scan.momentum_span" => self.momentum_span = f(v)?,
            "scan.integration_time" => self.integration_time = f(v)?,
            "scan.peak_rate" => self.peak_rate = f(v)?,
            "scan.seed" => {
                self.seed = v
                    .parse()
                    .map_err(|_| config_err(line, format!("`{key}`: `{v}` is not a u64")))?
            }
            "witness.x_scale" => self.x_scale = f(v)?,
            "calibration.enabled" => self.calibrate = parse_bool(line, key, v)?,
            "calibration.target_product" => self.target_product = f(v)?,
            "oracle.checks" => {
                self.oracles = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect()
            }
            _ => return Err(config_err(line, format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Check cross-field invariants. Errors name the line of the offending
    /// key when it was set explicitly, line 0 otherwise.
    pub fn validate(&self) -> Result<()> {
        self.validate_with(&BTreeMap::new())
    }

    fn validate_with(&self, lines: &BTreeMap<String, usize>) -> Result<()> {
        let at = |key: &str| lines.get(key).copied().unwrap_or(0);
        let positive = [
            ("light.pump_wavelength", self.pump_wavelength),
            ("light.wavelength", self.wavelength),
            ("source.sigma_plus", self.sigma_plus),
            ("source.sigma_minus", self.sigma_minus),
            ("grid.dx", self.grid_dx),
            ("optics.fourier_focal", self.fourier_focal),
            ("mask.x0", self.mask_x0),
            ("mask.z_unit", self.z_unit),
            ("scan.position_span", self.position_span),
            ("scan.momentum_span", self.momentum_span),
            ("scan.integration_time", self.integration_time),
            ("witness.x_scale", self.x_scale),
            ("calibration.target_product", self.target_product),
        ];
        for (key, v) in positive {
            if !(v > 0.0) {
                return Err(config_err(at(key), format!("`{key}` must be > 0")));
            }
        }
        let non_negative = [
            ("mask.apodization", self.mask_apodization),
            ("campaign.propagated_plane_airy.distance", self.propagation_distance),
            ("scan.peak_rate", self.peak_rate),
        ];
        for (key, v) in non_negative {
            if !(v >= 0.0) {
                return Err(config_err(at(key), format!("`{key}` must be >= 0")));
            }
        }
        if (self.wavelength - 2.0 * self.pump_wavelength).abs() > 1e-9 * self.wavelength {
            return Err(config_err(
                at("light.wavelength"),
                format!(
                    "degenerate down-conversion requires wavelength = 2 x pump wavelength ({} vs {})",
                    self.wavelength, self.pump_wavelength
                ),
            ));
        }
        if !matches!(self.source_kind.as_str(), "gaussian_spdc" | "ideal_epr") {
            return Err(config_err(
                at("source.kind"),
                format!("unknown source kind `{}`", self.source_kind),
            ));
        }
        if self.grid_n < 8 || !self.grid_n.is_power_of_two() {
            return Err(config_err(at("grid.n"), "`grid.n` must be a power of two >= 8"));
        }
        if self.magnification == 0.0 {
            return Err(config_err(at("optics.magnification"), "magnification must be nonzero"));
        }
        for (key, d) in [
            ("detector.signal", &self.signal_detector),
            ("detector.idler", &self.idler_detector),
        ] {
            if let Err(e) = d.validate() {
                let line = at(&format!("{key}.aperture_sigma")).max(at(&format!("{key}.efficiency")));
                return Err(config_err(line, format!("[{key}] {e}")));
            }
        }
        if self.scan_points < 5 {
            return Err(config_err(at("scan.points"), "a scan needs at least 5 points"));
        }
        for (key, zs) in [
            ("campaign.crystal_face_airy.z", &self.crystal_face_z),
            ("campaign.propagated_plane_airy.z", &self.propagated_z),
        ] {
            if zs.iter().any(|z| *z < 0.0) {
                return Err(config_err(at(key), "Z values must be >= 0"));
            }
        }
        if let Some(bad) = self.oracles.iter().find(|o| !ORACLES.contains(&o.as_str())) {
            return Err(config_err(at("oracle.checks"), format!("unknown oracle `{bad}`")));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |section: &str, entries: &[(&str, String)]| {
            writeln!(s, "[{section}]").unwrap();
            for (k, v) in entries {
                writeln!(s, "{k} = {v}").unwrap();
            }
            s.push('\n');
        };
        put(
            "light",
            &[
                ("pump_wavelength", fmt_f64(self.pump_wavelength)),
                ("wavelength", fmt_f64(self.wavelength)),
            ],
        );
        put(
            "source",
            &[
                ("kind", self.source_kind.clone()),
                ("sigma_plus", fmt_f64(self.sigma_plus)),
                ("sigma_minus", fmt_f64(self.sigma_minus)),
            ],
        );
        put(
            "grid",
            &[("n", self.grid_n.to_string()), ("dx", fmt_f64(self.grid_dx))],
        );
        put(
            "optics",
            &[
                ("magnification", fmt_f64(self.magnification)),
                ("invert", self.invert.to_string()),
                ("fourier_focal", fmt_f64(self.fourier_focal)),
            ],
        );
        put(
            "mask",
            &[
                ("x0", fmt_f64(self.mask_x0)),
                ("apodization", fmt_f64(self.mask_apodization)),
                ("z_unit", fmt_f64(self.z_unit)),
            ],
        );
        put("campaign.crystal_face_airy", &[("z", fmt_list(&self.crystal_face_z))]);
        put(
            "campaign.propagated_plane_airy",
            &[
                ("z", fmt_list(&self.propagated_z)),
                ("distance", fmt_f64(self.propagation_distance)),
            ],
        );
        for (name, d) in [("signal", &self.signal_detector), ("idler", &self.idler_detector)] {
            put(
                &format!("detector.{name}"),
                &[
                    ("aperture_sigma", fmt_f64(d.aperture_sigma)),
                    ("efficiency", fmt_f64(d.efficiency)),
                ],
            );
        }
        put(
            "scan",
            &[
                ("points", self.scan_points.to_string()),
                ("position_span", fmt_f64(self.position_span)),
                ("momentum_span", fmt_f64(self.momentum_span)),
                ("integration_time", fmt_f64(self.integration_time)),
                ("peak_rate", fmt_f64(self.peak_rate)),
                ("seed", self.seed.to_string()),
            ],
        );
        put("witness", &[("x_scale", fmt_f64(self.x_scale))]);
        put(
            "calibration",
            &[
                ("enabled", self.calibrate.to_string()),
                ("target_product", fmt_f64(self.target_product)),
            ],
        );
        put("oracle", &[("checks", self.oracles.join(", "))]);
        s.truncate(s.trim_end().len());
        s.push('\n');
        s
    }
}

const SECTIONS: [&str; 14] = [
    "light",
    "source",
    "grid",
    "optics",
    "mask",
    "campaign.crystal_face_airy",
    "campaign.propagated_plane_airy",
    "detector.signal",
    "detector.idler",
    "scan",
    "witness",
    "calibration",
    "oracle",
    "",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn round_trip_is_idempotent() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_text();
        let back = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn overrides_and_comments() {
        let cfg = ExperimentConfig::parse(
            "# test\n[grid]\nn = 256   # small\n[campaign.crystal_face_airy]\nz = 1, 3\n[oracle]\nchecks =\n",
        )
        .unwrap();
        assert_eq!(cfg.grid_n, 256);
        assert_eq!(cfg.crystal_face_z, vec![1.0, 3.0]);
        assert!(cfg.oracles.is_empty());
    }

    fn line_of(text: &str) -> usize {
        match ExperimentConfig::parse(text) {
            Err(Error::Config { line, .. }) => line,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn errors_are_line_addressed() {
        assert_eq!(line_of("[grid]\nn = 100\n"), 2);
        assert_eq!(line_of("[grid]\n\nfoo = 1\n"), 3);
        assert_eq!(line_of("[nope]\n"), 1);
        assert_eq!(line_of("[grid]\ndx = abc\n"), 2);
        assert_eq!(line_of("[light]\npump_wavelength = 405e-9\nwavelength = 800e-9\n"), 3);
        assert_eq!(line_of("[grid]\nn = 64\nn = 128\n"), 3);
        assert_eq!(line_of("[scan]\njunk\n"), 2);
        assert_eq!(line_of("[detector.idler]\nefficiency = 1.5\n"), 2);
        assert_eq!(line_of("[oracle]\nchecks = quadrature, bogus\n"), 2);
    }
}
