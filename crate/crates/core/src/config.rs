//! Sweep configuration: a flat TOML key/value file plus command-line
//! overrides.
//!
//! ```toml
//! kind = "twin_beam"          # twin_beam | multimode_thermal | coherent
//! modes = 100.0
//! mean_detected = 1.0         # or mean_photons = 20.0
//! eta = 0.05                  # or eta1 = ..., eta2 = ...
//! transmittance = 0.5
//! axis = "mean_detected"      # mean_detected | modes | eta
//! values = [0.5, 1.0, 2.0, 3.88]
//! shots = 50000
//! seed = 1
//! orders = "1:1,2:1,2:2,3:1"
//! ```

use std::fmt;
use std::str::FromStr;

use serde::Deserialize;

use crate::detection::DetectionSpec;
use crate::error::{Error, Result};
use crate::estimators::MIN_RESAMPLES;
use crate::oracle::DEFAULT_TAIL;
use crate::states::{SourceKind, SourceSpec};

pub const MIN_SHOTS_PER_POINT: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    MeanDetected,
    Modes,
    Eta,
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::MeanDetected => "mean_detected",
            SweepAxis::Modes => "modes",
            SweepAxis::Eta => "eta",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "mean_detected" => Ok(SweepAxis::MeanDetected),
            "modes" => Ok(SweepAxis::Modes),
            "eta" => Ok(SweepAxis::Eta),
            other => Err(Error::domain(format!("unknown sweep axis `{other}`"))),
        }
    }
}

/// Tables a run should produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Empirical,
    Theory,
    Oracle,
    Criteria,
}

/// Where the mean photon number of each point comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeanSetting {
    /// Fixed `⟨n⟩` per pulse.
    Photons(f64),
    /// Fixed per-arm average detected mean `⟨m₁+m₂⟩/2`; `⟨n⟩` follows.
    Detected(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub kind: SourceKind,
    pub modes: f64,
    /// Mean used on the axes that do not set it; ignored for
    /// [`SweepAxis::MeanDetected`].
    pub mean: Option<MeanSetting>,
    pub transmittance: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub shots: usize,
    pub seed: u64,
    pub orders: Vec<(u32, u32)>,
    pub bootstrap: usize,
    pub tail: f64,
    pub outputs: Vec<OutputKind>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: String,
    modes: Option<f64>,
    mean_photons: Option<f64>,
    mean_detected: Option<f64>,
    transmittance: Option<f64>,
    eta: Option<f64>,
    eta1: Option<f64>,
    eta2: Option<f64>,
    axis: String,
    values: Vec<f64>,
    shots: Option<usize>,
    seed: Option<u64>,
    orders: Option<String>,
    bootstrap: Option<usize>,
    tail: Option<f64>,
    outputs: Option<Vec<OutputKind>>,
}

/// A configuration problem, naming the offending field or location.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn field_err(field: &str, msg: impl fmt::Display) -> ConfigError {
    ConfigError(format!("field `{field}`: {msg}"))
}

/// Parses `"j:k,j:k,..."`; an empty string yields no orders.
pub fn parse_orders(s: &str) -> Result<Vec<(u32, u32)>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            let (j, k) = p
                .split_once(':')
                .ok_or_else(|| Error::domain(format!("order `{p}` is not of the form j:k")))?;
            let parse = |x: &str| {
                x.trim()
                    .parse::<u32>()
                    .map_err(|_| Error::domain(format!("order `{p}` has a non-integer part")))
            };
            Ok((parse(j)?, parse(k)?))
        })
        .collect()
}

pub fn format_orders(orders: &[(u32, u32)]) -> String {
    orders
        .iter()
        .map(|(j, k)| format!("{j}:{k}"))
        .collect::<Vec<_>>()
        .join(",")
}

impl SweepConfig {
    pub fn from_toml_str(text: &str) -> std::result::Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawConfig) -> std::result::Result<Self, ConfigError> {
        let kind: SourceKind = raw.kind.parse().map_err(|e| field_err("kind", e))?;
        let axis: SweepAxis = raw.axis.parse().map_err(|e| field_err("axis", e))?;
        let (eta1, eta2) = match (raw.eta, raw.eta1, raw.eta2) {
            (Some(e), None, None) => (e, e),
            (None, Some(a), Some(b)) => (a, b),
            (None, None, None) if axis == SweepAxis::Eta => (1.0, 1.0),
            _ => {
                return Err(field_err(
                    "eta",
                    "give either `eta` or both `eta1` and `eta2`",
                ))
            }
        };
        DetectionSpec::new(eta1, eta2).map_err(|e| field_err("eta", e))?;
        let mean = match (raw.mean_photons, raw.mean_detected) {
            (Some(_), Some(_)) => {
                return Err(field_err("mean_photons", "conflicts with `mean_detected`"))
            }
            (Some(n), None) => Some(MeanSetting::Photons(n)),
            (None, Some(m)) => Some(MeanSetting::Detected(m)),
            (None, None) => None,
        };
        if mean.is_none() && axis != SweepAxis::MeanDetected {
            return Err(field_err(
                "mean_photons",
                "one of `mean_photons` or `mean_detected` is required for this axis",
            ));
        }
        match mean {
            Some(MeanSetting::Photons(n)) if !(n.is_finite() && n >= 0.0) => {
                return Err(field_err("mean_photons", "must be finite and >= 0"))
            }
            Some(MeanSetting::Detected(m)) if !(m.is_finite() && m > 0.0) => {
                return Err(field_err("mean_detected", "must be finite and > 0"))
            }
            _ => {}
        }
        let modes = match raw.modes {
            Some(mu) => mu,
            None if kind == SourceKind::Coherent || axis == SweepAxis::Modes => 1.0,
            None => return Err(field_err("modes", "required for this source kind")),
        };
        if !(modes.is_finite() && modes > 0.0) {
            return Err(field_err("modes", "must be finite and > 0"));
        }
        let transmittance = raw.transmittance.unwrap_or(SourceSpec::DEFAULT_TRANSMITTANCE);
        if !(transmittance > 0.0 && transmittance < 1.0) {
            return Err(field_err("transmittance", "must lie in (0, 1)"));
        }
        if raw.values.is_empty() {
            return Err(field_err("values", "must not be empty"));
        }
        if raw.values.iter().any(|v| !v.is_finite()) {
            return Err(field_err("values", "must be finite"));
        }
        if raw.values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(field_err("values", "must be strictly increasing"));
        }
        let shots = raw.shots.unwrap_or(50_000);
        let orders = match raw.orders {
            Some(s) => parse_orders(&s).map_err(|e| field_err("orders", e))?,
            None => vec![(1, 1), (2, 1), (2, 2), (3, 1)],
        };
        let cfg = SweepConfig {
            kind,
            modes,
            mean,
            transmittance,
            eta1,
            eta2,
            axis,
            values: raw.values,
            shots,
            seed: raw.seed.unwrap_or(1),
            orders,
            bootstrap: raw.bootstrap.unwrap_or(1000),
            tail: raw.tail.unwrap_or(DEFAULT_TAIL),
            outputs: raw.outputs.unwrap_or_else(|| {
                vec![
                    OutputKind::Empirical,
                    OutputKind::Theory,
                    OutputKind::Oracle,
                    OutputKind::Criteria,
                ]
            }),
        };
        cfg.check_overridable()?;
        Ok(cfg)
    }

    /// Checks the fields that command-line flags may replace.
    pub fn check_overridable(&self) -> std::result::Result<(), ConfigError> {
        if self.shots < MIN_SHOTS_PER_POINT {
            return Err(field_err("shots", format!("must be >= {MIN_SHOTS_PER_POINT}")));
        }
        if self.bootstrap < MIN_RESAMPLES {
            return Err(field_err("bootstrap", format!("must be >= {MIN_RESAMPLES}")));
        }
        if !(self.tail > 0.0 && self.tail < 1.0) {
            return Err(field_err("tail", "must lie in (0, 1)"));
        }
        Ok(())
    }

    /// `key = value` lines recording every effective setting.
    pub fn provenance(&self) -> Vec<(String, String)> {
        let mean = match self.mean {
            Some(MeanSetting::Photons(n)) => ("mean_photons".to_string(), n.to_string()),
            Some(MeanSetting::Detected(m)) => ("mean_detected".to_string(), m.to_string()),
            None => ("mean".to_string(), "axis".to_string()),
        };
        vec![
            ("kind".into(), self.kind.to_string()),
            ("modes".into(), self.modes.to_string()),
            mean,
            ("transmittance".into(), self.transmittance.to_string()),
            ("eta1".into(), self.eta1.to_string()),
            ("eta2".into(), self.eta2.to_string()),
            ("axis".into(), self.axis.to_string()),
            (
                "values".into(),
                self.values.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
            ),
            ("shots".into(), self.shots.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("orders".into(), format_orders(&self.orders)),
            ("bootstrap".into(), self.bootstrap.to_string()),
            ("tail".into(), self.tail.to_string()),
        ]
    }
}
