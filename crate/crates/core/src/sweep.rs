//! Expansion of a [`SweepConfig`] into concrete source/detection points.

use crate::config::{MeanSetting, SweepAxis, SweepConfig};
use crate::detection::DetectionSpec;
use crate::error::{Error, Result};
use crate::rng::point_seed;
use crate::states::{SourceKind, SourceSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub axis: SweepAxis,
    pub axis_value: f64,
    pub source: SourceSpec,
    pub detection: DetectionSpec,
    pub seed: u64,
}

impl SweepPoint {
    /// Expected per-arm average detected mean `⟨m₁+m₂⟩/2`.
    pub fn mean_detected(&self) -> f64 {
        self.source.mean_photons * detection_factor(&self.source, &self.detection)
    }

    /// Mean efficiency of the two arms.
    pub fn eta(&self) -> f64 {
        0.5 * (self.detection.eta1 + self.detection.eta2)
    }

    pub fn file_name(&self) -> String {
        format!("point_{:03}_{}_{}.shots", self.index, self.axis, self.axis_value)
    }
}

/// `⟨m₁+m₂⟩ / (2⟨n⟩)` for the given source and detectors.
pub fn detection_factor(source: &SourceSpec, det: &DetectionSpec) -> f64 {
    match source.kind {
        SourceKind::TwinBeam => 0.5 * (det.eta1 + det.eta2),
        SourceKind::MultimodeThermal | SourceKind::Coherent => {
            0.5 * (source.transmittance * det.eta1 + (1.0 - source.transmittance) * det.eta2)
        }
    }
}

impl SweepConfig {
    pub fn points(&self) -> Result<Vec<SweepPoint>> {
        self.values
            .iter()
            .enumerate()
            .map(|(index, &v)| self.point(index, v))
            .collect()
    }

    fn point(&self, index: usize, value: f64) -> Result<SweepPoint> {
        let mut modes = self.modes;
        let (mut eta1, mut eta2) = (self.eta1, self.eta2);
        let mut mean = self.mean;
        match self.axis {
            SweepAxis::MeanDetected => mean = Some(MeanSetting::Detected(value)),
            SweepAxis::Modes => modes = value,
            SweepAxis::Eta => (eta1, eta2) = (value, value),
        }
        if self.kind == SourceKind::Coherent {
            modes = 1.0;
        }
        let detection = DetectionSpec::new(eta1, eta2)?;
        let provisional = SourceSpec::new(self.kind, 0.0, modes, self.transmittance)?;
        let mean_photons = match mean {
            Some(MeanSetting::Photons(n)) => n,
            Some(MeanSetting::Detected(m)) => {
                let f = detection_factor(&provisional, &detection);
                if f <= 0.0 {
                    return Err(Error::domain(format!(
                        "point {index}: a detected mean needs non-zero efficiency"
                    )));
                }
                m / f
            }
            None => return Err(Error::domain("no mean photon number for this sweep")),
        };
        let source = SourceSpec::new(self.kind, mean_photons, modes, self.transmittance)?;
        Ok(SweepPoint {
            index,
            axis: self.axis,
            axis_value: value,
            source,
            detection,
            seed: point_seed(self.seed, index as u64),
        })
    }
}
