//! Seeded shot-by-shot Monte Carlo of the detection experiment.
//!
//! Multithermal photon numbers are drawn as a Gamma-Poisson mixture
//! (`w ~ Gamma(μ, ⟨n⟩/μ)`, `n ~ Poisson(w)`), which is the negative binomial
//! of shape `μ` for any real `μ > 0`. Each shot draws from its own substream
//! keyed by `(seed, shot index)`, so a series is a pure function of
//! `(source, detection, seed, count)` whatever the worker count.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Poisson};
use rayon::prelude::*;

use crate::detection::DetectionSpec;
use crate::error::{Error, Result};
use crate::rng::{substream, Domain};
use crate::states::{SourceKind, SourceSpec};

/// Detected photons in the two arms for one shot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ShotRecord {
    pub m1: u32,
    pub m2: u32,
}

impl ShotRecord {
    pub fn new(m1: u32, m2: u32) -> Self {
        ShotRecord { m1, m2 }
    }
}

/// An ordered run of shots together with the parameters that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotSeries {
    records: Vec<ShotRecord>,
    source: SourceSpec,
    detection: DetectionSpec,
    seed: u64,
}

impl ShotSeries {
    pub fn from_records(
        records: Vec<ShotRecord>,
        source: SourceSpec,
        detection: DetectionSpec,
        seed: u64,
    ) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::domain("a shot series needs at least one record"));
        }
        Ok(ShotSeries {
            records,
            source,
            detection,
            seed,
        })
    }

    pub fn records(&self) -> &[ShotRecord] {
        &self.records
    }

    pub fn source(&self) -> &SourceSpec {
        &self.source
    }

    pub fn detection(&self) -> &DetectionSpec {
        &self.detection
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn count(&self) -> usize {
        self.records.len()
    }
}

/// Per-source sampling state shared by all shots of a series.
#[derive(Debug, Clone)]
pub struct ShotSampler {
    source: SourceSpec,
    detection: DetectionSpec,
    intensity: Option<Gamma<f64>>,
    coherent_means: (f64, f64),
}

impl ShotSampler {
    pub fn new(source: &SourceSpec, detection: &DetectionSpec) -> Result<Self> {
        source.validate()?;
        detection.validate()?;
        let intensity = match source.kind {
            SourceKind::TwinBeam | SourceKind::MultimodeThermal if source.mean_photons > 0.0 => Some(
                Gamma::new(source.modes, source.mean_photons / source.modes)
                    .map_err(|e| Error::domain(format!("intensity law: {e}")))?,
            ),
            _ => None,
        };
        let tau = source.transmittance;
        let coherent_means = (
            tau * detection.eta1 * source.mean_photons,
            (1.0 - tau) * detection.eta2 * source.mean_photons,
        );
        Ok(ShotSampler {
            source: *source,
            detection: *detection,
            intensity,
            coherent_means,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ShotRecord {
        match self.source.kind {
            SourceKind::TwinBeam => {
                let n = self.photon_number(rng);
                ShotRecord::new(thin(n, self.detection.eta1, rng), thin(n, self.detection.eta2, rng))
            }
            SourceKind::MultimodeThermal => {
                let n = self.photon_number(rng);
                let n1 = thin(n, self.source.transmittance, rng);
                let n2 = n - n1;
                ShotRecord::new(thin(n1, self.detection.eta1, rng), thin(n2, self.detection.eta2, rng))
            }
            SourceKind::Coherent => ShotRecord::new(
                poisson(self.coherent_means.0, rng),
                poisson(self.coherent_means.1, rng),
            ),
        }
    }

    fn photon_number<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        match &self.intensity {
            Some(gamma) => poisson(gamma.sample(rng), rng),
            None => 0,
        }
    }
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u32 {
    if mean <= 0.0 {
        return 0;
    }
    let law = Poisson::new(mean).expect("finite positive Poisson mean");
    law.sample(rng) as u32
}

fn thin<R: Rng + ?Sized>(n: u32, p: f64, rng: &mut R) -> u32 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    let law = Binomial::new(n as u64, p).expect("valid binomial parameters");
    law.sample(rng) as u32
}

/// One shot drawn from `rng`.
pub fn sample_shot<R: Rng + ?Sized>(
    source: &SourceSpec,
    det: &DetectionSpec,
    rng: &mut R,
) -> Result<ShotRecord> {
    Ok(ShotSampler::new(source, det)?.sample(rng))
}

/// `count` shots, shot `i` drawn from substream `(seed, i)`.
pub fn sample_series(
    source: &SourceSpec,
    det: &DetectionSpec,
    count: usize,
    seed: u64,
) -> Result<ShotSeries> {
    if count == 0 {
        return Err(Error::domain("shot count must be >= 1"));
    }
    let sampler = ShotSampler::new(source, det)?;
    let records: Vec<ShotRecord> = (0..count as u64)
        .into_par_iter()
        .map(|i| sampler.sample(&mut substream(seed, Domain::Shots, i)))
        .collect();
    ShotSeries::from_records(records, *source, *det, seed)
}
