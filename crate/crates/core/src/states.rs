//! Photon-number statistics of the source families before detection.
//!
//! A `μ`-mode twin beam carries the same total photon number `n` in both
//! arms, distributed as a negative binomial with shape `μ` (a sum of `μ`
//! equally populated single-mode thermal distributions). The classical
//! bipartite state is one multimode thermal beam split at a beam splitter,
//! so its total photon number follows the same law. Coherent light is
//! Poissonian regardless of the mode count.

use std::fmt;
use std::str::FromStr;

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Highest factorial-moment order served by [`photon_factorial_moment`].
pub const MAX_FACTORIAL_ORDER: u32 = 8;

/// Below this `n` the Pochhammer ratio `Γ(n+μ)/Γ(μ)` is summed term by term.
const DIRECT_POCHHAMMER_LIMIT: u64 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SourceKind {
    TwinBeam,
    MultimodeThermal,
    Coherent,
}

impl SourceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SourceKind::TwinBeam => "twin_beam",
            SourceKind::MultimodeThermal => "multimode_thermal",
            SourceKind::Coherent => "coherent",
        }
    }
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "twin_beam" | "twinbeam" | "twb" => Ok(SourceKind::TwinBeam),
            "multimode_thermal" | "thermal" | "multimodethermal" => {
                Ok(SourceKind::MultimodeThermal)
            }
            "coherent" => Ok(SourceKind::Coherent),
            other => Err(Error::domain(format!("unknown source kind `{other}`"))),
        }
    }
}

/// An optical source: which state, its mean photon number per pulse (total
/// over all modes), its number of equally populated modes, and the
/// beam-splitter transmittance used to form classical bipartite states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceSpec {
    pub kind: SourceKind,
    pub mean_photons: f64,
    pub modes: f64,
    pub transmittance: f64,
}

impl SourceSpec {
    pub const DEFAULT_TRANSMITTANCE: f64 = 0.5;

    pub fn new(kind: SourceKind, mean_photons: f64, modes: f64, transmittance: f64) -> Result<Self> {
        let spec = SourceSpec {
            kind,
            mean_photons,
            modes,
            transmittance,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn twin_beam(mean_photons: f64, modes: f64) -> Result<Self> {
        Self::new(SourceKind::TwinBeam, mean_photons, modes, Self::DEFAULT_TRANSMITTANCE)
    }

    pub fn multimode_thermal(mean_photons: f64, modes: f64, transmittance: f64) -> Result<Self> {
        Self::new(SourceKind::MultimodeThermal, mean_photons, modes, transmittance)
    }

    pub fn coherent(mean_photons: f64, transmittance: f64) -> Result<Self> {
        Self::new(SourceKind::Coherent, mean_photons, 1.0, transmittance)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mean_photons.is_finite() || self.mean_photons < 0.0 {
            return Err(Error::domain(format!(
                "mean photon number must be finite and >= 0, got {}",
                self.mean_photons
            )));
        }
        if self.kind != SourceKind::Coherent && !(self.modes.is_finite() && self.modes > 0.0) {
            return Err(Error::domain(format!(
                "mode number must be finite and > 0, got {}",
                self.modes
            )));
        }
        if !(self.transmittance > 0.0 && self.transmittance < 1.0) {
            return Err(Error::domain(format!(
                "transmittance must lie in (0, 1), got {}",
                self.transmittance
            )));
        }
        Ok(())
    }

    /// Law of the total photon number `n` of one pulse.
    pub fn photon_law(&self) -> PhotonLaw {
        if self.mean_photons == 0.0 {
            return PhotonLaw::Vacuum;
        }
        match self.kind {
            SourceKind::TwinBeam | SourceKind::MultimodeThermal => PhotonLaw::NegativeBinomial {
                shape: self.modes,
                mean: self.mean_photons,
            },
            SourceKind::Coherent => PhotonLaw::Poisson {
                mean: self.mean_photons,
            },
        }
    }

    pub fn pmf(&self, n: u64) -> f64 {
        self.photon_law().pmf(n)
    }
}

/// Distribution of the total photon number of a pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhotonLaw {
    Vacuum,
    /// `μ`-mode multithermal law with shape `μ` and mean `⟨n⟩`.
    NegativeBinomial { shape: f64, mean: f64 },
    Poisson { mean: f64 },
}

impl PhotonLaw {
    pub fn ln_pmf(&self, n: u64) -> f64 {
        match *self {
            PhotonLaw::Vacuum => {
                if n == 0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            PhotonLaw::NegativeBinomial { shape, mean } => nb_ln_pmf(n, shape, mean),
            PhotonLaw::Poisson { mean } => {
                let nf = n as f64;
                nf * mean.ln() - mean - ln_gamma(nf + 1.0)
            }
        }
    }

    pub fn pmf(&self, n: u64) -> f64 {
        self.ln_pmf(n).exp()
    }

    /// Log-probability of `n = 0`.
    fn ln_p0(&self) -> f64 {
        match *self {
            PhotonLaw::Vacuum => 0.0,
            PhotonLaw::NegativeBinomial { shape, mean } => -shape * (mean / shape).ln_1p(),
            PhotonLaw::Poisson { mean } => -mean,
        }
    }

    /// `ln(p(n+1)/p(n))`.
    fn ln_ratio(&self, n: u64) -> f64 {
        let nf = n as f64;
        match *self {
            PhotonLaw::Vacuum => f64::NEG_INFINITY,
            PhotonLaw::NegativeBinomial { shape, mean } => {
                ((nf + shape) / (nf + 1.0)).ln() - (shape / mean).ln_1p()
            }
            PhotonLaw::Poisson { mean } => (mean / (nf + 1.0)).ln(),
        }
    }

    /// Upper bound on `p(i+1)/p(i)` over all `i >= n`.
    fn ratio_sup_from(&self, n: u64) -> f64 {
        match *self {
            PhotonLaw::Vacuum => 0.0,
            PhotonLaw::NegativeBinomial { shape, mean } => {
                let q = mean / (mean + shape);
                if shape >= 1.0 {
                    self.ln_ratio(n).exp()
                } else {
                    q
                }
            }
            PhotonLaw::Poisson { .. } => self.ln_ratio(n).exp(),
        }
    }

    /// Iterates `(n, p(n))` for `n = 0, 1, ...` through the log-space
    /// ratio recurrence.
    pub fn iter(&self) -> PmfIter {
        PmfIter {
            law: *self,
            n: 0,
            ln_p: self.ln_p0(),
        }
    }

    /// The law whose pmf is proportional to `n^(r) p(n)` shifted down by
    /// `r`: the same success probability with shape `μ + r` for the negative
    /// binomial, the same law for Poisson.
    pub fn factorial_weighted(&self, r: u32) -> PhotonLaw {
        match *self {
            PhotonLaw::NegativeBinomial { shape, mean } => {
                let new_shape = shape + r as f64;
                PhotonLaw::NegativeBinomial {
                    shape: new_shape,
                    mean: mean * new_shape / shape,
                }
            }
            other => other,
        }
    }

    /// Smallest `N` with `Σ_{n>N} p(n) <= tail`.
    pub fn cutoff(&self, tail: f64) -> u64 {
        if let PhotonLaw::Vacuum = self {
            return 0;
        }
        // Forward: find an index far enough that the geometric bound on the
        // mass beyond it is negligible against `tail`.
        let negligible = tail * 1e-6;
        let mut n = 0u64;
        let mut ln_p = self.ln_p0();
        loop {
            let r = self.ratio_sup_from(n);
            if r < 1.0 && ln_p + (r / (1.0 - r)).ln() < negligible.ln() {
                break;
            }
            ln_p += self.ln_ratio(n);
            n += 1;
        }
        // Backward: accumulate the suffix mass until it exceeds `tail`.
        let mut suffix = 0.0;
        loop {
            suffix += ln_p.exp();
            if suffix > tail || n == 0 {
                return n;
            }
            n -= 1;
            ln_p -= self.ln_ratio(n);
        }
    }
}

pub struct PmfIter {
    law: PhotonLaw,
    n: u64,
    ln_p: f64,
}

impl Iterator for PmfIter {
    type Item = (u64, f64);

    fn next(&mut self) -> Option<Self::Item> {
        let item = (self.n, self.ln_p.exp());
        self.ln_p += self.law.ln_ratio(self.n);
        self.n += 1;
        Some(item)
    }
}

fn nb_ln_pmf(n: u64, mu: f64, mean: f64) -> f64 {
    let ln_p0 = -mu * (mean / mu).ln_1p();
    if n == 0 {
        return ln_p0;
    }
    let ln_q = -(mu / mean).ln_1p();
    let body = if n <= DIRECT_POCHHAMMER_LIMIT {
        (0..n)
            .map(|i| ((mu + i as f64) / (i as f64 + 1.0)).ln())
            .sum::<f64>()
    } else {
        let nf = n as f64;
        ln_gamma(nf + mu) - ln_gamma(nf + 1.0) - ln_gamma(mu)
    };
    ln_p0 + body + n as f64 * ln_q
}

/// Multimode thermal (negative binomial) photon-number probability
/// `Γ(n+μ)/(n! Γ(μ)) (1+⟨n⟩/μ)^(-μ) (1+μ/⟨n⟩)^(-n)`.
pub fn nb_pmf(n: u64, mu: f64, mean: f64) -> Result<f64> {
    if !mu.is_finite() || !mean.is_finite() {
        return Err(Error::domain(format!("non-finite pmf input (mu={mu}, mean={mean})")));
    }
    if mu <= 0.0 {
        return Err(Error::domain(format!("mode number must be > 0, got {mu}")));
    }
    if mean < 0.0 {
        return Err(Error::domain(format!("mean must be >= 0, got {mean}")));
    }
    if mean == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    Ok(nb_ln_pmf(n, mu, mean).exp())
}

/// `E[n(n-1)...(n-r+1)]` of the total photon number.
pub fn photon_factorial_moment(spec: &SourceSpec, order: u32) -> Result<f64> {
    if order > MAX_FACTORIAL_ORDER {
        return Err(Error::order(format!(
            "factorial moment order {order} exceeds {MAX_FACTORIAL_ORDER}"
        )));
    }
    let mean = spec.mean_photons;
    Ok(match spec.kind {
        SourceKind::Coherent => mean.powi(order as i32),
        SourceKind::TwinBeam | SourceKind::MultimodeThermal => (0..order)
            .map(|i| mean * (1.0 + i as f64 / spec.modes))
            .product(),
    })
}

/// Smallest `N` such that the photon-number mass above `N` is at most
/// `tail_mass`.
pub fn truncation_cutoff(spec: &SourceSpec, tail_mass: f64) -> Result<u64> {
    if !(tail_mass > 0.0 && tail_mass < 1.0) {
        return Err(Error::domain(format!("tail mass must lie in (0, 1), got {tail_mass}")));
    }
    Ok(spec.photon_law().cutoff(tail_mass))
}

/// Cutoff large enough that, for every `r <= order`, the neglected part of
/// `E[n^(r)]` is at most `tail_mass` relative to the full moment.
pub fn moment_cutoff(spec: &SourceSpec, tail_mass: f64, order: u32) -> Result<u64> {
    let base = truncation_cutoff(spec, tail_mass)?;
    let law = spec.photon_law();
    Ok((1..=order)
        .map(|r| law.factorial_weighted(r).cutoff(tail_mass) + r as u64)
        .fold(base, u64::max))
}
