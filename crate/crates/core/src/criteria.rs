//! Nonclassicality tests on joint detected-photon moments.
//!
//! Each test is a left-hand side evaluated on a [`JointMoments`] table, so
//! the same code runs on exact oracle moments and on sample moments. Classical
//! states reach the boundary value up to rounding; verdicts use strict
//! inequalities, and on exact moments the margin must also exceed
//! [`EXACT_TOLERANCE`], so a state sitting on the boundary is not certified
//! nonclassical.
//!
//! The Schwarz test compares the cross moment against factorial
//! autocorrelations `⟨m(m-1)⟩`. With raw `⟨m²⟩` in the denominator the shot
//! noise term `η(1-η)⟨n⟩` of each arm pushes twin beams below one at low
//! efficiency, so that variant ([`schwarz_raw`]) is kept only for comparison.

use crate::error::{Error, Result};
use crate::estimators::{BootstrapConfig, SeriesAnalysis};
use crate::moments::JointMoments;
use crate::sampler::ShotSeries;

/// Margin below which an exact-moment verdict counts as the boundary.
pub const EXACT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    Schwarz,
    NoiseReduction,
    HighOrder,
}

impl Criterion {
    pub const ALL: [Criterion; 3] = [Criterion::Schwarz, Criterion::NoiseReduction, Criterion::HighOrder];

    pub fn name(&self) -> &'static str {
        match self {
            Criterion::Schwarz => "schwarz",
            Criterion::NoiseReduction => "nrf",
            Criterion::HighOrder => "high_order",
        }
    }

    pub fn lhs(&self, t: &JointMoments) -> Result<f64> {
        match self {
            Criterion::Schwarz => schwarz(t),
            Criterion::NoiseReduction => noise_reduction_factor(t),
            Criterion::HighOrder => high_order_criterion(t),
        }
    }

    /// Distance from the classical boundary, positive on the nonclassical side.
    pub fn margin(&self, lhs: f64) -> f64 {
        match self {
            Criterion::NoiseReduction => 1.0 - lhs,
            Criterion::Schwarz | Criterion::HighOrder => lhs - 1.0,
        }
    }

    pub fn passes(&self, lhs: f64) -> bool {
        self.margin(lhs) > 0.0
    }

    pub fn passes_exact(&self, lhs: f64) -> bool {
        self.margin(lhs) > EXACT_TOLERANCE
    }
}

/// `⟨m₁m₂⟩ / √(⟨m₁(m₁-1)⟩⟨m₂(m₂-1)⟩)`.
pub fn schwarz(t: &JointMoments) -> Result<f64> {
    let denom = t.factorial(2, 0)? * t.factorial(0, 2)?;
    if denom <= 0.0 {
        return Err(Error::NotEvaluable(
            "vanishing factorial second moment in an arm".into(),
        ));
    }
    Ok(t.raw(1, 1)? / denom.sqrt())
}

/// `⟨m₁m₂⟩ / √(⟨m₁²⟩⟨m₂²⟩)` with raw second moments.
pub fn schwarz_raw(t: &JointMoments) -> Result<f64> {
    let denom = t.raw(2, 0)? * t.raw(0, 2)?;
    if denom <= 0.0 {
        return Err(Error::NotEvaluable("vanishing second moment in an arm".into()));
    }
    Ok(t.raw(1, 1)? / denom.sqrt())
}

/// `[⟨(m₁-m₂)²⟩ - ⟨m₁-m₂⟩²] / ⟨m₁+m₂⟩`.
pub fn noise_reduction_factor(t: &JointMoments) -> Result<f64> {
    let total = t.mean1() + t.mean2();
    if total <= 0.0 {
        return Err(Error::NotEvaluable("zero total mean".into()));
    }
    let diff_sq = t.raw(2, 0)? + t.raw(0, 2)? - 2.0 * t.raw(1, 1)?;
    let diff_mean = t.mean1() - t.mean2();
    Ok((diff_sq - diff_mean * diff_mean) / total)
}

/// `⟨m₁⟩⟨m₂⟩ (g²² - [g¹³]_s)/g¹¹ + √(⟨m₁⟩⟨m₂⟩) [g¹²]_s/g¹¹`.
pub fn high_order_criterion(t: &JointMoments) -> Result<f64> {
    let (m1, m2) = (t.mean1(), t.mean2());
    if m1 <= 0.0 || m2 <= 0.0 {
        return Err(Error::NotEvaluable("zero arm mean".into()));
    }
    let g11 = t.g(1, 1)?;
    if g11 <= 0.0 {
        return Err(Error::NotEvaluable("vanishing g^11".into()));
    }
    let g22 = t.g(2, 2)?;
    let g13_s = 0.5 * (t.g(1, 3)? + t.g(3, 1)?);
    let g12_s = 0.5 * (t.g(1, 2)? + t.g(2, 1)?);
    let prod = m1 * m2;
    Ok(prod * (g22 - g13_s) / g11 + prod.sqrt() * g12_s / g11)
}

/// `g_n²² - [g_n³¹]_s`, whose sign the high-order test reproduces for
/// balanced arms.
pub fn normally_ordered_excess(t: &JointMoments) -> Result<f64> {
    let g22 = t.normally_ordered_g(2, 2)?;
    let g31_s = 0.5 * (t.normally_ordered_g(3, 1)? + t.normally_ordered_g(1, 3)?);
    Ok(g22 - g31_s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriterionOutcome {
    pub lhs: f64,
    /// Bootstrap error; `None` for exact moments.
    pub stderr: Option<f64>,
    pub pass: bool,
    /// Margin over its standard error, positive on the nonclassical side.
    pub z_score: Option<f64>,
}

/// The three tests; a `None` entry was not evaluable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriteriaReport {
    pub schwarz: Option<CriterionOutcome>,
    pub nrf: Option<CriterionOutcome>,
    pub high_order: Option<CriterionOutcome>,
}

impl CriteriaReport {
    pub fn get(&self, c: Criterion) -> Option<&CriterionOutcome> {
        match c {
            Criterion::Schwarz => self.schwarz.as_ref(),
            Criterion::NoiseReduction => self.nrf.as_ref(),
            Criterion::HighOrder => self.high_order.as_ref(),
        }
    }

    fn from_fn(mut f: impl FnMut(Criterion) -> Option<CriterionOutcome>) -> Self {
        CriteriaReport {
            schwarz: f(Criterion::Schwarz),
            nrf: f(Criterion::NoiseReduction),
            high_order: f(Criterion::HighOrder),
        }
    }
}

/// Evaluates all tests on exact (or otherwise error-free) moments.
pub fn evaluate_moments(t: &JointMoments) -> CriteriaReport {
    CriteriaReport::from_fn(|c| {
        c.lhs(t).ok().map(|lhs| CriterionOutcome {
            lhs,
            stderr: None,
            pass: c.passes_exact(lhs),
            z_score: None,
        })
    })
}

/// Evaluates all tests with bootstrap errors from an existing analysis (the
/// table must reach order 3 in both arms).
pub fn evaluate_analysis(analysis: &SeriesAnalysis) -> CriteriaReport {
    CriteriaReport::from_fn(|c| {
        analysis.measured(|t| c.lhs(t)).ok().map(|m| CriterionOutcome {
            lhs: m.value,
            stderr: Some(m.stderr),
            pass: c.passes(m.value),
            z_score: (m.stderr > 0.0).then(|| c.margin(m.value) / m.stderr),
        })
    })
}

pub fn evaluate_series(series: &ShotSeries, boot: &BootstrapConfig) -> Result<CriteriaReport> {
    Ok(evaluate_analysis(&SeriesAnalysis::new(series, 3, 3, boot)?))
}
