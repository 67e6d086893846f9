//! Exact joint detected-photon moments by truncated enumeration over the
//! photon number.
//!
//! * Twin beam: both arms share the photon number `n` and are thinned
//!   independently, so `E[m₁^j m₂^k] = Σ_n p(n) E[m₁^j|n] E[m₂^k|n]`.
//! * Split thermal: a binomial split at transmittance `τ` followed by
//!   detection is a trinomial thinning with `a = τη₁`, `b = (1-τ)η₂`, and
//!   `E[m₁^(r) m₂^(s) | n] = a^r b^s n^(r+s)`.
//! * Coherent: independent Poisson arms with means `a⟨n⟩` and `b⟨n⟩`, summed
//!   in closed form.
//!
//! The photon-number sum is cut where the neglected part of every factorial
//! moment up to the table's total order drops below `tail` (relative).

use crate::detection::{conditional_power_moment_unchecked, stirling2, DetectionSpec};
use crate::error::{Error, Result};
use crate::moments::JointMoments;
use crate::states::{moment_cutoff, SourceKind, SourceSpec};
use crate::sum::CompensatedSum;

/// Highest per-arm order supported by the oracle.
pub const MAX_ORACLE_ORDER: u32 = 6;

/// Default truncation bound.
pub const DEFAULT_TAIL: f64 = 1e-12;

fn check_orders(max_j: u32, max_k: u32) -> Result<()> {
    if max_j > MAX_ORACLE_ORDER || max_k > MAX_ORACLE_ORDER {
        return Err(Error::order(format!(
            "oracle supports orders up to {MAX_ORACLE_ORDER} per arm, got ({max_j},{max_k})"
        )));
    }
    Ok(())
}

/// Full table of exact joint moments up to `(max_j, max_k)`.
pub fn exact_joint_moments(
    source: &SourceSpec,
    det: &DetectionSpec,
    max_j: u32,
    max_k: u32,
    tail: f64,
) -> Result<JointMoments> {
    source.validate()?;
    det.validate()?;
    check_orders(max_j, max_k)?;
    let total = max_j + max_k;
    let cutoff = moment_cutoff(source, tail, total)?;
    let (raw, factorial) = match source.kind {
        SourceKind::TwinBeam => twin_beam_table(source, det, max_j, max_k, cutoff),
        SourceKind::MultimodeThermal => {
            let photon_fm = truncated_factorial_moments(source, total, cutoff);
            let a = source.transmittance * det.eta1;
            let b = (1.0 - source.transmittance) * det.eta2;
            split_table(max_j, max_k, |r, s| {
                a.powi(r as i32) * b.powi(s as i32) * photon_fm[(r + s) as usize]
            })
        }
        SourceKind::Coherent => {
            let l1 = source.transmittance * det.eta1 * source.mean_photons;
            let l2 = (1.0 - source.transmittance) * det.eta2 * source.mean_photons;
            split_table(max_j, max_k, |r, s| l1.powi(r as i32) * l2.powi(s as i32))
        }
    };
    Ok(JointMoments::from_parts(max_j, max_k, raw, factorial, Some(tail)))
}

fn twin_beam_table(
    source: &SourceSpec,
    det: &DetectionSpec,
    max_j: u32,
    max_k: u32,
    cutoff: u64,
) -> (Vec<f64>, Vec<f64>) {
    let cols = (max_k + 1) as usize;
    let len = (max_j as usize + 1) * cols;
    let mut raw = vec![CompensatedSum::default(); len];
    let mut fac = vec![CompensatedSum::default(); len];
    let mut a_raw = vec![0.0; max_j as usize + 1];
    let mut b_raw = vec![0.0; cols];
    let mut a_fac = vec![0.0; max_j as usize + 1];
    let mut b_fac = vec![0.0; cols];
    for (n, p) in source.photon_law().iter().take(cutoff as usize + 1) {
        if p == 0.0 {
            continue;
        }
        let nf = n as f64;
        let mut falling = 1.0;
        for r in 0..=max_j.max(max_k) {
            if r > 0 {
                falling *= nf - (r - 1) as f64;
            }
            if r <= max_j {
                a_raw[r as usize] = conditional_power_moment_unchecked(nf, det.eta1, r);
                a_fac[r as usize] = det.eta1.powi(r as i32) * falling;
            }
            if r <= max_k {
                b_raw[r as usize] = conditional_power_moment_unchecked(nf, det.eta2, r);
                b_fac[r as usize] = det.eta2.powi(r as i32) * falling;
            }
        }
        for j in 0..=max_j as usize {
            for k in 0..cols {
                raw[j * cols + k].add(p * a_raw[j] * b_raw[k]);
                fac[j * cols + k].add(p * a_fac[j] * b_fac[k]);
            }
        }
    }
    (
        raw.iter().map(CompensatedSum::value).collect(),
        fac.iter().map(CompensatedSum::value).collect(),
    )
}

/// Truncated `E[n^(t)]` for `t = 0..=order`.
fn truncated_factorial_moments(source: &SourceSpec, order: u32, cutoff: u64) -> Vec<f64> {
    let mut sums = vec![CompensatedSum::default(); order as usize + 1];
    for (n, p) in source.photon_law().iter().take(cutoff as usize + 1) {
        let nf = n as f64;
        let mut falling = 1.0;
        for (t, s) in sums.iter_mut().enumerate() {
            if t > 0 {
                falling *= nf - (t - 1) as f64;
            }
            if falling == 0.0 {
                break;
            }
            s.add(p * falling);
        }
    }
    sums.iter().map(CompensatedSum::value).collect()
}

/// Builds raw and factorial tables from a factorial-moment kernel
/// `(r, s) -> E[m₁^(r) m₂^(s)]`, expanding powers through
/// `m^j = Σ_r S(j, r) m^(r)`.
fn split_table(max_j: u32, max_k: u32, kernel: impl Fn(u32, u32) -> f64) -> (Vec<f64>, Vec<f64>) {
    let mut raw = Vec::new();
    let mut fac = Vec::new();
    for j in 0..=max_j {
        for k in 0..=max_k {
            let mut acc = CompensatedSum::default();
            for r in 0..=j {
                let sj = stirling2(j, r).expect("order within table") as f64;
                if sj == 0.0 {
                    continue;
                }
                for s in 0..=k {
                    let sk = stirling2(k, s).expect("order within table") as f64;
                    if sk != 0.0 {
                        acc.add(sj * sk * kernel(r, s));
                    }
                }
            }
            raw.push(acc.value());
            fac.push(kernel(j, k));
        }
    }
    (raw, fac)
}

/// `E[m₁^j m₂^k]`.
pub fn exact_joint_moment(
    source: &SourceSpec,
    det: &DetectionSpec,
    j: u32,
    k: u32,
    tail: f64,
) -> Result<f64> {
    exact_joint_moments(source, det, j.max(1), k.max(1), tail)?.raw(j, k)
}

fn zero_mean_to_domain(e: Error) -> Error {
    match e {
        Error::Estimation(msg) => Error::Domain(msg),
        other => other,
    }
}

/// Exact detected-photon correlation `g^{jk}`.
pub fn exact_g(source: &SourceSpec, det: &DetectionSpec, j: u32, k: u32, tail: f64) -> Result<f64> {
    exact_joint_moments(source, det, j.max(1), k.max(1), tail)?
        .g(j, k)
        .map_err(zero_mean_to_domain)
}

/// Exact normally ordered correlation from factorial moments.
pub fn exact_normally_ordered_g(
    source: &SourceSpec,
    det: &DetectionSpec,
    j: u32,
    k: u32,
    tail: f64,
) -> Result<f64> {
    exact_joint_moments(source, det, j.max(1), k.max(1), tail)?
        .normally_ordered_g(j, k)
        .map_err(zero_mean_to_domain)
}
