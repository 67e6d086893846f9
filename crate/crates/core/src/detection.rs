//! Bernoulli photodetection.
//!
//! Every photon reaching arm `i` is registered independently with
//! probability `η_i`, so `m | n ~ Binomial(n, η)`. Power moments of the
//! detected counts follow from
//!
//! ```text
//! E[m^p | n] = Σ_h S(p, h) η^h n^(h)
//! ```
//!
//! with `S` the Stirling numbers of the second kind and `n^(h)` the falling
//! factorial, while factorial moments simply scale as `E[m^(r)] = η^r E[n^(r)]`.

use crate::error::{Error, Result};

/// Highest power-moment order with exact tabulated Stirling numbers.
pub const MAX_ORDER: u32 = 12;

const TABLE_SIZE: usize = MAX_ORDER as usize + 1;

static STIRLING2: [[u64; TABLE_SIZE]; TABLE_SIZE] = stirling2_table();

const fn stirling2_table() -> [[u64; TABLE_SIZE]; TABLE_SIZE] {
    let mut t = [[0u64; TABLE_SIZE]; TABLE_SIZE];
    t[0][0] = 1;
    let mut p = 1;
    while p < TABLE_SIZE {
        let mut h = 1;
        while h <= p {
            t[p][h] = h as u64 * t[p - 1][h] + t[p - 1][h - 1];
            h += 1;
        }
        p += 1;
    }
    t
}

/// Per-arm overall quantum efficiencies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionSpec {
    pub eta1: f64,
    pub eta2: f64,
}

impl DetectionSpec {
    pub fn new(eta1: f64, eta2: f64) -> Result<Self> {
        let spec = DetectionSpec { eta1, eta2 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn balanced(eta: f64) -> Result<Self> {
        Self::new(eta, eta)
    }

    pub fn validate(&self) -> Result<()> {
        for (arm, eta) in [(1, self.eta1), (2, self.eta2)] {
            check_efficiency(eta).map_err(|_| {
                Error::domain(format!("arm {arm} efficiency must lie in [0, 1], got {eta}"))
            })?;
        }
        Ok(())
    }

    pub fn is_balanced(&self) -> bool {
        self.eta1 == self.eta2
    }

    pub fn swapped(&self) -> Self {
        DetectionSpec {
            eta1: self.eta2,
            eta2: self.eta1,
        }
    }
}

fn check_efficiency(eta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&eta) {
        Ok(())
    } else {
        Err(Error::domain(format!("efficiency must lie in [0, 1], got {eta}")))
    }
}

/// Stirling number of the second kind `S(p, h)`.
pub fn stirling2(p: u32, h: u32) -> Result<u64> {
    if p > MAX_ORDER {
        return Err(Error::order(format!("Stirling order {p} exceeds {MAX_ORDER}")));
    }
    if h > p {
        return Ok(0);
    }
    Ok(STIRLING2[p as usize][h as usize])
}

/// `x (x-1) ... (x-r+1)`, with `x^(0) = 1`.
pub fn falling_factorial(x: f64, r: u32) -> f64 {
    (0..r).map(|i| x - i as f64).product()
}

/// `E[m^j | n]` for `m ~ Binomial(n, η)`.
pub fn conditional_power_moment(n: u64, eta: f64, j: u32) -> Result<f64> {
    check_efficiency(eta)?;
    if j > MAX_ORDER {
        return Err(Error::order(format!("moment order {j} exceeds {MAX_ORDER}")));
    }
    Ok(conditional_power_moment_unchecked(n as f64, eta, j))
}

pub(crate) fn conditional_power_moment_unchecked(n: f64, eta: f64, j: u32) -> f64 {
    if j == 0 {
        return 1.0;
    }
    let row = &STIRLING2[j as usize];
    let mut acc = 0.0;
    let mut eta_pow = 1.0;
    let mut falling = 1.0;
    for (r, &s) in row.iter().enumerate().take(j as usize + 1).skip(1) {
        eta_pow *= eta;
        falling *= n - (r - 1) as f64;
        if falling == 0.0 {
            break;
        }
        acc += s as f64 * eta_pow * falling;
    }
    acc
}

/// `E[m^(r)] = η^r E[n^(r)]`.
pub fn detected_factorial_moment(photon_fm: f64, eta: f64, r: u32) -> f64 {
    eta.powi(r as i32) * photon_fm
}
