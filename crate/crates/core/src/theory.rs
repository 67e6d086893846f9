//! Closed-form detected-photon correlations up to fourth order.
//!
//! For a `μ`-mode twin beam seen through balanced efficiencies `η`, with
//! `⟨m⟩` the detected mean per arm and `G^k_μ = Π_{j=1..k} (j+μ)/μ`:
//!
//! ```text
//! g^11 = G¹ + η/⟨m⟩
//! g^21 = G² + G¹(1+2η)/⟨m⟩ + η/⟨m⟩²
//! g^22 = G³ + 2G²(1+2η)/⟨m⟩ + G¹(1+4η+2η²)/⟨m⟩² + η/⟨m⟩³
//! g^31 = G³ + 3G²(1+η)/⟨m⟩ + G¹(1+6η)/⟨m⟩² + η/⟨m⟩³
//! ```
//!
//! Setting `η = 0` gives the split multimode thermal state with the same
//! detected mean, and additionally `G ≡ 1` gives the coherent state.
//! Orders outside this set go through [`crate::oracle`].

use crate::error::{Error, Result};

/// Highest `k` accepted by [`g_factor`].
pub const MAX_G_FACTOR_ORDER: u32 = 6;

/// Correlation orders with a closed form.
pub const SUPPORTED_ORDERS: [(u32, u32); 6] = [(1, 1), (1, 2), (2, 1), (2, 2), (1, 3), (3, 1)];

pub fn is_supported(j: u32, k: u32) -> bool {
    SUPPORTED_ORDERS.contains(&(j, k))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryPoint {
    /// Detected photons per arm per shot.
    pub mean_detected: f64,
    pub modes: f64,
    pub eta: f64,
}

impl TheoryPoint {
    pub fn new(mean_detected: f64, modes: f64, eta: f64) -> Result<Self> {
        let p = TheoryPoint {
            mean_detected,
            modes,
            eta,
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        check_mean(self.mean_detected)?;
        check_modes(self.modes)?;
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::domain(format!("efficiency must lie in [0, 1], got {}", self.eta)));
        }
        Ok(())
    }
}

fn check_mean(m: f64) -> Result<()> {
    if m.is_finite() && m > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("detected mean must be finite and > 0, got {m}")))
    }
}

fn check_modes(mu: f64) -> Result<()> {
    if mu.is_finite() && mu > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("mode number must be finite and > 0, got {mu}")))
    }
}

/// `G^k_μ = Π_{j=1..k} (j+μ)/μ`.
pub fn g_factor(k: u32, mu: f64) -> Result<f64> {
    check_modes(mu)?;
    if k > MAX_G_FACTOR_ORDER {
        return Err(Error::order(format!("G factor order {k} exceeds {MAX_G_FACTOR_ORDER}")));
    }
    Ok(g_factor_unchecked(k, mu))
}

fn g_factor_unchecked(k: u32, mu: f64) -> f64 {
    (1..=k).map(|j| 1.0 + j as f64 / mu).product()
}

fn closed_form(j: u32, k: u32, m: f64, eta: f64, g: [f64; 3]) -> Result<f64> {
    let [g1, g2, g3] = g;
    let value = match (j.min(k), j.max(k)) {
        (1, 1) => g1 + eta / m,
        (1, 2) => g2 + g1 * (1.0 + 2.0 * eta) / m + eta / (m * m),
        (2, 2) => {
            g3 + 2.0 * g2 * (1.0 + 2.0 * eta) / m
                + g1 * (1.0 + 4.0 * eta + 2.0 * eta * eta) / (m * m)
                + eta / (m * m * m)
        }
        (1, 3) => {
            g3 + 3.0 * g2 * (1.0 + eta) / m + g1 * (1.0 + 6.0 * eta) / (m * m) + eta / (m * m * m)
        }
        _ => {
            return Err(Error::order(format!(
                "no closed form for g^({j},{k}); use the exact oracle"
            )))
        }
    };
    Ok(value)
}

fn g_factors(mu: f64) -> [f64; 3] {
    [
        g_factor_unchecked(1, mu),
        g_factor_unchecked(2, mu),
        g_factor_unchecked(3, mu),
    ]
}

/// Twin-beam `g^{jk}` for balanced efficiencies.
pub fn twb_g(j: u32, k: u32, point: &TheoryPoint) -> Result<f64> {
    point.validate()?;
    closed_form(j, k, point.mean_detected, point.eta, g_factors(point.modes))
}

/// Split multimode thermal `g^{jk}` at per-arm detected mean `mean_detected`.
pub fn thermal_g(j: u32, k: u32, mean_detected: f64, mu: f64) -> Result<f64> {
    check_mean(mean_detected)?;
    check_modes(mu)?;
    closed_form(j, k, mean_detected, 0.0, g_factors(mu))
}

/// Coherent-state `g^{jk}` (independent Poisson arms).
pub fn coherent_g(j: u32, k: u32, mean_detected: f64) -> Result<f64> {
    check_mean(mean_detected)?;
    closed_form(j, k, mean_detected, 0.0, [1.0; 3])
}
