use crate::error::{Error, Result};

/// Table of joint detected-photon moments `E[m₁^j m₂^k]` and the matching
/// factorial moments `E[m₁^(j) m₂^(k)]` for `0 <= j <= max_j`,
/// `0 <= k <= max_k`.
///
/// The same table is produced by the exact oracle and by the empirical
/// estimators, so every derived quantity (correlations, criteria, parameter
/// recovery) has one implementation serving both routes.
#[derive(Debug, Clone, PartialEq)]
pub struct JointMoments {
    max_j: u32,
    max_k: u32,
    raw: Vec<f64>,
    factorial: Vec<f64>,
    /// Truncation bound of an exact table, `None` for sample moments.
    pub tail_mass: Option<f64>,
}

impl JointMoments {
    pub(crate) fn from_parts(
        max_j: u32,
        max_k: u32,
        raw: Vec<f64>,
        factorial: Vec<f64>,
        tail_mass: Option<f64>,
    ) -> Self {
        let len = ((max_j + 1) * (max_k + 1)) as usize;
        debug_assert_eq!(raw.len(), len);
        debug_assert_eq!(factorial.len(), len);
        JointMoments {
            max_j,
            max_k,
            raw,
            factorial,
            tail_mass,
        }
    }

    pub fn max_j(&self) -> u32 {
        self.max_j
    }

    pub fn max_k(&self) -> u32 {
        self.max_k
    }

    fn index(&self, j: u32, k: u32) -> Result<usize> {
        if j > self.max_j || k > self.max_k {
            return Err(Error::order(format!(
                "moment ({j},{k}) outside table of order ({},{})",
                self.max_j, self.max_k
            )));
        }
        Ok((j * (self.max_k + 1) + k) as usize)
    }

    /// `E[m₁^j m₂^k]`.
    pub fn raw(&self, j: u32, k: u32) -> Result<f64> {
        Ok(self.raw[self.index(j, k)?])
    }

    /// `E[m₁^(j) m₂^(k)]`.
    pub fn factorial(&self, j: u32, k: u32) -> Result<f64> {
        Ok(self.factorial[self.index(j, k)?])
    }

    pub fn mean1(&self) -> f64 {
        self.raw[self.index(1, 0).expect("table holds first moments")]
    }

    pub fn mean2(&self) -> f64 {
        self.raw[self.index(0, 1).expect("table holds first moments")]
    }

    pub fn variance1(&self) -> Result<f64> {
        Ok(self.raw(2, 0)? - self.mean1().powi(2))
    }

    pub fn variance2(&self) -> Result<f64> {
        Ok(self.raw(0, 2)? - self.mean2().powi(2))
    }

    fn normalise(&self, numerator: f64, j: u32, k: u32) -> Result<f64> {
        let (m1, m2) = (self.mean1(), self.mean2());
        if (j > 0 && m1 <= 0.0) || (k > 0 && m2 <= 0.0) {
            return Err(Error::Estimation(format!(
                "g^({j},{k}) needs nonzero arm means (got {m1}, {m2})"
            )));
        }
        Ok(numerator / (m1.powi(j as i32) * m2.powi(k as i32)))
    }

    /// Detected-photon correlation `E[m₁^j m₂^k] / (⟨m₁⟩^j ⟨m₂⟩^k)`.
    pub fn g(&self, j: u32, k: u32) -> Result<f64> {
        self.normalise(self.raw(j, k)?, j, k)
    }

    /// Normally ordered correlation built from factorial moments.
    pub fn normally_ordered_g(&self, j: u32, k: u32) -> Result<f64> {
        self.normalise(self.factorial(j, k)?, j, k)
    }

    /// The same table with arm labels exchanged.
    pub fn swapped(&self) -> JointMoments {
        let (rj, rk) = (self.max_k, self.max_j);
        let mut raw = Vec::with_capacity(self.raw.len());
        let mut factorial = Vec::with_capacity(self.factorial.len());
        for j in 0..=rj {
            for k in 0..=rk {
                let src = (k * (self.max_k + 1) + j) as usize;
                raw.push(self.raw[src]);
                factorial.push(self.factorial[src]);
            }
        }
        JointMoments::from_parts(rj, rk, raw, factorial, self.tail_mass)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> JointMoments {
        // two-point sample {(2,0), (0,2)}
        let raw = vec![1.0, 1.0, 2.0, 1.0, 0.0, 0.0, 2.0, 0.0, 0.0];
        let fac = vec![1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        JointMoments::from_parts(2, 2, raw, fac, None)
    }

    #[test]
    fn correlation_and_lookup() {
        let t = table();
        assert_eq!(t.mean1(), 1.0);
        assert_eq!(t.g(1, 1).unwrap(), 0.0);
        assert_eq!(t.g(2, 0).unwrap(), 2.0);
        assert_eq!(t.variance1().unwrap(), 1.0);
        assert!(t.raw(3, 0).is_err());
    }

    #[test]
    fn swap_transposes() {
        let t = table();
        let s = t.swapped();
        for j in 0..=2 {
            for k in 0..=2 {
                assert_eq!(t.raw(j, k).unwrap(), s.raw(k, j).unwrap());
                assert_eq!(t.factorial(j, k).unwrap(), s.factorial(k, j).unwrap());
            }
        }
    }

    #[test]
    fn zero_mean_is_an_error() {
        let t = JointMoments::from_parts(1, 1, vec![1.0, 0.0, 1.0, 0.0], vec![1.0, 0.0, 1.0, 0.0], None);
        assert!(matches!(t.g(1, 1), Err(Error::Estimation(_))));
        assert_eq!(t.g(1, 0).unwrap(), 1.0);
    }
}
