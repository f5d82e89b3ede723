use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model constants shared by the partition, the walk checks and the chains.
///
/// `theta` is not stored: it is always `tanh(beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Mean degree of `G(n, d/n)`; must exceed 1.
    pub d: f64,
    /// Inverse temperature.
    pub beta: f64,
    /// Radius exponent: balls have radius `delta * log_d n`.
    pub delta: f64,
    /// Growth threshold separating `B` from `A`.
    pub c: f64,
    /// Bound on `S_v^(l) / d^l` for short walks.
    pub c_prime: f64,
    /// Bound on the weighted walk sum divided by `ln n`.
    pub c_double_prime: f64,
    /// Non-backtracking horizon constant: `L = K log_d n`.
    pub k: f64,
}

impl ModelParams {
    pub const DEFAULT_DELTA: f64 = 0.1;

    /// Parameters at `d tanh(beta) = 1` with default constants.
    pub fn critical(d: f64) -> Result<Self> {
        if !(d > 1.0) {
            return Err(Error::InvalidParameter(format!("critical point needs d > 1, got {d}")));
        }
        Ok(Self {
            d,
            beta: critical_beta(d),
            delta: Self::DEFAULT_DELTA,
            c: 8.0,
            c_prime: 8.0,
            c_double_prime: 8.0,
            k: 4.0,
        })
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn theta(&self) -> f64 {
        self.beta.tanh()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.d > 1.0) {
            return bad("d must exceed 1");
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return bad("beta must be finite and non-negative");
        }
        if !(self.delta > 0.0) {
            return bad("delta must be positive");
        }
        if !(self.c > 0.0 && self.c_prime > 0.0 && self.c_double_prime > 0.0) {
            return bad("C, C', C'' must be positive");
        }
        if !(self.k > 0.0) {
            return bad("K must be positive");
        }
        Ok(())
    }

    /// `ln n / ln d`.
    pub fn log_d(&self, n: usize) -> f64 {
        (n.max(1) as f64).ln() / self.d.ln()
    }

    /// Partition radius `floor(delta log_d n)`.
    pub fn partition_radius(&self, n: usize) -> usize {
        (self.delta * self.log_d(n)).floor().max(0.0) as usize
    }

    /// Window length `ceil(delta log_d n)` for the good-edge property (at least 1).
    pub fn window_length(&self, n: usize) -> usize {
        ((self.delta * self.log_d(n)).ceil() as usize).max(1)
    }

    /// Largest walk length counted exactly: `min(ceil(delta log_d n) + 10, 24)`.
    pub fn ell_cap(&self, n: usize) -> usize {
        (((self.delta * self.log_d(n)).ceil().max(0.0) as usize) + 10).min(24)
    }

    /// Non-backtracking horizon `L = ceil(K log_d n)` (at least 1).
    pub fn nb_horizon(&self, n: usize) -> usize {
        ((self.k * self.log_d(n)).ceil() as usize).max(1)
    }
}

/// `atanh(1/d)`, the inverse temperature with `d tanh(beta) = 1`.
pub fn critical_beta(d: f64) -> f64 {
    (1.0 / d).atanh()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn critical_point_satisfies_d_tanh_beta_one() {
        for d in [1.5, 2.0, 3.0, 4.0] {
            let p = ModelParams::critical(d).unwrap();
            assert!((p.d * p.theta() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn derived_lengths() {
        let p = ModelParams::critical(2.0).unwrap();
        assert_eq!(p.partition_radius(100_000), 1);
        assert_eq!(p.window_length(100_000), 2);
        assert_eq!(p.ell_cap(100_000), 12);
        assert_eq!(p.nb_horizon(10_000), 54);
        assert!(ModelParams::critical(1.0).is_err());
    }
}
