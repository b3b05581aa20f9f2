//! Optimizers for the weighted sum-rate problems of the scheme.

mod mac;
mod pnc;
mod projection;
mod search;

pub use mac::{mac_covariance_optimize, MacSolution};
pub use pnc::{pnc_power_allocate, PncAllocation};
pub use projection::{optimal_projection_simo, projection_matrix, projection_vector_pair};
pub use search::{sd_optimize, Baselines, SdPlan, SdSolution, Strategy};

use serde::{Deserialize, Serialize};

use crate::error::{Result, TwrcError};
use crate::rates::Indicator;

/// Weights `(w_A, w_B)` of a weighted sum-rate objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedObjective {
    pub w_a: f64,
    pub w_b: f64,
}

impl WeightedObjective {
    pub const SUM: WeightedObjective = WeightedObjective { w_a: 1.0, w_b: 1.0 };

    pub fn new(w_a: f64, w_b: f64) -> Result<Self> {
        let w = WeightedObjective { w_a, w_b };
        w.validate()?;
        Ok(w)
    }

    /// `w_A = ρ/(1+ρ)`, `w_B = 1/(1+ρ)` for a ratio `ρ = w_A/w_B`.
    pub fn from_ratio(ratio: f64) -> Self {
        WeightedObjective { w_a: ratio / (1.0 + ratio), w_b: 1.0 / (1.0 + ratio) }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.w_a.is_finite() && self.w_b.is_finite();
        if finite && self.w_a >= 0.0 && self.w_b >= 0.0 && self.w_a + self.w_b > 0.0 {
            Ok(())
        } else {
            Err(TwrcError::InvalidConfig(format!("invalid weights ({}, {})", self.w_a, self.w_b)))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerSettings {
    pub gradient_tol: f64,
    pub max_iters: usize,
    /// Number of evenly spaced CD power fractions in `[0, 1]` per user.
    pub power_split_grid: usize,
    /// Ratios `w_A/w_B` swept when tracing a region boundary.
    pub weight_sweep: Vec<f64>,
    pub indicator: Indicator,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            gradient_tol: 1e-6,
            max_iters: 500,
            power_split_grid: 11,
            weight_sweep: log_spaced(2f64.powi(-6), 2f64.powi(6), 25),
            indicator: Indicator::FirstStream,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.gradient_tol > 0.0) || self.max_iters == 0 || self.power_split_grid < 2 {
            return Err(TwrcError::InvalidConfig(format!(
                "gradient_tol {} max_iters {} power_split_grid {}",
                self.gradient_tol, self.max_iters, self.power_split_grid
            )));
        }
        if self.weight_sweep.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(TwrcError::InvalidConfig("weight ratios must be positive and finite".into()));
        }
        Ok(())
    }

    pub fn split_fractions(&self) -> Vec<f64> {
        let n = self.power_split_grid;
        (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
    }

    /// Boundary weights: `(1, 0)`, the ratio sweep, then `(0, 1)`.
    pub fn weight_pairs(&self) -> Vec<WeightedObjective> {
        let mut out = vec![WeightedObjective { w_a: 1.0, w_b: 0.0 }];
        let mut ratios = self.weight_sweep.clone();
        ratios.sort_by(|a, b| b.total_cmp(a));
        out.extend(ratios.into_iter().map(WeightedObjective::from_ratio));
        out.push(WeightedObjective { w_a: 0.0, w_b: 1.0 });
        out
    }
}

pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_and_sweep() {
        let s = OptimizerSettings::default();
        let f = s.split_fractions();
        assert_eq!(f.len(), 11);
        assert_eq!((f[0], f[10]), (0.0, 1.0));
        assert!((f[3] - 0.3).abs() < 1e-15);
        assert_eq!(s.weight_sweep.len(), 25);
        assert!((s.weight_sweep[0] - 1.0 / 64.0).abs() < 1e-15 && (s.weight_sweep[24] - 64.0).abs() < 1e-12);
        assert!((s.weight_sweep[12] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn weights_reject_degenerate_input() {
        assert!(WeightedObjective::new(0.0, 0.0).is_err());
        assert!(WeightedObjective::new(-1.0, 1.0).is_err());
        assert!(WeightedObjective::new(0.0, 1.0).is_ok());
    }
}
