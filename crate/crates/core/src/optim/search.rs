use super::{mac_covariance_optimize, pnc_power_allocate, OptimizerSettings, WeightedObjective};
use crate::decomp::{gsvd, GsvdFactors, JointDecomposition};
use crate::error::{Result, TwrcError};
use crate::linalg::ComplexMatrix;
use crate::rates::{split_channels, PowerConfig, RatePair, SdConfig, SplitChannels, TwrcInstance};

/// How the winning configuration processes the relay signal space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Split at `l'` into PNC and complete-decoding subspaces.
    SpaceDivision,
    /// Complete decoding of both users over the whole relay space.
    FullComplete,
}

#[derive(Debug, Clone)]
pub struct SdSolution {
    pub strategy: Strategy,
    pub cfg: SdConfig,
    pub q_cd_a: ComplexMatrix,
    pub q_cd_b: ComplexMatrix,
    pub psi_a: Vec<f64>,
    pub psi_b: Vec<f64>,
    pub rates: RatePair,
    pub objective: f64,
    /// Whether every MAC sub-solve in the winning cell met the gradient tolerance.
    pub mac_converged: bool,
}

struct Branch {
    split: SplitChannels,
    factors: GsvdFactors,
}

/// Power-independent part of the search for one channel and weight vector:
/// split channels and GSVD factors for every admissible `l'`.
pub struct SdPlan {
    w: WeightedObjective,
    settings: OptimizerSettings,
    branches: Vec<Branch>,
    h_ar: ComplexMatrix,
    h_br: ComplexMatrix,
}

impl SdPlan {
    pub fn new(
        h_ar: &ComplexMatrix,
        h_br: &ComplexMatrix,
        jd: &JointDecomposition,
        w: &WeightedObjective,
        settings: &OptimizerSettings,
    ) -> Result<Self> {
        w.validate()?;
        settings.validate()?;
        let mut branches = Vec::with_capacity(jd.l + 1);
        for l_prime in 0..=jd.l {
            // A failing branch only removes its cells from the search.
            let Ok(split) = split_channels(jd, l_prime, w) else { continue };
            let Ok(factors) = gsvd(&split.pnc_a, &split.pnc_b) else { continue };
            branches.push(Branch { split, factors });
        }
        Ok(SdPlan { w: *w, settings: settings.clone(), branches, h_ar: h_ar.clone(), h_br: h_br.clone() })
    }

    pub fn weights(&self) -> WeightedObjective {
        self.w
    }

    pub fn l_primes(&self) -> Vec<usize> {
        self.branches.iter().map(|b| b.split.l_prime).collect()
    }

    fn fractions(&self, branch: &Branch, cd_dims: usize) -> Vec<f64> {
        if branch.split.pnc_streams() == 0 {
            vec![1.0]
        } else if cd_dims == 0 {
            vec![0.0]
        } else {
            self.settings.split_fractions()
        }
    }

    fn evaluate(&self, branch: &Branch, f_a: f64, f_b: f64, power: &PowerConfig) -> Result<SdSolution> {
        let (cd_a, cd_b) = (f_a * power.p_a, f_b * power.p_b);
        let s = &branch.split;
        let mac = mac_covariance_optimize(&s.cd_a, &s.cd_b, cd_a, cd_b, power.n0, &self.w, &self.settings)?;
        let pnc = pnc_power_allocate(
            &branch.factors,
            power.p_a - cd_a,
            power.p_b - cd_b,
            power.n0,
            &self.w,
            &self.settings,
        )?;
        let rates = mac.rates + pnc.rates;
        Ok(SdSolution {
            strategy: Strategy::SpaceDivision,
            cfg: SdConfig { l_prime: s.l_prime, cd_power_a: cd_a, cd_power_b: cd_b, w_a: self.w.w_a, w_b: self.w.w_b },
            q_cd_a: mac.q_a,
            q_cd_b: mac.q_b,
            psi_a: pnc.psi_a,
            psi_b: pnc.psi_b,
            objective: rates.weighted(&self.w),
            rates,
            mac_converged: mac.converged,
        })
    }

    /// The cell with `l' = l` and all power on the PNC streams.
    pub fn gsvd_pnc(&self, power: &PowerConfig) -> Result<SdSolution> {
        let branch = self
            .branches
            .last()
            .ok_or_else(|| TwrcError::DegenerateChannel("no admissible split".into()))?;
        let f = |dims: usize| if branch.split.pnc_streams() == 0 && dims > 0 { 1.0 } else { 0.0 };
        self.evaluate(branch, f(branch.split.cd_a.ncols()), f(branch.split.cd_b.ncols()), power)
    }

    /// Complete decoding of both users on the unsplit uplink channels.
    pub fn complete_decoding(&self, power: &PowerConfig) -> Result<SdSolution> {
        let mac = mac_covariance_optimize(&self.h_ar, &self.h_br, power.p_a, power.p_b, power.n0, &self.w, &self.settings)?;
        Ok(SdSolution {
            strategy: Strategy::FullComplete,
            cfg: SdConfig { l_prime: 0, cd_power_a: power.p_a, cd_power_b: power.p_b, w_a: self.w.w_a, w_b: self.w.w_b },
            q_cd_a: mac.q_a,
            q_cd_b: mac.q_b,
            psi_a: Vec::new(),
            psi_b: Vec::new(),
            objective: mac.rates.weighted(&self.w),
            rates: mac.rates,
            mac_converged: mac.converged,
        })
    }

    fn search(&self, power: &PowerConfig, mut best: Option<SdSolution>) -> Option<SdSolution> {
        let mut consider = |cand: Result<SdSolution>| {
            if let Ok(c) = cand {
                if best.as_ref().is_none_or(|b| c.objective > b.objective) {
                    best = Some(c);
                }
            }
        };
        for branch in &self.branches {
            for &f_a in &self.fractions(branch, branch.split.cd_a.ncols()) {
                for &f_b in &self.fractions(branch, branch.split.cd_b.ncols()) {
                    consider(self.evaluate(branch, f_a, f_b, power));
                }
            }
        }
        best
    }

    /// Exhaustive search over `l'` and the CD power fractions, plus full complete decoding.
    pub fn optimize(&self, power: &PowerConfig) -> Result<SdSolution> {
        power.validate()?;
        self.search(power, self.complete_decoding(power).ok())
            .ok_or_else(|| TwrcError::DegenerateChannel("every search cell failed".into()))
    }

    /// The search result together with both baselines, which it weakly dominates.
    pub fn optimize_with_baselines(&self, power: &PowerConfig) -> Result<Baselines> {
        power.validate()?;
        let complete_decoding = self.complete_decoding(power)?;
        let gsvd_pnc = self.gsvd_pnc(power)?;
        let start = if gsvd_pnc.objective > complete_decoding.objective { &gsvd_pnc } else { &complete_decoding };
        let sd = self.search(power, Some(start.clone())).expect("search seeded with a candidate");
        Ok(Baselines { sd, gsvd_pnc, complete_decoding })
    }
}

#[derive(Debug, Clone)]
pub struct Baselines {
    pub sd: SdSolution,
    pub gsvd_pnc: SdSolution,
    pub complete_decoding: SdSolution,
}

pub fn sd_optimize(
    ch: &TwrcInstance,
    jd: &JointDecomposition,
    w: &WeightedObjective,
    s: &OptimizerSettings,
) -> Result<SdSolution> {
    SdPlan::new(&ch.h_ar, &ch.h_br, jd, w, s)?.optimize(&ch.power)
}
