//! Closed-form achievable-rate expressions. All rates are in bits per channel use and
//! carry the ½ pre-log of the two-slot exchange.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::decomp::{gsvd, rq_decompose, GsvdFactors, JointDecomposition};
use crate::error::{Result, TwrcError};
use crate::linalg::{
    check_covariance, cplx, half_log2det_link, log2det_hpd, real_to_complex, scaled_identity, trace_re,
    waterfill_covariance, ComplexMatrix,
};
use crate::optim::{projection_matrix, WeightedObjective};

/// Linear transmit powers and noise level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerConfig {
    pub p_a: f64,
    pub p_b: f64,
    pub p_r: f64,
    pub n0: f64,
}

impl PowerConfig {
    /// `P_A = P_B = P_R = 10^(snr_db/10)` with unit noise.
    pub fn symmetric_db(snr_db: f64) -> Self {
        let p = 10f64.powf(snr_db / 10.0);
        PowerConfig { p_a: p, p_b: p, p_r: p, n0: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.p_a, self.p_b, self.p_r].iter().all(|p| p.is_finite() && *p >= 0.0)
            && self.n0.is_finite()
            && self.n0 > 0.0;
        if ok {
            Ok(())
        } else {
            Err(TwrcError::InvalidConfig(format!("invalid power configuration {self:?}")))
        }
    }
}

/// One channel realization: uplink `H_AR`, `H_BR` and downlink `H_RA`, `H_RB`.
#[derive(Debug, Clone)]
pub struct TwrcInstance {
    pub h_ar: ComplexMatrix,
    pub h_br: ComplexMatrix,
    pub h_ra: ComplexMatrix,
    pub h_rb: ComplexMatrix,
    pub power: PowerConfig,
}

impl TwrcInstance {
    pub fn new(
        h_ar: ComplexMatrix,
        h_br: ComplexMatrix,
        h_ra: ComplexMatrix,
        h_rb: ComplexMatrix,
        power: PowerConfig,
    ) -> Result<Self> {
        let n_r = h_ar.nrows();
        let (n_a, n_b) = (h_ar.ncols(), h_br.ncols());
        if h_br.nrows() != n_r || h_ra.shape() != (n_a, n_r) || h_rb.shape() != (n_b, n_r) {
            return Err(TwrcError::DimensionMismatch(format!(
                "H_AR {:?}, H_BR {:?}, H_RA {:?}, H_RB {:?}",
                h_ar.shape(),
                h_br.shape(),
                h_ra.shape(),
                h_rb.shape()
            )));
        }
        power.validate()?;
        Ok(TwrcInstance { h_ar, h_br, h_ra, h_rb, power })
    }

    pub fn n_a(&self) -> usize {
        self.h_ar.ncols()
    }

    pub fn n_b(&self) -> usize {
        self.h_br.ncols()
    }

    pub fn n_r(&self) -> usize {
        self.h_ar.nrows()
    }

    pub fn with_power(&self, power: PowerConfig) -> Self {
        TwrcInstance { power, ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RatePair {
    pub r_a: f64,
    pub r_b: f64,
}

impl RatePair {
    pub const UNBOUNDED: RatePair = RatePair { r_a: f64::INFINITY, r_b: f64::INFINITY };

    pub fn new(r_a: f64, r_b: f64) -> Self {
        RatePair { r_a, r_b }
    }

    pub fn sum(&self) -> f64 {
        self.r_a + self.r_b
    }

    pub fn weighted(&self, w: &WeightedObjective) -> f64 {
        w.w_a * self.r_a + w.w_b * self.r_b
    }
}

impl std::ops::Add for RatePair {
    type Output = RatePair;
    fn add(self, o: RatePair) -> RatePair {
        RatePair::new(self.r_a + o.r_a, self.r_b + o.r_b)
    }
}

/// Free parameters of the space-division scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdConfig {
    pub l_prime: usize,
    pub cd_power_a: f64,
    pub cd_power_b: f64,
    pub w_a: f64,
    pub w_b: f64,
}

impl SdConfig {
    pub fn weights(&self) -> WeightedObjective {
        WeightedObjective { w_a: self.w_a, w_b: self.w_b }
    }
}

/// Which PNC streams receive the self-interference ratio term inside the log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Indicator {
    /// Only the first stream.
    #[default]
    FirstStream,
    AllStreams,
}

impl Indicator {
    fn applies(self, i: usize) -> bool {
        matches!(self, Indicator::AllStreams) || i == 0
    }
}

/// The four terms of the cut-set bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpperBoundTerms {
    pub ul_a: f64,
    pub ul_b: f64,
    pub dl_a: f64,
    pub dl_b: f64,
}

pub fn capacity_upper_bound(
    ch: &TwrcInstance,
    q_a: &ComplexMatrix,
    q_b: &ComplexMatrix,
    q_r: &ComplexMatrix,
) -> Result<UpperBoundTerms> {
    let p = &ch.power;
    check_covariance(q_a, p.p_a)?;
    check_covariance(q_b, p.p_b)?;
    let dl = downlink_rates(ch, q_r)?;
    Ok(UpperBoundTerms {
        ul_a: half_log2det_link(&ch.h_ar, q_a, p.n0)?,
        ul_b: half_log2det_link(&ch.h_br, q_b, p.n0)?,
        dl_a: dl.r_a,
        dl_b: dl.r_b,
    })
}

/// Uplink cut-set terms with each user's covariance water-filled.
pub fn uplink_upper_bound(ch: &TwrcInstance) -> Result<RatePair> {
    let p = &ch.power;
    let q_a = waterfill_covariance(&ch.h_ar, p.p_a, p.n0);
    let q_b = waterfill_covariance(&ch.h_br, p.p_b, p.n0);
    Ok(RatePair::new(half_log2det_link(&ch.h_ar, &q_a, p.n0)?, half_log2det_link(&ch.h_br, &q_b, p.n0)?))
}

/// Bounds `{S_AB, S_A, S_B}` of a two-user MAC pentagon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacPentagon {
    pub sum: f64,
    pub a: f64,
    pub b: f64,
}

impl MacPentagon {
    pub const ZERO: MacPentagon = MacPentagon { sum: 0.0, a: 0.0, b: 0.0 };

    /// Vertex favoured by the weights: the heavier user is decoded last. Ties go to A.
    pub fn corner(&self, w: &WeightedObjective) -> RatePair {
        if w.w_a >= w.w_b {
            RatePair::new(self.a, (self.sum - self.a).max(0.0))
        } else {
            RatePair::new((self.sum - self.b).max(0.0), self.b)
        }
    }
}

pub fn mac_cd_region(
    h_a: &ComplexMatrix,
    h_b: &ComplexMatrix,
    q_a: &ComplexMatrix,
    q_b: &ComplexMatrix,
    n0: f64,
) -> Result<MacPentagon> {
    if h_a.ncols() != q_a.nrows() || h_b.ncols() != q_b.nrows() || (h_a.ncols() > 0 && h_b.ncols() > 0 && h_a.nrows() != h_b.nrows()) {
        return Err(TwrcError::DimensionMismatch("MAC channels and covariances are not conformable".into()));
    }
    for q in [q_a, q_b] {
        check_covariance(q, f64::INFINITY)?;
    }
    let a = half_log2det_link(h_a, q_a, n0)?;
    let b = half_log2det_link(h_b, q_b, n0)?;
    let sum = if h_a.ncols() == 0 {
        b
    } else if h_b.ncols() == 0 {
        a
    } else {
        let mut k = h_a * q_a * h_a.adjoint() + h_b * q_b * h_b.adjoint();
        k *= cplx(1.0 / n0, 0.0);
        for i in 0..k.nrows() {
            k[(i, i)] += cplx(1.0, 0.0);
        }
        (0.5 * log2det_hpd(&k)?).max(a.max(b))
    };
    Ok(MacPentagon { sum, a, b })
}

/// Rates of a two-user signal aligned by the unit vector `p` at the relay.
pub fn pnc_rate_simo(
    p: &ComplexMatrix,
    h_a: &ComplexMatrix,
    h_b: &ComplexMatrix,
    q_a: f64,
    q_b: f64,
    n0: f64,
    mmse: bool,
) -> Result<RatePair> {
    let norm = p.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(TwrcError::NotUnit { norm });
    }
    if p.shape() != h_a.shape() || p.shape() != h_b.shape() || p.ncols() != 1 {
        return Err(TwrcError::DimensionMismatch("projection and channels must be equal-length vectors".into()));
    }
    let ga = q_a * (p.adjoint() * h_a)[(0, 0)].norm_sqr();
    let gb = q_b * (p.adjoint() * h_b)[(0, 0)].norm_sqr();
    let rate = |g: f64| {
        let mut arg = g / n0;
        if mmse && ga + gb > 0.0 {
            arg += g / (ga + gb);
        }
        if arg > 1.0 {
            0.5 * arg.log2()
        } else {
            0.0
        }
    };
    Ok(RatePair::new(rate(ga), rate(gb)))
}

/// Sum over GSVD-aligned streams; `psi_*[i]` is the power of stream `i`.
pub fn pnc_rate_mimo(
    g: &GsvdFactors,
    psi_a: &[f64],
    psi_b: &[f64],
    n0: f64,
    indicator: Indicator,
) -> Result<RatePair> {
    let n = g.streams();
    if psi_a.len() != n || psi_b.len() != n {
        return Err(TwrcError::DimensionMismatch(format!(
            "{n} streams but {} and {} powers",
            psi_a.len(),
            psi_b.len()
        )));
    }
    let mut out = RatePair::default();
    for i in 0..n {
        let (sa, sb) = (g.sigma_a[i] * g.sigma_a[i] * psi_a[i], g.sigma_b[i] * g.sigma_b[i] * psi_b[i]);
        let r2 = g.r_diag(i) * g.r_diag(i);
        let den = sa + sb;
        let stream = |s: f64| {
            let mut arg = r2 * s / n0;
            if indicator.applies(i) && den > 0.0 {
                arg += s / den;
            }
            if arg > 1.0 {
                0.5 * arg.log2()
            } else {
                0.0
            }
        };
        out.r_a += stream(sa);
        out.r_b += stream(sb);
    }
    Ok(out)
}

/// Effective channels after splitting the relay space at `l'`.
#[derive(Debug, Clone)]
pub struct SplitChannels {
    pub l_prime: usize,
    /// Square `(k+l')` PNC channels `P^T D_{m;1,1} R_{m;1,1}`.
    pub pnc_a: ComplexMatrix,
    pub pnc_b: ComplexMatrix,
    /// Complete-decoding channels `D_{m;2,2} R_{m;2,2}`.
    pub cd_a: ComplexMatrix,
    pub cd_b: ComplexMatrix,
}

impl SplitChannels {
    pub fn pnc_streams(&self) -> usize {
        self.pnc_a.ncols()
    }
}

pub fn split_channels(jd: &JointDecomposition, l_prime: usize, w: &WeightedObjective) -> Result<SplitChannels> {
    if l_prime > jd.l {
        return Err(TwrcError::IndexOutOfRange { index: l_prime, limit: jd.l });
    }
    let p = projection_matrix(jd, l_prime, w)?;
    let top = jd.k + 2 * l_prime;
    let s = jd.k + l_prime;
    let block = |d: &DMatrix<f64>, g: &ComplexMatrix| -> Result<(ComplexMatrix, ComplexMatrix)> {
        let (r, _) = rq_decompose(g)?;
        let n = g.nrows();
        let d11 = real_to_complex(&(p.transpose() * d.view((0, 0), (top, s))));
        let pnc = d11 * r.view((0, 0), (s, s));
        let d22 = real_to_complex(&d.view((top, s), (d.nrows() - top, n - s)).into_owned());
        let cd = d22 * r.view((s, s), (n - s, n - s));
        Ok((pnc, cd))
    };
    let (pnc_a, cd_a) = block(&jd.d_a, &jd.g_a)?;
    let (pnc_b, cd_b) = block(&jd.d_b, &jd.g_b)?;
    Ok(SplitChannels { l_prime, pnc_a, pnc_b, cd_a, cd_b })
}

fn check_budget(q: &ComplexMatrix, psi: &[f64], budget: f64) -> Result<()> {
    check_covariance(q, f64::INFINITY)?;
    if psi.iter().any(|&x| !(x >= 0.0)) {
        return Err(TwrcError::DomainError("stream powers must be nonnegative".into()));
    }
    let used = trace_re(q) + psi.iter().sum::<f64>();
    if used > budget + 1e-9 {
        return Err(TwrcError::PowerViolation { used, budget });
    }
    Ok(())
}

/// Uplink pair `R^CD + R^PNC` of the space-division scheme for explicit covariances.
#[allow(clippy::too_many_arguments)]
pub fn sd_uplink_rate(
    ch: &TwrcInstance,
    jd: &JointDecomposition,
    cfg: &SdConfig,
    q_cd_a: &ComplexMatrix,
    q_cd_b: &ComplexMatrix,
    psi_a: &[f64],
    psi_b: &[f64],
    indicator: Indicator,
) -> Result<RatePair> {
    let p = &ch.power;
    check_budget(q_cd_a, psi_a, p.p_a)?;
    check_budget(q_cd_b, psi_b, p.p_b)?;
    let w = cfg.weights();
    let split = split_channels(jd, cfg.l_prime, &w)?;
    let factors = gsvd(&split.pnc_a, &split.pnc_b)?;
    let pnc = pnc_rate_mimo(&factors, psi_a, psi_b, p.n0, indicator)?;
    let cd = mac_cd_region(&split.cd_a, &split.cd_b, q_cd_a, q_cd_b, p.n0)?.corner(&w);
    Ok(pnc + cd)
}

/// Downlink pair; user A's rate is decoded by B and vice versa.
pub fn downlink_rates(ch: &TwrcInstance, q_r: &ComplexMatrix) -> Result<RatePair> {
    check_covariance(q_r, ch.power.p_r)?;
    Ok(RatePair::new(
        half_log2det_link(&ch.h_rb, q_r, ch.power.n0)?,
        half_log2det_link(&ch.h_ra, q_r, ch.power.n0)?,
    ))
}

/// Downlink pair with the relay power spread evenly over its antennas.
pub fn equal_power_downlink(ch: &TwrcInstance) -> Result<RatePair> {
    let n_r = ch.n_r();
    downlink_rates(ch, &scaled_identity(n_r, ch.power.p_r / n_r as f64))
}

/// Downlink pair for single-antenna users, each link beamformed at full relay power.
pub fn simo_downlink(ch: &TwrcInstance) -> RatePair {
    let p = &ch.power;
    let link = |h: &ComplexMatrix| 0.5 * (1.0 + p.p_r / p.n0 * h.norm_squared()).log2();
    RatePair::new(link(&ch.h_rb), link(&ch.h_ra))
}

pub fn sd_rate_pair(uplink: RatePair, downlink: RatePair) -> RatePair {
    RatePair::new(uplink.r_a.min(downlink.r_a), uplink.r_b.min(downlink.r_b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::identity;

    fn col(v: &[f64]) -> ComplexMatrix {
        ComplexMatrix::from_iterator(v.len(), 1, v.iter().map(|&x| cplx(x, 0.0)))
    }

    #[test]
    fn componentwise_min() {
        assert_eq!(sd_rate_pair(RatePair::new(2.0, 3.0), RatePair::new(4.0, 1.0)), RatePair::new(2.0, 1.0));
        assert_eq!(sd_rate_pair(RatePair::new(2.0, 3.0), RatePair::UNBOUNDED), RatePair::new(2.0, 3.0));
    }

    #[test]
    fn orthogonal_mac_decouples() {
        let q = ComplexMatrix::from_element(1, 1, cplx(10.0, 0.0));
        let m = mac_cd_region(&col(&[1.0, 0.0]), &col(&[0.0, 1.0]), &q, &q, 1.0).unwrap();
        let single = 0.5 * 11f64.log2();
        assert!((m.a - single).abs() < 1e-14 && (m.b - single).abs() < 1e-14);
        assert!((m.sum - 2.0 * single).abs() < 1e-14);
    }

    #[test]
    fn zero_power_mac_is_origin() {
        let z = ComplexMatrix::zeros(1, 1);
        assert_eq!(mac_cd_region(&col(&[1.0, 0.0]), &col(&[0.0, 1.0]), &z, &z, 1.0).unwrap(), MacPentagon::ZERO);
    }

    #[test]
    fn pnc_simo_clamps_and_projects() {
        let p = col(&[1.0, 0.0]);
        let r = pnc_rate_simo(&p, &col(&[0.5, 0.0]), &col(&[0.0, 1.0]), 1.0, 100.0, 1.0, false).unwrap();
        assert_eq!(r, RatePair::new(0.0, 0.0));
        assert!(matches!(
            pnc_rate_simo(&col(&[1.0, 1.0]), &col(&[1.0, 0.0]), &col(&[1.0, 0.0]), 1.0, 1.0, 1.0, false),
            Err(TwrcError::NotUnit { .. })
        ));
    }

    #[test]
    fn single_symmetric_pnc_stream() {
        let g = gsvd(&identity(1), &identity(1)).unwrap();
        let scale = g.r_diag(0) * g.sigma_a[0];
        assert!((scale - 1.0).abs() < 1e-14);
        let p = 100.0;
        let r = pnc_rate_mimo(&g, &[p], &[p], 1.0, Indicator::FirstStream).unwrap();
        let expected = 0.5 * (0.5 + p).log2();
        assert!((r.r_a - expected).abs() < 1e-12 && (r.r_b - expected).abs() < 1e-12);
        assert_eq!(pnc_rate_mimo(&g, &[0.0], &[0.0], 1.0, Indicator::FirstStream).unwrap(), RatePair::default());
    }
}
