use std::f64::consts::PI;

use rand::Rng;
use serde::Serialize;

use crate::decomp::JointDecomposition;
use crate::error::{Result, TwrcError};
use crate::linalg::{cplx, half_log2det_link, qr_positive, scaled_identity, ComplexMatrix};
use crate::quad::{integrate_edge_singular, QuadSettings};
use crate::rates::{sd_uplink_rate, Indicator, PowerConfig, SdConfig, TwrcInstance};
use crate::sim::complex_gaussian_matrix;

/// Pair eigenvalues at or above this threshold are better served by PNC.
pub const PNC_THRESHOLD: f64 = 8.0 / 5.0;

fn pair_slice(lambdas: &[f64], k: usize, l_prime: usize) -> Result<&[f64]> {
    let pairs = lambdas.get(k..).ok_or(TwrcError::IndexOutOfRange { index: k, limit: lambdas.len() })?;
    if l_prime > pairs.len() {
        return Err(TwrcError::IndexOutOfRange { index: l_prime, limit: pairs.len() });
    }
    Ok(pairs)
}

/// High-SNR sum-rate loss in bits for the split at `l_prime`.
pub fn asymptotic_gap(lambdas: &[f64], k: usize, l_prime: usize) -> Result<f64> {
    let pairs = pair_slice(lambdas, k, l_prime)?;
    let pnc: f64 = pairs[..l_prime].iter().map(|&x| -(x / 2.0).log2()).sum();
    let cd: f64 = pairs[l_prime..].iter().map(|&x| -0.5 * (x * (2.0 - x)).log2()).sum();
    Ok(pnc + cd)
}

/// Number of pair eigenvalues at or above 8/5.
pub fn optimal_l_prime(lambdas: &[f64], k: usize) -> usize {
    lambdas.iter().skip(k).filter(|&&x| x >= PNC_THRESHOLD).count()
}

/// Uplink upper bound minus the SD uplink sum rate, both with equal power per
/// antenna or stream and unit weights, at `P_A = P_B = snr`, `N0 = 1`.
pub fn high_snr_gap_empirical(ch: &TwrcInstance, jd: &JointDecomposition, l_prime: usize, snr_db: f64) -> Result<f64> {
    if l_prime > jd.l {
        return Err(TwrcError::IndexOutOfRange { index: l_prime, limit: jd.l });
    }
    let power = PowerConfig::symmetric_db(snr_db);
    let ch = ch.with_power(power);
    let (n_a, n_b) = (ch.n_a(), ch.n_b());
    let (e_a, e_b) = (power.p_a / n_a as f64, power.p_b / n_b as f64);
    let ub = half_log2det_link(&ch.h_ar, &scaled_identity(n_a, e_a), power.n0)?
        + half_log2det_link(&ch.h_br, &scaled_identity(n_b, e_b), power.n0)?;
    let streams = jd.k + l_prime;
    let (cd_a, cd_b) = (n_a - streams, n_b - streams);
    let cfg = SdConfig {
        l_prime,
        cd_power_a: e_a * cd_a as f64,
        cd_power_b: e_b * cd_b as f64,
        w_a: 1.0,
        w_b: 1.0,
    };
    let sd = sd_uplink_rate(
        &ch,
        jd,
        &cfg,
        &scaled_identity(cd_a, e_a),
        &scaled_identity(cd_b, e_b),
        &vec![e_a; streams],
        &vec![e_b; streams],
        Indicator::FirstStream,
    )?;
    Ok(ub - sd.sum())
}

/// Channels whose joint decomposition has `k` common directions, the given pair
/// eigenvalues (each in `(1, 2)`), and `d_a`, `d_b` private directions.
///
/// Each pair is planted at principal angle `θ` with `cos θ = λ − 1` inside a random
/// orthonormal frame; the user-side mixing matrices are random Gaussian.
pub fn planted_channels<R: Rng + ?Sized>(
    rng: &mut R,
    n_r: usize,
    k: usize,
    pair_lambdas: &[f64],
    d_a: usize,
    d_b: usize,
) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let l = pair_lambdas.len();
    if k + 2 * l + d_a + d_b > n_r {
        return Err(TwrcError::DimensionMismatch(format!(
            "k + 2l + d_A + d_B = {} exceeds n_R = {n_r}",
            k + 2 * l + d_a + d_b
        )));
    }
    if let Some(&bad) = pair_lambdas.iter().find(|&&x| !(x > 1.0 && x < 2.0)) {
        return Err(TwrcError::DomainError(format!("pair eigenvalue {bad} outside (1, 2)")));
    }
    let (frame, _) = qr_positive(&complex_gaussian_matrix(rng, n_r, n_r));
    let (n_a, n_b) = (k + l + d_a, k + l + d_b);
    let mut ua = ComplexMatrix::zeros(n_r, n_a);
    let mut ub = ComplexMatrix::zeros(n_r, n_b);
    for i in 0..k {
        ua.set_column(i, &frame.column(i));
        ub.set_column(i, &frame.column(i));
    }
    for (j, &lambda) in pair_lambdas.iter().enumerate() {
        let (c, s) = (lambda - 1.0, (1.0 - (lambda - 1.0).powi(2)).sqrt());
        let a = frame.column(k + 2 * j);
        let b = frame.column(k + 2 * j + 1);
        ua.set_column(k + j, &a);
        ub.set_column(k + j, &(a * cplx(c, 0.0) + b * cplx(s, 0.0)));
    }
    let base = k + 2 * l;
    for i in 0..d_a {
        ua.set_column(k + l + i, &frame.column(base + i));
    }
    for i in 0..d_b {
        ub.set_column(k + l + i, &frame.column(base + d_a + i));
    }
    let ga = complex_gaussian_matrix(rng, n_a, n_a);
    let gb = complex_gaussian_matrix(rng, n_b, n_b);
    Ok((ua * ga, ub * gb))
}

/// Large-system eigenvalue law of `U_A U_A† + U_B U_B†` at antenna ratios `η_A`, `η_B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AedSpec {
    pub eta_a: f64,
    pub eta_b: f64,
    pub mass_at_0: f64,
    pub mass_at_1: f64,
    pub mass_at_2: f64,
}

pub fn aed(eta_a: f64, eta_b: f64) -> Result<AedSpec> {
    for eta in [eta_a, eta_b] {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(TwrcError::DomainError(format!("antenna ratio {eta} outside (0, 1]")));
        }
    }
    Ok(AedSpec {
        eta_a,
        eta_b,
        mass_at_0: (1.0 - eta_a - eta_b).max(0.0),
        mass_at_1: (eta_a - eta_b).abs(),
        mass_at_2: (eta_a + eta_b - 1.0).max(0.0),
    })
}

impl AedSpec {
    fn a(&self) -> f64 {
        1.0 - self.eta_a - self.eta_b
    }

    fn d(&self) -> f64 {
        self.eta_a - self.eta_b
    }

    /// Continuous part of the law at `lambda`; symmetric about 1.
    pub fn density(&self, lambda: f64) -> f64 {
        let x = lambda - 1.0;
        let q = 1.0 - x * x;
        if q <= 0.0 || x.abs() < 1e-9 && self.d() != 0.0 {
            return 0.0;
        }
        let ratio = if self.d() == 0.0 { 0.0 } else { self.d() / x };
        let s = self.a().powi(2) - q * (1.0 - ratio * ratio);
        if s < 0.0 {
            (-s).sqrt() / (PI * q)
        } else {
            0.0
        }
    }

    /// Support `[α, β] ⊆ [1, 2]` of the density's upper branch.
    pub fn support(&self) -> Option<(f64, f64)> {
        // With y = (λ−1)², the density is positive where y² + b·y + d² < 0.
        let (a, d) = (self.a(), self.d());
        let b = a * a - 1.0 - d * d;
        let disc = b * b - 4.0 * d * d;
        if disc <= 0.0 {
            return None;
        }
        let root = disc.sqrt();
        let y1 = ((-b - root) / 2.0).clamp(0.0, 1.0);
        let y2 = ((-b + root) / 2.0).clamp(0.0, 1.0);
        (y2 > y1).then(|| (1.0 + y1.sqrt(), 1.0 + y2.sqrt()))
    }

    /// `∫ g(λ) F(λ) dλ` over `[lo, hi] ∩` the upper support.
    pub fn integrate_upper(&self, g: impl Fn(f64) -> f64, lo: f64, hi: f64, s: QuadSettings) -> Result<f64> {
        let Some((alpha, beta)) = self.support() else { return Ok(0.0) };
        let (lo, hi) = (lo.max(alpha), hi.min(beta));
        if lo >= hi {
            return Ok(0.0);
        }
        integrate_edge_singular(|x| g(x) * self.density(x), alpha, beta, lo, hi, s)
    }

    pub fn continuous_mass(&self, s: QuadSettings) -> Result<f64> {
        Ok(2.0 * self.integrate_upper(|_| 1.0, 1.0, 2.0, s)?)
    }

    pub fn total_mass(&self, s: QuadSettings) -> Result<f64> {
        Ok(self.mass_at_0 + self.mass_at_1 + self.mass_at_2 + self.continuous_mass(s)?)
    }

    /// Mean of the law; each upper-branch λ contributes together with its mirror `2 − λ`.
    pub fn mean(&self, s: QuadSettings) -> Result<f64> {
        let cont = self.integrate_upper(|x| x + (2.0 - x), 1.0, 2.0, s)?;
        Ok(self.mass_at_1 + 2.0 * self.mass_at_2 + cont)
    }
}

fn pnc_loss(x: f64) -> f64 {
    (x / 2.0).log2()
}

fn cd_loss(x: f64) -> f64 {
    0.5 * (x * (2.0 - x)).log2()
}

/// Large-system gap per relay antenna, in bits.
pub fn normalized_gap(eta_a: f64, eta_b: f64, quad_tol: f64) -> Result<f64> {
    let spec = aed(eta_a, eta_b)?;
    let s = QuadSettings { abs_tol: quad_tol / 2.0, ..QuadSettings::default() };
    // Point masses at 1 and 2 sit where the integrands vanish.
    let cd = spec.integrate_upper(cd_loss, 1.0, PNC_THRESHOLD, s)?;
    let pnc = spec.integrate_upper(pnc_loss, PNC_THRESHOLD, 2.0, s)?;
    Ok(-(cd + pnc))
}

/// Upper support edge `1 + √(1 − (1−2η)²)` of the symmetric density, written as `1 + √(4η(1−η))`.
pub fn lambda_star(eta: f64) -> f64 {
    1.0 + (4.0 * eta * (1.0 - eta)).sqrt()
}

/// Symmetric density on `(1, λ*(η))`.
pub fn symmetric_density(lambda: f64, eta: f64) -> f64 {
    let q = 2.0 * lambda - lambda * lambda;
    let v = q - (1.0 - 2.0 * eta).powi(2);
    if q <= 0.0 || v <= 0.0 {
        0.0
    } else {
        v.sqrt() / (PI * q)
    }
}

fn symmetric_integral(eta: f64, g: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(TwrcError::DomainError(format!("antenna ratio {eta} outside (0, 1]")));
    }
    let top = lambda_star(eta);
    let (lo, hi) = (lo.max(1.0), hi.min(top));
    if lo >= hi {
        return Ok(0.0);
    }
    let s = QuadSettings { abs_tol: tol, ..QuadSettings::default() };
    integrate_edge_singular(|x| g(x) * symmetric_density(x, eta), 2.0 - top, top, lo, hi, s)
}

/// Symmetric gap with every pair decoded completely, for `η ≤ 1/10`.
pub fn symmetric_gap_cd_only(eta: f64, quad_tol: f64) -> Result<f64> {
    Ok(-symmetric_integral(eta, cd_loss, 1.0, lambda_star(eta), quad_tol)?)
}

/// Symmetric gap with the split at 8/5, for `η > 1/10`.
pub fn symmetric_gap_split(eta: f64, quad_tol: f64) -> Result<f64> {
    let cd = symmetric_integral(eta, cd_loss, 1.0, PNC_THRESHOLD, quad_tol / 2.0)?;
    let pnc = symmetric_integral(eta, pnc_loss, PNC_THRESHOLD, lambda_star(eta), quad_tol / 2.0)?;
    Ok(-(cd + pnc))
}

/// First-order large-system estimate of the SD average sum rate.
pub fn approx_average_sum_rate(ub_average: f64, n_r: usize, eta_a: f64, eta_b: f64) -> Result<f64> {
    if !(ub_average >= 0.0) {
        return Err(TwrcError::DomainError(format!("average upper bound must be nonnegative, got {ub_average}")));
    }
    Ok(ub_average - n_r as f64 * normalized_gap(eta_a, eta_b, 1e-10)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_vanishes_without_pairs() {
        assert_eq!(asymptotic_gap(&[2.0, 2.0], 2, 0).unwrap(), 0.0);
    }

    #[test]
    fn boundary_pair_is_rate_neutral() {
        let a = asymptotic_gap(&[1.6], 0, 0).unwrap();
        let b = asymptotic_gap(&[1.6], 0, 1).unwrap();
        assert!((a - b).abs() < 1e-15 && (a - 1.25f64.log2()).abs() < 1e-15);
    }

    #[test]
    fn threshold_count() {
        assert_eq!(optimal_l_prime(&[1.9, 1.7, 1.5, 1.2], 0), 2);
        assert_eq!(optimal_l_prime(&[2.0, 1.5, 1.2], 1), 0);
    }

    #[test]
    fn out_of_range_split_is_rejected() {
        assert!(matches!(asymptotic_gap(&[1.7], 0, 2), Err(TwrcError::IndexOutOfRange { .. })));
    }

    #[test]
    fn arcsine_law_at_half_load() {
        let spec = aed(0.5, 0.5).unwrap();
        assert_eq!((spec.mass_at_0, spec.mass_at_1, spec.mass_at_2), (0.0, 0.0, 0.0));
        let x = 1.3;
        assert!((spec.density(x) - 1.0 / (PI * (2.0 * x - x * x).sqrt())).abs() < 1e-14);
        assert!((spec.total_mass(QuadSettings::default()).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn full_load_is_all_common() {
        assert_eq!(normalized_gap(1.0, 1.0, 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn eta_outside_unit_interval_is_rejected() {
        assert!(matches!(aed(0.0, 0.5), Err(TwrcError::DomainError(_))));
        assert!(matches!(aed(0.5, 1.5), Err(TwrcError::DomainError(_))));
    }
}
