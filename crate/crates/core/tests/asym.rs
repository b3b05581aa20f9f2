mod common;

use std::f64::consts::PI;

use common::rng;
use rand::Rng;
use twrc_core::asym::{
    aed, approx_average_sum_rate, asymptotic_gap, high_snr_gap_empirical, lambda_star, normalized_gap, optimal_l_prime,
    planted_channels, symmetric_density, symmetric_gap_cd_only, symmetric_gap_split, PNC_THRESHOLD,
};
use twrc_core::decomp::{joint_decompose, DEFAULT_TOL};
use twrc_core::quad::QuadSettings;
use twrc_core::rates::{PowerConfig, TwrcInstance};
use twrc_core::TwrcError;

/// Composite Simpson rule with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// The equal-ratio gap at one half, integrated in the angle `λ = 1 − cos θ`.
fn half_ratio_gap_by_angle() -> f64 {
    let split = (1.0 - PNC_THRESHOLD).acos();
    let cd = simpson(|t: f64| t.sin().log2(), PI / 2.0, split, 200_000);
    let pnc = simpson(|t: f64| ((1.0 - t.cos()) / 2.0).log2(), split, PI, 200_000);
    -(cd + pnc) / PI
}

#[test]
fn peak_gap_matches_angle_integral() {
    let oracle = half_ratio_gap_by_angle();
    let ours = normalized_gap(0.5, 0.5, 1e-12).unwrap();
    assert!((ours - oracle).abs() < 1e-9, "{ours} vs {oracle}");
    assert!((ours - 0.053).abs() < 1e-3);
}

#[test]
fn symmetric_forms_agree_with_general_law() {
    for eta in [0.05, 0.1, 0.2, 0.35, 0.5] {
        let general = normalized_gap(eta, eta, 1e-11).unwrap();
        let symmetric = if eta <= 0.1 { symmetric_gap_cd_only(eta, 1e-11) } else { symmetric_gap_split(eta, 1e-11) }.unwrap();
        assert!((general - symmetric).abs() < 1e-8, "eta {eta}: {general} vs {symmetric}");
    }
}

#[test]
fn split_forms_meet_at_one_tenth() {
    assert_eq!(lambda_star(0.1), 1.6);
    let a = symmetric_gap_cd_only(0.1, 1e-11).unwrap();
    let b = symmetric_gap_split(0.1, 1e-11).unwrap();
    assert!((a - b).abs() < 1e-6);
}

#[test]
fn peak_is_at_one_half_and_edges_vanish() {
    let peak = normalized_gap(0.5, 0.5, 1e-10).unwrap();
    for i in 1..=20 {
        let eta = i as f64 / 20.0;
        assert!(normalized_gap(eta, eta, 1e-10).unwrap() <= peak + 1e-12);
    }
    assert!(normalized_gap(0.01, 0.01, 1e-10).unwrap() < 0.01);
    assert!(normalized_gap(1.0, 1.0, 1e-10).unwrap().abs() < 1e-12);
}

#[test]
fn unequal_ratios_lose_less_than_the_balanced_case() {
    // For a fixed total ratio the balanced split maximizes the gap.
    let balanced = normalized_gap(0.375, 0.375, 1e-10).unwrap();
    assert!(normalized_gap(0.5, 0.25, 1e-10).unwrap() <= balanced + 1e-12);
}

#[test]
fn point_masses_follow_dimension_counting() {
    let cases = [((0.5, 0.5), (0.0, 0.0, 0.0)), ((0.5, 0.25), (0.25, 0.25, 0.0)), ((0.75, 0.75), (0.0, 0.0, 0.5)), ((1.0, 0.3), (0.0, 0.7, 0.3))];
    for ((ea, eb), (m0, m1, m2)) in cases {
        let spec = aed(ea, eb).unwrap();
        assert!((spec.mass_at_0 - m0).abs() < 1e-15 && (spec.mass_at_1 - m1).abs() < 1e-15 && (spec.mass_at_2 - m2).abs() < 1e-15, "{spec:?}");
        let s = QuadSettings::default();
        assert!((spec.total_mass(s).unwrap() - 1.0).abs() < 1e-6);
        assert!((spec.mean(s).unwrap() - (ea + eb)).abs() < 1e-6);
    }
}

#[test]
fn density_is_symmetric_and_matches_symmetric_form() {
    let spec = aed(0.3, 0.3).unwrap();
    for x in [1.05, 1.3, 1.7, 1.9] {
        assert!((spec.density(x) - spec.density(2.0 - x)).abs() < 1e-12);
        assert!((spec.density(x) - symmetric_density(x, 0.3)).abs() < 1e-12);
    }
    assert!(matches!(aed(0.0, 0.5), Err(TwrcError::DomainError(_))));
}

#[test]
fn threshold_split_is_optimal_on_random_spectra() {
    let mut r = rng(5);
    for _ in 0..500 {
        let l = r.random_range(1..6);
        let mut lambdas: Vec<f64> = (0..l).map(|_| r.random_range(1.001..1.999)).collect();
        lambdas.sort_by(|a, b| b.total_cmp(a));
        let best = asymptotic_gap(&lambdas, 0, optimal_l_prime(&lambdas, 0)).unwrap();
        for lp in 0..=l {
            assert!(best <= asymptotic_gap(&lambdas, 0, lp).unwrap() + 1e-15);
        }
    }
}

#[test]
fn planted_spectrum_is_recovered_and_gap_converges() {
    let lambdas = [1.9, 1.4];
    let (h_a, h_b) = planted_channels(&mut rng(3), 6, 1, &lambdas, 1, 0).unwrap();
    let jd = joint_decompose(&h_a, &h_b, DEFAULT_TOL).unwrap();
    assert_eq!((jd.k, jd.l, jd.d_a_dim, jd.d_b_dim), (1, 2, 1, 0));
    assert!((jd.pair_lambdas()[0] - 1.9).abs() < 1e-10 && (jd.pair_lambdas()[1] - 1.4).abs() < 1e-10);
    let lp = optimal_l_prime(&jd.lambdas, jd.k);
    assert_eq!(lp, 1);
    let delta = asymptotic_gap(&jd.lambdas, jd.k, lp).unwrap();
    let ch = TwrcInstance::new(h_a.clone(), h_b.clone(), h_a.transpose(), h_b.transpose(), PowerConfig::symmetric_db(0.0)).unwrap();
    let gaps: Vec<f64> = [40.0, 60.0, 80.0].iter().map(|&s| high_snr_gap_empirical(&ch, &jd, lp, s).unwrap()).collect();
    assert!((gaps[2] - delta).abs() < 0.02, "{gaps:?} vs {delta}");
    assert!((gaps[1] - delta).abs() >= (gaps[2] - delta).abs() - 1e-9);
}

#[test]
fn planted_channels_validate_inputs() {
    assert!(matches!(planted_channels(&mut rng(1), 3, 0, &[1.5, 1.5], 0, 0), Err(TwrcError::DimensionMismatch(_))));
    assert!(matches!(planted_channels(&mut rng(1), 4, 0, &[2.0], 0, 0), Err(TwrcError::DomainError(_))));
}

#[test]
fn large_system_estimate_subtracts_scaled_gap() {
    let est = approx_average_sum_rate(20.0, 4, 0.5, 0.5).unwrap();
    assert!((est - (20.0 - 4.0 * normalized_gap(0.5, 0.5, 1e-10).unwrap())).abs() < 1e-12);
    assert!(approx_average_sum_rate(-1.0, 4, 0.5, 0.5).is_err());
}
