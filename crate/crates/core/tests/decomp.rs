mod common;

use common::{gaussian, jacobi_eigenvalues, max_abs_diff, projector};
use proptest::prelude::*;
use twrc_core::decomp::{degree_of_orthogonality, gsvd, joint_decompose, rq_decompose, DEFAULT_TOL};
use twrc_core::linalg::{cplx, fro, identity, ComplexMatrix};
use twrc_core::TwrcError;

fn rel(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    fro(&(a - b)) / fro(b)
}

fn diag(v: &[f64]) -> ComplexMatrix {
    ComplexMatrix::from_fn(v.len(), v.len(), |i, j| if i == j { cplx(v[i], 0.0) } else { cplx(0.0, 0.0) })
}

#[test]
fn eigenvalues_agree_with_jacobi_on_gram_schmidt_projectors() {
    for seed in 0..40 {
        let (n_a, n_b, n_r) = (1 + seed as usize % 3, 1 + (seed as usize / 3) % 3, 3 + seed as usize % 4);
        let h_a = gaussian(seed, n_r, n_a);
        let h_b = gaussian(seed + 1000, n_r, n_b);
        let jd = joint_decompose(&h_a, &h_b, DEFAULT_TOL).unwrap();
        let all = jacobi_eigenvalues(&(projector(&h_a) + projector(&h_b)));
        let mut upper: Vec<f64> = all.iter().copied().filter(|&x| x > 1.0 + 1e-8).collect();
        upper.sort_by(|a, b| b.total_cmp(a));
        assert!(max_abs_diff(&upper, &jd.lambdas) < 1e-10, "seed {seed}: {upper:?} vs {:?}", jd.lambdas);
    }
}

#[test]
fn shared_column_is_a_common_direction() {
    let shared = gaussian(1, 4, 1);
    let mut h_a = gaussian(2, 4, 2);
    let mut h_b = gaussian(3, 4, 2);
    h_a.set_column(0, &shared.column(0));
    h_b.set_column(1, &(shared.column(0) * cplx(0.3, -2.0)));
    let jd = joint_decompose(&h_a, &h_b, DEFAULT_TOL).unwrap();
    assert_eq!((jd.k, jd.l, jd.d_a_dim, jd.d_b_dim), (1, 1, 0, 0));
    assert!((jd.lambdas[0] - 2.0).abs() < 1e-10);
}

#[test]
fn orthogonal_users_have_only_private_directions() {
    let e = identity(4);
    let h_a = e.columns(0, 2) * gaussian(5, 2, 2);
    let h_b = e.columns(2, 1) * gaussian(6, 1, 1);
    let jd = joint_decompose(&h_a, &h_b, DEFAULT_TOL).unwrap();
    assert_eq!((jd.k, jd.l, jd.d_a_dim, jd.d_b_dim), (0, 0, 2, 1));
    assert!(rel(&(jd.directions(true) * &jd.g_a), &h_a) < 1e-12);
    assert!(rel(&(jd.directions(false) * &jd.g_b), &h_b) < 1e-12);
}

#[test]
fn identical_column_spaces_are_fully_common() {
    let h_a = gaussian(7, 3, 2);
    let h_b = &h_a * gaussian(8, 2, 2);
    let jd = joint_decompose(&h_a, &h_b, DEFAULT_TOL).unwrap();
    assert_eq!((jd.k, jd.l), (2, 0));
}

#[test]
fn mixed_private_space_is_split_by_user() {
    // Both users have a private direction, so the λ = 1 eigenspace is two-dimensional.
    let e = identity(5);
    let mut h_a = ComplexMatrix::zeros(5, 2);
    h_a.set_column(0, &e.column(0));
    h_a.set_column(1, &(e.column(2) + e.column(1) * cplx(0.5, 0.0)));
    let mut h_b = ComplexMatrix::zeros(5, 2);
    h_b.set_column(0, &e.column(3));
    h_b.set_column(1, &e.column(2));
    let jd = joint_decompose(&h_a, &h_b, DEFAULT_TOL).unwrap();
    assert_eq!((jd.k, jd.l, jd.d_a_dim, jd.d_b_dim), (0, 1, 1, 1));
    assert!(rel(&(jd.directions(true) * &jd.g_a), &h_a) < 1e-12);
    assert!(rel(&(jd.directions(false) * &jd.g_b), &h_b) < 1e-12);
}

#[test]
fn degree_of_orthogonality_rejects_out_of_range_index() {
    let jd = joint_decompose(&gaussian(1, 4, 2), &gaussian(2, 4, 2), DEFAULT_TOL).unwrap();
    assert!(matches!(degree_of_orthogonality(&jd, 2), Err(TwrcError::IndexOutOfRange { .. })));
}

#[test]
fn bad_inputs_are_rejected() {
    assert!(matches!(
        joint_decompose(&gaussian(1, 4, 2), &gaussian(2, 3, 2), DEFAULT_TOL),
        Err(TwrcError::DimensionMismatch(_))
    ));
    assert!(matches!(joint_decompose(&gaussian(1, 4, 2), &gaussian(2, 4, 2), 0.0), Err(TwrcError::DomainError(_))));
    let mut rank_one = gaussian(3, 4, 2);
    let c = rank_one.column(0).into_owned();
    rank_one.set_column(1, &c);
    assert!(matches!(
        joint_decompose(&rank_one, &gaussian(4, 4, 2), DEFAULT_TOL),
        Err(TwrcError::RankDeficient { .. })
    ));
}

#[test]
fn gsvd_generalized_values_match_pencil_eigenvalues() {
    for seed in 0..30 {
        let n = 1 + seed as usize % 4;
        let h_a = gaussian(seed, n, n);
        let h_b = gaussian(seed + 77, n, n);
        let f = gsvd(&h_a, &h_b).unwrap();
        let m = h_b.clone().try_inverse().unwrap() * &h_a;
        let mut oracle: Vec<f64> = jacobi_eigenvalues(&(&m * m.adjoint())).into_iter().map(f64::sqrt).collect();
        oracle.sort_by(|a, b| b.total_cmp(a));
        let ours: Vec<f64> = f.sigma_a.iter().zip(&f.sigma_b).map(|(a, b)| a / b).collect();
        let scale = oracle[0].max(1.0);
        assert!(max_abs_diff(&ours, &oracle) / scale < 1e-9, "seed {seed}: {ours:?} vs {oracle:?}");
    }
}

#[test]
fn gsvd_factor_structure() {
    let (h_a, h_b) = (gaussian(11, 3, 3), gaussian(12, 3, 3));
    let f = gsvd(&h_a, &h_b).unwrap();
    for i in 0..3 {
        assert!((f.sigma_a[i].powi(2) + f.sigma_b[i].powi(2) - 1.0).abs() < 1e-12);
        assert!(f.r_diag(i) > 0.0);
        for j in 0..i {
            assert!(f.r_tilde[(i, j)].norm() < 1e-12);
        }
    }
    assert!(f.sigma_a.windows(2).all(|w| w[0] >= w[1]));
    for t in [&f.t_a, &f.t_b, &f.q] {
        assert!(fro(&(t.adjoint() * t - identity(3))) < 1e-12);
    }
    assert!(rel(&(&f.b * diag(&f.sigma_b) * f.t_b.adjoint()), &h_b) < 1e-12);
}

#[test]
fn gsvd_rejects_singular_and_nonsquare_inputs() {
    let z = ComplexMatrix::zeros(2, 2);
    assert!(matches!(gsvd(&z, &gaussian(1, 2, 2)), Err(TwrcError::Singular { .. })));
    assert!(matches!(gsvd(&gaussian(1, 2, 3), &gaussian(2, 2, 3)), Err(TwrcError::DimensionMismatch(_))));
    assert_eq!(gsvd(&ComplexMatrix::zeros(0, 0), &ComplexMatrix::zeros(0, 0)).unwrap().streams(), 0);
}

#[test]
fn rq_has_lower_zero_triangle_and_unitary_factor() {
    let g = gaussian(21, 4, 4);
    let (r, t) = rq_decompose(&g).unwrap();
    assert!(rel(&(&r * t.adjoint()), &g) < 1e-13);
    assert!(fro(&(t.adjoint() * &t - identity(4))) < 1e-13);
    for i in 0..4 {
        assert!(r[(i, i)].re > 0.0 && r[(i, i)].im.abs() < 1e-13);
        for j in 0..i {
            assert!(r[(i, j)].norm() < 1e-13);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decomposition_reconstructs_and_is_orthonormal(seed in any::<u64>(), n_a in 1usize..4, n_b in 1usize..4, extra in 0usize..5) {
        let n_r = n_a.max(n_b).max(2) + extra;
        let h_a = gaussian(seed, n_r, n_a);
        let h_b = gaussian(seed ^ 0xabcdef, n_r, n_b);
        let jd = joint_decompose(&h_a, &h_b, DEFAULT_TOL).unwrap();
        prop_assert!(rel(&(jd.directions(true) * &jd.g_a), &h_a) < 1e-10);
        prop_assert!(rel(&(jd.directions(false) * &jd.g_b), &h_b) < 1e-10);
        prop_assert!(fro(&(jd.u.adjoint() * &jd.u - identity(jd.u.ncols()))) < 1e-10);
        prop_assert_eq!(jd.k + jd.l + jd.d_a_dim, n_a);
        prop_assert_eq!(jd.k + jd.l + jd.d_b_dim, n_b);
        for i in 0..jd.k + jd.l {
            let z = degree_of_orthogonality(&jd, i).unwrap();
            prop_assert!((z - cplx(jd.lambdas[i] - 1.0, 0.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn gsvd_reconstructs_both_users(seed in any::<u64>(), n in 1usize..5) {
        let h_a = gaussian(seed, n, n);
        let h_b = gaussian(seed.wrapping_add(1), n, n);
        let f = gsvd(&h_a, &h_b).unwrap();
        prop_assert!(rel(&(&f.b * diag(&f.sigma_a) * f.t_a.adjoint()), &h_a) < 1e-10);
        prop_assert!(rel(&(&f.b * diag(&f.sigma_b) * f.t_b.adjoint()), &h_b) < 1e-10);
        prop_assert!(rel(&(&f.q * &f.r_tilde), &f.b) < 1e-12);
    }
}
