//! Compact SVD, RQ, GSVD and the joint decomposition `H_mR = U D_m G_m` of a channel pair.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Result, TwrcError};
use crate::linalg::{cplx, exchange, fro, hermitian_eigen, qr_positive, ComplexMatrix};

/// Default eigenvalue classification threshold.
pub const DEFAULT_TOL: f64 = 1e-8;

/// `H = U_m diag(delta) V†` with `U_m` having orthonormal columns.
#[derive(Debug, Clone)]
pub struct CompactSvd {
    pub u: ComplexMatrix,
    pub delta: Vec<f64>,
    pub v: ComplexMatrix,
}

pub fn compact_svd(h: &ComplexMatrix) -> Result<CompactSvd> {
    let (rows, cols) = h.shape();
    if cols == 0 || rows < cols {
        return Err(TwrcError::RankDeficient { ratio: 0.0 });
    }
    let svd = h.clone().svd(true, true);
    let delta: Vec<f64> = svd.singular_values.iter().copied().collect();
    let ratio = delta[cols - 1] / delta[0];
    if !(delta[0] > 0.0) || !(ratio > 1e-12) {
        return Err(TwrcError::RankDeficient { ratio: if ratio.is_finite() { ratio } else { 0.0 } });
    }
    Ok(CompactSvd { u: svd.u.unwrap(), delta, v: svd.v_t.unwrap().adjoint() })
}

/// Factors of `H_AR = U D_A G_A`, `H_BR = U D_B G_B`.
///
/// Columns of `U` are ordered as: `k` common directions, `l` interleaved pairs
/// `(u_i, u'_i)`, `d_A` directions seen only by A, then `d_B` seen only by B.
#[derive(Debug, Clone)]
pub struct JointDecomposition {
    pub u: ComplexMatrix,
    pub d_a: DMatrix<f64>,
    pub d_b: DMatrix<f64>,
    pub g_a: ComplexMatrix,
    pub g_b: ComplexMatrix,
    pub k: usize,
    pub l: usize,
    pub d_a_dim: usize,
    pub d_b_dim: usize,
    /// Eigenvalues of `U_A U_A† + U_B U_B†` in `(1, 2]`, descending, length `k + l`.
    pub lambdas: Vec<f64>,
}

impl JointDecomposition {
    pub fn n_a(&self) -> usize {
        self.k + self.l + self.d_a_dim
    }

    pub fn n_b(&self) -> usize {
        self.k + self.l + self.d_b_dim
    }

    /// The `l` eigenvalues strictly inside `(1, 2)`.
    pub fn pair_lambdas(&self) -> &[f64] {
        &self.lambdas[self.k..]
    }

    /// `U D_m` for user A (`true`) or B (`false`).
    pub fn directions(&self, user_a: bool) -> ComplexMatrix {
        let d = if user_a { &self.d_a } else { &self.d_b };
        &self.u * d.map(|x| cplx(x, 0.0))
    }
}

/// The 2-vectors `e_A`, `e_B` that place a pair's directions inside its plane.
pub fn pair_vectors(lambda: f64) -> ([f64; 2], [f64; 2]) {
    let a = (lambda / 2.0).sqrt();
    let b = ((2.0 - lambda) / 2.0).max(0.0).sqrt();
    ([a, b], [a, -b])
}

/// Builds `D_A` and `D_B` from the subspace dimensions and pair eigenvalues.
pub fn build_d_matrices(k: usize, pair_lambdas: &[f64], d_a: usize, d_b: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let l = pair_lambdas.len();
    let rows = k + 2 * l + d_a + d_b;
    let mut da = DMatrix::zeros(rows, k + l + d_a);
    let mut db = DMatrix::zeros(rows, k + l + d_b);
    for i in 0..k {
        da[(i, i)] = 1.0;
        db[(i, i)] = 1.0;
    }
    for (j, &lambda) in pair_lambdas.iter().enumerate() {
        let (ea, eb) = pair_vectors(lambda);
        let (r, c) = (k + 2 * j, k + j);
        da[(r, c)] = ea[0];
        da[(r + 1, c)] = ea[1];
        db[(r, c)] = eb[0];
        db[(r + 1, c)] = eb[1];
    }
    for i in 0..d_a {
        da[(k + 2 * l + i, k + l + i)] = 1.0;
    }
    for i in 0..d_b {
        db[(k + 2 * l + d_a + i, k + l + i)] = 1.0;
    }
    (da, db)
}

fn rayleigh(m: &ComplexMatrix, v: &ComplexMatrix) -> f64 {
    (v.adjoint() * m * v)[(0, 0)].re / v.norm_squared()
}

pub fn joint_decompose(h_ar: &ComplexMatrix, h_br: &ComplexMatrix, tol: f64) -> Result<JointDecomposition> {
    if h_ar.nrows() != h_br.nrows() {
        return Err(TwrcError::DimensionMismatch(format!(
            "H_AR has {} rows, H_BR has {}",
            h_ar.nrows(),
            h_br.nrows()
        )));
    }
    if !(tol > 0.0) {
        return Err(TwrcError::DomainError(format!("tol must be positive, got {tol}")));
    }
    let n_r = h_ar.nrows();
    let (n_a, n_b) = (h_ar.ncols(), h_br.ncols());
    let ua = compact_svd(h_ar)?.u;
    let ub = compact_svd(h_br)?.u;
    let pa = &ua * ua.adjoint();
    let pb = &ub * ub.adjoint();
    let m = &pa + &pb;
    let (raw, vectors) = hermitian_eigen(&m);

    let mut common = Vec::new();
    let mut pairs: Vec<(f64, ComplexMatrix)> = Vec::new();
    let mut ones = Vec::new();
    let mut lower = 0usize;
    for (i, _) in raw.iter().enumerate() {
        let v = vectors.columns(i, 1).into_owned();
        let lambda = rayleigh(&m, &v);
        if (lambda - 2.0).abs() <= tol {
            common.push((lambda, v));
        } else if lambda > 1.0 + tol && lambda < 2.0 - tol {
            pairs.push((lambda, v));
        } else if (lambda - 1.0).abs() <= tol {
            ones.push(v);
        } else if lambda > tol && lambda < 1.0 - tol {
            lower += 1;
        } else if lambda > 2.0 + tol || lambda < -tol {
            return Err(TwrcError::ClassificationAmbiguous(format!("eigenvalue {lambda} outside [0, 2]")));
        }
    }

    // The λ = 1 eigenspace can mix both users' private directions; rotate it so each
    // basis vector lies in exactly one column space.
    let (only_a, only_b) = split_private(&ones, &pa, &pb, tol)?;

    let k = common.len();
    let l = pairs.len();
    let (da_dim, db_dim) = (only_a.len(), only_b.len());
    if k + l + da_dim != n_a || k + l + db_dim != n_b || lower != l {
        return Err(TwrcError::ClassificationAmbiguous(format!(
            "counts k={k} l={l} d_A={da_dim} d_B={db_dim} lower={lower} do not match n_A={n_a}, n_B={n_b}"
        )));
    }

    let cols = k + 2 * l + da_dim + db_dim;
    let mut u = ComplexMatrix::zeros(n_r, cols);
    let mut lambdas = Vec::with_capacity(k + l);
    for (i, (lambda, v)) in common.iter().enumerate() {
        u.set_column(i, &v.column(0));
        lambdas.push(*lambda);
    }
    for (j, (lambda, v)) in pairs.iter().enumerate() {
        let la = &pa * v;
        let lb = &pb * v;
        let partner = (la - lb) / cplx((lambda * (2.0 - lambda)).sqrt(), 0.0);
        u.set_column(k + 2 * j, &v.column(0));
        u.set_column(k + 2 * j + 1, &partner.column(0));
        lambdas.push(*lambda);
    }
    for (i, v) in only_a.iter().chain(only_b.iter()).enumerate() {
        u.set_column(k + 2 * l + i, &v.column(0));
    }

    let (d_a, d_b) = build_d_matrices(k, &lambdas[k..], da_dim, db_dim);
    let g_a = (&u * d_a.map(|x| cplx(x, 0.0))).adjoint() * h_ar;
    let g_b = (&u * d_b.map(|x| cplx(x, 0.0))).adjoint() * h_br;
    Ok(JointDecomposition { u, d_a, d_b, g_a, g_b, k, l, d_a_dim: da_dim, d_b_dim: db_dim, lambdas })
}

fn split_private(
    ones: &[ComplexMatrix],
    pa: &ComplexMatrix,
    pb: &ComplexMatrix,
    tol: f64,
) -> Result<(Vec<ComplexMatrix>, Vec<ComplexMatrix>)> {
    if ones.is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    let n_r = pa.nrows();
    let mut w = ComplexMatrix::zeros(n_r, ones.len());
    for (i, v) in ones.iter().enumerate() {
        w.set_column(i, &v.column(0));
    }
    let (mu, y) = hermitian_eigen(&(w.adjoint() * pa * &w));
    let rotated = &w * y;
    let (mut only_a, mut only_b) = (Vec::new(), Vec::new());
    for (i, &x) in mu.iter().enumerate() {
        let v = rotated.columns(i, 1).into_owned();
        let (target, proj) = if (x - 1.0).abs() <= tol {
            (&mut only_a, pa)
        } else if x.abs() <= tol {
            (&mut only_b, pb)
        } else {
            return Err(TwrcError::ClassificationAmbiguous(format!(
                "unit eigenvector splits between users (weight {x})"
            )));
        };
        if fro(&(proj * &v - &v)) > tol {
            return Err(TwrcError::ClassificationAmbiguous(
                "unit eigenvector lies in neither column space".into(),
            ));
        }
        target.push(v);
    }
    Ok((only_a, only_b))
}

/// `v_{A;i}† v_{B;i}` for the 0-based column index `i < k + l`; equals `λ_i − 1`.
pub fn degree_of_orthogonality(jd: &JointDecomposition, i: usize) -> Result<Complex64> {
    let limit = jd.k + jd.l;
    if i >= limit {
        return Err(TwrcError::IndexOutOfRange { index: i, limit });
    }
    let va = jd.directions(true).column(i).into_owned();
    let vb = jd.directions(false).column(i).into_owned();
    Ok((va.adjoint() * vb)[(0, 0)])
}

/// `G = R T†` with `R` upper triangular (real non-negative diagonal) and `T` unitary.
pub fn rq_decompose(g: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let n = g.nrows();
    if g.ncols() != n {
        return Err(TwrcError::DimensionMismatch(format!("RQ needs a square matrix, got {}x{}", n, g.ncols())));
    }
    if n == 0 {
        return Ok((ComplexMatrix::zeros(0, 0), ComplexMatrix::zeros(0, 0)));
    }
    let j = exchange(n);
    let (q, r) = qr_positive(&(&j * g).adjoint());
    Ok((&j * r.adjoint() * &j, q * j))
}

/// Generalized SVD `H_A = B Σ_A T_A†`, `H_B = B Σ_B T_B†` with `B = Q R̃`.
#[derive(Debug, Clone)]
pub struct GsvdFactors {
    pub b: ComplexMatrix,
    pub sigma_a: Vec<f64>,
    pub sigma_b: Vec<f64>,
    pub t_a: ComplexMatrix,
    pub t_b: ComplexMatrix,
    pub q: ComplexMatrix,
    pub r_tilde: ComplexMatrix,
}

impl GsvdFactors {
    pub fn streams(&self) -> usize {
        self.sigma_a.len()
    }

    pub fn empty() -> Self {
        let z = ComplexMatrix::zeros(0, 0);
        GsvdFactors {
            b: z.clone(),
            sigma_a: Vec::new(),
            sigma_b: Vec::new(),
            t_a: z.clone(),
            t_b: z.clone(),
            q: z.clone(),
            r_tilde: z,
        }
    }

    /// Diagonal entry `r̃_{i,i}`.
    pub fn r_diag(&self, i: usize) -> f64 {
        self.r_tilde[(i, i)].re
    }
}

fn condition_number(h: &ComplexMatrix) -> f64 {
    let s = h.clone().singular_values();
    let max = s.max();
    let min = s.min();
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Streams are ordered by descending `σ_A` (ascending `σ_B`); `σ_A² + σ_B² = 1`.
pub fn gsvd(ha: &ComplexMatrix, hb: &ComplexMatrix) -> Result<GsvdFactors> {
    let n = ha.nrows();
    if ha.ncols() != n || hb.shape() != (n, n) {
        return Err(TwrcError::DimensionMismatch(format!(
            "GSVD needs equal square inputs, got {:?} and {:?}",
            ha.shape(),
            hb.shape()
        )));
    }
    if n == 0 {
        return Ok(GsvdFactors::empty());
    }
    for h in [ha, hb] {
        let cond = condition_number(h);
        if !(cond <= 1e12) {
            return Err(TwrcError::Singular { cond });
        }
    }
    let mut stacked = ComplexMatrix::zeros(2 * n, n);
    stacked.rows_mut(0, n).copy_from(&ha.adjoint());
    stacked.rows_mut(n, n).copy_from(&hb.adjoint());
    let (qs, rs) = qr_positive(&stacked);
    let q1 = qs.rows(0, n).into_owned();
    let q2 = qs.rows(n, n).into_owned();

    let svd = q1.svd(true, true);
    let t_a = svd.u.unwrap();
    let sigma_a: Vec<f64> = svd.singular_values.iter().copied().collect();
    let w = svd.v_t.unwrap().adjoint();
    let z = q2 * &w;
    // Columns of Z are orthogonal, so its positive-diagonal QR is T_B Σ_B up to rounding.
    let (t_b, r_b) = qr_positive(&z);
    let sigma_b: Vec<f64> = (0..n).map(|i| r_b[(i, i)].re.max(0.0)).collect();

    let b = rs.adjoint() * w;
    let (q, r_tilde) = qr_positive(&b);
    Ok(GsvdFactors { b, sigma_a, sigma_b, t_a, t_b, q, r_tilde })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::identity;

    fn real(rows: usize, cols: usize, v: &[f64]) -> ComplexMatrix {
        ComplexMatrix::from_row_slice(rows, cols, &v.iter().map(|&x| cplx(x, 0.0)).collect::<Vec<_>>())
    }

    #[test]
    fn svd_of_identity() {
        let s = compact_svd(&identity(2)).unwrap();
        assert_eq!(s.delta, vec![1.0, 1.0]);
        assert!(fro(&(&s.u * s.v.adjoint() - identity(2))) < 1e-15);
    }

    #[test]
    fn svd_of_scaled_axis() {
        let s = compact_svd(&real(2, 1, &[2.0, 0.0])).unwrap();
        assert!((s.delta[0] - 2.0).abs() < 1e-15);
        assert!((s.u[(0, 0)] * s.v[(0, 0)].conj() - cplx(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn svd_rejects_rank_deficiency() {
        assert!(matches!(compact_svd(&real(2, 2, &[1.0, 1.0, 1.0, 1.0])), Err(TwrcError::RankDeficient { .. })));
        assert!(matches!(compact_svd(&real(1, 2, &[1.0, 1.0])), Err(TwrcError::RankDeficient { .. })));
    }

    #[test]
    fn identical_channels_are_fully_common() {
        let h = real(3, 2, &[1.0, 0.5, -0.2, 1.0, 0.3, 0.7]);
        let jd = joint_decompose(&h, &h, DEFAULT_TOL).unwrap();
        assert_eq!((jd.k, jd.l, jd.d_a_dim, jd.d_b_dim), (2, 0, 0, 0));
        assert!(jd.lambdas.iter().all(|&x| (x - 2.0).abs() < 1e-12));
        assert!(fro(&(jd.directions(true) - jd.directions(false))) < 1e-12);
    }

    #[test]
    fn orthogonal_channels_are_private() {
        let jd = joint_decompose(&real(2, 1, &[1.0, 0.0]), &real(2, 1, &[0.0, 1.0]), DEFAULT_TOL).unwrap();
        assert_eq!((jd.k, jd.l, jd.d_a_dim, jd.d_b_dim), (0, 0, 1, 1));
        assert!(jd.lambdas.is_empty());
    }

    #[test]
    fn planted_pair_recovers_lambda() {
        let c = 0.5f64;
        let ha = real(2, 1, &[1.0, 0.0]);
        let hb = real(2, 1, &[c, (1.0 - c * c).sqrt()]);
        let jd = joint_decompose(&ha, &hb, DEFAULT_TOL).unwrap();
        assert_eq!((jd.k, jd.l), (0, 1));
        assert!((jd.lambdas[0] - 1.5).abs() < 1e-12);
        let dot = degree_of_orthogonality(&jd, 0).unwrap();
        assert!((dot.re - 0.5).abs() < 1e-12 && dot.im.abs() < 1e-12);
        assert!(degree_of_orthogonality(&jd, 1).is_err());
    }

    #[test]
    fn rq_fixed_points() {
        let (r, t) = rq_decompose(&identity(3)).unwrap();
        assert!(fro(&(r - identity(3))) < 1e-15 && fro(&(t - identity(3))) < 1e-15);
        let g = real(2, 2, &[2.0, 1.0, 0.0, 3.0]);
        let (r, t) = rq_decompose(&g).unwrap();
        assert!(fro(&(r - &g)) < 1e-14 && fro(&(t - identity(2))) < 1e-14);
    }

    #[test]
    fn gsvd_of_identical_identities() {
        let f = gsvd(&identity(2), &identity(2)).unwrap();
        for i in 0..2 {
            assert!((f.sigma_a[i] - 0.5f64.sqrt()).abs() < 1e-14);
            assert!((f.sigma_b[i] - 0.5f64.sqrt()).abs() < 1e-14);
        }
        let sa = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_iterator(2, f.sigma_a.iter().map(|&x| cplx(x, 0.0))));
        assert!(fro(&(&f.b * sa * f.t_a.adjoint() - identity(2))) < 1e-14);
    }

    #[test]
    fn gsvd_rejects_singular() {
        let s = real(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(gsvd(&identity(2), &s), Err(TwrcError::Singular { .. })));
    }
}
