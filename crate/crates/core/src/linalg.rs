//! Dense complex linear-algebra helpers shared by the decomposition, rate and optimizer code.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen, QR};
use num_complex::Complex64;

use crate::error::{Result, TwrcError};

pub type ComplexMatrix = DMatrix<Complex64>;

pub const LN2: f64 = std::f64::consts::LN_2;

#[inline]
pub fn cplx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

pub fn scaled_identity(n: usize, s: f64) -> ComplexMatrix {
    ComplexMatrix::from_diagonal_element(n, n, cplx(s, 0.0))
}

pub fn real_to_complex(m: &DMatrix<f64>) -> ComplexMatrix {
    m.map(|x| cplx(x, 0.0))
}

pub fn all_finite(m: &ComplexMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Frobenius norm.
pub fn fro(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()) * cplx(0.5, 0.0)
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted descending.
pub fn hermitian_eigen(m: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), ComplexMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Eigenvalues of a Hermitian matrix, sorted descending.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut v: Vec<f64> = hermitian_part(m).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// log2 of the determinant of a Hermitian positive-definite matrix via Cholesky.
pub fn log2det_hpd(m: &ComplexMatrix) -> Result<f64> {
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let chol = Cholesky::new(hermitian_part(m)).ok_or_else(|| TwrcError::NotPsd {
        min_eig: hermitian_eigenvalues(m).last().copied().unwrap_or(f64::NAN),
    })?;
    let l = chol.l_dirty();
    Ok((0..m.nrows()).map(|i| 2.0 * l[(i, i)].re.ln()).sum::<f64>() / LN2)
}

/// `I + H Q H† / n0`.
pub fn noise_plus_signal(h: &ComplexMatrix, q: &ComplexMatrix, n0: f64) -> ComplexMatrix {
    let mut k = h * q * h.adjoint() * cplx(1.0 / n0, 0.0);
    for i in 0..k.nrows() {
        k[(i, i)] += cplx(1.0, 0.0);
    }
    k
}

/// `½ log2 |I + H Q H† / n0|`, the rate of one link over a two-slot protocol.
pub fn half_log2det_link(h: &ComplexMatrix, q: &ComplexMatrix, n0: f64) -> Result<f64> {
    if h.nrows() == 0 || h.ncols() == 0 {
        return Ok(0.0);
    }
    Ok(0.5 * log2det_hpd(&noise_plus_signal(h, q, n0))?.max(0.0))
}

pub fn inverse_hpd(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    Cholesky::new(hermitian_part(m))
        .map(|c| c.inverse())
        .ok_or(TwrcError::NotPsd { min_eig: f64::NAN })
}

/// Thin QR with a real non-negative diagonal on `R`.
pub fn qr_positive(a: &ComplexMatrix) -> (ComplexMatrix, ComplexMatrix) {
    let qr = QR::new(a.clone());
    let mut q = qr.q();
    let mut r = qr.r();
    for j in 0..r.nrows() {
        let d = r[(j, j)];
        let mag = d.norm();
        if mag > 0.0 {
            let phase = d / mag;
            for c in 0..r.ncols() {
                r[(j, c)] *= phase.conj();
            }
            for row in 0..q.nrows() {
                q[(row, j)] *= phase;
            }
            r[(j, j)] = cplx(mag, 0.0);
        }
    }
    (q, r)
}

/// Smallest eigenvalue of the Hermitian part; `+inf` for an empty matrix.
pub fn min_eigenvalue(m: &ComplexMatrix) -> f64 {
    hermitian_eigenvalues(m).last().copied().unwrap_or(f64::INFINITY)
}

pub fn trace_re(m: &ComplexMatrix) -> f64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)].re).sum()
}

/// Validates a transmit covariance against PSD-ness and a trace budget.
pub fn check_covariance(q: &ComplexMatrix, budget: f64) -> Result<()> {
    let min_eig = min_eigenvalue(q);
    if min_eig < -1e-9 {
        return Err(TwrcError::NotPsd { min_eig });
    }
    let used = trace_re(q);
    if used > budget + 1e-9 {
        return Err(TwrcError::PowerViolation { used, budget });
    }
    Ok(())
}

/// Euclidean projection of `mu` onto `{x >= 0, sum x <= budget}`.
pub fn project_capped_simplex(mu: &[f64], budget: f64) -> Vec<f64> {
    let clipped: Vec<f64> = mu.iter().map(|&x| x.max(0.0)).collect();
    if clipped.iter().sum::<f64>() <= budget {
        return clipped;
    }
    let mut sorted = mu.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &s) in sorted.iter().enumerate() {
        cumulative += s;
        let t = (cumulative - budget) / (i + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        }
    }
    mu.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Projection of a Hermitian matrix onto `{Q ⪰ 0, tr Q <= budget}` in Frobenius norm.
pub fn project_psd_trace(q: &ComplexMatrix, budget: f64) -> ComplexMatrix {
    let n = q.nrows();
    if n == 0 {
        return q.clone();
    }
    let (values, vectors) = hermitian_eigen(q);
    let mu = project_capped_simplex(&values, budget);
    let d = DVector::from_iterator(n, mu.iter().map(|&x| cplx(x, 0.0)));
    &vectors * ComplexMatrix::from_diagonal(&d) * vectors.adjoint()
}

/// Water-filling: maximizes `sum log(1 + g_i x_i)` subject to `sum x_i <= budget`, `x >= 0`.
pub fn waterfill(gains: &[f64], budget: f64) -> Vec<f64> {
    let mut out = vec![0.0; gains.len()];
    if budget <= 0.0 {
        return out;
    }
    let mut idx: Vec<usize> = (0..gains.len()).filter(|&i| gains[i] > 0.0).collect();
    idx.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]));
    let mut active = idx.len();
    while active > 0 {
        let inv_sum: f64 = idx[..active].iter().map(|&i| 1.0 / gains[i]).sum();
        let level = (budget + inv_sum) / active as f64;
        if level - 1.0 / gains[idx[active - 1]] > 0.0 {
            for &i in &idx[..active] {
                out[i] = level - 1.0 / gains[i];
            }
            return out;
        }
        active -= 1;
    }
    out
}

/// Optimal single-user covariance for `½ log2 |I + H Q H†/n0|` under `tr Q <= budget`.
pub fn waterfill_covariance(h: &ComplexMatrix, budget: f64, n0: f64) -> ComplexMatrix {
    let n = h.ncols();
    if n == 0 {
        return ComplexMatrix::zeros(0, 0);
    }
    let gram = h.adjoint() * h * cplx(1.0 / n0, 0.0);
    let (gains, vectors) = hermitian_eigen(&gram);
    let powers = waterfill(&gains, budget);
    let d = DVector::from_iterator(n, powers.iter().map(|&x| cplx(x, 0.0)));
    &vectors * ComplexMatrix::from_diagonal(&d) * vectors.adjoint()
}

/// Exchange (anti-identity) matrix.
pub fn exchange(n: usize) -> ComplexMatrix {
    let mut j = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        j[(i, n - 1 - i)] = cplx(1.0, 0.0);
    }
    j
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn capped_simplex_keeps_feasible_points() {
        assert_eq!(project_capped_simplex(&[0.2, -1.0, 0.3], 1.0), vec![0.2, 0.0, 0.3]);
    }

    #[test]
    fn capped_simplex_projects_onto_face() {
        let p = project_capped_simplex(&[2.0, 1.0], 1.0);
        assert!((p[0] - 1.0).abs() < 1e-15 && p[1].abs() < 1e-15);
        let p = project_capped_simplex(&[1.0, 1.0], 1.0);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn waterfill_drops_weak_channels() {
        let x = waterfill(&[10.0, 0.1], 0.5);
        assert!((x[0] - 0.5).abs() < 1e-15 && x[1] == 0.0);
        let x = waterfill(&[1.0, 1.0], 2.0);
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn qr_positive_diagonal() {
        let a = ComplexMatrix::from_row_slice(
            3,
            2,
            &[cplx(1.0, 2.0), cplx(0.0, 1.0), cplx(-1.0, 0.5), cplx(2.0, 0.0), cplx(0.3, -0.7), cplx(1.0, 1.0)],
        );
        let (q, r) = qr_positive(&a);
        assert!(fro(&(&q * &r - &a)) < 1e-13);
        for i in 0..2 {
            assert!(r[(i, i)].re >= 0.0 && r[(i, i)].im == 0.0);
        }
        assert!(fro(&(q.adjoint() * &q - identity(2))) < 1e-13);
    }

    #[test]
    fn scalar_log_det() {
        let h = ComplexMatrix::from_element(1, 1, cplx(1.0, 0.0));
        let q = ComplexMatrix::from_element(1, 1, cplx(3.0, 0.0));
        assert!((half_log2det_link(&h, &q, 1.0).unwrap() - 1.0).abs() < 1e-15);
    }
}
