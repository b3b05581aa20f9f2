//! Reference computations that avoid the library's own linear algebra.
#![allow(dead_code)]

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use twrc_core::linalg::ComplexMatrix;
use twrc_core::sim::complex_gaussian_matrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(seed: u64, rows: usize, cols: usize) -> ComplexMatrix {
    complex_gaussian_matrix(&mut rng(seed), rows, cols)
}

/// Eigenvalues of a Hermitian matrix by cyclic Jacobi on its real 2n×2n embedding, ascending.
pub fn jacobi_eigenvalues(m: &ComplexMatrix) -> Vec<f64> {
    let n = m.nrows();
    let size = 2 * n;
    let mut a = vec![vec![0.0; size]; size];
    for i in 0..n {
        for j in 0..n {
            let z = m[(i, j)];
            a[i][j] = z.re;
            a[i + n][j + n] = z.re;
            a[i][j + n] = -z.im;
            a[i + n][j] = z.im;
        }
    }
    for _ in 0..100 {
        let off: f64 = (0..size).flat_map(|i| (0..size).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..size {
            for q in (p + 1)..size {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..size {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..size {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..size).map(|i| a[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    // The embedding doubles every eigenvalue.
    ev.into_iter().step_by(2).collect()
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn det(m: &ComplexMatrix) -> Complex64 {
    let n = m.nrows();
    let mut a: Vec<Vec<Complex64>> = (0..n).map(|i| (0..n).map(|j| m[(i, j)]).collect()).collect();
    let mut d = Complex64::new(1.0, 0.0);
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| a[x][c].norm().total_cmp(&a[y][c].norm())).unwrap();
        if a[p][c].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if p != c {
            a.swap(p, c);
            d = -d;
        }
        d *= a[c][c];
        for r in (c + 1)..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                let v = a[c][k];
                a[r][k] -= f * v;
            }
        }
    }
    d
}

/// `½ log2 det(I + Σ H_i Q_i H_i† / n0)` via the elimination determinant.
pub fn half_log2det(links: &[(&ComplexMatrix, &ComplexMatrix)], n0: f64, n_r: usize) -> f64 {
    let mut k = ComplexMatrix::identity(n_r, n_r);
    for (h, q) in links {
        k += (*h * *q * h.adjoint()).map(|z| z / n0);
    }
    0.5 * det(&k).norm().log2()
}

/// Orthonormal basis of the column space by modified Gram-Schmidt.
pub fn gram_schmidt(m: &ComplexMatrix) -> ComplexMatrix {
    let mut cols: Vec<Vec<Complex64>> = Vec::new();
    for j in 0..m.ncols() {
        let mut v: Vec<Complex64> = m.column(j).iter().copied().collect();
        for q in &cols {
            let dot: Complex64 = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (x, y) in v.iter_mut().zip(q) {
                *x -= dot * y;
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-10 {
            cols.push(v.into_iter().map(|z| z / norm).collect());
        }
    }
    ComplexMatrix::from_fn(m.nrows(), cols.len(), |i, j| cols[j][i])
}

pub fn projector(m: &ComplexMatrix) -> ComplexMatrix {
    let q = gram_schmidt(m);
    &q * q.adjoint()
}

/// Box-constrained maximizer: a full grid, then repeated zooming around the best point.
pub fn zoom_maximize(f: impl Fn(&[f64]) -> f64, lo: &[f64], hi: &[f64], points: usize, levels: usize) -> (Vec<f64>, f64) {
    let dim = lo.len();
    let mut center: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let mut half: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (b - a)).collect();
    let mut best = (center.clone(), f(&center));
    for _ in 0..levels {
        let total = points.pow(dim as u32);
        for idx in 0..total {
            let mut rem = idx;
            let x: Vec<f64> = (0..dim)
                .map(|d| {
                    let i = rem % points;
                    rem /= points;
                    let t = -1.0 + 2.0 * i as f64 / (points - 1) as f64;
                    (center[d] + t * half[d]).clamp(lo[d], hi[d])
                })
                .collect();
            let v = f(&x);
            if v > best.1 {
                best = (x, v);
            }
        }
        center = best.0.clone();
        for h in &mut half {
            *h *= 0.5;
        }
    }
    best
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
