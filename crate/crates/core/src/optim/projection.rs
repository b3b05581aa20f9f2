use nalgebra::DMatrix;

use super::WeightedObjective;
use crate::decomp::{pair_vectors, JointDecomposition};
use crate::error::{Result, TwrcError};
use crate::linalg::{cplx, ComplexMatrix};

/// Mixing coefficient of the second unit direction for correlation `rho` and ratio `r = w_B/w_A`.
fn beta(rho: f64, r: f64) -> f64 {
    let sign = if rho < 0.0 { -1.0 } else { 1.0 };
    let t = rho.abs() * (1.0 - r);
    sign / 2.0 * ((t * t + 4.0 * r).sqrt() - t)
}

/// Unit real vector maximizing `w_A log|p·a|² + w_B log|p·b|²` for unit `a`, `b`.
fn weighted_direction(a: &[f64], b: &[f64], w: &WeightedObjective) -> Vec<f64> {
    if w.w_b == 0.0 {
        return a.to_vec();
    }
    if w.w_a == 0.0 {
        return b.to_vec();
    }
    let rho: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let beta = beta(rho, w.w_b / w.w_a);
    let v: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + beta * y).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

fn embed(h: &ComplexMatrix) -> Result<Vec<f64>> {
    let norm = h.norm();
    if !(norm >= 1e-12) {
        return Err(TwrcError::DegenerateChannel(format!("channel norm {norm:e}")));
    }
    Ok(h.iter().map(|z| z.re / norm).chain(h.iter().map(|z| z.im / norm)).collect())
}

/// Closed-form projection direction for single-antenna users, computed on the
/// `[Re; Im]` embedding of the two relay-side channel vectors.
pub fn optimal_projection_simo(h_a: &ComplexMatrix, h_b: &ComplexMatrix, w: &WeightedObjective) -> Result<ComplexMatrix> {
    w.validate()?;
    if h_a.ncols() != 1 || h_a.shape() != h_b.shape() {
        return Err(TwrcError::DimensionMismatch("projection needs two column vectors of equal length".into()));
    }
    let a = embed(h_a)?;
    let b = embed(h_b)?;
    let p = weighted_direction(&a, &b, w);
    let n = h_a.nrows();
    Ok(ComplexMatrix::from_iterator(n, 1, (0..n).map(|i| cplx(p[i], p[n + i]))))
}

/// Projection direction `p_i` for an oblique pair with eigenvalue `lambda`.
pub fn projection_vector_pair(lambda: f64, w: &WeightedObjective) -> [f64; 2] {
    let (ea, eb) = pair_vectors(lambda);
    let p = weighted_direction(&ea, &eb, w);
    [p[0], p[1]]
}

/// Block-diagonal `(k+2l') × (k+l')` projection: identity on the common part, `p_i` per pair.
pub fn projection_matrix(jd: &JointDecomposition, l_prime: usize, w: &WeightedObjective) -> Result<DMatrix<f64>> {
    if l_prime > jd.l {
        return Err(TwrcError::IndexOutOfRange { index: l_prime, limit: jd.l });
    }
    w.validate()?;
    let k = jd.k;
    let mut p = DMatrix::zeros(k + 2 * l_prime, k + l_prime);
    for i in 0..k {
        p[(i, i)] = 1.0;
    }
    for (j, &lambda) in jd.pair_lambdas()[..l_prime].iter().enumerate() {
        let v = projection_vector_pair(lambda, w);
        p[(k + 2 * j, k + j)] = v[0];
        p[(k + 2 * j + 1, k + j)] = v[1];
    }
    Ok(p)
}
