use super::{OptimizerSettings, WeightedObjective};
use crate::error::Result;
use crate::linalg::{
    cplx, fro, hermitian_part, inverse_hpd, project_psd_trace, scaled_identity, waterfill_covariance, ComplexMatrix,
    LN2,
};
use crate::rates::{mac_cd_region, MacPentagon, RatePair};

#[derive(Debug, Clone)]
pub struct MacSolution {
    pub q_a: ComplexMatrix,
    pub q_b: ComplexMatrix,
    pub pentagon: MacPentagon,
    pub rates: RatePair,
    /// Norm of `Q − Π(Q + ∇f)` at the returned point.
    pub projected_gradient: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct Problem<'a> {
    h_a: &'a ComplexMatrix,
    h_b: &'a ComplexMatrix,
    p_a: f64,
    p_b: f64,
    n0: f64,
    w: WeightedObjective,
}

impl Problem<'_> {
    fn heavy_is_a(&self) -> bool {
        self.w.w_a >= self.w.w_b
    }

    fn objective(&self, q_a: &ComplexMatrix, q_b: &ComplexMatrix) -> Result<f64> {
        let m = mac_cd_region(self.h_a, self.h_b, q_a, q_b, self.n0)?;
        Ok(m.corner(&self.w).weighted(&self.w))
    }

    fn covariance(&self, h: &ComplexMatrix, q: &ComplexMatrix) -> ComplexMatrix {
        h * q * h.adjoint()
    }

    fn noise(&self, n: usize) -> ComplexMatrix {
        scaled_identity(n, self.n0)
    }

    /// Gradient of `w_light S_AB + (w_heavy − w_light) S_heavy`.
    fn gradient(&self, q_a: &ComplexMatrix, q_b: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
        let n = self.h_a.nrows();
        let c = 1.0 / (2.0 * LN2);
        let (w_heavy, w_light) = if self.heavy_is_a() { (self.w.w_a, self.w.w_b) } else { (self.w.w_b, self.w.w_a) };
        let ca = self.covariance(self.h_a, q_a);
        let cb = self.covariance(self.h_b, q_b);
        let k_all = inverse_hpd(&(self.noise(n) + &ca + &cb))?;
        let mut ga = self.h_a.adjoint() * &k_all * self.h_a * cplx(c * w_light, 0.0);
        let mut gb = self.h_b.adjoint() * &k_all * self.h_b * cplx(c * w_light, 0.0);
        let extra = w_heavy - w_light;
        if extra > 0.0 {
            if self.heavy_is_a() {
                let k = inverse_hpd(&(self.noise(n) + &ca))?;
                ga += self.h_a.adjoint() * k * self.h_a * cplx(c * extra, 0.0);
            } else {
                let k = inverse_hpd(&(self.noise(n) + &cb))?;
                gb += self.h_b.adjoint() * k * self.h_b * cplx(c * extra, 0.0);
            }
        }
        Ok((hermitian_part(&ga), hermitian_part(&gb)))
    }

    fn step(&self, q_a: &ComplexMatrix, q_b: &ComplexMatrix, ga: &ComplexMatrix, gb: &ComplexMatrix, t: f64) -> (ComplexMatrix, ComplexMatrix) {
        let t = cplx(t, 0.0);
        (project_psd_trace(&(q_a + ga * t), self.p_a), project_psd_trace(&(q_b + gb * t), self.p_b))
    }

    fn projected_gradient(&self, q_a: &ComplexMatrix, q_b: &ComplexMatrix, ga: &ComplexMatrix, gb: &ComplexMatrix) -> f64 {
        let (na, nb) = self.step(q_a, q_b, ga, gb, 1.0);
        (fro(&(na - q_a)).powi(2) + fro(&(nb - q_b)).powi(2)).sqrt()
    }

    /// Iterative water-filling; reaches the sum-rate optimum when the weights are equal.
    fn iterative_waterfill(&self, q_a: &mut ComplexMatrix, q_b: &mut ComplexMatrix, iters: usize) -> Result<()> {
        let n = self.h_a.nrows();
        let mut last = self.objective(q_a, q_b)?;
        for _ in 0..iters {
            *q_a = self.whitened_waterfill(self.h_a, &self.covariance(self.h_b, q_b), self.p_a, n)?;
            *q_b = self.whitened_waterfill(self.h_b, &self.covariance(self.h_a, q_a), self.p_b, n)?;
            let f = self.objective(q_a, q_b)?;
            if f - last < 1e-13 {
                break;
            }
            last = f;
        }
        Ok(())
    }

    fn whitened_waterfill(&self, h: &ComplexMatrix, interference: &ComplexMatrix, budget: f64, n: usize) -> Result<ComplexMatrix> {
        let k = inverse_hpd(&(self.noise(n) + interference))?;
        let chol = nalgebra::Cholesky::new(hermitian_part(&k)).ok_or(crate::error::TwrcError::NotPsd { min_eig: f64::NAN })?;
        let eff = chol.l().adjoint() * h;
        Ok(waterfill_covariance(&eff, budget, 1.0))
    }
}

/// Maximizes the weighted rate of the MAC vertex selected by the weights over
/// `tr Q_m <= P_m`, `Q_m ⪰ 0` by projected gradient ascent with Armijo backtracking.
pub fn mac_covariance_optimize(
    h_a: &ComplexMatrix,
    h_b: &ComplexMatrix,
    p_a: f64,
    p_b: f64,
    n0: f64,
    w: &WeightedObjective,
    s: &OptimizerSettings,
) -> Result<MacSolution> {
    w.validate()?;
    let prob = Problem { h_a, h_b, p_a: p_a.max(0.0), p_b: p_b.max(0.0), n0, w: *w };
    let (na, nb) = (h_a.ncols(), h_b.ncols());
    let finish = |q_a: ComplexMatrix, q_b: ComplexMatrix, pg: f64, iterations: usize, converged: bool| -> Result<MacSolution> {
        let pentagon = mac_cd_region(h_a, h_b, &q_a, &q_b, n0)?;
        Ok(MacSolution { rates: pentagon.corner(w), q_a, q_b, pentagon, projected_gradient: pg, iterations, converged })
    };

    if na <= 1 && nb <= 1 {
        return finish(scaled_identity(na, prob.p_a), scaled_identity(nb, prob.p_b), 0.0, 0, true);
    }
    if na == 0 || prob.p_a == 0.0 {
        return finish(ComplexMatrix::zeros(na, na), waterfill_covariance(h_b, prob.p_b, n0), 0.0, 0, true);
    }
    if nb == 0 || prob.p_b == 0.0 {
        return finish(waterfill_covariance(h_a, prob.p_a, n0), ComplexMatrix::zeros(nb, nb), 0.0, 0, true);
    }

    let mut q_a = scaled_identity(na, prob.p_a / na as f64);
    let mut q_b = scaled_identity(nb, prob.p_b / nb as f64);
    if w.w_a == w.w_b {
        prob.iterative_waterfill(&mut q_a, &mut q_b, s.max_iters.min(200))?;
    }
    let mut f = prob.objective(&q_a, &q_b)?;
    let mut t = 1.0;
    let mut pg = f64::INFINITY;
    for it in 0..s.max_iters {
        let (ga, gb) = prob.gradient(&q_a, &q_b)?;
        pg = prob.projected_gradient(&q_a, &q_b, &ga, &gb);
        if pg < s.gradient_tol {
            return finish(q_a, q_b, pg, it, true);
        }
        t *= 4.0;
        let mut accepted = false;
        while t > 1e-30 {
            let (ca, cb) = prob.step(&q_a, &q_b, &ga, &gb, t);
            let ascent = (ga.adjoint() * (&ca - &q_a)).trace().re + (gb.adjoint() * (&cb - &q_b)).trace().re;
            let fc = prob.objective(&ca, &cb)?;
            if fc >= f + 1e-4 * ascent {
                accepted = fc > f || ascent <= 0.0;
                if fc >= f {
                    q_a = ca;
                    q_b = cb;
                    f = fc;
                }
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            let (ga, gb) = prob.gradient(&q_a, &q_b)?;
            pg = prob.projected_gradient(&q_a, &q_b, &ga, &gb);
            let converged = pg < s.gradient_tol;
            return finish(q_a, q_b, pg, it + 1, converged);
        }
    }
    finish(q_a, q_b, pg, s.max_iters, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::trace_re;

    fn m(rows: usize, cols: usize, v: &[(f64, f64)]) -> ComplexMatrix {
        ComplexMatrix::from_row_slice(rows, cols, &v.iter().map(|&(a, b)| cplx(a, b)).collect::<Vec<_>>())
    }

    #[test]
    fn scalar_users_take_full_power() {
        let h = m(2, 1, &[(1.0, 0.0), (0.5, 0.5)]);
        let sol = mac_covariance_optimize(&h, &h, 3.0, 2.0, 1.0, &WeightedObjective::SUM, &OptimizerSettings::default()).unwrap();
        assert_eq!((sol.q_a[(0, 0)].re, sol.q_b[(0, 0)].re), (3.0, 2.0));
        assert!(sol.converged);
    }

    #[test]
    fn unequal_weights_converge_with_budget_respected() {
        let ha = m(3, 2, &[(1.0, 0.2), (0.1, -0.4), (0.3, 0.9), (-0.7, 0.0), (0.5, 0.5), (0.2, -1.1)]);
        let hb = m(3, 2, &[(0.4, -0.3), (1.2, 0.1), (-0.6, 0.2), (0.3, 0.8), (0.9, -0.2), (0.1, 0.4)]);
        let w = WeightedObjective { w_a: 2.0, w_b: 1.0 };
        let sol = mac_covariance_optimize(&ha, &hb, 10.0, 5.0, 1.0, &w, &OptimizerSettings::default()).unwrap();
        assert!(sol.converged, "pg {}", sol.projected_gradient);
        assert!(trace_re(&sol.q_a) <= 10.0 + 1e-9 && trace_re(&sol.q_b) <= 5.0 + 1e-9);
    }
}
