//! Randomized invariant checks, runnable outside the test harness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::asym::{aed, asymptotic_gap, optimal_l_prime};
use crate::decomp::{degree_of_orthogonality, gsvd, joint_decompose, rq_decompose, DEFAULT_TOL};
use crate::error::Result;
use crate::linalg::{cplx, fro, hermitian_eigenvalues, identity, real_to_complex, ComplexMatrix};
use crate::optim::{OptimizerSettings, SdPlan, WeightedObjective};
use crate::quad::QuadSettings;
use crate::rates::{uplink_upper_bound, PowerConfig};
use crate::sim::{complex_gaussian_matrix, rayleigh_sample, trial_seed};

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub limit: f64,
    pub cases: usize,
}

struct Tally {
    name: &'static str,
    worst: f64,
    limit: f64,
    cases: usize,
    failed: bool,
}

impl Tally {
    fn new(name: &'static str, limit: f64) -> Self {
        Tally { name, worst: 0.0, limit, cases: 0, failed: false }
    }

    fn record(&mut self, value: f64) {
        self.cases += 1;
        if !(value <= self.limit) {
            self.failed = true;
        }
        if value.is_nan() || value > self.worst {
            self.worst = value;
        }
    }

    fn fail(&mut self) {
        self.cases += 1;
        self.failed = true;
    }

    fn finish(self) -> CheckResult {
        CheckResult { name: self.name, passed: !self.failed, worst: self.worst, limit: self.limit, cases: self.cases }
    }
}

fn rel(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    fro(&(a - b)) / fro(b)
}

fn decomposition_checks(draws: usize, seed: u64, out: &mut Vec<CheckResult>) {
    let mut recon = Tally::new("decomposition reconstruction", 1e-10);
    let mut ortho = Tally::new("decomposition orthonormality", 1e-10);
    let mut dot = Tally::new("degree of orthogonality equals lambda - 1", 1e-10);
    let mut pairing = Tally::new("eigenvalue pairing lambda <-> 2 - lambda", 1e-8);
    let mut dims = Tally::new("dimension accounting k + l + d_m = n_m", 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in 0..draws {
        let n_r = rng.random_range(2..=8);
        let n_a = rng.random_range(1..=3usize.min(n_r));
        let n_b = rng.random_range(1..=3usize.min(n_r));
        let ch = rayleigh_sample(n_a, n_b, n_r, trial_seed(seed, t as u64));
        let Ok(jd) = joint_decompose(&ch.h_ar, &ch.h_br, DEFAULT_TOL) else {
            recon.fail();
            continue;
        };
        let va = jd.directions(true);
        let vb = jd.directions(false);
        recon.record(rel(&(&va * &jd.g_a), &ch.h_ar).max(rel(&(&vb * &jd.g_b), &ch.h_br)));
        let uu = fro(&(jd.u.adjoint() * &jd.u - identity(jd.u.ncols())));
        let da = fro(&(real_to_complex(&(jd.d_a.transpose() * &jd.d_a)) - identity(n_a)));
        let db = fro(&(real_to_complex(&(jd.d_b.transpose() * &jd.d_b)) - identity(n_b)));
        ortho.record(uu.max(da).max(db));
        for i in 0..jd.k + jd.l {
            match degree_of_orthogonality(&jd, i) {
                Ok(z) => dot.record((z - cplx(jd.lambdas[i] - 1.0, 0.0)).norm()),
                Err(_) => dot.fail(),
            }
        }
        let pa = {
            let (q, _) = crate::linalg::qr_positive(&ch.h_ar);
            &q * q.adjoint()
        };
        let pb = {
            let (q, _) = crate::linalg::qr_positive(&ch.h_br);
            &q * q.adjoint()
        };
        let eig = hermitian_eigenvalues(&(pa + pb));
        let mut lower: Vec<f64> = eig.iter().copied().filter(|&x| x > DEFAULT_TOL && x < 1.0 - DEFAULT_TOL).collect();
        lower.sort_by(f64::total_cmp);
        let mut mirrored: Vec<f64> = jd.pair_lambdas().iter().map(|x| 2.0 - x).collect();
        mirrored.sort_by(f64::total_cmp);
        if lower.len() == mirrored.len() {
            pairing.record(lower.iter().zip(&mirrored).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        } else {
            pairing.fail();
        }
        let ok = jd.k + jd.l + jd.d_a_dim == n_a && jd.k + jd.l + jd.d_b_dim == n_b;
        dims.record(if ok { 0.0 } else { 1.0 });
    }
    out.extend([recon.finish(), ortho.finish(), dot.finish(), pairing.finish(), dims.finish()]);
}

fn factorization_checks(draws: usize, seed: u64, out: &mut Vec<CheckResult>) {
    let mut rq = Tally::new("RQ reconstruction", 1e-12);
    let mut gs = Tally::new("GSVD reconstruction", 1e-10);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for _ in 0..draws {
        let n = rng.random_range(1..=4);
        let g = complex_gaussian_matrix(&mut rng, n, n);
        match rq_decompose(&g) {
            Ok((r, t)) => rq.record(rel(&(&r * t.adjoint()), &g)),
            Err(_) => rq.fail(),
        }
        let hb = complex_gaussian_matrix(&mut rng, n, n);
        match gsvd(&g, &hb) {
            Ok(f) => {
                let sa = ComplexMatrix::from_diagonal(&f.sigma_a.iter().map(|&x| cplx(x, 0.0)).collect::<Vec<_>>().into());
                let sb = ComplexMatrix::from_diagonal(&f.sigma_b.iter().map(|&x| cplx(x, 0.0)).collect::<Vec<_>>().into());
                let qr = &f.q * &f.r_tilde;
                gs.record(
                    rel(&(&f.b * &sa * f.t_a.adjoint()), &g)
                        .max(rel(&(&f.b * &sb * f.t_b.adjoint()), &hb))
                        .max(rel(&(&qr * &sa * f.t_a.adjoint()), &g)),
                );
            }
            Err(_) => gs.fail(),
        }
    }
    out.extend([rq.finish(), gs.finish()]);
}

fn asymptotic_checks(seed: u64, out: &mut Vec<CheckResult>) {
    let mut mass = Tally::new("eigenvalue law total mass", 1e-6);
    for i in 1..=10 {
        for j in 1..=10 {
            let spec = aed(i as f64 / 10.0, j as f64 / 10.0).expect("ratios in range");
            match spec.total_mass(QuadSettings::default()) {
                Ok(m) => mass.record((m - 1.0).abs()),
                Err(_) => mass.fail(),
            }
        }
    }
    let mut split = Tally::new("threshold split minimizes the high-SNR gap", 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa5a5);
    for _ in 0..200 {
        let l = rng.random_range(1..=6);
        let mut lambdas: Vec<f64> = (0..l).map(|_| rng.random_range(1.0001..1.9999)).collect();
        lambdas.sort_by(|a, b| b.total_cmp(a));
        let best = asymptotic_gap(&lambdas, 0, optimal_l_prime(&lambdas, 0)).expect("valid split");
        let brute = (0..=l).map(|lp| asymptotic_gap(&lambdas, 0, lp).expect("valid split")).fold(f64::INFINITY, f64::min);
        split.record((best - brute).max(0.0));
    }
    out.extend([mass.finish(), split.finish()]);
}

fn dominance_checks(draws: usize, seed: u64, out: &mut Vec<CheckResult>) {
    let mut dom = Tally::new("SD dominates both baselines and stays below the bound", 1e-9);
    let s = OptimizerSettings::default();
    for t in 0..draws {
        let ch = rayleigh_sample(2, 2, 4, trial_seed(seed ^ 0xd0, t as u64)).with_power(PowerConfig::symmetric_db(20.0));
        let run = || -> Result<f64> {
            let jd = joint_decompose(&ch.h_ar, &ch.h_br, DEFAULT_TOL)?;
            let b = SdPlan::new(&ch.h_ar, &ch.h_br, &jd, &WeightedObjective::SUM, &s)?.optimize_with_baselines(&ch.power)?;
            let ub = uplink_upper_bound(&ch)?.sum();
            let sd = b.sd.rates.sum();
            Ok((b.gsvd_pnc.rates.sum() - sd).max(b.complete_decoding.rates.sum() - sd).max(sd - ub).max(0.0))
        };
        match run() {
            Ok(v) => dom.record(v),
            Err(_) => dom.fail(),
        }
    }
    out.push(dom.finish());
}

/// Runs every check; `draws` scales the randomized sections.
pub fn run_validation(draws: usize, seed: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();
    decomposition_checks(draws, seed, &mut out);
    factorization_checks(draws, seed, &mut out);
    asymptotic_checks(seed, &mut out);
    dominance_checks(draws.min(50), seed, &mut out);
    out
}
