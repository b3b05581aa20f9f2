use super::{OptimizerSettings, WeightedObjective};
use crate::decomp::GsvdFactors;
use crate::error::{Result, TwrcError};
use crate::linalg::waterfill;
use crate::rates::{pnc_rate_mimo, Indicator, RatePair};

#[derive(Debug, Clone, PartialEq)]
pub struct PncAllocation {
    pub psi_a: Vec<f64>,
    pub psi_b: Vec<f64>,
    pub rates: RatePair,
    pub objective: f64,
}

struct StreamModel<'a> {
    g: &'a GsvdFactors,
    n0: f64,
    w: WeightedObjective,
    indicator: Indicator,
}

impl StreamModel<'_> {
    /// Weighted contribution of stream `i` at powers `(a, b)`.
    fn stream(&self, i: usize, a: f64, b: f64) -> f64 {
        let sa = self.g.sigma_a[i] * self.g.sigma_a[i] * a;
        let sb = self.g.sigma_b[i] * self.g.sigma_b[i] * b;
        let r2 = self.g.r_diag(i) * self.g.r_diag(i);
        let coupled = matches!(self.indicator, Indicator::AllStreams) || i == 0;
        let den = sa + sb;
        let rate = |s: f64| {
            let mut arg = r2 * s / self.n0;
            if coupled && den > 0.0 {
                arg += s / den;
            }
            if arg > 1.0 {
                0.5 * arg.log2()
            } else {
                0.0
            }
        };
        self.w.w_a * rate(sa) + self.w.w_b * rate(sb)
    }

    fn total(&self, a: &[f64], b: &[f64]) -> f64 {
        (0..a.len()).map(|i| self.stream(i, a[i], b[i])).sum()
    }
}

/// Maximizes `f` on `[0, hi]`: coarse grid then golden-section refinement around the best cell.
fn maximize_1d(hi: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    const GRID: usize = 32;
    let mut best = (0.0, f(0.0));
    for i in 1..=GRID {
        let x = hi * i as f64 / GRID as f64;
        let v = f(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    let h = hi / GRID as f64;
    let (mut lo, mut up) = ((best.0 - h).max(0.0), (best.0 + h).min(hi));
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = up - r * (up - lo);
    let mut x2 = lo + r * (up - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while up - lo > 1e-12 * hi.max(1e-300) {
        if f1 >= f2 {
            up = x2;
            x2 = x1;
            f2 = f1;
            x1 = up - r * (up - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (up - lo);
            f2 = f(x2);
        }
    }
    for (x, v) in [(x1, f1), (x2, f2)] {
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}

/// One pass of pairwise power transfers for one user; slot `n` is unused power.
fn sweep_user(model: &StreamModel, own: &mut [f64], other: &[f64], slack: &mut f64, user_a: bool) {
    let n = own.len();
    let eval = |i: usize, x: f64| {
        if i == n {
            0.0
        } else if user_a {
            model.stream(i, x, other[i])
        } else {
            model.stream(i, other[i], x)
        }
    };
    for i in 0..n {
        for j in (i + 1)..=n {
            let xj = if j == n { *slack } else { own[j] };
            let total = own[i] + xj;
            if total <= 0.0 {
                continue;
            }
            let current = eval(i, own[i]) + eval(j, xj);
            let (x, v) = maximize_1d(total, |x| eval(i, x) + eval(j, total - x));
            if v > current {
                own[i] = x;
                if j == n {
                    *slack = total - x;
                } else {
                    own[j] = total - x;
                }
            }
        }
    }
}

fn coordinate_ascent(model: &StreamModel, mut a: Vec<f64>, mut b: Vec<f64>, budget_a: f64, budget_b: f64, max_iters: usize) -> (Vec<f64>, Vec<f64>, f64) {
    let mut slack_a = (budget_a - a.iter().sum::<f64>()).max(0.0);
    let mut slack_b = (budget_b - b.iter().sum::<f64>()).max(0.0);
    let mut f = model.total(&a, &b);
    for _ in 0..max_iters {
        sweep_user(model, &mut a, &b, &mut slack_a, true);
        sweep_user(model, &mut b, &a, &mut slack_b, false);
        let next = model.total(&a, &b);
        let gain = next - f;
        f = next;
        if gain < 1e-9 {
            break;
        }
    }
    (a, b, f)
}

/// Per-stream power allocation for the GSVD-aligned PNC streams.
///
/// Starts from water-filling on the uncoupled high-SNR model, plus equal and
/// single-stream starts, and refines each by pairwise coordinate ascent on the
/// exact objective.
pub fn pnc_power_allocate(
    g: &GsvdFactors,
    budget_a: f64,
    budget_b: f64,
    n0: f64,
    w: &WeightedObjective,
    s: &OptimizerSettings,
) -> Result<PncAllocation> {
    w.validate()?;
    if !(budget_a >= 0.0 && budget_b >= 0.0) {
        return Err(TwrcError::DomainError(format!("budgets must be nonnegative, got {budget_a}, {budget_b}")));
    }
    let n = g.streams();
    let finish = |psi_a: Vec<f64>, psi_b: Vec<f64>| -> Result<PncAllocation> {
        let rates = pnc_rate_mimo(g, &psi_a, &psi_b, n0, s.indicator)?;
        Ok(PncAllocation { objective: rates.weighted(w), psi_a, psi_b, rates })
    };
    if n <= 1 {
        return finish(vec![budget_a; n], vec![budget_b; n]);
    }
    let model = StreamModel { g, n0, w: *w, indicator: s.indicator };
    let gains = |sigma: &[f64]| -> Vec<f64> {
        (0..n).map(|i| g.r_diag(i).powi(2) * sigma[i].powi(2) / n0).collect()
    };
    let mut starts = vec![
        (waterfill(&gains(&g.sigma_a), budget_a), waterfill(&gains(&g.sigma_b), budget_b)),
        (vec![budget_a / n as f64; n], vec![budget_b / n as f64; n]),
    ];
    for i in [0, n - 1] {
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        a[i] = budget_a;
        b[i] = budget_b;
        starts.push((a, b));
    }
    let mut best: Option<(Vec<f64>, Vec<f64>, f64)> = None;
    for (a, b) in starts {
        let cand = coordinate_ascent(&model, a, b, budget_a, budget_b, s.max_iters);
        if best.as_ref().is_none_or(|x| cand.2 > x.2) {
            best = Some(cand);
        }
    }
    let (a, b, _) = best.unwrap();
    finish(a, b)
}
