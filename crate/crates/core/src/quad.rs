//! Adaptive Gauss–Kronrod (7/15) quadrature.

use crate::error::{Result, TwrcError};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

/// Gauss weights for the nodes `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Kronrod estimate and error bound on `[a, b]`.
fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let pair = f(c - x) + f(c + x);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

#[derive(Debug, Clone, Copy)]
pub struct QuadSettings {
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadSettings {
    fn default() -> Self {
        QuadSettings { abs_tol: 1e-8, max_intervals: 2000 }
    }
}

/// Integrates `f` over `[a, b]` by global adaptive bisection of the worst interval.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, s: QuadSettings) -> Result<f64> {
    if !(s.abs_tol > 0.0) {
        return Err(TwrcError::DomainError(format!("quadrature tolerance must be positive, got {}", s.abs_tol)));
    }
    if a == b {
        return Ok(0.0);
    }
    let (v, e) = gk15(&f, a, b);
    let mut pieces = vec![(a, b, v, e)];
    loop {
        let total: f64 = pieces.iter().map(|p| p.2).sum();
        let err: f64 = pieces.iter().map(|p| p.3).sum();
        if !total.is_finite() {
            return Err(TwrcError::QuadratureFailure { tol: s.abs_tol, estimate: err });
        }
        if err <= s.abs_tol {
            return Ok(total);
        }
        if pieces.len() >= s.max_intervals {
            return Err(TwrcError::QuadratureFailure { tol: s.abs_tol, estimate: err });
        }
        let worst = (0..pieces.len()).max_by(|&i, &j| pieces[i].3.total_cmp(&pieces[j].3)).unwrap();
        let (lo, hi, _, _) = pieces.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Err(TwrcError::QuadratureFailure { tol: s.abs_tol, estimate: err });
        }
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        pieces.push((lo, mid, v1, e1));
        pieces.push((mid, hi, v2, e2));
    }
}

/// Integrates over `[lo, hi] ⊆ [alpha, beta]` after `λ = α + (β−α)(1−cos θ)/2`,
/// which removes inverse-square-root singularities at `alpha` and `beta`.
pub fn integrate_edge_singular(
    f: impl Fn(f64) -> f64,
    alpha: f64,
    beta: f64,
    lo: f64,
    hi: f64,
    s: QuadSettings,
) -> Result<f64> {
    let half = 0.5 * (beta - alpha);
    let theta = |x: f64| (1.0 - (x - alpha) / half).clamp(-1.0, 1.0).acos();
    let g = |t: f64| f(alpha + half * (1.0 - t.cos())) * half * t.sin();
    integrate(g, theta(lo), theta(hi), s)
}
