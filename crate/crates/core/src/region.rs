use serde::{Deserialize, Serialize};

use crate::decomp::JointDecomposition;
use crate::error::{Result, TwrcError};
use crate::linalg::scaled_identity;
use crate::optim::{
    mac_covariance_optimize, optimal_projection_simo, OptimizerSettings, SdPlan, WeightedObjective,
};
use crate::rates::{equal_power_downlink, mac_cd_region, pnc_rate_simo, simo_downlink, RatePair, TwrcInstance};

/// Pareto boundary of a down-closed convex rate region, ordered by increasing `r_a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRegion {
    pub boundary: Vec<RatePair>,
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

impl RateRegion {
    /// Time-sharing closure of the points together with everything they dominate.
    pub fn from_points(points: &[RatePair]) -> Self {
        let mut pts: Vec<(f64, f64)> = vec![(0.0, 0.0)];
        for p in points {
            let (x, y) = (p.r_a.max(0.0), p.r_b.max(0.0));
            pts.extend([(x, y), (x, 0.0), (0.0, y)]);
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        pts.dedup();
        let mut hull: Vec<(f64, f64)> = Vec::new();
        for p in pts {
            while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) >= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        let mut boundary: Vec<(f64, f64)> = Vec::new();
        for p in hull {
            while boundary.last().is_some_and(|q| q.0 <= p.0 && q.1 <= p.1) {
                boundary.pop();
            }
            if boundary.last().is_none_or(|q| q.1 > p.1) {
                boundary.push(p);
            }
        }
        RateRegion { boundary: boundary.into_iter().map(|(x, y)| RatePair::new(x, y)).collect() }
    }

    pub fn max_r_a(&self) -> f64 {
        self.boundary.last().map_or(0.0, |p| p.r_a)
    }

    pub fn max_r_b(&self) -> f64 {
        self.boundary.first().map_or(0.0, |p| p.r_b)
    }

    pub fn max_sum(&self) -> f64 {
        self.boundary.iter().map(RatePair::sum).fold(0.0, f64::max)
    }

    /// Largest `r_b` in the region at abscissa `x`, or `None` beyond the region.
    pub fn height_at(&self, x: f64) -> Option<f64> {
        if x < 0.0 || x > self.max_r_a() {
            return None;
        }
        let b = &self.boundary;
        if x <= b[0].r_a {
            return Some(b[0].r_b);
        }
        let j = b.iter().position(|p| p.r_a >= x).unwrap_or(b.len() - 1);
        let (p, q) = (b[j - 1], b[j]);
        let t = (x - p.r_a) / (q.r_a - p.r_a);
        Some(p.r_b + t * (q.r_b - p.r_b))
    }

    /// Whether `p` lies in the region, with slack `tol` on every constraint.
    pub fn contains(&self, p: RatePair, tol: f64) -> bool {
        if p.r_a < -tol || p.r_b < -tol || self.boundary.is_empty() {
            return false;
        }
        if p.r_a > self.max_r_a() + tol || p.r_b > self.max_r_b() + tol {
            return false;
        }
        // Signed distance above each boundary edge along its outward normal.
        self.boundary.windows(2).all(|w| {
            let (a, b) = (w[0], w[1]);
            let (nx, ny) = (a.r_b - b.r_b, b.r_a - a.r_a);
            let len = nx.hypot(ny);
            (nx * (p.r_a - a.r_a) + ny * (p.r_b - a.r_b)) / len <= tol
        })
    }

    /// Intersection with the box `[0, dl.r_a] × [0, dl.r_b]`.
    pub fn clip(&self, dl: RatePair) -> Self {
        let mut poly: Vec<(f64, f64)> = vec![(0.0, 0.0), (0.0, self.max_r_b())];
        poly.extend(self.boundary.iter().map(|p| (p.r_a, p.r_b)));
        poly.push((self.max_r_a(), 0.0));
        if dl.r_a.is_finite() {
            poly = clip_half_plane(&poly, |p| dl.r_a - p.0);
        }
        if dl.r_b.is_finite() {
            poly = clip_half_plane(&poly, |p| dl.r_b - p.1);
        }
        let pts: Vec<RatePair> = poly.into_iter().map(|(x, y)| RatePair::new(x, y)).collect();
        RateRegion::from_points(&pts)
    }
}

/// Sutherland–Hodgman step keeping the side where `side(p) >= 0`.
fn clip_half_plane(poly: &[(f64, f64)], side: impl Fn((f64, f64)) -> f64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(poly.len() + 2);
    for (i, &cur) in poly.iter().enumerate() {
        let prev = poly[(i + poly.len() - 1) % poly.len()];
        let (sc, sp) = (side(cur), side(prev));
        if (sc >= 0.0) != (sp >= 0.0) {
            let t = sp / (sp - sc);
            out.push((prev.0 + t * (cur.0 - prev.0), prev.1 + t * (cur.1 - prev.1)));
        }
        if sc >= 0.0 {
            out.push(cur);
        }
    }
    out
}

/// Single-antenna users: hull of the CD pentagon and the PNC points traced over
/// `weights`, clipped by the beamformed downlink rectangle.
pub fn simo_region(ch: &TwrcInstance, weights: &[WeightedObjective], mmse: bool) -> Result<RateRegion> {
    if ch.n_a() != 1 || ch.n_b() != 1 {
        return Err(TwrcError::DimensionMismatch("simo_region needs single-antenna users".into()));
    }
    let p = &ch.power;
    let pentagon = mac_cd_region(
        &ch.h_ar,
        &ch.h_br,
        &scaled_identity(1, p.p_a),
        &scaled_identity(1, p.p_b),
        p.n0,
    )?;
    let mut points = vec![
        RatePair::new(pentagon.a, pentagon.sum - pentagon.a),
        RatePair::new(pentagon.sum - pentagon.b, pentagon.b),
    ];
    for w in weights {
        let dir = optimal_projection_simo(&ch.h_ar, &ch.h_br, w)?;
        points.push(pnc_rate_simo(&dir, &ch.h_ar, &ch.h_br, p.p_a, p.p_b, p.n0, mmse)?);
    }
    Ok(RateRegion::from_points(&points).clip(simo_downlink(ch)))
}

/// Uplink SD points, one per boundary weight in `s`.
pub fn sd_region_points(ch: &TwrcInstance, jd: &JointDecomposition, s: &OptimizerSettings) -> Result<Vec<RatePair>> {
    s.weight_pairs()
        .iter()
        .map(|w| Ok(SdPlan::new(&ch.h_ar, &ch.h_br, jd, w, s)?.optimize(&ch.power)?.rates))
        .collect()
}

/// Uplink complete-decoding points on the unsplit channels, one per boundary weight.
pub fn cd_region_points(ch: &TwrcInstance, s: &OptimizerSettings) -> Result<Vec<RatePair>> {
    let p = &ch.power;
    s.weight_pairs()
        .iter()
        .map(|w| Ok(mac_covariance_optimize(&ch.h_ar, &ch.h_br, p.p_a, p.p_b, p.n0, w, s)?.rates))
        .collect()
}

/// SD region over the weight sweep, clipped by the equal-power downlink.
pub fn trace_region(ch: &TwrcInstance, jd: &JointDecomposition, s: &OptimizerSettings) -> Result<RateRegion> {
    let points = sd_region_points(ch, jd, s)?;
    Ok(RateRegion::from_points(&points).clip(equal_power_downlink(ch)?))
}
