//! Detection metrics: DET staircase, EER and minimum detection cost.
//!
//! A trial is accepted when `score ≥ θ`. Candidate thresholds are the distinct
//! score values plus `+∞`, which yields the full staircase from `(P_fa, P_miss)
//! = (1, 0)` to `(0, 1)`. The EER is read off the lower convex hull of that
//! staircase where it crosses `P_fa = P_miss`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scores::{ScoreKind, ScoreSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DcfParams {
    pub c_miss: f64,
    pub c_fa: f64,
    pub p_target: f64,
}

impl Default for DcfParams {
    fn default() -> Self {
        Self {
            c_miss: 10.0,
            c_fa: 1.0,
            p_target: 0.01,
        }
    }
}

impl DcfParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_miss > 0.0 && self.c_fa > 0.0 && self.p_target > 0.0 && self.p_target < 1.0) {
            return Err(Error::InvalidConfig(format!("invalid DCF parameters {self:?}")));
        }
        Ok(())
    }

    /// Cost of the better of the two trivial systems (accept all, reject all).
    pub fn default_cost(&self) -> f64 {
        (self.c_miss * self.p_target).min(self.c_fa * (1.0 - self.p_target))
    }

    pub fn cost(&self, p_miss: f64, p_fa: f64) -> f64 {
        self.c_miss * self.p_target * p_miss + self.c_fa * (1.0 - self.p_target) * p_fa
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetPoint {
    pub threshold: f64,
    pub p_fa: f64,
    pub p_miss: f64,
}

/// Staircase in increasing-threshold order: `p_miss` non-decreasing, `p_fa` non-increasing.
pub fn det_points_from_scores(targets: &[f64], nontargets: &[f64]) -> Result<Vec<DetPoint>> {
    if targets.is_empty() || nontargets.is_empty() {
        return Err(Error::OneClass);
    }
    if !targets.iter().chain(nontargets).all(|s| s.is_finite()) {
        return Err(Error::NonFinite("detection scores".into()));
    }
    let mut tar = targets.to_vec();
    let mut non = nontargets.to_vec();
    tar.sort_by(f64::total_cmp);
    non.sort_by(f64::total_cmp);
    let mut thresholds: Vec<f64> = tar.iter().chain(&non).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();

    let nt = tar.len() as f64;
    let nn = non.len() as f64;
    let (mut ti, mut ni) = (0usize, 0usize);
    let mut out = Vec::with_capacity(thresholds.len() + 1);
    for &th in &thresholds {
        while ti < tar.len() && tar[ti] < th {
            ti += 1;
        }
        while ni < non.len() && non[ni] < th {
            ni += 1;
        }
        out.push(DetPoint {
            threshold: th,
            p_fa: (non.len() - ni) as f64 / nn,
            p_miss: ti as f64 / nt,
        });
    }
    out.push(DetPoint {
        threshold: f64::INFINITY,
        p_fa: 0.0,
        p_miss: 1.0,
    });
    Ok(out)
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Lower convex hull of the staircase in `(p_fa, p_miss)`, ordered by increasing `p_fa`.
pub fn convex_hull(points: &[DetPoint]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = points.iter().map(|p| (p.p_fa, p.p_miss)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for p in pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull
}

pub fn eer_from_scores(targets: &[f64], nontargets: &[f64]) -> Result<f64> {
    let hull = convex_hull(&det_points_from_scores(targets, nontargets)?);
    // hull runs from (0, 1) to (1, 0); find the first vertex on or below the diagonal.
    for i in 0..hull.len() {
        let (fa, miss) = hull[i];
        if miss <= fa {
            if miss == fa || i == 0 {
                return Ok(miss);
            }
            let (fa0, miss0) = hull[i - 1];
            let d0 = miss0 - fa0;
            let d1 = miss - fa;
            let t = d0 / (d0 - d1);
            return Ok(fa0 + t * (fa - fa0));
        }
    }
    unreachable!("staircase always ends at (1, 0)")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinDcf {
    pub value: f64,
    /// `value / min(C_miss·P_target, C_fa·(1 − P_target))`.
    pub normalized: f64,
    pub threshold: f64,
}

pub fn min_dcf_from_scores(targets: &[f64], nontargets: &[f64], params: &DcfParams) -> Result<MinDcf> {
    params.validate()?;
    let points = det_points_from_scores(targets, nontargets)?;
    let mut best = MinDcf {
        value: f64::INFINITY,
        normalized: f64::INFINITY,
        threshold: f64::INFINITY,
    };
    for p in &points {
        let c = params.cost(p.p_miss, p.p_fa);
        if c < best.value {
            best.value = c;
            best.threshold = p.threshold;
        }
    }
    best.normalized = best.value / params.default_cost();
    Ok(best)
}

pub fn eer(scores: &ScoreSet, kind: ScoreKind) -> Result<f64> {
    let (t, n) = scores.split(kind)?;
    eer_from_scores(&t, &n)
}

pub fn min_dcf(scores: &ScoreSet, params: &DcfParams, kind: ScoreKind) -> Result<MinDcf> {
    let (t, n) = scores.split(kind)?;
    min_dcf_from_scores(&t, &n, params)
}

pub fn det_points(scores: &ScoreSet, kind: ScoreKind) -> Result<Vec<DetPoint>> {
    let (t, n) = scores.split(kind)?;
    det_points_from_scores(&t, &n)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub eer: f64,
    pub min_dcf: f64,
    pub min_dcf_normalized: f64,
    pub n_target: usize,
    pub n_nontarget: usize,
}

pub fn evaluate(scores: &ScoreSet, kind: ScoreKind, params: &DcfParams) -> Result<Metrics> {
    let (t, n) = scores.split(kind)?;
    let dcf = min_dcf_from_scores(&t, &n, params)?;
    Ok(Metrics {
        eer: eer_from_scores(&t, &n)?,
        min_dcf: dcf.value,
        min_dcf_normalized: dcf.normalized,
        n_target: t.len(),
        n_nontarget: n.len(),
    })
}

/// One line of `condition,system,eer,min_dcf,min_dcf_normalized,n_target,n_nontarget`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub condition: String,
    pub system: String,
    pub metrics: Metrics,
}

pub const METRIC_HEADER: &str = "condition,system,eer,min_dcf,min_dcf_normalized,n_target,n_nontarget";

pub fn metric_report_csv(rows: &[MetricRow]) -> String {
    let mut s = format!("{METRIC_HEADER}\n");
    for r in rows {
        let m = &r.metrics;
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.condition, r.system, m.eer, m.min_dcf, m.min_dcf_normalized, m.n_target, m.n_nontarget
        ));
    }
    s
}
