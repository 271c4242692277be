//! Shared fixtures and brute-force reference implementations.
#![allow(dead_code)]

use idv_plda::linalg::{Mat, Vector};
use idv_plda::metrics::DcfParams;
use idv_plda::{Dataset, Domain, IVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    Vector::from_iterator(n, (0..n).map(|_| normal(rng)))
}

pub fn normal_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| normal(rng))
}

/// Well-conditioned random SPD matrix.
pub fn spd(rng: &mut ChaCha8Rng, k: usize) -> Mat {
    let a = normal_mat(rng, k, k);
    &a * a.transpose() / k as f64 + Mat::identity(k, k) * 0.5
}

/// Unlabelled vectors `shift + scale·N(0, I)`.
pub fn unlabeled(rng: &mut ChaCha8Rng, dim: usize, n: usize, domain: Domain, shift: f64, scale: f64) -> Dataset {
    let items = (0..n)
        .map(|i| {
            let v = normal_vec(rng, dim) * scale + Vector::from_element(dim, shift);
            IVector::new(format!("{}-{i:04}", domain.as_str()), None, domain, 150.0, v)
        })
        .collect();
    Dataset::new(dim, items).unwrap()
}

/// Labelled vectors: speaker mean `spread·N(0, I)` plus unit session noise.
pub fn labeled(rng: &mut ChaCha8Rng, dim: usize, speakers: usize, sessions: usize, spread: f64) -> Dataset {
    let mut items = Vec::new();
    for s in 0..speakers {
        let centre = normal_vec(rng, dim) * spread;
        for r in 0..sessions {
            let v = &centre + normal_vec(rng, dim);
            items.push(IVector::new(
                format!("spk{s:03}-s{r:02}"),
                Some(format!("spk{s:03}")),
                Domain::OutDomain,
                150.0,
                v,
            ));
        }
    }
    Dataset::new(dim, items).unwrap()
}

pub fn vectors(ds: &Dataset) -> Vec<Vector> {
    ds.values().cloned().collect()
}

pub fn plain_mean(vs: &[Vector]) -> Vector {
    let mut m = Vector::zeros(vs[0].len());
    for v in vs {
        m += v;
    }
    m / vs.len() as f64
}

/// `1/N Σ (x − c)(x − c)ᵀ` with explicit index loops.
pub fn loop_scatter(vs: &[Vector], c: &Vector) -> Mat {
    let d = c.len();
    let mut s = Mat::zeros(d, d);
    for v in vs {
        for i in 0..d {
            for j in 0..d {
                s[(i, j)] += (v[i] - c[i]) * (v[j] - c[j]);
            }
        }
    }
    s / vs.len() as f64
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

pub fn rel_err(a: &Mat, b: &Mat) -> f64 {
    max_abs(&(a - b)) / max_abs(b).max(1e-300)
}

/// Gaussian log density via LU determinant and explicit inverse.
pub fn gauss_logpdf(x: &Vector, mean: &Vector, cov: &Mat) -> f64 {
    let d = x - mean;
    let inv = cov.clone().try_inverse().expect("invertible covariance");
    let det = cov.clone().lu().determinant();
    let n = x.len() as f64;
    -0.5 * (n * (2.0 * std::f64::consts::PI).ln() + det.ln() + d.dot(&(inv * &d)))
}

/// Same-speaker vs different-speaker log-likelihood ratio of the stacked pair.
pub fn joint_gaussian_llr(mean: &Vector, s_b: &Mat, s_tot: &Mat, e: &Vector, t: &Vector) -> f64 {
    let k = mean.len();
    let stack = |a: &Vector, b: &Vector| Vector::from_iterator(2 * k, a.iter().chain(b.iter()).copied());
    let x = stack(e, t);
    let m = stack(mean, mean);
    let mut same = Mat::zeros(2 * k, 2 * k);
    let mut diff = Mat::zeros(2 * k, 2 * k);
    for i in 0..k {
        for j in 0..k {
            same[(i, j)] = s_tot[(i, j)];
            same[(k + i, k + j)] = s_tot[(i, j)];
            same[(i, k + j)] = s_b[(i, j)];
            same[(k + i, j)] = s_b[(i, j)];
            diff[(i, j)] = s_tot[(i, j)];
            diff[(k + i, k + j)] = s_tot[(i, j)];
        }
    }
    gauss_logpdf(&x, &m, &same) - gauss_logpdf(&x, &m, &diff)
}

/// `(P_fa, P_miss)` at every threshold that changes a decision, accepting `s ≥ θ`.
pub fn counted_points(tar: &[f64], non: &[f64]) -> Vec<(f64, f64)> {
    let mut thresholds: Vec<f64> = tar.iter().chain(non).copied().collect();
    thresholds.push(f64::INFINITY);
    thresholds
        .iter()
        .map(|&th| {
            let fa = non.iter().filter(|&&s| s >= th).count() as f64 / non.len() as f64;
            let miss = tar.iter().filter(|&&s| s < th).count() as f64 / tar.len() as f64;
            (fa, miss)
        })
        .collect()
}

/// EER as `max_α min_p α·P_fa + (1 − α)·P_miss`, searched over every pairwise crossing.
pub fn brute_eer(tar: &[f64], non: &[f64]) -> f64 {
    let pts = counted_points(tar, non);
    let g = |a: f64| {
        pts.iter()
            .map(|&(fa, miss)| a * fa + (1.0 - a) * miss)
            .fold(f64::INFINITY, f64::min)
    };
    let mut alphas = vec![0.0, 1.0];
    for p in &pts {
        for q in &pts {
            let denom = (p.0 - p.1) - (q.0 - q.1);
            if denom.abs() > 1e-15 {
                let a = (q.1 - p.1) / denom;
                if (0.0..=1.0).contains(&a) {
                    alphas.push(a);
                }
            }
        }
    }
    alphas.into_iter().map(g).fold(f64::NEG_INFINITY, f64::max)
}

pub fn brute_min_dcf(tar: &[f64], non: &[f64], p: &DcfParams) -> f64 {
    counted_points(tar, non)
        .into_iter()
        .map(|(fa, miss)| p.c_miss * p.p_target * miss + p.c_fa * (1.0 - p.p_target) * fa)
        .fold(f64::INFINITY, f64::min)
}
