//! Length normalization, Gaussian PLDA training by EM, and LLR scoring.
//!
//! Model: `ŵ_r = m + U₁x + ε_r` with `x ~ N(0, I_Q)` shared by a speaker's
//! sessions and `ε_r ~ N(0, Λ⁻¹)` per session, `Λ` full rank. Scoring uses the
//! closed form of the two-Gaussian likelihood ratio: with centred `u` and `v`,
//!
//! ```text
//! llr = ½uᵀQu + ½vᵀQv + uᵀPv + c
//! Q   = T⁻¹ − (T − BT⁻¹B)⁻¹
//! P   = T⁻¹B(T − BT⁻¹B)⁻¹
//! c   = ½ln|T| − ½ln|T − BT⁻¹B|
//! ```
//!
//! where `B = U₁U₁ᵀ` and `T = B + Λ⁻¹`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use nalgebra::Cholesky;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::{check_dim, Dataset, Trial};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::par;
use crate::persist::{checked_dim, read_file, BlobReader, BlobWriter};
use crate::scores::{ScoreEntry, ScoreSet};

/// Eigenvoices at full scale.
pub const DEFAULT_EIGENVOICES: usize = 120;
pub const DEFAULT_EM_ITERS: usize = 20;

/// Condition number of `Σ_within` above which a ridge is added before inversion.
const MAX_WITHIN_CONDITION: f64 = 1e12;
const WITHIN_RIDGE: f64 = 1e-8;

/// Divides every vector by its Euclidean norm.
pub fn length_normalize(ds: &Dataset) -> Result<Dataset> {
    ds.try_map_values(ds.dim(), |it| {
        let n = it.values.norm();
        if n == 0.0 {
            Err(Error::ZeroNorm(it.id.clone()))
        } else {
            Ok(&it.values / n)
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
struct ScoringCache {
    quad: Mat,
    cross: Mat,
    constant: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PldaModel {
    mean: Vector,
    u1: Mat,
    lambda_prec: Mat,
    sigma_within: Mat,
    sigma_between: Mat,
    sigma_total: Mat,
    cache: ScoringCache,
}

impl PldaModel {
    pub fn new(mean: Vector, u1: Mat, lambda_prec: Mat) -> Result<Self> {
        let k = mean.len();
        check_dim(k, u1.nrows(), "PLDA eigenvoice rows")?;
        check_dim(k, lambda_prec.nrows(), "PLDA precision rows")?;
        check_dim(k, lambda_prec.ncols(), "PLDA precision cols")?;
        if u1.ncols() > k {
            return Err(Error::InvalidConfig(format!("{} eigenvoices exceed dimension {k}", u1.ncols())));
        }
        if !mean.iter().chain(u1.iter()).chain(lambda_prec.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("PLDA parameters".into()));
        }
        if linalg::asymmetry(&lambda_prec) > 1e-10 {
            return Err(Error::InvalidInput("PLDA precision is not symmetric".into()));
        }
        let lambda_prec = linalg::symmetrize(&lambda_prec);
        let sigma_within = linalg::spd_inverse(&lambda_prec, "PLDA precision")?;
        let sigma_between = linalg::symmetrize(&(&u1 * u1.transpose()));
        let sigma_total = &sigma_between + &sigma_within;
        let cache = scoring_cache(&sigma_between, &sigma_total)?;
        Ok(Self {
            mean,
            u1,
            lambda_prec,
            sigma_within,
            sigma_between,
            sigma_total,
            cache,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn n_eigenvoices(&self) -> usize {
        self.u1.ncols()
    }

    pub fn mean(&self) -> &Vector {
        &self.mean
    }

    pub fn eigenvoices(&self) -> &Mat {
        &self.u1
    }

    pub fn precision(&self) -> &Mat {
        &self.lambda_prec
    }

    pub fn sigma_within(&self) -> &Mat {
        &self.sigma_within
    }

    pub fn sigma_between(&self) -> &Mat {
        &self.sigma_between
    }

    pub fn sigma_total(&self) -> &Mat {
        &self.sigma_total
    }

    /// Same parameters with a different mean.
    pub fn with_mean(&self, mean: Vector) -> Result<Self> {
        check_dim(self.dim(), mean.len(), "PLDA mean")?;
        Ok(Self { mean, ..self.clone() })
    }

    fn half_quad(&self, centred: &Vector) -> f64 {
        0.5 * centred.dot(&(&self.cache.quad * centred))
    }

    /// LLR of two vectors without dimension checks.
    fn llr(&self, enrol: &Vector, test: &Vector) -> f64 {
        let u = enrol - &self.mean;
        let v = test - &self.mean;
        self.half_quad(&u) + self.half_quad(&v) + (&self.cache.cross * &u).dot(&v) + self.cache.constant
    }

    /// Exact marginal log-likelihood of a labelled dataset.
    pub fn log_likelihood(&self, ds: &Dataset) -> Result<f64> {
        check_dim(self.dim(), ds.dim(), "PLDA log-likelihood")?;
        let stats = SpeakerStats::collect(ds, &self.mean)?;
        let lambda_chol = Cholesky::new(self.lambda_prec.clone())
            .ok_or_else(|| Error::Factorization("PLDA precision".into()))?;
        Ok(em_step(&stats, &self.u1, &self.lambda_prec, linalg::log_det(&lambda_chol), 0)?.log_likelihood)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = BlobWriter::new(b"PLDA1");
        w.u32(self.dim() as u32);
        w.u32(self.n_eigenvoices() as u32);
        w.vector(&self.mean);
        w.matrix(&self.u1);
        w.matrix(&self.lambda_prec);
        w.finish()
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = BlobReader::new(buf, b"PLDA1")?;
        let k = checked_dim(r.u32()? as u64, "PLDA dim")?;
        let q = checked_dim(r.u32()? as u64, "PLDA eigenvoices")?;
        let mean = r.vector(k)?;
        let u1 = r.matrix(k, q)?;
        let lambda = r.matrix(k, k)?;
        r.expect_end()?;
        Self::new(mean, u1, lambda)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?)
    }
}

fn scoring_cache(between: &Mat, total: &Mat) -> Result<ScoringCache> {
    let t_chol = Cholesky::new(total.clone())
        .ok_or_else(|| Error::Factorization("PLDA total covariance".into()))?;
    let t_inv = linalg::symmetrize(&t_chol.inverse());
    let schur = linalg::symmetrize(&(total - between * &t_inv * between));
    let s_chol = Cholesky::new(schur.clone())
        .ok_or_else(|| Error::Factorization("PLDA conditional covariance".into()))?;
    let s_inv = linalg::symmetrize(&s_chol.inverse());
    let quad = linalg::symmetrize(&(&t_inv - &s_inv));
    let cross = linalg::symmetrize(&(&t_inv * between * &s_inv));
    let constant = 0.5 * linalg::log_det(&t_chol) - 0.5 * linalg::log_det(&s_chol);
    Ok(ScoringCache { quad, cross, constant })
}

/// Per-speaker sufficient statistics around a fixed mean.
struct SpeakerStats {
    dim: usize,
    n_total: usize,
    /// `(n_s, f_s = Σ_r (w_r − m))` in sorted speaker order.
    speakers: Vec<(usize, Vector)>,
    /// `Σ_r (w_r − m)(w_r − m)ᵀ` over all sessions.
    scatter: Mat,
}

impl SpeakerStats {
    fn collect(ds: &Dataset, mean: &Vector) -> Result<Self> {
        if !ds.is_labeled() {
            return Err(Error::InvalidInput("PLDA requires every utterance to carry a speaker label".into()));
        }
        let dim = ds.dim();
        let groups: Vec<&[usize]> = ds.speakers().map(|(_, g)| g).collect();
        let partials = par::map(&groups, |group| {
            let mut f = Vector::zeros(dim);
            let mut s = Mat::zeros(dim, dim);
            for &i in group.iter() {
                let r = &ds.items()[i].values - mean;
                s.ger(1.0, &r, &r, 1.0);
                f += r;
            }
            (group.len(), f, s)
        });
        let mut scatter = Mat::zeros(dim, dim);
        let mut speakers = Vec::with_capacity(partials.len());
        for (n, f, s) in partials {
            scatter += s;
            speakers.push((n, f));
        }
        Ok(Self {
            dim,
            n_total: ds.len(),
            speakers,
            scatter: linalg::symmetrize(&scatter),
        })
    }
}

struct EStep {
    log_likelihood: f64,
    /// `Σ_s f_s x̂_sᵀ`
    cross: Mat,
    /// `Σ_s n_s (P_s⁻¹ + x̂_s x̂_sᵀ)`
    second_moment: Mat,
}

/// E-step statistics and the exact marginal log-likelihood at `(U, Λ)`.
fn em_step(stats: &SpeakerStats, u: &Mat, lambda: &Mat, log_det_lambda: f64, iteration: usize) -> Result<EStep> {
    let k = stats.dim;
    let q = u.ncols();
    let lu = lambda * u;
    let g = u.tr_mul(&lu);
    // Posterior precision depends only on the session count.
    let mut posteriors: BTreeMap<usize, (Mat, f64)> = BTreeMap::new();
    for &(n, _) in &stats.speakers {
        if posteriors.contains_key(&n) {
            continue;
        }
        let mut p = &g * n as f64;
        for i in 0..q {
            p[(i, i)] += 1.0;
        }
        let chol = Cholesky::new(linalg::symmetrize(&p)).ok_or(Error::SingularAccumulator { iteration })?;
        let ld = linalg::log_det(&chol);
        posteriors.insert(n, (linalg::symmetrize(&chol.inverse()), ld));
    }
    let per_speaker = par::map(&stats.speakers, |(n, f)| {
        let (p_inv, ld) = &posteriors[n];
        let b = lu.tr_mul(f);
        let x = p_inv * &b;
        let nf = *n as f64;
        let ll = -0.5 * (nf * k as f64 * (2.0 * PI).ln() - nf * log_det_lambda + ld - b.dot(&x));
        let mut moment = p_inv * nf;
        moment.ger(nf, &x, &x, 1.0);
        (ll, f * x.transpose(), moment)
    });
    let mut log_likelihood = -0.5 * (lambda.component_mul(&stats.scatter)).sum();
    let mut cross = Mat::zeros(k, q);
    let mut second_moment = Mat::zeros(q, q);
    for (ll, c, m) in &per_speaker {
        log_likelihood += ll;
        cross += c;
        second_moment += m;
    }
    Ok(EStep {
        log_likelihood,
        cross,
        second_moment,
    })
}

/// Inverts `Σ_within`, adding a small ridge first when it is badly conditioned.
fn within_to_precision(sigma_within: &Mat, iteration: usize) -> Result<Mat> {
    let k = sigma_within.nrows();
    let mut sw = linalg::symmetrize(sigma_within);
    if linalg::spd_condition(&sw) > MAX_WITHIN_CONDITION {
        let ridge = WITHIN_RIDGE * linalg::ridge_scale(&sw);
        log::warn!("EM iteration {iteration}: within-speaker covariance ill-conditioned, adding ridge {ridge:e}");
        for i in 0..k {
            sw[(i, i)] += ridge;
        }
    }
    linalg::spd_inverse(&sw, "within-speaker covariance").map_err(|_| Error::SingularAccumulator { iteration })
}

#[derive(Debug, Clone)]
pub struct PldaTraining {
    pub model: PldaModel,
    /// Marginal log-likelihood at the initial point and after every iteration.
    pub log_likelihood: Vec<f64>,
}

impl PldaTraining {
    /// `iteration,log_likelihood` CSV.
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("iteration,log_likelihood\n");
        for (i, ll) in self.log_likelihood.iter().enumerate() {
            s.push_str(&format!("{i},{ll}\n"));
        }
        s
    }
}

/// Fits a Gaussian PLDA model with `q` eigenvoices by `iters` EM iterations.
///
/// The mean is the global data mean and stays fixed. `U₁` starts as `0.1·N(0,1)`
/// from `seed`, `Λ` as the inverse global covariance.
pub fn train_gplda(ds: &Dataset, q: usize, iters: usize, seed: u64) -> Result<PldaTraining> {
    let k = ds.dim();
    if q == 0 {
        return Err(Error::InvalidConfig("PLDA needs at least one eigenvoice".into()));
    }
    if q > k {
        return Err(Error::InvalidConfig(format!("{q} eigenvoices exceed dimension {k}")));
    }
    if ds.n_speakers() < 2 {
        return Err(Error::InvalidInput(format!(
            "PLDA needs at least 2 speakers, found {}",
            ds.n_speakers()
        )));
    }
    let mean = linalg::mean(k, ds.values());
    let stats = SpeakerStats::collect(ds, &mean)?;
    let n = stats.n_total as f64;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = Mat::from_fn(k, q, |_, _| 0.1 * rng.sample::<f64, _>(StandardNormal));
    let mut lambda = within_to_precision(&(&stats.scatter / n), 0)?;

    let mut trace = Vec::with_capacity(iters + 1);
    for it in 0..=iters {
        let lambda_chol = Cholesky::new(lambda.clone()).ok_or(Error::SingularAccumulator { iteration: it })?;
        let e = em_step(&stats, &u, &lambda, linalg::log_det(&lambda_chol), it)?;
        trace.push(e.log_likelihood);
        if it == iters {
            break;
        }
        let m_chol = Cholesky::new(linalg::symmetrize(&e.second_moment))
            .ok_or(Error::SingularAccumulator { iteration: it + 1 })?;
        // U = R M⁻¹, i.e. M Uᵀ = Rᵀ
        u = m_chol.solve(&e.cross.transpose()).transpose();
        let sigma_within = (&stats.scatter - &u * e.cross.transpose()) / n;
        lambda = within_to_precision(&sigma_within, it + 1)?;
        log::debug!("EM iteration {}: log-likelihood {}", it, e.log_likelihood);
    }
    let model = PldaModel::new(mean, u, lambda)?;
    Ok(PldaTraining {
        model,
        log_likelihood: trace,
    })
}

pub fn score_trial(m: &PldaModel, w_enrol: &Vector, w_test: &Vector) -> Result<f64> {
    check_dim(m.dim(), w_enrol.len(), "enrolment i-vector")?;
    check_dim(m.dim(), w_test.len(), "test i-vector")?;
    Ok(m.llr(w_enrol, w_test))
}

/// Scores against precomputed per-utterance terms, so each trial is one dot product.
pub(crate) struct Prepared {
    centred: Vec<Vector>,
    half_quad: Vec<f64>,
    projected: Vec<Vector>,
}

impl Prepared {
    pub(crate) fn new(m: &PldaModel, ds: &Dataset, with_projection: bool) -> Self {
        let rows = par::map(ds.items(), |it| {
            let u = &it.values - &m.mean;
            let h = m.half_quad(&u);
            let p = if with_projection { &m.cache.cross * &u } else { Vector::zeros(0) };
            (u, h, p)
        });
        let mut out = Prepared {
            centred: Vec::with_capacity(rows.len()),
            half_quad: Vec::with_capacity(rows.len()),
            projected: Vec::with_capacity(rows.len()),
        };
        for (u, h, p) in rows {
            out.centred.push(u);
            out.half_quad.push(h);
            out.projected.push(p);
        }
        out
    }

    /// LLR of enrol item `e` (from a set prepared with projection) and test item `t`.
    pub(crate) fn score(m: &PldaModel, enrol: &Prepared, e: usize, test: &Prepared, t: usize) -> f64 {
        enrol.half_quad[e] + test.half_quad[t] + enrol.projected[e].dot(&test.centred[t]) + m.cache.constant
    }
}

pub fn score_trials(m: &PldaModel, enrol: &Dataset, test: &Dataset, trials: &[Trial]) -> Result<ScoreSet> {
    check_dim(m.dim(), enrol.dim(), "enrolment set")?;
    check_dim(m.dim(), test.dim(), "test set")?;
    let enrol_idx = enrol.id_index();
    let test_idx = test.id_index();
    let mut pairs = Vec::with_capacity(trials.len());
    for t in trials {
        let e = *enrol_idx
            .get(t.enrol_id.as_str())
            .ok_or_else(|| Error::UnknownId(t.enrol_id.clone()))?;
        let v = *test_idx
            .get(t.test_id.as_str())
            .ok_or_else(|| Error::UnknownId(t.test_id.clone()))?;
        pairs.push((e, v));
    }
    let pe = Prepared::new(m, enrol, true);
    let pt = Prepared::new(m, test, false);
    let raw = par::map(&pairs, |&(e, v)| Prepared::score(m, &pe, e, &pt, v));
    ScoreSet::new(
        trials
            .iter()
            .zip(raw)
            .map(|(t, s)| ScoreEntry {
                trial: t.clone(),
                raw_llr: s,
                normalized_llr: None,
            })
            .collect(),
    )
}
