//! Symmetric score normalization (S-norm) against an impostor cohort.
//!
//! `s' = ½[(s − μ_e)/σ_e + (s − μ_t)/σ_t]`, where `(μ_e, σ_e)` are the mean and
//! population standard deviation of the enrolment vector scored against every
//! cohort member, and `(μ_t, σ_t)` likewise for the test vector.

use std::collections::HashMap;

use crate::dataset::{apply_duration_noise, check_dim, Dataset, DurationModel};
use crate::error::{Error, Result};
use crate::gplda::{PldaModel, Prepared};
use crate::par;
use crate::scores::ScoreSet;

#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub vectors: Dataset,
    pub label: String,
}

impl Cohort {
    pub fn new(vectors: Dataset, label: impl Into<String>) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::Empty("score-normalization cohort".into()));
        }
        Ok(Self {
            vectors,
            label: label.into(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CohortStats {
    pub mean: f64,
    pub std: f64,
}

/// Mean and population (1/N) standard deviation.
pub fn cohort_stats(scores: &[f64]) -> CohortStats {
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
    CohortStats { mean, std: var.sqrt() }
}

fn checked_stats(scores: &[f64], side: &'static str, id: &str) -> Result<CohortStats> {
    if scores.is_empty() {
        return Err(Error::Empty(format!("{side} cohort scores for `{id}`")));
    }
    let st = cohort_stats(scores);
    if !(st.std > 1e-12 * st.mean.abs().max(1.0)) {
        return Err(Error::DegenerateCohort { side, id: id.to_string() });
    }
    Ok(st)
}

pub fn snorm_score(raw: f64, enrol: CohortStats, test: CohortStats) -> f64 {
    0.5 * ((raw - enrol.mean) / enrol.std + (raw - test.mean) / test.std)
}

/// S-norm given precomputed cohort scores per enrolment and per test id.
pub fn snorm_from_cohort_scores(
    scores: &ScoreSet,
    enrol_cohort: &HashMap<String, Vec<f64>>,
    test_cohort: &HashMap<String, Vec<f64>>,
) -> Result<ScoreSet> {
    let mut enrol_stats = HashMap::new();
    let mut test_stats = HashMap::new();
    let mut entries = scores.entries.clone();
    for e in &mut entries {
        let id_e = e.trial.enrol_id.as_str();
        let se = match enrol_stats.get(id_e) {
            Some(s) => *s,
            None => {
                let cs = enrol_cohort.get(id_e).ok_or_else(|| Error::UnknownId(id_e.to_string()))?;
                let s = checked_stats(cs, "enrolment", id_e)?;
                enrol_stats.insert(id_e.to_string(), s);
                s
            }
        };
        let id_t = e.trial.test_id.as_str();
        let st = match test_stats.get(id_t) {
            Some(s) => *s,
            None => {
                let cs = test_cohort.get(id_t).ok_or_else(|| Error::UnknownId(id_t.to_string()))?;
                let s = checked_stats(cs, "test", id_t)?;
                test_stats.insert(id_t.to_string(), s);
                s
            }
        };
        e.normalized_llr = Some(snorm_score(e.raw_llr, se, st));
    }
    ScoreSet::new(entries)
}

/// Scores every vector of `side` whose id appears in `ids` against the whole cohort.
fn cohort_scores(
    m: &PldaModel,
    side: &Dataset,
    ids: &[&str],
    cohort: &Prepared,
    cohort_len: usize,
) -> Result<HashMap<String, Vec<f64>>> {
    let index = side.id_index();
    let mut positions = Vec::with_capacity(ids.len());
    for id in ids {
        positions.push(*index.get(id).ok_or_else(|| Error::UnknownId(id.to_string()))?);
    }
    let subset = Dataset::new(side.dim(), positions.iter().map(|&p| side.items()[p].clone()).collect())?;
    let prepared = Prepared::new(m, &subset, true);
    let rows = par::map_range(positions.len(), |i| {
        (0..cohort_len)
            .map(|c| Prepared::score(m, &prepared, i, cohort, c))
            .collect::<Vec<_>>()
    });
    Ok(ids.iter().map(|s| s.to_string()).zip(rows).collect())
}

fn distinct<'a>(ids: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut seen = std::collections::HashSet::new();
    ids.filter(|id| seen.insert(*id)).collect()
}

/// Fills `normalized_llr` for every trial; raw scores are left as they are.
pub fn snorm(m: &PldaModel, scores: &ScoreSet, enrol: &Dataset, test: &Dataset, cohort: &Cohort) -> Result<ScoreSet> {
    check_dim(m.dim(), cohort.vectors.dim(), "cohort")?;
    check_dim(m.dim(), enrol.dim(), "enrolment set")?;
    check_dim(m.dim(), test.dim(), "test set")?;
    if cohort.vectors.is_empty() {
        return Err(Error::Empty("score-normalization cohort".into()));
    }
    let prepared_cohort = Prepared::new(m, &cohort.vectors, false);
    let n = cohort.vectors.len();
    let enrol_ids = distinct(scores.entries.iter().map(|e| e.trial.enrol_id.as_str()));
    let test_ids = distinct(scores.entries.iter().map(|e| e.trial.test_id.as_str()));
    let enrol_cohort = cohort_scores(m, enrol, &enrol_ids, &prepared_cohort, n)?;
    let test_cohort = cohort_scores(m, test, &test_ids, &prepared_cohort, n)?;
    snorm_from_cohort_scores(scores, &enrol_cohort, &test_cohort)
}

/// Cohort degraded to `duration_sec` with the duration-noise model.
///
/// Operates on whatever space `base` is in; the harness passes raw i-vectors and
/// re-applies the compensation chain afterwards.
pub fn matched_length_cohort(base: &Cohort, model: &DurationModel, duration_sec: f64, seed: u64) -> Result<Cohort> {
    let vectors = apply_duration_noise(&base.vectors, duration_sec, model, seed)?;
    Cohort::new(vectors, format!("{}@{}s", base.label, duration_sec))
}
