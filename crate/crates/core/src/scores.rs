//! Scored trial lists and their CSV form `enrol,test,label,raw_llr,norm_llr`.

use std::path::Path;

use crate::dataset::{Trial, TrialLabel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreEntry {
    pub trial: Trial,
    pub raw_llr: f64,
    pub normalized_llr: Option<f64>,
}

/// Which score column a metric should read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreKind {
    #[default]
    Raw,
    Normalized,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreSet {
    pub entries: Vec<ScoreEntry>,
}

impl ScoreSet {
    pub fn new(entries: Vec<ScoreEntry>) -> Result<Self> {
        for e in &entries {
            if !e.raw_llr.is_finite() || e.normalized_llr.is_some_and(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "score for trial {} / {}",
                    e.trial.enrol_id, e.trial.test_id
                )));
            }
        }
        Ok(Self { entries })
    }

    /// Builds a raw-only score set from `(label, score)` pairs with synthetic ids.
    pub fn from_labeled(scores: &[(TrialLabel, f64)]) -> Result<Self> {
        Self::new(
            scores
                .iter()
                .enumerate()
                .map(|(i, &(label, s))| ScoreEntry {
                    trial: Trial::new(format!("e{i}"), format!("t{i}"), label),
                    raw_llr: s,
                    normalized_llr: None,
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        !self.entries.is_empty() && self.entries.iter().all(|e| e.normalized_llr.is_some())
    }

    /// Target and nontarget scores of the requested kind.
    pub fn split(&self, kind: ScoreKind) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut tar = Vec::new();
        let mut non = Vec::new();
        for e in &self.entries {
            let s = match kind {
                ScoreKind::Raw => e.raw_llr,
                ScoreKind::Normalized => e.normalized_llr.ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "trial {} / {} has no normalized score",
                        e.trial.enrol_id, e.trial.test_id
                    ))
                })?,
            };
            if e.trial.label.is_target() {
                tar.push(s);
            } else {
                non.push(s);
            }
        }
        Ok((tar, non))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("enrol,test,label,raw_llr,norm_llr\n");
        for e in &self.entries {
            let norm = e.normalized_llr.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.trial.enrol_id,
                e.trial.test_id,
                e.trial.label.as_str(),
                e.raw_llr,
                norm
            ));
        }
        out
    }

    pub fn parse_csv(text: &str, path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .flexible(true)
            .from_reader(text.as_bytes());
        let header = rdr
            .headers()
            .map_err(|e| Error::parse(path, 1, e.to_string()))?
            .clone();
        if header.iter().collect::<Vec<_>>() != ["enrol", "test", "label", "raw_llr", "norm_llr"] {
            return Err(Error::parse(path, 1, "expected header enrol,test,label,raw_llr,norm_llr"));
        }
        let mut entries = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::parse(path, 0, e.to_string()))?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            if rec.len() != 5 {
                return Err(Error::parse(path, line, format!("expected 5 fields, found {}", rec.len())));
            }
            let label: TrialLabel = rec[2]
                .parse()
                .map_err(|e: Error| Error::parse(path, line, e.to_string()))?;
            let raw = rec[3]
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::parse(path, line, format!("bad raw_llr `{}`", &rec[3])))?;
            let norm = match rec[4].trim() {
                "" => None,
                s => Some(
                    s.parse::<f64>()
                        .map_err(|_| Error::parse(path, line, format!("bad norm_llr `{s}`")))?,
                ),
            };
            entries.push(ScoreEntry {
                trial: Trial::new(&rec[0], &rec[1], label),
                raw_llr: raw,
                normalized_llr: norm,
            });
        }
        ScoreSet::new(entries)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text, path)
    }
}
