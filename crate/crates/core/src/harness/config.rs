//! Experiment configuration, read from TOML.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::GeneratorConfig;
use crate::error::{Error, Result};
use crate::gplda::DEFAULT_EM_ITERS;
use crate::idv::{IdvVariant, DEFAULT_IDV_RIDGE};
use crate::lda::DEFAULT_LDA_RIDGE;
use crate::metrics::DcfParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum IdvMode {
    Off,
    Original,
    #[default]
    Modified,
}

impl IdvMode {
    pub fn variant(self) -> Option<IdvVariant> {
        match self {
            IdvMode::Off => None,
            IdvMode::Original => Some(IdvVariant::Original),
            IdvMode::Modified => Some(IdvVariant::Modified),
        }
    }

    /// System name used in reports.
    pub fn system_name(self) -> &'static str {
        match self {
            IdvMode::Off => "out-domain",
            IdvMode::Original => "idv",
            IdvMode::Modified => "modified-idv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SnormMode {
    #[default]
    Off,
    /// Pooled out-domain utterances.
    SwbStyle,
    /// In-domain speakers with several sessions each.
    NistStyle,
    /// In-domain cohort degraded to the evaluation duration.
    MatchedLength,
}

impl SnormMode {
    pub fn label(self) -> &'static str {
        match self {
            SnormMode::Off => "no-snorm",
            SnormMode::SwbStyle => "snorm-swb",
            SnormMode::NistStyle => "snorm-nist",
            SnormMode::MatchedLength => "snorm-matched",
        }
    }
}

/// An evaluation duration: the full reference length or a number of seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DurationSpec {
    Named(FullDuration),
    Seconds(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FullDuration {
    Full,
}

impl DurationSpec {
    pub fn seconds(self, reference_sec: f64) -> f64 {
        match self {
            DurationSpec::Named(FullDuration::Full) => reference_sec,
            DurationSpec::Seconds(s) => s,
        }
    }

    pub fn label(self) -> String {
        match self {
            DurationSpec::Named(FullDuration::Full) => "full".to_string(),
            DurationSpec::Seconds(s) => format!("{s}s"),
        }
    }
}

impl fmt::Display for DurationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Sizes of the held-out populations drawn next to the development sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    /// Norm of a seeded random domain offset, used when `generator.domain_offset` is empty.
    pub offset_norm: f64,
    pub eval_speakers: usize,
    /// Session 0 enrols, the remaining sessions are test segments.
    pub eval_sessions: usize,
    pub nist_cohort_speakers: usize,
    pub nist_cohort_sessions: usize,
    pub swb_cohort_size: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            offset_norm: 8.0,
            eval_speakers: 100,
            eval_sessions: 6,
            nist_cohort_speakers: 150,
            nist_cohort_sessions: 10,
            swb_cohort_size: 1500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub idv: IdvMode,
    pub idv_ridge: f64,
    /// Also compensate enrolment, test and cohort vectors.
    pub idv_on_eval: bool,
    pub lda_dim: usize,
    pub lda_ridge: f64,
    /// Fit LDA on IDV-compensated rather than raw training vectors.
    pub lda_on_compensated: bool,
    /// Also length-normalize before LDA. Without this, a full-rank IDV transform
    /// is absorbed by LDA up to a per-column scale.
    pub length_norm_before_lda: bool,
    pub snorm: SnormMode,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            idv: IdvMode::Modified,
            idv_ridge: DEFAULT_IDV_RIDGE,
            idv_on_eval: true,
            lda_dim: 17,
            lda_ridge: DEFAULT_LDA_RIDGE,
            lda_on_compensated: true,
            length_norm_before_lda: true,
            snorm: SnormMode::Off,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PldaConfig {
    pub eigenvoices: usize,
    pub iters: usize,
}

impl Default for PldaConfig {
    fn default() -> Self {
        Self {
            eigenvoices: 10,
            iters: DEFAULT_EM_ITERS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub generator: GeneratorConfig,
    pub protocol: ProtocolConfig,
    pub pipeline: PipelineConfig,
    pub plda: PldaConfig,
    pub dcf: DcfParams,
    pub durations: Vec<DurationSpec>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

/// Generator defaults for desk-scale runs.
pub fn desk_generator() -> GeneratorConfig {
    GeneratorConfig {
        dim: 50,
        n_speakers: 200,
        sessions_per_speaker: 10,
        eigenvoice_dim: 10,
        speaker_scale: 1.0,
        channel_scale: 0.5,
        domain_offset: Vec::new(),
        nuisance_dim: 12,
        nuisance_scale: 1.0,
        duration_ref_sec: 150.0,
        duration_noise_scale: 0.15,
        duration_exponent: 1.0,
        seed: 0,
    }
}

pub fn default_durations() -> Vec<DurationSpec> {
    let mut d = vec![DurationSpec::Named(FullDuration::Full)];
    d.extend([50.0, 40.0, 30.0, 20.0, 10.0].map(DurationSpec::Seconds));
    d
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            generator: desk_generator(),
            protocol: ProtocolConfig::default(),
            pipeline: PipelineConfig::default(),
            plda: PldaConfig::default(),
            dcf: DcfParams::default(),
            durations: default_durations(),
            seeds: vec![1, 2, 3, 4, 5],
            output_dir: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    /// Parses a TOML file; keys it leaves out keep their desk-scale defaults.
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_with(text, &[])
    }

    /// Like [`from_toml`](Self::from_toml), then applies `key.path=value`
    /// overrides in order. Values are TOML literals; bare words are strings.
    pub fn from_toml_with(text: &str, overrides: &[String]) -> Result<Self> {
        let mut user: toml::Table = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        for o in overrides {
            merge_tables(&mut user, parse_override(o)?);
        }
        let mut merged: toml::Table =
            toml::Table::try_from(Self::default()).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        merge_tables(&mut merged, user);
        let cfg: Self = toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.dcf.validate()?;
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.durations.is_empty() {
            return bad("at least one evaluation duration is required");
        }
        for d in &self.durations {
            let s = d.seconds(self.generator.duration_ref_sec);
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::InvalidConfig(format!("duration {d} must be positive")));
            }
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        let p = &self.protocol;
        if p.eval_speakers < 2 || p.eval_sessions < 2 {
            return bad("evaluation needs >=2 speakers with >=2 sessions");
        }
        if p.nist_cohort_speakers == 0 || p.nist_cohort_sessions == 0 || p.swb_cohort_size < 2 {
            return bad("cohorts must be non-empty");
        }
        if !(p.offset_norm >= 0.0) {
            return bad("offset_norm must be nonnegative");
        }
        if self.pipeline.lda_dim == 0 || self.pipeline.lda_dim > self.generator.dim {
            return bad("lda_dim must be in 1..=dim");
        }
        if self.plda.eigenvoices == 0 || self.plda.eigenvoices > self.pipeline.lda_dim {
            return bad("plda.eigenvoices must be in 1..=lda_dim");
        }
        Ok(())
    }
}

fn parse_override(s: &str) -> Result<toml::Table> {
    let (key, value) = s
        .split_once('=')
        .ok_or_else(|| Error::InvalidConfig(format!("override `{s}` is not key=value")))?;
    let value = value.trim();
    let parsed: toml::Value = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    let mut path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::InvalidConfig(format!("bad override key `{key}`")));
    }
    let last = path.pop().unwrap();
    let mut table = toml::Table::new();
    table.insert(last.to_string(), parsed);
    for p in path.into_iter().rev() {
        let mut outer = toml::Table::new();
        outer.insert(p.to_string(), toml::Value::Table(table));
        table = outer;
    }
    Ok(table)
}

fn merge_tables(base: &mut toml::Table, overlay: toml::Table) {
    for (k, v) in overlay {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge_tables(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
