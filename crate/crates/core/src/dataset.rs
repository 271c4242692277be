//! I-vector datasets, trial lists, file IO and the seeded synthetic generator.
//!
//! The generator draws `w = m_dom + s·U·x_spk + c·ε + n·V·y` where `U` is a shared
//! orthonormal speaker basis, `x_spk ~ N(0, I)` once per speaker, `ε ~ N(0, I)`
//! and (in-domain only) `y ~ N(0, I)` once per session. `V` is an orthonormal
//! nuisance basis that only the in-domain population exhibits. Each speaker gets
//! its own ChaCha stream, so a dataset is a pure function of the seed no matter
//! how speakers are scheduled.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};
use crate::par;
use crate::persist::{checked_dim, read_file, BlobReader, BlobWriter};

/// Default i-vector dimension of a pooled total-variability front-end.
pub const DEFAULT_IVECTOR_DIM: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Domain {
    #[serde(rename = "in")]
    InDomain,
    #[serde(rename = "out")]
    OutDomain,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::InDomain => "in",
            Domain::OutDomain => "out",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "in" | "InDomain" => Ok(Domain::InDomain),
            "out" | "OutDomain" => Ok(Domain::OutDomain),
            other => Err(Error::InvalidInput(format!("unknown domain `{other}`"))),
        }
    }
}

/// One utterance-level i-vector with its metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct IVector {
    pub id: String,
    /// `None` for speaker-unlabelled utterances.
    pub speaker: Option<String>,
    pub domain: Domain,
    /// Active-speech duration in seconds.
    pub duration_sec: f64,
    pub values: Vector,
}

impl IVector {
    pub fn new(
        id: impl Into<String>,
        speaker: Option<String>,
        domain: Domain,
        duration_sec: f64,
        values: Vector,
    ) -> Self {
        Self {
            id: id.into(),
            speaker: speaker.filter(|s| !s.is_empty()),
            domain,
            duration_sec,
            values,
        }
    }

    /// Same metadata, new values.
    pub fn with_values(&self, values: Vector) -> Self {
        Self {
            id: self.id.clone(),
            speaker: self.speaker.clone(),
            domain: self.domain,
            duration_sec: self.duration_sec,
            values,
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.values.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.values.len(),
                context: format!("utterance `{}`", self.id),
            });
        }
        if !self.values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(format!("utterance `{}`", self.id)));
        }
        if !(self.duration_sec > 0.0) || !self.duration_sec.is_finite() {
            return Err(Error::InvalidInput(format!(
                "utterance `{}` has non-positive duration {}",
                self.id, self.duration_sec
            )));
        }
        Ok(())
    }
}

/// A collection of equal-dimension i-vectors with a speaker index.
///
/// The index is a `BTreeMap`, so iterating speakers is always in sorted id order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    items: Vec<IVector>,
    index: BTreeMap<String, Vec<usize>>,
}

impl Dataset {
    pub fn new(dim: usize, items: Vec<IVector>) -> Result<Self> {
        let mut index: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (pos, item) in items.iter().enumerate() {
            item.validate(dim)?;
            if let Some(spk) = &item.speaker {
                index.entry(spk.clone()).or_default().push(pos);
            }
        }
        Ok(Self { dim, items, index })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            items: Vec::new(),
            index: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn items(&self) -> &[IVector] {
        &self.items
    }

    pub fn into_items(self) -> Vec<IVector> {
        self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Speaker groups in sorted speaker order.
    pub fn speakers(&self) -> impl Iterator<Item = (&str, &[usize])> {
        self.index.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn n_speakers(&self) -> usize {
        self.index.len()
    }

    /// True when every item carries a speaker label.
    pub fn is_labeled(&self) -> bool {
        self.items.iter().all(|i| i.speaker.is_some())
    }

    pub fn values(&self) -> impl Iterator<Item = &Vector> {
        self.items.iter().map(|i| &i.values)
    }

    /// Map from utterance id to position. Later duplicates shadow earlier ones.
    pub fn id_index(&self) -> HashMap<&str, usize> {
        self.items
            .iter()
            .enumerate()
            .map(|(i, it)| (it.id.as_str(), i))
            .collect()
    }

    /// Replaces every value vector through `f`, keeping metadata and order.
    pub fn map_values<F>(&self, new_dim: usize, f: F) -> Result<Self>
    where
        F: Fn(&IVector) -> Vector + Sync + Send,
    {
        let items = par::map(&self.items, |it| it.with_values(f(it)));
        Dataset::new(new_dim, items)
    }

    /// Fallible variant of [`Dataset::map_values`].
    pub fn try_map_values<F>(&self, new_dim: usize, f: F) -> Result<Self>
    where
        F: Fn(&IVector) -> Result<Vector> + Sync + Send,
    {
        let items = par::try_map(&self.items, |it| Ok::<_, Error>(it.with_values(f(it)?)))?;
        Dataset::new(new_dim, items)
    }

    /// Concatenation of two datasets of equal dimension.
    pub fn concat(&self, other: &Dataset) -> Result<Self> {
        check_dim(self.dim, other.dim, "dataset concatenation")?;
        let mut items = self.items.clone();
        items.extend(other.items.iter().cloned());
        Dataset::new(self.dim, items)
    }

    /// Copy with every speaker label dropped.
    pub fn unlabeled(&self) -> Self {
        let items = self
            .items
            .iter()
            .map(|it| IVector {
                speaker: None,
                ..it.clone()
            })
            .collect();
        Self {
            dim: self.dim,
            items,
            index: BTreeMap::new(),
        }
    }

    /// Items as rows of an `N × D` matrix.
    pub fn to_matrix(&self) -> Mat {
        let mut m = DMatrix::zeros(self.len(), self.dim);
        for (r, it) in self.items.iter().enumerate() {
            m.row_mut(r).copy_from(&it.values.transpose());
        }
        m
    }
}

pub(crate) fn check_dim(expected: usize, found: usize, context: &str) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected,
            found,
            context: context.to_string(),
        })
    }
}

/// Noise model standing in for short-duration i-vector variability:
/// per-coordinate std `σ(d) = σ₀·(ref / d)^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DurationModel {
    pub reference_sec: f64,
    pub noise_scale: f64,
    pub exponent: f64,
}

impl DurationModel {
    pub fn std_at(&self, duration_sec: f64) -> f64 {
        self.noise_scale * (self.reference_sec / duration_sec).powf(self.exponent)
    }

    fn validate(&self) -> Result<()> {
        if !(self.reference_sec > 0.0) {
            return Err(Error::InvalidConfig("duration_ref_sec must be positive".into()));
        }
        if !(self.noise_scale >= 0.0) || !(self.exponent >= 0.0) {
            return Err(Error::InvalidConfig(
                "duration noise scale and exponent must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub dim: usize,
    /// Speakers drawn per domain by [`synth_dataset`].
    pub n_speakers: usize,
    pub sessions_per_speaker: usize,
    /// Rank of the ground-truth speaker subspace.
    pub eigenvoice_dim: usize,
    pub speaker_scale: f64,
    pub channel_scale: f64,
    /// `m_out − m_in`; empty means no offset, otherwise length `dim`.
    pub domain_offset: Vec<f64>,
    /// Rank of the in-domain-only session nuisance subspace.
    pub nuisance_dim: usize,
    pub nuisance_scale: f64,
    pub duration_ref_sec: f64,
    pub duration_noise_scale: f64,
    pub duration_exponent: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            dim: DEFAULT_IVECTOR_DIM,
            n_speakers: 200,
            sessions_per_speaker: 10,
            eigenvoice_dim: 10,
            speaker_scale: 1.0,
            channel_scale: 0.5,
            domain_offset: Vec::new(),
            nuisance_dim: 0,
            nuisance_scale: 0.0,
            duration_ref_sec: 150.0,
            duration_noise_scale: 0.0,
            duration_exponent: 0.5,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.dim == 0 {
            return bad("dim must be positive");
        }
        if self.n_speakers == 0 {
            return bad("n_speakers must be positive");
        }
        if self.sessions_per_speaker == 0 {
            return bad("sessions_per_speaker must be positive");
        }
        if self.eigenvoice_dim > self.dim {
            return bad("eigenvoice_dim must not exceed dim");
        }
        if self.nuisance_dim > self.dim {
            return bad("nuisance_dim must not exceed dim");
        }
        for (name, v) in [
            ("speaker_scale", self.speaker_scale),
            ("channel_scale", self.channel_scale),
            ("nuisance_scale", self.nuisance_scale),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} must be a nonnegative finite value")));
            }
        }
        if !self.domain_offset.is_empty() && self.domain_offset.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: self.domain_offset.len(),
                context: "domain_offset".into(),
            });
        }
        if !self.domain_offset.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("domain_offset".into()));
        }
        self.duration_model().validate()
    }

    pub fn duration_model(&self) -> DurationModel {
        DurationModel {
            reference_sec: self.duration_ref_sec,
            noise_scale: self.duration_noise_scale,
            exponent: self.duration_exponent,
        }
    }

    pub fn offset_vector(&self) -> Vector {
        if self.domain_offset.is_empty() {
            Vector::zeros(self.dim)
        } else {
            Vector::from_column_slice(&self.domain_offset)
        }
    }
}

fn standard_normal_vector(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    Vector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// `cols` orthonormal columns in `dim` dimensions from a seeded Gaussian draw.
fn random_orthonormal(rng: &mut ChaCha8Rng, dim: usize, cols: usize) -> Mat {
    if cols == 0 {
        return Mat::zeros(dim, 0);
    }
    let g = Mat::from_fn(dim, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    // QR sign ambiguity: make the R diagonal positive so the basis is canonical.
    let r = qr.r();
    for c in 0..cols {
        if r[(c, c)] < 0.0 {
            q.column_mut(c).neg_mut();
        }
    }
    q
}

/// Ground-truth parameters shared by every population drawn from one seed.
#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    cfg: GeneratorConfig,
    eigenvoices: Mat,
    nuisance: Mat,
    mean_in: Vector,
    mean_out: Vector,
}

const WORLD_STREAM: u64 = u64::MAX;

impl SyntheticWorld {
    pub fn new(cfg: &GeneratorConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(WORLD_STREAM);
        let eigenvoices = random_orthonormal(&mut rng, cfg.dim, cfg.eigenvoice_dim);
        let nuisance = random_orthonormal(&mut rng, cfg.dim, cfg.nuisance_dim);
        let mean_in = Vector::zeros(cfg.dim);
        let mean_out = &mean_in + cfg.offset_vector();
        Ok(Self {
            cfg: cfg.clone(),
            eigenvoices,
            nuisance,
            mean_in,
            mean_out,
        })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.cfg
    }

    /// Orthonormal ground-truth speaker basis `U` (`D × eigenvoice_dim`).
    pub fn eigenvoices(&self) -> &Mat {
        &self.eigenvoices
    }

    pub fn nuisance_basis(&self) -> &Mat {
        &self.nuisance
    }

    pub fn mean(&self, domain: Domain) -> &Vector {
        match domain {
            Domain::InDomain => &self.mean_in,
            Domain::OutDomain => &self.mean_out,
        }
    }

    /// Population covariance `s²UUᵀ + c²I (+ n²VVᵀ in-domain)`.
    pub fn population_covariance(&self, domain: Domain) -> Mat {
        let d = self.cfg.dim;
        let mut cov = &self.eigenvoices * self.eigenvoices.transpose() * self.cfg.speaker_scale.powi(2);
        for i in 0..d {
            cov[(i, i)] += self.cfg.channel_scale.powi(2);
        }
        if domain == Domain::InDomain && self.cfg.nuisance_dim > 0 {
            cov += &self.nuisance * self.nuisance.transpose() * self.cfg.nuisance_scale.powi(2);
        }
        cov
    }

    /// Draws `n_speakers × sessions` labelled i-vectors from one population.
    ///
    /// `population` selects an independent family of speaker streams; reusing it
    /// reproduces the same speakers.
    pub fn draw(&self, domain: Domain, population: u32, n_speakers: usize, sessions: usize) -> Result<Dataset> {
        if n_speakers == 0 || sessions == 0 {
            return Err(Error::InvalidConfig("population needs >=1 speaker and >=1 session".into()));
        }
        let cfg = &self.cfg;
        let tag = format!("{}{}", domain.as_str(), population);
        let per_speaker = par::map_range(n_speakers, |spk| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(((domain as u64) << 62) | ((population as u64) << 32) | spk as u64);
            let x = standard_normal_vector(&mut rng, cfg.eigenvoice_dim);
            let speaker_part = self.mean(domain) + &self.eigenvoices * x * cfg.speaker_scale;
            let speaker = format!("{tag}-spk{spk:04}");
            (0..sessions)
                .map(|r| {
                    let mut w = &speaker_part + standard_normal_vector(&mut rng, cfg.dim) * cfg.channel_scale;
                    if domain == Domain::InDomain && cfg.nuisance_dim > 0 {
                        let y = standard_normal_vector(&mut rng, cfg.nuisance_dim);
                        w += &self.nuisance * y * cfg.nuisance_scale;
                    }
                    IVector::new(
                        format!("{speaker}-s{r:02}"),
                        Some(speaker.clone()),
                        domain,
                        cfg.duration_ref_sec,
                        w,
                    )
                })
                .collect::<Vec<_>>()
        });
        Dataset::new(cfg.dim, per_speaker.into_iter().flatten().collect())
    }
}

/// In-domain and out-domain datasets of `n_speakers × sessions_per_speaker` each.
pub fn synth_dataset(cfg: &GeneratorConfig) -> Result<(Dataset, Dataset)> {
    let world = SyntheticWorld::new(cfg)?;
    let in_domain = world.draw(Domain::InDomain, 0, cfg.n_speakers, cfg.sessions_per_speaker)?;
    let out_domain = world.draw(Domain::OutDomain, 0, cfg.n_speakers, cfg.sessions_per_speaker)?;
    Ok((in_domain, out_domain))
}

/// Adds i.i.d. `N(0, σ(d)²)` noise per coordinate and relabels every item with
/// duration `d`. Item `i` uses stream `i` of the seed.
pub fn apply_duration_noise(
    ds: &Dataset,
    target_duration_sec: f64,
    model: &DurationModel,
    seed: u64,
) -> Result<Dataset> {
    if !(target_duration_sec > 0.0) || !target_duration_sec.is_finite() {
        return Err(Error::InvalidInput(format!(
            "target duration must be positive, got {target_duration_sec}"
        )));
    }
    model.validate()?;
    let std = model.std_at(target_duration_sec);
    let positions: Vec<usize> = (0..ds.len()).collect();
    let items = par::map(&positions, |&i| {
        let item = &ds.items()[i];
        let mut values = item.values.clone();
        if std > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            for v in values.iter_mut() {
                *v += std * rng.sample::<f64, _>(StandardNormal);
            }
        }
        IVector {
            duration_sec: target_duration_sec,
            values,
            ..item.clone()
        }
    });
    Dataset::new(ds.dim(), items)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IvecFormat {
    Binary,
    Csv,
}

impl IvecFormat {
    /// `.csv` selects CSV, anything else binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => IvecFormat::Csv,
            _ => IvecFormat::Binary,
        }
    }
}

const IVEC_MAGIC: &[u8] = b"IVEC1";

pub fn encode_ivectors(ds: &Dataset) -> Vec<u8> {
    let mut w = BlobWriter::new(IVEC_MAGIC);
    w.u32(ds.dim() as u32);
    w.u64(ds.len() as u64);
    for it in ds.items() {
        w.str(&it.id);
        w.str(it.speaker.as_deref().unwrap_or(""));
        w.str(it.domain.as_str());
        w.f64(it.duration_sec);
        w.vector(&it.values);
    }
    w.finish()
}

pub fn decode_ivectors(buf: &[u8]) -> Result<Dataset> {
    let mut r = BlobReader::new(buf, IVEC_MAGIC)?;
    let dim = r.u32()? as usize;
    let count = r.u64()?;
    let mut items = Vec::with_capacity(count.min(1 << 16) as usize);
    for _ in 0..count {
        let id = r.str()?;
        let speaker = r.str()?;
        let domain: Domain = r.str()?.parse()?;
        let duration = r.f64()?;
        let values = r.vector(dim)?;
        items.push(IVector::new(id, Some(speaker), domain, duration, values));
    }
    r.expect_end()?;
    Dataset::new(dim, items)
}

pub fn save_ivectors(ds: &Dataset, path: &Path, format: IvecFormat) -> Result<()> {
    match format {
        IvecFormat::Binary => fs::write(path, encode_ivectors(ds)).map_err(|e| Error::io(path, e)),
        IvecFormat::Csv => write_csv(ds, path),
    }
}

pub fn load_ivectors(path: &Path, format: IvecFormat) -> Result<Dataset> {
    match format {
        IvecFormat::Binary => decode_ivectors(&read_file(path)?).map_err(|e| match e {
            Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
            other => other,
        }),
        IvecFormat::Csv => read_csv(path),
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::parse(path, line, e.to_string())
}

fn write_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header = vec!["id".to_string(), "speaker".into(), "domain".into(), "duration".into()];
    header.extend((0..ds.dim()).map(|i| format!("v{i}")));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for it in ds.items() {
        let mut rec = vec![
            it.id.clone(),
            it.speaker.clone().unwrap_or_default(),
            it.domain.to_string(),
            it.duration_sec.to_string(),
        ];
        rec.extend(it.values.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_csv(path: &Path) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let fixed = ["id", "speaker", "domain", "duration"];
    if header.len() < fixed.len() || header.iter().zip(fixed).any(|(h, f)| h != f) {
        return Err(Error::parse(path, 1, "header must start with id,speaker,domain,duration"));
    }
    let dim = header.len() - fixed.len();
    for (i, h) in header.iter().skip(fixed.len()).enumerate() {
        if h != format!("v{i}") {
            return Err(Error::parse(path, 1, format!("expected column v{i}, found `{h}`")));
        }
    }
    let mut items = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let found = rec.len().saturating_sub(fixed.len());
        if found != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found,
                context: format!("{}:{} (row `{}`)", path.display(), line, rec.get(0).unwrap_or("")),
            });
        }
        let num = |s: &str, what: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::parse(path, line, format!("bad {what} `{s}`")))
        };
        let domain = rec[2].parse().map_err(|_| Error::parse(path, line, format!("bad domain `{}`", &rec[2])))?;
        let duration = num(&rec[3], "duration")?;
        let mut values = Vector::zeros(dim);
        for (k, v) in values.iter_mut().enumerate() {
            *v = num(&rec[fixed.len() + k], "value")?;
        }
        let item = IVector::new(&rec[0], Some(rec[1].to_string()), domain, duration, values);
        item.validate(dim)
            .map_err(|e| Error::parse(path, line, e.to_string()))?;
        items.push(item);
    }
    Dataset::new(dim, items)
}

/// Writes a dataset to `path`, choosing the format from the extension.
pub fn save_ivectors_auto(ds: &Dataset, path: &Path) -> Result<()> {
    save_ivectors(ds, path, IvecFormat::from_path(path))
}

pub fn load_ivectors_auto(path: &Path) -> Result<Dataset> {
    load_ivectors(path, IvecFormat::from_path(path))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrialLabel {
    Target,
    Nontarget,
}

impl TrialLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            TrialLabel::Target => "target",
            TrialLabel::Nontarget => "nontarget",
        }
    }

    pub fn is_target(self) -> bool {
        self == TrialLabel::Target
    }
}

impl FromStr for TrialLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "target" => Ok(TrialLabel::Target),
            "nontarget" => Ok(TrialLabel::Nontarget),
            other => Err(Error::InvalidInput(format!("unknown trial label `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Trial {
    pub enrol_id: String,
    pub test_id: String,
    pub label: TrialLabel,
}

impl Trial {
    pub fn new(enrol_id: impl Into<String>, test_id: impl Into<String>, label: TrialLabel) -> Self {
        Self {
            enrol_id: enrol_id.into(),
            test_id: test_id.into(),
            label,
        }
    }
}

/// Parses `enrol test target|nontarget` lines; blank lines and `#` comments are skipped.
pub fn parse_trials(text: &str, path: &Path) -> Result<Vec<Trial>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::parse(path, n + 1, format!("expected 3 fields, found {}", fields.len())));
        }
        let label = fields[2]
            .parse()
            .map_err(|e: Error| Error::parse(path, n + 1, e.to_string()))?;
        out.push(Trial::new(fields[0], fields[1], label));
    }
    Ok(out)
}

pub fn load_trials(path: &Path) -> Result<Vec<Trial>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trials(&text, path)
}

pub fn format_trials(trials: &[Trial]) -> String {
    let mut s = String::new();
    for t in trials {
        s.push_str(&format!("{} {} {}\n", t.enrol_id, t.test_id, t.label.as_str()));
    }
    s
}

pub fn save_trials(trials: &[Trial], path: &Path) -> Result<()> {
    fs::write(path, format_trials(trials)).map_err(|e| Error::io(path, e))
}

/// Every enrolment utterance against every test utterance, labelled by speaker.
pub fn cross_trials(enrol: &Dataset, test: &Dataset) -> Vec<Trial> {
    let mut out = Vec::with_capacity(enrol.len() * test.len());
    for e in enrol.items() {
        for t in test.items() {
            let label = match (&e.speaker, &t.speaker) {
                (Some(a), Some(b)) if a == b => TrialLabel::Target,
                _ => TrialLabel::Nontarget,
            };
            out.push(Trial::new(&e.id, &t.id, label));
        }
    }
    out
}

/// Dimension read from an i-vector binary header, for validating other blobs.
pub fn peek_dim(buf: &[u8]) -> Result<usize> {
    let mut r = BlobReader::new(buf, IVEC_MAGIC)?;
    checked_dim(r.u32()? as u64, "dim")
}
