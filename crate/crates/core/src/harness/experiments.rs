//! Experiment grids over seeds, systems, cohorts and durations.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::{apply_duration_noise, cross_trials, Dataset, Domain, DurationModel, SyntheticWorld, Trial};
use crate::error::{Error, Result, StageContext};
use crate::metrics::{evaluate, Metrics};
use crate::par;
use crate::scorenorm::{matched_length_cohort, Cohort};
use crate::scores::ScoreKind;

use super::config::{DurationSpec, ExperimentConfig, IdvMode, SnormMode};
use super::pipeline::Backend;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    InVsOutDomain,
    IdvComparison,
    MatchedLengthSnorm,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 3] = [
        ExperimentKind::InVsOutDomain,
        ExperimentKind::IdvComparison,
        ExperimentKind::MatchedLengthSnorm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::InVsOutDomain => "in_vs_out_domain",
            ExperimentKind::IdvComparison => "idv_comparison",
            ExperimentKind::MatchedLengthSnorm => "matched_length_snorm",
        }
    }

    /// System every gain is measured against.
    fn baseline(self) -> (&'static str, &'static str) {
        match self {
            ExperimentKind::InVsOutDomain => ("out-domain", SnormMode::Off.label()),
            ExperimentKind::IdvComparison => ("out-domain", SnormMode::Off.label()),
            ExperimentKind::MatchedLengthSnorm => ("full-cohort", SnormMode::NistStyle.label()),
        }
    }
}

/// Metrics for one (seed, duration, system, cohort) cell; `seed` is `None` for means.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub seed: Option<u64>,
    pub duration: String,
    pub duration_sec: f64,
    pub system: String,
    pub cohort: String,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub kind: ExperimentKind,
    /// Per-seed rows, seeds in configured order.
    pub rows: Vec<ResultRow>,
    /// Means over seeds, in grid order.
    pub means: Vec<ResultRow>,
}

/// splitmix64, used to derive independent sub-seeds.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const TAG_WORLD: u64 = 1;
const TAG_OFFSET: u64 = 2;
const TAG_ENROL_NOISE: u64 = 3;
const TAG_TEST_NOISE: u64 = 4;
const TAG_COHORT_NOISE: u64 = 5;
const TAG_PLDA: u64 = 6;

/// Seed handed to PLDA training for an experiment seed.
pub fn plda_seed(seed: u64) -> u64 {
    derive_seed(seed, TAG_PLDA)
}

/// All populations one seed needs.
pub struct SeedData {
    pub out_dev: Dataset,
    pub in_dev: Dataset,
    pub enrol: Dataset,
    pub test: Dataset,
    pub trials: Vec<Trial>,
    pub nist_cohort: Cohort,
    pub swb_cohort: Cohort,
    pub duration_model: DurationModel,
}

impl SeedData {
    pub fn generate(cfg: &ExperimentConfig, seed: u64) -> Result<Self> {
        let mut gen = cfg.generator.clone();
        gen.seed = derive_seed(seed, TAG_WORLD);
        if gen.domain_offset.is_empty() && cfg.protocol.offset_norm > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, TAG_OFFSET));
            let dir: Vec<f64> = (0..gen.dim).map(|_| rng.sample(StandardNormal)).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            gen.domain_offset = dir.iter().map(|v| v * cfg.protocol.offset_norm / norm).collect();
        }
        let world = SyntheticWorld::new(&gen)?;
        let p = &cfg.protocol;
        let out_dev = world.draw(Domain::OutDomain, 0, gen.n_speakers, gen.sessions_per_speaker)?;
        let in_dev = world.draw(Domain::InDomain, 0, gen.n_speakers, gen.sessions_per_speaker)?;
        let eval = world.draw(Domain::InDomain, 1, p.eval_speakers, p.eval_sessions)?;
        let (enrol_items, test_items): (Vec<_>, Vec<_>) =
            eval.items().iter().cloned().partition(|it| it.id.ends_with("-s00"));
        let enrol = Dataset::new(gen.dim, enrol_items)?;
        let test = Dataset::new(gen.dim, test_items)?;
        let trials = cross_trials(&enrol, &test);
        let nist = world.draw(Domain::InDomain, 2, p.nist_cohort_speakers, p.nist_cohort_sessions)?;
        let swb = world.draw(Domain::OutDomain, 1, p.swb_cohort_size, 1)?;
        Ok(Self {
            out_dev,
            in_dev,
            enrol,
            test,
            trials,
            nist_cohort: Cohort::new(nist.unlabeled(), "nist")?,
            swb_cohort: Cohort::new(swb.unlabeled(), "swb")?,
            duration_model: gen.duration_model(),
        })
    }

    /// Enrolment and test segments degraded to `seconds`. The same noise draw is
    /// reused at every duration, only its scale changes.
    pub fn degraded(&self, seconds: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        let e = apply_duration_noise(&self.enrol, seconds, &self.duration_model, derive_seed(seed, TAG_ENROL_NOISE))?;
        let t = apply_duration_noise(&self.test, seconds, &self.duration_model, derive_seed(seed, TAG_TEST_NOISE))?;
        Ok((e, t))
    }
}

struct Cell {
    duration: DurationSpec,
    system: String,
    cohort: String,
    metrics: Metrics,
}

fn metrics_of(scores: &crate::scores::ScoreSet, normalized: bool, cfg: &ExperimentConfig) -> Result<Metrics> {
    let kind = if normalized { ScoreKind::Normalized } else { ScoreKind::Raw };
    evaluate(scores, kind, &cfg.dcf).stage("eval")
}

fn in_vs_out_seed(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<Cell>> {
    let data = SeedData::generate(cfg, seed).stage("synth")?;
    let plda_seed = plda_seed(seed);
    let systems = [
        ("in-domain", Backend::train(&data.in_dev, None, IdvMode::Off, &cfg.pipeline, &cfg.plda, plda_seed)?),
        ("out-domain", Backend::train(&data.out_dev, None, IdvMode::Off, &cfg.pipeline, &cfg.plda, plda_seed)?),
    ];
    let mut cells = Vec::new();
    for &d in &cfg.durations {
        let (enrol, test) = data.degraded(d.seconds(cfg.generator.duration_ref_sec), seed)?;
        for (name, backend) in &systems {
            let scores = backend.score(&enrol, &test, &data.trials, None)?;
            cells.push(Cell {
                duration: d,
                system: name.to_string(),
                cohort: SnormMode::Off.label().into(),
                metrics: metrics_of(&scores, false, cfg)?,
            });
        }
    }
    Ok(cells)
}

fn idv_seed(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<Cell>> {
    let data = SeedData::generate(cfg, seed).stage("synth")?;
    let plda_seed = plda_seed(seed);
    let in_unlabeled = data.in_dev.unlabeled();
    let mut systems = Vec::new();
    for mode in [IdvMode::Off, IdvMode::Original, IdvMode::Modified] {
        let b = Backend::train(&data.out_dev, Some(&in_unlabeled), mode, &cfg.pipeline, &cfg.plda, plda_seed)?;
        systems.push((mode.system_name(), b));
    }
    let mut cells = Vec::new();
    for &d in &cfg.durations {
        let (enrol, test) = data.degraded(d.seconds(cfg.generator.duration_ref_sec), seed)?;
        for (name, backend) in &systems {
            let raw = backend.score(&enrol, &test, &data.trials, None)?;
            cells.push(Cell {
                duration: d,
                system: name.to_string(),
                cohort: SnormMode::Off.label().into(),
                metrics: metrics_of(&raw, false, cfg)?,
            });
            for (mode, cohort) in [(SnormMode::SwbStyle, &data.swb_cohort), (SnormMode::NistStyle, &data.nist_cohort)] {
                let s = backend.score(&enrol, &test, &data.trials, Some(cohort))?;
                cells.push(Cell {
                    duration: d,
                    system: name.to_string(),
                    cohort: mode.label().into(),
                    metrics: metrics_of(&s, true, cfg)?,
                });
            }
        }
    }
    Ok(cells)
}

fn matched_seed(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<Cell>> {
    let data = SeedData::generate(cfg, seed).stage("synth")?;
    let plda_seed = plda_seed(seed);
    let in_unlabeled = data.in_dev.unlabeled();
    let backend = Backend::train(
        &data.out_dev,
        Some(&in_unlabeled),
        cfg.pipeline.idv,
        &cfg.pipeline,
        &cfg.plda,
        plda_seed,
    )?;
    let reference = cfg.generator.duration_ref_sec;
    // the full-length cohort carries the same noise as full-length evaluation data
    let full_cohort = matched_length_cohort(
        &data.nist_cohort,
        &data.duration_model,
        reference,
        derive_seed(seed, TAG_COHORT_NOISE),
    )?;
    let mut cells = Vec::new();
    for &d in &cfg.durations {
        let secs = d.seconds(reference);
        let (enrol, test) = data.degraded(secs, seed)?;
        let matched = matched_length_cohort(
            &data.nist_cohort,
            &data.duration_model,
            secs,
            derive_seed(seed, TAG_COHORT_NOISE),
        )?;
        for (name, cohort) in [("full-cohort", &full_cohort), ("matched-cohort", &matched)] {
            let s = backend.score(&enrol, &test, &data.trials, Some(cohort))?;
            cells.push(Cell {
                duration: d,
                system: name.to_string(),
                cohort: SnormMode::NistStyle.label().into(),
                metrics: metrics_of(&s, true, cfg)?,
            });
        }
    }
    Ok(cells)
}

fn run(kind: ExperimentKind, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let per_seed = par::try_map(&cfg.seeds, |&seed| {
        let cells = match kind {
            ExperimentKind::InVsOutDomain => in_vs_out_seed(cfg, seed),
            ExperimentKind::IdvComparison => idv_seed(cfg, seed),
            ExperimentKind::MatchedLengthSnorm => matched_seed(cfg, seed),
        };
        cells.map_err(|e| e.in_stage(format!("{} seed {seed}", kind.name())))
    })?;
    let reference = cfg.generator.duration_ref_sec;
    let mut rows = Vec::new();
    for (seed, cells) in cfg.seeds.iter().zip(&per_seed) {
        for c in cells {
            rows.push(ResultRow {
                seed: Some(*seed),
                duration: c.duration.label(),
                duration_sec: c.duration.seconds(reference),
                system: c.system.clone(),
                cohort: c.cohort.clone(),
                metrics: c.metrics,
            });
        }
    }
    // every seed produces the same grid in the same order
    let n = cfg.seeds.len() as f64;
    let means = (0..per_seed[0].len())
        .map(|i| {
            let first = &per_seed[0][i];
            let avg = |f: fn(&Metrics) -> f64| per_seed.iter().map(|s| f(&s[i].metrics)).sum::<f64>() / n;
            ResultRow {
                seed: None,
                duration: first.duration.label(),
                duration_sec: first.duration.seconds(reference),
                system: first.system.clone(),
                cohort: first.cohort.clone(),
                metrics: Metrics {
                    eer: avg(|m| m.eer),
                    min_dcf: avg(|m| m.min_dcf),
                    min_dcf_normalized: avg(|m| m.min_dcf_normalized),
                    n_target: first.metrics.n_target,
                    n_nontarget: first.metrics.n_nontarget,
                },
            }
        })
        .collect();
    Ok(ExperimentReport { kind, rows, means })
}

/// In-domain versus out-domain PLDA over the duration grid.
pub fn run_in_vs_out_domain(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run(ExperimentKind::InVsOutDomain, cfg)
}

/// Uncompensated, IDV and modified-IDV systems, each raw and with two S-norm cohorts.
pub fn run_idv_comparison(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run(ExperimentKind::IdvComparison, cfg)
}

/// S-norm with a full-length cohort versus one degraded to the evaluation duration.
pub fn run_matched_length_snorm(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run(ExperimentKind::MatchedLengthSnorm, cfg)
}

pub fn run_experiment(kind: ExperimentKind, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run(kind, cfg)
}

fn gain_pct(baseline: f64, value: f64) -> f64 {
    if baseline == 0.0 {
        0.0
    } else {
        100.0 * (baseline - value) / baseline
    }
}

impl ExperimentReport {
    /// Mean metrics for one cell of the grid.
    pub fn mean(&self, duration: &str, system: &str, cohort: &str) -> Option<&Metrics> {
        self.means
            .iter()
            .find(|r| r.duration == duration && r.system == system && r.cohort == cohort)
            .map(|r| &r.metrics)
    }

    /// Per-seed EERs for one cell.
    pub fn seed_eers(&self, duration: &str, system: &str, cohort: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.duration == duration && r.system == system && r.cohort == cohort)
            .map(|r| r.metrics.eer)
            .collect()
    }

    pub fn durations(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.means {
            if !out.contains(&r.duration) {
                out.push(r.duration.clone());
            }
        }
        out
    }

    /// Relative EER gain of `system` over the experiment's baseline, in percent.
    pub fn eer_gain_pct(&self, duration: &str, system: &str, cohort: &str) -> Option<f64> {
        let (bs, bc) = self.kind.baseline();
        let base = self.mean(duration, bs, bc)?;
        let m = self.mean(duration, system, cohort)?;
        Some(gain_pct(base.eer, m.eer))
    }

    pub fn metrics_csv(&self) -> String {
        let mut s = String::from("seed,duration,duration_sec,system,cohort,eer,min_dcf,min_dcf_normalized,n_target,n_nontarget\n");
        for r in self.rows.iter().chain(&self.means) {
            let seed = r.seed.map_or_else(|| "mean".to_string(), |v| v.to_string());
            let m = &r.metrics;
            writeln!(
                s,
                "{seed},{},{},{},{},{},{},{},{},{}",
                r.duration, r.duration_sec, r.system, r.cohort, m.eer, m.min_dcf, m.min_dcf_normalized, m.n_target, m.n_nontarget
            )
            .unwrap();
        }
        s
    }

    /// Seed-averaged plot series: `duration,system,metric,value,gain_pct`.
    pub fn plot_csv(&self) -> String {
        let (bs, bc) = self.kind.baseline();
        let mut s = String::from("duration,system,metric,value,gain_pct\n");
        for r in &self.means {
            let base = self.mean(&r.duration, bs, bc).copied().unwrap_or(r.metrics);
            let system = if self.kind == ExperimentKind::IdvComparison {
                format!("{}+{}", r.system, r.cohort)
            } else {
                r.system.clone()
            };
            for (metric, v, b) in [
                ("eer", r.metrics.eer, base.eer),
                ("min_dcf", r.metrics.min_dcf_normalized, base.min_dcf_normalized),
            ] {
                writeln!(s, "{},{system},{metric},{v},{}", r.duration, gain_pct(b, v)).unwrap();
            }
        }
        s
    }

    /// Reference values reported for the full-scale corpora, not computed here.
    pub fn reference_csv(&self) -> String {
        match self.kind {
            ExperimentKind::InVsOutDomain => {
                "duration,metric,claim\nfull,eer,in-domain PLDA improves EER and DCF by more than 28%\n".to_string()
            }
            ExperimentKind::IdvComparison => {
                let mut s = String::from("system,eer_no_snorm_pct,eer_snorm_pct\n");
                for (sys, a, b) in [("out-domain", 4.86, 3.85), ("idv", 4.37, 3.55), ("modified-idv", 3.79, 3.29)] {
                    writeln!(s, "{sys},{a},{b}").unwrap();
                }
                s.push_str("# modified IDV over IDV: about 7% relative EER improvement\n");
                s
            }
            ExperimentKind::MatchedLengthSnorm => {
                let mut s = String::from("duration,eer_full_cohort_pct,eer_matched_cohort_pct\n");
                for (d, a, b) in [
                    ("10s", 17.63, 17.64),
                    ("20s", 12.36, 12.36),
                    ("30s", 9.47, 9.47),
                    ("40s", 7.41, 7.09),
                    ("50s", 6.09, 5.85),
                ] {
                    writeln!(s, "{d},{a},{b}").unwrap();
                }
                s
            }
        }
    }

    /// Writes `<name>_metrics.csv`, `<name>_plot.csv` and `<name>_reference.csv`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let name = self.kind.name();
        let mut paths = Vec::new();
        for (suffix, body) in [
            ("metrics", self.metrics_csv()),
            ("plot", self.plot_csv()),
            ("reference", self.reference_csv()),
        ] {
            let p = dir.join(format!("{name}_{suffix}.csv"));
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
            paths.push(p);
        }
        Ok(paths)
    }

    /// Short human-readable table of mean EERs.
    pub fn summary(&self) -> String {
        let mut s = format!("{}\n", self.kind.name());
        for r in &self.means {
            writeln!(
                s,
                "  {:>6} {:>16} {:>14}  eer {:6.3}%  minDCF {:.4}",
                r.duration,
                r.system,
                r.cohort,
                100.0 * r.metrics.eer,
                r.metrics.min_dcf_normalized
            )
            .unwrap();
        }
        s
    }
}
