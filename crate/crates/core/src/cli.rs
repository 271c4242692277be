//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dataset::{load_ivectors_auto, load_trials, save_ivectors_auto, save_trials, Dataset};
use crate::error::{Error, Result, StageContext};
use crate::gplda::{length_normalize, score_trials, train_gplda, PldaModel};
use crate::harness::{plda_seed, run_experiment, ExperimentConfig, ExperimentKind, SeedData};
use crate::idv::{apply_idv, estimate_idv, IdvTransform, IdvVariant, DEFAULT_IDV_RIDGE};
use crate::lda::{apply_lda, train_lda, LdaTransform, DEFAULT_LDA_RIDGE};
use crate::metrics::{det_points, evaluate, DcfParams};
use crate::scorenorm::{snorm, Cohort};
use crate::scores::{ScoreKind, ScoreSet};

#[derive(Parser, Debug)]
#[command(name = "idv-plda", version, about = "i-vector back-end: IDV, LDA, PLDA, S-norm and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate the synthetic populations of one experiment seed.
    Synth(SynthArgs),
    /// Estimate an IDV transform from out-domain and in-domain vectors.
    TrainIdv(TrainIdvArgs),
    /// Fit LDA on labelled vectors.
    TrainLda(TrainLdaArgs),
    /// Train a Gaussian PLDA model with EM.
    TrainPlda(TrainPldaArgs),
    /// Apply IDV, LDA and length normalization to a vector file.
    Transform(TransformArgs),
    /// Score a trial list.
    Score(ScoreArgs),
    /// S-normalize a score file against a cohort.
    Snorm(SnormArgs),
    /// EER, minDCF and optionally DET points of a score file.
    Eval(EvalArgs),
    /// Run an experiment grid and write its CSV reports.
    Experiment(ExperimentArgs),
}

#[derive(Args, Debug, Clone)]
pub struct ConfigArgs {
    /// TOML experiment config; omitted keys take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `key.path=value` override, applied after the file. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let text = match &self.config {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => String::new(),
        };
        ExperimentConfig::from_toml_with(&text, &self.overrides)
    }
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Experiment seed; defaults to the first configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Degrade enrolment and test segments to this many seconds.
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Write CSV instead of binary vector files.
    #[arg(long)]
    pub csv: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum VariantArg {
    Original,
    Modified,
}

#[derive(Args, Debug)]
pub struct TrainIdvArgs {
    #[arg(long)]
    pub out_domain: PathBuf,
    #[arg(long)]
    pub in_domain: PathBuf,
    #[arg(long, value_enum, default_value = "modified")]
    pub variant: VariantArg,
    #[arg(long, default_value_t = DEFAULT_IDV_RIDGE)]
    pub ridge: f64,
    #[arg(long)]
    pub output: PathBuf,
}

/// Optional transforms applied in order IDV, length normalization, LDA, length normalization.
#[derive(Args, Debug, Clone)]
pub struct ChainArgs {
    #[arg(long)]
    pub idv: Option<PathBuf>,
    /// Length-normalize after IDV, before LDA.
    #[arg(long)]
    pub pre_length_norm: bool,
    #[arg(long)]
    pub lda: Option<PathBuf>,
    /// Length-normalize after the transforms.
    #[arg(long)]
    pub length_norm: bool,
}

struct Chain {
    idv: Option<IdvTransform>,
    pre_length_norm: bool,
    lda: Option<LdaTransform>,
    length_norm: bool,
}

impl ChainArgs {
    fn load(&self) -> Result<Chain> {
        Ok(Chain {
            idv: self.idv.as_deref().map(IdvTransform::load).transpose().stage("load-idv")?,
            pre_length_norm: self.pre_length_norm,
            lda: self.lda.as_deref().map(LdaTransform::load).transpose().stage("load-lda")?,
            length_norm: self.length_norm,
        })
    }
}

impl Chain {
    fn apply(&self, ds: Dataset) -> Result<Dataset> {
        let ds = match &self.idv {
            Some(t) => apply_idv(t, &ds).stage("apply-idv")?,
            None => ds,
        };
        let ds = if self.pre_length_norm {
            length_normalize(&ds).stage("length-norm")?
        } else {
            ds
        };
        let ds = match &self.lda {
            Some(t) => apply_lda(t, &ds).stage("apply-lda")?,
            None => ds,
        };
        if self.length_norm {
            length_normalize(&ds).stage("length-norm")
        } else {
            Ok(ds)
        }
    }

    fn load(&self, path: &Path, what: &str) -> Result<Dataset> {
        self.apply(load_ivectors_auto(path).stage(&format!("load-{what}"))?)
    }
}

#[derive(Args, Debug)]
pub struct TrainLdaArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long, default_value_t = 20)]
    pub dim: usize,
    #[arg(long, default_value_t = DEFAULT_LDA_RIDGE)]
    pub ridge: f64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainPldaArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long, default_value_t = 12)]
    pub eigenvoices: usize,
    #[arg(long, default_value_t = crate::gplda::DEFAULT_EM_ITERS)]
    pub iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
    /// CSV of the log-likelihood after each iteration.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TransformArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct ScoreArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub enrol: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub trials: PathBuf,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct SnormArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub enrol: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub cohort: PathBuf,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
pub enum KindArg {
    /// Normalized scores when every trial has one, raw otherwise.
    Auto,
    Raw,
    Normalized,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    pub kind: KindArg,
    #[arg(long, default_value_t = 10.0)]
    pub c_miss: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c_fa: f64,
    #[arg(long, default_value_t = 0.01)]
    pub p_target: f64,
    /// Write `threshold,p_fa,p_miss` here.
    #[arg(long)]
    pub det: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
pub enum WhichArg {
    All,
    InVsOut,
    Idv,
    Matched,
}

#[derive(Args, Debug)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, value_enum, default_value = "all")]
    pub which: WhichArg,
    /// Overrides `output_dir` from the config.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

fn synth(a: &SynthArgs) -> Result<()> {
    let cfg = a.config.load().stage("config")?;
    let seed = a.seed.unwrap_or(cfg.seeds[0]);
    let data = SeedData::generate(&cfg, seed).stage("generate")?;
    let (enrol, test) = match a.duration {
        Some(d) => data.degraded(d, seed).stage("duration-noise")?,
        None => (data.enrol.clone(), data.test.clone()),
    };
    std::fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e)).stage("write")?;
    let ext = if a.csv { "csv" } else { "ivec" };
    for (name, ds) in [
        ("out_dev", &data.out_dev),
        ("in_dev", &data.in_dev),
        ("enrol", &enrol),
        ("test", &test),
        ("nist_cohort", &data.nist_cohort.vectors),
        ("swb_cohort", &data.swb_cohort.vectors),
    ] {
        save_ivectors_auto(ds, &a.out_dir.join(format!("{name}.{ext}"))).stage("write")?;
    }
    save_trials(&data.trials, &a.out_dir.join("trials.txt")).stage("write")?;
    let manifest = a.out_dir.join("seeds.toml");
    let text = format!("seed = {seed}\nplda_seed = {}\n", plda_seed(seed));
    std::fs::write(&manifest, text).map_err(|e| Error::io(&manifest, e)).stage("write")
}

fn train_idv(a: &TrainIdvArgs) -> Result<()> {
    let out = load_ivectors_auto(&a.out_domain).stage("load-out-domain")?;
    let inn = load_ivectors_auto(&a.in_domain).stage("load-in-domain")?;
    let variant = match a.variant {
        VariantArg::Original => IdvVariant::Original,
        VariantArg::Modified => IdvVariant::Modified,
    };
    estimate_idv(variant, &out, &inn, a.ridge).stage("estimate")?.save(&a.output).stage("write")
}

fn train_lda_cmd(a: &TrainLdaArgs) -> Result<()> {
    let ds = a.chain.load()?.load(&a.input, "input")?;
    train_lda(&ds, a.dim, a.ridge).stage("fit")?.save(&a.output).stage("write")
}

fn train_plda_cmd(a: &TrainPldaArgs) -> Result<()> {
    let ds = a.chain.load()?.load(&a.input, "input")?;
    let t = train_gplda(&ds, a.eigenvoices, a.iters, a.seed).stage("em")?;
    t.model.save(&a.output).stage("write")?;
    if let Some(p) = &a.trace {
        std::fs::write(p, t.trace_csv()).map_err(|e| Error::io(p, e)).stage("write")?;
    }
    Ok(())
}

fn transform(a: &TransformArgs) -> Result<()> {
    let ds = a.chain.load()?.load(&a.input, "input")?;
    save_ivectors_auto(&ds, &a.output).stage("write")
}

fn score(a: &ScoreArgs) -> Result<()> {
    let model = PldaModel::load(&a.model).stage("load-model")?;
    let chain = a.chain.load()?;
    let enrol = chain.load(&a.enrol, "enrol")?;
    let test = chain.load(&a.test, "test")?;
    let trials = load_trials(&a.trials).stage("load-trials")?;
    score_trials(&model, &enrol, &test, &trials).stage("score")?.save(&a.output).stage("write")
}

fn snorm_cmd(a: &SnormArgs) -> Result<()> {
    let model = PldaModel::load(&a.model).stage("load-model")?;
    let scores = ScoreSet::load(&a.scores).stage("load-scores")?;
    let chain = a.chain.load()?;
    let enrol = chain.load(&a.enrol, "enrol")?;
    let test = chain.load(&a.test, "test")?;
    let cohort = Cohort::new(chain.load(&a.cohort, "cohort")?, "cohort").stage("load-cohort")?;
    snorm(&model, &scores, &enrol, &test, &cohort).stage("normalize")?.save(&a.output).stage("write")
}

fn eval(a: &EvalArgs) -> Result<String> {
    let scores = ScoreSet::load(&a.scores).stage("load-scores")?;
    let kind = match a.kind {
        KindArg::Raw => ScoreKind::Raw,
        KindArg::Normalized => ScoreKind::Normalized,
        KindArg::Auto if scores.is_normalized() => ScoreKind::Normalized,
        KindArg::Auto => ScoreKind::Raw,
    };
    let params = DcfParams {
        c_miss: a.c_miss,
        c_fa: a.c_fa,
        p_target: a.p_target,
    };
    let m = evaluate(&scores, kind, &params).stage("metrics")?;
    if let Some(p) = &a.det {
        let mut s = String::from("threshold,p_fa,p_miss\n");
        for d in det_points(&scores, kind).stage("metrics")? {
            s.push_str(&format!("{},{},{}\n", d.threshold, d.p_fa, d.p_miss));
        }
        std::fs::write(p, s).map_err(|e| Error::io(p, e)).stage("write")?;
    }
    Ok(format!(
        "EER {}\nminDCF {}\nminDCF_normalized {}\ntargets {}\nnontargets {}\n",
        m.eer, m.min_dcf, m.min_dcf_normalized, m.n_target, m.n_nontarget
    ))
}

fn experiment(a: &ExperimentArgs) -> Result<String> {
    let mut cfg = a.config.load().stage("config")?;
    if let Some(d) = &a.output_dir {
        cfg.output_dir = d.clone();
    }
    let kinds: Vec<ExperimentKind> = match a.which {
        WhichArg::All => ExperimentKind::ALL.to_vec(),
        WhichArg::InVsOut => vec![ExperimentKind::InVsOutDomain],
        WhichArg::Idv => vec![ExperimentKind::IdvComparison],
        WhichArg::Matched => vec![ExperimentKind::MatchedLengthSnorm],
    };
    let mut out = String::new();
    for k in kinds {
        let report = run_experiment(k, &cfg)?;
        for p in report.write(&cfg.output_dir).stage("write")? {
            log::info!("wrote {}", p.display());
        }
        out.push_str(&report.summary());
    }
    Ok(out)
}

/// Dispatches a parsed command; successful output goes to stdout.
pub fn execute(cli: &Cli) -> Result<String> {
    let none = |r: Result<()>| r.map(|_| String::new());
    match &cli.command {
        Command::Synth(a) => none(synth(a)).stage("synth"),
        Command::TrainIdv(a) => none(train_idv(a)).stage("train-idv"),
        Command::TrainLda(a) => none(train_lda_cmd(a)).stage("train-lda"),
        Command::TrainPlda(a) => none(train_plda_cmd(a)).stage("train-plda"),
        Command::Transform(a) => none(transform(a)).stage("transform"),
        Command::Score(a) => none(score(a)).stage("score"),
        Command::Snorm(a) => none(snorm_cmd(a)).stage("snorm"),
        Command::Eval(a) => eval(a).stage("eval"),
        Command::Experiment(a) => experiment(a).stage("experiment"),
    }
}

/// Parses `argv`, runs it and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(out) => {
            print!("{out}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
