//! A trained back-end: optional IDV, LDA, length normalization and PLDA.

use crate::dataset::Dataset;
use crate::error::{Result, StageContext};
use crate::gplda::{length_normalize, score_trials, train_gplda, PldaModel};
use crate::idv::{apply_idv, estimate_idv, IdvTransform};
use crate::lda::{apply_lda, train_lda, LdaTransform};
use crate::scorenorm::{snorm, Cohort};
use crate::scores::ScoreSet;
use crate::dataset::Trial;

use super::config::{IdvMode, PipelineConfig, PldaConfig};

#[derive(Debug, Clone)]
pub struct Backend {
    pub idv: Option<IdvTransform>,
    pub lda: LdaTransform,
    pub plda: PldaModel,
    pub log_likelihood: Vec<f64>,
    length_norm_before_lda: bool,
    idv_on_eval: bool,
}

impl Backend {
    /// Trains on labelled `train` vectors. `idv_mode` other than `Off` also needs
    /// the unlabelled in-domain set the mismatch is measured against.
    pub fn train(
        train: &Dataset,
        idv_in_domain: Option<&Dataset>,
        idv_mode: IdvMode,
        pipeline: &PipelineConfig,
        plda: &PldaConfig,
        seed: u64,
    ) -> Result<Self> {
        let idv = match (idv_mode.variant(), idv_in_domain) {
            (Some(variant), Some(in_domain)) => {
                Some(estimate_idv(variant, train, in_domain, pipeline.idv_ridge).stage("train-idv")?)
            }
            (Some(_), None) => {
                return Err(crate::error::Error::InvalidConfig(
                    "IDV compensation needs an in-domain set".into(),
                ))
            }
            (None, _) => None,
        };
        let compensated = match &idv {
            Some(t) => apply_idv(t, train).stage("apply-idv")?,
            None => train.clone(),
        };
        let lda_input = if pipeline.lda_on_compensated { &compensated } else { train };
        let lda_input = if pipeline.length_norm_before_lda {
            length_normalize(lda_input).stage("length-norm")?
        } else {
            lda_input.clone()
        };
        let lda = train_lda(&lda_input, pipeline.lda_dim, pipeline.lda_ridge).stage("train-lda")?;
        let mut backend = Self {
            idv,
            lda,
            plda: PldaModel::new(
                nalgebra::DVector::zeros(1),
                nalgebra::DMatrix::zeros(1, 0),
                nalgebra::DMatrix::identity(1, 1),
            )?,
            log_likelihood: Vec::new(),
            length_norm_before_lda: pipeline.length_norm_before_lda,
            idv_on_eval: pipeline.idv_on_eval,
        };
        let projected = backend.project(&compensated)?;
        let q = plda.eigenvoices.min(projected.dim());
        let trained = train_gplda(&projected, q, plda.iters, seed).stage("train-plda")?;
        backend.plda = trained.model;
        backend.log_likelihood = trained.log_likelihood;
        Ok(backend)
    }

    /// LDA then length normalization, with an extra normalization first if configured.
    fn project(&self, ds: &Dataset) -> Result<Dataset> {
        let projected = if self.length_norm_before_lda {
            apply_lda(&self.lda, &length_normalize(ds).stage("length-norm")?)
        } else {
            apply_lda(&self.lda, ds)
        };
        length_normalize(&projected.stage("apply-lda")?).stage("length-norm")
    }

    /// Raw i-vectors into PLDA space.
    pub fn transform(&self, raw: &Dataset) -> Result<Dataset> {
        match (&self.idv, self.idv_on_eval) {
            (Some(t), true) => self.project(&apply_idv(t, raw).stage("apply-idv")?),
            _ => self.project(raw),
        }
    }

    /// Raw scores, and S-normalized ones when a raw cohort is given.
    pub fn score(
        &self,
        enrol_raw: &Dataset,
        test_raw: &Dataset,
        trials: &[Trial],
        cohort_raw: Option<&Cohort>,
    ) -> Result<ScoreSet> {
        let enrol = self.transform(enrol_raw)?;
        let test = self.transform(test_raw)?;
        let scores = score_trials(&self.plda, &enrol, &test, trials).stage("score")?;
        match cohort_raw {
            Some(c) => {
                let cohort = Cohort::new(self.transform(&c.vectors)?, c.label.clone())?;
                snorm(&self.plda, &scores, &enrol, &test, &cohort).stage("snorm")
            }
            None => Ok(scores),
        }
    }
}
