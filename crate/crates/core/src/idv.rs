//! Inter-dataset variability (IDV) compensation.
//!
//! The mismatch scatter is built from i-vectors of one domain centred on the
//! mean of the other. The original estimate uses only out-domain vectors around
//! the in-domain mean; the modified estimate adds the mirrored term
//!
//! ```text
//! S'  = 1/N₁ Σᵢ (wᵢᴼᴰ − w̄ᴵᴰ)(wᵢᴼᴰ − w̄ᴵᴰ)ᵀ + 1/N₂ Σⱼ (wⱼᴵᴰ − w̄ᴼᴰ)(wⱼᴵᴰ − w̄ᴼᴰ)ᵀ
//! ```
//!
//! The decorrelator is `D' = L⁻ᵀ` with `LLᵀ = S' + ridge·I`, so that
//! `D'D'ᵀ = (S' + ridge·I)⁻¹` and `w ↦ D'ᵀw` whitens the mismatch scatter.
//! Speaker labels are never consulted.

use std::path::Path;

use crate::dataset::{check_dim, Dataset};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::par;
use crate::persist::{checked_dim, read_file, BlobReader, BlobWriter};

/// Default relative ridge `τ`; the absolute ridge is `τ·tr(S)/D`.
pub const DEFAULT_IDV_RIDGE: f64 = 1e-6;

/// Items per partial outer-product sum. Fixed so reduction order never depends
/// on the thread count.
const CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdvVariant {
    Original,
    Modified,
}

impl IdvVariant {
    fn code(self) -> u8 {
        match self {
            IdvVariant::Original => 0,
            IdvVariant::Modified => 1,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(IdvVariant::Original),
            1 => Ok(IdvVariant::Modified),
            other => Err(Error::Format(format!("unknown IDV variant byte {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdvTransform {
    pub variant: IdvVariant,
    pub s_idv: Mat,
    pub decorrelator: Mat,
    /// Absolute ridge added to `s_idv` before factorization.
    pub ridge: f64,
}

/// `1/N Σ (x − centre)(x − centre)ᵀ` with chunked, order-stable accumulation.
pub fn cross_scatter(ds: &Dataset, centre: &Vector) -> Mat {
    let dim = ds.dim();
    let chunks: Vec<&[crate::dataset::IVector]> = ds.items().chunks(CHUNK).collect();
    let partials = par::map(&chunks, |chunk| {
        let mut acc = Mat::zeros(dim, dim);
        for it in chunk.iter() {
            let d = &it.values - centre;
            acc.ger(1.0, &d, &d, 1.0);
        }
        acc
    });
    let mut total = Mat::zeros(dim, dim);
    for p in &partials {
        total += p;
    }
    total / ds.len() as f64
}

fn check_inputs(out_domain: &Dataset, in_domain: &Dataset) -> Result<()> {
    if out_domain.is_empty() {
        return Err(Error::Empty("out-domain set for IDV estimation".into()));
    }
    if in_domain.is_empty() {
        return Err(Error::Empty("in-domain set for IDV estimation".into()));
    }
    check_dim(out_domain.dim(), in_domain.dim(), "IDV estimation: in-domain vs out-domain")
}

fn dataset_mean(ds: &Dataset) -> Vector {
    linalg::mean(ds.dim(), ds.values())
}

/// Builds the transform from a given mismatch scatter.
pub fn idv_from_scatter(variant: IdvVariant, s_idv: Mat, relative_ridge: f64) -> Result<IdvTransform> {
    if !s_idv.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("IDV scatter".into()));
    }
    let s_idv = linalg::symmetrize(&s_idv);
    let rc = linalg::cholesky_ridged(&s_idv, relative_ridge, "IDV scatter")?;
    let decorrelator = linalg::lower_inverse(&rc.chol)?.transpose();
    Ok(IdvTransform {
        variant,
        s_idv,
        decorrelator,
        ridge: rc.ridge,
    })
}

/// Single-term estimate: out-domain i-vectors around the in-domain mean.
pub fn estimate_original_idv(out_domain: &Dataset, in_domain: &Dataset, relative_ridge: f64) -> Result<IdvTransform> {
    check_inputs(out_domain, in_domain)?;
    let s = cross_scatter(out_domain, &dataset_mean(in_domain));
    idv_from_scatter(IdvVariant::Original, s, relative_ridge)
}

/// Symmetric two-term estimate.
pub fn estimate_modified_idv(out_domain: &Dataset, in_domain: &Dataset, relative_ridge: f64) -> Result<IdvTransform> {
    check_inputs(out_domain, in_domain)?;
    let out_mean = dataset_mean(out_domain);
    let in_mean = dataset_mean(in_domain);
    let s = cross_scatter(out_domain, &in_mean) + cross_scatter(in_domain, &out_mean);
    idv_from_scatter(IdvVariant::Modified, s, relative_ridge)
}

pub fn estimate_idv(
    variant: IdvVariant,
    out_domain: &Dataset,
    in_domain: &Dataset,
    relative_ridge: f64,
) -> Result<IdvTransform> {
    match variant {
        IdvVariant::Original => estimate_original_idv(out_domain, in_domain, relative_ridge),
        IdvVariant::Modified => estimate_modified_idv(out_domain, in_domain, relative_ridge),
    }
}

impl IdvTransform {
    pub fn dim(&self) -> usize {
        self.s_idv.nrows()
    }

    /// `D'ᵀ w`.
    pub fn project(&self, w: &Vector) -> Vector {
        self.decorrelator.tr_mul(w)
    }

    /// Relative Frobenius error of `D'D'ᵀ` against `(S + ridge·I)⁻¹`.
    pub fn factorization_error(&self) -> Result<f64> {
        let mut shifted = self.s_idv.clone();
        for i in 0..self.dim() {
            shifted[(i, i)] += self.ridge;
        }
        let inv = linalg::spd_inverse(&shifted, "IDV scatter")?;
        Ok(linalg::rel_frobenius(&(&self.decorrelator * self.decorrelator.transpose()), &inv))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = BlobWriter::new(b"IDV1");
        w.u8(self.variant.code());
        w.u32(self.dim() as u32);
        w.f64(self.ridge);
        w.matrix(&self.s_idv);
        w.matrix(&self.decorrelator);
        w.finish()
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = BlobReader::new(buf, b"IDV1")?;
        let variant = IdvVariant::from_code(r.u8()?)?;
        let dim = checked_dim(r.u32()? as u64, "IDV dim")?;
        let ridge = r.f64()?;
        let s_idv = r.matrix(dim, dim)?;
        let decorrelator = r.matrix(dim, dim)?;
        r.expect_end()?;
        Ok(Self {
            variant,
            s_idv,
            decorrelator,
            ridge,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?)
    }
}

/// Replaces every value with `D'ᵀ w`; metadata is preserved.
pub fn apply_idv(t: &IdvTransform, ds: &Dataset) -> Result<Dataset> {
    check_dim(t.dim(), ds.dim(), "apply IDV")?;
    ds.map_values(t.dim(), |it| t.project(&it.values))
}
