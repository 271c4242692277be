//! Between/within-class scatter estimation and the LDA projection.

use std::path::Path;

use nalgebra::SymmetricEigen;

use crate::dataset::{check_dim, Dataset};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::par;
use crate::persist::{checked_dim, read_file, BlobReader, BlobWriter};

pub const DEFAULT_LDA_RIDGE: f64 = 1e-6;
/// Retained dimension at full i-vector scale.
pub const DEFAULT_LDA_DIM: usize = 150;

#[derive(Debug, Clone, PartialEq)]
pub struct LdaTransform {
    /// `D × K`, one generalized eigenvector per column.
    pub a_matrix: Mat,
    pub s_b: Mat,
    pub s_w: Mat,
    /// Descending.
    pub eigenvalues: Vec<f64>,
}

/// `(S_b, S_w)` with
/// `S_b = Σ_s n_s (w̄_s − w̄)(w̄_s − w̄)ᵀ` and `S_w = Σ_s Σ_i (w_i − w̄_s)(w_i − w̄_s)ᵀ`.
///
/// Speakers are visited in sorted id order and reduced sequentially.
pub fn scatter_matrices(ds: &Dataset) -> Result<(Mat, Mat)> {
    if !ds.is_labeled() {
        return Err(Error::InvalidInput("LDA requires every utterance to carry a speaker label".into()));
    }
    if ds.n_speakers() < 2 {
        return Err(Error::InvalidInput(format!(
            "LDA requires at least 2 speakers, found {}",
            ds.n_speakers()
        )));
    }
    let dim = ds.dim();
    let global = linalg::mean(dim, ds.values());
    let groups: Vec<&[usize]> = ds.speakers().map(|(_, g)| g).collect();
    let partials = par::map(&groups, |group| {
        let class_mean = linalg::mean(dim, group.iter().map(|&i| &ds.items()[i].values));
        let mut within = Mat::zeros(dim, dim);
        for &i in group.iter() {
            let d = &ds.items()[i].values - &class_mean;
            within.ger(1.0, &d, &d, 1.0);
        }
        let dm = &class_mean - &global;
        let mut between = Mat::zeros(dim, dim);
        between.ger(group.len() as f64, &dm, &dm, 0.0);
        (between, within)
    });
    let mut s_b = Mat::zeros(dim, dim);
    let mut s_w = Mat::zeros(dim, dim);
    for (b, w) in &partials {
        s_b += b;
        s_w += w;
    }
    Ok((linalg::symmetrize(&s_b), linalg::symmetrize(&s_w)))
}

/// Flips `v` so that its largest-magnitude entry is positive.
fn fix_sign(v: &mut Vector) {
    let mut best = 0usize;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v.len() > 0 && v[best] < 0.0 {
        v.neg_mut();
    }
}

/// Solves `S_b v = λ (S_w + r·I) v` for the `k` leading pairs by Cholesky
/// reduction to a symmetric standard problem.
pub fn generalized_eigen(s_b: &Mat, s_w: &Mat, k: usize, relative_ridge: f64) -> Result<(Mat, Vec<f64>)> {
    let dim = s_b.nrows();
    let rc = linalg::cholesky_ridged(s_w, relative_ridge, "within-class scatter")?;
    let l_inv = linalg::lower_inverse(&rc.chol)?;
    let reduced = linalg::symmetrize(&(&l_inv * s_b * l_inv.transpose()));
    let eig = SymmetricEigen::try_new(reduced, 1e-15, 10_000)
        .ok_or_else(|| Error::Factorization("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let back = l_inv.transpose();
    let mut a = Mat::zeros(dim, k);
    let mut values = Vec::with_capacity(k);
    for (col, &idx) in order.iter().take(k).enumerate() {
        let mut v = &back * eig.eigenvectors.column(idx);
        let n = v.norm();
        if n > 0.0 {
            v /= n;
        }
        fix_sign(&mut v);
        a.set_column(col, &v);
        values.push(eig.eigenvalues[idx]);
    }
    Ok((a, values))
}

/// Trains an LDA projection to `k` dimensions.
///
/// `k` above `S − 1` (the rank of `S_b`) is clamped with a warning; `k > D` is an error.
pub fn train_lda(ds: &Dataset, k: usize, relative_ridge: f64) -> Result<LdaTransform> {
    if k == 0 {
        return Err(Error::InvalidConfig("LDA dimension must be positive".into()));
    }
    if k > ds.dim() {
        return Err(Error::InvalidConfig(format!(
            "LDA dimension {k} exceeds input dimension {}",
            ds.dim()
        )));
    }
    let (s_b, s_w) = scatter_matrices(ds)?;
    let rank = ds.n_speakers() - 1;
    let k = if k > rank {
        log::warn!("LDA dimension {k} exceeds between-class rank {rank}; clamping");
        rank
    } else {
        k
    };
    let (a_matrix, eigenvalues) = generalized_eigen(&s_b, &s_w, k, relative_ridge)?;
    Ok(LdaTransform {
        a_matrix,
        s_b,
        s_w,
        eigenvalues,
    })
}

impl LdaTransform {
    pub fn input_dim(&self) -> usize {
        self.a_matrix.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.a_matrix.ncols()
    }

    /// `Aᵀ w`.
    pub fn project(&self, w: &Vector) -> Vector {
        self.a_matrix.tr_mul(w)
    }

    /// Layout: dims `(D, K)`, eigenvalues, `A` row-major, then `S_b` and `S_w` row-major.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = BlobWriter::new(b"LDA1");
        w.u32(self.input_dim() as u32);
        w.u32(self.output_dim() as u32);
        w.f64s(self.eigenvalues.iter().copied());
        w.matrix(&self.a_matrix);
        w.matrix(&self.s_b);
        w.matrix(&self.s_w);
        w.finish()
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = BlobReader::new(buf, b"LDA1")?;
        let d = checked_dim(r.u32()? as u64, "LDA input dim")?;
        let k = checked_dim(r.u32()? as u64, "LDA output dim")?;
        if k > d {
            return Err(Error::Format(format!("LDA blob has K={k} > D={d}")));
        }
        let eigenvalues = (0..k).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let a_matrix = r.matrix(d, k)?;
        let s_b = r.matrix(d, d)?;
        let s_w = r.matrix(d, d)?;
        r.expect_end()?;
        Ok(Self {
            a_matrix,
            s_b,
            s_w,
            eigenvalues,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?)
    }
}

pub fn apply_lda(t: &LdaTransform, ds: &Dataset) -> Result<Dataset> {
    check_dim(t.input_dim(), ds.dim(), "apply LDA")?;
    ds.map_values(t.output_dim(), |it| t.project(&it.values))
}
