//! Whitening + SVD solver for the regularized CCA problem and the two
//! correlation measures used to score fits.

use nalgebra::{DMatrix, DVector, DVectorView};
use serde::{Deserialize, Serialize};

use crate::data::{CovarianceBlock, DataMatrix};
use crate::error::{CcaError, Result, Side};
use crate::linalg;
use crate::penalty::PenaltySpec;

/// Which computational route produced a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReductionKind {
    /// Covariance-space solve, no reduction.
    Direct,
    /// Unpenalized side solved as-is.
    Identity,
    RccaKernel,
    PrccaKernel,
    GeneralEigen,
    GrccaEigen,
    GrccaExtend,
}

/// Summary of the reduction applied to one side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionSummary {
    pub kind: ReductionKind,
    pub forward_map: String,
    /// Width of the reduced data matrix handed to the solver.
    pub reduced_width: usize,
    /// Largest square matrix formed along the way.
    pub peak_square_dim: usize,
}

/// A fitted regularized CCA model.
///
/// Columns of `alpha` and `beta` are ordered by decreasing modified
/// correlation. Within each column of `alpha` the entry of largest absolute
/// value is positive (lowest index on ties); `beta` follows so that the
/// correlation stays nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedCCA {
    pub(crate) alpha: DMatrix<f64>,
    pub(crate) beta: DMatrix<f64>,
    pub(crate) correlations: Vec<f64>,
    pub(crate) x_penalty: PenaltySpec,
    pub(crate) y_penalty: PenaltySpec,
    pub(crate) x_names: Vec<String>,
    pub(crate) y_names: Vec<String>,
    pub(crate) x_reduction: ReductionSummary,
    pub(crate) y_reduction: ReductionSummary,
}

impl FittedCCA {
    pub fn alpha(&self) -> &DMatrix<f64> {
        &self.alpha
    }

    pub fn beta(&self) -> &DMatrix<f64> {
        &self.beta
    }

    pub fn correlations(&self) -> &[f64] {
        &self.correlations
    }

    pub fn ncomp(&self) -> usize {
        self.correlations.len()
    }

    pub fn x_penalty(&self) -> &PenaltySpec {
        &self.x_penalty
    }

    pub fn y_penalty(&self) -> &PenaltySpec {
        &self.y_penalty
    }

    pub fn x_names(&self) -> &[String] {
        &self.x_names
    }

    pub fn y_names(&self) -> &[String] {
        &self.y_names
    }

    pub fn method(&self) -> ReductionKind {
        self.x_reduction.kind
    }

    pub fn x_reduction(&self) -> &ReductionSummary {
        &self.x_reduction
    }

    pub fn y_reduction(&self) -> &ReductionSummary {
        &self.y_reduction
    }

    pub fn peak_square_dim(&self) -> usize {
        self.x_reduction
            .peak_square_dim
            .max(self.y_reduction.peak_square_dim)
    }

    /// Flips the sign of component `i` on both sides.
    pub(crate) fn flip(&mut self, i: usize) {
        self.alpha.column_mut(i).neg_mut();
        self.beta.column_mut(i).neg_mut();
    }

    pub(crate) fn with_names(mut self, x: &DataMatrix, y: &DataMatrix) -> Self {
        self.x_names = x.column_names().to_vec();
        self.y_names = y.column_names().to_vec();
        self
    }

    /// Gram matrices `A^T (S_XX + K_X) A` and `B^T (S_YY + K_Y) B`, which
    /// should both be the identity. `x` and `y` are the centered training
    /// data; the penalties are applied implicitly.
    pub fn constraint_grams(
        &self,
        x: &DataMatrix,
        y: &DataMatrix,
    ) -> (DMatrix<f64>, DMatrix<f64>) {
        (
            regularized_gram(x.values(), &self.alpha, &self.x_penalty),
            regularized_gram(y.values(), &self.beta, &self.y_penalty),
        )
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            method: self.x_reduction.kind,
            hyperparameters: Hyperparameters {
                x: self.x_penalty.clone(),
                y: self.y_penalty.clone(),
            },
            correlations: self.correlations.clone(),
            alpha: CoefficientBlock::new(&self.alpha, &self.x_names),
            beta: CoefficientBlock::new(&self.beta, &self.y_names),
            x_reduction: self.x_reduction.clone(),
            y_reduction: self.y_reduction.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }
}

fn regularized_gram(data: &DMatrix<f64>, coef: &DMatrix<f64>, penalty: &PenaltySpec) -> DMatrix<f64> {
    let n = data.nrows() as f64;
    let variates = data * coef;
    let mut gram = variates.tr_mul(&variates) / n;
    for i in 0..coef.ncols() {
        for j in 0..coef.ncols() {
            gram[(i, j)] += penalty.bilinear(coef.column(i), coef.column(j));
        }
    }
    gram
}

/// JSON form of a [`FittedCCA`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub method: ReductionKind,
    pub hyperparameters: Hyperparameters,
    pub correlations: Vec<f64>,
    pub alpha: CoefficientBlock,
    pub beta: CoefficientBlock,
    pub x_reduction: ReductionSummary,
    pub y_reduction: ReductionSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub x: PenaltySpec,
    pub y: PenaltySpec,
}

/// Coefficient matrix stored column-major with its row labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientBlock {
    pub features: Vec<String>,
    pub ncomp: usize,
    pub values: Vec<f64>,
}

impl CoefficientBlock {
    fn new(m: &DMatrix<f64>, names: &[String]) -> Self {
        Self {
            features: names.to_vec(),
            ncomp: m.ncols(),
            values: m.as_slice().to_vec(),
        }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.features.len(), self.ncomp, &self.values)
    }
}

pub(crate) struct CoreSolution {
    pub alpha: DMatrix<f64>,
    pub beta: DMatrix<f64>,
    pub correlations: Vec<f64>,
}

/// Solves on covariance blocks: `alpha = (S_XX + K_X)^{-1/2} U`,
/// `beta = (S_YY + K_Y)^{-1/2} V` where `U, V` are the top singular vectors
/// of the whitened cross-covariance. Signs are not normalized here.
pub(crate) fn solve_core(
    sxx: &DMatrix<f64>,
    syy: &DMatrix<f64>,
    sxy: &DMatrix<f64>,
    kx: &DMatrix<f64>,
    ky: &DMatrix<f64>,
    r: usize,
) -> Result<CoreSolution> {
    let (p, q) = sxy.shape();
    if sxx.shape() != (p, p) || syy.shape() != (q, q) || kx.shape() != (p, p) || ky.shape() != (q, q)
    {
        return Err(CcaError::Shape(format!(
            "inconsistent covariance/penalty blocks for a {p}x{q} cross-covariance"
        )));
    }
    if r == 0 || r > p.min(q) {
        return Err(CcaError::Domain(format!(
            "number of components must be in 1..={}, got {r}",
            p.min(q)
        )));
    }
    let wx = linalg::inv_sqrt_pd(&(sxx + kx), Side::X)?;
    let wy = linalg::inv_sqrt_pd(&(syy + ky), Side::Y)?;
    let whitened = &wx * sxy * &wy;
    let svd = linalg::thin_svd(&whitened)?;
    let mut correlations = Vec::with_capacity(r);
    for &s in svd.s.iter().take(r) {
        if s > 1.0 + 1e-8 {
            return Err(CcaError::NumericalConsistency(format!(
                "canonical correlation {s} exceeds 1"
            )));
        }
        correlations.push(s.clamp(0.0, 1.0));
    }
    Ok(CoreSolution {
        alpha: wx * svd.u.columns(0, r),
        beta: wy * svd.v.columns(0, r),
        correlations,
    })
}

/// Makes the largest-magnitude entry of each `alpha` column positive
/// (lowest index on ties) and flips `beta` along with it.
pub(crate) fn normalize_signs(alpha: &mut DMatrix<f64>, beta: &mut DMatrix<f64>) {
    for i in 0..alpha.ncols() {
        let mut best = 0;
        let mut best_abs = -1.0;
        for (j, v) in alpha.column(i).iter().enumerate() {
            if v.abs() > best_abs {
                best_abs = v.abs();
                best = j;
            }
        }
        if alpha[(best, i)] < 0.0 {
            alpha.column_mut(i).neg_mut();
            beta.column_mut(i).neg_mut();
        }
    }
}

pub(crate) fn direct_summary(width: usize) -> ReductionSummary {
    ReductionSummary {
        kind: ReductionKind::Direct,
        forward_map: "none".into(),
        reduced_width: width,
        peak_square_dim: width,
    }
}

/// Direct solve on covariance blocks with explicit penalty matrices.
pub fn solve_direct(
    sxx: &CovarianceBlock,
    syy: &CovarianceBlock,
    sxy: &CovarianceBlock,
    kx: &DMatrix<f64>,
    ky: &DMatrix<f64>,
    r: usize,
) -> Result<FittedCCA> {
    let CoreSolution {
        mut alpha,
        mut beta,
        correlations,
    } = solve_core(sxx.matrix(), syy.matrix(), sxy.matrix(), kx, ky, r)?;
    normalize_signs(&mut alpha, &mut beta);
    let (p, q) = sxy.matrix().shape();
    Ok(FittedCCA {
        alpha,
        beta,
        correlations,
        x_penalty: PenaltySpec::General { matrix: kx.clone() },
        y_penalty: PenaltySpec::General { matrix: ky.clone() },
        x_names: (1..=p).map(|j| format!("x{j}")).collect(),
        y_names: (1..=q).map(|j| format!("y{j}")).collect(),
        x_reduction: direct_summary(p),
        y_reduction: direct_summary(q),
    })
}

/// `a^T S_XY b / (sqrt(a^T (S_XX + K_X) a) sqrt(b^T (S_YY + K_Y) b))`.
#[allow(clippy::too_many_arguments)]
pub fn modified_correlation(
    alpha: DVectorView<'_, f64>,
    beta: DVectorView<'_, f64>,
    sxx: &CovarianceBlock,
    syy: &CovarianceBlock,
    sxy: &CovarianceBlock,
    kx: &DMatrix<f64>,
    ky: &DMatrix<f64>,
) -> Result<f64> {
    let (p, q) = sxy.matrix().shape();
    if alpha.len() != p || beta.len() != q {
        return Err(CcaError::Shape(format!(
            "coefficient lengths {}/{} for a {p}x{q} problem",
            alpha.len(),
            beta.len()
        )));
    }
    let num = alpha.dot(&(sxy.matrix() * beta));
    let dx = alpha.dot(&((sxx.matrix() + kx) * alpha));
    let dy = beta.dot(&((syy.matrix() + ky) * beta));
    if !(dx > 0.0 && dy > 0.0) {
        return Err(CcaError::DegenerateDirection(format!(
            "regularized variances {dx:.3e} and {dy:.3e} must be positive"
        )));
    }
    Ok(num / (dx.sqrt() * dy.sqrt()))
}

/// Pearson correlation between `X alpha` and `Y beta`, centered on the
/// rows given.
pub fn plain_correlation(
    x: &DataMatrix,
    y: &DataMatrix,
    alpha: DVectorView<'_, f64>,
    beta: DVectorView<'_, f64>,
) -> Result<f64> {
    if x.nrows() != y.nrows() {
        return Err(CcaError::Shape(format!(
            "{} vs {} observations",
            x.nrows(),
            y.nrows()
        )));
    }
    if alpha.len() != x.ncols() || beta.len() != y.ncols() {
        return Err(CcaError::Shape("coefficient length does not match data width".into()));
    }
    pearson(&(x.values() * alpha), &(y.values() * beta))
}

pub(crate) fn pearson(u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    let center = |w: &DVector<f64>| {
        let mean = w.mean();
        let norm = w.norm();
        let c = w.add_scalar(-mean);
        let cn = c.norm();
        if cn == 0.0 || cn <= 1e-12 * norm {
            Err(CcaError::DegenerateVariate("variate has zero variance".into()))
        } else {
            Ok((c, cn))
        }
    };
    let (uc, un) = center(u)?;
    let (vc, vn) = center(v)?;
    Ok((uc.dot(&vc) / (un * vn)).clamp(-1.0, 1.0))
}
