//! Reductions that map a high-dimensional regularized CCA problem onto an
//! equivalent one with at most `n` (or `n + p_2`) coordinates.
//!
//! Every reduction is a linear change of coordinates `Z = X T` together with
//! a recovery map `alpha = T alpha_Z`, so canonical variates computed on the
//! reduced matrix coincide with those of the original problem:
//!
//! * ridge: `X = R V^T` (thin SVD), `alpha = V alpha_R`;
//! * partial: the unpenalized block `X_2` is regressed out of `X_1`, the
//!   residual is factored as above and `alpha = A diag(V_1, I) gamma`;
//! * general and group penalties: `K = U D U^T`, `Z = X U S^{-1}`, leaving a
//!   ridge (all `D > 0`) or partial problem at `lambda = 1`.
//!
//! No `p x p` array is formed unless the penalty itself is a dense `p x p`
//! matrix.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{cross_product, sample_covariance, DataMatrix};
use crate::error::{CcaError, Result};
use crate::linalg;
use crate::penalty::{
    build_penalty_matrix, factor_general_penalty, factor_group_extension, factor_group_penalty,
    Basis, GroupStructure, PenaltyFactorization, PenaltyFamily, PenaltySpec,
};
use crate::solver::{
    direct_summary, normalize_signs, solve_core, FittedCCA, ReductionKind, ReductionSummary,
};

/// Route used for group penalties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GrccaPath {
    /// Helmert eigenbasis of the penalty.
    Eigen,
    /// Extended feature matrix with `K` group-mean columns.
    Extend,
    /// Extension when `p + K < 4 (n + K)`, eigenbasis otherwise.
    #[default]
    Auto,
}

impl GrccaPath {
    pub fn resolve(self, n: usize, p: usize, k: usize) -> GrccaPath {
        match self {
            GrccaPath::Auto if p + k < 4 * (n + k) => GrccaPath::Extend,
            GrccaPath::Auto => GrccaPath::Eigen,
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitOptions {
    pub ncomp: usize,
    pub grcca_path: GrccaPath,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            ncomp: 1,
            grcca_path: GrccaPath::Auto,
        }
    }
}

impl FitOptions {
    pub fn with_ncomp(ncomp: usize) -> Self {
        Self {
            ncomp,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
enum RecoveryStep {
    /// `alpha = M alpha'`.
    Linear(DMatrix<f64>),
    /// `alpha = U S^{-1} alpha'`.
    Basis { basis: Basis, inv_scale: DVector<f64> },
    /// Partial-penalty recovery `alpha_1 = V_1 gamma_1`,
    /// `alpha_2 = gamma_2 - B alpha_1`, scattered back to column order.
    Partial {
        v1: DMatrix<f64>,
        b: DMatrix<f64>,
        penalized: Vec<usize>,
        unpenalized: Vec<usize>,
    },
}

impl RecoveryStep {
    fn apply(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            RecoveryStep::Linear(m) => m * a,
            RecoveryStep::Basis { basis, inv_scale } => {
                let mut scaled = a.clone();
                for (mut row, s) in scaled.row_iter_mut().zip(inv_scale.iter()) {
                    row *= *s;
                }
                basis.apply(&scaled)
            }
            RecoveryStep::Partial {
                v1,
                b,
                penalized,
                unpenalized,
            } => {
                let k1 = v1.ncols();
                let p2 = unpenalized.len();
                let alpha1 = v1 * a.rows(0, k1);
                let alpha2 = a.rows(k1, p2) - b * &alpha1;
                let mut out = DMatrix::zeros(penalized.len() + p2, a.ncols());
                for (r, &i) in penalized.iter().enumerate() {
                    out.row_mut(i).copy_from(&alpha1.row(r));
                }
                for (r, &i) in unpenalized.iter().enumerate() {
                    out.row_mut(i).copy_from(&alpha2.row(r));
                }
                out
            }
        }
    }
}

/// A chain of coordinate changes from original features to a reduced
/// problem, with the map back.
#[derive(Debug, Clone)]
pub struct ReductionPlan {
    kind: ReductionKind,
    forward_map: String,
    steps: Vec<RecoveryStep>,
    reduced_width: usize,
    peak_square_dim: usize,
}

impl ReductionPlan {
    pub fn kind(&self) -> ReductionKind {
        self.kind
    }

    pub fn forward_map(&self) -> &str {
        &self.forward_map
    }

    pub fn reduced_width(&self) -> usize {
        self.reduced_width
    }

    pub fn peak_square_dim(&self) -> usize {
        self.peak_square_dim
    }

    /// Maps reduced coefficients (one column per component) back to the
    /// original feature space.
    pub fn recover(&self, reduced: &DMatrix<f64>) -> DMatrix<f64> {
        self.steps
            .iter()
            .rev()
            .fold(reduced.clone(), |acc, step| step.apply(&acc))
    }

    pub fn summary(&self) -> ReductionSummary {
        ReductionSummary {
            kind: self.kind,
            forward_map: self.forward_map.clone(),
            reduced_width: self.reduced_width,
            peak_square_dim: self.peak_square_dim,
        }
    }
}

/// Reduced data for one side: `data` is `n x m'` and `penalty` is the
/// `m' x m'` penalty of the reduced problem.
struct ReducedSide {
    data: DMatrix<f64>,
    penalty: DMatrix<f64>,
    plan: ReductionPlan,
}

fn identity_side(x: &DMatrix<f64>, penalty: DMatrix<f64>) -> ReducedSide {
    let m = x.ncols();
    ReducedSide {
        data: x.clone(),
        penalty,
        plan: ReductionPlan {
            kind: ReductionKind::Identity,
            forward_map: "identity".into(),
            steps: Vec::new(),
            reduced_width: m,
            peak_square_dim: m,
        },
    }
}

fn kernel_ridge(x: &DMatrix<f64>, lambda: f64) -> Result<ReducedSide> {
    let (r, v) = linalg::row_space_factor(x)?;
    let k = r.ncols();
    Ok(ReducedSide {
        data: r,
        penalty: DMatrix::identity(k, k) * lambda,
        plan: ReductionPlan {
            kind: ReductionKind::RccaKernel,
            forward_map: format!("X = R V^T (thin SVD), R is n x {k}"),
            steps: vec![RecoveryStep::Linear(v)],
            reduced_width: k,
            peak_square_dim: k,
        },
    })
}

fn kernel_partial(
    x: &DMatrix<f64>,
    lambda: f64,
    penalized: &[usize],
    unpenalized: &[usize],
) -> Result<ReducedSide> {
    let n = x.nrows();
    let p2 = unpenalized.len();
    if p2 >= n {
        return Err(CcaError::Identifiability(format!(
            "unpenalized block has {p2} columns but only {n} observations"
        )));
    }
    let x1 = x.select_columns(penalized);
    let x2 = x.select_columns(unpenalized);
    let svd2 = linalg::thin_svd(&x2)?;
    let smax = svd2.s[0];
    let smin = svd2.s[p2 - 1];
    if !(smax > 0.0) || smin <= 1e-10 * smax {
        return Err(CcaError::Identifiability(format!(
            "unpenalized block is rank deficient (singular value ratio {:.3e})",
            if smax > 0.0 { smin / smax } else { 0.0 }
        )));
    }
    // B = (X2^T X2)^{-1} X2^T X1 = W S^{-1} U2^T X1
    let u2t_x1 = svd2.u.tr_mul(&x1);
    let mut scaled = u2t_x1.clone();
    for (mut row, s) in scaled.row_iter_mut().zip(svd2.s.iter()) {
        row /= *s;
    }
    let b = &svd2.v * scaled;
    let resid = x1 - &svd2.u * u2t_x1;
    let (r1, v1) = linalg::row_space_factor(&resid)?;
    let k1 = r1.ncols();
    let width = k1 + p2;
    let mut data = DMatrix::zeros(n, width);
    data.columns_mut(0, k1).copy_from(&r1);
    data.columns_mut(k1, p2).copy_from(&x2);
    let mut penalty = DMatrix::zeros(width, width);
    for i in 0..k1 {
        penalty[(i, i)] = lambda;
    }
    Ok(ReducedSide {
        data,
        penalty,
        plan: ReductionPlan {
            kind: ReductionKind::PrccaKernel,
            forward_map: format!(
                "X1~ = X1 - X2 B, X1~ = R1 V1^T; reduced matrix [R1 | X2] is n x {width}"
            ),
            steps: vec![RecoveryStep::Partial {
                v1,
                b,
                penalized: penalized.to_vec(),
                unpenalized: unpenalized.to_vec(),
            }],
            reduced_width: width,
            peak_square_dim: width.max(p2),
        },
    })
}

/// Residual problem left after [`general_reduce`]; the penalty level is
/// always 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResidualPenalty {
    Ridge,
    Partial { unpenalized: Vec<usize> },
}

/// Output of [`general_reduce`].
#[derive(Debug, Clone)]
pub struct GeneralReduction {
    pub data: DataMatrix,
    pub residual: ResidualPenalty,
    pub plan: ReductionPlan,
}

impl GeneralReduction {
    pub fn recover(&self, reduced: &DMatrix<f64>) -> DMatrix<f64> {
        self.plan.recover(reduced)
    }
}

fn general_transform(
    x: &DMatrix<f64>,
    fact: &PenaltyFactorization,
) -> Result<(DMatrix<f64>, ResidualPenalty, RecoveryStep)> {
    if fact.basis.nrows() != x.ncols() {
        return Err(CcaError::Shape(format!(
            "penalty basis has {} rows, data has {} columns",
            fact.basis.nrows(),
            x.ncols()
        )));
    }
    let inv_scale = DVector::from_iterator(
        fact.diag.len(),
        (0..fact.diag.len()).map(|i| {
            if fact.is_zero(i) {
                1.0
            } else {
                1.0 / fact.diag[i].sqrt()
            }
        }),
    );
    let mut z = fact.basis.right_apply(x);
    for (mut col, s) in z.column_iter_mut().zip(inv_scale.iter()) {
        col *= *s;
    }
    let zeros = fact.zero_indices();
    let residual = if zeros.is_empty() {
        ResidualPenalty::Ridge
    } else {
        ResidualPenalty::Partial { unpenalized: zeros }
    };
    Ok((
        z,
        residual,
        RecoveryStep::Basis {
            basis: fact.basis.clone(),
            inv_scale,
        },
    ))
}

/// Rewrites a problem with penalty `K = U D U^T` as a ridge problem at
/// `lambda = 1` (all `D > 0`) or a partial problem whose unpenalized
/// coordinates are the zero eigenvalues. Coefficients map back through
/// `alpha = U S^{-1} alpha~`.
pub fn general_reduce(x: &DataMatrix, fact: &PenaltyFactorization) -> Result<GeneralReduction> {
    let (z, residual, step) = general_transform(x.values(), fact)?;
    let width = z.ncols();
    let names = (1..=width).map(|j| format!("z{j}")).collect();
    let mut data = DataMatrix::new(z, names)?;
    if x.is_centered() {
        data = data.mark_centered();
    }
    let peak = match fact.basis {
        Basis::Dense(ref u) => u.nrows(),
        _ => 0,
    };
    Ok(GeneralReduction {
        data,
        residual,
        plan: ReductionPlan {
            kind: ReductionKind::GeneralEigen,
            forward_map: "X~ = X U S^{-1}".into(),
            steps: vec![step],
            reduced_width: width,
            peak_square_dim: peak,
        },
    })
}

fn general_chain(
    x: &DMatrix<f64>,
    fact: &PenaltyFactorization,
    kind: ReductionKind,
) -> Result<ReducedSide> {
    let (z, residual, step) = general_transform(x, fact)?;
    let inner = match &residual {
        ResidualPenalty::Ridge => kernel_ridge(&z, 1.0)?,
        ResidualPenalty::Partial { unpenalized } => {
            let penalized: Vec<usize> = (0..z.ncols()).filter(|i| !unpenalized.contains(i)).collect();
            if penalized.is_empty() {
                identity_side(&z, DMatrix::zeros(z.ncols(), z.ncols()))
            } else {
                kernel_partial(&z, 1.0, &penalized, unpenalized)?
            }
        }
    };
    let basis_peak = match fact.basis {
        Basis::Dense(ref u) => u.nrows(),
        _ => 0,
    };
    let mut steps = vec![step];
    steps.extend(inner.plan.steps);
    let forward_map = match kind {
        ReductionKind::GrccaExtend => format!("X~ = extend(X) (width {}); {}", z.ncols(), inner.plan.forward_map),
        ReductionKind::GrccaEigen => format!("X~ = X U S^{{-1}} (Helmert blocks); {}", inner.plan.forward_map),
        _ => format!("X~ = X U S^{{-1}}; {}", inner.plan.forward_map),
    };
    Ok(ReducedSide {
        data: inner.data,
        penalty: inner.penalty,
        plan: ReductionPlan {
            kind,
            forward_map,
            steps,
            reduced_width: inner.plan.reduced_width,
            peak_square_dim: inner.plan.peak_square_dim.max(basis_peak),
        },
    })
}

fn reduce_side(x: &DMatrix<f64>, spec: &PenaltySpec, path: GrccaPath) -> Result<ReducedSide> {
    let m = x.ncols();
    spec.validate(m)?;
    match spec {
        PenaltySpec::None => Ok(identity_side(x, DMatrix::zeros(m, m))),
        PenaltySpec::Ridge { lambda } => kernel_ridge(x, *lambda),
        PenaltySpec::Partial { lambda, penalized } => {
            let unpenalized: Vec<usize> = (0..m).filter(|i| !penalized.contains(i)).collect();
            if penalized.is_empty() {
                Ok(identity_side(x, DMatrix::zeros(m, m)))
            } else if unpenalized.is_empty() {
                kernel_ridge(x, *lambda)
            } else {
                kernel_partial(x, *lambda, penalized, &unpenalized)
            }
        }
        PenaltySpec::Group { groups, .. } => {
            match path.resolve(x.nrows(), m, groups.n_groups()) {
                GrccaPath::Extend => {
                    general_chain(x, &factor_group_extension(spec)?, ReductionKind::GrccaExtend)
                }
                _ => general_chain(x, &factor_group_penalty(spec)?, ReductionKind::GrccaEigen),
            }
        }
        PenaltySpec::General { matrix } => general_chain(
            x,
            &factor_general_penalty(matrix)?,
            ReductionKind::GeneralEigen,
        ),
    }
}

fn check_pair(x: &DataMatrix, y: &DataMatrix) -> Result<()> {
    if x.nrows() != y.nrows() {
        return Err(CcaError::Shape(format!(
            "{} vs {} observations",
            x.nrows(),
            y.nrows()
        )));
    }
    x.require_centered("x")?;
    y.require_centered("y")
}

/// Fits regularized CCA through the reduction matching each side's
/// penalty. Both matrices must be column-centered.
pub fn fit_cca(
    x: &DataMatrix,
    y: &DataMatrix,
    x_penalty: &PenaltySpec,
    y_penalty: &PenaltySpec,
    opts: FitOptions,
) -> Result<FittedCCA> {
    check_pair(x, y)?;
    if opts.ncomp == 0 || opts.ncomp > x.ncols().min(y.ncols()) {
        return Err(CcaError::Domain(format!(
            "number of components must be in 1..={}, got {}",
            x.ncols().min(y.ncols()),
            opts.ncomp
        )));
    }
    let rx = reduce_side(x.values(), x_penalty, opts.grcca_path)?;
    let ry = reduce_side(y.values(), y_penalty, opts.grcca_path)?;
    solve_reduced(x, y, rx, ry, x_penalty, y_penalty, opts.ncomp)
}

fn solve_reduced(
    x: &DataMatrix,
    y: &DataMatrix,
    rx: ReducedSide,
    ry: ReducedSide,
    x_penalty: &PenaltySpec,
    y_penalty: &PenaltySpec,
    r: usize,
) -> Result<FittedCCA> {
    let available = rx.data.ncols().min(ry.data.ncols());
    if r > available {
        return Err(CcaError::Domain(format!(
            "{r} components requested but the reduced problem supports {available}"
        )));
    }
    let sxx = cross_product(&rx.data, &rx.data);
    let syy = cross_product(&ry.data, &ry.data);
    let sxy = cross_product(&rx.data, &ry.data);
    let core = solve_core(&sxx, &syy, &sxy, &rx.penalty, &ry.penalty, r)?;
    let mut alpha = rx.plan.recover(&core.alpha);
    let mut beta = ry.plan.recover(&core.beta);
    normalize_signs(&mut alpha, &mut beta);
    let mut x_summary = rx.plan.summary();
    let mut y_summary = ry.plan.summary();
    x_summary.peak_square_dim = x_summary.peak_square_dim.max(rx.data.ncols());
    y_summary.peak_square_dim = y_summary.peak_square_dim.max(ry.data.ncols());
    Ok(FittedCCA {
        alpha,
        beta,
        correlations: core.correlations,
        x_penalty: x_penalty.clone(),
        y_penalty: y_penalty.clone(),
        x_names: Vec::new(),
        y_names: Vec::new(),
        x_reduction: x_summary,
        y_reduction: y_summary,
    }
    .with_names(x, y))
}

/// Covariance-space solve with explicit `p x p` and `q x q` penalty
/// matrices. Intended for small problems and as a reference.
pub fn fit_direct(
    x: &DataMatrix,
    y: &DataMatrix,
    x_penalty: &PenaltySpec,
    y_penalty: &PenaltySpec,
    ncomp: usize,
) -> Result<FittedCCA> {
    check_pair(x, y)?;
    let kx = build_penalty_matrix(x_penalty, x.ncols())?;
    let ky = build_penalty_matrix(y_penalty, y.ncols())?;
    let sxx = sample_covariance(x, x)?;
    let syy = sample_covariance(y, y)?;
    let sxy = sample_covariance(x, y)?;
    let core = solve_core(sxx.matrix(), syy.matrix(), sxy.matrix(), &kx, &ky, ncomp)?;
    let (mut alpha, mut beta) = (core.alpha, core.beta);
    normalize_signs(&mut alpha, &mut beta);
    Ok(FittedCCA {
        alpha,
        beta,
        correlations: core.correlations,
        x_penalty: x_penalty.clone(),
        y_penalty: y_penalty.clone(),
        x_names: Vec::new(),
        y_names: Vec::new(),
        x_reduction: direct_summary(x.ncols()),
        y_reduction: direct_summary(y.ncols()),
    }
    .with_names(x, y))
}

/// Ridge CCA on the X side solved in the `n`-dimensional row space of `X`.
pub fn rcca_kernel_fit(
    x: &DataMatrix,
    y: &DataMatrix,
    lambda1: f64,
    y_penalty: &PenaltySpec,
    r: usize,
) -> Result<FittedCCA> {
    fit_cca(
        x,
        y,
        &PenaltySpec::Ridge { lambda: lambda1 },
        y_penalty,
        FitOptions::with_ncomp(r),
    )
}

/// Partial ridge CCA: `x1` is penalized by `lambda1`, `x2` is left
/// unpenalized and must be tall with full column rank. Coefficients are
/// returned in the column order `[x1 | x2]`.
pub fn prcca_kernel_fit(
    x1: &DataMatrix,
    x2: Option<&DataMatrix>,
    y: &DataMatrix,
    lambda1: f64,
    y_penalty: &PenaltySpec,
    r: usize,
) -> Result<FittedCCA> {
    let Some(x2) = x2 else {
        return rcca_kernel_fit(x1, y, lambda1, y_penalty, r);
    };
    if x1.nrows() != x2.nrows() {
        return Err(CcaError::Shape("penalized and unpenalized blocks differ in rows".into()));
    }
    x1.require_centered("x1")?;
    x2.require_centered("x2")?;
    let (p1, p2) = (x1.ncols(), x2.ncols());
    let mut values = DMatrix::zeros(x1.nrows(), p1 + p2);
    values.columns_mut(0, p1).copy_from(x1.values());
    values.columns_mut(p1, p2).copy_from(x2.values());
    let names = x1
        .column_names()
        .iter()
        .chain(x2.column_names())
        .cloned()
        .collect();
    let x = DataMatrix::new(values, names)?.mark_centered();
    let spec = PenaltySpec::Partial {
        lambda: lambda1,
        penalized: (0..p1).collect(),
    };
    fit_cca(&x, y, &spec, y_penalty, FitOptions::with_ncomp(r))
}

/// General-penalty CCA through [`general_reduce`] followed by the ridge or
/// partial kernel reduction.
pub fn general_fit(
    x: &DataMatrix,
    y: &DataMatrix,
    kx: &DMatrix<f64>,
    y_penalty: &PenaltySpec,
    r: usize,
) -> Result<FittedCCA> {
    fit_cca(
        x,
        y,
        &PenaltySpec::General { matrix: kx.clone() },
        y_penalty,
        FitOptions::with_ncomp(r),
    )
}

/// Group-penalized CCA along the requested path.
#[allow(clippy::too_many_arguments)]
pub fn grcca_fit(
    x: &DataMatrix,
    y: &DataMatrix,
    groups: &GroupStructure,
    lambda1: f64,
    mu1: f64,
    y_penalty: &PenaltySpec,
    r: usize,
    path: GrccaPath,
) -> Result<FittedCCA> {
    if lambda1 <= 0.0 {
        return Err(CcaError::UnsupportedPenalty(
            "group penalty requires lambda > 0".into(),
        ));
    }
    let spec = PenaltySpec::Group {
        lambda: lambda1,
        mu: mu1,
        groups: groups.clone(),
    };
    fit_cca(
        x,
        y,
        &spec,
        y_penalty,
        FitOptions {
            ncomp: r,
            grcca_path: path,
        },
    )
}

/// Which hyperparameter a coefficient path varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathAxis {
    Lambda,
    Mu,
}

/// One grid point of a coefficient path. Failed fits keep their reason.
#[derive(Debug, Clone)]
pub struct PathPoint {
    pub lambda: f64,
    pub mu: f64,
    pub fit: std::result::Result<FittedCCA, String>,
}

/// Fits the X-side family along an ascending grid. Grid points run in
/// parallel; signs are aligned afterwards so each component has positive
/// cosine with the previous successful point.
#[allow(clippy::too_many_arguments)]
pub fn coefficient_path(
    x: &DataMatrix,
    y: &DataMatrix,
    family: &PenaltyFamily,
    y_penalty: &PenaltySpec,
    axis: PathAxis,
    grid: &[f64],
    fixed: f64,
    opts: FitOptions,
) -> Result<Vec<PathPoint>> {
    if grid.is_empty() {
        return Err(CcaError::Domain("coefficient path grid is empty".into()));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(CcaError::Domain("coefficient path grid must be strictly ascending".into()));
    }
    let mut points: Vec<PathPoint> = grid
        .par_iter()
        .map(|&g| {
            let (lambda, mu) = match axis {
                PathAxis::Lambda => (g, fixed),
                PathAxis::Mu => (fixed, g),
            };
            let spec = family.at(lambda, mu);
            let fit = fit_cca(x, y, &spec, y_penalty, opts).map_err(|e| e.to_string());
            if let Err(reason) = &fit {
                log::warn!("path point lambda={lambda} mu={mu} failed: {reason}");
            }
            PathPoint { lambda, mu, fit }
        })
        .collect();

    let mut previous: Option<DMatrix<f64>> = None;
    for point in &mut points {
        if let Ok(fit) = &mut point.fit {
            if let Some(prev) = &previous {
                for c in 0..fit.ncomp() {
                    if fit.alpha.column(c).dot(&prev.column(c)) < 0.0 {
                        fit.flip(c);
                    }
                }
            }
            previous = Some(fit.alpha.clone());
        }
    }
    Ok(points)
}

/// Writes the first-component coefficients of a path in long format:
/// `lambda,mu,feature,group,coefficient`.
pub fn write_path_csv<W: std::io::Write>(
    points: &[PathPoint],
    groups: Option<&GroupStructure>,
    out: W,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["lambda", "mu", "feature", "group", "coefficient"])?;
    for point in points {
        let Ok(fit) = &point.fit else { continue };
        for (i, name) in fit.x_names().iter().enumerate() {
            let group = groups.map_or(String::new(), |g| g.names()[g.group_of(i)].clone());
            wtr.write_record([
                point.lambda.to_string(),
                point.mu.to_string(),
                name.clone(),
                group,
                fit.alpha()[(i, 0)].to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::center_columns;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random(n: usize, m: usize, seed: u64) -> DataMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = DMatrix::from_fn(n, m, |_, _| StandardNormal.sample(&mut rng));
        center_columns(&DataMatrix::with_prefix(v, "v").unwrap())
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn kernel_matches_direct_when_tall() {
        let x = random(30, 4, 1);
        let y = random(30, 3, 2);
        let ridge = PenaltySpec::Ridge { lambda: 0.2 };
        let k = rcca_kernel_fit(&x, &y, 0.2, &PenaltySpec::None, 3).unwrap();
        let d = fit_direct(&x, &y, &ridge, &PenaltySpec::None, 3).unwrap();
        assert!(close(k.correlations(), d.correlations(), 1e-10));
        assert!((k.alpha() - d.alpha()).amax() < 1e-9);
        assert_eq!(k.method(), ReductionKind::RccaKernel);
    }

    #[test]
    fn kernel_matches_direct_when_wide() {
        let x = random(20, 200, 3);
        let y = random(20, 3, 4);
        let k = rcca_kernel_fit(&x, &y, 0.5, &PenaltySpec::None, 3).unwrap();
        let d = fit_direct(&x, &y, &PenaltySpec::Ridge { lambda: 0.5 }, &PenaltySpec::None, 3)
            .unwrap();
        assert!(close(k.correlations(), d.correlations(), 1e-8));
        assert!(k.peak_square_dim() <= 20);
    }

    #[test]
    fn prcca_with_orthogonal_blocks_has_zero_regression() {
        // x2 spans a direction orthogonal to every column of x1
        let base = random(12, 6, 5);
        let mut x1v = base.values().clone();
        let x2v = DMatrix::from_fn(12, 1, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 });
        let proj = &x2v * (x2v.tr_mul(&x1v) / 12.0);
        x1v -= proj;
        let x1 = center_columns(&DataMatrix::with_prefix(x1v, "a").unwrap());
        let x2 = center_columns(&DataMatrix::with_prefix(x2v.clone(), "b").unwrap());
        let svd = linalg::thin_svd(x2.values()).unwrap();
        let b = svd.v * svd.u.tr_mul(x1.values());
        assert!(b.amax() < 1e-12);
    }

    #[test]
    fn prcca_matches_direct_block_penalty() {
        let x1 = random(15, 60, 6);
        let x2 = random(15, 4, 7);
        let y = random(15, 2, 8);
        let k = prcca_kernel_fit(&x1, Some(&x2), &y, 1.0, &PenaltySpec::None, 2).unwrap();
        let mut xv = DMatrix::zeros(15, 64);
        xv.columns_mut(0, 60).copy_from(x1.values());
        xv.columns_mut(60, 4).copy_from(x2.values());
        let x = center_columns(&DataMatrix::with_prefix(xv, "x").unwrap());
        let spec = PenaltySpec::partial_from_unpenalized(1.0, &[60, 61, 62, 63], 64);
        let d = fit_direct(&x, &y, &spec, &PenaltySpec::None, 2).unwrap();
        assert!(close(k.correlations(), d.correlations(), 1e-8));
        assert!((k.alpha() - d.alpha()).amax() < 1e-7 * d.alpha().amax());
    }

    #[test]
    fn prcca_identifiability_errors() {
        let x1 = random(6, 10, 9);
        let x2 = random(6, 6, 10);
        let y = random(6, 1, 11);
        assert!(matches!(
            prcca_kernel_fit(&x1, Some(&x2), &y, 1.0, &PenaltySpec::None, 1),
            Err(CcaError::Identifiability(_))
        ));
        let dup = x1.select_columns(&[0, 0]).unwrap();
        assert!(matches!(
            prcca_kernel_fit(&x1, Some(&dup), &y, 1.0, &PenaltySpec::None, 1),
            Err(CcaError::Identifiability(_))
        ));
    }

    #[test]
    fn prcca_without_unpenalized_block_is_rcca() {
        let x = random(10, 25, 12);
        let y = random(10, 2, 13);
        let a = prcca_kernel_fit(&x, None, &y, 0.3, &PenaltySpec::None, 2).unwrap();
        let b = rcca_kernel_fit(&x, &y, 0.3, &PenaltySpec::None, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn general_reduce_isotropic_case() {
        let x = random(8, 5, 14);
        let u = linalg::sym_eigen(&DMatrix::from_fn(5, 5, |i, j| (i + j) as f64)).1;
        let k = &u * DMatrix::identity(5, 5) * 4.0 * u.transpose();
        let fact = factor_general_penalty(&k).unwrap();
        let red = general_reduce(&x, &fact).unwrap();
        assert_eq!(red.residual, ResidualPenalty::Ridge);
        let expected = x.values() * match &fact.basis {
            Basis::Dense(u) => u.clone() / 2.0,
            _ => unreachable!(),
        };
        assert!((red.data.values() - expected).amax() < 1e-12);
    }

    #[test]
    fn general_reduce_single_zero_eigenvalue() {
        let x = random(8, 4, 15);
        let k = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0, 2.0, 3.0]));
        let fact = factor_general_penalty(&k).unwrap();
        let red = general_reduce(&x, &fact).unwrap();
        match &red.residual {
            ResidualPenalty::Partial { unpenalized } => assert_eq!(unpenalized.len(), 1),
            other => panic!("unexpected {other:?}"),
        }
        // recovery reproduces variates
        let a = DMatrix::from_fn(4, 2, |i, j| (i + 2 * j) as f64 - 1.5);
        let alpha = red.recover(&a);
        assert!((x.values() * alpha - red.data.values() * a).amax() < 1e-10);
    }

    #[test]
    fn grcca_paths_agree_and_reduce_to_rcca() {
        let x = random(12, 30, 16);
        let y = random(12, 2, 17);
        let groups = GroupStructure::from_sizes(&[6, 6, 6, 6, 6]).unwrap();
        for mu in [0.0, 0.3] {
            let e = grcca_fit(&x, &y, &groups, 2.0, mu, &PenaltySpec::None, 2, GrccaPath::Eigen)
                .unwrap();
            let t = grcca_fit(&x, &y, &groups, 2.0, mu, &PenaltySpec::None, 2, GrccaPath::Extend)
                .unwrap();
            assert!(close(e.correlations(), t.correlations(), 1e-8));
            assert_eq!(e.method(), ReductionKind::GrccaEigen);
            assert_eq!(t.method(), ReductionKind::GrccaExtend);
        }
        let g = grcca_fit(&x, &y, &groups, 0.7, 0.7, &PenaltySpec::None, 2, GrccaPath::Eigen)
            .unwrap();
        let r = rcca_kernel_fit(&x, &y, 0.7, &PenaltySpec::None, 2).unwrap();
        assert!(close(g.correlations(), r.correlations(), 1e-9));
        assert!(matches!(
            grcca_fit(&x, &y, &groups, 0.0, 1.0, &PenaltySpec::None, 1, GrccaPath::Eigen),
            Err(CcaError::UnsupportedPenalty(_))
        ));
    }

    #[test]
    fn auto_path_heuristic() {
        assert_eq!(GrccaPath::Auto.resolve(10, 15, 5), GrccaPath::Extend);
        assert_eq!(GrccaPath::Auto.resolve(10, 1000, 5), GrccaPath::Eigen);
        assert_eq!(GrccaPath::Eigen.resolve(10, 15, 5), GrccaPath::Eigen);
    }

    #[test]
    fn uncentered_input_is_rejected() {
        let raw = DataMatrix::from_row_slice(3, 1, &[1.0, 2.0, 4.0]).unwrap();
        let c = center_columns(&raw);
        assert!(matches!(
            rcca_kernel_fit(&raw, &c, 1.0, &PenaltySpec::None, 1),
            Err(CcaError::State(_))
        ));
    }

    #[test]
    fn path_rejects_unsorted_grid() {
        let x = random(8, 3, 18);
        let y = random(8, 1, 19);
        let err = coefficient_path(
            &x,
            &y,
            &PenaltyFamily::Ridge,
            &PenaltySpec::None,
            PathAxis::Lambda,
            &[1.0, 0.1],
            0.0,
            FitOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, CcaError::Domain(_)));
    }

    #[test]
    fn path_signs_are_continuous() {
        let x = random(10, 12, 20);
        let y = random(10, 2, 21);
        let grid: Vec<f64> = (-3..=3).map(|e| 10f64.powi(e)).collect();
        let points = coefficient_path(
            &x,
            &y,
            &PenaltyFamily::Ridge,
            &PenaltySpec::None,
            PathAxis::Lambda,
            &grid,
            0.0,
            FitOptions::default(),
        )
        .unwrap();
        for w in points.windows(2) {
            let a = w[0].fit.as_ref().unwrap().alpha().column(0).clone_owned();
            let b = w[1].fit.as_ref().unwrap().alpha().column(0).clone_owned();
            assert!(a.dot(&b) > 0.0);
        }
        let mut buf = Vec::new();
        write_path_csv(&points, None, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + grid.len() * 12);
    }
}
