//! Penalty matrices for the ridge, partial, group and general methods and
//! their factorizations `K = U D U^T`.
//!
//! The group penalty `lambda (I - C) + mu C`, with `C` block-diagonal of
//! `11^T / p_k`, is factored analytically: each block uses the unit vector
//! `1/sqrt(p_k)` followed by Helmert contrasts. These bases are applied
//! implicitly in `O(n p)` and are never materialized as `p x p` arrays.

use nalgebra::{DMatrix, DVector, DVectorView};
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{CcaError, Result};
use crate::linalg;

/// A partition of feature indices into named, non-empty groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawGroups", into = "RawGroups")]
pub struct GroupStructure {
    assignments: Vec<usize>,
    names: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct RawGroups {
    assignments: Vec<usize>,
    names: Vec<String>,
}

impl TryFrom<RawGroups> for GroupStructure {
    type Error = CcaError;

    fn try_from(raw: RawGroups) -> Result<Self> {
        GroupStructure::from_assignments(raw.assignments, raw.names)
    }
}

impl From<GroupStructure> for RawGroups {
    fn from(g: GroupStructure) -> Self {
        RawGroups {
            assignments: g.assignments,
            names: g.names,
        }
    }
}

impl GroupStructure {
    pub fn from_assignments(assignments: Vec<usize>, names: Vec<String>) -> Result<Self> {
        if assignments.is_empty() {
            return Err(CcaError::Shape("group structure has no features".into()));
        }
        let mut counts = vec![0usize; names.len()];
        for &g in &assignments {
            let slot = counts.get_mut(g).ok_or_else(|| {
                CcaError::Shape(format!("group id {g} exceeds {} names", names.len()))
            })?;
            *slot += 1;
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            return Err(CcaError::Shape(format!("group '{}' is empty", names[empty])));
        }
        Ok(Self { assignments, names })
    }

    /// Contiguous groups of the given sizes, named `g1..gK`.
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        let assignments = sizes
            .iter()
            .enumerate()
            .flat_map(|(k, &s)| std::iter::repeat_n(k, s))
            .collect();
        let names = (1..=sizes.len()).map(|k| format!("g{k}")).collect();
        Self::from_assignments(assignments, names)
    }

    pub fn n_features(&self) -> usize {
        self.assignments.len()
    }

    pub fn n_groups(&self) -> usize {
        self.names.len()
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn group_of(&self, feature: usize) -> usize {
        self.assignments[feature]
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_groups()];
        for &g in &self.assignments {
            sizes[g] += 1;
        }
        sizes
    }

    /// Feature indices of each group, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.n_groups()];
        for (i, &g) in self.assignments.iter().enumerate() {
            members[g].push(i);
        }
        members
    }

    /// Per-group means of a coefficient vector.
    pub fn group_means(&self, v: &[f64]) -> Vec<f64> {
        self.members()
            .iter()
            .map(|idx| idx.iter().map(|&i| v[i]).sum::<f64>() / idx.len() as f64)
            .collect()
    }
}

/// Declarative description of an l2 penalty on one side of the problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PenaltySpec {
    None,
    Ridge {
        lambda: f64,
    },
    /// `lambda` applies to the `penalized` indices only; the complement is
    /// the unpenalized block.
    Partial {
        lambda: f64,
        penalized: Vec<usize>,
    },
    Group {
        lambda: f64,
        mu: f64,
        groups: GroupStructure,
    },
    General {
        matrix: DMatrix<f64>,
    },
}

impl PenaltySpec {
    /// Partial penalty from the unpenalized indices of an `m`-column matrix.
    pub fn partial_from_unpenalized(lambda: f64, unpenalized: &[usize], m: usize) -> Self {
        let penalized = (0..m).filter(|i| !unpenalized.contains(i)).collect();
        PenaltySpec::Partial { lambda, penalized }
    }

    pub fn lambda(&self) -> Option<f64> {
        match self {
            PenaltySpec::Ridge { lambda }
            | PenaltySpec::Partial { lambda, .. }
            | PenaltySpec::Group { lambda, .. } => Some(*lambda),
            _ => None,
        }
    }

    pub fn mu(&self) -> Option<f64> {
        match self {
            PenaltySpec::Group { mu, .. } => Some(*mu),
            _ => None,
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        let check = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(CcaError::Domain(format!("{name} must be finite and >= 0, got {v}")))
            }
        };
        match self {
            PenaltySpec::None => Ok(()),
            PenaltySpec::Ridge { lambda } => check("lambda", *lambda),
            PenaltySpec::Partial { lambda, penalized } => {
                check("lambda", *lambda)?;
                let mut seen = vec![false; m];
                for &i in penalized {
                    if i >= m || seen[i] {
                        return Err(CcaError::Shape(format!(
                            "penalized index {i} is out of range or repeated for {m} columns"
                        )));
                    }
                    seen[i] = true;
                }
                Ok(())
            }
            PenaltySpec::Group { lambda, mu, groups } => {
                check("lambda", *lambda)?;
                check("mu", *mu)?;
                if groups.n_features() != m {
                    return Err(CcaError::Shape(format!(
                        "group structure covers {} features, matrix has {m}",
                        groups.n_features()
                    )));
                }
                Ok(())
            }
            PenaltySpec::General { matrix } => {
                if matrix.shape() != (m, m) {
                    return Err(CcaError::Shape(format!(
                        "penalty matrix is {}x{}, expected {m}x{m}",
                        matrix.nrows(),
                        matrix.ncols()
                    )));
                }
                if (matrix - matrix.transpose()).amax() > 1e-10 {
                    return Err(CcaError::Domain("penalty matrix is not symmetric".into()));
                }
                let (vals, _) = linalg::sym_eigen(matrix);
                let tol = 1e-10 * matrix.trace().abs().max(1.0);
                if vals[0] < -tol {
                    return Err(CcaError::Domain(format!(
                        "penalty matrix is not positive semi-definite (min eigenvalue {:.3e})",
                        vals[0]
                    )));
                }
                Ok(())
            }
        }
    }

    /// `a^T K b` evaluated without forming `K`.
    pub fn bilinear(&self, a: DVectorView<'_, f64>, b: DVectorView<'_, f64>) -> f64 {
        match self {
            PenaltySpec::None => 0.0,
            PenaltySpec::Ridge { lambda } => lambda * a.dot(&b),
            PenaltySpec::Partial { lambda, penalized } => {
                lambda * penalized.iter().map(|&i| a[i] * b[i]).sum::<f64>()
            }
            PenaltySpec::Group { lambda, mu, groups } => {
                let mut between = 0.0;
                for idx in groups.members() {
                    let pk = idx.len() as f64;
                    let am = idx.iter().map(|&i| a[i]).sum::<f64>() / pk;
                    let bm = idx.iter().map(|&i| b[i]).sum::<f64>() / pk;
                    between += pk * am * bm;
                }
                lambda * (a.dot(&b) - between) + mu * between
            }
            PenaltySpec::General { matrix } => (matrix * b).dot(&a),
        }
    }
}

/// A penalty shape with its levels left open, so one structure can be
/// instantiated at every point of a hyperparameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PenaltyFamily {
    None,
    Ridge,
    Partial { penalized: Vec<usize> },
    Group { groups: GroupStructure },
    /// `lambda * matrix`.
    General { matrix: DMatrix<f64> },
}

impl PenaltyFamily {
    pub fn partial_from_unpenalized(unpenalized: &[usize], m: usize) -> Self {
        PenaltyFamily::Partial {
            penalized: (0..m).filter(|i| !unpenalized.contains(i)).collect(),
        }
    }

    /// Whether `mu` changes the penalty.
    pub fn uses_mu(&self) -> bool {
        matches!(self, PenaltyFamily::Group { .. })
    }

    pub fn uses_lambda(&self) -> bool {
        !matches!(self, PenaltyFamily::None)
    }

    pub fn at(&self, lambda: f64, mu: f64) -> PenaltySpec {
        match self {
            PenaltyFamily::None => PenaltySpec::None,
            PenaltyFamily::Ridge => PenaltySpec::Ridge { lambda },
            PenaltyFamily::Partial { penalized } => PenaltySpec::Partial {
                lambda,
                penalized: penalized.clone(),
            },
            PenaltyFamily::Group { groups } => PenaltySpec::Group {
                lambda,
                mu,
                groups: groups.clone(),
            },
            PenaltyFamily::General { matrix } => PenaltySpec::General {
                matrix: matrix * lambda,
            },
        }
    }
}

/// Dense `m x m` penalty matrix for `spec`.
pub fn build_penalty_matrix(spec: &PenaltySpec, m: usize) -> Result<DMatrix<f64>> {
    spec.validate(m)?;
    Ok(match spec {
        PenaltySpec::None => DMatrix::zeros(m, m),
        PenaltySpec::Ridge { lambda } => DMatrix::identity(m, m) * *lambda,
        PenaltySpec::Partial { lambda, penalized } => {
            let mut k = DMatrix::zeros(m, m);
            for &i in penalized {
                k[(i, i)] = *lambda;
            }
            k
        }
        PenaltySpec::Group { lambda, mu, groups } => {
            let mut k = DMatrix::identity(m, m) * *lambda;
            for idx in groups.members() {
                let w = (mu - lambda) / idx.len() as f64;
                for &i in &idx {
                    for &j in &idx {
                        k[(i, j)] += w;
                    }
                }
            }
            k
        }
        PenaltySpec::General { matrix } => matrix.clone(),
    })
}

/// Orthonormal basis of the complement of the constant vector in `R^m`,
/// built from normalized Helmert contrasts. Column `j` (1-based) is
/// `(-1, ..., -1, j, 0, ..., 0) / sqrt(j (j + 1))` with `j` leading `-1`s.
pub fn helmert_complement(m: usize) -> Result<DMatrix<f64>> {
    if m < 2 {
        return Err(CcaError::Domain(format!(
            "Helmert complement needs m >= 2, got {m}"
        )));
    }
    let mut h = DMatrix::zeros(m, m - 1);
    for j in 1..m {
        let norm = ((j * (j + 1)) as f64).sqrt();
        for i in 0..j {
            h[(i, j - 1)] = -1.0 / norm;
        }
        h[(j, j - 1)] = j as f64 / norm;
    }
    Ok(h)
}

/// Basis `U` of a factorization `K = U D U^T`.
#[derive(Debug, Clone, PartialEq)]
pub enum Basis {
    /// Explicit orthogonal matrix.
    Dense(DMatrix<f64>),
    /// Block-diagonal orthogonal basis: per group (in group order) the unit
    /// mean direction followed by its Helmert complement.
    GroupHelmert(GroupStructure),
    /// Row-orthogonal `p x (p + K)` basis: per group the centering
    /// projector `I - C` followed by the mean direction.
    GroupExtension(GroupStructure),
}

impl Basis {
    pub fn nrows(&self) -> usize {
        match self {
            Basis::Dense(u) => u.nrows(),
            Basis::GroupHelmert(g) | Basis::GroupExtension(g) => g.n_features(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            Basis::Dense(u) => u.ncols(),
            Basis::GroupHelmert(g) => g.n_features(),
            Basis::GroupExtension(g) => g.n_features() + g.n_groups(),
        }
    }

    /// `X U` for an `n x p` matrix `X`.
    pub fn right_apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Basis::Dense(u) => x * u,
            Basis::GroupHelmert(groups) => {
                let n = x.nrows();
                let mut out = DMatrix::zeros(n, self.ncols());
                let mut col = 0;
                for idx in groups.members() {
                    let mean_col = col;
                    col += 1;
                    let mut cum = DVector::zeros(n);
                    for (j, &f) in idx.iter().enumerate() {
                        let xj = x.column(f);
                        if j >= 1 {
                            let norm = ((j * (j + 1)) as f64).sqrt();
                            let mut target = out.column_mut(col);
                            target.copy_from(&xj);
                            target *= j as f64;
                            target -= &cum;
                            target /= norm;
                            col += 1;
                        }
                        cum += xj;
                    }
                    cum /= (idx.len() as f64).sqrt();
                    out.column_mut(mean_col).copy_from(&cum);
                }
                out
            }
            Basis::GroupExtension(groups) => {
                let n = x.nrows();
                let mut out = DMatrix::zeros(n, self.ncols());
                let mut col = 0;
                for idx in groups.members() {
                    let pk = idx.len() as f64;
                    let mut mean = DVector::zeros(n);
                    for &f in &idx {
                        mean += x.column(f);
                    }
                    mean /= pk;
                    for &f in &idx {
                        out.column_mut(col).copy_from(&(x.column(f) - &mean));
                        col += 1;
                    }
                    out.column_mut(col).copy_from(&(mean * pk.sqrt()));
                    col += 1;
                }
                out
            }
        }
    }

    /// `U A` for a `ncols x r` coefficient matrix `A`.
    pub fn apply(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(a.nrows(), self.ncols(), "basis/coefficient shape mismatch");
        match self {
            Basis::Dense(u) => u * a,
            Basis::GroupHelmert(groups) => {
                let mut out = DMatrix::zeros(self.nrows(), a.ncols());
                for c in 0..a.ncols() {
                    let mut row = 0;
                    for idx in groups.members() {
                        let m = idx.len();
                        let coef = a.column(c).rows(row, m).clone_owned();
                        row += m;
                        let base = coef[0] / (m as f64).sqrt();
                        let scaled: Vec<f64> = (1..m)
                            .map(|j| coef[j] / ((j * (j + 1)) as f64).sqrt())
                            .collect();
                        // suffix[i] = sum of scaled contrasts j > i
                        let mut suffix = 0.0;
                        for i in (0..m).rev() {
                            let own = if i >= 1 { i as f64 * scaled[i - 1] } else { 0.0 };
                            out[(idx[i], c)] = base + own - suffix;
                            if i >= 1 {
                                suffix += scaled[i - 1];
                            }
                        }
                    }
                }
                out
            }
            Basis::GroupExtension(groups) => {
                let mut out = DMatrix::zeros(self.nrows(), a.ncols());
                for c in 0..a.ncols() {
                    let mut row = 0;
                    for idx in groups.members() {
                        let m = idx.len();
                        let dev = a.view((row, c), (m, 1));
                        let mean_coef = a[(row + m, c)];
                        row += m + 1;
                        let shift = mean_coef / (m as f64).sqrt() - dev.sum() / m as f64;
                        for (k, &f) in idx.iter().enumerate() {
                            out[(f, c)] = dev[k] + shift;
                        }
                    }
                }
                out
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        self.apply(&DMatrix::identity(self.ncols(), self.ncols()))
    }
}

/// `K = U D U^T` with nonnegative `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyFactorization {
    pub basis: Basis,
    pub diag: DVector<f64>,
    pub zero_multiplicity: usize,
    zero_tol: f64,
}

impl PenaltyFactorization {
    fn new(basis: Basis, diag: DVector<f64>, zero_tol: f64) -> Self {
        let zero_multiplicity = diag.iter().filter(|&&d| d <= zero_tol).count();
        Self {
            basis,
            diag,
            zero_multiplicity,
            zero_tol,
        }
    }

    pub fn is_zero(&self, i: usize) -> bool {
        self.diag[i] <= self.zero_tol
    }

    pub fn zero_indices(&self) -> Vec<usize> {
        (0..self.diag.len()).filter(|&i| self.is_zero(i)).collect()
    }

    /// Dense `U D U^T`; meant for checks on small problems.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let u = self.basis.to_dense();
        let mut ud = u.clone();
        for (mut col, d) in ud.column_iter_mut().zip(self.diag.iter()) {
            col *= *d;
        }
        ud * u.transpose()
    }
}

fn group_zero_tol(lambda: f64, mu: f64) -> f64 {
    1e-12 * (1.0 + lambda + mu)
}

fn group_params(spec: &PenaltySpec) -> Result<(f64, f64, &GroupStructure)> {
    match spec {
        PenaltySpec::Group { lambda, mu, groups } => {
            spec.validate(groups.n_features())?;
            if *lambda <= 0.0 {
                return Err(CcaError::UnsupportedPenalty(
                    "group penalty requires lambda > 0 (within-group homogeneity)".into(),
                ));
            }
            Ok((*lambda, *mu, groups))
        }
        other => Err(CcaError::UnsupportedPenalty(format!(
            "expected a group penalty, got {other:?}"
        ))),
    }
}

/// Analytic eigendecomposition of the group penalty: per group `mu` once
/// and `lambda` with multiplicity `p_k - 1`.
pub fn factor_group_penalty(spec: &PenaltySpec) -> Result<PenaltyFactorization> {
    let (lambda, mu, groups) = group_params(spec)?;
    let diag: Vec<f64> = groups
        .sizes()
        .iter()
        .flat_map(|&pk| std::iter::once(mu).chain(std::iter::repeat_n(lambda, pk - 1)))
        .collect();
    Ok(PenaltyFactorization::new(
        Basis::GroupHelmert(groups.clone()),
        DVector::from_vec(diag),
        group_zero_tol(lambda, mu),
    ))
}

/// Row-orthogonal factorization behind the feature-extension path: per
/// group `lambda` repeated `p_k` times, then `mu`.
pub fn factor_group_extension(spec: &PenaltySpec) -> Result<PenaltyFactorization> {
    let (lambda, mu, groups) = group_params(spec)?;
    let diag: Vec<f64> = groups
        .sizes()
        .iter()
        .flat_map(|&pk| std::iter::repeat_n(lambda, pk).chain(std::iter::once(mu)))
        .collect();
    Ok(PenaltyFactorization::new(
        Basis::GroupExtension(groups.clone()),
        DVector::from_vec(diag),
        group_zero_tol(lambda, mu),
    ))
}

/// Numerical eigendecomposition of an arbitrary PSD penalty matrix.
pub fn factor_general_penalty(matrix: &DMatrix<f64>) -> Result<PenaltyFactorization> {
    let spec = PenaltySpec::General {
        matrix: matrix.clone(),
    };
    spec.validate(matrix.nrows())?;
    let (vals, vecs) = linalg::sym_eigen(matrix);
    let top = vals.iter().cloned().fold(0.0, f64::max);
    let tol = 1e-10 * (1.0 + top);
    let diag = vals.map(|v| v.max(0.0));
    Ok(PenaltyFactorization::new(Basis::Dense(vecs), diag, tol))
}

/// Extended feature matrix of width `p + K`: per group the deviations from
/// the row-wise group mean scaled by `1/sqrt(a)`, followed by the group
/// mean scaled by `sqrt(p_k / b)`.
pub fn extend_features(
    x: &DataMatrix,
    groups: &GroupStructure,
    a: f64,
    b: f64,
) -> Result<DataMatrix> {
    if groups.n_features() != x.ncols() {
        return Err(CcaError::Shape(format!(
            "group structure covers {} features, matrix has {}",
            groups.n_features(),
            x.ncols()
        )));
    }
    if !(a > 0.0 && b > 0.0) {
        return Err(CcaError::Domain(format!(
            "extension scales must be positive, got a={a}, b={b}"
        )));
    }
    let xv = x.values();
    let n = x.nrows();
    let width = x.ncols() + groups.n_groups();
    let mut out = DMatrix::zeros(n, width);
    let mut names = Vec::with_capacity(width);
    let mut col = 0;
    for (k, idx) in groups.members().iter().enumerate() {
        let pk = idx.len() as f64;
        for i in 0..n {
            let mean = idx.iter().map(|&f| xv[(i, f)]).sum::<f64>() / pk;
            for (j, &f) in idx.iter().enumerate() {
                out[(i, col + j)] = (xv[(i, f)] - mean) / a.sqrt();
            }
            out[(i, col + idx.len())] = (pk / b).sqrt() * mean;
        }
        names.extend(idx.iter().map(|&f| x.column_names()[f].clone()));
        names.push(format!("{}:mean", groups.names()[k]));
        col += idx.len() + 1;
    }
    let ext = DataMatrix::new(out, names)?;
    Ok(if x.is_centered() { ext.mark_centered() } else { ext })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).amax()
    }

    #[test]
    fn group_penalty_special_cases() {
        let g = GroupStructure::from_sizes(&[2, 3]).unwrap();
        let spec = PenaltySpec::Group {
            lambda: 0.7,
            mu: 0.7,
            groups: g.clone(),
        };
        let k = build_penalty_matrix(&spec, 5).unwrap();
        assert!(max_diff(&k, &(DMatrix::identity(5, 5) * 0.7)) < 1e-15);

        let one = GroupStructure::from_sizes(&[2]).unwrap();
        let spec = PenaltySpec::Group {
            lambda: 2.0,
            mu: 4.0,
            groups: one,
        };
        let k = build_penalty_matrix(&spec, 2).unwrap();
        assert_eq!(k, DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 3.0]));

        let spec = PenaltySpec::Group {
            lambda: 1.0,
            mu: 0.0,
            groups: g,
        };
        let (vals, _) = linalg::sym_eigen(&build_penalty_matrix(&spec, 5).unwrap());
        let zeros = vals.iter().filter(|v| v.abs() < 1e-12).count();
        let ones = vals.iter().filter(|v| (*v - 1.0).abs() < 1e-12).count();
        assert_eq!((zeros, ones), (2, 3));
    }

    #[test]
    fn partial_and_ridge_matrices() {
        let spec = PenaltySpec::partial_from_unpenalized(2.0, &[1], 3);
        let k = build_penalty_matrix(&spec, 3).unwrap();
        assert_eq!(k, DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.0, 2.0])));
        let bad = PenaltySpec::Ridge { lambda: -1.0 };
        assert!(build_penalty_matrix(&bad, 3).is_err());
        let g = GroupStructure::from_sizes(&[2]).unwrap();
        let spec = PenaltySpec::Group {
            lambda: 1.0,
            mu: 1.0,
            groups: g,
        };
        assert!(matches!(build_penalty_matrix(&spec, 3), Err(CcaError::Shape(_))));
    }

    #[test]
    fn general_penalty_must_be_psd() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let spec = PenaltySpec::General { matrix: m };
        assert!(matches!(spec.validate(2), Err(CcaError::Domain(_))));
    }

    #[test]
    fn helmert_small_cases() {
        let h = helmert_complement(2).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!((h[(0, 0)].abs() - s).abs() < 1e-15);
        assert!((h[(0, 0)] + h[(1, 0)]).abs() < 1e-15);

        let h = helmert_complement(4).unwrap();
        let ones = DVector::from_element(4, 1.0);
        assert!((h.tr_mul(&ones)).amax() < 1e-12);
        assert!(max_diff(&h.tr_mul(&h), &DMatrix::identity(3, 3)) < 1e-12);
        assert!(matches!(helmert_complement(1), Err(CcaError::Domain(_))));
    }

    #[test]
    fn helmert_large_is_orthogonal_completion() {
        let m = 100;
        let h = helmert_complement(m).unwrap();
        let mut full = DMatrix::zeros(m, m);
        full.column_mut(0).fill(1.0 / (m as f64).sqrt());
        full.columns_mut(1, m - 1).copy_from(&h);
        assert!(max_diff(&full.tr_mul(&full), &DMatrix::identity(m, m)) < 1e-10);
        let projector = DMatrix::identity(m, m) - DMatrix::from_element(m, m, 1.0 / m as f64);
        assert!(max_diff(&(&h * h.transpose()), &projector) < 1e-10);
    }

    #[test]
    fn implicit_helmert_matches_dense() {
        let g = GroupStructure::from_assignments(
            vec![0, 1, 0, 2, 1, 0, 0],
            vec!["a".into(), "b".into(), "c".into()],
        )
        .unwrap();
        let basis = Basis::GroupHelmert(g.clone());
        let u = basis.to_dense();
        assert!(max_diff(&u.tr_mul(&u), &DMatrix::identity(7, 7)) < 1e-12);
        // Group "a" occupies the first four basis columns.
        let members = &g.members()[0];
        let h = helmert_complement(4).unwrap();
        for (r, &f) in members.iter().enumerate() {
            assert!((u[(f, 0)] - 0.5).abs() < 1e-15);
            for c in 0..3 {
                assert!((u[(f, c + 1)] - h[(r, c)]).abs() < 1e-15);
            }
        }
        let x = DMatrix::from_fn(3, 7, |i, j| ((i * 7 + j) as f64 * 0.37).sin());
        assert!(max_diff(&basis.right_apply(&x), &(&x * &u)) < 1e-12);
    }

    #[test]
    fn extension_basis_has_orthonormal_rows() {
        let g = GroupStructure::from_sizes(&[3, 1, 2]).unwrap();
        let basis = Basis::GroupExtension(g);
        let u = basis.to_dense();
        assert_eq!(u.shape(), (6, 9));
        assert!(max_diff(&(&u * u.transpose()), &DMatrix::identity(6, 6)) < 1e-12);
        let x = DMatrix::from_fn(4, 6, |i, j| ((i * 5 + j) as f64 * 0.61).cos());
        assert!(max_diff(&basis.right_apply(&x), &(&x * &u)) < 1e-12);
    }

    #[test]
    fn group_factorization_spectrum() {
        let g = GroupStructure::from_sizes(&[2, 3]).unwrap();
        let f = factor_group_penalty(&PenaltySpec::Group {
            lambda: 1.0,
            mu: 1.0,
            groups: g,
        })
        .unwrap();
        assert!(f.diag.iter().all(|&d| d == 1.0));
        assert!(max_diff(&f.reconstruct(), &DMatrix::identity(5, 5)) < 1e-12);

        let g = GroupStructure::from_sizes(&[5]).unwrap();
        let spec = PenaltySpec::Group {
            lambda: 3.0,
            mu: 0.0,
            groups: g.clone(),
        };
        assert_eq!(factor_group_penalty(&spec).unwrap().zero_multiplicity, 1);
        let spec = PenaltySpec::Group {
            lambda: 0.0,
            mu: 1.0,
            groups: g,
        };
        assert!(matches!(
            factor_group_penalty(&spec),
            Err(CcaError::UnsupportedPenalty(_))
        ));
    }

    #[test]
    fn tiny_mu_is_not_zero() {
        let g = GroupStructure::from_sizes(&[3, 3]).unwrap();
        let spec = PenaltySpec::Group {
            lambda: 1.0,
            mu: 1e-9,
            groups: g,
        };
        assert_eq!(factor_group_penalty(&spec).unwrap().zero_multiplicity, 0);
    }

    #[test]
    fn extend_single_group() {
        let x = DataMatrix::from_row_slice(3, 2, &[1.0, 3.0, 2.0, 2.0, 0.0, 4.0]).unwrap();
        let g = GroupStructure::from_sizes(&[2]).unwrap();
        let e = extend_features(&x, &g, 1.0, 1.0).unwrap();
        assert_eq!(e.ncols(), 3);
        let expected = [
            [-1.0, 1.0, 2f64.sqrt() * 2.0],
            [0.0, 0.0, 2f64.sqrt() * 2.0],
            [-2.0, 2.0, 2f64.sqrt() * 2.0],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert!((e.values()[(i, j)] - expected[i][j]).abs() < 1e-14);
            }
        }
        assert_eq!(e.column_names()[2], "g1:mean");

        let flat = DataMatrix::from_row_slice(2, 2, &[1.0, 1.0, 3.0, 3.0]).unwrap();
        let e = extend_features(&flat, &g, 1.0, 1.0).unwrap();
        assert_eq!(e.values().columns(0, 2).amax(), 0.0);
    }

    #[test]
    fn bilinear_matches_dense() {
        let g = GroupStructure::from_sizes(&[3, 2]).unwrap();
        let specs = [
            PenaltySpec::Ridge { lambda: 0.3 },
            PenaltySpec::partial_from_unpenalized(1.5, &[0, 4], 5),
            PenaltySpec::Group {
                lambda: 2.0,
                mu: 0.25,
                groups: g,
            },
        ];
        let a = DVector::from_vec(vec![0.3, -1.0, 2.0, 0.5, 1.1]);
        let b = DVector::from_vec(vec![1.0, 0.2, -0.4, 0.9, -2.0]);
        for spec in &specs {
            let k = build_penalty_matrix(spec, 5).unwrap();
            let dense = a.dot(&(&k * &b));
            assert!((spec.bilinear(a.as_view(), b.as_view()) - dense).abs() < 1e-12);
        }
    }
}
