//! Observation matrices: CSV ingestion, centering, covariate adjustment,
//! effect-size screening and sample covariance blocks.
//!
//! All covariances use the `1/n` scale. Penalty grids tuned against a
//! `1/(n-1)` convention are shifted by the factor `n/(n-1)`.

use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{CcaError, Result};
use crate::penalty::GroupStructure;

/// An `n x m` matrix of observations with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
    column_names: Vec<String>,
    centered: bool,
    source: Option<String>,
}

impl DataMatrix {
    pub fn new(values: DMatrix<f64>, column_names: Vec<String>) -> Result<Self> {
        let (n, m) = values.shape();
        if n < 2 {
            return Err(CcaError::Shape(format!("need at least 2 observations, got {n}")));
        }
        if m < 1 {
            return Err(CcaError::Shape("need at least one column".into()));
        }
        if column_names.len() != m {
            return Err(CcaError::Shape(format!(
                "{} column names for {m} columns",
                column_names.len()
            )));
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(CcaError::Parse {
                row: idx % n,
                column: idx / n,
                message: "non-finite value".into(),
            });
        }
        Ok(Self {
            values,
            column_names,
            centered: false,
            source: None,
        })
    }

    /// Builds a matrix with generated column names `{prefix}1..{prefix}m`.
    pub fn with_prefix(values: DMatrix<f64>, prefix: &str) -> Result<Self> {
        let names = (1..=values.ncols()).map(|j| format!("{prefix}{j}")).collect();
        Self::new(values, names)
    }

    pub fn from_row_slice(n: usize, m: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * m {
            return Err(CcaError::Shape(format!(
                "{} values for a {n}x{m} matrix",
                data.len()
            )));
        }
        Self::with_prefix(DMatrix::from_row_slice(n, m, data), "V")
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = Some(source.into());
        self
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn source(&self) -> Option<&str> {
        self.source.as_deref()
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn column_means(&self) -> DVector<f64> {
        let n = self.nrows() as f64;
        DVector::from_iterator(
            self.ncols(),
            self.values.column_iter().map(|c| c.sum() / n),
        )
    }

    /// Subtracts the given per-column means. The result is only flagged as
    /// centered when the means were computed from this same matrix, which
    /// is what [`center_columns`] does.
    pub fn center_with(&self, means: &DVector<f64>) -> Result<DataMatrix> {
        if means.len() != self.ncols() {
            return Err(CcaError::Shape(format!(
                "{} means for {} columns",
                means.len(),
                self.ncols()
            )));
        }
        let mut values = self.values.clone();
        for (mut col, mean) in values.column_iter_mut().zip(means.iter()) {
            col.add_scalar_mut(-mean);
        }
        Ok(DataMatrix {
            values,
            column_names: self.column_names.clone(),
            centered: false,
            source: self.source.clone(),
        })
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<DataMatrix> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.nrows()) {
            return Err(CcaError::Shape(format!("row {bad} out of range")));
        }
        let values = self.values.select_rows(rows);
        let mut out = DataMatrix::new(values, self.column_names.clone())?;
        out.source = self.source.clone();
        Ok(out)
    }

    pub fn select_columns(&self, cols: &[usize]) -> Result<DataMatrix> {
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.ncols()) {
            return Err(CcaError::Shape(format!("column {bad} out of range")));
        }
        let values = self.values.select_columns(cols);
        let names = cols.iter().map(|&c| self.column_names[c].clone()).collect();
        let mut out = DataMatrix::new(values, names)?;
        out.centered = self.centered;
        out.source = self.source.clone();
        Ok(out)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    /// Divides every column by its sample standard deviation. Opt-in only;
    /// fits never rescale on their own.
    pub fn scale_columns(&self) -> Result<DataMatrix> {
        let n = self.nrows() as f64;
        let mut values = self.values.clone();
        for (j, mut col) in values.column_iter_mut().enumerate() {
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            if var <= 0.0 {
                return Err(CcaError::Domain(format!(
                    "column '{}' has zero variance and cannot be scaled",
                    self.column_names[j]
                )));
            }
            col /= var.sqrt();
        }
        let mut out = self.clone();
        out.values = values;
        Ok(out)
    }

    pub(crate) fn mark_centered(mut self) -> Self {
        self.centered = true;
        self
    }

    pub(crate) fn require_centered(&self, what: &str) -> Result<()> {
        if self.centered {
            Ok(())
        } else {
            Err(CcaError::State(format!("{what} must be column-centered")))
        }
    }
}

/// Reads a numeric CSV file. Blank lines are ignored.
pub fn load_csv(path: impl AsRef<Path>, has_header: bool) -> Result<DataMatrix> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    Ok(read_csv(file, has_header)?.with_source(path.display().to_string()))
}

pub fn read_csv<R: Read>(reader: R, has_header: bool) -> Result<DataMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut names: Option<Vec<String>> = if has_header {
        let headers = rdr.headers()?;
        if headers.is_empty() || headers.iter().all(str::is_empty) {
            return Err(CcaError::EmptyInput);
        }
        Some(headers.iter().map(str::to_owned).collect())
    } else {
        None
    };

    let mut data = Vec::new();
    let mut width = names.as_ref().map(Vec::len);
    let mut rows = 0usize;
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(rows + 1, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match width {
            Some(w) if w != record.len() => {
                return Err(CcaError::Parse {
                    row: line,
                    column: record.len().min(w),
                    message: format!("expected {w} fields, found {}", record.len()),
                });
            }
            None => width = Some(record.len()),
            _ => {}
        }
        for (j, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| CcaError::Parse {
                row: line,
                column: j + 1,
                message: format!("'{cell}' is not a number"),
            })?;
            if !value.is_finite() {
                return Err(CcaError::Parse {
                    row: line,
                    column: j + 1,
                    message: format!("'{cell}' is not finite"),
                });
            }
            data.push(value);
        }
        rows += 1;
    }
    let m = match width {
        Some(m) if rows > 0 => m,
        _ => return Err(CcaError::EmptyInput),
    };
    let names = names
        .take()
        .unwrap_or_else(|| (1..=m).map(|j| format!("V{j}")).collect());
    log::debug!("read {rows} rows x {m} columns");
    DataMatrix::new(DMatrix::from_row_slice(rows, m, &data), names)
}

/// Writes a matrix with a header row.
pub fn write_csv(path: impl AsRef<Path>, x: &DataMatrix) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(x.column_names())?;
    for row in x.values().row_iter() {
        wtr.write_record(row.iter().map(|v| v.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a two-column `feature,group` map and resolves it against the
/// column names of the feature matrix.
pub fn load_group_map(path: impl AsRef<Path>, columns: &[String]) -> Result<GroupStructure> {
    let file = std::fs::File::open(path)?;
    read_group_map(file, columns)
}

pub fn read_group_map<R: Read>(reader: R, columns: &[String]) -> Result<GroupStructure> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut group_names: Vec<String> = Vec::new();
    let mut assignment: Vec<Option<usize>> = vec![None; columns.len()];
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 2 {
            return Err(CcaError::Parse {
                row: line,
                column: record.len(),
                message: "group map rows must be `feature,group`".into(),
            });
        }
        let feature = &record[0];
        let group = &record[1];
        let idx = columns
            .iter()
            .position(|c| c == feature)
            .ok_or_else(|| CcaError::Parse {
                row: line,
                column: 1,
                message: format!("unknown feature '{feature}'"),
            })?;
        if assignment[idx].is_some() {
            return Err(CcaError::Parse {
                row: line,
                column: 1,
                message: format!("feature '{feature}' assigned twice"),
            });
        }
        let gid = match group_names.iter().position(|g| g == group) {
            Some(g) => g,
            None => {
                group_names.push(group.to_owned());
                group_names.len() - 1
            }
        };
        assignment[idx] = Some(gid);
    }
    if let Some(missing) = assignment.iter().position(Option::is_none) {
        return Err(CcaError::Shape(format!(
            "feature '{}' has no group",
            columns[missing]
        )));
    }
    GroupStructure::from_assignments(assignment.into_iter().flatten().collect(), group_names)
}

pub fn center_columns(x: &DataMatrix) -> DataMatrix {
    let means = x.column_means();
    x.center_with(&means)
        .expect("means have matching length")
        .mark_centered()
}

/// A sample covariance block `(1/n) X^T Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceBlock {
    matrix: DMatrix<f64>,
}

impl CovarianceBlock {
    pub const SCALE_CONVENTION: &'static str = "1/n";

    pub fn from_matrix(matrix: DMatrix<f64>) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }
}

pub fn sample_covariance(x: &DataMatrix, y: &DataMatrix) -> Result<CovarianceBlock> {
    if x.nrows() != y.nrows() {
        return Err(CcaError::Shape(format!(
            "{} vs {} observations",
            x.nrows(),
            y.nrows()
        )));
    }
    x.require_centered("x")?;
    y.require_centered("y")?;
    Ok(CovarianceBlock {
        matrix: cross_product(x.values(), y.values()),
    })
}

/// `(1/n) A^T B`, symmetrized when `A` and `B` are the same matrix.
pub(crate) fn cross_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows() as f64;
    let mut out = a.tr_mul(b) / n;
    if std::ptr::eq(a, b) {
        symmetrize(&mut out);
    }
    out
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let k = m.nrows();
    for i in 0..k {
        for j in (i + 1)..k {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Least-squares fit of feature columns on `[1 | covariates]`.
#[derive(Debug, Clone)]
pub struct CovariateAdjustment {
    /// `(1 + c) x m`, intercept row first.
    coefficients: DMatrix<f64>,
}

impl CovariateAdjustment {
    pub fn fit(x: &DataMatrix, covariates: &DataMatrix) -> Result<Self> {
        if x.nrows() != covariates.nrows() {
            return Err(CcaError::Shape(format!(
                "{} observations vs {} covariate rows",
                x.nrows(),
                covariates.nrows()
            )));
        }
        let design = design_matrix(covariates.values());
        let svd = crate::linalg::thin_svd(&design)?;
        let smax = svd.s.max();
        let smin = svd.s.min();
        let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
        if design.nrows() < design.ncols() || ratio < 1e-10 {
            return Err(CcaError::SingularDesign { ratio });
        }
        let mut ut_x = svd.u.tr_mul(x.values());
        for (i, s) in svd.s.iter().enumerate() {
            ut_x.row_mut(i).scale_mut(1.0 / s);
        }
        Ok(Self {
            coefficients: svd.v * ut_x,
        })
    }

    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.coefficients
    }

    /// Residuals of `x` after removing the fitted covariate effects.
    pub fn apply(&self, x: &DataMatrix, covariates: &DataMatrix) -> Result<DataMatrix> {
        let design = design_matrix(covariates.values());
        if design.ncols() != self.coefficients.nrows()
            || x.ncols() != self.coefficients.ncols()
            || x.nrows() != design.nrows()
        {
            return Err(CcaError::Shape("covariate adjustment shape mismatch".into()));
        }
        let values = x.values() - design * &self.coefficients;
        let mut out = DataMatrix::new(values, x.column_names().to_vec())?;
        out.source = x.source.clone();
        Ok(out)
    }
}

fn design_matrix(covariates: &DMatrix<f64>) -> DMatrix<f64> {
    let n = covariates.nrows();
    let mut d = DMatrix::from_element(n, covariates.ncols() + 1, 1.0);
    d.columns_mut(1, covariates.ncols()).copy_from(covariates);
    d
}

/// Residuals of every column of `x` regressed on an intercept plus the
/// covariates. The result has zero column means.
pub fn regress_out(x: &DataMatrix, covariates: &DataMatrix) -> Result<DataMatrix> {
    let adj = CovariateAdjustment::fit(x, covariates)?;
    Ok(adj.apply(x, covariates)?.mark_centered())
}

/// Per-column one-sample effect size `mean / sd` with the `1/(n-1)` sd.
///
/// Expects the uncentered matrix. A zero-variance column yields `+inf`
/// (or `-inf` for a negative mean) and logs a warning.
pub fn cohens_d(x: &DataMatrix) -> Vec<f64> {
    let n = x.nrows() as f64;
    x.values()
        .column_iter()
        .enumerate()
        .map(|(j, col)| {
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            if var > 0.0 {
                mean / var.sqrt()
            } else {
                log::warn!(
                    "column '{}' has zero variance; Cohen's d reported as infinite",
                    x.column_names()[j]
                );
                if mean < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    f64::INFINITY
                }
            }
        })
        .collect()
}

/// Indices whose effect size exceeds `threshold`.
pub fn select_by_effect_size(d: &[f64], threshold: f64) -> Vec<usize> {
    d.iter()
        .enumerate()
        .filter(|(_, &v)| v > threshold)
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(n: usize, m: usize, data: &[f64]) -> DataMatrix {
        DataMatrix::from_row_slice(n, m, data).unwrap()
    }

    #[test]
    fn reads_small_csv() {
        let x = read_csv("a,b\n1,2\n3,4\n5,6".as_bytes(), true).unwrap();
        assert_eq!(x.nrows(), 3);
        assert_eq!(x.ncols(), 2);
        assert_eq!(x.column_names(), &["a", "b"]);
        assert_eq!(x.values()[(2, 1)], 6.0);
        assert!(!x.is_centered());
    }

    #[test]
    fn trailing_blank_line_is_ignored() {
        let a = read_csv("a,b\n1,2\n3,4\n5,6".as_bytes(), true).unwrap();
        let b = read_csv("a,b\n1,2\n3,4\n5,6\n\n".as_bytes(), true).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn nan_cell_reports_coordinates() {
        let err = read_csv("a,b\n1,2\n3,NaN\n".as_bytes(), true).unwrap_err();
        match err {
            CcaError::Parse { row, column, .. } => assert_eq!((row, column), (3, 2)),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn ragged_and_non_numeric_rows() {
        let err = read_csv("a,b\n1,2\n3\n".as_bytes(), true).unwrap_err();
        assert!(matches!(err, CcaError::Parse { row: 3, .. }));
        let err = read_csv("1,2\nx,4\n".as_bytes(), false).unwrap_err();
        assert!(matches!(err, CcaError::Parse { row: 2, column: 1, .. }));
    }

    #[test]
    fn empty_input() {
        assert!(matches!(read_csv("".as_bytes(), true), Err(CcaError::EmptyInput)));
        assert!(matches!(read_csv("a,b\n".as_bytes(), true), Err(CcaError::EmptyInput)));
        assert!(matches!(read_csv("".as_bytes(), false), Err(CcaError::EmptyInput)));
    }

    #[test]
    fn headerless_names() {
        let x = read_csv("1,2\n3,4\n".as_bytes(), false).unwrap();
        assert_eq!(x.column_names(), &["V1", "V2"]);
    }

    #[test]
    fn centering() {
        let x = matrix(3, 2, &[1.0, 5.0, 2.0, 5.0, 3.0, 5.0]);
        let c = center_columns(&x);
        assert!(c.is_centered());
        assert_eq!(c.values().column(0).as_slice(), &[-1.0, 0.0, 1.0]);
        assert_eq!(c.values().column(1).as_slice(), &[0.0, 0.0, 0.0]);
        let cc = center_columns(&c);
        assert!((cc.values() - c.values()).amax() <= 1e-15);
    }

    #[test]
    fn covariance_uses_one_over_n() {
        let x = center_columns(&matrix(3, 1, &[-1.0, 0.0, 1.0]));
        let s = sample_covariance(&x, &x).unwrap();
        assert!((s.matrix()[(0, 0)] - 2.0 / 3.0).abs() < 1e-15);

        let a = center_columns(&matrix(4, 1, &[1.0, -1.0, 1.0, -1.0]));
        let b = center_columns(&matrix(4, 1, &[1.0, 1.0, -1.0, -1.0]));
        assert_eq!(sample_covariance(&a, &b).unwrap().matrix()[(0, 0)], 0.0);
    }

    #[test]
    fn covariance_matches_triple_loop() {
        let xs: Vec<f64> = (0..18).map(|i| ((i * 7 % 11) as f64).sin()).collect();
        let ys: Vec<f64> = (0..12).map(|i| ((i * 5 % 13) as f64).cos()).collect();
        let x = center_columns(&matrix(6, 3, &xs));
        let y = center_columns(&matrix(6, 2, &ys));
        let s = sample_covariance(&x, &y).unwrap();
        for a in 0..3 {
            for b in 0..2 {
                let mut acc = 0.0;
                for i in 0..6 {
                    acc += x.values()[(i, a)] * y.values()[(i, b)];
                }
                assert!((s.matrix()[(a, b)] - acc / 6.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn covariance_errors() {
        let x = center_columns(&matrix(3, 1, &[1.0, 2.0, 3.0]));
        let y = center_columns(&matrix(2, 1, &[1.0, 2.0]));
        assert!(matches!(sample_covariance(&x, &y), Err(CcaError::Shape(_))));
        let raw = matrix(3, 1, &[1.0, 2.0, 3.0]);
        assert!(matches!(sample_covariance(&raw, &x), Err(CcaError::State(_))));
    }

    #[test]
    fn two_group_mean_adjustment() {
        let x = matrix(4, 1, &[1.0, 2.0, 3.0, 4.0]);
        let cov = matrix(4, 1, &[0.0, 0.0, 1.0, 1.0]);
        let r = regress_out(&x, &cov).unwrap();
        let expected = [-0.5, 0.5, -0.5, 0.5];
        for (a, b) in r.values().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(r.is_centered());
    }

    #[test]
    fn regress_out_edge_cases() {
        let x = center_columns(&matrix(4, 1, &[1.0, -1.0, 1.0, -1.0]));
        let cov = matrix(4, 1, &[1.0, 1.0, -1.0, -1.0]);
        let r = regress_out(&x, &cov).unwrap();
        assert!((r.values() - x.values()).amax() < 1e-12);

        let same = regress_out(&cov, &cov).unwrap();
        assert!(same.values().amax() < 1e-12);

        let constant = matrix(4, 1, &[2.0; 4]);
        assert!(matches!(
            regress_out(&x, &constant),
            Err(CcaError::SingularDesign { .. })
        ));
    }

    #[test]
    fn effect_sizes() {
        let x = matrix(3, 3, &[1.0, -1.0, 4.0, 2.0, 0.0, 4.0, 3.0, 1.0, 4.0]);
        let d = cohens_d(&x);
        assert!((d[0] - 2.0).abs() < 1e-15);
        assert_eq!(d[1], 0.0);
        assert_eq!(d[2], f64::INFINITY);
        // mean 1, sd 2
        let y = matrix(2, 1, &[1.0 - 2f64.sqrt(), 1.0 + 2f64.sqrt()]);
        assert!((cohens_d(&y)[0] - 0.5).abs() < 1e-12);
        assert_eq!(select_by_effect_size(&d, 0.3), vec![0, 2]);
    }

    #[test]
    fn group_map_resolution() {
        let cols: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let g = read_group_map("feature,group\nc,g2\na,g1\nb,g1\n".as_bytes(), &cols).unwrap();
        assert_eq!(g.assignments(), &[1, 1, 0]);
        assert_eq!(g.names(), &["g2", "g1"]);
        let err = read_group_map("feature,group\na,g1\n".as_bytes(), &cols).unwrap_err();
        assert!(matches!(err, CcaError::Shape(_)));
    }
}
