//! Hyperparameter selection by k-fold and nested cross-validation.
//!
//! Every fit is trained on the training folds only: column means (and, in
//! per-fold mode, covariate regressions) are estimated on the training rows
//! and applied unchanged to the held-out rows. Scores are the plain Pearson
//! correlation of the first pair of canonical variates.

use std::io::Write;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{center_columns, regress_out, CovariateAdjustment, DataMatrix};
use crate::error::{CcaError, Result};
use crate::penalty::{GroupStructure, PenaltyFamily};
use crate::reduce::{fit_cca, FitOptions, GrccaPath};
use crate::solver::{plain_correlation, FittedCCA};

/// Axis-aligned hyperparameter grid. Unused axes hold the single value 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lambda1: Vec<f64>,
    pub mu1: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub mu2: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub lambda1: f64,
    pub mu1: f64,
    pub lambda2: f64,
    pub mu2: f64,
}

impl GridPoint {
    pub fn new(lambda1: f64, mu1: f64, lambda2: f64, mu2: f64) -> Self {
        Self {
            lambda1,
            mu1,
            lambda2,
            mu2,
        }
    }
}

impl Grid {
    /// Sorts and deduplicates each axis. Empty axes become `{0}`.
    pub fn new(lambda1: Vec<f64>, mu1: Vec<f64>, lambda2: Vec<f64>, mu2: Vec<f64>) -> Result<Self> {
        Ok(Self {
            lambda1: clean_axis("lambda1", lambda1)?,
            mu1: clean_axis("mu1", mu1)?,
            lambda2: clean_axis("lambda2", lambda2)?,
            mu2: clean_axis("mu2", mu2)?,
        })
    }

    /// Grid over the X-side ridge parameter only.
    pub fn lambda1(values: Vec<f64>) -> Result<Self> {
        Self::new(values, vec![], vec![], vec![])
    }

    pub fn single(point: GridPoint) -> Result<Self> {
        Self::new(
            vec![point.lambda1],
            vec![point.mu1],
            vec![point.lambda2],
            vec![point.mu2],
        )
    }

    /// All points, `lambda1` varying slowest and `mu2` fastest.
    pub fn points(&self) -> Vec<GridPoint> {
        let mut out = Vec::with_capacity(self.len());
        for &l1 in &self.lambda1 {
            for &m1 in &self.mu1 {
                for &l2 in &self.lambda2 {
                    for &m2 in &self.mu2 {
                        out.push(GridPoint::new(l1, m1, l2, m2));
                    }
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.lambda1.len() * self.mu1.len() * self.lambda2.len() * self.mu2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn clean_axis(name: &str, mut values: Vec<f64>) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Ok(vec![0.0]);
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(CcaError::Domain(format!(
            "{name} grid values must be finite and nonnegative, got {bad}"
        )));
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    values.dedup();
    Ok(values)
}

/// Powers of ten `10^from, 10^(from+1), ..., 10^to`.
pub fn log10_grid(from: i32, to: i32) -> Vec<f64> {
    (from..=to).map(|e| format!("1e{e}").parse().expect("valid literal")).collect()
}

/// Parses a grid axis: `1e-3:1e5:log10` (every power of ten between two
/// powers of ten), `a:b:lin:k` (k evenly spaced values), or a comma list.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = |msg: &str| CcaError::Domain(format!("invalid grid '{spec}': {msg}"));
    let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [a, b, "log10"] => {
            let (a, b) = (parse(a)?, parse(b)?);
            if !(a > 0.0 && b >= a) {
                return Err(bad("log10 bounds must satisfy 0 < from <= to"));
            }
            let (ea, eb) = (a.log10().round(), b.log10().round());
            if (10f64.powf(ea) - a).abs() > 1e-9 * a || (10f64.powf(eb) - b).abs() > 1e-9 * b {
                return Err(bad("log10 bounds must be powers of ten"));
            }
            Ok(log10_grid(ea as i32, eb as i32))
        }
        [a, b, "lin", k] => {
            let (a, b) = (parse(a)?, parse(b)?);
            let k: usize = k.trim().parse().map_err(|_| bad("count must be an integer"))?;
            if k < 2 || b < a {
                return Err(bad("need at least 2 points and from <= to"));
            }
            Ok((0..k)
                .map(|i| a + (b - a) * i as f64 / (k - 1) as f64)
                .collect())
        }
        [single] => single.split(',').map(parse).collect(),
        _ => Err(bad("expected from:to:log10, from:to:lin:k or a comma list")),
    }
}

/// Splits `0..n` into `k` shuffled folds whose sizes differ by at most one.
/// Each fold is returned in increasing order.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n {
        return Err(CcaError::Domain(format!(
            "need 2 <= folds <= observations, got {k} folds for {n} observations"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut fold = idx[start..start + size].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += size;
    }
    Ok(folds)
}

/// Penalty structure for both sides. `lambda1`/`mu1` parametrize the X
/// family and `lambda2`/`mu2` the Y family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub x: PenaltyFamily,
    pub y: PenaltyFamily,
    #[serde(default)]
    pub grcca_path: GrccaPath,
}

impl MethodSpec {
    pub fn new(x: PenaltyFamily, y: PenaltyFamily) -> Self {
        Self {
            x,
            y,
            grcca_path: GrccaPath::Auto,
        }
    }

    pub fn rcca() -> Self {
        Self::new(PenaltyFamily::Ridge, PenaltyFamily::Ridge)
    }

    /// Partial ridge on X leaving `unpenalized` (of `p` features) free.
    pub fn prcca(unpenalized: &[usize], p: usize) -> Self {
        Self::new(
            PenaltyFamily::partial_from_unpenalized(unpenalized, p),
            PenaltyFamily::Ridge,
        )
    }

    pub fn grcca(groups: GroupStructure) -> Self {
        Self::new(PenaltyFamily::Group { groups }, PenaltyFamily::Ridge)
    }

    pub fn general(matrix: DMatrix<f64>) -> Self {
        Self::new(PenaltyFamily::General { matrix }, PenaltyFamily::Ridge)
    }

    /// Fits the first canonical pair at one grid point on centered data.
    pub fn fit(&self, x: &DataMatrix, y: &DataMatrix, point: GridPoint) -> Result<FittedCCA> {
        self.fit_components(x, y, point, 1)
    }

    pub fn fit_components(
        &self,
        x: &DataMatrix,
        y: &DataMatrix,
        point: GridPoint,
        ncomp: usize,
    ) -> Result<FittedCCA> {
        let opts = FitOptions {
            ncomp,
            grcca_path: self.grcca_path,
        };
        fit_cca(
            x,
            y,
            &self.x.at(point.lambda1, point.mu1),
            &self.y.at(point.lambda2, point.mu2),
            opts,
        )
    }
}

/// When covariates are regressed out of both views.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdjustMode {
    /// Once, on all observations, before any split.
    #[default]
    FullData,
    /// Refit on the training rows of every fold.
    PerFold,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Covariates {
    pub matrix: DataMatrix,
    pub mode: AdjustMode,
}

/// Scores of one grid point. A point whose fit fails in any fold has no
/// aggregate scores and records the first failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointScores {
    pub point: GridPoint,
    pub train: Vec<Option<f64>>,
    pub validation: Vec<Option<f64>>,
    pub mean_train: Option<f64>,
    pub se_train: Option<f64>,
    pub mean_validation: Option<f64>,
    pub se_validation: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CVResult {
    pub folds: Vec<Vec<usize>>,
    pub fold_assignment_seed: u64,
    pub points: Vec<PointScores>,
    pub best_point: GridPoint,
    pub best_score: f64,
}

/// Arithmetic mean and `sd / sqrt(k)` with the sample standard deviation.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

struct FoldScore {
    train: f64,
    validation: f64,
}

/// Fits on `train` rows and scores on `test` rows. `covariates` is only used
/// for per-fold adjustment.
fn train_and_score(
    x: &DataMatrix,
    y: &DataMatrix,
    covariates: Option<&DataMatrix>,
    method: &MethodSpec,
    point: GridPoint,
    train: &[usize],
    test: &[usize],
) -> Result<FoldScore> {
    let (xtr, ytr, xte, yte) = split_views(x, y, covariates, train, test)?;
    let fit = method.fit(&xtr, &ytr, point)?;
    let score = |a: &DataMatrix, b: &DataMatrix| {
        plain_correlation(a, b, fit.alpha().column(0), fit.beta().column(0))
    };
    Ok(FoldScore {
        train: score(&xtr, &ytr)?,
        validation: score(&xte, &yte)?,
    })
}

/// Training views centered on their own means and test views centered with
/// the training means.
fn split_views(
    x: &DataMatrix,
    y: &DataMatrix,
    covariates: Option<&DataMatrix>,
    train: &[usize],
    test: &[usize],
) -> Result<(DataMatrix, DataMatrix, DataMatrix, DataMatrix)> {
    let mut xtr = x.select_rows(train)?;
    let mut ytr = y.select_rows(train)?;
    let mut xte = x.select_rows(test)?;
    let mut yte = y.select_rows(test)?;
    if let Some(c) = covariates {
        let ctr = c.select_rows(train)?;
        let cte = c.select_rows(test)?;
        let ax = CovariateAdjustment::fit(&xtr, &ctr)?;
        let ay = CovariateAdjustment::fit(&ytr, &ctr)?;
        xte = ax.apply(&xte, &cte)?;
        yte = ay.apply(&yte, &cte)?;
        xtr = ax.apply(&xtr, &ctr)?;
        ytr = ay.apply(&ytr, &ctr)?;
    }
    let (mx, my) = (xtr.column_means(), ytr.column_means());
    Ok((
        center_columns(&xtr),
        center_columns(&ytr),
        xte.center_with(&mx)?,
        yte.center_with(&my)?,
    ))
}

fn adjusted(
    x: &DataMatrix,
    y: &DataMatrix,
    covariates: Option<&Covariates>,
) -> Result<(DataMatrix, DataMatrix, Option<DataMatrix>)> {
    match covariates {
        None => Ok((x.clone(), y.clone(), None)),
        Some(Covariates {
            matrix,
            mode: AdjustMode::FullData,
        }) => Ok((regress_out(x, matrix)?, regress_out(y, matrix)?, None)),
        Some(Covariates {
            matrix,
            mode: AdjustMode::PerFold,
        }) => Ok((x.clone(), y.clone(), Some(matrix.clone()))),
    }
}

/// Complement of `fold` in `0..n`.
fn complement(n: usize, fold: &[usize]) -> Vec<usize> {
    let mut mask = vec![true; n];
    for &i in fold {
        mask[i] = false;
    }
    (0..n).filter(|&i| mask[i]).collect()
}

/// k-fold cross-validation over every grid point.
///
/// Fold assignment is fixed by `seed` before any work is dispatched, so the
/// result does not depend on the number of worker threads.
pub fn cross_validate(
    x: &DataMatrix,
    y: &DataMatrix,
    method: &MethodSpec,
    grid: &Grid,
    k: usize,
    seed: u64,
    covariates: Option<&Covariates>,
) -> Result<CVResult> {
    check_inputs(x, y, covariates)?;
    let (x, y, per_fold) = adjusted(x, y, covariates)?;
    cv_prepared(&x, &y, per_fold.as_ref(), method, grid, k, seed)
}

fn check_inputs(x: &DataMatrix, y: &DataMatrix, covariates: Option<&Covariates>) -> Result<()> {
    if x.nrows() != y.nrows() {
        return Err(CcaError::Shape(format!(
            "{} vs {} observations",
            x.nrows(),
            y.nrows()
        )));
    }
    if let Some(c) = covariates {
        if c.matrix.nrows() != x.nrows() {
            return Err(CcaError::Shape(format!(
                "{} covariate rows for {} observations",
                c.matrix.nrows(),
                x.nrows()
            )));
        }
    }
    Ok(())
}

fn cv_prepared(
    x: &DataMatrix,
    y: &DataMatrix,
    covariates: Option<&DataMatrix>,
    method: &MethodSpec,
    grid: &Grid,
    k: usize,
    seed: u64,
) -> Result<CVResult> {
    let n = x.nrows();
    let folds = kfold_split(n, k, seed)?;
    let trains: Vec<Vec<usize>> = folds.iter().map(|f| complement(n, f)).collect();
    let points = grid.points();
    let tasks: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..k).map(move |f| (p, f)))
        .collect();
    let outcomes: Vec<Result<FoldScore>> = tasks
        .par_iter()
        .map(|&(p, f)| train_and_score(x, y, covariates, method, points[p], &trains[f], &folds[f]))
        .collect();

    let mut scores = Vec::with_capacity(points.len());
    let mut outcomes = outcomes.into_iter();
    for point in points {
        let mut train = Vec::with_capacity(k);
        let mut validation = Vec::with_capacity(k);
        let mut failure = None;
        for f in 0..k {
            match outcomes.next().expect("one outcome per task") {
                Ok(s) => {
                    train.push(Some(s.train));
                    validation.push(Some(s.validation));
                }
                Err(e) => {
                    train.push(None);
                    validation.push(None);
                    failure.get_or_insert_with(|| format!("fold {f}: {e}"));
                }
            }
        }
        let aggregate = |v: &[Option<f64>]| -> Option<(f64, f64)> {
            let vals: Option<Vec<f64>> = v.iter().copied().collect();
            vals.map(|v| mean_and_se(&v))
        };
        let t = aggregate(&train);
        let v = aggregate(&validation);
        if let Some(reason) = &failure {
            log::warn!(
                "grid point lambda1={} mu1={} lambda2={} mu2={} failed: {reason}",
                point.lambda1,
                point.mu1,
                point.lambda2,
                point.mu2
            );
        }
        scores.push(PointScores {
            point,
            train,
            validation,
            mean_train: t.map(|t| t.0),
            se_train: t.map(|t| t.1),
            mean_validation: v.map(|v| v.0),
            se_validation: v.map(|v| v.1),
            failure,
        });
    }

    let best = best_index(&scores).ok_or_else(|| {
        CcaError::NoFeasiblePoint(
            scores
                .first()
                .and_then(|s| s.failure.clone())
                .unwrap_or_else(|| "empty grid".into()),
        )
    })?;
    Ok(CVResult {
        folds,
        fold_assignment_seed: seed,
        best_point: scores[best].point,
        best_score: scores[best].mean_validation.expect("best point is scored"),
        points: scores,
    })
}

/// Highest mean validation score; ties go to the larger `lambda1`, then the
/// larger `mu1` (then `lambda2`, `mu2`).
fn best_index(scores: &[PointScores]) -> Option<usize> {
    let key = |s: &PointScores| {
        let p = s.point;
        (s.mean_validation, p.lambda1, p.mu1, p.lambda2, p.mu2)
    };
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        let Some(score) = s.mean_validation else { continue };
        match best {
            None => best = Some(i),
            Some(b) => {
                let (bs, bl1, bm1, bl2, bm2) = key(&scores[b]);
                let bs = bs.expect("scored");
                let p = s.point;
                if score > bs
                    || (score == bs && (p.lambda1, p.mu1, p.lambda2, p.mu2) > (bl1, bm1, bl2, bm2))
                {
                    best = Some(i);
                }
            }
        }
    }
    best
}

impl CVResult {
    pub fn best(&self) -> &PointScores {
        self.points
            .iter()
            .find(|s| s.point == self.best_point)
            .expect("best point is on the grid")
    }

    /// Long-format fold scores:
    /// `lambda1,mu1,lambda2,mu2,fold,train_cor,val_cor`. Missing scores are
    /// left empty.
    pub fn write_curves_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["lambda1", "mu1", "lambda2", "mu2", "fold", "train_cor", "val_cor"])?;
        for s in &self.points {
            for f in 0..s.train.len() {
                let mut rec = point_fields(s.point);
                rec.push(f.to_string());
                rec.push(opt(s.train[f]));
                rec.push(opt(s.validation[f]));
                w.write_record(rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// One row per grid point with means, standard errors and failures.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "lambda1",
            "mu1",
            "lambda2",
            "mu2",
            "mean_train_cor",
            "se_train_cor",
            "mean_val_cor",
            "se_val_cor",
            "failure",
        ])?;
        for s in &self.points {
            let mut rec = point_fields(s.point);
            rec.extend([
                opt(s.mean_train),
                opt(s.se_train),
                opt(s.mean_validation),
                opt(s.se_validation),
                s.failure.clone().unwrap_or_default(),
            ]);
            w.write_record(rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn point_fields(p: GridPoint) -> Vec<String> {
    vec![
        p.lambda1.to_string(),
        p.mu1.to_string(),
        p.lambda2.to_string(),
        p.mu2.to_string(),
    ]
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterFold {
    pub fold: usize,
    pub test_rows: Vec<usize>,
    pub best_point: GridPoint,
    pub inner_score: f64,
    pub test_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NCVResult {
    pub seed: u64,
    pub inner_folds: usize,
    pub outer: Vec<OuterFold>,
    pub mean_inner: f64,
    pub se_inner: f64,
    pub mean_test: f64,
    pub se_test: f64,
}

/// Seed of the inner split for outer fold `fold`.
fn inner_seed(seed: u64, fold: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fold as u64 + 1);
    rand::RngCore::next_u64(&mut rng)
}

/// Nested cross-validation: each outer fold is scored once by a model
/// tuned by inner cross-validation on the remaining observations and refit
/// on all of them.
#[allow(clippy::too_many_arguments)]
pub fn nested_cross_validate(
    x: &DataMatrix,
    y: &DataMatrix,
    method: &MethodSpec,
    grid: &Grid,
    outer_k: usize,
    inner_k: usize,
    seed: u64,
    covariates: Option<&Covariates>,
) -> Result<NCVResult> {
    check_inputs(x, y, covariates)?;
    let n = x.nrows();
    if outer_k * 2 > n {
        return Err(CcaError::Domain(format!(
            "{outer_k} outer folds need at least {} observations, got {n}",
            2 * outer_k
        )));
    }
    let (x, y, per_fold) = adjusted(x, y, covariates)?;
    let outer = kfold_split(n, outer_k, seed)?;
    let results: Vec<Result<OuterFold>> = outer
        .par_iter()
        .enumerate()
        .map(|(f, test)| {
            let pool = complement(n, test);
            let xp = x.select_rows(&pool)?;
            let yp = y.select_rows(&pool)?;
            let cp = per_fold.as_ref().map(|c| c.select_rows(&pool)).transpose()?;
            let inner = cv_prepared(&xp, &yp, cp.as_ref(), method, grid, inner_k, inner_seed(seed, f))?;
            let score =
                train_and_score(&x, &y, per_fold.as_ref(), method, inner.best_point, &pool, test)?;
            Ok(OuterFold {
                fold: f,
                test_rows: test.clone(),
                best_point: inner.best_point,
                inner_score: inner.best_score,
                test_score: score.validation,
            })
        })
        .collect();
    let outer: Vec<OuterFold> = results.into_iter().collect::<Result<_>>()?;
    let inner_scores: Vec<f64> = outer.iter().map(|o| o.inner_score).collect();
    let test_scores: Vec<f64> = outer.iter().map(|o| o.test_score).collect();
    let (mean_inner, se_inner) = mean_and_se(&inner_scores);
    let (mean_test, se_test) = mean_and_se(&test_scores);
    Ok(NCVResult {
        seed,
        inner_folds: inner_k,
        outer,
        mean_inner,
        se_inner,
        mean_test,
        se_test,
    })
}

impl NCVResult {
    /// `fold,n_test,lambda1,mu1,lambda2,mu2,inner_cor,test_cor`.
    pub fn write_outer_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "fold", "n_test", "lambda1", "mu1", "lambda2", "mu2", "inner_cor", "test_cor",
        ])?;
        for o in &self.outer {
            let mut rec = vec![o.fold.to_string(), o.test_rows.len().to_string()];
            rec.extend(point_fields(o.best_point));
            rec.push(o.inner_score.to_string());
            rec.push(o.test_score.to_string());
            w.write_record(rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn random(n: usize, m: usize, seed: u64) -> DataMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DataMatrix::with_prefix(
            DMatrix::from_fn(n, m, |_, _| StandardNormal.sample(&mut rng)),
            "v",
        )
        .unwrap()
    }

    #[test]
    fn folds_singletons_and_balance() {
        let f = kfold_split(10, 10, 3).unwrap();
        assert!(f.iter().all(|f| f.len() == 1));
        let f = kfold_split(11, 10, 3).unwrap();
        let mut sizes: Vec<usize> = f.iter().map(Vec::len).collect();
        sizes.sort();
        assert_eq!(sizes, [1, 1, 1, 1, 1, 1, 1, 1, 1, 2]);
        let mut all: Vec<usize> = f.concat();
        all.sort();
        assert_eq!(all, (0..11).collect::<Vec<_>>());
        assert_eq!(f, kfold_split(11, 10, 3).unwrap());
        assert!(matches!(kfold_split(3, 4, 0), Err(CcaError::Domain(_))));
        assert!(matches!(kfold_split(3, 1, 0), Err(CcaError::Domain(_))));
    }

    #[test]
    fn grid_parsing() {
        let g = parse_grid("1e-3:1e5:log10").unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g[0], 1e-3);
        assert_eq!(g[8], 1e5);
        assert_eq!(parse_grid("0.5, 2").unwrap(), vec![0.5, 2.0]);
        assert_eq!(parse_grid("0:1:lin:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(parse_grid("2:1e5:log10").is_err());
        assert!(parse_grid("a,b").is_err());
        let grid = Grid::new(vec![10.0, 1.0, 10.0], vec![], vec![], vec![]).unwrap();
        assert_eq!(grid.lambda1, vec![1.0, 10.0]);
        assert_eq!(grid.mu1, vec![0.0]);
        assert!(Grid::lambda1(vec![-1.0]).is_err());
    }

    #[test]
    fn perfect_signal_scores_one() {
        let x = random(30, 4, 1);
        let y = x.select_columns(&[0]).unwrap();
        let grid = Grid::new(vec![1e-3, 1e-1, 10.0], vec![], vec![0.0], vec![]).unwrap();
        let cv = cross_validate(&x, &y, &MethodSpec::rcca(), &grid, 5, 9, None).unwrap();
        assert!((cv.best_score - 1.0).abs() < 1e-6, "{}", cv.best_score);
    }

    #[test]
    fn aggregates_and_single_point() {
        let x = random(24, 6, 2);
        let y = random(24, 3, 3);
        let grid = Grid::new(vec![0.5], vec![], vec![0.1], vec![]).unwrap();
        let cv = cross_validate(&x, &y, &MethodSpec::rcca(), &grid, 4, 1, None).unwrap();
        assert_eq!(cv.points.len(), 1);
        assert_eq!(cv.best_point, GridPoint::new(0.5, 0.0, 0.1, 0.0));
        let s = &cv.points[0];
        let v: Vec<f64> = s.validation.iter().map(|v| v.unwrap()).collect();
        let mean = v.iter().sum::<f64>() / 4.0;
        assert!((s.mean_validation.unwrap() - mean).abs() < 1e-12);
        let sd = (v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / 3.0).sqrt();
        assert!((s.se_validation.unwrap() - sd / 2.0).abs() < 1e-12);
    }

    #[test]
    fn failing_points_are_null_and_all_failing_is_error() {
        let x = random(12, 30, 4);
        let y = random(12, 2, 5);
        let grid = Grid::new(vec![0.0, 1.0], vec![], vec![0.0], vec![]).unwrap();
        let cv = cross_validate(&x, &y, &MethodSpec::rcca(), &grid, 3, 0, None).unwrap();
        assert!(cv.points[0].mean_validation.is_none());
        assert!(cv.points[0].failure.is_some());
        assert_eq!(cv.best_point.lambda1, 1.0);
        let grid = Grid::new(vec![0.0], vec![], vec![0.0], vec![]).unwrap();
        assert!(matches!(
            cross_validate(&x, &y, &MethodSpec::rcca(), &grid, 3, 0, None),
            Err(CcaError::NoFeasiblePoint(_))
        ));
    }

    #[test]
    fn ties_prefer_stronger_regularization() {
        let mk = |l1, m1, v| PointScores {
            point: GridPoint::new(l1, m1, 0.0, 0.0),
            train: vec![],
            validation: vec![],
            mean_train: None,
            se_train: None,
            mean_validation: v,
            se_validation: None,
            failure: None,
        };
        let s = vec![mk(1.0, 0.0, Some(0.5)), mk(10.0, 0.0, Some(0.5)), mk(10.0, 1.0, Some(0.5)), mk(100.0, 0.0, None)];
        assert_eq!(best_index(&s), Some(2));
    }

    #[test]
    fn nested_partitions_and_is_deterministic() {
        let x = random(20, 5, 6);
        let mut yv = x.values().columns(0, 2).into_owned();
        yv += random(20, 2, 7).values() * 0.1;
        let y = DataMatrix::with_prefix(yv, "y").unwrap();
        let grid = Grid::new(vec![0.01, 1.0], vec![], vec![0.01], vec![]).unwrap();
        let a = nested_cross_validate(&x, &y, &MethodSpec::rcca(), &grid, 2, 3, 11, None).unwrap();
        let b = nested_cross_validate(&x, &y, &MethodSpec::rcca(), &grid, 2, 3, 11, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.outer.len(), 2);
        let mut rows: Vec<usize> = a.outer.iter().flat_map(|o| o.test_rows.clone()).collect();
        rows.sort();
        assert_eq!(rows, (0..20).collect::<Vec<_>>());
        assert!(a.outer.iter().all(|o| o.test_score > 0.9));
        assert!(nested_cross_validate(&x, &y, &MethodSpec::rcca(), &grid, 11, 3, 1, None).is_err());
    }

    #[test]
    fn per_fold_adjustment_runs() {
        let x = random(20, 4, 8);
        let y = random(20, 2, 9);
        let c = DataMatrix::with_prefix(
            DMatrix::from_fn(20, 1, |i, _| (i % 2) as f64),
            "sex",
        )
        .unwrap();
        let grid = Grid::lambda1(vec![1.0]).unwrap();
        for mode in [AdjustMode::FullData, AdjustMode::PerFold] {
            let cov = Covariates {
                matrix: c.clone(),
                mode,
            };
            let cv = cross_validate(&x, &y, &MethodSpec::rcca(), &grid, 4, 2, Some(&cov)).unwrap();
            assert!(cv.best_score.is_finite());
        }
    }

    #[test]
    fn csv_outputs() {
        let x = random(16, 3, 10);
        let y = random(16, 2, 11);
        let grid = Grid::lambda1(log10_grid(-1, 1)).unwrap();
        let cv = cross_validate(&x, &y, &MethodSpec::rcca(), &grid, 4, 0, None).unwrap();
        let mut buf = Vec::new();
        cv.write_curves_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 3 * 4);
        assert!(text.starts_with("lambda1,mu1,lambda2,mu2,fold,train_cor,val_cor"));
        let mut buf = Vec::new();
        cv.write_summary_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
    }
}
