//! Group-structured synthetic data and the train/test method comparison
//! built on it.
//!
//! `(Y, X^c)` is drawn from `N(0, Sigma)` with
//! `Sigma = [[I_q, s^2 11^T], [s^2 11^T, I_K]]` and every feature of group
//! `k` is the centroid `X^c_k` plus independent `N(0, sigma_x^2)` noise.
//!
//! Replicate `r` draws from a ChaCha8 stream keyed by `(seed, r)`, so any
//! replicate can be regenerated on its own and thread count never changes
//! the output.

use std::io::Write;

use nalgebra::{Cholesky, DMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::cv::{log10_grid, mean_and_se};
use crate::data::{center_columns, DataMatrix};
use crate::error::{CcaError, Result};
use crate::linalg;
use crate::penalty::{GroupStructure, PenaltySpec};
use crate::reduce::{fit_cca, FitOptions};
use crate::solver::{plain_correlation, FittedCCA};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub groups: usize,
    pub sigma_x: f64,
    pub sigma_xy: f64,
    pub seed: u64,
    pub replicates: usize,
    /// Rows of the independent test set; `None` means `n`.
    #[serde(default)]
    pub n_test: Option<usize>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n: 10,
            p: 15,
            q: 3,
            groups: 5,
            sigma_x: 1.0,
            sigma_xy: 0.5,
            seed: 0,
            replicates: 1000,
            n_test: None,
        }
    }
}

impl SimulationConfig {
    pub fn test_rows(&self) -> usize {
        self.n_test.unwrap_or(self.n)
    }

    pub fn group_size(&self) -> usize {
        self.p / self.groups
    }

    /// Contiguous groups `g1..gK` of equal size.
    pub fn group_structure(&self) -> Result<GroupStructure> {
        GroupStructure::from_sizes(&vec![self.group_size(); self.groups])
    }

    /// Joint covariance of `(Y, X^c)`.
    pub fn joint_covariance(&self) -> DMatrix<f64> {
        let (q, k) = (self.q, self.groups);
        let s2 = self.sigma_xy * self.sigma_xy;
        DMatrix::from_fn(q + k, q + k, |i, j| {
            if i == j {
                1.0
            } else if (i < q) != (j < q) {
                s2
            } else {
                0.0
            }
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.test_rows() < 2 {
            return Err(CcaError::Domain("need at least 2 training and test rows".into()));
        }
        if self.q == 0 || self.groups == 0 || self.p == 0 {
            return Err(CcaError::Domain("p, q and the number of groups must be positive".into()));
        }
        if !self.p.is_multiple_of(self.groups) {
            return Err(CcaError::Domain(format!(
                "{} groups do not divide {} features",
                self.groups, self.p
            )));
        }
        if !(self.sigma_x >= 0.0 && self.sigma_x.is_finite()) {
            return Err(CcaError::Domain(format!("sigma_x must be >= 0, got {}", self.sigma_x)));
        }
        if !(0.0..1.0).contains(&self.sigma_xy) {
            return Err(CcaError::Domain(format!(
                "sigma_xy must lie in [0, 1), got {}",
                self.sigma_xy
            )));
        }
        let (vals, _) = linalg::sym_eigen(&self.joint_covariance());
        if vals[0] <= 1e-12 {
            return Err(CcaError::InvalidCovariance {
                min_eigenvalue: vals[0],
            });
        }
        Ok(())
    }

    fn rng(&self, replicate: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(replicate as u64);
        rng
    }
}

/// A sampler for one configuration.
struct Sampler<'a> {
    config: &'a SimulationConfig,
    chol: DMatrix<f64>,
}

impl<'a> Sampler<'a> {
    fn new(config: &'a SimulationConfig) -> Result<Self> {
        config.validate()?;
        let chol = Cholesky::new(config.joint_covariance())
            .ok_or(CcaError::InvalidCovariance {
                min_eigenvalue: f64::NAN,
            })?
            .unpack();
        Ok(Self { config, chol })
    }

    fn draw(&self, rows: usize, rng: &mut ChaCha8Rng) -> Result<(DataMatrix, DataMatrix)> {
        let c = self.config;
        let d = c.q + c.groups;
        let size = c.group_size();
        let mut x = DMatrix::zeros(rows, c.p);
        let mut y = DMatrix::zeros(rows, c.q);
        for i in 0..rows {
            let z = nalgebra::DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
            let w = &self.chol * z;
            for j in 0..c.q {
                y[(i, j)] = w[j];
            }
            for j in 0..c.p {
                let noise: f64 = StandardNormal.sample(rng);
                x[(i, j)] = w[c.q + j / size] + c.sigma_x * noise;
            }
        }
        Ok((
            DataMatrix::with_prefix(x, "X")?,
            DataMatrix::with_prefix(y, "Y")?,
        ))
    }
}

/// Draws `n` rows of `(X, Y)` from replicate 0 of `config`.
pub fn generate(config: &SimulationConfig) -> Result<(DataMatrix, DataMatrix)> {
    let sampler = Sampler::new(config)?;
    sampler.draw(config.n, &mut config.rng(0))
}

/// Training and test sets of one replicate.
pub fn generate_replicate(
    config: &SimulationConfig,
    replicate: usize,
) -> Result<((DataMatrix, DataMatrix), (DataMatrix, DataMatrix))> {
    let sampler = Sampler::new(config)?;
    let mut rng = config.rng(replicate);
    let train = sampler.draw(config.n, &mut rng)?;
    let test = sampler.draw(config.test_rows(), &mut rng)?;
    Ok((train, test))
}

/// Methods compared by [`run_experiment`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimMethod {
    Rcca,
    /// Partial ridge leaving the first feature of every group unpenalized.
    Prcca,
    /// Group penalty with `mu = 0`.
    GrccaMu0,
    /// Group penalty over the `mu` grid.
    Grcca,
}

impl SimMethod {
    pub const ALL: [SimMethod; 4] = [
        SimMethod::Rcca,
        SimMethod::Prcca,
        SimMethod::GrccaMu0,
        SimMethod::Grcca,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SimMethod::Rcca => "rcca",
            SimMethod::Prcca => "prcca",
            SimMethod::GrccaMu0 => "grcca-mu0",
            SimMethod::Grcca => "grcca",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        SimMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| CcaError::Domain(format!("unknown simulation method '{s}'")))
    }

    fn penalty(self, config: &SimulationConfig, lambda: f64, mu: f64) -> Result<PenaltySpec> {
        Ok(match self {
            SimMethod::Rcca => PenaltySpec::Ridge { lambda },
            SimMethod::Prcca => {
                let size = config.group_size();
                let unpenalized: Vec<usize> = (0..config.groups).map(|k| k * size).collect();
                PenaltySpec::partial_from_unpenalized(lambda, &unpenalized, config.p)
            }
            SimMethod::GrccaMu0 | SimMethod::Grcca => PenaltySpec::Group {
                lambda,
                mu,
                groups: config.group_structure()?,
            },
        })
    }

    fn mu_values(self, grid: &ExperimentGrid) -> Vec<f64> {
        match self {
            SimMethod::Grcca => grid.mu1.clone(),
            _ => vec![0.0],
        }
    }
}

/// Penalty grid of the experiment. `Y` gets a fixed ridge `lambda2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub lambda1: Vec<f64>,
    pub mu1: Vec<f64>,
    pub lambda2: f64,
}

impl Default for ExperimentGrid {
    /// `lambda1 = 10^-5..10^5`, `mu1 = 10^-4..10`, no penalty on `Y`.
    fn default() -> Self {
        Self {
            lambda1: log10_grid(-5, 5),
            mu1: log10_grid(-4, 1),
            lambda2: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub replicate: usize,
    pub method: SimMethod,
    pub lambda1: f64,
    pub mu1: f64,
    pub train_cor: Option<f64>,
    pub test_cor: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: SimMethod,
    pub lambda1: f64,
    pub mu1: f64,
    pub replicates: usize,
    pub mean_train: f64,
    pub se_train: f64,
    pub mean_test: f64,
    pub se_test: f64,
}

/// All experiment cells in canonical order: replicate, method, `lambda1`,
/// `mu1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentTable {
    pub config: SimulationConfig,
    pub grid: ExperimentGrid,
    pub methods: Vec<SimMethod>,
    pub rows: Vec<ExperimentRow>,
}

fn fit_one(
    config: &SimulationConfig,
    method: SimMethod,
    grid: &ExperimentGrid,
    lambda: f64,
    mu: f64,
    x: &DataMatrix,
    y: &DataMatrix,
) -> Result<FittedCCA> {
    fit_cca(
        x,
        y,
        &method.penalty(config, lambda, mu)?,
        &PenaltySpec::Ridge {
            lambda: grid.lambda2,
        },
        FitOptions::default(),
    )
}

fn run_replicate(
    config: &SimulationConfig,
    methods: &[SimMethod],
    grid: &ExperimentGrid,
    replicate: usize,
) -> Result<Vec<ExperimentRow>> {
    let ((xtr, ytr), (xte, yte)) = generate_replicate(config, replicate)?;
    let xte = xte.center_with(&xtr.column_means())?;
    let yte = yte.center_with(&ytr.column_means())?;
    let xtr = center_columns(&xtr);
    let ytr = center_columns(&ytr);
    let mut rows = Vec::new();
    for &method in methods {
        for &lambda1 in &grid.lambda1 {
            for mu1 in method.mu_values(grid) {
                let scored = fit_one(config, method, grid, lambda1, mu1, &xtr, &ytr).and_then(|fit| {
                    let (a, b) = (fit.alpha().column(0), fit.beta().column(0));
                    Ok((
                        plain_correlation(&xtr, &ytr, a, b)?,
                        plain_correlation(&xte, &yte, a, b)?,
                    ))
                });
                let (train_cor, test_cor, failure) = match scored {
                    Ok((tr, te)) => (Some(tr), Some(te), None),
                    Err(e) => (None, None, Some(e.to_string())),
                };
                rows.push(ExperimentRow {
                    replicate,
                    method,
                    lambda1,
                    mu1,
                    train_cor,
                    test_cor,
                    failure,
                });
            }
        }
    }
    Ok(rows)
}

/// Fits every method at every grid point on `config.replicates` training
/// sets and scores the first canonical pair on independent test sets.
/// Failed cells are recorded, not fatal.
pub fn run_experiment(
    config: &SimulationConfig,
    methods: &[SimMethod],
    grid: &ExperimentGrid,
) -> Result<ExperimentTable> {
    config.validate()?;
    if methods.is_empty() || grid.lambda1.is_empty() {
        return Err(CcaError::Domain("experiment needs at least one method and lambda".into()));
    }
    if methods.contains(&SimMethod::Grcca) && grid.mu1.is_empty() {
        return Err(CcaError::Domain("grcca needs a nonempty mu grid".into()));
    }
    let per_rep: Vec<Vec<ExperimentRow>> = (0..config.replicates)
        .into_par_iter()
        .map(|r| run_replicate(config, methods, grid, r))
        .collect::<Result<_>>()?;
    Ok(ExperimentTable {
        config: config.clone(),
        grid: grid.clone(),
        methods: methods.to_vec(),
        rows: per_rep.into_iter().flatten().collect(),
    })
}

/// Outcome of a two-sided paired t-test on per-replicate differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTest {
    pub pairs: usize,
    pub mean_difference: f64,
    pub t_statistic: f64,
    pub p_value: f64,
}

/// Two-sided paired t-test of `a - b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedTest> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(CcaError::Domain("paired test needs two equal samples of size >= 2".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (mean, se) = mean_and_se(&d);
    let t = mean / se;
    let dist = StudentsT::new(0.0, 1.0, (d.len() - 1) as f64)
        .map_err(|e| CcaError::Domain(e.to_string()))?;
    let p = 2.0 * dist.cdf(-t.abs());
    Ok(PairedTest {
        pairs: d.len(),
        mean_difference: mean,
        t_statistic: t,
        p_value: p,
    })
}

impl ExperimentTable {
    /// Mean and standard error per method and grid point over the
    /// replicates where the cell succeeded.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut keys: Vec<(SimMethod, f64, f64)> = Vec::new();
        for r in &self.rows {
            let k = (r.method, r.lambda1, r.mu1);
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        keys.into_iter()
            .map(|(method, lambda1, mu1)| {
                let cells: Vec<&ExperimentRow> = self
                    .rows
                    .iter()
                    .filter(|r| r.method == method && r.lambda1 == lambda1 && r.mu1 == mu1)
                    .filter(|r| r.failure.is_none())
                    .collect();
                let tr: Vec<f64> = cells.iter().filter_map(|r| r.train_cor).collect();
                let te: Vec<f64> = cells.iter().filter_map(|r| r.test_cor).collect();
                let (mean_train, se_train) = mean_and_se(&tr);
                let (mean_test, se_test) = mean_and_se(&te);
                SummaryRow {
                    method,
                    lambda1,
                    mu1,
                    replicates: cells.len(),
                    mean_train,
                    se_train,
                    mean_test,
                    se_test,
                }
            })
            .collect()
    }

    /// Grid point with the highest mean test correlation for `method`,
    /// optionally restricted to one `mu1`.
    pub fn best_point(&self, method: SimMethod, mu1: Option<f64>) -> Option<SummaryRow> {
        self.summary()
            .into_iter()
            .filter(|s| s.method == method && mu1.is_none_or(|m| s.mu1 == m))
            .filter(|s| s.mean_test.is_finite())
            .max_by(|a, b| a.mean_test.partial_cmp(&b.mean_test).expect("finite"))
    }

    /// Per-replicate test correlations at one grid point, in replicate
    /// order, with `None` for failed cells.
    pub fn test_scores(&self, method: SimMethod, lambda1: f64, mu1: f64) -> Vec<Option<f64>> {
        self.rows
            .iter()
            .filter(|r| r.method == method && r.lambda1 == lambda1 && r.mu1 == mu1)
            .map(|r| r.test_cor)
            .collect()
    }

    /// Compares two methods at their best grid points (highest mean test
    /// correlation) with a paired t-test over replicates where both
    /// succeeded.
    pub fn compare_best(
        &self,
        a: (SimMethod, Option<f64>),
        b: (SimMethod, Option<f64>),
    ) -> Result<PairedTest> {
        let missing = |m: SimMethod| CcaError::NoFeasiblePoint(format!("no scored cell for {}", m.name()));
        let pa = self.best_point(a.0, a.1).ok_or_else(|| missing(a.0))?;
        let pb = self.best_point(b.0, b.1).ok_or_else(|| missing(b.0))?;
        let sa = self.test_scores(a.0, pa.lambda1, pa.mu1);
        let sb = self.test_scores(b.0, pb.lambda1, pb.mu1);
        let (xa, xb): (Vec<f64>, Vec<f64>) = sa
            .iter()
            .zip(&sb)
            .filter_map(|(u, v)| Some(((*u)?, (*v)?)))
            .unzip();
        paired_t_test(&xa, &xb)
    }

    /// `replicate,method,lambda1,mu1,train_cor,test_cor`; failed cells have
    /// empty scores.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["replicate", "method", "lambda1", "mu1", "train_cor", "test_cor"])?;
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.replicate.to_string(),
                r.method.name().to_string(),
                r.lambda1.to_string(),
                r.mu1.to_string(),
                opt(r.train_cor),
                opt(r.test_cor),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "method",
            "lambda1",
            "mu1",
            "replicates",
            "mean_train_cor",
            "se_train_cor",
            "mean_test_cor",
            "se_test_cor",
        ])?;
        for s in self.summary() {
            w.write_record([
                s.method.name().to_string(),
                s.lambda1.to_string(),
                s.mu1.to_string(),
                s.replicates.to_string(),
                s.mean_train.to_string(),
                s.se_train.to_string(),
                s.mean_test.to_string(),
                s.se_test.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// First-pair X coefficients of every method at its best grid point,
    /// fitted on the training set of replicate 0:
    /// `method,lambda1,mu1,feature,group,coefficient`.
    pub fn write_coefficient_snapshot<W: Write>(&self, out: W) -> Result<()> {
        let config = &self.config;
        let groups = config.group_structure()?;
        let ((x, y), _) = generate_replicate(config, 0)?;
        let (x, y) = (center_columns(&x), center_columns(&y));
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["method", "lambda1", "mu1", "feature", "group", "coefficient"])?;
        for &method in &self.methods {
            let Some(best) = self.best_point(method, None) else { continue };
            let fit = match fit_one(config, method, &self.grid, best.lambda1, best.mu1, &x, &y) {
                Ok(f) => f,
                Err(e) => {
                    log::warn!("snapshot for {} failed: {e}", method.name());
                    continue;
                }
            };
            for (i, name) in fit.x_names().iter().enumerate() {
                w.write_record([
                    method.name().to_string(),
                    best.lambda1.to_string(),
                    best.mu1.to_string(),
                    name.clone(),
                    groups.names()[groups.group_of(i)].clone(),
                    fit.alpha()[(i, 0)].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(sigma_xy: f64, reps: usize) -> SimulationConfig {
        SimulationConfig {
            sigma_xy,
            replicates: reps,
            ..SimulationConfig::default()
        }
    }

    #[test]
    fn defaults_match_reference_setup() {
        let c = SimulationConfig::default();
        assert_eq!((c.n, c.p, c.q, c.groups, c.sigma_x), (10, 15, 3, 5, 1.0));
        let (x, y) = generate(&c).unwrap();
        assert_eq!((x.nrows(), x.ncols(), y.ncols()), (10, 15, 3));
    }

    #[test]
    fn invalid_covariance_is_reported() {
        let c = SimulationConfig {
            q: 10,
            groups: 5,
            p: 15,
            sigma_xy: 0.9,
            ..SimulationConfig::default()
        };
        match c.validate() {
            Err(CcaError::InvalidCovariance { min_eigenvalue }) => assert!(min_eigenvalue < 0.0),
            other => panic!("unexpected {other:?}"),
        }
        assert!(SimulationConfig { p: 14, ..SimulationConfig::default() }.validate().is_err());
    }

    #[test]
    fn noiseless_groups_are_constant() {
        let c = SimulationConfig {
            sigma_x: 0.0,
            sigma_xy: 0.0,
            ..SimulationConfig::default()
        };
        let (x, _) = generate(&c).unwrap();
        for k in 0..5 {
            for j in 1..3 {
                assert_eq!(x.values().column(3 * k), x.values().column(3 * k + j));
            }
        }
    }

    #[test]
    fn replicates_are_reproducible() {
        let c = cfg(0.5, 3);
        let a = generate_replicate(&c, 2).unwrap();
        let b = generate_replicate(&c, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.0 .0, generate_replicate(&c, 1).unwrap().0 .0);
    }

    #[test]
    fn paired_t_test_known_value() {
        // Differences 1, 2, 3: mean 2, sd 1, t = 2 sqrt(3). With 2 degrees
        // of freedom the two-sided p-value is 1 - t / sqrt(2 + t^2).
        let t = paired_t_test(&[2.0, 4.0, 6.0], &[1.0, 2.0, 3.0]).unwrap();
        let t0 = 2.0 * 3f64.sqrt();
        assert!((t.t_statistic - t0).abs() < 1e-12);
        assert!((t.p_value - (1.0 - t0 / (2.0 + t0 * t0).sqrt())).abs() < 1e-9, "{}", t.p_value);
    }

    #[test]
    fn small_experiment_table_shape() {
        let c = cfg(0.5, 3);
        let grid = ExperimentGrid {
            lambda1: vec![0.1, 10.0],
            mu1: vec![0.1, 1.0],
            lambda2: 0.0,
        };
        let t = run_experiment(&c, &SimMethod::ALL, &grid).unwrap();
        assert_eq!(t.rows.len(), 3 * (2 + 2 + 2 + 4));
        assert!(t.rows.iter().all(|r| r.failure.is_none()));
        assert_eq!(t.summary().len(), 10);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 31);
        let mut buf = Vec::new();
        t.write_coefficient_snapshot(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 4 * 15);
    }
}
