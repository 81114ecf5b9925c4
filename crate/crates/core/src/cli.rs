//! Command-line front end.
//!
//! Every command writes `manifest.json` next to its outputs. The manifest
//! holds the crate version and the fully resolved configuration (absolute
//! input paths, every default filled in); `grcca replay --manifest FILE
//! --out DIR` reruns it and reproduces the outputs byte for byte, whatever
//! the thread count.
//!
//! Exit codes: 0 on success, 2 for usage, input and shape errors, 3 when
//! the problem is numerically infeasible.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::cv::{
    cross_validate, nested_cross_validate, parse_grid, AdjustMode, Covariates, Grid, GridPoint,
    MethodSpec,
};
use crate::data::{
    center_columns, cohens_d, load_csv, load_group_map, regress_out, select_by_effect_size,
    DataMatrix,
};
use crate::error::{CcaError, Result};
use crate::penalty::{GroupStructure, PenaltyFamily, PenaltySpec};
use crate::reduce::{coefficient_path, write_path_csv, FitOptions, GrccaPath, PathAxis};
use crate::sim::{run_experiment, ExperimentGrid, SimMethod, SimulationConfig};
use crate::solver::FittedCCA;

pub const MANIFEST: &str = "manifest.json";

#[derive(Parser, Debug)]
#[command(name = "grcca", version, about = "Regularized CCA with structured l2 penalties")]
pub struct Cli {
    /// Worker threads (defaults to one per core).
    #[arg(long, global = true, env = "GRCCA_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// Fit one model.
    Fit(FitArgs),
    /// k-fold cross-validation over a grid, then refit at the best point.
    Cv(CvArgs),
    /// Nested cross-validation.
    Ncv(NcvArgs),
    /// First-pair coefficients along a penalty grid.
    Paths(PathsArgs),
    /// Train/test comparison on synthetic group-structured data.
    Simulate(SimulateArgs),
    /// Per-feature Cohen's d effect sizes.
    Screen(ScreenArgs),
    /// Rerun a command from its manifest.
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct OutArgs {
    /// Output directory (created if missing).
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct DataArgs {
    /// Feature matrix X (CSV, one row per observation).
    #[arg(long)]
    pub x: PathBuf,
    /// Feature matrix Y.
    #[arg(long)]
    pub y: PathBuf,
    /// Input CSVs have no header row.
    #[arg(long)]
    pub no_header: bool,
    /// Covariates regressed out of both X and Y (CSV with header).
    #[arg(long)]
    pub adjust: Option<PathBuf>,
    /// `full-data` adjusts once before splitting, `per-fold` refits the
    /// adjustment on every training fold.
    #[arg(long, default_value = "full-data", value_parser = serde_enum::<AdjustMode>)]
    pub adjust_mode: AdjustMode,
    /// Divide every column by its standard deviation before fitting.
    #[arg(long)]
    pub scale: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rcca,
    Prcca,
    Grcca,
    General,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct MethodArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    /// `feature,group` map for the columns of X (grcca).
    #[arg(long)]
    pub groups_x: Option<PathBuf>,
    /// Unpenalized X columns for prcca, by name or 1-based position.
    #[arg(long, value_delimiter = ',')]
    pub unpenalized_x: Vec<String>,
    /// Leave X columns with Cohen's d above this value unpenalized (prcca).
    #[arg(long)]
    pub cohens_d_threshold: Option<f64>,
    /// Penalty matrix for the general method (headerless p x p CSV),
    /// scaled by lambda1.
    #[arg(long)]
    pub penalty_x: Option<PathBuf>,
    /// Route for group penalties: eigen, extend or auto.
    #[arg(long, default_value = "auto", value_parser = serde_enum::<GrccaPath>)]
    pub path: GrccaPath,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub method: MethodArgs,
    #[arg(long)]
    pub lambda1: f64,
    /// Group-mean penalty (grcca).
    #[arg(long)]
    pub mu1: Option<f64>,
    /// Ridge penalty on Y.
    #[arg(long, default_value_t = 0.0)]
    pub lambda2: f64,
    #[arg(long, default_value_t = 1)]
    pub ncomp: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct GridArgs {
    /// Grid for lambda1: `1e-3:1e5:log10`, `0:1:lin:5` or `0.1,1,10`.
    #[arg(long, default_value = "1e-3:1e5:log10")]
    pub grid_lambda1: String,
    /// Grid for mu1 (grcca).
    #[arg(long)]
    pub grid_mu1: Option<String>,
    /// Grid for the ridge penalty on Y.
    #[arg(long, default_value = "0")]
    pub grid_lambda2: String,
}

impl GridArgs {
    fn grid(&self, method: Method) -> Result<Grid> {
        let mu1 = match (&self.grid_mu1, method) {
            (Some(g), Method::Grcca) => parse_grid(g)?,
            (None, Method::Grcca) => {
                return Err(CcaError::Domain("grcca needs --grid-mu1".into()));
            }
            (Some(_), _) => {
                return Err(CcaError::Domain("--grid-mu1 only applies to grcca".into()));
            }
            (None, _) => vec![],
        };
        Grid::new(
            parse_grid(&self.grid_lambda1)?,
            mu1,
            parse_grid(&self.grid_lambda2)?,
            vec![],
        )
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub method: MethodArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct NcvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub method: MethodArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value_t = 11)]
    pub outer_folds: usize,
    #[arg(long, default_value_t = 10)]
    pub inner_folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct PathsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub method: MethodArgs,
    /// Parameter varied along the path: lambda or mu.
    #[arg(long, default_value = "lambda", value_parser = serde_enum::<PathAxis>)]
    pub axis: PathAxis,
    /// Values of the varied parameter, ascending.
    #[arg(long, default_value = "1e-3:1e5:log10")]
    pub grid: String,
    /// Value of the other X parameter (mu1 when varying lambda1).
    #[arg(long, default_value_t = 0.0)]
    pub fixed: f64,
    #[arg(long, default_value_t = 0.0)]
    pub lambda2: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[arg(long, default_value_t = 15)]
    pub p: usize,
    #[arg(long, default_value_t = 3)]
    pub q: usize,
    #[arg(long, default_value_t = 5)]
    pub groups: usize,
    #[arg(long, default_value_t = 1.0)]
    pub sigma_x: f64,
    #[arg(long, default_value_t = 0.5)]
    pub sigma_xy: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    /// Test-set rows per replicate (defaults to n).
    #[arg(long)]
    pub n_test: Option<usize>,
    /// Comma-separated subset of rcca, prcca, grcca-mu0, grcca.
    #[arg(long, default_value = "rcca,prcca,grcca-mu0,grcca")]
    pub methods: String,
    #[arg(long, default_value = "1e-5:1e5:log10")]
    pub grid_lambda1: String,
    #[arg(long, default_value = "1e-4:1e1:log10")]
    pub grid_mu1: String,
    #[arg(long, default_value_t = 0.0)]
    pub lambda2: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ScreenArgs {
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long)]
    pub no_header: bool,
    #[arg(long, default_value_t = 0.3)]
    pub threshold: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug, Clone)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub out: OutArgs,
}

/// Contents of `manifest.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub software: String,
    pub version: String,
    pub config: Command,
}

fn serde_enum<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}{}", remedy(&e));
            if e.is_numerical() {
                3
            } else {
                2
            }
        }
    }
}

fn remedy(e: &CcaError) -> &'static str {
    match e {
        CcaError::SingularCovariance { .. } => {
            " (increase lambda1 for X or lambda2 for Y)"
        }
        CcaError::NoFeasiblePoint(_) => " (extend the grid towards larger penalties)",
        CcaError::SingularDesign { .. } => " (drop collinear or constant covariates)",
        _ => "",
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CcaError::Domain("--threads must be positive".into()));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| CcaError::Domain(format!("cannot start worker threads: {e}")))?;
    pool.install(|| dispatch(cli.command))
}

fn dispatch(command: Command) -> Result<()> {
    let (command, out) = match command {
        Command::Replay(r) => {
            let text = std::fs::read_to_string(&r.manifest)?;
            let manifest: Manifest = serde_json::from_str(&text)?;
            if manifest.software != env!("CARGO_PKG_NAME") {
                return Err(CcaError::Domain(format!(
                    "manifest was written by '{}'",
                    manifest.software
                )));
            }
            if manifest.version != env!("CARGO_PKG_VERSION") {
                log::warn!(
                    "manifest version {} differs from {}",
                    manifest.version,
                    env!("CARGO_PKG_VERSION")
                );
            }
            (manifest.config, r.out.out)
        }
        mut c => {
            resolve(&mut c)?;
            let out = output_dir(&c).to_path_buf();
            (c, out)
        }
    };
    std::fs::create_dir_all(&out)?;
    let manifest = Manifest {
        software: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: command.clone(),
    };
    std::fs::write(out.join(MANIFEST), serde_json::to_string_pretty(&manifest)? + "\n")?;
    match &command {
        Command::Fit(a) => cmd_fit(a, &out),
        Command::Cv(a) => cmd_cv(a, &out),
        Command::Ncv(a) => cmd_ncv(a, &out),
        Command::Paths(a) => cmd_paths(a, &out),
        Command::Simulate(a) => cmd_simulate(a, &out),
        Command::Screen(a) => cmd_screen(a, &out),
        Command::Replay(_) => unreachable!("replay is resolved above"),
    }
}

fn output_dir(c: &Command) -> &Path {
    match c {
        Command::Fit(a) => &a.out.out,
        Command::Cv(a) => &a.out.out,
        Command::Ncv(a) => &a.out.out,
        Command::Paths(a) => &a.out.out,
        Command::Simulate(a) => &a.out.out,
        Command::Screen(a) => &a.out.out,
        Command::Replay(a) => &a.out.out,
    }
}

fn absolute(p: &mut PathBuf) -> Result<()> {
    *p = std::fs::canonicalize(&*p).map_err(|e| {
        CcaError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", p.display())))
    })?;
    Ok(())
}

fn resolve_data(d: &mut DataArgs) -> Result<()> {
    absolute(&mut d.x)?;
    absolute(&mut d.y)?;
    if let Some(a) = &mut d.adjust {
        absolute(a)?;
    }
    Ok(())
}

fn resolve_method(m: &mut MethodArgs) -> Result<()> {
    if let Some(g) = &mut m.groups_x {
        absolute(g)?;
    }
    if let Some(k) = &mut m.penalty_x {
        absolute(k)?;
    }
    Ok(())
}

/// Makes input paths absolute so a manifest can be replayed from anywhere.
fn resolve(c: &mut Command) -> Result<()> {
    match c {
        Command::Fit(a) => {
            resolve_data(&mut a.data)?;
            resolve_method(&mut a.method)
        }
        Command::Cv(a) => {
            resolve_data(&mut a.data)?;
            resolve_method(&mut a.method)
        }
        Command::Ncv(a) => {
            resolve_data(&mut a.data)?;
            resolve_method(&mut a.method)
        }
        Command::Paths(a) => {
            resolve_data(&mut a.data)?;
            resolve_method(&mut a.method)
        }
        Command::Screen(a) => absolute(&mut a.x),
        Command::Simulate(_) | Command::Replay(_) => Ok(()),
    }
}

/// Inputs shared by the data-driven commands.
struct Inputs {
    x: DataMatrix,
    y: DataMatrix,
    covariates: Option<DataMatrix>,
    method: MethodSpec,
    groups: Option<GroupStructure>,
}

impl Inputs {
    fn load(data: &DataArgs, method: &MethodArgs) -> Result<Self> {
        let header = !data.no_header;
        let mut x = load_csv(&data.x, header)?;
        let mut y = load_csv(&data.y, header)?;
        if x.nrows() != y.nrows() {
            return Err(CcaError::Shape(format!(
                "X has {} rows but Y has {}",
                x.nrows(),
                y.nrows()
            )));
        }
        // Effect sizes are computed on the raw matrix.
        let d = method.cohens_d_threshold.map(|t| (cohens_d(&x), t));
        if data.scale {
            x = x.scale_columns()?;
            y = y.scale_columns()?;
        }
        let covariates = data.adjust.as_ref().map(|p| load_csv(p, true)).transpose()?;
        let p = x.ncols();
        let mut groups = None;
        let family = match method.method {
            Method::Rcca => PenaltyFamily::Ridge,
            Method::Prcca => {
                let mut unpenalized = resolve_columns(&x, &method.unpenalized_x)?;
                if let Some((d, t)) = d {
                    unpenalized.extend(select_by_effect_size(&d, t));
                }
                unpenalized.sort_unstable();
                unpenalized.dedup();
                if unpenalized.is_empty() {
                    return Err(CcaError::Domain(
                        "prcca needs --unpenalized-x or --cohens-d-threshold selecting at least one column"
                            .into(),
                    ));
                }
                PenaltyFamily::partial_from_unpenalized(&unpenalized, p)
            }
            Method::Grcca => {
                let path = method
                    .groups_x
                    .as_ref()
                    .ok_or_else(|| CcaError::Domain("grcca needs --groups-x".into()))?;
                let g = load_group_map(path, x.column_names())?;
                groups = Some(g.clone());
                PenaltyFamily::Group { groups: g }
            }
            Method::General => {
                let path = method
                    .penalty_x
                    .as_ref()
                    .ok_or_else(|| CcaError::Domain("general needs --penalty-x".into()))?;
                let k = load_csv(path, false)?.into_values();
                if k.shape() != (p, p) {
                    return Err(CcaError::Shape(format!(
                        "penalty matrix is {}x{} but X has {p} columns",
                        k.nrows(),
                        k.ncols()
                    )));
                }
                PenaltySpec::General { matrix: k.clone() }.validate(p)?;
                PenaltyFamily::General { matrix: k }
            }
        };
        let mut spec = MethodSpec::new(family, PenaltyFamily::Ridge);
        spec.grcca_path = method.path;
        Ok(Self {
            x,
            y,
            covariates,
            method: spec,
            groups,
        })
    }

    /// Adjusted (if requested) and centered copies of the full data.
    fn centered(&self) -> Result<(DataMatrix, DataMatrix)> {
        let (x, y) = match &self.covariates {
            Some(c) => (regress_out(&self.x, c)?, regress_out(&self.y, c)?),
            None => (self.x.clone(), self.y.clone()),
        };
        Ok((center_columns(&x), center_columns(&y)))
    }

    fn cv_covariates(&self, mode: AdjustMode) -> Option<Covariates> {
        self.covariates.as_ref().map(|c| Covariates {
            matrix: c.clone(),
            mode,
        })
    }
}

/// Column names, or 1-based positions, to 0-based indices.
fn resolve_columns(x: &DataMatrix, specs: &[String]) -> Result<Vec<usize>> {
    specs
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| {
            if let Some(i) = x.column_index(s) {
                return Ok(i);
            }
            match s.parse::<usize>() {
                Ok(i) if (1..=x.ncols()).contains(&i) => Ok(i - 1),
                _ => Err(CcaError::Domain(format!("unknown X column '{s}'"))),
            }
        })
        .collect()
}

fn create(path: PathBuf) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn cmd_fit(a: &FitArgs, out: &Path) -> Result<()> {
    let inputs = Inputs::load(&a.data, &a.method)?;
    let mu1 = match (a.method.method, a.mu1) {
        (Method::Grcca, Some(mu)) => mu,
        (Method::Grcca, None) => return Err(CcaError::Domain("grcca needs --mu1".into())),
        (_, Some(_)) => return Err(CcaError::Domain("--mu1 only applies to grcca".into())),
        (_, None) => 0.0,
    };
    let (x, y) = inputs.centered()?;
    let point = GridPoint::new(a.lambda1, mu1, a.lambda2, 0.0);
    let fit = inputs.method.fit_components(&x, &y, point, a.ncomp)?;
    write_model(&fit, inputs.groups.as_ref(), out)
}

fn write_model(fit: &FittedCCA, groups: Option<&GroupStructure>, out: &Path) -> Result<()> {
    std::fs::write(out.join("model.json"), fit.to_json()? + "\n")?;
    std::fs::write(out.join("summary.txt"), summary_text(fit, groups))?;
    Ok(())
}

/// Correlations and the largest X coefficients (per group when grouped).
pub fn summary_text(fit: &FittedCCA, groups: Option<&GroupStructure>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "method: {:?}", fit.method());
    let _ = writeln!(s, "X penalty: {}", describe(fit.x_penalty()));
    let _ = writeln!(s, "Y penalty: {}", describe(fit.y_penalty()));
    let _ = writeln!(s, "\ncanonical correlations (modified):");
    for (i, r) in fit.correlations().iter().enumerate() {
        let _ = writeln!(s, "  {:>2}  {r:.6}", i + 1);
    }
    let alpha = fit.alpha();
    let names = fit.x_names();
    let top = |idx: &mut Vec<usize>, k: usize| {
        idx.sort_by(|&a, &b| {
            alpha[(b, 0)]
                .abs()
                .partial_cmp(&alpha[(a, 0)].abs())
                .expect("finite coefficients")
                .then(a.cmp(&b))
        });
        idx.truncate(k);
    };
    let _ = writeln!(s, "\ntop X coefficients, first pair:");
    match groups {
        Some(g) => {
            for (k, members) in g.members().into_iter().enumerate() {
                let mut idx = members;
                top(&mut idx, 3);
                let _ = writeln!(s, "  group {}", g.names()[k]);
                for i in idx {
                    let _ = writeln!(s, "    {:<20} {:+.6e}", names[i], alpha[(i, 0)]);
                }
            }
        }
        None => {
            let mut idx: Vec<usize> = (0..names.len()).collect();
            top(&mut idx, 10);
            for i in idx {
                let _ = writeln!(s, "  {:<20} {:+.6e}", names[i], alpha[(i, 0)]);
            }
        }
    }
    s
}

fn describe(p: &PenaltySpec) -> String {
    match p {
        PenaltySpec::None => "none".into(),
        PenaltySpec::Ridge { lambda } => format!("ridge lambda={lambda}"),
        PenaltySpec::Partial { lambda, penalized } => {
            format!("partial lambda={lambda} ({} penalized)", penalized.len())
        }
        PenaltySpec::Group {
            lambda, mu, groups, ..
        } => format!("group lambda={lambda} mu={mu} ({} groups)", groups.n_groups()),
        PenaltySpec::General { matrix } => format!("general {}x{}", matrix.nrows(), matrix.ncols()),
    }
}

fn cmd_cv(a: &CvArgs, out: &Path) -> Result<()> {
    let inputs = Inputs::load(&a.data, &a.method)?;
    let grid = a.grid.grid(a.method.method)?;
    let cov = inputs.cv_covariates(a.data.adjust_mode);
    let result = cross_validate(
        &inputs.x,
        &inputs.y,
        &inputs.method,
        &grid,
        a.folds,
        a.seed,
        cov.as_ref(),
    )?;
    result.write_curves_csv(create(out.join("cv_curves.csv"))?)?;
    result.write_summary_csv(create(out.join("cv_summary.csv"))?)?;
    std::fs::write(
        out.join("cv_result.json"),
        serde_json::to_string_pretty(&result)? + "\n",
    )?;
    let (x, y) = inputs.centered()?;
    let fit = inputs.method.fit(&x, &y, result.best_point)?;
    write_model(&fit, inputs.groups.as_ref(), out)
}

fn cmd_ncv(a: &NcvArgs, out: &Path) -> Result<()> {
    let inputs = Inputs::load(&a.data, &a.method)?;
    let grid = a.grid.grid(a.method.method)?;
    let cov = inputs.cv_covariates(a.data.adjust_mode);
    let result = nested_cross_validate(
        &inputs.x,
        &inputs.y,
        &inputs.method,
        &grid,
        a.outer_folds,
        a.inner_folds,
        a.seed,
        cov.as_ref(),
    )?;
    result.write_outer_csv(create(out.join("ncv_outer.csv"))?)?;
    std::fs::write(
        out.join("ncv_result.json"),
        serde_json::to_string_pretty(&result)? + "\n",
    )?;
    let summary = format!(
        "outer folds: {}\ninner cv score: {:.6} (se {:.6})\ntest score:     {:.6} (se {:.6})\n",
        result.outer.len(),
        result.mean_inner,
        result.se_inner,
        result.mean_test,
        result.se_test
    );
    std::fs::write(out.join("summary.txt"), summary)?;
    Ok(())
}

fn cmd_paths(a: &PathsArgs, out: &Path) -> Result<()> {
    let inputs = Inputs::load(&a.data, &a.method)?;
    if a.axis == PathAxis::Mu && a.method.method != Method::Grcca {
        return Err(CcaError::Domain("--axis mu only applies to grcca".into()));
    }
    let grid = parse_grid(&a.grid)?;
    let (x, y) = inputs.centered()?;
    let opts = FitOptions {
        ncomp: 1,
        grcca_path: a.method.path,
    };
    let points = coefficient_path(
        &x,
        &y,
        &inputs.method.x,
        &PenaltySpec::Ridge { lambda: a.lambda2 },
        a.axis,
        &grid,
        a.fixed,
        opts,
    )?;
    if points.iter().all(|p| p.fit.is_err()) {
        let reason = points[0].fit.as_ref().err().cloned().unwrap_or_default();
        return Err(CcaError::NoFeasiblePoint(reason));
    }
    write_path_csv(&points, inputs.groups.as_ref(), create(out.join("paths.csv"))?)
}

fn cmd_simulate(a: &SimulateArgs, out: &Path) -> Result<()> {
    let config = SimulationConfig {
        n: a.n,
        p: a.p,
        q: a.q,
        groups: a.groups,
        sigma_x: a.sigma_x,
        sigma_xy: a.sigma_xy,
        seed: a.seed,
        replicates: a.reps,
        n_test: a.n_test,
    };
    let methods = a
        .methods
        .split(',')
        .map(|m| SimMethod::parse(m.trim()))
        .collect::<Result<Vec<_>>>()?;
    let grid = ExperimentGrid {
        lambda1: parse_grid(&a.grid_lambda1)?,
        mu1: parse_grid(&a.grid_mu1)?,
        lambda2: a.lambda2,
    };
    let table = run_experiment(&config, &methods, &grid)?;
    table.write_csv(create(out.join("experiment.csv"))?)?;
    table.write_summary_csv(create(out.join("experiment_summary.csv"))?)?;
    table.write_coefficient_snapshot(create(out.join("coefficients.csv"))?)?;
    if methods.contains(&SimMethod::Grcca)
        && methods.contains(&SimMethod::Rcca)
        && grid.mu1.contains(&1.0)
        && config.replicates >= 2
    {
        let test = table.compare_best((SimMethod::Grcca, Some(1.0)), (SimMethod::Rcca, None))?;
        std::fs::write(
            out.join("comparison.json"),
            serde_json::to_string_pretty(&test)? + "\n",
        )?;
    }
    Ok(())
}

fn cmd_screen(a: &ScreenArgs, out: &Path) -> Result<()> {
    let x = load_csv(&a.x, !a.no_header)?;
    let d = cohens_d(&x);
    let selected = select_by_effect_size(&d, a.threshold);
    let mut w = csv::Writer::from_writer(create(out.join("cohens_d.csv"))?);
    w.write_record(["feature", "cohens_d", "selected"])?;
    for (i, (name, v)) in x.column_names().iter().zip(&d).enumerate() {
        w.write_record([name.clone(), v.to_string(), selected.contains(&i).to_string()])?;
    }
    w.flush()?;
    Ok(())
}
