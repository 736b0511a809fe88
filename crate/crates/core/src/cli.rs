//! Command-line harness: generate datasets, fit estimators, run the
//! experiment presets at full or desk scale, and print theory-side tables.
//!
//! Experiments are deterministic end to end: every grid cell derives its own
//! seed from the master seed and the cell coordinates, all variants of a cell
//! share one dataset, and rows are emitted in grid order no matter how the
//! cells were scheduled across workers, so `results.csv` is byte-identical
//! for a fixed config. Wall times go to a separate `timings.csv` to keep it
//! that way.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{self, Dataset, PresetData, PresetOverrides, TruthKind};
use crate::error::{Error, Result};
use crate::norms::{self, NormTag};
use crate::oracle::{self, OracleMethod};
use crate::prox;
use crate::rates::{self, DimCase, RateConstants, TuningCase};
use crate::rng::{derive_u64, GaussianStream};
use crate::solvers::{self, EstimateTriple, Problem, SolveMode, SolverOptions, StepRule};

const RESULTS_HEADER: &str =
    "preset,variant,epsilon,r,s,rep,seed,mse_B,mse_Gamma,rmse_total,objective,sweeps,kkt,converged";
const CURVES_HEADER: &str =
    "preset,variant,epsilon,r,s,count,mean_rmse,se_rmse,mean_mse,se_mse";
const TIMINGS_HEADER: &str = "preset,variant,epsilon,r,s,rep,wall_time_s";
const SCHEMA_LINE: &str = "# schema=1";

/// Corruption-penalty variant of an estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Variant {
    /// Sorted Huber loss with the logarithmic weight sequence.
    SortedHuber,
    /// Same loss with all weights flattened to the largest one.
    Huber,
    /// No corruption penalty at all (tau = 0).
    NonRobust,
}

impl Variant {
    pub fn label(self) -> &'static str {
        match self {
            Variant::SortedHuber => "SORTED_HUBER",
            Variant::Huber => "HUBER",
            Variant::NonRobust => "NON_ROBUST",
        }
    }

    fn rank(self) -> usize {
        match self {
            Variant::SortedHuber => 0,
            Variant::Huber => 1,
            Variant::NonRobust => 2,
        }
    }

    fn from_label(s: &str) -> Result<Self> {
        match s {
            "SORTED_HUBER" => Ok(Variant::SortedHuber),
            "HUBER" => Ok(Variant::Huber),
            "NON_ROBUST" => Ok(Variant::NonRobust),
            other => Err(Error::Config(format!("unknown variant '{other}'"))),
        }
    }
}

/// Which estimator the harness should solve; `Auto` picks by truth kind
/// (sparse vector -> single q2 with the sorted-l1 penalty, low rank ->
/// single q2 with the nuclear penalty, low rank plus sparse -> the
/// decomposition).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EstimatorChoice {
    #[default]
    Auto,
    SingleQ2,
    SingleQ1,
    DecompQ2,
}

/// Parameter-block penalty; `Auto` follows the truth kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RegChoice {
    #[default]
    Auto,
    Nuclear,
    L1,
    SlopeP,
}

/// Regularization levels: theorem-driven defaults or explicit values.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TuningSpec {
    Default {
        #[serde(default)]
        constants: RateConstants,
    },
    Explicit {
        lambda: f64,
        chi: f64,
        tau: f64,
    },
}

impl Default for TuningSpec {
    fn default() -> Self {
        TuningSpec::Default { constants: RateConstants::default() }
    }
}

fn default_master_seed() -> u64 {
    1729
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("experiment_out")
}

fn default_weight_const() -> f64 {
    10.0
}

/// One experiment run, fully determined by this record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub preset_id: char,
    #[serde(default)]
    pub overrides: PresetOverrides,
    #[serde(default)]
    pub tuning: TuningSpec,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default = "default_master_seed")]
    pub master_seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Defaults per preset: the uncontaminated decomposition studies run
    /// non-robust only, everything else runs all three variants.
    #[serde(default)]
    pub variants: Option<Vec<Variant>>,
    #[serde(default)]
    pub estimator: EstimatorChoice,
    #[serde(default = "default_weight_const")]
    pub weight_const: f64,
    /// Noise level assumed by the default tuning; the generating sigma when
    /// absent. Setting it differently from the data deliberately
    /// mis-specifies the quadratic-loss tuning.
    #[serde(default)]
    pub tuning_sigma: Option<f64>,
}

impl ExperimentConfig {
    pub fn for_preset(preset_id: char) -> Self {
        Self {
            preset_id,
            overrides: PresetOverrides::default(),
            tuning: TuningSpec::default(),
            // Heavy-contamination and low-noise cells (tiny tuning levels)
            // occasionally need far more than the generic sweep budget; the
            // worst preset cell at the default master seed takes ~66k sweeps.
            solver: SolverOptions { max_sweeps: 100_000, ..SolverOptions::default() },
            master_seed: default_master_seed(),
            out_dir: default_out_dir(),
            variants: None,
            estimator: EstimatorChoice::Auto,
            weight_const: default_weight_const(),
            tuning_sigma: None,
        }
    }
}

/// One fitted cell: identity, error metrics against the stored truth (empty
/// when the dataset has none), and solver diagnostics.
#[derive(Debug, Clone)]
pub struct MetricRow {
    pub preset: char,
    pub variant: Variant,
    pub epsilon: f64,
    pub r: usize,
    pub s: usize,
    pub rep: usize,
    pub seed: u64,
    pub mse_b: Option<f64>,
    pub mse_gamma: Option<f64>,
    pub rmse_total: Option<f64>,
    pub objective: f64,
    pub sweeps: usize,
    pub kkt: f64,
    pub converged: bool,
    /// Not part of results.csv (kept in timings.csv) so results stay
    /// byte-reproducible.
    pub wall_time_s: f64,
    /// Whether the solver's objective trace never rose by more than 1e-10
    /// between consecutive sweeps. Diagnostic only, not persisted; parsed
    /// rows report true.
    pub trace_monotone: bool,
}

/// Aggregate of one (variant, grid point) cell across repetitions.
#[derive(Debug, Clone)]
pub struct CurveRow {
    pub preset: char,
    pub variant: Variant,
    pub epsilon: f64,
    pub r: usize,
    pub s: usize,
    pub count: usize,
    pub mean_rmse: f64,
    pub se_rmse: f64,
    pub mean_mse: f64,
    pub se_mse: f64,
}

#[derive(Parser, Debug)]
#[command(name = "sorted-huber", version, about = "Outlier-robust regression with sorted Huber losses")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate one synthetic dataset directory.
    Generate(GenerateArgs),
    /// Fit an estimator to a dataset directory.
    Fit(FitArgs),
    /// Run a preset experiment grid and write results/curves CSVs.
    Experiment(ExperimentArgs),
    /// Print effective dimensions, rate predictions and default tunings.
    Rates(RatesArgs),
    /// Cross-check the fast prox and loss code against brute-force oracles.
    Oracle(OracleArgs),
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// Preset id (a-k).
    #[arg(long)]
    pub preset: char,
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
    #[arg(long, default_value_t = 0)]
    pub rep: usize,
    /// Rank cell; defaults to the preset's first structure pair.
    #[arg(long)]
    pub r: Option<usize>,
    /// Sparsity cell; defaults to the preset's first structure pair.
    #[arg(long)]
    pub s: Option<usize>,
    /// Master seed the cell seed is derived from.
    #[arg(long, default_value_t = default_master_seed())]
    pub seed: u64,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub entry_value: Option<f64>,
    #[arg(long)]
    pub outlier_value: Option<f64>,
    /// Shrink the preset to desk scale first.
    #[arg(long)]
    pub desk: bool,
    /// Output directory for the dataset files.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a plain-text debug.csv of labels and truth.
    #[arg(long)]
    pub csv: bool,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Dataset directory created by `generate`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = EstimatorChoice::Auto)]
    pub estimator: EstimatorChoice,
    #[arg(long, value_enum, default_value_t = RegChoice::Auto)]
    pub regularizer: RegChoice,
    #[arg(long, value_enum, default_value_t = Variant::SortedHuber)]
    pub variant: Variant,
    /// Explicit lambda; switches tuning from defaults to explicit levels.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub chi: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// Spikeness a*; the decomposition box is a*/sqrt(n). Defaults to the
    /// stored truth's value.
    #[arg(long)]
    pub a_star: Option<f64>,
    #[arg(long, default_value_t = default_weight_const())]
    pub weight_const: f64,
    /// Noise level assumed by the default tuning (defaults to the stored one).
    #[arg(long)]
    pub tuning_sigma: Option<f64>,
    #[arg(long, default_value_t = 5000)]
    pub max_sweeps: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol_kkt: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol_rel_obj: f64,
    #[arg(long)]
    pub backtracking: bool,
    /// Output directory (defaults to the dataset directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExperimentArgs {
    /// JSON config file; explicit flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub preset: Option<char>,
    /// Comma-separated contamination grid, e.g. `0,0.05,0.1`.
    #[arg(long)]
    pub eps_grid: Option<String>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub desk: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub entry_value: Option<f64>,
    #[arg(long)]
    pub outlier_value: Option<f64>,
    /// Structure cells as `r:s` pairs, e.g. `0:15,0:25`.
    #[arg(long)]
    pub structure: Option<String>,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub variants: Option<Vec<Variant>>,
    #[arg(long, value_enum)]
    pub estimator: Option<EstimatorChoice>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub chi: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub tuning_sigma: Option<f64>,
    #[arg(long)]
    pub weight_const: Option<f64>,
    #[arg(long)]
    pub max_sweeps: Option<usize>,
    #[arg(long)]
    pub tol_kkt: Option<f64>,
    #[arg(long)]
    pub tol_rel_obj: Option<f64>,
    #[arg(long)]
    pub backtracking: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RateCaseArg {
    SparseL1,
    SparseSlope,
    Trace,
    Decomp,
}

#[derive(Args, Debug)]
pub struct RatesArgs {
    #[arg(long, value_enum)]
    pub case: RateCaseArg,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub s: usize,
    #[arg(long, default_value_t = 100)]
    pub p: usize,
    #[arg(long, default_value_t = 1)]
    pub r: usize,
    #[arg(long, default_value_t = 10)]
    pub d1: usize,
    #[arg(long, default_value_t = 10)]
    pub d2: usize,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Design second-moment bound L.
    #[arg(long = "l", default_value_t = 1.0)]
    pub l: f64,
    /// Confidence level delta (defaults to 1/e).
    #[arg(long, default_value_t = 0.36787944117144233)]
    pub delta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    #[arg(long, default_value_t = 1.0)]
    pub a_star: f64,
    /// C1 constant of the decomposition rate and tau tuning.
    #[arg(long, default_value_t = 1.0)]
    pub c1: f64,
    /// Comma-separated contamination grid for the omega table.
    #[arg(long, default_value = "0,0.05,0.1,0.15,0.2,0.25,0.3")]
    pub eps_grid: String,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    /// Instances per dimension.
    #[arg(long, default_value_t = 50)]
    pub instances: usize,
    /// Comma-separated prox dimensions (exact enumeration up to 6,
    /// subgradient descent above).
    #[arg(long, default_value = "2,3,4,5,6,10")]
    pub dims: String,
    #[arg(long, default_value_t = 99)]
    pub seed: u64,
    /// Positional tolerance against the exact enumeration.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

fn parse_eps_grid(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|e| Error::Config(format!("bad epsilon '{t}': {e}"))))
        .collect()
}

fn parse_structure(s: &str) -> Result<Vec<(usize, usize)>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            let (a, b) = t
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("structure cell '{t}' is not r:s")))?;
            let r = a.trim().parse().map_err(|e| Error::Config(format!("bad rank '{a}': {e}")))?;
            let s = b.trim().parse().map_err(|e| Error::Config(format!("bad sparsity '{b}': {e}")))?;
            Ok((r, s))
        })
        .collect()
}

fn parse_dims(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<usize>().map_err(|e| Error::Config(format!("bad dimension '{t}': {e}"))))
        .collect()
}

fn eps_milli(eps: f64) -> u64 {
    (eps * 1000.0).round() as u64
}

/// Seed of one grid cell, a pure function of the master seed and the cell
/// coordinates; all variants of a cell share it (and hence the dataset).
pub fn cell_seed(master: u64, preset: char, r: usize, s: usize, eps: f64, rep: usize) -> u64 {
    derive_u64(master, &[preset as u64, r as u64, s as u64, eps_milli(eps), rep as u64])
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f).unwrap_or_default()
}

fn parse_opt(s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>().map(Some).map_err(|e| Error::Config(format!("bad float '{s}': {e}")))
}

fn result_line(row: &MetricRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
        row.preset,
        row.variant.label(),
        fmt_f(row.epsilon),
        row.r,
        row.s,
        row.rep,
        row.seed,
        fmt_opt(row.mse_b),
        fmt_opt(row.mse_gamma),
        fmt_opt(row.rmse_total),
        fmt_f(row.objective),
        row.sweeps,
        fmt_f(row.kkt),
        row.converged,
    )
}

pub fn write_results_csv(path: &Path, rows: &[MetricRow]) -> Result<()> {
    let mut out = format!("{SCHEMA_LINE}\n{RESULTS_HEADER}\n");
    for row in rows {
        out.push_str(&result_line(row));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Appends one row, creating the file with its header first if needed.
pub fn append_result_row(path: &Path, row: &MetricRow) -> Result<()> {
    let mut content = if path.exists() {
        fs::read_to_string(path)?
    } else {
        format!("{SCHEMA_LINE}\n{RESULTS_HEADER}\n")
    };
    content.push_str(&result_line(row));
    fs::write(path, content)?;
    Ok(())
}

/// Parses a results.csv back. Wall times are not stored there, so the field
/// comes back as 0.
pub fn read_results_csv(path: &Path) -> Result<Vec<MetricRow>> {
    let content = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for line in content.lines() {
        if line.starts_with('#') || line.starts_with("preset,") || line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 14 {
            return Err(Error::Config(format!("results row has {} fields, expected 14", f.len())));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|e| Error::Config(format!("bad float '{s}': {e}")))
        };
        let int = |s: &str| -> Result<usize> {
            s.parse::<usize>().map_err(|e| Error::Config(format!("bad integer '{s}': {e}")))
        };
        rows.push(MetricRow {
            preset: f[0].chars().next().ok_or_else(|| Error::Config("empty preset".into()))?,
            variant: Variant::from_label(f[1])?,
            epsilon: num(f[2])?,
            r: int(f[3])?,
            s: int(f[4])?,
            rep: int(f[5])?,
            seed: f[6].parse().map_err(|e| Error::Config(format!("bad seed: {e}")))?,
            mse_b: parse_opt(f[7])?,
            mse_gamma: parse_opt(f[8])?,
            rmse_total: parse_opt(f[9])?,
            objective: num(f[10])?,
            sweeps: int(f[11])?,
            kkt: num(f[12])?,
            converged: f[13]
                .parse()
                .map_err(|e| Error::Config(format!("bad converged flag: {e}")))?,
            wall_time_s: 0.0,
            trace_monotone: true,
        });
    }
    Ok(rows)
}

pub fn write_curves_csv(path: &Path, curves: &[CurveRow]) -> Result<()> {
    let mut out = format!("{SCHEMA_LINE}\n{CURVES_HEADER}\n");
    for c in curves {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            c.preset,
            c.variant.label(),
            fmt_f(c.epsilon),
            c.r,
            c.s,
            c.count,
            fmt_f(c.mean_rmse),
            fmt_f(c.se_rmse),
            fmt_f(c.mean_mse),
            fmt_f(c.se_mse),
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_curves_csv(path: &Path) -> Result<Vec<CurveRow>> {
    let content = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for line in content.lines() {
        if line.starts_with('#') || line.starts_with("preset,") || line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(Error::Config(format!("curves row has {} fields, expected 10", f.len())));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|e| Error::Config(format!("bad float '{s}': {e}")))
        };
        let int = |s: &str| -> Result<usize> {
            s.parse::<usize>().map_err(|e| Error::Config(format!("bad integer '{s}': {e}")))
        };
        rows.push(CurveRow {
            preset: f[0].chars().next().ok_or_else(|| Error::Config("empty preset".into()))?,
            variant: Variant::from_label(f[1])?,
            epsilon: num(f[2])?,
            r: int(f[3])?,
            s: int(f[4])?,
            count: int(f[5])?,
            mean_rmse: num(f[6])?,
            se_rmse: num(f[7])?,
            mean_mse: num(f[8])?,
            se_mse: num(f[9])?,
        });
    }
    Ok(rows)
}

fn write_timings_csv(path: &Path, rows: &[MetricRow]) -> Result<()> {
    let mut out = format!("{SCHEMA_LINE}\n{TIMINGS_HEADER}\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{:.6e}\n",
            row.preset,
            row.variant.label(),
            fmt_f(row.epsilon),
            row.r,
            row.s,
            row.rep,
            row.wall_time_s,
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Per-(variant, grid point) means and standard errors of the root and plain
/// total MSE, over the converged repetitions.
pub fn aggregate_curves(rows: &[MetricRow]) -> Vec<CurveRow> {
    use std::collections::BTreeMap;
    let mut groups: BTreeMap<(usize, usize, usize, u64), Vec<&MetricRow>> = BTreeMap::new();
    for row in rows {
        groups
            .entry((row.variant.rank(), row.r, row.s, eps_milli(row.epsilon)))
            .or_default()
            .push(row);
    }
    let mut curves = Vec::with_capacity(groups.len());
    for rows in groups.values() {
        let head = rows[0];
        let rmse: Vec<f64> = rows
            .iter()
            .filter(|r| r.converged)
            .filter_map(|r| r.rmse_total)
            .filter(|v| v.is_finite())
            .collect();
        let mse: Vec<f64> = rows
            .iter()
            .filter(|r| r.converged)
            .filter_map(|r| match (r.mse_b, r.mse_gamma) {
                (Some(b), Some(g)) if (b + g).is_finite() => Some(b + g),
                _ => None,
            })
            .collect();
        let (mean_rmse, se_rmse) = mean_and_se(&rmse);
        let (mean_mse, se_mse) = mean_and_se(&mse);
        curves.push(CurveRow {
            preset: head.preset,
            variant: head.variant,
            epsilon: head.epsilon,
            r: head.r,
            s: head.s,
            count: rmse.len(),
            mean_rmse,
            se_rmse,
            mean_mse,
            se_mse,
        });
    }
    curves
}

pub fn save_estimate(dir: &Path, est: &EstimateTriple) -> Result<()> {
    fs::create_dir_all(dir)?;
    datagen::write_f64_file(&dir.join("B_hat.bin"), est.b_hat.iter().copied())?;
    datagen::write_f64_file(&dir.join("Gamma_hat.bin"), est.gamma_hat.iter().copied())?;
    datagen::write_f64_file(&dir.join("theta_hat.bin"), est.theta_hat.iter().copied())?;
    Ok(())
}

pub fn load_estimate(dir: &Path, d1: usize, d2: usize, n: usize) -> Result<EstimateTriple> {
    let p = d1 * d2;
    let to_mat = |v: Vec<f64>| {
        Array2::from_shape_vec((d1, d2), v).map_err(|e| Error::ShapeMismatch(e.to_string()))
    };
    Ok(EstimateTriple {
        b_hat: to_mat(datagen::read_f64_file(&dir.join("B_hat.bin"), p)?)?,
        gamma_hat: to_mat(datagen::read_f64_file(&dir.join("Gamma_hat.bin"), p)?)?,
        theta_hat: Array1::from_vec(datagen::read_f64_file(&dir.join("theta_hat.bin"), n)?),
    })
}

/// Everything needed to rebuild the solved problem and audit the fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub mode: String,
    pub regularizer: String,
    pub variant: Variant,
    pub lambda: f64,
    pub chi: f64,
    /// The effective level (0 for the non-robust variant).
    pub tau: f64,
    /// None when the box is unbounded.
    pub box_a: Option<f64>,
    pub weight_const: f64,
    pub tuning: TuningSpec,
    pub objective: f64,
    pub sweeps: usize,
    pub kkt: f64,
    pub converged: bool,
    pub wall_time_s: f64,
}

fn mode_label(mode: SolveMode) -> &'static str {
    match mode {
        SolveMode::DecompQ2 => "DECOMP_Q2",
        SolveMode::SingleQ2 => "SINGLE_Q2",
        SolveMode::SingleQ1 => "SINGLE_Q1",
    }
}

fn mode_from_label(s: &str) -> Result<SolveMode> {
    match s {
        "DECOMP_Q2" => Ok(SolveMode::DecompQ2),
        "SINGLE_Q2" => Ok(SolveMode::SingleQ2),
        "SINGLE_Q1" => Ok(SolveMode::SingleQ1),
        other => Err(Error::Config(format!("unknown mode '{other}'"))),
    }
}

fn reg_label(reg: &NormTag) -> &'static str {
    match reg {
        NormTag::Nuclear => "NUCLEAR",
        NormTag::L1 => "L1",
        NormTag::SlopeP(_) => "SLOPE_P",
        _ => "OTHER",
    }
}

fn reg_from_label(s: &str, p: usize, weight_const: f64) -> Result<NormTag> {
    match s {
        "NUCLEAR" => Ok(NormTag::Nuclear),
        "L1" => Ok(NormTag::L1),
        "SLOPE_P" => Ok(NormTag::SlopeP(norms::slope_weights(p, weight_const)?)),
        other => Err(Error::Config(format!("unknown regularizer '{other}'"))),
    }
}

/// Rebuilds the problem a stored fit solved, from the dataset directory and
/// its fit_report.json; used to audit recorded objectives.
pub fn problem_from_report(dataset: Dataset, report: &FitReport) -> Result<Problem> {
    let mode = mode_from_label(&report.mode)?;
    let reg = reg_from_label(&report.regularizer, dataset.p(), report.weight_const)?;
    let omega = norms::slope_weights(dataset.n(), report.weight_const)?;
    let omega = if report.variant == Variant::Huber { omega.flattened() } else { omega };
    Problem::new(
        dataset,
        mode,
        reg,
        report.lambda,
        report.chi,
        report.tau,
        report.box_a.unwrap_or(f64::INFINITY),
        omega,
    )
}

fn resolve_estimator(
    choice: EstimatorChoice,
    kind: TruthKind,
    p: usize,
    weight_const: f64,
) -> Result<(SolveMode, NormTag)> {
    let sparse_reg = || -> Result<NormTag> {
        Ok(NormTag::SlopeP(norms::slope_weights(p, weight_const)?))
    };
    Ok(match choice {
        EstimatorChoice::Auto => match kind {
            TruthKind::SparseVector => (SolveMode::SingleQ2, sparse_reg()?),
            TruthKind::LowRank => (SolveMode::SingleQ2, NormTag::Nuclear),
            TruthKind::LowRankPlusSparse => (SolveMode::DecompQ2, NormTag::Nuclear),
        },
        EstimatorChoice::SingleQ2 => match kind {
            TruthKind::SparseVector => (SolveMode::SingleQ2, sparse_reg()?),
            _ => (SolveMode::SingleQ2, NormTag::Nuclear),
        },
        EstimatorChoice::SingleQ1 => match kind {
            TruthKind::SparseVector => (SolveMode::SingleQ1, sparse_reg()?),
            _ => (SolveMode::SingleQ1, NormTag::Nuclear),
        },
        EstimatorChoice::DecompQ2 => (SolveMode::DecompQ2, NormTag::Nuclear),
    })
}

fn apply_reg_choice(reg: RegChoice, auto: NormTag, p: usize, weight_const: f64) -> Result<NormTag> {
    Ok(match reg {
        RegChoice::Auto => auto,
        RegChoice::Nuclear => NormTag::Nuclear,
        RegChoice::L1 => NormTag::L1,
        RegChoice::SlopeP => NormTag::SlopeP(norms::slope_weights(p, weight_const)?),
    })
}

#[allow(clippy::too_many_arguments)]
fn resolve_tuning(
    tuning: &TuningSpec,
    mode: SolveMode,
    reg: &NormTag,
    n: usize,
    d1: usize,
    d2: usize,
    r: usize,
    s: usize,
    a_star: f64,
    sigma: f64,
) -> Result<(f64, f64, f64)> {
    match tuning {
        TuningSpec::Explicit { lambda, chi, tau } => Ok((*lambda, *chi, *tau)),
        TuningSpec::Default { constants } => {
            let p = d1 * d2;
            let dim = match reg {
                NormTag::Nuclear => DimCase::Trace { r, d1, d2 },
                NormTag::L1 => DimCase::SparseL1 { s, p },
                NormTag::SlopeP(_) => DimCase::SparseSlope { s, p },
                _ => return Err(Error::Config("regularizer has no default tuning".into())),
            };
            let case = match mode {
                SolveMode::DecompQ2 => TuningCase::Decomp { d1, d2, p, a_star },
                SolveMode::SingleQ2 => TuningCase::SingleQ2 { dim },
                SolveMode::SingleQ1 => TuningCase::SingleQ1 { dim },
            };
            let t = rates::default_tuning(&case, n, sigma, 1.0, constants)?;
            Ok((t.lambda, t.chi, t.tau))
        }
    }
}

fn metrics_vs_truth(
    dataset: &Dataset,
    est: &EstimateTriple,
) -> (Option<f64>, Option<f64>, Option<f64>) {
    match &dataset.truth {
        None => (None, None, None),
        Some(t) => {
            let mse_b: f64 =
                est.b_hat.iter().zip(t.b_star.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            let mse_g: f64 =
                est.gamma_hat.iter().zip(t.gamma_star.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            (Some(mse_b), Some(mse_g), Some((mse_b + mse_g).sqrt()))
        }
    }
}

struct RowId {
    preset: char,
    epsilon: f64,
    r: usize,
    s: usize,
    rep: usize,
    seed: u64,
}

/// Fits one variant on one dataset. A solver-level failure is flagged as a
/// non-converged row with NaN diagnostics rather than aborting the run.
#[allow(clippy::too_many_arguments)]
fn fit_one(
    dataset: &Dataset,
    mode: SolveMode,
    reg: NormTag,
    variant: Variant,
    levels: (f64, f64, f64),
    box_a: f64,
    weight_const: f64,
    options: &SolverOptions,
    id: RowId,
) -> Result<(MetricRow, EstimateTriple, Problem)> {
    let (lambda, chi, tau) = levels;
    let omega = norms::slope_weights(dataset.n(), weight_const)?;
    let (tau, omega) = match variant {
        Variant::SortedHuber => (tau, omega),
        Variant::Huber => (tau, omega.flattened()),
        Variant::NonRobust => (0.0, omega),
    };
    let problem = Problem::new(dataset.clone(), mode, reg, lambda, chi, tau, box_a, omega)?;
    match solvers::fit(&problem, options, None) {
        Ok((est, report)) => {
            // Recomputed at the returned estimate; the trace's last value can
            // sit below it by the documented envelope slack.
            let objective = solvers::objective(&problem, &est)?;
            let (mse_b, mse_gamma, rmse_total) = metrics_vs_truth(dataset, &est);
            let trace_monotone =
                report.objective_trace.windows(2).all(|w| w[1] <= w[0] + 1e-10);
            let row = MetricRow {
                preset: id.preset,
                variant,
                epsilon: id.epsilon,
                r: id.r,
                s: id.s,
                rep: id.rep,
                seed: id.seed,
                mse_b,
                mse_gamma,
                rmse_total,
                objective,
                sweeps: report.sweeps_used,
                kkt: report.kkt_residual,
                converged: report.converged,
                wall_time_s: report.wall_time_s,
                trace_monotone,
            };
            Ok((row, est, problem))
        }
        Err(Error::Solver(msg)) => {
            eprintln!(
                "solver failure on preset {} eps={} r={} s={} rep={} variant={}: {msg}",
                id.preset,
                id.epsilon,
                id.r,
                id.s,
                id.rep,
                variant.label()
            );
            let row = MetricRow {
                preset: id.preset,
                variant,
                epsilon: id.epsilon,
                r: id.r,
                s: id.s,
                rep: id.rep,
                seed: id.seed,
                mse_b: None,
                mse_gamma: None,
                rmse_total: None,
                objective: f64::NAN,
                sweeps: 0,
                kkt: f64::NAN,
                converged: false,
                wall_time_s: 0.0,
                trace_monotone: true,
            };
            let est = EstimateTriple::zeros(dataset.d1, dataset.d2, dataset.n());
            Ok((row, est, problem))
        }
        Err(e) => Err(e),
    }
}

fn box_from(a_star: f64, n: usize) -> f64 {
    if a_star > 0.0 {
        a_star / (n as f64).sqrt()
    } else {
        f64::INFINITY
    }
}

pub struct GenerateOutcome {
    pub dir: PathBuf,
    pub n: usize,
    pub d1: usize,
    pub d2: usize,
    pub outliers: usize,
    pub sigma: f64,
    pub seed: u64,
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<GenerateOutcome> {
    let overrides = PresetOverrides {
        n: args.n,
        sigma: args.sigma,
        entry_value: args.entry_value,
        outlier_value: args.outlier_value,
        desk: args.desk,
        ..PresetOverrides::default()
    };
    let preset = datagen::preset(args.preset, &overrides)?;
    let (r0, s0) = preset.structure[0];
    let r = args.r.unwrap_or(r0);
    let s = args.s.unwrap_or(s0);
    if !(0.0..=0.5).contains(&args.eps) {
        return Err(Error::Config(format!("epsilon {} must lie in [0, 0.5]", args.eps)));
    }
    let seed = cell_seed(args.seed, preset.id, r, s, args.eps, args.rep);
    let spec = preset.spec_for(r, s);
    let dataset = datagen::make_dataset(&spec, preset.d1, preset.d2, preset.n, args.eps, seed)?;
    dataset.save_dir(&args.out)?;
    if args.csv {
        dataset.export_csv(&args.out)?;
    }
    let outliers = dataset
        .truth
        .as_ref()
        .map(|t| t.theta_star.iter().filter(|&&x| x != 0.0).count())
        .unwrap_or(0);
    Ok(GenerateOutcome {
        dir: args.out.clone(),
        n: dataset.n(),
        d1: dataset.d1,
        d2: dataset.d2,
        outliers,
        sigma: spec.sigma,
        seed,
    })
}

pub fn cmd_fit(args: &FitArgs) -> Result<MetricRow> {
    let dataset = Dataset::load_dir(&args.data)?;
    let (n, d1, d2, p) = (dataset.n(), dataset.d1, dataset.d2, dataset.p());
    let kind = dataset
        .truth
        .as_ref()
        .map(|t| t.spec.kind)
        .unwrap_or(if d2 == 1 { TruthKind::SparseVector } else { TruthKind::LowRank });
    let (mode, auto_reg) = resolve_estimator(args.estimator, kind, p, args.weight_const)?;
    let reg = apply_reg_choice(args.regularizer, auto_reg, p, args.weight_const)?;
    let truth_spec = dataset.truth.as_ref().map(|t| t.spec);
    let (r, s) = truth_spec.map(|sp| (sp.r, sp.s)).unwrap_or((0, 0));
    let a_star = args
        .a_star
        .or(truth_spec.map(|sp| sp.spikeness_a).filter(|&a| a > 0.0))
        .unwrap_or(0.0);
    let tuning = match args.lambda {
        Some(lambda) => TuningSpec::Explicit {
            lambda,
            chi: args.chi.unwrap_or(0.0),
            tau: args.tau.unwrap_or(0.0),
        },
        None => {
            if args.chi.is_some() || args.tau.is_some() {
                return Err(Error::Config("explicit tuning needs --lambda as well".into()));
            }
            TuningSpec::default()
        }
    };
    let sigma_guess = match args.tuning_sigma.or(dataset.sigma()) {
        Some(s) => s,
        None => {
            if matches!(tuning, TuningSpec::Default { .. }) {
                return Err(Error::Config(
                    "dataset has no stored sigma; pass --tuning-sigma or explicit levels".into(),
                ));
            }
            1.0
        }
    };
    let levels = resolve_tuning(&tuning, mode, &reg, n, d1, d2, r, s, a_star, sigma_guess)?;
    let box_a = if mode == SolveMode::DecompQ2 { box_from(a_star, n) } else { f64::INFINITY };
    let options = SolverOptions {
        max_sweeps: args.max_sweeps,
        tol_rel_obj: args.tol_rel_obj,
        tol_kkt: args.tol_kkt,
        step_rule: if args.backtracking { StepRule::Backtracking } else { StepRule::FixedLipschitz },
        seed_independent: true,
    };
    let epsilon = dataset.truth.as_ref().map(|t| t.epsilon).unwrap_or(f64::NAN);
    let seed = dataset.truth.as_ref().map(|t| t.seed).unwrap_or(0);
    let id = RowId { preset: '-', epsilon, r, s, rep: 0, seed };
    let (row, est, problem) =
        fit_one(&dataset, mode, reg, args.variant, levels, box_a, args.weight_const, &options, id)?;
    let out = args.out.clone().unwrap_or_else(|| args.data.clone());
    save_estimate(&out, &est)?;
    let report = FitReport {
        mode: mode_label(mode).to_string(),
        regularizer: reg_label(&problem.regularizer).to_string(),
        variant: args.variant,
        lambda: problem.lambda,
        chi: problem.chi,
        tau: problem.tau,
        box_a: problem.box_a.is_finite().then_some(problem.box_a),
        weight_const: args.weight_const,
        tuning,
        objective: row.objective,
        sweeps: row.sweeps,
        kkt: row.kkt,
        converged: row.converged,
        wall_time_s: row.wall_time_s,
    };
    fs::write(out.join("fit_report.json"), serde_json::to_string_pretty(&report)?)?;
    append_result_row(&out.join("results.csv"), &row)?;
    Ok(row)
}

fn default_variants(preset_id: char) -> Vec<Variant> {
    match preset_id {
        // The uncontaminated decomposition studies track recovery alone.
        'g' | 'h' => vec![Variant::NonRobust],
        _ => vec![Variant::SortedHuber, Variant::Huber, Variant::NonRobust],
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    r: usize,
    s: usize,
    eps: f64,
    rep: usize,
}

pub struct ExperimentSummary {
    pub out_dir: PathBuf,
    pub rows: Vec<MetricRow>,
    pub curves: Vec<CurveRow>,
    pub cells: usize,
    pub all_converged: bool,
    pub wall_time_s: f64,
}

fn run_cell(
    cfg: &ExperimentConfig,
    preset: &PresetData,
    variants: &[Variant],
    cell: &Cell,
) -> Result<Vec<MetricRow>> {
    let seed = cell_seed(cfg.master_seed, preset.id, cell.r, cell.s, cell.eps, cell.rep);
    let spec = preset.spec_for(cell.r, cell.s);
    let dataset = datagen::make_dataset(&spec, preset.d1, preset.d2, preset.n, cell.eps, seed)?;
    let (mode, reg) =
        resolve_estimator(cfg.estimator, preset.kind, dataset.p(), cfg.weight_const)?;
    let sigma_guess = cfg.tuning_sigma.unwrap_or(preset.sigma);
    let levels = resolve_tuning(
        &cfg.tuning,
        mode,
        &reg,
        preset.n,
        preset.d1,
        preset.d2,
        cell.r,
        cell.s,
        preset.spikeness_a,
        sigma_guess,
    )?;
    let box_a =
        if mode == SolveMode::DecompQ2 { box_from(preset.spikeness_a, preset.n) } else { f64::INFINITY };
    let mut rows = Vec::with_capacity(variants.len());
    for &variant in variants {
        let id = RowId {
            preset: preset.id,
            epsilon: cell.eps,
            r: cell.r,
            s: cell.s,
            rep: cell.rep,
            seed,
        };
        let (row, _, _) = fit_one(
            &dataset,
            mode,
            reg.clone(),
            variant,
            levels,
            box_a,
            cfg.weight_const,
            &cfg.solver,
            id,
        )?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn cmd_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    let start = Instant::now();
    let preset = datagen::preset(cfg.preset_id, &cfg.overrides)?;
    let variants = cfg.variants.clone().unwrap_or_else(|| default_variants(cfg.preset_id));
    if variants.is_empty() {
        return Err(Error::Config("variant list is empty".into()));
    }
    let mut cells = Vec::new();
    for &(r, s) in &preset.structure {
        for &eps in &preset.eps_grid {
            for rep in 0..preset.reps {
                cells.push(Cell { r, s, eps, rep });
            }
        }
    }
    // Indexed parallel collect keeps grid order, so output is deterministic
    // regardless of scheduling.
    let nested: Vec<Vec<MetricRow>> = cells
        .par_iter()
        .map(|cell| run_cell(cfg, &preset, &variants, cell))
        .collect::<Result<_>>()?;
    let rows: Vec<MetricRow> = nested.into_iter().flatten().collect();
    let curves = aggregate_curves(&rows);
    fs::create_dir_all(&cfg.out_dir)?;
    write_results_csv(&cfg.out_dir.join("results.csv"), &rows)?;
    write_curves_csv(&cfg.out_dir.join("curves.csv"), &curves)?;
    write_timings_csv(&cfg.out_dir.join("timings.csv"), &rows)?;
    fs::write(cfg.out_dir.join("config.json"), serde_json::to_string_pretty(cfg)?)?;
    let all_converged = rows.iter().all(|r| r.converged);
    Ok(ExperimentSummary {
        out_dir: cfg.out_dir.clone(),
        cells: cells.len(),
        all_converged,
        wall_time_s: start.elapsed().as_secs_f64(),
        rows,
        curves,
    })
}

pub fn resolve_experiment_config(args: &ExperimentArgs) -> Result<ExperimentConfig> {
    let mut cfg: ExperimentConfig = match &args.config {
        Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
        None => {
            let id = args
                .preset
                .ok_or_else(|| Error::Config("pass --preset or --config".into()))?;
            ExperimentConfig::for_preset(id)
        }
    };
    if let Some(id) = args.preset {
        cfg.preset_id = id;
    }
    if let Some(grid) = &args.eps_grid {
        cfg.overrides.eps_grid = Some(parse_eps_grid(grid)?);
    }
    if let Some(st) = &args.structure {
        cfg.overrides.structure = Some(parse_structure(st)?);
    }
    if let Some(reps) = args.reps {
        cfg.overrides.reps = Some(reps);
    }
    if let Some(n) = args.n {
        cfg.overrides.n = Some(n);
    }
    if let Some(sigma) = args.sigma {
        cfg.overrides.sigma = Some(sigma);
    }
    if let Some(v) = args.entry_value {
        cfg.overrides.entry_value = Some(v);
    }
    if let Some(v) = args.outlier_value {
        cfg.overrides.outlier_value = Some(v);
    }
    cfg.overrides.desk |= args.desk;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    if let Some(v) = &args.variants {
        cfg.variants = Some(v.clone());
    }
    if let Some(e) = args.estimator {
        cfg.estimator = e;
    }
    if let Some(lambda) = args.lambda {
        cfg.tuning = TuningSpec::Explicit {
            lambda,
            chi: args.chi.unwrap_or(0.0),
            tau: args.tau.unwrap_or(0.0),
        };
    } else if args.chi.is_some() || args.tau.is_some() {
        return Err(Error::Config("explicit tuning needs --lambda as well".into()));
    }
    if let Some(sigma) = args.tuning_sigma {
        cfg.tuning_sigma = Some(sigma);
    }
    if let Some(w) = args.weight_const {
        cfg.weight_const = w;
    }
    if let Some(m) = args.max_sweeps {
        cfg.solver.max_sweeps = m;
    }
    if let Some(t) = args.tol_kkt {
        cfg.solver.tol_kkt = t;
    }
    if let Some(t) = args.tol_rel_obj {
        cfg.solver.tol_rel_obj = t;
    }
    if args.backtracking {
        cfg.solver.step_rule = StepRule::Backtracking;
    }
    Ok(cfg)
}

pub fn cmd_rates(args: &RatesArgs) -> Result<String> {
    let mut out = String::new();
    let constants = RateConstants { c1: args.c1, ..RateConstants::default() };
    let eps_grid = parse_eps_grid(&args.eps_grid)?;
    let mut tunings = |case_label: &str, single_dim: Option<DimCase>, decomp: Option<TuningCase>| -> Result<()> {
        writeln!(out, "case {case_label}").expect("string write");
        if let Some(dim) = single_dim {
            let d_eff = rates::effective_dim(&dim)?;
            writeln!(out, "d_eff = {d_eff:.6e}").expect("string write");
            let rate =
                rates::rate_single(args.n, d_eff, args.delta, args.rho, args.mu, args.l)?;
            writeln!(out, "rate_single = {rate:.6e}").expect("string write");
            for (label, case) in [
                ("q2", TuningCase::SingleQ2 { dim }),
                ("q1", TuningCase::SingleQ1 { dim }),
            ] {
                let t = rates::default_tuning(&case, args.n, args.sigma, args.l, &constants)?;
                writeln!(out, "tuning {label}: lambda = {:.6e}  tau = {:.6e}", t.lambda, t.tau)
                    .expect("string write");
            }
        }
        if let Some(case) = decomp {
            let rate = rates::rate_decomp(&rates::DecompRate {
                n: args.n,
                r: args.r,
                s: args.s,
                d1: args.d1,
                d2: args.d2,
                p: args.d1 * args.d2,
                delta: args.delta,
                a_star: args.a_star,
                c1: args.c1,
                l: args.l,
                sigma: args.sigma,
            })?;
            writeln!(out, "rate_decomp = {rate:.6e}").expect("string write");
            let t = rates::default_tuning(&case, args.n, args.sigma, args.l, &constants)?;
            writeln!(
                out,
                "tuning: lambda = {:.6e}  chi = {:.6e}  tau = {:.6e}",
                t.lambda, t.chi, t.tau
            )
            .expect("string write");
        }
        Ok(())
    };
    match args.case {
        RateCaseArg::SparseL1 => tunings(
            &format!("SPARSE_L1 s={} p={} n={}", args.s, args.p, args.n),
            Some(DimCase::SparseL1 { s: args.s, p: args.p }),
            None,
        )?,
        RateCaseArg::SparseSlope => tunings(
            &format!("SPARSE_SLOPE s={} p={} n={}", args.s, args.p, args.n),
            Some(DimCase::SparseSlope { s: args.s, p: args.p }),
            None,
        )?,
        RateCaseArg::Trace => tunings(
            &format!("TRACE r={} d1={} d2={} n={}", args.r, args.d1, args.d2, args.n),
            Some(DimCase::Trace { r: args.r, d1: args.d1, d2: args.d2 }),
            None,
        )?,
        RateCaseArg::Decomp => tunings(
            &format!(
                "DECOMP r={} s={} d1={} d2={} n={} a*={}",
                args.r, args.s, args.d1, args.d2, args.n, args.a_star
            ),
            None,
            Some(TuningCase::Decomp {
                d1: args.d1,
                d2: args.d2,
                p: args.d1 * args.d2,
                a_star: args.a_star,
            }),
        )?,
    }
    writeln!(out, "omega(eps):").expect("string write");
    for &eps in &eps_grid {
        writeln!(out, "  eps = {eps:.4}  omega = {:.6e}", rates::omega_eps(eps)?)
            .expect("string write");
    }
    Ok(out)
}

pub struct OracleSummary {
    pub checked: usize,
    pub failures: usize,
    pub max_position_dev: f64,
    pub max_value_gap: f64,
}

/// Random-instance agreement check between the production prox/loss code and
/// the brute-force oracles: positions against exact pattern enumeration in
/// low dimension, objective values within the subgradient oracle's certified
/// gap above it, and the square-root loss against its path-scan oracle.
pub fn cmd_oracle(args: &OracleArgs) -> Result<OracleSummary> {
    let dims = parse_dims(&args.dims)?;
    let mut checked = 0usize;
    let mut failures = 0usize;
    let mut max_position_dev = 0.0f64;
    let mut max_value_gap = 0.0f64;
    for &dim in &dims {
        let w = norms::slope_weights(dim, default_weight_const())?;
        for i in 0..args.instances {
            let mut stream = GaussianStream::from_key(args.seed, &[0xACE, dim as u64, i as u64]);
            let mut v = vec![0.0; dim];
            stream.fill_standard_normal(&mut v);
            for x in &mut v {
                *x *= 3.0;
            }
            let fast = prox::prox_sorted_l1(&v, &w)?;
            checked += 1;
            if dim <= 6 {
                let oracle = oracle::brute_prox_slope(&v, &w, OracleMethod::ExhaustivePattern)?;
                let dev = fast
                    .iter()
                    .zip(&oracle.minimizer)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max);
                max_position_dev = max_position_dev.max(dev);
                if dev > args.tol {
                    failures += 1;
                }
            } else {
                let oracle = oracle::brute_prox_slope(&v, &w, OracleMethod::ProjectedSubgradient)?;
                let quad: f64 = fast.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum();
                let fast_value = 0.5 * quad + norms::slope_norm(&fast, &w)?;
                // The fast prox is exact, so it can undercut the oracle by at
                // most the oracle's own certified gap.
                let gap = (oracle.value - fast_value).abs();
                max_value_gap = max_value_gap.max(gap);
                if fast_value > oracle.value + 1e-9 || gap > oracle.certified_gap + 1e-9 {
                    failures += 1;
                }
            }
            // Square-root sorted Huber value against the path-scan oracle.
            let tau = 0.5 + (i % 3) as f64;
            let fast_q1 = prox::sorted_huber_q1(&v, &w, tau)?;
            let oracle_q1 = oracle::brute_infconv_q1(&v, &w, tau)?;
            let gap = (fast_q1.value - oracle_q1.value).abs();
            max_value_gap = max_value_gap.max(gap);
            if gap > oracle_q1.certified_gap + 1e-8 {
                failures += 1;
            }
            checked += 1;
        }
    }
    Ok(OracleSummary { checked, failures, max_position_dev, max_value_gap })
}

pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Generate(args) => {
            let out = cmd_generate(&args)?;
            println!(
                "wrote dataset {}: n={} d1={} d2={} outliers={} sigma={} seed={}",
                out.dir.display(),
                out.n,
                out.d1,
                out.d2,
                out.outliers,
                out.sigma,
                out.seed
            );
            Ok(0)
        }
        Command::Fit(args) => {
            let row = cmd_fit(&args)?;
            println!(
                "fit: objective={:.9e} sweeps={} kkt={:.3e} converged={} rmse_total={}",
                row.objective,
                row.sweeps,
                row.kkt,
                row.converged,
                row.rmse_total.map(|v| format!("{v:.6e}")).unwrap_or_else(|| "-".into()),
            );
            Ok(if row.converged { 0 } else { 1 })
        }
        Command::Experiment(args) => {
            let cfg = resolve_experiment_config(&args)?;
            let summary = cmd_experiment(&cfg)?;
            let converged = summary.rows.iter().filter(|r| r.converged).count();
            println!(
                "preset {}: {} cells, {} rows ({} converged), wrote {} in {:.1}s",
                cfg.preset_id,
                summary.cells,
                summary.rows.len(),
                converged,
                summary.out_dir.display(),
                summary.wall_time_s
            );
            Ok(if summary.all_converged { 0 } else { 1 })
        }
        Command::Rates(args) => {
            print!("{}", cmd_rates(&args)?);
            Ok(0)
        }
        Command::Oracle(args) => {
            let summary = cmd_oracle(&args)?;
            println!(
                "oracle agreement: {} checks, {} failures, max position dev {:.3e}, max value gap {:.3e}",
                summary.checked, summary.failures, summary.max_position_dev, summary.max_value_gap
            );
            Ok(if summary.failures == 0 { 0 } else { 1 })
        }
    }
}
