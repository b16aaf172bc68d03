use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use purity_core::nptests::{ExactThresholds, NpConfig, WwTieBreak};
use purity_core::purity::{Correction, PurityOptions, SplitStrategy};
use purity_core::simgen::TestSelector;
use purity_core::timeseries::Model;
use serde::Serialize;

use crate::ingest::{Format, IngestSchema, MissingPolicy};

/// Purity tests for ensembles of experimental runs.
///
/// Exit status: 0 consistent with a pure ensemble (or success), 2 purity
/// rejected, 3 inconclusive, 1 usage or data error.
#[derive(Debug, Parser)]
#[command(name = "purity", version)]
pub struct Cli {
    /// Write the JSON report to this file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for parallel stages (default: one per core).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Do not print the summary on stderr.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test whether all runs come from one population.
    Purity(PurityArgs),
    /// Per-run randomness: runs test, Cox-Stuart trend test, acf whiteness.
    Randomness(RandomnessArgs),
    /// Classical trend / seasonal / cycle / irregular decomposition.
    Decompose(DecomposeArgs),
    /// Exponential smoothing forecasts, optionally with an AR model.
    Forecast(ForecastArgs),
    /// Box-Jenkins scan over ARI(p, d) models.
    Scan(ScanArgs),
    /// Generate a synthetic run set from a TOML generator config.
    Simulate(SimulateArgs),
    /// Monte Carlo power table over contamination magnitudes and run lengths.
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// CSV or JSON-lines file, one observation per row.
    pub input: PathBuf,
    /// Input format (default: from the file extension).
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long, default_value = "run")]
    pub run_col: String,
    #[arg(long, default_value = "t")]
    pub index_col: String,
    #[arg(long, default_value = "v")]
    pub value_col: String,
    /// What to do with rows lacking a usable value.
    #[arg(long, value_enum, default_value = "error")]
    pub missing: MissingPolicy,
    /// Restrict the analysis to these run ids (repeatable).
    #[arg(long = "run")]
    pub runs: Vec<String>,
}

impl InputArgs {
    pub fn schema(&self) -> IngestSchema {
        IngestSchema {
            format: self.format.unwrap_or_else(|| Format::from_path(&self.input)),
            run_column: self.run_col.clone(),
            index_column: self.index_col.clone(),
            value_column: self.value_col.clone(),
            missing_policy: self.missing,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrectionArg {
    Holm,
    Bonferroni,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreakArg {
    /// Most runs over orderings of tied values (conservative).
    MaxRuns,
    /// First sample before second inside tied values.
    SampleOrder,
    /// Random order inside tied values; needs --seed.
    Random,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TestArgs {
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value = "holm")]
    pub correction: CorrectionArg,
    /// Override an exact-distribution size limit, e.g. `mann-whitney=20`.
    /// Keys: binomial, runs, wilcoxon, mann-whitney, kruskal-wallis.
    #[arg(long = "exact-threshold", value_parser = parse_threshold)]
    pub exact_thresholds: Vec<(String, usize)>,
    /// Use tie-corrected variances in the normal approximations.
    #[arg(long)]
    pub tie_correction: bool,
    #[arg(long)]
    pub continuity_correction: bool,
    /// Ordering of tied values in the Wald-Wolfowitz test.
    #[arg(long, value_enum, default_value = "max-runs")]
    pub ww_ties: TieBreakArg,
    /// Seed for randomized choices (random tie-breaking, random splits).
    #[arg(long)]
    pub seed: Option<u64>,
}

fn parse_threshold(s: &str) -> Result<(String, usize), String> {
    let (k, v) = s.split_once('=').ok_or("expected KEY=N")?;
    let k = k.trim().to_string();
    if !matches!(k.as_str(), "binomial" | "runs" | "wilcoxon" | "mann-whitney" | "kruskal-wallis") {
        return Err(format!("unknown test {k:?}"));
    }
    let v = v.trim().parse().map_err(|_| format!("{v:?} is not a count"))?;
    Ok((k, v))
}

impl TestArgs {
    pub fn options(&self) -> Result<PurityOptions, String> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(format!("--alpha must lie in (0, 1), got {}", self.alpha));
        }
        let mut exact = ExactThresholds::default();
        for (k, v) in &self.exact_thresholds {
            match k.as_str() {
                "binomial" => exact.binomial = *v,
                "runs" => exact.runs = *v,
                "wilcoxon" => exact.wilcoxon = *v,
                "mann-whitney" => exact.mann_whitney = *v,
                _ => exact.kruskal_wallis = *v,
            }
        }
        let ww_ties = match self.ww_ties {
            TieBreakArg::MaxRuns => WwTieBreak::MaxRuns,
            TieBreakArg::SampleOrder => WwTieBreak::SampleOrder,
            TieBreakArg::Random => WwTieBreak::Seeded(
                self.seed.ok_or("--ww-ties random requires --seed")?,
            ),
        };
        Ok(PurityOptions {
            alpha: self.alpha,
            correction: match self.correction {
                CorrectionArg::Holm => Correction::Holm,
                CorrectionArg::Bonferroni => Correction::Bonferroni,
                CorrectionArg::None => Correction::None,
            },
            np: NpConfig {
                exact,
                tie_correction: self.tie_correction,
                continuity_correction: self.continuity_correction,
                ww_ties,
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyArg {
    Random,
    Block,
}

impl From<StrategyArg> for SplitStrategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Random => SplitStrategy::RandomWithoutReplacement,
            StrategyArg::Block => SplitStrategy::BlockContiguous,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PurityArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub tests: TestArgs,
    /// Split a single run into this many sub-ensembles.
    #[arg(long)]
    pub parts: Option<usize>,
    /// How sub-ensembles are drawn (random needs --seed).
    #[arg(long, value_enum, default_value = "random")]
    pub strategy: StrategyArg,
    /// Share of the run used for sub-ensembles.
    #[arg(long, default_value_t = 1.0)]
    pub fraction: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RandomnessArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub tests: TestArgs,
    /// Highest acf lag in the whiteness check.
    #[arg(long, default_value_t = 20)]
    pub max_lag: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelArg {
    Additive,
    Multiplicative,
}

impl From<ModelArg> for Model {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Additive => Model::Additive,
            ModelArg::Multiplicative => Model::Multiplicative,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Seasonal period in observations.
    #[arg(long)]
    pub period: usize,
    #[arg(long, value_enum, default_value = "additive")]
    pub model: ModelArg,
    /// Trend moving-average window (default 2 * period + 1).
    #[arg(long)]
    pub window: Option<usize>,
}

fn parse_weight(s: &str) -> Result<f64, String> {
    let w: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if w > 0.0 && w < 1.0 {
        Ok(w)
    } else {
        Err(format!("weighting factor must lie in (0, 1), got {w}"))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ForecastArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Weighting factor of exponential smoothing, in (0, 1).
    #[arg(long = "w", alias = "weight", value_parser = parse_weight, allow_negative_numbers = true)]
    pub w: f64,
    /// Start from the mean of the first K observations instead of the first one.
    #[arg(long, value_name = "K")]
    pub init_mean: Option<usize>,
    /// Also fit an AR model of this order and forecast with it.
    #[arg(long)]
    pub ar_order: Option<usize>,
    /// Steps ahead for the AR forecast.
    #[arg(long, default_value_t = 1)]
    pub horizon: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScanArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 5)]
    pub max_p: usize,
    #[arg(long, default_value_t = 2)]
    pub max_d: usize,
    /// Residual acf lags inspected.
    #[arg(long, default_value_t = 20)]
    pub lags: usize,
    /// Report only the best N models per run (0 = all).
    #[arg(long, default_value_t = 0)]
    pub top: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// TOML generator config.
    #[arg(long)]
    pub config: PathBuf,
    /// Generator seed; required, overrides any seed in the config.
    #[arg(long)]
    pub seed: u64,
    /// Where to write the generated observations.
    #[arg(long)]
    pub data: PathBuf,
    /// Data format (default: from the extension of --data).
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CalibrateArgs {
    /// TOML generator config (the base design). `--seed` is required.
    #[arg(long)]
    pub config: PathBuf,
    /// Contamination magnitudes (comma separated; default 0).
    #[arg(long, value_delimiter = ',')]
    pub magnitudes: Vec<f64>,
    /// Run lengths (comma separated; default: the config's).
    #[arg(long, value_delimiter = ',')]
    pub lengths: Vec<usize>,
    /// Tests to calibrate (comma separated; default purity).
    #[arg(long, value_enum, value_delimiter = ',')]
    pub tests: Vec<TestArg>,
    #[arg(long, default_value_t = 1000)]
    pub replications: usize,
    #[command(flatten)]
    pub tests_opts: TestArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestArg {
    Purity,
    KruskalWallis,
    MannWhitney,
    WaldWolfowitz,
    Runs,
    CoxStuart,
    Sign,
    Wilcoxon,
    Mcnemar,
}

impl From<TestArg> for TestSelector {
    fn from(t: TestArg) -> Self {
        match t {
            TestArg::Purity => TestSelector::Purity,
            TestArg::KruskalWallis => TestSelector::KruskalWallis,
            TestArg::MannWhitney => TestSelector::MannWhitney,
            TestArg::WaldWolfowitz => TestSelector::WaldWolfowitz,
            TestArg::Runs => TestSelector::Runs,
            TestArg::CoxStuart => TestSelector::CoxStuart,
            TestArg::Sign => TestSelector::Sign,
            TestArg::Wilcoxon => TestSelector::Wilcoxon,
            TestArg::Mcnemar => TestSelector::McNemar,
        }
    }
}
