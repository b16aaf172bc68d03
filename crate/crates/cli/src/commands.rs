use std::collections::BTreeMap;

use anyhow::{anyhow, bail, Context, Result};
use purity_core::kernel::{PValue, Sidedness};
use purity_core::nptests::{cox_stuart_test, runs_test_series, TestKind, TestResult};
use purity_core::purity::{
    correct_pvalues, purity_test, sub_ensemble_purity, PurityReport, SplitStrategy, SubEnsembleSpec,
    TestOutcome, Verdict,
};
use purity_core::simgen::{generate, power_study, GeneratorSpec, SimRng, TestSelector};
use purity_core::timeseries::{
    box_jenkins_scan, decompose_additive, decompose_multiplicative, exp_smooth_with, fit_ar,
    residual_diagnostics, DecomposeOptions, Diagnostics, Model, ScanConfig, SmoothingInit,
};
use purity_core::{RunSet, Sample};
use serde::Serialize;
use serde_json::json;

use crate::cli::*;
use crate::ingest::{ingest_bytes, write_runset, Format};
use crate::report::{sha256_hex, Inputs, Report};

pub const EXIT_PURE: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_REJECTED: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;

pub fn verdict_code(v: Verdict) -> i32 {
    match v {
        Verdict::ConsistentWithPure => EXIT_PURE,
        Verdict::PurityRejected => EXIT_REJECTED,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

/// Finished command: the machine report plus lines for the human summary.
pub struct Outcome {
    pub report: Report,
    pub summary: Vec<String>,
}

pub fn run(cmd: &Command) -> Result<Outcome> {
    match cmd {
        Command::Purity(a) => cmd_purity(a),
        Command::Randomness(a) => cmd_randomness(a),
        Command::Decompose(a) => cmd_decompose(a),
        Command::Forecast(a) => cmd_forecast(a),
        Command::Scan(a) => cmd_scan(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Calibrate(a) => cmd_calibrate(a),
    }
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn load(input: &InputArgs, flags: serde_json::Value, command: &str) -> Result<(RunSet, Report)> {
    let bytes = std::fs::read(&input.input).with_context(|| format!("reading {}", input.input.display()))?;
    let mut report = Report::new(
        command,
        Inputs {
            path: Some(input.input.display().to_string()),
            sha256: Some(sha256_hex(&bytes)),
            flags,
            config: None,
        },
    );
    let id = input
        .input
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("experiment")
        .to_string();
    let ingested = report.timed("ingest", || ingest_bytes(&bytes, &id, &input.schema()))?;
    report.warnings.extend(ingested.warnings);
    let mut rs = ingested.runset;
    if !input.runs.is_empty() {
        for want in &input.runs {
            if !rs.runs.iter().any(|r| &r.run_id == want) {
                bail!("run {want:?} not found in {}", input.input.display());
            }
        }
        rs.runs.retain(|r| input.runs.contains(&r.run_id));
    }
    Ok((rs, report))
}

fn cmd_purity(a: &PurityArgs) -> Result<Outcome> {
    let opts = a.tests.options().map_err(|e| anyhow!(e))?;
    let (rs, mut report) = load(&a.input, to_value(a), "purity")?;
    let rep: PurityReport = match a.parts {
        Some(parts) => {
            let [run] = rs.runs.as_slice() else {
                bail!("--parts splits a single run; the input has {} (select one with --run)", rs.runs.len());
            };
            let strategy = SplitStrategy::from(a.strategy);
            let seed = match (strategy, a.tests.seed) {
                (_, Some(s)) => s,
                (SplitStrategy::BlockContiguous, None) => 0,
                (SplitStrategy::RandomWithoutReplacement, None) => {
                    bail!("--strategy random requires --seed")
                }
            };
            let spec = SubEnsembleSpec {
                seed,
                fraction: a.fraction,
                strategy,
            };
            report.timed("analysis", || sub_ensemble_purity(run, &spec, parts, &opts))?
        }
        None => report.timed("analysis", || purity_test(&rs, &opts))?,
    };
    let significant = rep
        .outcomes()
        .iter()
        .filter(|o| o.corrected_p().is_some_and(|p| p <= rep.alpha))
        .count();
    let summary = vec![format!(
        "purity: {} ({} runs, {} tests, {} significant after {:?} correction at alpha {}, {} degenerate)",
        verdict_name(rep.verdict),
        rep.per_run_randomness.len(),
        rep.total_tests,
        significant,
        rep.correction,
        rep.alpha,
        rep.degenerate_tests
    )];
    report.warnings.extend(rep.warnings.iter().cloned());
    report.exit_code = verdict_code(rep.verdict);
    report.results = json!({
        "verdict": rep.verdict,
        "purity": rep,
        "mann_whitney_matrix": rep.pairwise_matrix(TestKind::MannWhitney),
        "wald_wolfowitz_matrix": rep.pairwise_matrix(TestKind::WaldWolfowitz),
    });
    Ok(Outcome { report, summary })
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::ConsistentWithPure => "consistent with a pure ensemble",
        Verdict::PurityRejected => "purity rejected",
        Verdict::Inconclusive => "inconclusive",
    }
}

#[derive(Serialize)]
struct Frequency {
    value: f64,
    count: usize,
    frequency: f64,
}

#[derive(Serialize)]
struct RandomnessRun {
    run_id: String,
    n: usize,
    /// Present when the run takes at most ten distinct values.
    #[serde(skip_serializing_if = "Option::is_none")]
    frequencies: Option<Vec<Frequency>>,
    runs_test: TestOutcome,
    cox_stuart: TestOutcome,
    acf_whiteness: Diagnostics,
}

fn frequencies(values: &[f64]) -> Option<Vec<Frequency>> {
    let mut counts: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for &v in values {
        let v = if v == 0.0 { 0.0 } else { v };
        // order-preserving key for finite doubles
        let bits = v.to_bits();
        let key = if v < 0.0 { !bits } else { bits | (1 << 63) };
        counts.entry(key).or_insert((v, 0)).1 += 1;
        if counts.len() > 10 {
            return None;
        }
    }
    let n = values.len() as f64;
    Some(
        counts
            .into_values()
            .map(|(value, count)| Frequency {
                value,
                count,
                frequency: count as f64 / n,
            })
            .collect(),
    )
}

fn cmd_randomness(a: &RandomnessArgs) -> Result<Outcome> {
    let opts = a.tests.options().map_err(|e| anyhow!(e))?;
    let (rs, mut report) = load(&a.input, to_value(a), "randomness")?;
    let scan_cfg = ScanConfig {
        whiteness_lags: a.max_lag,
        ..ScanConfig::default()
    };
    let two = Sidedness::TwoSided;
    let raw: Vec<(Sample, [Result<TestResult, (TestKind, String)>; 2], Diagnostics)> = report.timed("analysis", || {
        rs.runs
            .iter()
            .map(|run| {
                let split = |kind: TestKind, r: purity_core::Result<TestResult>| match r {
                    Ok(t) => Ok(Ok(t)),
                    // a run too short to test counts as degenerate, not as a failure
                    Err(e) if e.is_degenerate() || matches!(e, purity_core::Error::TooShort { .. }) => {
                        Ok(Err((kind, e.to_string())))
                    }
                    Err(e) => Err(e),
                };
                let runs = split(TestKind::Runs, runs_test_series(run.values(), two, &opts.np))?;
                let cs = split(TestKind::CoxStuart, cox_stuart_test(run.values(), two, &opts.np))?;
                Ok((run.clone(), [runs, cs], residual_diagnostics(run.values(), &scan_cfg)))
            })
            .collect::<purity_core::Result<Vec<_>>>()
    })?;
    let family: Vec<PValue> = raw
        .iter()
        .flat_map(|(_, tests, _)| tests.iter().filter_map(|t| t.as_ref().ok().map(|r| r.p)))
        .collect();
    let mut corrected = correct_pvalues(&family, opts.correction).into_iter();
    let total = raw.len() * 2;
    let mut degenerate = 0;
    let mut rejected = 0;
    let mut runs_out = Vec::with_capacity(raw.len());
    for (run, tests, diag) in raw {
        let [runs_test, cox_stuart] = tests.map(|t| match t {
            Ok(result) => {
                let corrected_p = corrected.next().expect("one corrected value per test").value;
                if corrected_p <= opts.alpha {
                    rejected += 1;
                }
                TestOutcome::Computed { result, corrected_p }
            }
            Err((test, reason)) => {
                degenerate += 1;
                TestOutcome::Degenerate { test, reason }
            }
        });
        runs_out.push(RandomnessRun {
            run_id: run.run_id.clone(),
            n: run.len(),
            frequencies: frequencies(run.values()),
            runs_test,
            cox_stuart,
            acf_whiteness: diag,
        });
    }
    let verdict = if rejected > 0 {
        Verdict::PurityRejected
    } else if 2 * degenerate > total {
        Verdict::Inconclusive
    } else {
        Verdict::ConsistentWithPure
    };
    if degenerate > 0 {
        report.warnings.push(format!("{degenerate} of {total} tests were degenerate"));
    }
    let summary = vec![format!(
        "randomness: {} ({} runs, {rejected} of {total} tests significant, {degenerate} degenerate)",
        if verdict == Verdict::PurityRejected { "randomness rejected" } else { verdict_name(verdict) },
        runs_out.len()
    )];
    report.exit_code = verdict_code(verdict);
    report.results = json!({
        "verdict": verdict,
        "alpha": opts.alpha,
        "correction": opts.correction,
        "total_tests": total,
        "degenerate_tests": degenerate,
        "runs": runs_out,
    });
    Ok(Outcome { report, summary })
}

fn cmd_decompose(a: &DecomposeArgs) -> Result<Outcome> {
    let (rs, mut report) = load(&a.input, to_value(a), "decompose")?;
    let opts = DecomposeOptions {
        period: a.period,
        trend_window: a.window,
    };
    let model = Model::from(a.model);
    let mut summary = Vec::new();
    let per_run = report.timed("analysis", || {
        rs.runs
            .iter()
            .map(|run| {
                let d = match model {
                    Model::Additive => decompose_additive(run.values(), &opts),
                    Model::Multiplicative => decompose_multiplicative(run.values(), &opts),
                }
                .with_context(|| format!("run {}", run.run_id))?;
                let recon = d.reconstruct();
                let max_err = d
                    .defined()
                    .map(|t| (recon[t].expect("defined") - run.values()[t]).abs())
                    .fold(0.0, f64::max);
                summary.push(format!(
                    "decompose {}: seasonal indices {:?}, {} defined points, max reconstruction error {max_err:e}",
                    run.run_id,
                    d.seasonal_indices,
                    d.defined().count()
                ));
                Ok(json!({
                    "run_id": run.run_id,
                    "max_reconstruction_error": max_err,
                    "decomposition": d,
                }))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    report.results = json!({ "runs": per_run });
    Ok(Outcome { report, summary })
}

fn cmd_forecast(a: &ForecastArgs) -> Result<Outcome> {
    let (rs, mut report) = load(&a.input, to_value(a), "forecast")?;
    let init = a.init_mean.map_or(SmoothingInit::FirstValue, SmoothingInit::MeanOfFirst);
    let mut summary = Vec::new();
    let per_run = report.timed("analysis", || {
        rs.runs
            .iter()
            .map(|run| {
                let (fitted, next) = exp_smooth_with(run.values(), a.w, init).with_context(|| format!("run {}", run.run_id))?;
                let mut entry = json!({
                    "run_id": run.run_id,
                    "w": a.w,
                    "fitted": fitted,
                    "next": next,
                });
                let mut line = format!("forecast {}: next {next}", run.run_id);
                if let Some(p) = a.ar_order {
                    let m = fit_ar(run.values(), p).with_context(|| format!("run {}", run.run_id))?;
                    let f = m.forecast(run.values(), a.horizon)?;
                    line.push_str(&format!(", AR({p}) {:?}", f));
                    entry["ar"] = json!({
                        "order": m.order,
                        "coefficients": m.coefficients,
                        "intercept": m.intercept,
                        "sigma2": m.sigma2,
                        "forecast": f,
                    });
                }
                summary.push(line);
                Ok(entry)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    report.results = json!({ "runs": per_run });
    Ok(Outcome { report, summary })
}

fn cmd_scan(a: &ScanArgs) -> Result<Outcome> {
    let (rs, mut report) = load(&a.input, to_value(a), "scan")?;
    let cfg = ScanConfig {
        max_p: a.max_p,
        max_d: a.max_d,
        whiteness_lags: a.lags,
        ..ScanConfig::default()
    };
    let mut summary = Vec::new();
    let per_run = report.timed("analysis", || {
        rs.runs
            .iter()
            .map(|run| {
                let ranked = box_jenkins_scan(run.values(), &cfg).with_context(|| format!("run {}", run.run_id))?;
                let keep = if a.top == 0 { ranked.len() } else { a.top.min(ranked.len()) };
                let best = &ranked[0];
                summary.push(format!(
                    "scan {}: best ARI(p={}, d={}){}",
                    run.run_id,
                    best.p,
                    best.d,
                    if best.diagnostics.adequate { "" } else { " (no adequate model)" }
                ));
                let models: Vec<serde_json::Value> = ranked[..keep]
                    .iter()
                    .enumerate()
                    .map(|(i, e)| {
                        json!({
                            "rank": i + 1,
                            "p": e.p,
                            "d": e.d,
                            "coefficients": e.model.as_ref().map(|m| &m.coefficients),
                            "intercept": e.model.as_ref().map(|m| m.intercept),
                            "sigma2": e.model.as_ref().map(|m| m.sigma2),
                            "residuals": e.model.as_ref().map(|m| m.residuals.len()),
                            "diagnostics": e.diagnostics,
                        })
                    })
                    .collect();
                Ok(json!({ "run_id": run.run_id, "models": models }))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    report.results = json!({ "config": cfg, "runs": per_run });
    Ok(Outcome { report, summary })
}

fn read_spec(path: &std::path::Path, seed: u64, warnings: &mut Vec<String>) -> Result<(GeneratorSpec, String)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let table: toml::Table = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if let Some(s) = table.get("seed") {
        if s.as_integer() != i64::try_from(seed).ok() {
            warnings.push(format!("config seed {s} replaced by --seed {seed}"));
        }
    }
    let mut spec: GeneratorSpec = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    spec.seed = seed;
    spec.validate()?;
    Ok((spec, sha256_hex(text.as_bytes())))
}

fn cmd_simulate(a: &SimulateArgs) -> Result<Outcome> {
    let mut warnings = Vec::new();
    let (spec, digest) = read_spec(&a.config, a.seed, &mut warnings)?;
    let mut report = Report::new(
        "simulate",
        Inputs {
            path: Some(a.config.display().to_string()),
            sha256: Some(digest),
            flags: to_value(a),
            config: Some(to_value(&spec)),
        },
    );
    report.warnings = warnings;
    let g = report.timed("generate", || generate(&spec))?;
    let format = a.format.unwrap_or_else(|| Format::from_path(&a.data));
    let mut buf = Vec::new();
    write_runset(&g.runset, format, &mut buf)?;
    std::fs::write(&a.data, &buf).with_context(|| format!("writing {}", a.data.display()))?;
    let summary = vec![format!(
        "simulate: {} runs x {} ({}, {:?}) written to {}",
        spec.runs,
        spec.run_length,
        spec.kind(),
        g.ground_truth.truth,
        a.data.display()
    )];
    report.results = json!({
        "rng": g.rng,
        "spec": g.spec,
        "ground_truth": g.ground_truth,
        "experiment_id": g.runset.experiment_id,
        "format": format,
        "data_sha256": sha256_hex(&buf),
    });
    Ok(Outcome { report, summary })
}

#[derive(Serialize)]
struct PowerCell {
    test: TestSelector,
    magnitude: f64,
    run_length: usize,
    replications: usize,
    rejections: usize,
    degenerate: usize,
    power: f64,
    ci_low: f64,
    ci_high: f64,
}

fn cmd_calibrate(a: &CalibrateArgs) -> Result<Outcome> {
    let seed = a.tests_opts.seed.context("calibrate requires --seed")?;
    let opts = a.tests_opts.options().map_err(|e| anyhow!(e))?;
    let mut warnings = Vec::new();
    let (spec, digest) = read_spec(&a.config, seed, &mut warnings)?;
    let mut report = Report::new(
        "calibrate",
        Inputs {
            path: Some(a.config.display().to_string()),
            sha256: Some(digest),
            flags: to_value(a),
            config: Some(to_value(&spec)),
        },
    );
    report.warnings = warnings;
    let magnitudes = if a.magnitudes.is_empty() { vec![0.0] } else { a.magnitudes.clone() };
    let lengths = if a.lengths.is_empty() { vec![spec.run_length] } else { a.lengths.clone() };
    let tests: Vec<TestSelector> = if a.tests.is_empty() {
        vec![TestSelector::Purity]
    } else {
        a.tests.iter().map(|&t| t.into()).collect()
    };
    let mut cells = Vec::new();
    let mut summary = vec![format!(
        "calibrate: {} replications per cell, alpha {}, rng {}",
        a.replications,
        opts.alpha,
        SimRng::ALGORITHM
    )];
    report.timed("simulation", || -> Result<()> {
        for &test in &tests {
            for &m in &magnitudes {
                for &len in &lengths {
                    let mut cell_spec = spec.with_magnitude(m);
                    cell_spec.run_length = len;
                    let est = power_study(&cell_spec, test, &opts, a.replications)?;
                    summary.push(format!(
                        "  {:<16} magnitude {m:<6} length {len:<6} power {:.4} [{:.4}, {:.4}]",
                        format!("{test:?}"),
                        est.power,
                        est.ci_low,
                        est.ci_high
                    ));
                    cells.push(PowerCell {
                        test,
                        magnitude: m,
                        run_length: len,
                        replications: est.replications,
                        rejections: est.rejections,
                        degenerate: est.degenerate,
                        power: est.power,
                        ci_low: est.ci_low,
                        ci_high: est.ci_high,
                    });
                }
            }
        }
        Ok(())
    })?;
    report.results = json!({
        "rng": SimRng::ALGORITHM,
        "alpha": opts.alpha,
        "options": opts,
        "cells": cells,
    });
    Ok(Outcome { report, summary })
}
