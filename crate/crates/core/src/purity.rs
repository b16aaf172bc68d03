//! Purity protocol: tests whether all runs of one experiment look like draws
//! from a single unknown population.
//!
//! The battery is a Kruskal-Wallis omnibus over all runs, Mann-Whitney and
//! Wald-Wolfowitz tests on every pair of runs, and a runs test plus a
//! Cox-Stuart trend test on every run. All computed p-values form one family
//! and are corrected together, so the verdict controls the family-wise error
//! rate at `alpha`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{PValue, Sidedness};
use crate::nptests::{
    cox_stuart_test, kruskal_wallis_test, mann_whitney_test, runs_test_series,
    wald_wolfowitz_test, NpConfig, Sample, TestKind, TestResult, WwTieBreak,
};
use crate::simgen::SimRng;

/// Observations required per run before the battery is attempted.
pub const MIN_RUN_LEN: usize = 5;
/// Smallest sub-ensemble size accepted by [`sub_ensemble_purity`].
pub const MIN_PART_LEN: usize = 10;

/// All runs of one experiment; index `i` is run number `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSet {
    pub experiment_id: String,
    pub runs: Vec<Sample>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl RunSet {
    pub fn new(experiment_id: impl Into<String>, runs: Vec<Sample>) -> Self {
        RunSet {
            experiment_id: experiment_id.into(),
            runs,
            metadata: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Correction {
    Bonferroni,
    #[default]
    Holm,
    None,
}

/// Multiple-comparison adjustment of a family of p-values; output order
/// matches input order.
pub fn correct_pvalues(ps: &[PValue], method: Correction) -> Vec<PValue> {
    let raw: Vec<f64> = ps.iter().map(|p| p.value).collect();
    adjust(&raw, method)
        .into_iter()
        .zip(ps)
        .map(|(v, p)| p.with_value(v))
        .collect()
}

pub(crate) fn adjust(ps: &[f64], method: Correction) -> Vec<f64> {
    let m = ps.len() as f64;
    match method {
        Correction::None => ps.to_vec(),
        Correction::Bonferroni => ps.iter().map(|p| (p * m).min(1.0)).collect(),
        Correction::Holm => {
            let mut order: Vec<usize> = (0..ps.len()).collect();
            // ties keep input order so the result is deterministic
            order.sort_by(|&a, &b| ps[a].total_cmp(&ps[b]).then(a.cmp(&b)));
            let mut out = vec![0.0; ps.len()];
            let mut running = 0.0f64;
            for (rank, &i) in order.iter().enumerate() {
                let adj = ((m - rank as f64) * ps[i]).min(1.0);
                running = running.max(adj);
                out[i] = running;
            }
            out
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    ConsistentWithPure,
    PurityRejected,
    Inconclusive,
}

/// A test in the battery: either computed (with its corrected p-value) or
/// degenerate on the given data.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum TestOutcome {
    Computed { result: TestResult, corrected_p: f64 },
    Degenerate { test: TestKind, reason: String },
}

impl TestOutcome {
    pub fn result(&self) -> Option<&TestResult> {
        match self {
            TestOutcome::Computed { result, .. } => Some(result),
            TestOutcome::Degenerate { .. } => None,
        }
    }

    pub fn corrected_p(&self) -> Option<f64> {
        match self {
            TestOutcome::Computed { corrected_p, .. } => Some(*corrected_p),
            TestOutcome::Degenerate { .. } => None,
        }
    }

    pub fn raw_p(&self) -> Option<f64> {
        self.result().map(|r| r.p.value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairwiseEntry {
    pub i: usize,
    pub j: usize,
    pub mann_whitney: TestOutcome,
    pub wald_wolfowitz: TestOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunEntry {
    pub run: usize,
    pub run_id: String,
    pub runs_test: TestOutcome,
    pub cox_stuart: TestOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PurityReport {
    pub experiment_id: String,
    pub alpha: f64,
    pub correction: Correction,
    pub omnibus: TestOutcome,
    pub pairwise: Vec<PairwiseEntry>,
    pub per_run_randomness: Vec<RunEntry>,
    pub total_tests: usize,
    pub degenerate_tests: usize,
    pub verdict: Verdict,
    pub warnings: Vec<String>,
}

impl PurityReport {
    /// Symmetric `runs x runs` matrix of raw two-sided p-values for a pairwise
    /// test kind; the diagonal and degenerate cells are `None`.
    pub fn pairwise_matrix(&self, kind: TestKind) -> Vec<Vec<Option<f64>>> {
        let n = self.per_run_randomness.len();
        let mut m = vec![vec![None; n]; n];
        for e in &self.pairwise {
            let outcome = match kind {
                TestKind::MannWhitney => &e.mann_whitney,
                TestKind::WaldWolfowitz => &e.wald_wolfowitz,
                _ => continue,
            };
            let p = outcome.raw_p();
            m[e.i][e.j] = p;
            m[e.j][e.i] = p;
        }
        m
    }

    /// Every outcome in the battery, in report order.
    pub fn outcomes(&self) -> Vec<&TestOutcome> {
        let mut all = vec![&self.omnibus];
        for e in &self.pairwise {
            all.push(&e.mann_whitney);
            all.push(&e.wald_wolfowitz);
        }
        for r in &self.per_run_randomness {
            all.push(&r.runs_test);
            all.push(&r.cox_stuart);
        }
        all
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PurityOptions {
    pub alpha: f64,
    pub correction: Correction,
    pub np: NpConfig,
}

impl Default for PurityOptions {
    fn default() -> Self {
        PurityOptions {
            alpha: 0.05,
            correction: Correction::Holm,
            // heavily tied (discrete) runs would otherwise always show too few runs
            np: NpConfig {
                ww_ties: WwTieBreak::MaxRuns,
                ..NpConfig::default()
            },
        }
    }
}

fn outcome(kind: TestKind, r: Result<TestResult>) -> Result<std::result::Result<TestResult, (TestKind, String)>> {
    match r {
        Ok(t) => Ok(Ok(t)),
        Err(Error::Degenerate(reason)) => Ok(Err((kind, reason))),
        Err(e) => Err(e),
    }
}

type Raw = std::result::Result<TestResult, (TestKind, String)>;

/// Runs the purity battery on `rs`.
pub fn purity_test(rs: &RunSet, opts: &PurityOptions) -> Result<PurityReport> {
    if rs.runs.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "purity test needs at least 2 runs, got {}",
            rs.runs.len()
        )));
    }
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {}", opts.alpha)));
    }
    if let Some(r) = rs.runs.iter().find(|r| r.len() < MIN_RUN_LEN) {
        return Err(Error::TooShort {
            needed: MIN_RUN_LEN,
            got: r.len(),
        });
    }
    let cfg = &opts.np;
    let two = Sidedness::TwoSided;

    let omnibus = outcome(TestKind::KruskalWallis, kruskal_wallis_test(&rs.runs, cfg))?;

    let pairs: Vec<(usize, usize)> = (0..rs.runs.len())
        .flat_map(|i| (i + 1..rs.runs.len()).map(move |j| (i, j)))
        .collect();
    let pairwise: Vec<(Raw, Raw)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (a, b) = (rs.runs[i].values(), rs.runs[j].values());
            Ok((
                outcome(TestKind::MannWhitney, mann_whitney_test(a, b, two, cfg))?,
                outcome(TestKind::WaldWolfowitz, wald_wolfowitz_test(a, b, Sidedness::Less, cfg))?,
            ))
        })
        .collect::<Result<_>>()?;
    let per_run: Vec<(Raw, Raw)> = rs
        .runs
        .par_iter()
        .map(|run| {
            Ok((
                outcome(TestKind::Runs, runs_test_series(run.values(), two, cfg))?,
                outcome(TestKind::CoxStuart, cox_stuart_test(run.values(), two, cfg))?,
            ))
        })
        .collect::<Result<_>>()?;

    // one family, in report order
    let mut family: Vec<&Raw> = vec![&omnibus];
    for (a, b) in pairwise.iter().chain(&per_run) {
        family.push(a);
        family.push(b);
    }
    let raw_ps: Vec<f64> = family
        .iter()
        .filter_map(|o| o.as_ref().ok().map(|t| t.p.value))
        .collect();
    let adjusted = adjust(&raw_ps, opts.correction);
    let total_tests = family.len();
    let degenerate_tests = total_tests - raw_ps.len();

    let mut next = adjusted.iter().copied();
    let mut finish = |o: Raw| match o {
        Ok(result) => TestOutcome::Computed {
            result,
            corrected_p: next.next().expect("one adjusted value per computed test"),
        },
        Err((test, reason)) => TestOutcome::Degenerate { test, reason },
    };
    let omnibus = finish(omnibus);
    let pairwise: Vec<PairwiseEntry> = pairs
        .iter()
        .zip(pairwise)
        .map(|(&(i, j), (mw, ww))| PairwiseEntry {
            i,
            j,
            mann_whitney: finish(mw),
            wald_wolfowitz: finish(ww),
        })
        .collect();
    let per_run_randomness: Vec<RunEntry> = rs
        .runs
        .iter()
        .enumerate()
        .zip(per_run)
        .map(|((run, s), (rt, cs))| RunEntry {
            run,
            run_id: s.run_id.clone(),
            runs_test: finish(rt),
            cox_stuart: finish(cs),
        })
        .collect();

    let verdict = if adjusted.iter().any(|&p| p <= opts.alpha) {
        Verdict::PurityRejected
    } else if 2 * degenerate_tests > total_tests {
        Verdict::Inconclusive
    } else {
        Verdict::ConsistentWithPure
    };

    let mut warnings = Vec::new();
    if degenerate_tests > 0 {
        warnings.push(format!("{degenerate_tests} of {total_tests} tests degenerate on these data"));
    }
    let mut report = PurityReport {
        experiment_id: rs.experiment_id.clone(),
        alpha: opts.alpha,
        correction: opts.correction,
        omnibus,
        pairwise,
        per_run_randomness,
        total_tests,
        degenerate_tests,
        verdict,
        warnings,
    };
    let noted = report
        .outcomes()
        .iter()
        .filter(|o| o.result().is_some_and(|r| r.tied > 0))
        .count();
    if noted > 0 {
        report.warnings.push(format!("{noted} tests saw tied observations"));
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitStrategy {
    /// Observations drawn at random (seeded) into the parts; calibrates the null.
    #[default]
    RandomWithoutReplacement,
    /// Consecutive blocks; sensitive to drift over acquisition time.
    BlockContiguous,
}

/// How one long run is cut into sub-ensembles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubEnsembleSpec {
    pub seed: u64,
    /// Share of the run used, in `(0, 1]`.
    pub fraction: f64,
    pub strategy: SplitStrategy,
}

/// Splits `s` into `parts` sub-ensembles. Random parts keep acquisition order
/// internally.
pub fn split_sub_ensembles(s: &Sample, spec: &SubEnsembleSpec, parts: usize) -> Result<RunSet> {
    if parts < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 parts, got {parts}")));
    }
    if !(spec.fraction > 0.0 && spec.fraction <= 1.0) {
        return Err(Error::InvalidInput(format!("fraction must lie in (0, 1], got {}", spec.fraction)));
    }
    let n = s.len();
    let used = ((n as f64) * spec.fraction).round() as usize;
    if used < parts * MIN_PART_LEN {
        return Err(Error::TooShort {
            needed: parts * MIN_PART_LEN,
            got: used,
        });
    }
    let per_part = used / parts;
    let indices: Vec<usize> = match spec.strategy {
        SplitStrategy::BlockContiguous => (0..used).collect(),
        SplitStrategy::RandomWithoutReplacement => {
            let mut idx: Vec<usize> = (0..n).collect();
            SimRng::new(spec.seed).shuffle(&mut idx);
            idx.truncate(used);
            idx
        }
    };
    let runs = indices
        .chunks_exact(per_part)
        .take(parts)
        .enumerate()
        .map(|(p, chunk)| {
            let mut chunk = chunk.to_vec();
            chunk.sort_unstable();
            Sample::new(
                format!("{}/part{p}", s.run_id),
                chunk.iter().map(|&i| s.values()[i]).collect(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rs = RunSet::new(s.run_id.clone(), runs);
    rs.metadata.insert("sub_ensemble_parts".into(), parts.to_string());
    rs.metadata.insert("sub_ensemble_per_part".into(), per_part.to_string());
    Ok(rs)
}

/// Purity battery across sub-ensembles of a single long run.
pub fn sub_ensemble_purity(
    s: &Sample,
    spec: &SubEnsembleSpec,
    parts: usize,
    opts: &PurityOptions,
) -> Result<PurityReport> {
    purity_test(&split_sub_ensembles(s, spec, parts)?, opts)
}
