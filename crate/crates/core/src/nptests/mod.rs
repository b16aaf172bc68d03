//! The non-parametric compatibility tests: sign-test family (sign, McNemar,
//! Cox-Stuart), runs family (one-sample runs, Wald-Wolfowitz) and rank family
//! (Mann-Whitney, Wilcoxon signed-rank, Kruskal-Wallis).
//!
//! Every test returns a [`TestResult`]. Small samples get exact p-values from
//! the enumerated null distribution; larger ones fall back to the normal or
//! chi-square approximation. Where both were computed both are reported, and
//! [`TestResult::p`] holds the one used for decisions.

mod rank;
mod runs;
mod sign;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{check_finite, PValue};

pub use rank::{kruskal_wallis_test, mann_whitney_test, wilcoxon_signed_rank_test};
pub use runs::{
    runs_count, runs_moments, runs_test, runs_test_series, wald_wolfowitz_test, WwTieBreak,
};
pub use sign::{cox_stuart_test, mcnemar_test, sign_test, SignCoding};

/// One ordered run of numeric outcomes, in acquisition order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub run_id: String,
    values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl Sample {
    pub fn new(run_id: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let run_id = run_id.into();
        if values.is_empty() {
            return Err(Error::InvalidInput(format!("run {run_id:?} is empty")));
        }
        check_finite(&values, &format!("run {run_id:?}"))?;
        Ok(Sample {
            run_id,
            values,
            label: None,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl AsRef<[f64]> for Sample {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    Sign,
    #[serde(rename = "mcnemar")]
    McNemar,
    CoxStuart,
    Runs,
    WaldWolfowitz,
    MannWhitney,
    Wilcoxon,
    KruskalWallis,
}

impl TestKind {
    pub fn name(self) -> &'static str {
        match self {
            TestKind::Sign => "sign",
            TestKind::McNemar => "mcnemar",
            TestKind::CoxStuart => "cox-stuart",
            TestKind::Runs => "runs",
            TestKind::WaldWolfowitz => "wald-wolfowitz",
            TestKind::MannWhitney => "mann-whitney",
            TestKind::Wilcoxon => "wilcoxon",
            TestKind::KruskalWallis => "kruskal-wallis",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub test: TestKind,
    pub statistic: f64,
    pub statistic_name: String,
    /// Standardized statistic, when a normal approximation applies.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub df: Option<u32>,
    pub p: PValue,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<PValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub asymptotic: Option<PValue>,
    /// Observations (or pairs) per sample that entered the statistic.
    pub n_used: Vec<usize>,
    /// Tied pairs / zero differences discarded before computing the statistic.
    pub ties_skipped: usize,
    /// Observations sharing an averaged rank with another observation.
    pub tied: usize,
    pub notes: Vec<String>,
}

impl TestResult {
    pub(crate) fn new(test: TestKind, statistic: f64, statistic_name: &str, p: PValue) -> Self {
        TestResult {
            test,
            statistic,
            statistic_name: statistic_name.to_string(),
            z: None,
            df: None,
            p,
            exact: None,
            asymptotic: None,
            n_used: Vec::new(),
            ties_skipped: 0,
            tied: 0,
            notes: Vec::new(),
        }
    }
}

/// Largest sizes at which exact null distributions are enumerated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExactThresholds {
    /// Informative pairs `m` for the sign family.
    pub binomial: usize,
    /// `n1 + n2` for the runs and Wald-Wolfowitz tests.
    pub runs: usize,
    /// Nonzero differences for Wilcoxon.
    pub wilcoxon: usize,
    /// `n1 + n2` for Mann-Whitney.
    pub mann_whitney: usize,
    /// Pooled size for Kruskal-Wallis.
    pub kruskal_wallis: usize,
}

impl Default for ExactThresholds {
    fn default() -> Self {
        ExactThresholds {
            binomial: 50,
            runs: 20,
            wilcoxon: 20,
            mann_whitney: 16,
            kruskal_wallis: 10,
        }
    }
}

/// Options shared by all tests. The defaults follow the textbook formulas:
/// no tie-variance correction and no continuity correction.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct NpConfig {
    pub exact: ExactThresholds,
    pub tie_correction: bool,
    pub continuity_correction: bool,
    pub ww_ties: WwTieBreak,
}

impl NpConfig {
    pub(crate) fn continuity(&self, amount: f64) -> f64 {
        if self.continuity_correction {
            amount
        } else {
            0.0
        }
    }
}

/// Picks the decision p-value: exact when available.
pub(crate) fn primary(exact: Option<PValue>, asymptotic: Option<PValue>) -> PValue {
    exact
        .or(asymptotic)
        .expect("at least one p-value is always computed")
}
