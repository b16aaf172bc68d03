use serde::{Deserialize, Serialize};

use super::{primary, NpConfig, TestKind, TestResult};
use crate::error::{Error, Result};
use crate::kernel::{check_finite, normal_pvalue, DiscreteNull, Method, Sidedness};
use crate::simgen::SimRng;

/// How observations tied across the two Wald-Wolfowitz samples are ordered
/// in the pooled sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WwTieBreak {
    /// First-sample observations precede second-sample ones inside a tied block.
    #[default]
    SampleOrder,
    /// The ordering with the most runs; the least significant tie-break for
    /// the "too few runs" alternative.
    MaxRuns,
    /// Uniformly random order inside tied blocks from a seeded stream.
    Seeded(u64),
}

/// Number of maximal constant segments. Errors when more than two distinct
/// symbols occur.
pub fn runs_count<T: PartialEq>(seq: &[T]) -> Result<usize> {
    let Some(first) = seq.first() else {
        return Err(Error::InvalidInput("runs of an empty sequence".into()));
    };
    let mut other: Option<&T> = None;
    let mut runs = 1;
    for w in seq.windows(2) {
        if w[1] != *first {
            match other {
                None => other = Some(&w[1]),
                Some(o) if *o != w[1] => {
                    return Err(Error::InvalidInput(
                        "runs count needs at most two distinct symbols".into(),
                    ))
                }
                _ => {}
            }
        }
        if w[0] != w[1] {
            runs += 1;
        }
    }
    Ok(runs)
}

/// Null mean and variance of the number of runs for `n1` and `n2` symbols.
pub fn runs_moments(n1: usize, n2: usize) -> (f64, f64) {
    let (a, b) = (n1 as f64, n2 as f64);
    let n = a + b;
    let mean = 2.0 * a * b / n + 1.0;
    let var = if n > 1.0 {
        2.0 * a * b * (2.0 * a * b - a - b) / (n * n * (n - 1.0))
    } else {
        0.0
    };
    (mean, var)
}

fn choose(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut c = 1.0f64;
    for i in 0..k {
        c = (c * (n - i) as f64 / (i + 1) as f64).round();
    }
    c
}

/// Exact distribution of the runs count over the `C(n1+n2, n1)` equally likely
/// arrangements.
pub(crate) fn runs_null(n1: usize, n2: usize) -> DiscreteNull {
    let mut counts = Vec::new();
    let max_r = if n1 == n2 { 2 * n1 } else { 2 * n1.min(n2) + 1 };
    for r in 2..=max_r {
        let c = if r % 2 == 0 {
            let s = r / 2;
            2.0 * choose(n1 - 1, s - 1) * choose(n2 - 1, s - 1)
        } else {
            let s = (r - 1) / 2;
            choose(n1 - 1, s - 1) * choose(n2 - 1, s) + choose(n1 - 1, s) * choose(n2 - 1, s - 1)
        };
        counts.push((r as i64, c));
    }
    DiscreteNull::from_counts(counts)
}

fn runs_from_counts(
    kind: TestKind,
    runs: usize,
    n1: usize,
    n2: usize,
    sidedness: Sidedness,
    cfg: &NpConfig,
) -> Result<TestResult> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::Degenerate(
            "runs test undefined: only one symbol present".into(),
        ));
    }
    let exact = if n1 + n2 <= cfg.exact.runs {
        Some(runs_null(n1, n2).pvalue(runs as i64, sidedness, Method::Exact))
    } else {
        None
    };
    let (mean, var) = runs_moments(n1, n2);
    let asym = if var > 0.0 {
        Some(normal_pvalue(runs as f64, mean, var, cfg.continuity(0.5), sidedness)?)
    } else {
        None
    };
    if exact.is_none() && asym.is_none() {
        return Err(Error::Degenerate("runs count has zero null variance".into()));
    }
    let mut r = TestResult::new(kind, runs as f64, "R", primary(exact, asym.map(|a| a.1)));
    r.z = asym.map(|a| a.0);
    r.exact = exact;
    r.asymptotic = asym.map(|a| a.1);
    r.n_used = vec![n1, n2];
    Ok(r)
}

/// One-sample runs test on a two-symbol sequence. `n_used` is `[n1, n2]`
/// with `n1` counting the symbol of the first element.
pub fn runs_test<T: PartialEq>(seq: &[T], sidedness: Sidedness, cfg: &NpConfig) -> Result<TestResult> {
    let runs = runs_count(seq)?;
    let n1 = seq.iter().filter(|s| **s == seq[0]).count();
    let n2 = seq.len() - n1;
    runs_from_counts(TestKind::Runs, runs, n1, n2, sidedness, cfg)
}

/// Runs test on a numeric series. A series with exactly two distinct values
/// is used as is; otherwise it is coded above/below its median and values
/// equal to the median are dropped.
pub fn runs_test_series(values: &[f64], sidedness: Sidedness, cfg: &NpConfig) -> Result<TestResult> {
    check_finite(values, "runs test")?;
    if values.is_empty() {
        return Err(Error::InvalidInput("runs test of an empty series".into()));
    }
    let first = values[0];
    let second = values.iter().copied().find(|&v| v != first);
    let two_valued = match second {
        None => return Err(Error::Degenerate("runs test undefined: constant series".into())),
        Some(s) => values.iter().all(|&v| v == first || v == s),
    };
    if two_valued {
        return runs_test(values, sidedness, cfg);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = sorted.len();
    let (lo, hi) = if n % 2 == 1 {
        (sorted[n / 2], sorted[n / 2])
    } else {
        (sorted[n / 2 - 1], sorted[n / 2])
    };
    // strictly above the upper middle value, or strictly below the lower one;
    // with lo < hi nothing lies strictly between them
    let codes: Vec<bool> = values
        .iter()
        .filter_map(|&v| {
            if v > hi || (v >= hi && lo < hi) {
                Some(true)
            } else if v < lo || (v <= lo && lo < hi) {
                Some(false)
            } else {
                None
            }
        })
        .collect();
    let dropped = n - codes.len();
    let runs = runs_count(&codes)?;
    let n1 = codes.iter().filter(|&&c| c == codes[0]).count();
    let mut r = runs_from_counts(TestKind::Runs, runs, n1, codes.len() - n1, sidedness, cfg)?;
    r.ties_skipped = dropped;
    r.notes.push("coded above/below the median".into());
    Ok(r)
}

/// Max runs achievable inside a tied block holding `a` zeros and `b` ones,
/// starting with symbol `first` and ending with `last`. `None` if infeasible.
fn block_max_runs(a: usize, b: usize, first: bool, last: bool) -> Option<usize> {
    let count = |s: bool| if s { b } else { a };
    if count(first) == 0 || count(last) == 0 {
        return None;
    }
    if a == 0 || b == 0 {
        return Some(1);
    }
    if first == last {
        // both symbols present, so at least three runs
        let r = (2 * count(first) - 1).min(2 * count(!first) + 1);
        (r >= 3).then_some(r)
    } else {
        Some(2 * a.min(b))
    }
}

/// Wald-Wolfowitz two-sample runs test. The pooled sample is sorted, first
/// sample observations are coded 0 and second sample ones 1, and the runs
/// test is applied to the code sequence. "Too few runs" (`Less`) is the
/// alternative of differing distributions.
pub fn wald_wolfowitz_test(
    s1: &[f64],
    s2: &[f64],
    sidedness: Sidedness,
    cfg: &NpConfig,
) -> Result<TestResult> {
    if s1.is_empty() || s2.is_empty() {
        return Err(Error::InvalidInput("wald-wolfowitz needs two non-empty samples".into()));
    }
    check_finite(s1, "wald-wolfowitz s1")?;
    check_finite(s2, "wald-wolfowitz s2")?;
    let mut pooled: Vec<(f64, bool)> = s1
        .iter()
        .map(|&v| (v, false))
        .chain(s2.iter().map(|&v| (v, true)))
        .collect();
    // stable: s1 entries precede s2 entries within equal values
    pooled.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));

    let mut blocks: Vec<(usize, usize, usize)> = Vec::new(); // (start, zeros, ones)
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        let (mut a, mut b) = (0, 0);
        while j < pooled.len() && pooled[j].0 == pooled[i].0 {
            if pooled[j].1 {
                b += 1;
            } else {
                a += 1;
            }
            j += 1;
        }
        blocks.push((i, a, b));
        i = j;
    }
    if blocks.len() == 1 {
        return Err(Error::Degenerate("wald-wolfowitz: every observation tied".into()));
    }
    let cross: Vec<&(usize, usize, usize)> = blocks.iter().filter(|b| b.1 > 0 && b.2 > 0).collect();
    let cross_obs: usize = cross.iter().map(|b| b.1 + b.2).sum();

    let runs = match cfg.ww_ties {
        WwTieBreak::SampleOrder => runs_count(&pooled.iter().map(|p| p.1).collect::<Vec<_>>())?,
        WwTieBreak::Seeded(seed) => {
            let mut rng = SimRng::new(seed);
            let mut codes: Vec<bool> = pooled.iter().map(|p| p.1).collect();
            for &&(start, a, b) in &cross {
                rng.shuffle(&mut codes[start..start + a + b]);
            }
            runs_count(&codes)?
        }
        WwTieBreak::MaxRuns => {
            // dp[s] = most symbol changes so far with the sequence ending in s
            let mut dp: [Option<usize>; 2] = [None, None];
            for (bi, &(_, a, b)) in blocks.iter().enumerate() {
                let mut next = [None, None];
                for first in [false, true] {
                    for last in [false, true] {
                        let Some(r) = block_max_runs(a, b, first, last) else {
                            continue;
                        };
                        let inner = r - 1;
                        let best = if bi == 0 {
                            Some(inner)
                        } else {
                            [false, true]
                                .iter()
                                .filter_map(|&prev| {
                                    dp[prev as usize].map(|c| c + inner + usize::from(prev != first))
                                })
                                .max()
                        };
                        if let Some(v) = best {
                            let slot = &mut next[last as usize];
                            *slot = Some(slot.map_or(v, |s: usize| s.max(v)));
                        }
                    }
                }
                dp = next;
            }
            dp.iter().flatten().max().copied().expect("non-empty pooled sample") + 1
        }
    };

    let mut r = runs_from_counts(TestKind::WaldWolfowitz, runs, s1.len(), s2.len(), sidedness, cfg)?;
    r.tied = cross_obs;
    if !cross.is_empty() {
        let rule = match cfg.ww_ties {
            WwTieBreak::SampleOrder => "first sample placed first",
            WwTieBreak::MaxRuns => "ordering with the most runs",
            WwTieBreak::Seeded(_) => "seeded random order",
        };
        r.notes.push(format!(
            "{} observations tied across samples in {} blocks; pooled order ambiguous, broken by {rule}",
            cross_obs,
            cross.len()
        ));
    }
    Ok(r)
}
