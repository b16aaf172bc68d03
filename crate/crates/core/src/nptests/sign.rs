use serde::Serialize;

use super::{primary, NpConfig, TestKind, TestResult};
use crate::error::{Error, Result};
use crate::kernel::{binomial_tail, check_finite, normal_pvalue, Sidedness};

/// Sign counts after ties were dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SignCoding {
    pub plus: usize,
    pub minus: usize,
    pub ties: usize,
}

impl SignCoding {
    pub fn m(&self) -> usize {
        self.plus + self.minus
    }

    fn push(&mut self, code: std::cmp::Ordering) {
        match code {
            std::cmp::Ordering::Greater => self.plus += 1,
            std::cmp::Ordering::Less => self.minus += 1,
            std::cmp::Ordering::Equal => self.ties += 1,
        }
    }
}

/// Binomial test on `T = #plus` out of `m = plus + minus`.
fn test_codes(
    kind: TestKind,
    codes: SignCoding,
    sidedness: Sidedness,
    cfg: &NpConfig,
) -> Result<TestResult> {
    let m = codes.m();
    if m == 0 {
        return Err(Error::Degenerate(format!(
            "{}: no informative pairs ({} ties)",
            kind.name(),
            codes.ties
        )));
    }
    let t = codes.plus as f64;
    let exact = if m <= cfg.exact.binomial {
        Some(binomial_tail(m as u64, codes.plus as u64, sidedness)?)
    } else {
        None
    };
    // Z = (2T - m) / sqrt(m), i.e. T against mean m/2 and variance m/4
    let (z, asym) = normal_pvalue(t, m as f64 / 2.0, m as f64 / 4.0, cfg.continuity(0.5), sidedness)?;
    let mut r = TestResult::new(kind, t, "T", primary(exact, Some(asym)));
    r.z = Some(z);
    r.exact = exact;
    r.asymptotic = Some(asym);
    r.n_used = vec![m];
    r.ties_skipped = codes.ties;
    Ok(r)
}

/// Paired sign test: `+1` where `x[i] > y[i]`, `-1` where `y[i] > x[i]`,
/// equal pairs skipped.
pub fn sign_test(x: &[f64], y: &[f64], sidedness: Sidedness, cfg: &NpConfig) -> Result<TestResult> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    check_finite(x, "sign test x")?;
    check_finite(y, "sign test y")?;
    let mut codes = SignCoding {
        plus: 0,
        minus: 0,
        ties: 0,
    };
    for (a, b) in x.iter().zip(y) {
        codes.push(a.partial_cmp(b).expect("finite"));
    }
    test_codes(TestKind::Sign, codes, sidedness, cfg)
}

/// McNemar test on paired binary outcomes: `(0,1)` counts as `+1`, `(1,0)`
/// as `-1`, concordant pairs are ties.
pub fn mcnemar_test(pairs: &[(u8, u8)], sidedness: Sidedness, cfg: &NpConfig) -> Result<TestResult> {
    let mut codes = SignCoding {
        plus: 0,
        minus: 0,
        ties: 0,
    };
    for (i, &(a, b)) in pairs.iter().enumerate() {
        match (a, b) {
            (0, 1) => codes.plus += 1,
            (1, 0) => codes.minus += 1,
            (0, 0) | (1, 1) => codes.ties += 1,
            _ => {
                return Err(Error::InvalidInput(format!(
                    "mcnemar: pair {i} = ({a}, {b}) is not binary"
                )))
            }
        }
    }
    test_codes(TestKind::McNemar, codes, sidedness, cfg)
}

/// Cox-Stuart trend test. The series is split in halves (the middle point is
/// dropped for odd lengths) and `x[i]` is paired with `x[i + k]`; a pair
/// codes `+1` when the later member is larger.
pub fn cox_stuart_test(series: &[f64], sidedness: Sidedness, cfg: &NpConfig) -> Result<TestResult> {
    check_finite(series, "cox-stuart")?;
    let n = series.len();
    if n < 2 {
        return Err(Error::TooShort { needed: 2, got: n });
    }
    let k = n / 2;
    let offset = n - k;
    let mut codes = SignCoding {
        plus: 0,
        minus: 0,
        ties: 0,
    };
    for i in 0..k {
        codes.push(series[i + offset].partial_cmp(&series[i]).expect("finite"));
    }
    let mut r = test_codes(TestKind::CoxStuart, codes, sidedness, cfg)?;
    if n % 2 == 1 {
        r.notes.push(format!("odd length {n}: middle observation dropped"));
    }
    Ok(r)
}
