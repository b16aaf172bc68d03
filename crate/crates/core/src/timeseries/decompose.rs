use serde::{Deserialize, Serialize};

use super::mean;
use crate::error::{Error, Result};
use crate::kernel::check_finite;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    Additive,
    Multiplicative,
}

/// Centered moving average. Odd windows average `window` points; even
/// windows use the centered 2×MA (half weight on both ends, `window + 1`
/// points). Only fully covered positions are returned, so the output has
/// `len - window + 1` (odd) or `len - window` (even) values.
pub fn moving_average(z: &[f64], window: usize) -> Result<Vec<f64>> {
    check_window(z, window)?;
    Ok(centered_moving_average(z, window)?.into_iter().flatten().collect())
}

/// Same as [`moving_average`] but aligned with the input; edge positions
/// without a full window are `None`.
pub fn centered_moving_average(z: &[f64], window: usize) -> Result<Vec<Option<f64>>> {
    check_window(z, window)?;
    let n = z.len();
    let half = window / 2;
    let w = window as f64;
    let mut out = vec![None; n];
    for (t, slot) in out.iter_mut().enumerate().take(n - half).skip(half) {
        let v = if window % 2 == 1 {
            z[t - half..=t + half].iter().sum::<f64>() / w
        } else {
            let inner: f64 = z[t - half + 1..t + half].iter().sum();
            (0.5 * z[t - half] + inner + 0.5 * z[t + half]) / w
        };
        *slot = Some(v);
    }
    Ok(out)
}

fn check_window(z: &[f64], window: usize) -> Result<()> {
    check_finite(z, "moving average")?;
    if window < 2 {
        return Err(Error::InvalidInput(format!("moving-average window must be >= 2, got {window}")));
    }
    let needed = if window % 2 == 0 { window + 1 } else { window };
    if z.len() < needed {
        return Err(Error::TooShort {
            needed,
            got: z.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecomposeOptions {
    pub period: usize,
    /// Window of the long moving average that separates trend from cycle;
    /// `None` means `2 * period + 1`.
    pub trend_window: Option<usize>,
}

impl DecomposeOptions {
    pub fn new(period: usize) -> Self {
        DecomposeOptions {
            period,
            trend_window: None,
        }
    }

    fn trend_window(&self) -> usize {
        self.trend_window.unwrap_or(2 * self.period + 1)
    }
}

/// Classical decomposition `Z = T + S + C + I` or `Z = T * S * C * I`.
///
/// `trend_cycle` is the period-length moving average of `Z`; `trend` is a
/// longer moving average of the seasonally adjusted series and `cyclical`
/// the gap between the two. Positions where a moving average is undefined
/// hold `None` in every component except `seasonal`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub model: Model,
    pub period: usize,
    pub trend_window: usize,
    /// One index per phase `t mod period`.
    pub seasonal_indices: Vec<f64>,
    pub seasonal: Vec<f64>,
    pub trend_cycle: Vec<Option<f64>>,
    pub trend: Vec<Option<f64>>,
    pub cyclical: Vec<Option<f64>>,
    pub irregular: Vec<Option<f64>>,
}

impl Decomposition {
    /// Components recombined where defined. The additive sum is evaluated
    /// exactly and rounded once, which returns the input bit for bit; the
    /// multiplicative product `((T * S) * C) * I` matches to about 1e-15.
    pub fn reconstruct(&self) -> Vec<Option<f64>> {
        (0..self.seasonal.len())
            .map(|t| {
                let (tr, c, i) = (self.trend[t]?, self.cyclical[t]?, self.irregular[t]?);
                Some(combine(self.model, tr, self.seasonal[t], c, i))
            })
            .collect()
    }

    pub fn defined(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.seasonal.len()).filter(|&t| self.irregular[t].is_some())
    }
}

fn combine(model: Model, t: f64, s: f64, c: f64, i: f64) -> f64 {
    match model {
        Model::Additive => exact_sum(&[t, s, c, i]),
        Model::Multiplicative => ((t * s) * c) * i,
    }
}

pub fn decompose_additive(z: &[f64], opts: &DecomposeOptions) -> Result<Decomposition> {
    decompose(z, opts, Model::Additive)
}

pub fn decompose_multiplicative(z: &[f64], opts: &DecomposeOptions) -> Result<Decomposition> {
    if z.iter().any(|&v| v <= 0.0) {
        return Err(Error::Domain("multiplicative model requires positive data".into()));
    }
    decompose(z, opts, Model::Multiplicative)
}

fn decompose(z: &[f64], opts: &DecomposeOptions, model: Model) -> Result<Decomposition> {
    check_finite(z, "decompose")?;
    let p = opts.period;
    if p < 2 {
        return Err(Error::InvalidInput(format!("period must be >= 2, got {p}")));
    }
    let n = z.len();
    if n < 3 * p {
        return Err(Error::TooShort { needed: 3 * p, got: n });
    }
    let tw = opts.trend_window();
    let detrend: fn(f64, f64) -> f64 = match model {
        Model::Additive => |a, b| a - b,
        Model::Multiplicative => |a, b| a / b,
    };

    let tc = centered_moving_average(z, p)?;
    let mut sums = vec![0.0; p];
    let mut counts = vec![0usize; p];
    for (t, m) in tc.iter().enumerate() {
        if let Some(m) = m {
            sums[t % p] += detrend(z[t], *m);
            counts[t % p] += 1;
        }
    }
    // n >= 3p leaves every phase with at least one defined position
    let raw: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    let centre = mean(&raw);
    let indices: Vec<f64> = raw.iter().map(|&s| detrend(s, centre)).collect();
    let seasonal: Vec<f64> = (0..n).map(|t| indices[t % p]).collect();

    let adjusted: Vec<f64> = z.iter().zip(&seasonal).map(|(&v, &s)| detrend(v, s)).collect();
    let mut trend = centered_moving_average(&adjusted, tw)?;
    let mut cyclical: Vec<Option<f64>> = tc
        .iter()
        .zip(&trend)
        .map(|(m, tr)| Some(detrend((*m)?, (*tr)?)))
        .collect();
    let mut irregular = vec![None; n];
    for t in 0..n {
        let (Some(tr), Some(c)) = (trend[t], cyclical[t]) else {
            continue;
        };
        irregular[t] = Some(match model {
            Model::Additive => {
                let [tr, _, c, i] = split_remainder(z[t], [tr, seasonal[t], c]);
                trend[t] = Some(tr);
                cyclical[t] = Some(c);
                i
            }
            Model::Multiplicative => z[t] / ((tr * seasonal[t]) * c),
        });
    }

    Ok(Decomposition {
        model,
        period: p,
        trend_window: tw,
        seasonal_indices: indices,
        seasonal,
        trend_cycle: tc,
        trend,
        cyclical,
        irregular,
    })
}

/// Adds the irregular term `z - T - S - C` to `[T, S, C]` so that the exact
/// sum of the four rounds back to `z`. If rounding the irregular term alone
/// misses, the smallest of irregular, cycle and trend is recomputed from the
/// others (a change of at most one ulp of that component). This is exact
/// whenever one of them lies in a lower binade than `z`; otherwise the sum
/// is within one ulp of the smallest of the three.
fn split_remainder(z: f64, [t, s, c]: [f64; 3]) -> [f64; 4] {
    let mut v = [t, s, c, 0.0];
    let refit = |v: &mut [f64; 4], k: usize| {
        let others: Vec<f64> = (0..4).filter(|&j| j != k).map(|j| -v[j]).collect();
        v[k] = exact_sum(&[z, others[0], others[1], others[2]]);
    };
    refit(&mut v, 3);
    if exact_sum(&v) == z {
        return v;
    }
    let mut order = [3, 2, 0];
    order.sort_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()));
    for k in order.into_iter().rev() {
        let mut w = v;
        refit(&mut w, k);
        if exact_sum(&w) == z || k == order[0] {
            return w;
        }
    }
    v
}

/// Correctly rounded sum of `xs` (Shewchuk's algorithm with
/// round-half-even on the final partials).
pub(crate) fn exact_sum(xs: &[f64]) -> f64 {
    let mut partials: Vec<f64> = Vec::with_capacity(4);
    for &x0 in xs {
        let mut x = x0;
        let mut kept = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        partials.truncate(kept);
        partials.push(x);
    }
    let Some(mut n) = partials.len().checked_sub(1) else {
        return 0.0;
    };
    let mut hi = partials[n];
    let mut lo = 0.0;
    while n > 0 {
        let x = hi;
        n -= 1;
        let y = partials[n];
        hi = x + y;
        lo = y - (hi - x);
        if lo != 0.0 {
            break;
        }
    }
    if n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0)) {
        let y = lo * 2.0;
        let x = hi + y;
        if y == x - hi {
            hi = x;
        }
    }
    hi
}
