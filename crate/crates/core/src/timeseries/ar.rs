use serde::{Deserialize, Serialize};

use super::mean;
use crate::error::{Error, Result};
use crate::kernel::check_finite;

/// Prediction-error ratios below this mark a singular Yule-Walker system.
const SINGULAR_RATIO: f64 = 1e-10;

/// Sample autocorrelations `r[0..=max_lag]` (biased estimator, `r[0] = 1`).
pub fn acf(z: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    check_finite(z, "acf")?;
    let n = z.len();
    if 2 * max_lag >= n {
        return Err(Error::Domain(format!(
            "max_lag {max_lag} must be below half the series length {n}"
        )));
    }
    let m = mean(z);
    let dev: Vec<f64> = z.iter().map(|v| v - m).collect();
    let c0: f64 = dev.iter().map(|d| d * d).sum();
    if c0 == 0.0 {
        return Err(Error::Degenerate("zero variance".into()));
    }
    Ok((0..=max_lag)
        .map(|k| {
            if k == 0 {
                return 1.0;
            }
            let ck: f64 = dev[..n - k].iter().zip(&dev[k..]).map(|(a, b)| a * b).sum();
            (ck / c0).clamp(-1.0, 1.0)
        })
        .collect())
}

/// Durbin-Levinson recursion up to `order`, stopping early once the
/// prediction-error ratio collapses.
struct Levinson {
    phi: Vec<f64>,
    partial: Vec<f64>,
    ratio: f64,
    singular_at: Option<usize>,
}

fn durbin_levinson(r: &[f64], order: usize) -> Levinson {
    let mut phi: Vec<f64> = Vec::with_capacity(order);
    let mut partial = Vec::with_capacity(order);
    let mut v = 1.0;
    for k in 1..=order {
        let num = r[k] - phi.iter().enumerate().map(|(j, p)| p * r[k - 1 - j]).sum::<f64>();
        let a = (num / v).clamp(-1.0, 1.0);
        let prev = phi.clone();
        for j in 0..k - 1 {
            phi[j] = prev[j] - a * prev[k - 2 - j];
        }
        phi.push(a);
        partial.push(a);
        v *= 1.0 - a * a;
        if v < SINGULAR_RATIO {
            return Levinson {
                phi,
                partial,
                ratio: v,
                singular_at: Some(k),
            };
        }
    }
    Levinson {
        phi,
        partial,
        ratio: v,
        singular_at: None,
    }
}

/// Partial autocorrelations `[1, phi_11, ..., phi_kk]`. Lags beyond a
/// numerically singular order are reported as 0.
pub fn pacf(z: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let r = acf(z, max_lag)?;
    let mut out = vec![1.0];
    out.extend(durbin_levinson(&r, max_lag).partial);
    out.resize(max_lag + 1, 0.0);
    Ok(out)
}

/// Autoregressive model `z_t = c + sum_i phi_i z_(t-i) + e_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArModel {
    pub order: usize,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub mean: f64,
    /// One residual per position `t >= order`.
    pub residuals: Vec<f64>,
    pub sigma2: f64,
}

impl ArModel {
    /// Mean-only model (order 0).
    pub fn white_noise(z: &[f64]) -> Result<Self> {
        check_finite(z, "fit")?;
        if z.is_empty() {
            return Err(Error::TooShort { needed: 1, got: 0 });
        }
        let m = mean(z);
        let residuals: Vec<f64> = z.iter().map(|v| v - m).collect();
        let sigma2 = residuals.iter().map(|e| e * e).sum::<f64>() / z.len() as f64;
        Ok(ArModel {
            order: 0,
            coefficients: Vec::new(),
            intercept: m,
            mean: m,
            residuals,
            sigma2,
        })
    }

    pub fn predict_next(&self, recent: &[f64]) -> f64 {
        let p = self.order;
        assert!(recent.len() >= p, "need {p} past values");
        let tail = &recent[recent.len() - p..];
        self.intercept
            + self
                .coefficients
                .iter()
                .enumerate()
                .map(|(i, phi)| phi * tail[p - 1 - i])
                .sum::<f64>()
    }

    /// Iterated forecasts for the `steps` positions after `history`.
    pub fn forecast(&self, history: &[f64], steps: usize) -> Result<Vec<f64>> {
        if history.len() < self.order {
            return Err(Error::TooShort {
                needed: self.order,
                got: history.len(),
            });
        }
        let mut buf: Vec<f64> = history[history.len() - self.order..].to_vec();
        let mut out = Vec::with_capacity(steps);
        for _ in 0..steps {
            let f = self.predict_next(&buf);
            out.push(f);
            buf.push(f);
        }
        Ok(out)
    }
}

/// Yule-Walker fit of an AR(`order`) model.
pub fn fit_ar(z: &[f64], order: usize) -> Result<ArModel> {
    if order == 0 {
        return Err(Error::InvalidInput("AR order must be at least 1".into()));
    }
    if z.len() < 10 * order {
        return Err(Error::TooShort {
            needed: 10 * order,
            got: z.len(),
        });
    }
    let r = acf(z, order)?;
    let lev = durbin_levinson(&r, order);
    if let Some(k) = lev.singular_at {
        return Err(Error::Singular {
            order: k,
            ratio: lev.ratio,
        });
    }
    let phi = lev.phi;
    let m = mean(z);
    let intercept = m * (1.0 - phi.iter().sum::<f64>());
    let residuals: Vec<f64> = (order..z.len())
        .map(|t| {
            let pred: f64 = phi.iter().enumerate().map(|(i, p)| p * z[t - 1 - i]).sum();
            z[t] - intercept - pred
        })
        .collect();
    let sigma2 = residuals.iter().map(|e| e * e).sum::<f64>() / residuals.len() as f64;
    Ok(ArModel {
        order,
        coefficients: phi,
        intercept,
        mean: m,
        residuals,
        sigma2,
    })
}
