use serde::{Deserialize, Serialize};

use super::mean;
use crate::error::{Error, Result};
use crate::kernel::check_finite;

/// Starting forecast `Ẑ₁`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "k")]
pub enum SmoothingInit {
    #[default]
    FirstValue,
    /// Mean of the first `k` observations.
    MeanOfFirst(usize),
}

/// Running state of simple exponential smoothing
/// `Ẑ(t+1) = w Z(t) + (1 - w) Ẑ(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingState {
    pub w: f64,
    pub last_forecast: f64,
    pub history_len: usize,
}

impl SmoothingState {
    pub fn new(w: f64, initial_forecast: f64) -> Result<Self> {
        if !(w > 0.0 && w < 1.0) {
            return Err(Error::Domain(format!("weighting factor must lie in (0, 1), got {w}")));
        }
        Ok(SmoothingState {
            w,
            last_forecast: initial_forecast,
            history_len: 0,
        })
    }

    /// Absorbs one observation and returns the forecast for the next.
    pub fn update(&mut self, z: f64) -> f64 {
        let f = self.w * z + (1.0 - self.w) * self.last_forecast;
        // a convex combination can round just outside its endpoints
        let (lo, hi) = if z < self.last_forecast {
            (z, self.last_forecast)
        } else {
            (self.last_forecast, z)
        };
        self.last_forecast = f.clamp(lo, hi);
        self.history_len += 1;
        self.last_forecast
    }
}

/// One-step forecasts `Ẑ₁..Ẑₙ` for the observed series plus the next
/// out-of-sample forecast, starting from `Ẑ₁ = Z₁`.
pub fn exp_smooth_forecast(z: &[f64], w: f64) -> Result<(Vec<f64>, f64)> {
    exp_smooth_with(z, w, SmoothingInit::FirstValue)
}

pub fn exp_smooth_with(z: &[f64], w: f64, init: SmoothingInit) -> Result<(Vec<f64>, f64)> {
    check_finite(z, "exponential smoothing")?;
    if z.is_empty() {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    let start = match init {
        SmoothingInit::FirstValue => z[0],
        SmoothingInit::MeanOfFirst(k) => {
            if k == 0 || k > z.len() {
                return Err(Error::InvalidInput(format!(
                    "initialisation window {k} outside 1..={}",
                    z.len()
                )));
            }
            mean(&z[..k])
        }
    };
    let mut state = SmoothingState::new(w, start)?;
    let mut fitted = Vec::with_capacity(z.len());
    for &v in z {
        fitted.push(state.last_forecast);
        state.update(v);
    }
    Ok((fitted, state.last_forecast))
}
