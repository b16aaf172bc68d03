//! Fine structure of a single run: classical decomposition, exponential
//! smoothing and a small Box-Jenkins loop over ARI(p, d) models.

mod ar;
mod decompose;
mod scan;
mod smoothing;

pub use ar::{acf, fit_ar, pacf, ArModel};
pub use decompose::{
    centered_moving_average, decompose_additive, decompose_multiplicative, moving_average,
    DecomposeOptions, Decomposition, Model,
};
pub use scan::{box_jenkins_scan, residual_diagnostics, Diagnostics, ScanConfig, ScanEntry};
pub use smoothing::{exp_smooth_forecast, exp_smooth_with, SmoothingInit, SmoothingState};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::check_finite;

/// `d`-fold first differences plus the values needed to undo them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Differenced {
    pub series: Vec<f64>,
    /// `initial[k]` is the first element of the `k`-times differenced series.
    pub initial: Vec<f64>,
}

pub fn difference(z: &[f64], d: usize) -> Result<Differenced> {
    check_finite(z, "difference")?;
    if d == 0 {
        return Err(Error::InvalidInput("difference order must be at least 1".into()));
    }
    if z.len() <= d {
        return Err(Error::TooShort {
            needed: d + 1,
            got: z.len(),
        });
    }
    let mut cur = z.to_vec();
    let mut initial = Vec::with_capacity(d);
    for _ in 0..d {
        initial.push(cur[0]);
        cur = cur.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(Differenced {
        series: cur,
        initial,
    })
}

/// Inverse of [`difference`]: cumulative sums seeded with the stored
/// initial values.
pub fn integrate(diff: &Differenced) -> Vec<f64> {
    let mut cur = diff.series.clone();
    for &x0 in diff.initial.iter().rev() {
        let mut out = Vec::with_capacity(cur.len() + 1);
        out.push(x0);
        for dx in &cur {
            let prev = *out.last().expect("non-empty");
            out.push(prev + dx);
        }
        cur = out;
    }
    cur
}

fn mean(z: &[f64]) -> f64 {
    z.iter().sum::<f64>() / z.len() as f64
}
