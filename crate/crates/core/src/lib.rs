//! Non-parametric tests for judging whether repeated runs of an experiment
//! come from a single statistical population, with the supporting
//! time-series tools and seeded simulators.

pub mod error;
pub mod kernel;
pub mod nptests;
pub mod purity;
pub mod simgen;
pub mod timeseries;

pub use error::{Error, Result};
pub use kernel::{Method, PValue, Sidedness};
pub use nptests::{NpConfig, Sample, TestKind, TestResult};
pub use purity::{purity_test, PurityOptions, PurityReport, RunSet, Verdict};
