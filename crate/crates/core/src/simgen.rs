//! Seeded generators of synthetic experiments: pure ensembles and imperfect
//! mixtures, plus Monte Carlo power estimation.
//!
//! All randomness comes from [`SimRng`]: ChaCha8 keyed with the 64-bit seed in
//! little-endian order (remaining key bytes zero), with the stream id selecting
//! independent substreams. Uniforms take the top 53 bits of each 64-bit word,
//! normals use the Box-Muller cosine branch and categorical draws use inverse
//! CDF lookup, one uniform per draw. The algorithm is fixed so fixtures can be
//! regenerated outside this crate.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Sidedness;
use crate::nptests::{
    cox_stuart_test, kruskal_wallis_test, mann_whitney_test, mcnemar_test, runs_test_series,
    sign_test, wald_wolfowitz_test, wilcoxon_signed_rank_test, Sample, TestResult,
    WwTieBreak,
};
use crate::purity::{purity_test, PurityOptions, RunSet, Verdict};

/// Deterministic generator used for every random draw in the crate.
#[derive(Debug, Clone)]
pub struct SimRng(ChaCha8Rng);

impl SimRng {
    pub const ALGORITHM: &'static str = "chacha8-le64key-v1";

    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(stream);
        SimRng(rng)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform(); // (0, 1]
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Uniform integer in `0..n` by rejection (no modulo bias).
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "empty range");
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % n;
            }
        }
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            xs.swap(i, j);
        }
    }

    /// Index drawn from a probability vector.
    pub fn categorical(&mut self, probs: &[f64]) -> usize {
        let u = self.uniform();
        let mut acc = 0.0;
        for (i, &p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }
}

/// Departure from a pure i.i.d. ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Contamination {
    PureIid,
    /// Each whole run follows `alt_probs` with probability `weight`, else the
    /// base `outcome_probs`.
    RunMixture { alt_probs: Vec<f64>, weight: f64 },
    /// The first outcome's probability moves linearly by `slope` from the
    /// start to the end of each run, centred on its base value.
    Drift { slope: f64 },
    /// The first outcome's probability oscillates sinusoidally.
    Periodic { period: f64, amplitude: f64 },
    /// Outcomes follow a Markov chain; the first state is `start` or drawn
    /// from `outcome_probs`.
    Markov {
        transition: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        start: Option<usize>,
    },
}

/// Recipe for a synthetic run set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(flatten)]
    pub contamination: Contamination,
    pub outcome_probs: Vec<f64>,
    pub runs: usize,
    pub run_length: usize,
    #[serde(default)]
    pub seed: u64,
}

const PROB_TOL: f64 = 1e-12;

fn check_probs(p: &[f64], what: &str) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidInput(format!("{what}: empty probability vector")));
    }
    if p.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
        return Err(Error::InvalidInput(format!("{what}: probabilities must lie in [0, 1]")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > PROB_TOL {
        return Err(Error::InvalidInput(format!("{what}: probabilities sum to {s}, not 1")));
    }
    Ok(())
}

/// Replaces the first probability by `p0` and rescales the others to keep
/// the total at one.
fn tilt(base: &[f64], p0: f64) -> Vec<f64> {
    if p0 == base[0] {
        return base.to_vec();
    }
    let rest: f64 = base[1..].iter().sum();
    let k = base.len();
    let mut out = Vec::with_capacity(k);
    out.push(p0);
    for &p in &base[1..] {
        out.push(if rest > 0.0 {
            p * (1.0 - p0) / rest
        } else {
            (1.0 - p0) / (k - 1) as f64
        });
    }
    out
}

impl GeneratorSpec {
    pub fn pure(outcome_probs: Vec<f64>, runs: usize, run_length: usize, seed: u64) -> Self {
        GeneratorSpec {
            contamination: Contamination::PureIid,
            outcome_probs,
            runs,
            run_length,
            seed,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.contamination {
            Contamination::PureIid => "pure-iid",
            Contamination::RunMixture { .. } => "run-mixture",
            Contamination::Drift { .. } => "drift",
            Contamination::Periodic { .. } => "periodic",
            Contamination::Markov { .. } => "markov",
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_probs(&self.outcome_probs, "outcome_probs")?;
        let k = self.outcome_probs.len();
        if self.runs == 0 || self.run_length == 0 {
            return Err(Error::InvalidInput("runs and run_length must be positive".into()));
        }
        match &self.contamination {
            Contamination::PureIid => {}
            Contamination::RunMixture { alt_probs, weight } => {
                check_probs(alt_probs, "alt_probs")?;
                if alt_probs.len() != k {
                    return Err(Error::InvalidInput("alt_probs and outcome_probs differ in length".into()));
                }
                if !(0.0..=1.0).contains(weight) {
                    return Err(Error::InvalidInput(format!("mixing weight {weight} outside [0, 1]")));
                }
            }
            Contamination::Drift { slope } => {
                if !slope.is_finite() || k < 2 {
                    return Err(Error::InvalidInput("drift needs a finite slope and >= 2 outcomes".into()));
                }
            }
            Contamination::Periodic { period, amplitude } => {
                if !(*period > 0.0) || !amplitude.is_finite() || k < 2 {
                    return Err(Error::InvalidInput(
                        "periodic needs period > 0, finite amplitude and >= 2 outcomes".into(),
                    ));
                }
            }
            Contamination::Markov { transition, start } => {
                if transition.len() != k {
                    return Err(Error::InvalidInput(format!("transition matrix must be {k} x {k}")));
                }
                for (i, row) in transition.iter().enumerate() {
                    if row.len() != k {
                        return Err(Error::InvalidInput(format!("transition matrix must be {k} x {k}")));
                    }
                    check_probs(row, &format!("transition row {i}"))?;
                }
                if start.is_some_and(|s| s >= k) {
                    return Err(Error::InvalidInput("markov start state out of range".into()));
                }
            }
        }
        Ok(())
    }

    /// Same recipe with its contamination scaled to `magnitude`; zero always
    /// yields a pure ensemble.
    ///
    /// * run-mixture: alternative first-outcome probability = base + magnitude
    /// * drift: slope = magnitude
    /// * periodic: amplitude = magnitude
    /// * markov: `(1 - magnitude) * iid + magnitude * identity` (stickiness)
    pub fn with_magnitude(&self, magnitude: f64) -> Self {
        let mut spec = self.clone();
        spec.contamination = match &self.contamination {
            Contamination::PureIid => Contamination::PureIid,
            Contamination::RunMixture { weight, .. } => Contamination::RunMixture {
                alt_probs: tilt(&self.outcome_probs, (self.outcome_probs[0] + magnitude).clamp(0.0, 1.0)),
                weight: *weight,
            },
            Contamination::Drift { .. } => Contamination::Drift { slope: magnitude },
            Contamination::Periodic { period, .. } => Contamination::Periodic {
                period: *period,
                amplitude: magnitude,
            },
            Contamination::Markov { start, .. } => {
                let k = self.outcome_probs.len();
                Contamination::Markov {
                    transition: (0..k)
                        .map(|i| {
                            (0..k)
                                .map(|j| {
                                    (1.0 - magnitude) * self.outcome_probs[j]
                                        + if i == j { magnitude } else { 0.0 }
                                })
                                .collect()
                        })
                        .collect(),
                    start: *start,
                }
            }
        };
        spec
    }

    /// Value recorded for outcome `i`: two-outcome series use `+1` / `-1`,
    /// larger alphabets use the index itself.
    pub fn outcome_value(&self, i: usize) -> f64 {
        if self.outcome_probs.len() == 2 {
            1.0 - 2.0 * i as f64
        } else {
            i as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Truth {
    Pure,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub truth: Truth,
    pub descriptor: String,
    /// For run mixtures: component (0 = base, 1 = alternative) of each run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_components: Option<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedRunSet {
    pub runset: RunSet,
    pub spec: GeneratorSpec,
    pub ground_truth: GroundTruth,
    pub rng: String,
}

/// Draws the run set described by `spec` from stream 0 of its seed.
pub fn generate(spec: &GeneratorSpec) -> Result<GeneratedRunSet> {
    generate_stream(spec, 0)
}

/// Draws from an explicit substream; replication `r` of a power study uses
/// stream `r + 1`.
pub fn generate_stream(spec: &GeneratorSpec, stream: u64) -> Result<GeneratedRunSet> {
    spec.validate()?;
    let mut rng = SimRng::with_stream(spec.seed, stream);
    let len = spec.run_length;
    let base = &spec.outcome_probs;
    let mut components = Vec::new();
    let mut runs = Vec::with_capacity(spec.runs);
    for r in 0..spec.runs {
        let outcomes: Vec<usize> = match &spec.contamination {
            Contamination::PureIid => (0..len).map(|_| rng.categorical(base)).collect(),
            Contamination::RunMixture { alt_probs, weight } => {
                let alt = rng.uniform() < *weight;
                components.push(u8::from(alt));
                let probs = if alt { alt_probs } else { base };
                (0..len).map(|_| rng.categorical(probs)).collect()
            }
            Contamination::Drift { slope } => (0..len)
                .map(|t| {
                    if *slope == 0.0 || len == 1 {
                        return rng.categorical(base);
                    }
                    let frac = t as f64 / (len - 1) as f64 - 0.5;
                    let p0 = (base[0] + slope * frac).clamp(0.0, 1.0);
                    rng.categorical(&tilt(base, p0))
                })
                .collect(),
            Contamination::Periodic { period, amplitude } => (0..len)
                .map(|t| {
                    let phase = 2.0 * std::f64::consts::PI * t as f64 / period;
                    let p0 = (base[0] + amplitude * phase.sin()).clamp(0.01, 0.99);
                    rng.categorical(&tilt(base, p0))
                })
                .collect(),
            Contamination::Markov { transition, start } => {
                let mut state = match start {
                    Some(s) => *s,
                    None => rng.categorical(base),
                };
                let mut out = Vec::with_capacity(len);
                out.push(state);
                for _ in 1..len {
                    state = rng.categorical(&transition[state]);
                    out.push(state);
                }
                out
            }
        };
        let values = outcomes.into_iter().map(|o| spec.outcome_value(o)).collect();
        runs.push(Sample::new(format!("{r}"), values)?);
    }
    let mut runset = RunSet::new(format!("sim-{}-{}", spec.kind(), spec.seed), runs);
    runset.metadata.insert("generator".into(), spec.kind().into());
    runset.metadata.insert("seed".into(), spec.seed.to_string());
    runset.metadata.insert("stream".into(), stream.to_string());
    Ok(GeneratedRunSet {
        runset,
        spec: spec.clone(),
        ground_truth: ground_truth(spec, components),
        rng: SimRng::ALGORITHM.into(),
    })
}

fn ground_truth(spec: &GeneratorSpec, components: Vec<u8>) -> GroundTruth {
    let (truth, descriptor) = match &spec.contamination {
        Contamination::PureIid => (Truth::Pure, "i.i.d. draws".to_string()),
        Contamination::RunMixture { alt_probs, weight } => {
            let mixed = alt_probs != &spec.outcome_probs && components.iter().any(|&c| c == 1) && components.iter().any(|&c| c == 0);
            (
                if mixed { Truth::Mixed } else { Truth::Pure },
                format!("run mixture, weight {weight}, alternative {alt_probs:?}"),
            )
        }
        Contamination::Drift { slope } => (
            if *slope == 0.0 { Truth::Pure } else { Truth::Mixed },
            format!("linear drift of the first outcome probability, slope {slope}"),
        ),
        Contamination::Periodic { period, amplitude } => (
            if *amplitude == 0.0 { Truth::Pure } else { Truth::Mixed },
            format!("sinusoidal modulation, period {period}, amplitude {amplitude}"),
        ),
        Contamination::Markov { transition, .. } => (
            if transition.iter().all(|row| row == &transition[0]) {
                Truth::Pure
            } else {
                Truth::Mixed
            },
            format!("markov chain {transition:?}"),
        ),
    };
    GroundTruth {
        truth,
        descriptor,
        run_components: matches!(spec.contamination, Contamination::RunMixture { .. }).then_some(components),
    }
}

/// Test applied in each power-study replication. Two-sample and paired tests
/// compare runs 0 and 1; one-sample tests look at run 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestSelector {
    /// Full purity battery; rejection means verdict `purity-rejected`.
    Purity,
    KruskalWallis,
    MannWhitney,
    WaldWolfowitz,
    Runs,
    CoxStuart,
    Sign,
    Wilcoxon,
    /// Pairs coded 1 for values above zero.
    #[serde(rename = "mcnemar")]
    McNemar,
}

impl TestSelector {
    pub const ALL: [TestSelector; 9] = [
        TestSelector::Purity,
        TestSelector::KruskalWallis,
        TestSelector::MannWhitney,
        TestSelector::WaldWolfowitz,
        TestSelector::Runs,
        TestSelector::CoxStuart,
        TestSelector::Sign,
        TestSelector::Wilcoxon,
        TestSelector::McNemar,
    ];

    fn needs_two_runs(self) -> bool {
        !matches!(self, TestSelector::Runs | TestSelector::CoxStuart)
    }

    /// Runs the selected test on `rs`. `Ok(None)` means degenerate data.
    pub fn rejects(self, rs: &RunSet, opts: &PurityOptions) -> Result<Option<bool>> {
        let cfg = &opts.np;
        let two = Sidedness::TwoSided;
        let single = |r: Result<TestResult>| match r {
            Ok(t) => Ok(Some(t.p.value <= opts.alpha)),
            Err(e) if e.is_degenerate() => Ok(None),
            Err(e) => Err(e),
        };
        if self.needs_two_runs() && rs.runs.len() < 2 {
            return Err(Error::InvalidInput(format!("{self:?} needs at least two runs")));
        }
        let a = rs.runs[0].values();
        let b = rs.runs.get(1).map(|r| r.values()).unwrap_or(&[]);
        match self {
            TestSelector::Purity => {
                let rep = purity_test(rs, opts)?;
                Ok(match rep.verdict {
                    Verdict::PurityRejected => Some(true),
                    Verdict::ConsistentWithPure => Some(false),
                    Verdict::Inconclusive => None,
                })
            }
            TestSelector::KruskalWallis => single(kruskal_wallis_test(&rs.runs, cfg)),
            TestSelector::MannWhitney => single(mann_whitney_test(a, b, two, cfg)),
            TestSelector::WaldWolfowitz => single(wald_wolfowitz_test(a, b, Sidedness::Less, cfg)),
            TestSelector::Runs => single(runs_test_series(a, two, cfg)),
            TestSelector::CoxStuart => single(cox_stuart_test(a, two, cfg)),
            TestSelector::Sign => single(sign_test(a, b, two, cfg)),
            TestSelector::Wilcoxon => single(wilcoxon_signed_rank_test(a, b, two, cfg)),
            TestSelector::McNemar => {
                let pairs: Vec<(u8, u8)> = a
                    .iter()
                    .zip(b)
                    .map(|(x, y)| (u8::from(*x > 0.0), u8::from(*y > 0.0)))
                    .collect();
                single(mcnemar_test(&pairs, two, cfg))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerEstimate {
    pub replications: usize,
    pub rejections: usize,
    /// Replications on which the test was degenerate (counted as non-rejections).
    pub degenerate: usize,
    pub power: f64,
    /// 95% Wilson score interval.
    pub ci_low: f64,
    pub ci_high: f64,
}

pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Fraction of `replications` seeded draws of `spec` on which `selector`
/// rejects at `opts.alpha`. Replication `r` draws from stream `r + 1`, so the
/// estimate does not depend on thread scheduling.
pub fn power_study(
    spec: &GeneratorSpec,
    selector: TestSelector,
    opts: &PurityOptions,
    replications: usize,
) -> Result<PowerEstimate> {
    if replications < 100 {
        return Err(Error::InvalidInput(format!(
            "power study needs at least 100 replications, got {replications}"
        )));
    }
    spec.validate()?;
    let outcomes: Vec<Option<bool>> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let g = generate_stream(spec, r as u64 + 1)?;
            let mut o = *opts;
            if let WwTieBreak::Seeded(s) = o.np.ww_ties {
                o.np.ww_ties = WwTieBreak::Seeded(s.wrapping_add(r as u64));
            }
            selector.rejects(&g.runset, &o)
        })
        .collect::<Result<_>>()?;
    let rejections = outcomes.iter().filter(|o| **o == Some(true)).count();
    let degenerate = outcomes.iter().filter(|o| o.is_none()).count();
    let (ci_low, ci_high) = wilson_interval(rejections, replications, 1.959_963_984_540_054);
    Ok(PowerEstimate {
        replications,
        rejections,
        degenerate,
        power: rejections as f64 / replications as f64,
        ci_low,
        ci_high,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rng_is_reproducible_and_streams_differ() {
        let mut a = SimRng::new(42);
        let mut b = SimRng::new(42);
        let va: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let vb: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        assert_eq!(va, vb);
        let mut c = SimRng::with_stream(42, 1);
        assert_ne!(va[0], c.next_u64());
    }

    #[test]
    fn uniform_and_below_ranges() {
        let mut r = SimRng::new(3);
        for _ in 0..10_000 {
            let u = r.uniform();
            assert!((0.0..1.0).contains(&u));
            assert!(r.below(7) < 7);
        }
    }

    #[test]
    fn normal_moments() {
        let mut r = SimRng::new(11);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| r.normal()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01);
        assert!((var - 1.0).abs() < 0.02);
    }

    #[test]
    fn pure_frequency_within_three_sigma() {
        let spec = GeneratorSpec::pure(vec![0.5, 0.5], 1, 100_000, 7);
        let g = generate(&spec).unwrap();
        let ones = g.runset.runs[0].values().iter().filter(|&&v| v == 1.0).count();
        let f = ones as f64 / 1e5;
        // 3 sigma of Binomial(1e5, 0.5) frequency is 0.0047
        assert!((f - 0.5).abs() < 0.005, "{f}");
        assert_eq!(g.ground_truth.truth, Truth::Pure);
    }

    #[test]
    fn markov_alternation_reproduces_plus_minus_series() {
        let spec = GeneratorSpec {
            contamination: Contamination::Markov {
                transition: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
                start: Some(0),
            },
            outcome_probs: vec![0.5, 0.5],
            runs: 2,
            run_length: 10,
            seed: 1,
        };
        let g = generate(&spec).unwrap();
        for run in &g.runset.runs {
            let expected: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
            assert_eq!(run.values(), &expected[..]);
        }
        assert_eq!(g.ground_truth.truth, Truth::Mixed);
    }

    #[test]
    fn zero_drift_equals_pure() {
        let pure = GeneratorSpec::pure(vec![0.3, 0.7], 3, 50, 99);
        let drift = GeneratorSpec {
            contamination: Contamination::Drift { slope: 0.0 },
            ..pure.clone()
        };
        let a = generate(&pure).unwrap();
        let b = generate(&drift).unwrap();
        assert_eq!(a.runset.runs, b.runset.runs);
        assert_eq!(b.ground_truth.truth, Truth::Pure);
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = GeneratorSpec {
            contamination: Contamination::Periodic {
                period: 25.0,
                amplitude: 0.3,
            },
            outcome_probs: vec![0.5, 0.5],
            runs: 4,
            run_length: 200,
            seed: 5,
        };
        let a = serde_json::to_string(&generate(&spec).unwrap()).unwrap();
        let b = serde_json::to_string(&generate(&spec).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn validation() {
        let bad = GeneratorSpec::pure(vec![0.5, 0.6], 1, 10, 0);
        assert!(generate(&bad).is_err());
        let bad = GeneratorSpec::pure(vec![-0.5, 1.5], 1, 10, 0);
        assert!(generate(&bad).is_err());
        let bad = GeneratorSpec {
            contamination: Contamination::Markov {
                transition: vec![vec![0.5, 0.4], vec![0.5, 0.5]],
                start: None,
            },
            ..GeneratorSpec::pure(vec![0.5, 0.5], 1, 10, 0)
        };
        assert!(generate(&bad).is_err());
    }

    #[test]
    fn magnitude_zero_is_pure() {
        let spec = GeneratorSpec {
            contamination: Contamination::Markov {
                transition: vec![vec![0.9, 0.1], vec![0.1, 0.9]],
                start: None,
            },
            ..GeneratorSpec::pure(vec![0.5, 0.5], 2, 10, 0)
        };
        let zero = spec.with_magnitude(0.0);
        let g = generate(&zero).unwrap();
        assert_eq!(g.ground_truth.truth, Truth::Pure);
        let sticky = spec.with_magnitude(0.4);
        match sticky.contamination {
            Contamination::Markov { transition, .. } => {
                assert!((transition[0][0] - 0.7).abs() < 1e-15);
                assert!((transition[0][1] - 0.3).abs() < 1e-15);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn spec_serde_shape() {
        let json = r#"{"kind":"run-mixture","alt_probs":[0.6,0.4],"weight":0.5,
                       "outcome_probs":[0.4,0.6],"runs":10,"run_length":200,"seed":3}"#;
        let spec: GeneratorSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.kind(), "run-mixture");
        let back: GeneratorSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn wilson_interval_brackets_estimate() {
        let (lo, hi) = wilson_interval(50, 1000, 1.96);
        assert!(lo < 0.05 && 0.05 < hi);
        assert!((hi - lo) < 0.03);
        assert_eq!(wilson_interval(0, 0, 1.96), (0.0, 1.0));
    }

    #[test]
    fn power_study_requires_replications() {
        let spec = GeneratorSpec::pure(vec![0.5, 0.5], 2, 50, 1);
        assert!(power_study(&spec, TestSelector::Runs, &PurityOptions::default(), 10).is_err());
    }

    #[test]
    fn alternating_chain_runs_power_is_one() {
        let spec = GeneratorSpec {
            contamination: Contamination::Markov {
                transition: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
                start: Some(0),
            },
            ..GeneratorSpec::pure(vec![0.5, 0.5], 1, 20, 17)
        };
        let est = power_study(&spec, TestSelector::Runs, &PurityOptions::default(), 200).unwrap();
        assert_eq!(est.power, 1.0);
    }
}
