//! Distribution tails and tie-aware ranking shared by every test.
//!
//! The normal tail uses Hart's double-precision rational approximation
//! (absolute error below 1e-14 over the real line). The chi-square tail is
//! the regularized upper incomplete gamma function, evaluated by its power
//! series below `a + 1` and by a Lentz continued fraction above it; both are
//! iterated to machine precision.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which tail(s) of the null distribution count as evidence.
///
/// `Greater` means "the statistic is larger than expected under the null",
/// `Less` the opposite, for every test in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sidedness {
    #[default]
    TwoSided,
    Greater,
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    NormalApprox,
    ChiSquareApprox,
    Permutation,
}

/// A p-value together with the tail and the method that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PValue {
    pub value: f64,
    pub sidedness: Sidedness,
    pub method: Method,
}

impl PValue {
    /// Clamps `value` into `[0, 1]`.
    pub fn new(value: f64, sidedness: Sidedness, method: Method) -> Self {
        debug_assert!(!value.is_nan(), "NaN p-value");
        PValue {
            value: value.clamp(0.0, 1.0),
            sidedness,
            method,
        }
    }

    pub fn with_value(self, value: f64) -> Self {
        PValue::new(value, self.sidedness, self.method)
    }
}

/// Combines one-sided tails into a p-value of the requested sidedness.
pub(crate) fn combine_tails(lower: f64, upper: f64, sidedness: Sidedness) -> f64 {
    match sidedness {
        Sidedness::TwoSided => (2.0 * lower.min(upper)).min(1.0),
        Sidedness::Greater => upper.min(1.0),
        Sidedness::Less => lower.min(1.0),
    }
}

/// Exact tail probability of `Binomial(m, 1/2)` at `t`.
///
/// `Greater` is `P(T >= t)`, `Less` is `P(T <= t)`.
pub fn binomial_tail(m: u64, t: u64, sidedness: Sidedness) -> Result<PValue> {
    if m == 0 {
        return Err(Error::Degenerate("no informative pairs".into()));
    }
    if t > m {
        return Err(Error::InvalidInput(format!("t = {t} exceeds m = {m}")));
    }
    let pmf = binomial_half_pmf(m);
    let lower: f64 = pmf[..=t as usize].iter().sum();
    let upper: f64 = pmf[t as usize..].iter().sum();
    Ok(PValue::new(
        combine_tails(lower, upper, sidedness),
        sidedness,
        Method::Exact,
    ))
}

/// Probability masses of `Binomial(m, 1/2)`, index = number of successes.
fn binomial_half_pmf(m: u64) -> Vec<f64> {
    let m = m as usize;
    if m <= 60 {
        // every coefficient is an integer below 2^53, so each mass is exact
        let mut row = vec![1.0f64; m + 1];
        for k in 1..m {
            row[k] = row[k - 1] * (m - k + 1) as f64 / k as f64;
            row[k] = row[k].round();
        }
        let scale = 0.5f64.powi(m as i32);
        row.iter().map(|c| c * scale).collect()
    } else {
        let ln_m = ln_gamma(m as f64 + 1.0);
        let ln_half = m as f64 * std::f64::consts::LN_2;
        (0..=m)
            .map(|k| {
                (ln_m - ln_gamma(k as f64 + 1.0) - ln_gamma((m - k) as f64 + 1.0) - ln_half).exp()
            })
            .collect()
    }
}

/// Upper tail `P(Z >= z)` of the standard normal distribution.
pub fn std_normal_sf(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::Domain(format!("normal tail needs a finite argument, got {z}")));
    }
    Ok(normal_sf(z))
}

pub(crate) fn normal_sf(z: f64) -> f64 {
    let x = z.abs();
    let tail = if x > 37.0 {
        0.0
    } else {
        let e = (-x * x / 2.0).exp();
        if x < 7.071_067_811_865_47 {
            let mut num = 3.526_249_659_989_11e-2 * x + 0.700_383_064_443_688;
            num = num * x + 6.373_962_203_531_65;
            num = num * x + 33.912_866_078_383;
            num = num * x + 112.079_291_497_871;
            num = num * x + 221.213_596_169_931;
            num = num * x + 220.206_867_912_376;
            let mut den = 8.838_834_764_831_84e-2 * x + 1.755_667_163_182_64;
            den = den * x + 16.064_177_579_207;
            den = den * x + 86.780_732_202_946_1;
            den = den * x + 296.564_248_779_674;
            den = den * x + 637.333_633_378_831;
            den = den * x + 793.826_512_519_948;
            den = den * x + 440.413_735_824_752;
            e * num / den
        } else {
            let mut b = x + 0.65;
            b = x + 4.0 / b;
            b = x + 3.0 / b;
            b = x + 2.0 / b;
            b = x + 1.0 / b;
            e / b / 2.506_628_274_631
        }
    };
    if z >= 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// Upper tail `P(X >= h)` of the chi-square distribution with `df` degrees
/// of freedom.
pub fn chi_square_sf(h: f64, df: u32) -> Result<f64> {
    if df == 0 {
        return Err(Error::Domain("chi-square needs df >= 1".into()));
    }
    if h.is_nan() || h < 0.0 {
        return Err(Error::Domain(format!("chi-square statistic must be >= 0, got {h}")));
    }
    if h.is_infinite() {
        return Ok(0.0);
    }
    Ok(upper_gamma_regularized(df as f64 / 2.0, h / 2.0))
}

/// `Q(a, x) = Γ(a, x) / Γ(a)`.
fn upper_gamma_regularized(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let log_prefix = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        // P(a, x) by its power series
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..10_000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        (1.0 - sum * log_prefix.exp()).clamp(0.0, 1.0)
    } else {
        // modified Lentz on the continued fraction for Q(a, x)
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-17 {
                break;
            }
        }
        (log_prefix.exp() * h).clamp(0.0, 1.0)
    }
}

/// Lanczos approximation (g = 7, n = 9), relative error ~1e-15 for x > 0.
pub(crate) fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Normal-approximation p-value for `statistic` with the given null mean and
/// variance. `continuity` shifts the deviation toward zero by that amount
/// (in statistic units) before standardizing.
pub(crate) fn normal_pvalue(
    statistic: f64,
    mean: f64,
    variance: f64,
    continuity: f64,
    sidedness: Sidedness,
) -> Result<(f64, PValue)> {
    if !(variance > 0.0) {
        return Err(Error::Degenerate("null variance is zero".into()));
    }
    let sd = variance.sqrt();
    let dev = statistic - mean;
    let z = dev / sd;
    let p = match sidedness {
        Sidedness::Greater => normal_sf((dev - continuity) / sd),
        Sidedness::Less => normal_sf(-(dev + continuity) / sd),
        Sidedness::TwoSided => {
            (2.0 * normal_sf((dev.abs() - continuity).max(0.0) / sd)).min(1.0)
        }
    };
    Ok((z, PValue::new(p, sidedness, Method::NormalApprox)))
}

/// Exact null distribution of a statistic on an integer lattice
/// (doubled rank sums, run counts, ...), stored as ascending support with
/// probability masses.
#[derive(Debug, Clone)]
pub(crate) struct DiscreteNull {
    support: Vec<i64>,
    mass: Vec<f64>,
}

impl DiscreteNull {
    /// Builds the distribution from raw counts (any nonnegative weights).
    pub(crate) fn from_counts(mut entries: Vec<(i64, f64)>) -> Self {
        entries.retain(|&(_, c)| c > 0.0);
        entries.sort_by_key(|&(k, _)| k);
        let total: f64 = entries.iter().map(|&(_, c)| c).sum();
        DiscreteNull {
            support: entries.iter().map(|&(k, _)| k).collect(),
            mass: entries.iter().map(|&(_, c)| c / total).collect(),
        }
    }

    pub(crate) fn lower(&self, x: i64) -> f64 {
        self.support
            .iter()
            .zip(&self.mass)
            .filter(|(k, _)| **k <= x)
            .map(|(_, p)| p)
            .sum()
    }

    pub(crate) fn upper(&self, x: i64) -> f64 {
        self.support
            .iter()
            .zip(&self.mass)
            .filter(|(k, _)| **k >= x)
            .map(|(_, p)| p)
            .sum()
    }

    pub(crate) fn pvalue(&self, x: i64, sidedness: Sidedness, method: Method) -> PValue {
        PValue::new(
            combine_tails(self.lower(x), self.upper(x), sidedness),
            sidedness,
            method,
        )
    }

    #[cfg(test)]
    pub(crate) fn moments(&self) -> (f64, f64) {
        let mean: f64 = self.support.iter().zip(&self.mass).map(|(k, p)| *k as f64 * p).sum();
        let var: f64 = self
            .support
            .iter()
            .zip(&self.mass)
            .map(|(k, p)| (*k as f64 - mean).powi(2) * p)
            .sum();
        (mean, var)
    }
}

/// Average ranks of a sample, stored exactly as doubled integers.
///
/// Ties over consecutive integer ranks always average to a multiple of
/// one half, so `doubled[i] = 2 * rank[i]` is an integer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankAssignment {
    doubled: Vec<u64>,
    tie_groups: Vec<Vec<usize>>,
}

impl RankAssignment {
    pub fn len(&self) -> usize {
        self.doubled.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doubled.is_empty()
    }

    pub fn rank(&self, i: usize) -> f64 {
        self.doubled[i] as f64 / 2.0
    }

    pub fn ranks(&self) -> Vec<f64> {
        self.doubled.iter().map(|&d| d as f64 / 2.0).collect()
    }

    pub fn doubled(&self) -> &[u64] {
        &self.doubled
    }

    /// Groups of two or more observation indices sharing an averaged rank.
    pub fn tie_groups(&self) -> &[Vec<usize>] {
        &self.tie_groups
    }

    /// Number of observations involved in some tie.
    pub fn tied_observations(&self) -> usize {
        self.tie_groups.iter().map(Vec::len).sum()
    }

    /// `sum(t^3 - t)` over tie groups, the usual variance-correction term.
    pub fn tie_term(&self) -> f64 {
        self.tie_groups
            .iter()
            .map(|g| {
                let t = g.len() as f64;
                t * t * t - t
            })
            .sum()
    }
}

/// Ranks `values` from smallest (rank 1) to largest, giving tied values the
/// mean of the integer ranks they span.
pub fn rank_with_ties(values: &[f64]) -> Result<RankAssignment> {
    if values.is_empty() {
        return Err(Error::InvalidInput("cannot rank an empty sequence".into()));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite value {v}")));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));

    let mut doubled = vec![0u64; values.len()];
    let mut tie_groups = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold integer ranks start+1..=end
        let d = (start + 1 + end) as u64;
        for &idx in &order[start..end] {
            doubled[idx] = d;
        }
        if end - start > 1 {
            let mut group: Vec<usize> = order[start..end].to_vec();
            group.sort_unstable();
            tie_groups.push(group);
        }
        start = end;
    }
    Ok(RankAssignment {
        doubled,
        tie_groups,
    })
}

pub(crate) fn check_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::InvalidInput(format!(
            "{what}: non-finite value {} at position {i}",
            values[i]
        ))),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Composite Simpson integration of the Gaussian density on [z, z + 40].
    fn normal_sf_quadrature(z: f64) -> f64 {
        let n = 200_000;
        let (a, b) = (z, z + 40.0);
        let h = (b - a) / n as f64;
        let pdf = |x: f64| (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut s = pdf(a) + pdf(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * pdf(x);
        }
        s * h / 3.0
    }

    #[test]
    fn binomial_tail_examples() {
        // 2^3 equiprobable sign sequences: T=3 in one of them
        let p = binomial_tail(3, 3, Sidedness::TwoSided).unwrap();
        assert_eq!(p.value, 0.25);
        assert_eq!(p.method, Method::Exact);
        assert_eq!(binomial_tail(10, 5, Sidedness::TwoSided).unwrap().value, 1.0);
        assert_eq!(binomial_tail(4, 0, Sidedness::Greater).unwrap().value, 1.0);
        assert!(binomial_tail(0, 0, Sidedness::TwoSided).unwrap_err().is_degenerate());
        assert!(binomial_tail(3, 4, Sidedness::TwoSided).is_err());
    }

    #[test]
    fn binomial_tail_agrees_with_enumeration() {
        for m in 1..=12u64 {
            for t in 0..=m {
                let mut ge = 0u64;
                let mut le = 0u64;
                for mask in 0u32..(1 << m) {
                    let plus = mask.count_ones() as u64;
                    if plus >= t {
                        ge += 1;
                    }
                    if plus <= t {
                        le += 1;
                    }
                }
                let total = (1u64 << m) as f64;
                let g = binomial_tail(m, t, Sidedness::Greater).unwrap().value;
                let l = binomial_tail(m, t, Sidedness::Less).unwrap().value;
                assert!((g - ge as f64 / total).abs() < 1e-15);
                assert!((l - le as f64 / total).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn binomial_large_m_uses_log_path_consistently() {
        let p = binomial_tail(200, 100, Sidedness::TwoSided).unwrap().value;
        assert_eq!(p, 1.0);
        let lo = binomial_tail(200, 80, Sidedness::Less).unwrap().value;
        // P(Bin(200, .5) <= 80) = 0.0028441... (quadrature-free reference from the
        // exact rational sum, computed with the integer path below)
        let mut exact = 0.0f64;
        let mut c = 1.0f64;
        let ln2 = std::f64::consts::LN_2;
        for k in 0..=80u32 {
            if k > 0 {
                c *= (200 - k + 1) as f64 / k as f64;
            }
            exact += (c.ln() - 200.0 * ln2).exp();
        }
        assert!((lo - exact).abs() < 1e-12, "{lo} vs {exact}");
    }

    #[test]
    fn normal_sf_examples() {
        assert_eq!(std_normal_sf(0.0).unwrap(), 0.5);
        assert!((std_normal_sf(1.96).unwrap() - 0.0250).abs() < 1e-4);
        assert!((std_normal_sf(-1.96).unwrap() - 0.9750).abs() < 1e-4);
        assert!(std_normal_sf(f64::NAN).is_err());
        assert!(std_normal_sf(f64::INFINITY).is_err());
    }

    #[test]
    fn normal_sf_matches_quadrature() {
        for &z in &[-3.0, -1.0, 0.3, 1.0, 1.96, 2.5, 4.0, 6.0, 8.0] {
            let q = normal_sf_quadrature(z);
            let s = std_normal_sf(z).unwrap();
            assert!((q - s).abs() < 1e-10, "z={z}: {s} vs {q}");
        }
    }

    #[test]
    fn chi_square_examples() {
        assert_eq!(chi_square_sf(0.0, 2).unwrap(), 1.0);
        assert!((chi_square_sf(5.991, 2).unwrap() - 0.0500).abs() < 5e-4);
        assert!((chi_square_sf(4.5714, 2).unwrap() - 0.1017).abs() < 5e-4);
        assert!(chi_square_sf(-1.0, 2).is_err());
        assert!(chi_square_sf(1.0, 0).is_err());
    }

    #[test]
    fn chi_square_closed_forms() {
        // df = 2: exp(-h/2); df = 1: 2 * normal_sf(sqrt(h))
        for &h in &[0.01, 0.5, 1.0, 3.0, 5.991, 10.0, 30.0, 80.0] {
            let two = chi_square_sf(h, 2).unwrap();
            assert!((two - (-h / 2.0).exp()).abs() < 1e-13, "df=2 h={h}");
            let one = chi_square_sf(h, 1).unwrap();
            let z = 2.0 * normal_sf(h.sqrt());
            assert!((one - z).abs() < 1e-12, "df=1 h={h}: {one} vs {z}");
        }
        // df = 4: exp(-h/2) (1 + h/2)
        for &h in &[0.2, 2.0, 7.0, 20.0] {
            let four = chi_square_sf(h, 4).unwrap();
            assert!((four - (-h / 2.0).exp() * (1.0 + h / 2.0)).abs() < 1e-13);
        }
    }

    #[test]
    fn ranks_examples() {
        assert_eq!(rank_with_ties(&[10.0, 20.0, 30.0]).unwrap().ranks(), vec![1.0, 2.0, 3.0]);
        let r = rank_with_ties(&[5.0, 5.0, 9.0]).unwrap();
        assert_eq!(r.ranks(), vec![1.5, 1.5, 3.0]);
        assert_eq!(r.tie_groups(), &[vec![0, 1]]);
        assert_eq!(rank_with_ties(&[7.0; 4]).unwrap().ranks(), vec![2.5; 4]);
        assert!(rank_with_ties(&[]).is_err());
        assert!(rank_with_ties(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn signed_zero_ties() {
        let r = rank_with_ties(&[0.0, -0.0, 1.0]).unwrap();
        assert_eq!(r.ranks(), vec![1.5, 1.5, 3.0]);
    }

    proptest! {
        #[test]
        fn rank_sum_is_exact(values in prop::collection::vec(-5i32..5, 1..60)) {
            let v: Vec<f64> = values.iter().map(|&x| x as f64).collect();
            let r = rank_with_ties(&v).unwrap();
            let n = v.len() as u64;
            prop_assert_eq!(r.doubled().iter().sum::<u64>(), n * (n + 1));
            for g in r.tie_groups() {
                let d = r.doubled()[g[0]];
                prop_assert!(g.iter().all(|&i| r.doubled()[i] == d));
            }
        }

        #[test]
        fn binomial_two_sided_symmetric(m in 1u64..120, frac in 0.0f64..1.0) {
            let t = ((m as f64) * frac).floor() as u64;
            let a = binomial_tail(m, t, Sidedness::TwoSided).unwrap().value;
            let b = binomial_tail(m, m - t, Sidedness::TwoSided).unwrap().value;
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a));
        }

        #[test]
        fn normal_sf_symmetric_and_monotone(z in -12.0f64..12.0, dz in 0.0f64..3.0) {
            let s = std_normal_sf(z).unwrap();
            prop_assert!((s + std_normal_sf(-z).unwrap() - 1.0).abs() < 1e-15);
            prop_assert!(std_normal_sf(z + dz).unwrap() <= s);
        }

        #[test]
        fn chi_square_monotone(h in 0.0f64..60.0, dh in 0.0f64..5.0, df in 1u32..30) {
            let a = chi_square_sf(h, df).unwrap();
            let b = chi_square_sf(h + dh, df).unwrap();
            prop_assert!(b <= a + 1e-15);
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}
