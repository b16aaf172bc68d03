//! Brute-force reference implementations. Every null distribution here is
//! built by listing all equally likely arrangements, and statistics are
//! computed from their definitions (pair counts, naive midranks).

#![allow(dead_code)]

use purity_core::kernel::{Method, Sidedness};
use purity_core::nptests::{
    cox_stuart_test, kruskal_wallis_test, mann_whitney_test, runs_moments, runs_test,
    sign_test, wald_wolfowitz_test, wilcoxon_signed_rank_test, WwTieBreak,
};
use purity_core::{NpConfig, TestResult};

pub const TOL: f64 = 1e-12;
pub const MAX_N: usize = 10;
pub const SIDES: [Sidedness; 3] = [Sidedness::TwoSided, Sidedness::Greater, Sidedness::Less];

/// Arrangement counts at or below and at or above an observed statistic.
#[derive(Debug, Clone, Copy)]
pub struct Tails {
    pub lower: u64,
    pub upper: u64,
    pub total: u64,
}

impl Tails {
    pub fn of(observed: i64, null: impl IntoIterator<Item = i64>) -> Self {
        let mut t = Tails { lower: 0, upper: 0, total: 0 };
        for s in null {
            t.total += 1;
            t.lower += u64::from(s <= observed);
            t.upper += u64::from(s >= observed);
        }
        t
    }

    pub fn p(&self, side: Sidedness) -> f64 {
        let lo = self.lower as f64 / self.total as f64;
        let hi = self.upper as f64 / self.total as f64;
        match side {
            Sidedness::TwoSided => (2.0 * lo.min(hi)).min(1.0),
            Sidedness::Greater => hi,
            Sidedness::Less => lo,
        }
    }
}

/// Bitmasks over `n` positions with exactly `k` bits set.
pub fn subsets(n: usize, k: usize) -> impl Iterator<Item = u32> {
    (0u32..1 << n).filter(move |m| m.count_ones() as usize == k)
}

pub fn bits(mask: u32, n: usize) -> Vec<bool> {
    (0..n).map(|i| mask >> i & 1 == 1).collect()
}

pub fn runs_of(seq: &[bool]) -> i64 {
    1 + seq.windows(2).filter(|w| w[0] != w[1]).count() as i64
}

/// Non-decreasing sequences of length `n` over `0..levels`.
pub fn sorted_patterns(n: usize, levels: usize) -> Vec<Vec<f64>> {
    fn go(n: usize, levels: usize, from: usize, cur: &mut Vec<f64>, out: &mut Vec<Vec<f64>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for v in from..levels {
            cur.push(v as f64);
            go(n, levels, v, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(n, levels, 0, &mut Vec::with_capacity(n), &mut out);
    out
}

/// `2 * midrank` of each value, counted directly.
pub fn doubled_midranks(v: &[f64]) -> Vec<i64> {
    v.iter()
        .map(|x| {
            let below = v.iter().filter(|y| *y < x).count() as i64;
            let equal = v.iter().filter(|y| *y == x).count() as i64;
            2 * below + equal + 1
        })
        .collect()
}

/// `2 U`: two per pair with the first-sample value smaller, one per tie.
pub fn doubled_u(a: &[f64], b: &[f64]) -> i64 {
    a.iter()
        .flat_map(|x| b.iter().map(move |y| (x, y)))
        .map(|(x, y)| if x < y { 2 } else if x == y { 1 } else { 0 })
        .sum()
}

pub fn split(pooled: &[f64], mask: u32) -> (Vec<f64>, Vec<f64>) {
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (i, &v) in pooled.iter().enumerate() {
        if mask >> i & 1 == 1 {
            a.push(v);
        } else {
            b.push(v);
        }
    }
    (a, b)
}

/// Null of `2 U` over every choice of first-sample positions in `pooled`.
pub fn mw_null(pooled: &[f64], n1: usize) -> Vec<i64> {
    subsets(pooled.len(), n1)
        .map(|m| {
            let (a, b) = split(pooled, m);
            doubled_u(&a, &b)
        })
        .collect()
}

/// `2 R+` over the nonzero differences, and its null over all sign flips.
pub fn wilcoxon_tails(diffs: &[f64]) -> Tails {
    let nz: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    let abs: Vec<f64> = nz.iter().map(|d| d.abs()).collect();
    let ranks = doubled_midranks(&abs);
    let observed: i64 = nz.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let n = nz.len();
    Tails::of(
        observed,
        (0u32..1 << n).map(|m| (0..n).filter(|i| m >> i & 1 == 1).map(|i| ranks[i]).sum()),
    )
}

/// Kruskal-Wallis H from its definition with midranks.
pub fn h_stat(values: &[f64], labels: &[usize], k: usize) -> f64 {
    let n = values.len() as f64;
    let ranks = doubled_midranks(values);
    let mut sums = vec![0.0; k];
    let mut sizes = vec![0.0; k];
    for (r, &l) in ranks.iter().zip(labels) {
        sums[l] += *r as f64 / 2.0;
        sizes[l] += 1.0;
    }
    let between: f64 = sums.iter().zip(&sizes).map(|(s, c)| s * s / c).sum();
    12.0 / (n * (n + 1.0)) * between - 3.0 * (n + 1.0)
}

/// All distinct orderings of a multiset of labels.
pub fn labelings(sizes: &[usize]) -> Vec<Vec<usize>> {
    fn go(left: &mut [usize], cur: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for g in 0..left.len() {
            if left[g] > 0 {
                left[g] -= 1;
                cur.push(g);
                go(left, cur, n, out);
                cur.pop();
                left[g] += 1;
            }
        }
    }
    let n = sizes.iter().sum();
    let mut out = Vec::new();
    go(&mut sizes.to_vec(), &mut Vec::with_capacity(n), n, &mut out);
    out
}

/// Sorted null of H for fixed pooled values over every labeling.
pub fn kw_null(values: &[f64], sizes: &[usize]) -> Vec<f64> {
    let mut hs: Vec<f64> = labelings(sizes)
        .iter()
        .map(|l| h_stat(values, l, sizes.len()))
        .collect();
    hs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    hs
}

/// Share of the null at or above `h`; equal H values may differ by rounding.
pub fn kw_upper(null: &[f64], h: f64) -> f64 {
    let cut = h - 1e-9 * (1.0 + h.abs());
    let below = null.partition_point(|&x| x < cut);
    (null.len() - below) as f64 / null.len() as f64
}

/// Compositions of `n` into `k` positive parts.
pub fn compositions(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 1 {
        return if n >= 1 { vec![vec![n]] } else { vec![] };
    }
    (1..n)
        .flat_map(|first| {
            compositions(n - first, k - 1).into_iter().map(move |mut rest| {
                rest.insert(0, first);
                rest
            })
        })
        .collect()
}

fn cfg() -> NpConfig {
    NpConfig::default()
}

fn compare(what: &str, got: &TestResult, want: f64, method: Method) -> Result<(), String> {
    if got.p.method != method {
        return Err(format!("{what}: method {:?}, expected {method:?}", got.p.method));
    }
    if (got.p.value - want).abs() > TOL {
        return Err(format!("{what}: p = {} but enumeration gives {want}", got.p.value));
    }
    Ok(())
}

fn run<T>(what: impl Fn() -> String, r: purity_core::Result<T>) -> Result<T, String> {
    r.map_err(|e| format!("{}: {e}", what()))
}

/// Paired sign test: every (plus, minus, ties) split with up to ten pairs.
pub fn sweep_sign() -> Result<usize, String> {
    let mut checked = 0;
    for n in 1..=MAX_N {
        for plus in 0..=n {
            for minus in 0..=n - plus {
                let ties = n - plus - minus;
                let x: Vec<f64> = std::iter::repeat_n(1.0, plus)
                    .chain(std::iter::repeat_n(-1.0, minus))
                    .chain(std::iter::repeat_n(0.0, ties))
                    .collect();
                let y = vec![0.0; n];
                if plus + minus == 0 {
                    let e = sign_test(&x, &y, Sidedness::TwoSided, &cfg()).err();
                    if !e.is_some_and(|e| e.is_degenerate()) {
                        return Err(format!("sign {plus}/{minus}/{ties}: expected degenerate"));
                    }
                    continue;
                }
                let tails = Tails::of(plus as i64, (0u32..1 << (plus + minus)).map(|s| s.count_ones() as i64));
                for side in SIDES {
                    let what = || format!("sign plus={plus} minus={minus} ties={ties} {side:?}");
                    let r = run(what, sign_test(&x, &y, side, &cfg()))?;
                    compare(&what(), &r, tails.p(side), Method::Exact)?;
                    checked += 1;
                }
            }
        }
    }
    Ok(checked)
}

/// Cox-Stuart on every series of length 2..=10 over three levels.
pub fn sweep_cox_stuart() -> Result<usize, String> {
    let mut checked = 0;
    for n in 2..=MAX_N {
        for code in 0..3usize.pow(n as u32) {
            let series: Vec<f64> = (0..n).map(|i| (code / 3usize.pow(i as u32) % 3) as f64).collect();
            let k = n / 2;
            let (mut plus, mut minus) = (0, 0);
            for i in 0..k {
                let (early, late) = (series[i], series[n - k + i]);
                plus += usize::from(late > early);
                minus += usize::from(late < early);
            }
            if plus + minus == 0 {
                continue;
            }
            let tails = Tails::of(plus as i64, (0u32..1 << (plus + minus)).map(|s| s.count_ones() as i64));
            for side in SIDES {
                let what = || format!("cox-stuart {series:?} {side:?}");
                let r = run(what, cox_stuart_test(&series, side, &cfg()))?;
                compare(&what(), &r, tails.p(side), Method::Exact)?;
                checked += 1;
            }
        }
    }
    Ok(checked)
}

/// One-sample runs test on every two-symbol sequence up to length ten.
pub fn sweep_runs() -> Result<usize, String> {
    let mut checked = 0;
    for n in 2..=MAX_N {
        for mask in 0u32..1 << n {
            let ones = mask.count_ones() as usize;
            if ones == 0 || ones == n {
                continue;
            }
            let seq = bits(mask, n);
            let tails = Tails::of(runs_of(&seq), subsets(n, ones).map(|m| runs_of(&bits(m, n))));
            for side in SIDES {
                let what = || format!("runs {seq:?} {side:?}");
                let r = run(what, runs_test(&seq, side, &cfg()))?;
                compare(&what(), &r, tails.p(side), Method::Exact)?;
                checked += 1;
            }
        }
    }
    Ok(checked)
}

/// Wald-Wolfowitz on every interleaving of two tie-free samples, total n <= 10.
pub fn sweep_wald_wolfowitz() -> Result<usize, String> {
    let mut checked = 0;
    for n in 2..=MAX_N {
        let pooled: Vec<f64> = (0..n).map(|i| i as f64).collect();
        for n1 in 1..n {
            for mask in subsets(n, n1) {
                let (s1, s2) = split(&pooled, mask);
                // sorted pooled codes: true where the value came from s2
                let codes = bits(!mask & ((1 << n) - 1), n);
                let tails = Tails::of(runs_of(&codes), subsets(n, n1).map(|m| runs_of(&bits(m, n))));
                for side in SIDES {
                    let what = || format!("wald-wolfowitz {s1:?} {s2:?} {side:?}");
                    let r = run(what, wald_wolfowitz_test(&s1, &s2, side, &cfg()))?;
                    compare(&what(), &r, tails.p(side), Method::Exact)?;
                    checked += 1;
                }
            }
        }
    }
    Ok(checked)
}

/// Wald-Wolfowitz with values tied across samples under the max-runs rule:
/// the observed count is the maximum over every ordering inside tied blocks.
pub fn sweep_wald_wolfowitz_max_runs() -> Result<usize, String> {
    let cfg = NpConfig {
        ww_ties: WwTieBreak::MaxRuns,
        ..NpConfig::default()
    };
    let mut checked = 0;
    for n in 2..=8 {
        for pooled in sorted_patterns(n, 3) {
            if pooled.iter().all(|&v| v == pooled[0]) {
                continue;
            }
            for n1 in 1..n {
                for mask in subsets(n, n1) {
                    let (s1, s2) = split(&pooled, mask);
                    // pooled is sorted, so blocks are maximal stretches of equal values
                    let is_s2 = bits(!mask & ((1 << n) - 1), n);
                    let block_ones = |seq: &[bool]| -> Vec<usize> {
                        let mut out = Vec::new();
                        let mut i = 0;
                        while i < n {
                            let j = (i..n).find(|&j| pooled[j] != pooled[i]).unwrap_or(n);
                            out.push(seq[i..j].iter().filter(|&&b| b).count());
                            i = j;
                        }
                        out
                    };
                    let want_blocks = block_ones(&is_s2);
                    let observed = subsets(n, n - n1)
                        .map(|m| bits(m, n))
                        .filter(|seq| block_ones(seq) == want_blocks)
                        .map(|seq| runs_of(&seq))
                        .max()
                        .unwrap();
                    let tails = Tails::of(observed, subsets(n, n1).map(|m| runs_of(&bits(m, n))));
                    let what = || format!("wald-wolfowitz max-runs {s1:?} {s2:?}");
                    let r = run(what, wald_wolfowitz_test(&s1, &s2, Sidedness::Less, &cfg))?;
                    if r.statistic != observed as f64 {
                        return Err(format!("{}: R = {} but brute force gives {observed}", what(), r.statistic));
                    }
                    compare(&what(), &r, tails.p(Sidedness::Less), Method::Exact)?;
                    checked += 1;
                }
            }
        }
    }
    Ok(checked)
}

/// Mann-Whitney on every split of tie-free data and of every tie pattern over
/// three levels, total n <= 10.
pub fn sweep_mann_whitney() -> Result<usize, String> {
    let mut checked = 0;
    for n in 2..=MAX_N {
        let mut patterns = sorted_patterns(n, 3);
        patterns.push((0..n).map(|i| i as f64).collect());
        for pooled in patterns {
            let all_tied = pooled.iter().all(|&v| v == pooled[0]);
            for n1 in 1..n {
                let null = mw_null(&pooled, n1);
                for mask in subsets(n, n1) {
                    let (s1, s2) = split(&pooled, mask);
                    if all_tied {
                        let e = mann_whitney_test(&s1, &s2, Sidedness::TwoSided, &cfg()).err();
                        if !e.is_some_and(|e| e.is_degenerate()) {
                            return Err(format!("mann-whitney {s1:?} {s2:?}: expected degenerate"));
                        }
                        continue;
                    }
                    let u2 = doubled_u(&s1, &s2);
                    let tails = Tails::of(u2, null.iter().copied());
                    for side in SIDES {
                        let what = || format!("mann-whitney {s1:?} {s2:?} {side:?}");
                        let r = run(what, mann_whitney_test(&s1, &s2, side, &cfg()))?;
                        if r.statistic * 2.0 != u2 as f64 {
                            return Err(format!("{}: U = {} but pair count gives {}", what(), r.statistic, u2 as f64 / 2.0));
                        }
                        compare(&what(), &r, tails.p(side), Method::Exact)?;
                        checked += 1;
                    }
                }
            }
        }
    }
    Ok(checked)
}

/// Wilcoxon signed-rank on every multiset of differences over -2..=2 and
/// every sign pattern of tie-free magnitudes, n <= 10.
pub fn sweep_wilcoxon() -> Result<usize, String> {
    let mut checked = 0;
    for n in 1..=MAX_N {
        let mut cases: Vec<Vec<f64>> = sorted_patterns(n, 5)
            .into_iter()
            .map(|p| p.into_iter().map(|v| v - 2.0).collect())
            .collect();
        for mask in 0u32..1 << n {
            cases.push((0..n).map(|i| if mask >> i & 1 == 1 { (i + 1) as f64 } else { -((i + 1) as f64) }).collect());
        }
        for diffs in cases {
            let y = vec![0.0; n];
            if diffs.iter().all(|&d| d == 0.0) {
                let e = wilcoxon_signed_rank_test(&diffs, &y, Sidedness::TwoSided, &cfg()).err();
                if !e.is_some_and(|e| e.is_degenerate()) {
                    return Err(format!("wilcoxon {diffs:?}: expected degenerate"));
                }
                continue;
            }
            let tails = wilcoxon_tails(&diffs);
            for side in SIDES {
                let what = || format!("wilcoxon {diffs:?} {side:?}");
                let r = run(what, wilcoxon_signed_rank_test(&diffs, &y, side, &cfg()))?;
                compare(&what(), &r, tails.p(side), Method::Exact)?;
                checked += 1;
            }
        }
    }
    Ok(checked)
}

/// Kruskal-Wallis permutation p-value for k = 2 and 3 on every labeling of
/// tie-free data, and of two-level tie patterns, total n <= 10.
pub fn sweep_kruskal_wallis() -> Result<usize, String> {
    let mut checked = 0;
    for n in 2..=MAX_N {
        let mut patterns = sorted_patterns(n, 2);
        patterns.push((0..n).map(|i| i as f64).collect());
        for pooled in patterns {
            if pooled.iter().all(|&v| v == pooled[0]) {
                continue;
            }
            for k in 2..=3 {
                for sizes in compositions(n, k) {
                    let null = kw_null(&pooled, &sizes);
                    for labels in labelings(&sizes) {
                        let groups: Vec<Vec<f64>> = (0..k)
                            .map(|g| pooled.iter().zip(&labels).filter(|(_, &l)| l == g).map(|(v, _)| *v).collect())
                            .collect();
                        let want = kw_upper(&null, h_stat(&pooled, &labels, k));
                        let what = || format!("kruskal-wallis {groups:?}");
                        let r = run(what, kruskal_wallis_test(&groups, &cfg()))?;
                        compare(&what(), &r, want, Method::Permutation)?;
                        checked += 1;
                    }
                }
            }
        }
    }
    Ok(checked)
}

/// Largest deviation between the enumerated runs-count moments and the
/// closed forms over 1 <= n1, n2 <= 10.
pub fn runs_moment_deviation() -> f64 {
    let mut worst: f64 = 0.0;
    for n1 in 1..=MAX_N {
        for n2 in 1..=MAX_N {
            let n = n1 + n2;
            let counts: Vec<f64> = subsets(n, n2).map(|m| runs_of(&bits(m, n)) as f64).collect();
            let total = counts.len() as f64;
            let mean = counts.iter().sum::<f64>() / total;
            let var = counts.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / total;
            let (m, v) = runs_moments(n1, n2);
            worst = worst.max((mean - m).abs()).max((var - v).abs());
        }
    }
    worst
}
