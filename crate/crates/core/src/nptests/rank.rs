use super::{primary, NpConfig, TestKind, TestResult};
use crate::error::{Error, Result};
use crate::kernel::{
    check_finite, chi_square_sf, normal_pvalue, rank_with_ties, DiscreteNull, Method, PValue,
    Sidedness,
};

/// Mann-Whitney test with `U = n1 n2 + n1 (n1 + 1) / 2 - R1`, where `R1` is
/// the rank sum of `s1` in the pooled sample. `U` counts pairs in which the
/// `s1` observation is the smaller one (ties count one half), so large `U`
/// means `s1` sits below `s2`.
pub fn mann_whitney_test(
    s1: &[f64],
    s2: &[f64],
    sidedness: Sidedness,
    cfg: &NpConfig,
) -> Result<TestResult> {
    if s1.is_empty() || s2.is_empty() {
        return Err(Error::InvalidInput("mann-whitney needs two non-empty samples".into()));
    }
    check_finite(s1, "mann-whitney s1")?;
    check_finite(s2, "mann-whitney s2")?;
    let (n1, n2) = (s1.len(), s2.len());
    let n = n1 + n2;
    let pooled: Vec<f64> = s1.iter().chain(s2).copied().collect();
    let ranks = rank_with_ties(&pooled)?;
    if ranks.tie_groups().len() == 1 && ranks.tied_observations() == n {
        return Err(Error::Degenerate("mann-whitney: every observation tied".into()));
    }
    let r1_doubled: u64 = ranks.doubled()[..n1].iter().sum();
    // doubled U is an integer: 2 n1 n2 + n1 (n1 + 1) - 2 R1
    let u_doubled = (2 * n1 * n2 + n1 * (n1 + 1)) as i64 - r1_doubled as i64;
    let u = u_doubled as f64 / 2.0;

    let exact = if n <= cfg.exact.mann_whitney {
        Some(mw_null(ranks.doubled(), n1).pvalue(u_doubled, sidedness, Method::Exact))
    } else {
        None
    };

    let nn = (n1 * n2) as f64;
    let mean = nn / 2.0;
    let mut var = nn * (n as f64 + 1.0) / 12.0;
    if cfg.tie_correction {
        var = nn / 12.0 * ((n as f64 + 1.0) - ranks.tie_term() / (n as f64 * (n as f64 - 1.0)));
    }
    let (z, asym) = normal_pvalue(u, mean, var, cfg.continuity(0.5), sidedness)?;

    let mut r = TestResult::new(TestKind::MannWhitney, u, "U", primary(exact, Some(asym)));
    r.z = Some(z);
    r.exact = exact;
    r.asymptotic = Some(asym);
    r.n_used = vec![n1, n2];
    r.tied = ranks.tied_observations();
    if r.tied > 0 {
        r.notes.push(tie_note(r.tied, cfg.tie_correction));
    }
    Ok(r)
}

fn tie_note(tied: usize, corrected: bool) -> String {
    if corrected {
        format!("{tied} tied observations; tie-corrected variance")
    } else {
        format!("{tied} tied observations; variance not tie-corrected (conservative)")
    }
}

/// Null distribution of doubled `U` over all `C(n, n1)` ways of choosing which
/// ranks belong to the first sample.
fn mw_null(doubled: &[u64], n1: usize) -> DiscreteNull {
    let n = doubled.len();
    let max_sum = (n * (n + 1)) as usize;
    // ways[j][s]: subsets of size j with doubled rank sum s
    let mut ways = vec![vec![0.0f64; max_sum + 1]; n1 + 1];
    ways[0][0] = 1.0;
    for &d in doubled {
        let d = d as usize;
        for j in (1..=n1).rev() {
            let (lo, hi) = ways.split_at_mut(j);
            for s in (d..=max_sum).rev() {
                hi[0][s] += lo[j - 1][s - d];
            }
        }
    }
    let n2 = n - n1;
    let base = (2 * n1 * n2 + n1 * (n1 + 1)) as i64;
    DiscreteNull::from_counts(
        ways[n1]
            .iter()
            .enumerate()
            .map(|(s, &c)| (base - s as i64, c))
            .collect(),
    )
}

/// Wilcoxon signed-rank test on paired differences `x - y`. Zero differences
/// are dropped; `T = min(R+, R-)`. One-sided p-values refer to `R+`.
pub fn wilcoxon_signed_rank_test(
    x: &[f64],
    y: &[f64],
    sidedness: Sidedness,
    cfg: &NpConfig,
) -> Result<TestResult> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    check_finite(x, "wilcoxon x")?;
    check_finite(y, "wilcoxon y")?;
    let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    let zeros = x.len() - diffs.len();
    if diffs.is_empty() {
        return Err(Error::Degenerate(format!(
            "wilcoxon: all {zeros} differences are zero"
        )));
    }
    let n = diffs.len();
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = rank_with_ties(&abs)?;
    let plus_doubled: u64 = diffs
        .iter()
        .zip(ranks.doubled())
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| *r)
        .sum();
    let total_doubled = (n * (n + 1)) as u64;
    let r_plus = plus_doubled as f64 / 2.0;
    let r_minus = (total_doubled - plus_doubled) as f64 / 2.0;
    let t = r_plus.min(r_minus);

    let exact = if n <= cfg.exact.wilcoxon {
        Some(wilcoxon_null(ranks.doubled()).pvalue(plus_doubled as i64, sidedness, Method::Exact))
    } else {
        None
    };
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0;
    if cfg.tie_correction {
        var -= ranks.tie_term() / 48.0;
    }
    let asym = match normal_pvalue(r_plus, mean, var, cfg.continuity(0.5), sidedness) {
        Ok(a) => Some(a),
        Err(e) if exact.is_none() => return Err(e),
        Err(_) => None,
    };

    let mut r = TestResult::new(TestKind::Wilcoxon, t, "T_wilcoxon", primary(exact, asym.map(|a| a.1)));
    r.z = asym.map(|a| a.0);
    r.exact = exact;
    r.asymptotic = asym.map(|a| a.1);
    r.n_used = vec![n];
    r.ties_skipped = zeros;
    r.tied = ranks.tied_observations();
    if r.tied > 0 {
        r.notes.push(tie_note(r.tied, cfg.tie_correction));
    }
    Ok(r)
}

/// Null distribution of doubled `R+` over the `2^n` sign assignments.
fn wilcoxon_null(doubled: &[u64]) -> DiscreteNull {
    let max_sum: usize = doubled.iter().map(|&d| d as usize).sum();
    let mut ways = vec![0.0f64; max_sum + 1];
    ways[0] = 1.0;
    for &d in doubled {
        let d = d as usize;
        for s in (d..=max_sum).rev() {
            ways[s] += ways[s - d];
        }
    }
    DiscreteNull::from_counts(ways.iter().enumerate().map(|(s, &c)| (s as i64, c)).collect())
}

/// Kruskal-Wallis H over `k >= 2` samples, referred to chi-square with `k - 1`
/// degrees of freedom; a permutation p-value is attached for small pooled
/// sizes.
pub fn kruskal_wallis_test<S: AsRef<[f64]>>(samples: &[S], cfg: &NpConfig) -> Result<TestResult> {
    let k = samples.len();
    if k < 2 {
        return Err(Error::InvalidInput(format!("kruskal-wallis needs k >= 2 samples, got {k}")));
    }
    let sizes: Vec<usize> = samples.iter().map(|s| s.as_ref().len()).collect();
    if let Some(j) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::InvalidInput(format!("kruskal-wallis: sample {j} is empty")));
    }
    let pooled: Vec<f64> = samples.iter().flat_map(|s| s.as_ref().iter().copied()).collect();
    check_finite(&pooled, "kruskal-wallis")?;
    let n = pooled.len();
    let ranks = rank_with_ties(&pooled)?;
    if ranks.tied_observations() == n && ranks.tie_groups().len() == 1 {
        return Err(Error::Degenerate("kruskal-wallis: every observation tied".into()));
    }
    let labels: Vec<usize> = sizes.iter().enumerate().flat_map(|(j, &s)| std::iter::repeat_n(j, s)).collect();
    let sums = group_sums(ranks.doubled(), &labels, k);

    let nf = n as f64;
    let mut h = 12.0 / (nf * (nf + 1.0)) * between_groups(&sums, &sizes) - 3.0 * (nf + 1.0);
    if cfg.tie_correction {
        h /= 1.0 - ranks.tie_term() / (nf * nf * nf - nf);
    }
    // H is a difference of two O(n) terms; anything this small is rounding
    if h.abs() < 1e-12 * (nf + 1.0) {
        h = 0.0;
    }
    let df = (k - 1) as u32;
    let asym = PValue::new(chi_square_sf(h.max(0.0), df)?, Sidedness::Greater, Method::ChiSquareApprox);
    let exact = (n <= cfg.exact.kruskal_wallis).then(|| {
        PValue::new(
            kw_permutation_p(ranks.doubled(), &labels, &sizes),
            Sidedness::Greater,
            Method::Permutation,
        )
    });

    let mut r = TestResult::new(TestKind::KruskalWallis, h, "H", primary(exact, Some(asym)));
    r.df = Some(df);
    r.exact = exact;
    r.asymptotic = Some(asym);
    r.n_used = sizes.clone();
    r.tied = ranks.tied_observations();
    if sizes.iter().any(|&s| s < 5) {
        r.notes.push("some n_j < 5: chi-square approximation unreliable".into());
    }
    if r.tied > 0 {
        r.notes.push(tie_note(r.tied, cfg.tie_correction));
    }
    Ok(r)
}

fn group_sums(doubled: &[u64], labels: &[usize], k: usize) -> Vec<u64> {
    let mut sums = vec![0u64; k];
    for (&d, &l) in doubled.iter().zip(labels) {
        sums[l] += d;
    }
    sums
}

/// `sum_j R_j^2 / n_j` from doubled rank sums.
fn between_groups(doubled_sums: &[u64], sizes: &[usize]) -> f64 {
    doubled_sums
        .iter()
        .zip(sizes)
        .map(|(&d, &s)| (d as f64) * (d as f64) / (4.0 * s as f64))
        .sum()
}

/// Integer key increasing in H: `sum_j D_j^2 * w_j` with `w_j = L / n_j` and
/// `L` the lcm of the group sizes.
fn kw_key(doubled_sums: &[u64], weights: &[u128]) -> u128 {
    doubled_sums
        .iter()
        .zip(weights)
        .map(|(&d, &w)| (d as u128) * (d as u128) * w)
        .sum()
}

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Fraction of the distinct group-label arrangements whose H is at least the
/// observed one. Arrangements are walked in lexicographic order.
fn kw_permutation_p(doubled: &[u64], labels: &[usize], sizes: &[usize]) -> f64 {
    let k = sizes.len();
    let lcm = sizes.iter().fold(1u128, |acc, &s| acc / gcd(acc, s as u128) * s as u128);
    let weights: Vec<u128> = sizes.iter().map(|&s| lcm / s as u128).collect();
    let observed = kw_key(&group_sums(doubled, labels, k), &weights);
    let mut perm = labels.to_vec();
    perm.sort_unstable();
    let mut sums = vec![0u64; k];
    let (mut hits, mut total) = (0u64, 0u64);
    loop {
        total += 1;
        sums.fill(0);
        for (&d, &l) in doubled.iter().zip(&perm) {
            sums[l] += d;
        }
        if kw_key(&sums, &weights) >= observed {
            hits += 1;
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    hits as f64 / total as f64
}

fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        return false;
    };
    let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).expect("pivot exists");
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}
