//! Rank statistics: Spearman correlation and the Wilcoxon rank-sum test.

use crate::dist::normal_sf;
use crate::error::{Error, Result};

/// Largest pooled sample size for which the rank-sum null is enumerated exactly.
pub const EXACT_RANKSUM_MAX: usize = 12;

/// Mid-ranks (1-based), ties share the average of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spearman {
    /// `|ρ|` in `[0, 1]`.
    pub value: f64,
    /// One of the inputs was constant; `value` is then 0.
    pub degenerate: bool,
}

/// Absolute Spearman correlation: Pearson correlation of mid-rank vectors.
pub fn spearman_abs(u: &[f64], w: &[f64]) -> Result<Spearman> {
    if u.len() != w.len() {
        return Err(Error::input(format!("spearman inputs differ in length: {} vs {}", u.len(), w.len())));
    }
    if u.len() < 3 {
        return Err(Error::input("spearman needs at least 3 observations"));
    }
    let ru = average_ranks(u);
    let rw = average_ranks(w);
    let mean = (u.len() as f64 + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in ru.iter().zip(&rw) {
        let (da, db) = (a - mean, b - mean);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(Spearman { value: 0.0, degenerate: true });
    }
    Ok(Spearman { value: (sxy / (sxx * syy).sqrt()).abs().min(1.0), degenerate: false })
}

/// Two-sided Wilcoxon rank-sum p-value.
///
/// Exact permutation null (with mid-ranks, doubled smaller tail) when the pooled size is at most
/// [`EXACT_RANKSUM_MAX`]; otherwise the normal approximation with tie and
/// continuity corrections.
pub fn wilcoxon_ranksum_p(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::input("rank-sum test needs two non-empty samples"));
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = average_ranks(&pooled);
    let (na, nb) = (a.len(), b.len());
    let n = na + nb;
    if ranks.iter().all(|&r| r == ranks[0]) {
        return Ok(1.0);
    }
    if n <= EXACT_RANKSUM_MAX {
        return Ok(exact_ranksum_p(&ranks, na));
    }
    let w: f64 = ranks[..na].iter().sum();
    let u = w - (na * (na + 1)) as f64 / 2.0;
    let mu = (na * nb) as f64 / 2.0;
    let ties = tie_term(&pooled);
    let nf = n as f64;
    let var = (na * nb) as f64 / 12.0 * ((nf + 1.0) - ties / (nf * (nf - 1.0)));
    if var <= 0.0 {
        return Ok(1.0);
    }
    let z = ((u - mu).abs() - 0.5).max(0.0) / var.sqrt();
    Ok((2.0 * normal_sf(z)).min(1.0))
}

/// `Σ (t³ − t)` over tie groups.
fn tie_term(x: &[f64]) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let mut total = 0.0;
    let mut i = 0;
    while i < s.len() {
        let mut j = i;
        while j + 1 < s.len() && s[j + 1] == s[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        total += t * t * t - t;
        i = j + 1;
    }
    total
}

/// Enumerates every assignment of `na` of the pooled ranks to the first
/// sample and doubles the smaller tail probability.
fn exact_ranksum_p(ranks: &[f64], na: usize) -> f64 {
    let n = ranks.len();
    // doubled mid-ranks are integers
    let r2: Vec<i64> = ranks.iter().map(|r| (2.0 * r).round() as i64).collect();
    let observed: i64 = r2[..na].iter().sum();
    let (mut lower, mut upper, mut total) = (0u64, 0u64, 0u64);
    for mask in 0u32..(1u32 << n) {
        if mask.count_ones() as usize != na {
            continue;
        }
        let sum: i64 = (0..n).filter(|&i| mask & (1 << i) != 0).map(|i| r2[i]).sum();
        total += 1;
        lower += u64::from(sum <= observed);
        upper += u64::from(sum >= observed);
    }
    (2.0 * lower.min(upper) as f64 / total as f64).min(1.0)
}
