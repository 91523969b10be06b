//! Timing of full SVD, dense eigendecomposition of `XXᵀ` and randomized SVD.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use arsvd_core::matrix::matmul_nt;
use arsvd_core::{arsvd_fixed, gaussian_matrix, svd_exact, sym_eigen, ArsvdConfig, DenseMatrix, RngSeed};
use serde::{Deserialize, Serialize};

use crate::args::{BenchArgs, BenchMode};
use crate::error::{CliError, CliResult};
use crate::manifest::{to_value, Recorder};

/// Noise level of the benchmark matrices relative to `N(0, 1/n)` entries.
const NOISE: f64 = 0.01;

/// Leading singular values compared across modes.
const CROSS_CHECK_K: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub mode: String,
    pub n: usize,
    pub p: usize,
    pub seconds: Option<f64>,
    /// `"ok"` or `"skipped"`.
    pub status: String,
    pub estimated_flops: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModeSlopes {
    /// Log-log slope of time against `p`, keyed by the fixed `n`.
    pub in_p_at_fixed_n: BTreeMap<usize, f64>,
    /// Log-log slope of time against `n`, keyed by the fixed `p`.
    pub in_n_at_fixed_p: BTreeMap<usize, f64>,
    /// With paired lists: slopes along the path against `p` and against `n`.
    pub along_path_p: Option<f64>,
    pub along_path_n: Option<f64>,
    /// Largest `(n, p)` that ran.
    pub largest_run: Option<(usize, usize)>,
    /// Smallest `(n, p)` that was skipped.
    pub smallest_skipped: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCheck {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub reference: String,
    /// Largest relative difference of the top `k` singular values, per mode.
    pub max_rel_diff: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub slopes: BTreeMap<String, ModeSlopes>,
    pub cross_check: Option<CrossCheck>,
}

fn mode_name(m: BenchMode) -> &'static str {
    match m {
        BenchMode::Svd => "svd",
        BenchMode::Eig => "eig",
        BenchMode::Rsvd => "rsvd",
    }
}

/// Rough operation count used to decide whether a dense mode is attempted.
pub fn estimated_flops(mode: BenchMode, n: usize, p: usize, rank: usize, t: usize) -> f64 {
    let (n, p) = (n as f64, p as f64);
    match mode {
        BenchMode::Svd => {
            let (big, small) = (n.max(p), n.min(p));
            2.0 * big * small * small + 30.0 * small.powi(3)
        }
        BenchMode::Eig => 2.0 * n * n * p + 9.0 * n.powi(3),
        BenchMode::Rsvd => {
            let l = (rank + 10) as f64;
            4.0 * n * p * l * (t as f64 + 1.0) + 4.0 * (n + p) * l * l * (t as f64 + 1.0)
        }
    }
}

/// Rank-`rank` signal with singular values near `1 … rank` plus weak noise.
pub fn bench_matrix(n: usize, p: usize, rank: usize, seed: u64) -> CliResult<DenseMatrix> {
    let s = RngSeed::new(seed);
    let mut a = gaussian_matrix(n, rank, s.substream(1));
    let b = gaussian_matrix(p, rank, s.substream(2));
    let weights: Vec<f64> = (0..rank).map(|k| (rank - k) as f64 / ((n * p) as f64).sqrt()).collect();
    a.scale_cols(&weights);
    let signal = matmul_nt(&a, &b)?;
    let mut noise = gaussian_matrix(n, p, s.substream(3));
    noise.scale(NOISE / (n as f64).sqrt());
    Ok(signal.add(&noise)?)
}

/// Top singular values computed by `mode`.
fn decompose(mode: BenchMode, x: &DenseMatrix, rank: usize, t: usize, seed: u64) -> CliResult<Vec<f64>> {
    Ok(match mode {
        BenchMode::Svd => svd_exact(x)?.s,
        BenchMode::Eig => {
            let g = matmul_nt(x, x)?;
            sym_eigen(&g, true)?.values.iter().map(|v| v.max(0.0).sqrt()).collect()
        }
        BenchMode::Rsvd => arsvd_fixed(x, rank, t, &ArsvdConfig::new(rank, t, seed))?.s,
    })
}

fn slope(points: &[(f64, f64)]) -> Option<f64> {
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if points.len() < 2 || sxx == 0.0 {
        return None;
    }
    Some(xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / sxx)
}

fn grouped_slopes(rows: &[&BenchRow], key: impl Fn(&BenchRow) -> usize, axis: impl Fn(&BenchRow) -> usize) -> BTreeMap<usize, f64> {
    let mut groups: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows {
        if let Some(s) = r.seconds {
            groups.entry(key(r)).or_default().push((axis(r) as f64, s));
        }
    }
    groups.into_iter().filter_map(|(k, pts)| slope(&pts).map(|s| (k, s))).collect()
}

fn summarize(rows: &[BenchRow], modes: &[BenchMode], paired: bool) -> BTreeMap<String, ModeSlopes> {
    let mut out = BTreeMap::new();
    for &m in modes {
        let name = mode_name(m);
        let mine: Vec<&BenchRow> = rows.iter().filter(|r| r.mode == name).collect();
        let ran: Vec<&BenchRow> = mine.iter().copied().filter(|r| r.seconds.is_some()).collect();
        let path = |axis: fn(&BenchRow) -> usize| {
            paired.then(|| slope(&ran.iter().map(|r| (axis(r) as f64, r.seconds.unwrap())).collect::<Vec<_>>())).flatten()
        };
        out.insert(
            name.to_string(),
            ModeSlopes {
                in_p_at_fixed_n: grouped_slopes(&mine, |r| r.n, |r| r.p),
                in_n_at_fixed_p: grouped_slopes(&mine, |r| r.p, |r| r.n),
                along_path_p: path(|r| r.p),
                along_path_n: path(|r| r.n),
                largest_run: ran.iter().max_by_key(|r| (r.n * r.p, r.n, r.p)).map(|r| (r.n, r.p)),
                smallest_skipped: mine.iter().filter(|r| r.seconds.is_none()).min_by_key(|r| (r.n * r.p, r.n, r.p)).map(|r| (r.n, r.p)),
            },
        );
    }
    out
}

/// Sizes in run order.
fn sizes(args: &BenchArgs) -> CliResult<Vec<(usize, usize)>> {
    if args.paired {
        if args.n_list.len() != args.p_list.len() {
            return Err(CliError::Usage(format!(
                "--paired needs lists of equal length, got {} and {}",
                args.n_list.len(),
                args.p_list.len()
            )));
        }
        return Ok(args.n_list.iter().copied().zip(args.p_list.iter().copied()).collect());
    }
    Ok(args.n_list.iter().flat_map(|&n| args.p_list.iter().map(move |&p| (n, p))).collect())
}

/// Runs the benchmark grid. Rows follow the size order, modes in the order given.
pub fn run_bench(args: &BenchArgs) -> CliResult<(Vec<BenchRow>, BenchSummary)> {
    let grid = sizes(args)?;
    if args.rank == 0 || args.t == 0 || args.repeats == 0 {
        return Err(CliError::Usage("--rank, --t and --repeats must be at least 1".into()));
    }
    if let Some(&(n, p)) = grid.iter().find(|&&(n, p)| args.rank > n.min(p)) {
        return Err(CliError::Usage(format!("--rank {} exceeds min(n, p) at n = {n}, p = {p}", args.rank)));
    }
    let smallest = grid.iter().copied().min_by_key(|&(n, p)| (n * p, n, p));
    let mut rows = Vec::new();
    let mut spectra: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for &(n, p) in &grid {
        let mut x = None;
        for &mode in &args.mode {
            let flops = estimated_flops(mode, n, p, args.rank, args.t);
            let dense = matches!(mode, BenchMode::Svd | BenchMode::Eig);
            if dense && flops > args.max_dense_flops {
                rows.push(BenchRow { mode: mode_name(mode).into(), n, p, seconds: None, status: "skipped".into(), estimated_flops: flops });
                continue;
            }
            if x.is_none() {
                x = Some(bench_matrix(n, p, args.rank, args.seed)?);
            }
            let xm = x.as_ref().expect("generated above");
            let mut best = f64::INFINITY;
            let mut values = Vec::new();
            for _ in 0..args.repeats {
                let start = Instant::now();
                values = decompose(mode, xm, args.rank, args.t, args.seed)?;
                best = best.min(start.elapsed().as_secs_f64());
            }
            if Some((n, p)) == smallest {
                spectra.insert(mode_name(mode).into(), values);
            }
            rows.push(BenchRow { mode: mode_name(mode).into(), n, p, seconds: Some(best), status: "ok".into(), estimated_flops: flops });
        }
    }
    let cross_check = smallest.and_then(|(n, p)| {
        let reference = ["svd", "eig"].into_iter().find(|m| spectra.contains_key(*m))?;
        let k = CROSS_CHECK_K.min(args.rank);
        let exact = &spectra[reference];
        let max_rel_diff = spectra
            .iter()
            .filter(|(m, _)| m.as_str() != reference)
            .map(|(m, s)| {
                let d = (0..k).map(|i| (s[i] - exact[i]).abs() / exact[i]).fold(0.0, f64::max);
                (m.clone(), d)
            })
            .collect();
        Some(CrossCheck { n, p, k, reference: reference.into(), max_rel_diff })
    });
    let summary = BenchSummary { slopes: summarize(&rows, &args.mode, args.paired), cross_check };
    Ok((rows, summary))
}

pub fn render_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("mode,n,p,seconds,status,estimated_flops\n");
    for r in rows {
        let secs = r.seconds.map(|s| s.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{secs},{},{:e}", r.mode, r.n, r.p, r.status, r.estimated_flops);
    }
    out
}

pub fn run_bench_cmd(args: &BenchArgs, rec: &mut Recorder) -> CliResult<()> {
    let (rows, summary) = rec.stage("bench", || run_bench(args))?;
    let path = rec.path("timings.csv");
    std::fs::write(&path, render_csv(&rows)).map_err(|e| CliError::io(&path, e))?;
    rec.output("timings.csv", Some((rows.len(), 6)));
    rec.write_json("bench_summary.json", &summary)?;
    rec.manifest.results = to_value(&summary);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [1.0, 2.0, 4.0, 8.0].iter().map(|&x: &f64| (x, 3.0 * x.powf(1.5))).collect();
        assert!((slope(&pts).unwrap() - 1.5).abs() < 1e-12);
        assert!(slope(&pts[..1]).is_none());
    }

    #[test]
    fn bench_matrix_has_planted_spectrum() {
        let x = bench_matrix(30, 40, 3, 1).unwrap();
        let s = svd_exact(&x).unwrap().s;
        for (k, want) in [3.0, 2.0, 1.0].iter().enumerate() {
            assert!((s[k] - want).abs() < 0.6 * want, "{} vs {want}", s[k]);
        }
        assert!(s[3] < 0.1);
    }
}
