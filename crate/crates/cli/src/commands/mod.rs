//! Command implementations and the shared run loop.

mod assoc;
pub mod bench;
mod factor;
mod sim;

use std::ffi::OsString;
use std::path::PathBuf;

use arsvd_core::SelectionReport;
use serde_json::{json, Value};

use crate::args::{Cli, Command, SimCommand};
use crate::error::{CliError, CliResult};
use crate::manifest::{read_manifest, to_value, Recorder};

pub use bench::{run_bench, BenchRow, BenchSummary};

/// Compact view of an adaptive selection for manifests and reports.
pub fn selection_summary(r: &SelectionReport) -> Value {
    let bicv = r.bicv.as_ref();
    json!({
        "t_star": r.t_star,
        "d_star": r.d_star,
        "width": r.width,
        "clamped": r.clamped,
        "degenerate": r.degenerate,
        "degenerate_zero": r.degenerate_zero,
        "no_signal": bicv.map(|b| b.no_signal),
        "null_error": bicv.map(|b| b.null_error),
        "bicv_medians": bicv.map(|b| b.traces.iter()
            .map(|t| json!({"t": t.t, "median_error": t.median_error, "median_rank": t.median_rank}))
            .collect::<Vec<_>>()),
        "change_points": r.change_points.iter().enumerate()
            .map(|(i, c)| json!({"t": i + 1, "d_hat": c.d_hat, "min_p": c.min_p, "weak": c.weak}))
            .collect::<Vec<_>>(),
    })
}

fn configure_threads(threads: Option<usize>) -> usize {
    if let Some(n) = threads.filter(|&n| n > 0) {
        // A second configuration in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    rayon::current_num_threads()
}

fn describe(cmd: &Command) -> (&'static str, PathBuf, Value, Option<u64>) {
    match cmd {
        Command::Svd(a) => ("svd", a.out.clone(), to_value(a), Some(a.factor.seed)),
        Command::Pca(a) => ("pca", a.out.clone(), to_value(a), Some(a.factor.seed)),
        Command::Sir(a) => ("sir", a.out.clone(), to_value(a), Some(a.seed)),
        Command::Sim { kind: SimCommand::Lowrank(a) } => ("sim lowrank", a.out.clone(), to_value(a), Some(a.seed)),
        Command::Sim { kind: SimCommand::Admixture(a) } => ("sim admixture", a.out.clone(), to_value(a), Some(a.seed)),
        Command::Assoc(a) => ("assoc", a.out.clone(), to_value(a), Some(a.factor.seed)),
        Command::Bench(a) => ("bench", a.out.clone(), to_value(a), Some(a.seed)),
        Command::Replay(_) => unreachable!("replay is resolved before dispatch"),
    }
}

fn execute(cmd: Command, argv: Vec<String>, threads: usize) -> CliResult<PathBuf> {
    let (name, out, config, seed) = describe(&cmd);
    std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    let mut rec = Recorder::new(name, argv, out, threads);
    rec.manifest.config = config;
    rec.manifest.seed = seed;
    let result = match &cmd {
        Command::Svd(a) => factor::run_svd(a, &mut rec),
        Command::Pca(a) => factor::run_pca(a, &mut rec),
        Command::Sir(a) => factor::run_sir(a, &mut rec),
        Command::Sim { kind: SimCommand::Lowrank(a) } => sim::run_lowrank(a, &mut rec),
        Command::Sim { kind: SimCommand::Admixture(a) } => sim::run_admixture(a, &mut rec),
        Command::Assoc(a) => assoc::run_assoc_cmd(a, &mut rec),
        Command::Bench(a) => bench::run_bench_cmd(a, &mut rec),
        Command::Replay(_) => unreachable!("replay is resolved before dispatch"),
    };
    if let Err(e) = &result {
        rec.fail(e);
    }
    let written = rec.finish();
    result?;
    written
}

/// Drops any `--out` option from recorded arguments.
fn without_out(argv: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(argv.len());
    let mut skip = false;
    for a in argv {
        if skip {
            skip = false;
        } else if a == "--out" {
            skip = true;
        } else if !a.starts_with("--out=") {
            out.push(a.clone());
        }
    }
    out
}

/// Parses `argv` (program name first) and runs it. Returns the manifest path.
pub fn run_from<I, T>(argv: I) -> CliResult<PathBuf>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = <Cli as clap::Parser>::try_parse_from(&args).map_err(|e| CliError::Usage(e.render().to_string()))?;
    let recorded: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    run(cli, recorded)
}

/// Runs a parsed command line; `argv` is recorded in the manifest.
pub fn run(cli: Cli, argv: Vec<String>) -> CliResult<PathBuf> {
    match cli.command {
        Command::Replay(r) => {
            let m = read_manifest(&r.manifest)?;
            let mut args = vec!["arsvd".to_string()];
            match &r.out {
                Some(dir) => {
                    args.extend(without_out(&m.argv));
                    args.push("--out".into());
                    args.push(dir.display().to_string());
                }
                None => args.extend(m.argv.iter().cloned()),
            }
            let inner = <Cli as clap::Parser>::try_parse_from(&args)
                .map_err(|e| CliError::Data(format!("{}: recorded arguments no longer parse: {e}", r.manifest.display())))?;
            if matches!(inner.command, Command::Replay(_)) {
                return Err(CliError::Data(format!("{}: a replay manifest cannot be replayed", r.manifest.display())));
            }
            let threads = configure_threads(cli.threads.or(Some(m.threads)));
            execute(inner.command, args[1..].to_vec(), threads)
        }
        cmd => {
            let threads = configure_threads(cli.threads);
            execute(cmd, argv, threads)
        }
    }
}
