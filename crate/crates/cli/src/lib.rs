// SPDX-License-Identifier: Apache-2.0

//! Subcommands of the `ro-ising` binary.
//!
//! Every command is a function of its flags and seed. Output files carry no
//! timestamps; the only wall-clock figures are the `wall_time_ms` fields of
//! per-run records.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use ro_ising::analysis::{
    best_known_optimum, emd_1d, normalize_and_bin, Optimum, OptimumSource, SolutionSample, DEFAULT_BIN_WIDTH,
};
use ro_ising::batch::{run_batch, run_one, to_samples, RunSettings, Solver};
use ro_ising::ising::{hamiltonian, random_problem, CouplingMatrix, SpinState};
use ro_ising::netlist::build_a2a;
use ro_ising::sim::{simulate, SimConfig, SimResult, Termination};
use ro_ising::timing::{characterize_surrogate, load_timing, save_timing, SurrogateParams, TimingFile};

pub const WORKERS_ENV: &str = "DROID_WORKERS";

/// Exit code of a run that hit the time limit.
pub const EXIT_TIMEOUT: i32 = 2;
/// Exit code for bad flags.
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "ro-ising", version, about = "Event-driven simulation of ring-oscillator Ising machines")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write surrogate timing tables.
    Characterize(CharacterizeArgs),
    /// Write a random problem.
    Generate(GenerateArgs),
    /// Run one simulation; exits 0 when synchronized, 2 on timeout.
    Simulate(RunArgs),
    /// Run many seeds and bin the results.
    Batch(RunArgs),
    /// Distance between two batch outputs on the same problem.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct CharacterizeArgs {
    /// Timing file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Largest per-cell coupling level; 0 writes only the uncoupled tables.
    #[arg(long, default_value_t = ro_ising::ising::DEFAULT_C_MAX)]
    pub c_max: i32,
    #[arg(long, default_value_t = 75.0)]
    pub window_ps: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// Problem file; when absent a random problem is drawn from --n/--density/--jmax/--seed.
    #[arg(long)]
    pub problem: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub density: f64,
    #[arg(long, default_value_t = 7)]
    pub jmax: i32,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0.5)]
    pub density: f64,
    #[arg(long, default_value_t = 7)]
    pub jmax: i32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Problem file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub timing: PathBuf,
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 100_000.0)]
    pub max_time_ps: f64,
    #[arg(long, default_value_t = 0.1)]
    pub tolerance_ps: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "event")]
    pub solver: Solver,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads for batches; DROID_WORKERS overrides it.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// First batch output directory.
    pub a: PathBuf,
    /// Second batch output directory.
    pub b: PathBuf,
    /// EMD report to write; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Single-run record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinsReport {
    pub spins: SpinState,
    pub energy: i64,
    pub reason: String,
    pub events_processed: u64,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedSample {
    pub index: usize,
    pub seed: u64,
    pub error: String,
}

/// Deterministic batch summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub problem_hash: String,
    pub n: usize,
    pub solver: Solver,
    pub master_seed: u64,
    pub samples: usize,
    pub succeeded: usize,
    pub synchronized: usize,
    pub optimum: Option<Optimum>,
    pub best_energy: Option<i64>,
    pub hits_at_optimum: usize,
    pub bin_width: f64,
    pub failed: Vec<FailedSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmdReport {
    pub emd: f64,
    pub n_a: u64,
    pub n_b: u64,
    pub bin_width: f64,
}

/// Parses arguments and runs the command, returning the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

pub fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Characterize(a) => cmd_characterize(&a).map(|_| 0),
        Command::Generate(a) => cmd_generate(&a).map(|_| 0),
        Command::Simulate(a) => {
            let r = cmd_simulate(&a)?;
            Ok(if r.reason == Termination::Synchronized.as_str() { 0 } else { EXIT_TIMEOUT })
        }
        Command::Batch(a) => cmd_batch(&a).map(|_| 0),
        Command::Compare(a) => {
            let r = cmd_compare(&a.a, &a.b)?;
            let text = serde_json::to_string_pretty(&r)? + "\n";
            match &a.out {
                Some(p) => write(p, &text)?,
                None => print!("{text}"),
            }
            Ok(0)
        }
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn cmd_characterize(a: &CharacterizeArgs) -> Result<TimingFile> {
    let p = SurrogateParams { window_w: a.window_ps, ..SurrogateParams::default() };
    let tf = characterize_surrogate(&p, a.c_max)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    save_timing(&tf, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(tf)
}

pub fn cmd_generate(a: &GenerateArgs) -> Result<CouplingMatrix> {
    let m = random_problem(a.n, a.density, a.jmax, a.seed)?;
    write(&a.out, &m.to_problem_text())?;
    Ok(m)
}

fn load_problem(p: &ProblemArgs, seed: u64) -> Result<CouplingMatrix> {
    match (&p.problem, p.n) {
        (Some(path), _) => CouplingMatrix::load(path).with_context(|| format!("reading problem {}", path.display())),
        (None, Some(n)) => Ok(random_problem(n, p.density, p.jmax, seed)?),
        (None, None) => bail!("give --problem or --n"),
    }
}

fn load_inputs(a: &RunArgs) -> Result<(TimingFile, CouplingMatrix)> {
    let tf = load_timing(&a.timing).with_context(|| format!("reading timing file {}", a.timing.display()))?;
    let m = load_problem(&a.problem, a.seed)?;
    Ok((tf, m))
}

fn settings(a: &RunArgs, m: &CouplingMatrix) -> RunSettings {
    let mut s = RunSettings::new(a.solver, m.n() + usize::from(m.has_field()));
    s.max_time = a.max_time_ps;
    s.tolerance = a.tolerance_ps;
    s
}

/// `ro_id,cycle,arrival_ps,period_ps` for every reference edge after the first.
pub fn periods_csv(r: &SimResult) -> String {
    let mut s = String::from("ro_id,cycle,arrival_ps,period_ps\n");
    for (ro, edges) in r.ref_edges.iter().enumerate() {
        for k in 1..edges.len() {
            s.push_str(&format!("{ro},{k},{:.6},{:.6}\n", edges[k], edges[k] - edges[k - 1]));
        }
    }
    s
}

/// Writes `spins.json` and, for the event solver, `periods.csv` under `--out`.
pub fn cmd_simulate(a: &RunArgs) -> Result<SpinsReport> {
    let (tf, m) = load_inputs(a)?;
    let s = settings(a, &m);
    let report = if a.solver == Solver::Event {
        let start = Instant::now();
        let nl = build_a2a(s.dim, &m, &tf)?;
        let cfg = SimConfig { max_time: s.max_time, tolerance: s.tolerance, seed: a.seed, ..Default::default() };
        let r = simulate(&nl, &tf, &cfg)?;
        write(&a.out.join("periods.csv"), &periods_csv(&r))?;
        SpinsReport {
            energy: hamiltonian(&m, &r.spins)?,
            spins: r.spins,
            reason: r.reason.as_str().to_string(),
            events_processed: r.events_processed,
            wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        }
    } else {
        let o = run_one(&m, &tf, &s, a.seed)?;
        SpinsReport {
            spins: o.spins,
            energy: o.energy,
            reason: o.reason.as_str().to_string(),
            events_processed: o.events_processed,
            wall_time_ms: o.wall_time_ms,
        }
    };
    write(&a.out.join("spins.json"), &(serde_json::to_string_pretty(&report)? + "\n"))?;
    Ok(report)
}

/// `--workers`, overridden by `DROID_WORKERS`, else the machine's parallelism.
pub fn worker_count(flag: Option<usize>) -> Result<usize> {
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v.trim().parse().with_context(|| format!("{WORKERS_ENV}={v:?} is not a count"))?;
        ensure!(n >= 1, "{WORKERS_ENV} must be at least 1");
        return Ok(n);
    }
    match flag {
        Some(0) => bail!("--workers must be at least 1"),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Writes `problem.txt`, `samples.json`, `histogram.csv` and `summary.json`
/// under `--out`. Failed samples are listed in the summary.
pub fn cmd_batch(a: &RunArgs) -> Result<BatchSummary> {
    ensure!(a.samples >= 1, "--samples must be at least 1");
    let (tf, m) = load_inputs(a)?;
    let s = settings(a, &m);
    let workers = worker_count(a.workers)?;
    let out = run_batch(&m, &tf, &s, a.samples, a.seed, workers)?;

    let energies: Vec<i64> = out.iter().filter_map(|(_, r)| r.as_ref().ok().map(|o| o.energy)).collect();
    let optimum = best_known_optimum(&m, &energies);
    let samples = to_samples(&out, optimum.map_or(0, |o| o.energy));
    let failed: Vec<FailedSample> = out
        .iter()
        .enumerate()
        .filter_map(|(index, (seed, r))| r.as_ref().err().map(|e| FailedSample { index, seed: *seed, error: e.clone() }))
        .collect();
    let histogram = match optimum {
        Some(o) if o.energy != 0 && !energies.is_empty() => Some(normalize_and_bin(&energies, o.energy)?),
        _ => None,
    };

    let summary = BatchSummary {
        problem_hash: m.problem_hash(),
        n: m.n(),
        solver: a.solver,
        master_seed: a.seed,
        samples: a.samples,
        succeeded: samples.len(),
        synchronized: samples.iter().filter(|x| x.reason == Termination::Synchronized.as_str()).count(),
        optimum,
        best_energy: energies.iter().min().copied(),
        hits_at_optimum: optimum.map_or(0, |o| energies.iter().filter(|&&e| e == o.energy).count()),
        bin_width: DEFAULT_BIN_WIDTH,
        failed,
    };
    write(&a.out.join("problem.txt"), &m.to_problem_text())?;
    write(&a.out.join("samples.json"), &(serde_json::to_string_pretty(&samples)? + "\n"))?;
    write(&a.out.join("histogram.csv"), &histogram.map(|h| h.to_csv()).unwrap_or_else(|| "bin_left,bin_right,count\n".into()))?;
    write(&a.out.join("summary.json"), &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    Ok(summary)
}

fn read_batch(dir: &Path) -> Result<(BatchSummary, Vec<SolutionSample>)> {
    let read = |name: &str| {
        let p = dir.join(name);
        fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))
    };
    let summary: BatchSummary = serde_json::from_str(&read("summary.json")?).context("parsing summary.json")?;
    let samples: Vec<SolutionSample> = serde_json::from_str(&read("samples.json")?).context("parsing samples.json")?;
    Ok((summary, samples))
}

/// EMD between two batch directories. Both sets are normalized by the same
/// optimum: the exact one when known, else the best energy in either set.
pub fn cmd_compare(a: &Path, b: &Path) -> Result<EmdReport> {
    let (sa, xa) = read_batch(a)?;
    let (sb, xb) = read_batch(b)?;
    ensure!(sa.problem_hash == sb.problem_hash, "batches solve different problems ({} vs {})", sa.problem_hash, sb.problem_hash);
    let ea: Vec<i64> = xa.iter().map(|x| x.energy).collect();
    let eb: Vec<i64> = xb.iter().map(|x| x.energy).collect();
    let exact = [sa.optimum, sb.optimum].into_iter().flatten().find(|o| o.source == OptimumSource::Oracle);
    let optimum = match exact {
        Some(o) => o.energy,
        None => ea.iter().chain(&eb).min().copied().context("both batches are empty")?,
    };
    let ha = normalize_and_bin(&ea, optimum)?;
    let hb = normalize_and_bin(&eb, optimum)?;
    Ok(EmdReport { emd: emd_1d(&ha, &hb)?, n_a: ha.total, n_b: hb.total, bin_width: DEFAULT_BIN_WIDTH })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_run_flags() {
        let cli = Cli::try_parse_from([
            "ro-ising",
            "batch",
            "--timing",
            "t.toml",
            "--n",
            "8",
            "--samples",
            "5",
            "--solver",
            "dtphase",
            "--tolerance-ps",
            "0.5",
            "--out",
            "o",
        ])
        .unwrap();
        let Command::Batch(a) = cli.command else { panic!("wrong subcommand") };
        assert_eq!(
            (a.problem.n, a.samples, a.solver, a.tolerance_ps, a.max_time_ps),
            (Some(8), 5, Solver::Dtphase, 0.5, 100_000.0)
        );
        assert!(Cli::try_parse_from(["ro-ising", "batch", "--timing", "t", "--solver", "spice", "--out", "o"]).is_err());
    }

    #[test]
    fn period_rows() {
        let tf = characterize_surrogate(&SurrogateParams::default(), 1).unwrap();
        let nl = ro_ising::netlist::build_rings(2, 3, &[], &tf).unwrap();
        let cfg = SimConfig { max_time: 1000.0, stagger: Some(vec![0.0, 10.0]), sync_window: 100, ..Default::default() };
        let csv = periods_csv(&simulate(&nl, &tf, &cfg).unwrap());
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows[0], "ro_id,cycle,arrival_ps,period_ps");
        assert!(rows.iter().any(|r| r.starts_with("1,1,") && r.ends_with(",300.000000")), "{csv}");
    }
}
