use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use lcv_core::harness::{
    emit_outputs, load_scenario, load_scenario_with, plot_trace, run_scenario, HarnessError, RunResult, Scenario, Trace,
};

/// Deterministic light-commercial-vehicle automation simulator.
#[derive(Debug, Parser)]
#[command(name = "lcvsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and write trace, metrics and plots.
    Run(RunArgs),
    /// Parse and validate a scenario without running it.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
    /// Redraw the figures from a trace CSV.
    Plot {
        /// Trace CSV written by `run`.
        csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Scenario the trace came from; draws the lane-change corridor.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Run a scenario over a parameter grid, one output directory per point.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Grid axis `section.key=v1,v2,...`; repeat for more axes.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUES", required = true)]
    axes: Vec<String>,
    /// Scenarios run concurrently (default: available cores).
    #[arg(long)]
    jobs: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// `Ok(passed)` or an error.
fn dispatch(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Run(args) => {
            let scenario = load(&args.scenario, args.seed, &[])?;
            let result = run_one(&scenario, &args.out)?;
            if !args.quiet {
                report(&result, &args.out);
            }
            Ok(result.passed)
        }
        Command::Validate { scenario, quiet } => {
            let s = load_scenario(&scenario)?;
            if !quiet {
                println!("{}: ok ({}, {} s, seed {})", scenario.display(), s.kind.as_str(), s.duration, s.seed);
            }
            Ok(true)
        }
        Command::Plot { csv, out, scenario, quiet } => {
            let text = std::fs::read_to_string(&csv).with_context(|| format!("reading {}", csv.display()))?;
            let trace = Trace::from_csv(&text).with_context(|| csv.display().to_string())?;
            let corridor = match scenario {
                Some(p) => load_scenario(&p)?.corridor,
                None => None,
            };
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            for (fig, svg) in plot_trace(&trace, corridor.as_ref())? {
                let path = out.join(fig.file_name());
                std::fs::write(&path, svg).with_context(|| format!("writing {}", path.display()))?;
                if !quiet {
                    println!("{}", path.display());
                }
            }
            Ok(true)
        }
        Command::Sweep(args) => sweep(args),
    }
}

fn load(path: &Path, seed: Option<u64>, overrides: &[(String, String, String)]) -> Result<Scenario> {
    let s = load_scenario_with(path, overrides)?;
    Ok(match seed {
        Some(seed) => s.with_seed(seed),
        None => s,
    })
}

fn run_one(scenario: &Scenario, out: &Path) -> Result<RunResult> {
    match run_scenario(scenario) {
        Ok(run) => {
            emit_outputs(out, &run.trace, &run.result, &scenario.output, scenario.corridor.as_ref())?;
            Ok(run.result)
        }
        Err(HarnessError::Divergence { time, source, trace }) => {
            std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
            let path = out.join("trace_partial.csv");
            std::fs::write(&path, trace.to_csv()).with_context(|| format!("writing {}", path.display()))?;
            bail!("run aborted at t = {time} s: {source}; trace prefix in {}", path.display())
        }
        Err(e) => Err(e.into()),
    }
}

fn report(result: &RunResult, out: &Path) {
    let verdict = if result.passed { "PASS" } else { "FAIL" };
    println!("{verdict} {} ({}, seed {}) -> {}", result.scenario, result.kind, result.seed, out.display());
    println!("{}", serde_json::to_string_pretty(&result.metrics).expect("metrics serialize"));
}

fn parse_axis(spec: &str) -> Result<(String, String, Vec<String>)> {
    let (target, values) = spec.split_once('=').ok_or_else(|| anyhow!("`{spec}`: expected section.key=v1,v2"))?;
    let (section, key) = target.split_once('.').ok_or_else(|| anyhow!("`{target}`: expected section.key"))?;
    let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
    if values.is_empty() {
        bail!("`{spec}`: no values");
    }
    Ok((section.trim().to_string(), key.trim().to_string(), values))
}

fn grid(axes: &[(String, String, Vec<String>)]) -> Vec<Vec<(String, String, String)>> {
    let mut points = vec![Vec::new()];
    for (section, key, values) in axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push((section.clone(), key.clone(), v.clone()));
                    q
                })
            })
            .collect();
    }
    points
}

fn point_dir(index: usize, point: &[(String, String, String)]) -> String {
    let label: Vec<String> = point.iter().map(|(s, k, v)| format!("{s}.{k}={v}")).collect();
    let raw = format!("p{index:03}_{}", label.join("_"));
    raw.chars().map(|c| if c.is_ascii_alphanumeric() || "._=-".contains(c) { c } else { '_' }).collect()
}

fn sweep(args: SweepArgs) -> Result<bool> {
    let axes = args.axes.iter().map(|a| parse_axis(a)).collect::<Result<Vec<_>>>()?;
    let points = grid(&axes);
    let scenarios = points.iter().map(|p| load(&args.run.scenario, args.run.seed, p)).collect::<Result<Vec<_>>>()?;
    let jobs = args.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())).max(1);
    let dirs: Vec<PathBuf> = points.iter().enumerate().map(|(i, p)| args.run.out.join(point_dir(i, p))).collect();

    let mut results: Vec<Option<Result<RunResult>>> = (0..scenarios.len()).map(|_| None).collect();
    for (chunk_idx, chunk) in scenarios.chunks(jobs).enumerate() {
        let base = chunk_idx * jobs;
        let outcomes: Vec<Result<RunResult>> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    let dir = &dirs[base + k];
                    scope.spawn(move || run_one(s, dir))
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap_or_else(|_| Err(anyhow!("scenario thread panicked")))).collect()
        });
        for (k, o) in outcomes.into_iter().enumerate() {
            results[base + k] = Some(o);
        }
    }

    let mut summary = String::from("point,directory,passed\n");
    let mut all_passed = true;
    let mut first_error = None;
    for (i, r) in results.into_iter().enumerate() {
        let dir = dirs[i].file_name().map_or_else(String::new, |d| d.to_string_lossy().into_owned());
        match r.expect("every point ran") {
            Ok(res) => {
                all_passed &= res.passed;
                summary.push_str(&format!("{i},{dir},{}\n", res.passed));
                if !args.run.quiet {
                    println!("{} {dir}", if res.passed { "PASS" } else { "FAIL" });
                }
            }
            Err(e) => {
                summary.push_str(&format!("{i},{dir},error\n"));
                eprintln!("error in {dir}: {e:#}");
                first_error.get_or_insert(e);
            }
        }
    }
    std::fs::create_dir_all(&args.run.out)?;
    let path = args.run.out.join("sweep.csv");
    std::fs::write(&path, summary).with_context(|| format!("writing {}", path.display()))?;
    match first_error {
        Some(e) => Err(e),
        None => Ok(all_passed),
    }
}
