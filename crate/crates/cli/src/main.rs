//! `reprocs`: generate synthetic streams, run ReProCS and PCP on them, and
//! check the supporting inequalities numerically.

mod config;
mod dataset;
mod failure;
mod runner;
mod svg;
mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use reprocs_core::experiment::{generate_trial, trial_seed};
use reprocs_core::ExperimentConfig;
use serde_json::{json, Map, Value};

use config::{Emit, DEFAULT_EMIT};
use dataset::Format;
use failure::{CliResult, Code, Failure};
use runner::{Algo, Source};

#[derive(Parser)]
#[command(name = "reprocs", version, about = "Online sparse + low-rank separation experiments")]
struct Cli {
    /// Worker threads for parallel trials (defaults to all cores).
    #[arg(long, global = true, env = "REPROCS_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic measurements, ground truth and a manifest.
    Gen {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long, value_enum, default_value_t = Format::Rpca)]
        format: Format,
    },
    /// Run one algorithm and write metrics, summaries and plots.
    Run {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[command(flatten)]
        out: OutputArgs,
        #[arg(long, value_enum, default_value_t = Algo::Reprocs)]
        algo: Algo,
    },
    /// Run both algorithms on the same trials, or combine earlier runs.
    Compare {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[command(flatten)]
        out: OutputArgs,
        /// Restrict to one method.
        #[arg(long, value_enum)]
        algo: Option<Algo>,
        /// Combine `<algo>_mean.csv` files from earlier runs instead of running.
        #[arg(long, num_args = 1.., conflicts_with_all = ["config", "preset", "data", "seed", "trials"])]
        from: Vec<PathBuf>,
    },
    /// Check the structural identities and bounds on random instances.
    Verify {
        #[arg(long, value_enum, default_value_t = verify::Suite::All)]
        suite: verify::Suite,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Instances per suite (suite default when omitted).
        #[arg(long)]
        instances: Option<usize>,
        /// Directory for `verify.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON configuration file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in scenario (default fig1).
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory (default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OutputArgs {
    /// Dataset written by `gen`; replaces generation.
    #[arg(long, conflicts_with_all = ["config", "preset", "seed"])]
    data: Option<PathBuf>,
    /// Comma-separated outputs: csv, svg, json, xhat.
    #[arg(long, value_enum, value_delimiter = ',')]
    emit: Option<Vec<Emit>>,
    /// Frames shown in the support raster, starting at the first change.
    #[arg(long, default_value_t = 200)]
    raster_frames: usize,
}

/// Settings after merging flags, file settings and defaults.
struct Plan {
    cfg: ExperimentConfig,
    scenario: Option<String>,
    seed: u64,
    trials: usize,
    out: PathBuf,
    emit: Vec<Emit>,
    data: Option<PathBuf>,
}

impl ExperimentArgs {
    fn plan(&self, output: Option<&OutputArgs>) -> CliResult<Plan> {
        if self.trials == Some(0) {
            return Err(Failure::config("--trials must be at least 1"));
        }
        let data = output.and_then(|o| o.data.clone());
        let (cfg, scenario, settings, default_trials) = match (&data, &self.config) {
            (Some(root), _) => {
                if !root.join("config.json").is_file() {
                    return Err(Failure::io(std::io::Error::new(
                        std::io::ErrorKind::NotFound,
                        format!("{} is not a dataset (no config.json)", root.display()),
                    )));
                }
                let cfg = dataset::load_config(root)?;
                let available = dataset::count_trials(root);
                if available == 0 {
                    return Err(Failure::config(format!("{} holds no trials", root.display())));
                }
                if let Some(t) = self.trials.filter(|&t| t > available) {
                    return Err(Failure::config(format!(
                        "--trials {t} exceeds the {available} trial(s) in {}",
                        root.display()
                    )));
                }
                (cfg, None, config::FileSettings::default(), available)
            }
            (None, Some(path)) => {
                let loaded = config::load(path)?;
                (loaded.experiment, loaded.scenario, loaded.settings, 1)
            }
            (None, None) => {
                let name = self.preset.as_deref().unwrap_or("fig1");
                (config::preset(name)?, Some(name.to_string()), config::FileSettings::default(), 1)
            }
        };
        let emit = output
            .and_then(|o| o.emit.clone())
            .or(settings.emit)
            .unwrap_or_else(|| DEFAULT_EMIT.to_vec());
        Ok(Plan {
            cfg,
            scenario,
            seed: self.seed.or(settings.seed).unwrap_or(1),
            trials: self.trials.or(settings.trials).unwrap_or(default_trials),
            out: self.out.clone().or(settings.out).unwrap_or_else(|| "out".into()),
            emit,
            data,
        })
    }
}

impl Plan {
    fn source(&self) -> Source<'_> {
        match &self.data {
            Some(root) => Source::Dataset { cfg: &self.cfg, root },
            None => Source::Generate {
                cfg: &self.cfg,
                seed: self.seed,
            },
        }
    }

    fn manifest(&self, command: &str, files: &[PathBuf]) -> Value {
        let trial_seeds: Option<Vec<u64>> = self
            .data
            .is_none()
            .then(|| (0..self.trials).map(|i| trial_seed(self.seed, i)).collect());
        json!({
            "schema_version": config::SCHEMA_VERSION,
            "tool": "reprocs",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "argv": std::env::args().collect::<Vec<_>>(),
            "scenario": self.scenario,
            "dataset": self.data.as_ref().map(|p| p.display().to_string()),
            "seed": self.data.is_none().then_some(self.seed),
            "trials": self.trials,
            "trial_seeds": trial_seeds,
            "config": config::to_file_value(&self.cfg),
            "files": relative(&self.out, files),
        })
    }
}

fn relative(root: &Path, files: &[PathBuf]) -> Vec<String> {
    files
        .iter()
        .map(|p| p.strip_prefix(root).unwrap_or(p).display().to_string())
        .collect()
}

fn cmd_gen(exp: &ExperimentArgs, format: Format) -> CliResult<()> {
    let start = Instant::now();
    let plan = exp.plan(None)?;
    runner::create_dir(&plan.out)?;
    let mut files = Vec::new();
    for i in 0..plan.trials {
        let data = generate_trial(&plan.cfg, trial_seed(plan.seed, i))?;
        files.extend(dataset::write_trial(&plan.out, i, &data, format)?);
    }
    let cfg_path = plan.out.join("config.json");
    runner::write_json(&cfg_path, &config::to_file_value(&plan.cfg))?;
    files.push(cfg_path);
    let m = plan.manifest("gen", &files);
    runner::write_json(&plan.out.join("manifest.json"), &m)?;
    eprintln!(
        "wrote {} trial(s) to {} in {:.1}s",
        plan.trials,
        plan.out.display(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

fn cmd_run(command: &str, exp: &ExperimentArgs, output: &OutputArgs, algos: &[Algo]) -> CliResult<()> {
    let start = Instant::now();
    let plan = exp.plan(Some(output))?;
    if plan.cfg.model.t_max == 0 {
        eprintln!("note: t_max is 0, metrics files will hold only a header");
    }
    runner::create_dir(&plan.out)?;
    let keep_x_hat = plan.emit.contains(&Emit::Xhat);
    let results = runner::run_trials(&plan.source(), plan.trials, algos, keep_x_hat)?;
    let mut files = Vec::new();
    let mut summary = Map::new();
    for &algo in algos {
        files.extend(runner::write_algo_outputs(
            &plan.out,
            &plan.cfg,
            algo,
            &results,
            &plan.emit,
            output.raster_frames,
        )?);
        let s = runner::summarize(&plan.cfg, algo, &results);
        eprintln!(
            "{}: mean rel. error {:.3e}, exact support at {:.2}% of frames",
            algo.name(),
            s["mean_rel_x_err"].as_f64().unwrap_or(f64::NAN),
            100.0 * s["support_exact_fraction"].as_f64().unwrap_or(f64::NAN)
        );
        summary.insert(algo.name().into(), s);
    }
    if command == "compare" {
        let series = algos
            .iter()
            .filter_map(|&a| runner::curve_points(&results, a).map(|p| (a, p)))
            .collect();
        files.extend(write_comparison(&plan.out, &plan.emit, series, &mut summary)?);
    }
    if plan.emit.contains(&Emit::Json) {
        let path = plan.out.join("aggregate.json");
        runner::write_json(&path, &Value::Object(summary))?;
        files.push(path);
    }
    let m = plan.manifest(command, &files);
    runner::write_json(&plan.out.join("manifest.json"), &m)?;
    eprintln!("{command} finished in {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}

/// `compare.svg` and `compare.json` from per-method mean curves.
fn write_comparison(
    out: &Path,
    emit: &[Emit],
    series: Vec<(Algo, Vec<(f64, f64)>)>,
    summary: &mut Map<String, Value>,
) -> CliResult<Vec<PathBuf>> {
    let mut files = Vec::new();
    let mean_of = |algo: Algo| {
        series
            .iter()
            .find(|(a, _)| *a == algo)
            .map(|(_, p)| p.iter().map(|&(_, v)| v).sum::<f64>() / p.len() as f64)
    };
    if let (Some(r), Some(p)) = (mean_of(Algo::Reprocs), mean_of(Algo::Pcp)) {
        summary.insert("pcp_over_reprocs".into(), json!(p / r));
    }
    if emit.contains(&Emit::Svg) {
        let path = out.join("compare.svg");
        runner::write_file(&path, runner::comparison_chart(series))?;
        files.push(path);
    }
    Ok(files)
}

fn cmd_compare_from(dirs: &[PathBuf], output: &OutputArgs, only: Option<Algo>, out: Option<&Path>) -> CliResult<()> {
    let algos: Vec<Algo> = match only {
        Some(a) => vec![a],
        None => vec![Algo::Reprocs, Algo::Pcp],
    };
    let mut series = Vec::new();
    let mut summary = Map::new();
    let mut sources = Vec::new();
    for &algo in &algos {
        let name = algo.name();
        let found = dirs.iter().find(|d| d.join(format!("{name}_mean.csv")).is_file());
        let Some(dir) = found else {
            return Err(Failure::io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("no {name}_mean.csv in {}", join_paths(dirs)),
            ))
            .context("compare needs metrics for every method; pass --algo to plot one"));
        };
        series.push((algo, runner::read_mean_rel_err(&dir.join(format!("{name}_mean.csv")))?));
        let agg = dir.join(format!("{name}_aggregate.json"));
        if agg.is_file() {
            let text = std::fs::read_to_string(&agg).map_err(|e| Failure::io(e).context(format!("reading {}", agg.display())))?;
            let v: Value = serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", agg.display())))?;
            summary.insert(name.into(), v);
        }
        sources.push(json!({ "algo": name, "dir": dir.display().to_string() }));
    }
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| "out".into());
    runner::create_dir(&out)?;
    let emit = output.emit.clone().unwrap_or_else(|| DEFAULT_EMIT.to_vec());
    let mut files = write_comparison(&out, &emit, series, &mut summary)?;
    if emit.contains(&Emit::Json) {
        let path = out.join("compare.json");
        runner::write_json(&path, &Value::Object(summary))?;
        files.push(path);
    }
    let m = json!({
        "schema_version": config::SCHEMA_VERSION,
        "tool": "reprocs",
        "version": env!("CARGO_PKG_VERSION"),
        "command": "compare",
        "argv": std::env::args().collect::<Vec<_>>(),
        "sources": sources,
        "files": relative(&out, &files),
    });
    runner::write_json(&out.join("manifest.json"), &m)?;
    Ok(())
}

fn join_paths(dirs: &[PathBuf]) -> String {
    dirs.iter().map(|d| d.display().to_string()).collect::<Vec<_>>().join(", ")
}

fn cmd_verify(suite: verify::Suite, seed: u64, instances: Option<usize>, out: Option<&Path>) -> CliResult<()> {
    let mut reports = Vec::new();
    for s in suite.expand() {
        let rep = verify::run(s, seed, instances)?;
        println!(
            "{:<10} {} ({} instances, {} violations) {}",
            rep.suite.name(),
            if rep.passed() { "PASS" } else { "FAIL" },
            rep.instances,
            rep.violations,
            rep.detail
        );
        for f in &rep.failures {
            println!("  lhs {:.6e} > rhs {:.6e} at {}", f.lhs, f.rhs, f.config);
        }
        reports.push(rep);
    }
    let failed = reports.iter().filter(|r| !r.passed()).count();
    if let Some(dir) = out {
        runner::create_dir(dir)?;
        let report = json!({
            "schema_version": config::SCHEMA_VERSION,
            "seed": seed,
            "passed": failed == 0,
            "suites": reports,
        });
        runner::write_json(&dir.join("verify.json"), &report)?;
    }
    if failed > 0 {
        return Err(Failure::new(Code::Verify, anyhow::anyhow!("{failed} suite(s) reported violations")));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot size the thread pool: {e}");
            return ExitCode::from(Code::Config as u8);
        }
    }
    let result = match &cli.command {
        Command::Gen { exp, format } => cmd_gen(exp, *format),
        Command::Run { exp, out, algo } => cmd_run("run", exp, out, &[*algo]),
        Command::Compare { exp, out, algo, from } if !from.is_empty() => {
            cmd_compare_from(from, out, *algo, exp.out.as_deref())
        }
        Command::Compare { exp, out, algo, .. } => {
            let algos = match algo {
                Some(a) => vec![*a],
                None => vec![Algo::Reprocs, Algo::Pcp],
            };
            cmd_run("compare", exp, out, &algos)
        }
        Command::Verify {
            suite,
            seed,
            instances,
            out,
        } => cmd_verify(*suite, *seed, *instances, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code as u8)
        }
    }
}
