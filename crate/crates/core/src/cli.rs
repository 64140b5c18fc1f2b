//! The `c3bf` command line tool.
//!
//! Exit codes: 0 for a completed run without collision, 2 when a collision
//! was detected, 1 for bad arguments, bad config, IO failures or a run that
//! aborted on a numerical failure.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::{load_config, to_toml};
use crate::safety_filter::FilterMode;
use crate::sim::{
    builtin_scenario, builtin_scenarios, run_scenario, write_trace_csv, Integrator, RunMetrics,
    RunOutput, SimConfig, BUILTIN_NAMES,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_COLLISION: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "c3bf", version, about = "Collision-cone safety filter simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write its trace and metrics.
    Run(RunArgs),
    /// Run one scenario under every filter mode and tabulate the results.
    Compare(RunArgs),
    /// List the builtin scenarios.
    ListScenarios,
    /// Write a scenario as a TOML config file.
    ExportConfig(ExportArgs),
}

#[derive(Debug, Args)]
#[group(id = "source", required = true, multiple = false, args = ["scenario", "config"])]
struct Source {
    /// Builtin scenario name.
    #[arg(long)]
    scenario: Option<String>,
    /// Path to a TOML scenario file.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Overrides {
    /// Override the safety filter mode.
    #[arg(long, value_enum)]
    filter: Option<ModeArg>,
    /// Override the simulated duration (s).
    #[arg(long)]
    duration: Option<f64>,
    /// Override the control period (s).
    #[arg(long)]
    dt: Option<f64>,
    /// Override the integrator.
    #[arg(long, value_enum)]
    integrator: Option<IntegratorArg>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    overrides: Overrides,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Outputs to produce.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "trace,metrics,summary")]
    emit: Vec<Emit>,
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    overrides: Overrides,
    /// Directory for `<name>.toml`; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    Trace,
    Metrics,
    Summary,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    C3bf,
    Distance,
    None,
}

impl From<ModeArg> for FilterMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::C3bf => FilterMode::C3bf,
            ModeArg::Distance => FilterMode::Distance,
            ModeArg::None => FilterMode::None,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum IntegratorArg {
    SemiImplicitEuler,
    Rk4,
}

impl From<IntegratorArg> for Integrator {
    fn from(i: IntegratorArg) -> Self {
        match i {
            IntegratorArg::SemiImplicitEuler => Integrator::SemiImplicitEuler,
            IntegratorArg::Rk4 => Integrator::Rk4,
        }
    }
}

/// Parses `argv` (program name first) and runs the command. Errors are
/// reported on standard error.
pub fn parse_and_run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Run(args) => run(&args),
        Command::Compare(args) => compare(&args),
        Command::ListScenarios => list_scenarios(),
        Command::ExportConfig(args) => export_config(&args),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        EXIT_ERROR
    })
}

fn resolve(source: &Source, overrides: &Overrides) -> anyhow::Result<SimConfig> {
    let mut cfg = match (&source.scenario, &source.config) {
        (Some(name), _) => builtin_scenario(name).ok_or_else(|| {
            anyhow!(
                "unknown scenario '{name}'; valid builtins are: {}",
                BUILTIN_NAMES.join(", ")
            )
        })?,
        (None, Some(path)) => load_config(path)?,
        (None, None) => bail!("one of --scenario or --config is required"),
    };
    if let Some(mode) = overrides.filter {
        cfg.safety.mode = mode.into();
    }
    if let Some(duration) = overrides.duration {
        cfg.duration = duration;
    }
    if let Some(dt) = overrides.dt {
        cfg.dt = dt;
    }
    if let Some(integrator) = overrides.integrator {
        cfg.integrator = integrator.into();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn write_trace(path: &Path, out: &RunOutput) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    let mut w = BufWriter::new(file);
    write_trace_csv(&mut w, &out.trace)?;
    w.flush()
        .with_context(|| format!("cannot write {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Contents of `<name>.metrics.json`: the run metrics plus run context.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub mode: String,
    pub dt: f64,
    pub duration: f64,
    pub steps: usize,
    /// Abort reason if the run stopped early.
    pub aborted: Option<String>,
    #[serde(flatten)]
    pub metrics: RunMetrics,
}

impl RunReport {
    fn new(cfg: &SimConfig, out: &RunOutput) -> Self {
        Self {
            scenario: cfg.name.clone(),
            mode: cfg.safety.mode.as_str().into(),
            dt: cfg.dt,
            duration: cfg.duration,
            steps: out.trace.len(),
            aborted: out.abort.as_ref().map(ToString::to_string),
            metrics: out.metrics.clone(),
        }
    }
}

/// Contents of `<name>.compare.json`.
#[derive(Debug, Serialize)]
pub struct CompareReport {
    pub scenario: String,
    pub dt: f64,
    pub duration: f64,
    pub runs: Vec<RunReport>,
}

fn exit_code(out: &RunOutput) -> i32 {
    if out.metrics.collision {
        EXIT_COLLISION
    } else if out.abort.is_some() {
        EXIT_ERROR
    } else {
        EXIT_OK
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("-".into(), |v| format!("{v:.4}"))
}

fn run(args: &RunArgs) -> anyhow::Result<i32> {
    let cfg = resolve(&args.source, &args.overrides)?;
    let out = run_scenario(&cfg)?;
    let emits = |e| args.emit.contains(&e);
    if emits(Emit::Trace) || emits(Emit::Metrics) {
        create_dir(&args.out)?;
    }
    if emits(Emit::Trace) {
        write_trace(&args.out.join(format!("{}.trace.csv", cfg.name)), &out)?;
    }
    if emits(Emit::Metrics) {
        write_json(
            &args.out.join(format!("{}.metrics.json", cfg.name)),
            &RunReport::new(&cfg, &out),
        )?;
    }
    if emits(Emit::Summary) {
        let m = &out.metrics;
        println!("scenario          {}", cfg.name);
        println!("mode              {}", cfg.safety.mode);
        println!("steps             {}", out.trace.len());
        println!("min separation    {}", fmt_opt(m.min_separation));
        println!("min h             {}", fmt_opt(m.min_h));
        println!("tracking rmse     {}", fmt_opt(m.tracking_rmse));
        println!("effort deviation  {:.4}", m.effort_deviation);
        println!("active fraction   {:.4}", m.active_fraction);
        println!("collision         {}", m.collision);
    }
    if let Some(abort) = &out.abort {
        eprintln!("error: {}: {abort}", cfg.name);
    }
    Ok(exit_code(&out))
}

fn compare(args: &RunArgs) -> anyhow::Result<i32> {
    let base = resolve(&args.source, &args.overrides)?;
    let configs: Vec<SimConfig> = FilterMode::ALL
        .iter()
        .map(|&mode| {
            let mut cfg = base.clone();
            cfg.safety.mode = mode;
            cfg
        })
        .collect();
    let outputs = std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|cfg| s.spawn(move || run_scenario(cfg)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect::<crate::Result<Vec<_>>>()
    })?;

    let emits = |e| args.emit.contains(&e);
    if emits(Emit::Trace) || emits(Emit::Metrics) {
        create_dir(&args.out)?;
    }
    if emits(Emit::Trace) {
        for (cfg, out) in configs.iter().zip(&outputs) {
            let name = format!("{}.{}.trace.csv", cfg.name, cfg.safety.mode);
            write_trace(&args.out.join(name), out)?;
        }
    }
    let report = CompareReport {
        scenario: base.name.clone(),
        dt: base.dt,
        duration: base.duration,
        runs: configs
            .iter()
            .zip(&outputs)
            .map(|(cfg, out)| RunReport::new(cfg, out))
            .collect(),
    };
    if emits(Emit::Metrics) {
        write_json(&args.out.join(format!("{}.compare.json", base.name)), &report)?;
    }
    if emits(Emit::Summary) {
        println!("scenario: {}", base.name);
        println!(
            "{:<10} {:>14} {:>16} {:>15} {:>9}",
            "mode", "min_separation", "effort_deviation", "active_fraction", "collision"
        );
        for r in &report.runs {
            let m = &r.metrics;
            println!(
                "{:<10} {:>14} {:>16.4} {:>15.4} {:>9}",
                r.mode,
                fmt_opt(m.min_separation),
                m.effort_deviation,
                m.active_fraction,
                m.collision
            );
        }
    }
    for (cfg, out) in configs.iter().zip(&outputs) {
        if let Some(abort) = &out.abort {
            eprintln!("warning: {} [{}]: {abort}", cfg.name, cfg.safety.mode);
        }
    }
    // Only the collision-cone run decides the exit status; the unfiltered
    // run is expected to collide.
    Ok(exit_code(&outputs[0]))
}

fn list_scenarios() -> anyhow::Result<i32> {
    for cfg in builtin_scenarios() {
        println!(
            "{:<10} {} obstacle(s), {} s, perception range {} m",
            cfg.name,
            cfg.obstacles.len(),
            cfg.duration,
            cfg.perception.range
        );
    }
    Ok(EXIT_OK)
}

fn export_config(args: &ExportArgs) -> anyhow::Result<i32> {
    let cfg = resolve(&args.source, &args.overrides)?;
    let text = to_toml(&cfg)?;
    match &args.out {
        Some(dir) => {
            create_dir(dir)?;
            let path = dir.join(format!("{}.toml", cfg.name));
            fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        }
        None => print!("{text}"),
    }
    Ok(EXIT_OK)
}
