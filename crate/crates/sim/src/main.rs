use std::path::PathBuf;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use hfsp_sim::config::{parse_seeds, resolve_output, RunConfig};
use hfsp_sim::runner::{run_matrix, reaggregate};
use hfsp_sim::scenario;
use hfsp_sim::trace_io::write_trace;
use hfsp_core::hfsp::ReducePreemption;
use hfsp_core::workload::{generate_workload, preset_spec, scale_trace, WorkloadSpec};

/// Discrete-event simulator for MapReduce-style job scheduling, comparing
/// the size-based preemptive HFSP discipline with FIFO and FAIR.
#[derive(Parser)]
#[command(name = "hfsp-sim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a workload trace from a preset or a spec file.
    Generate(GenerateArgs),
    /// Run one scheduler over a trace or generated workload.
    Run(RunArgs),
    /// Run several schedulers over the same traces and seeds, side by side.
    Compare(RunArgs),
    /// Replay a built-in scenario.
    Scenario(ScenarioArgs),
    /// Rebuild summary.json from sojourn CSVs already in an output directory.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Built-in workload: fb2009, fb2009-maponly or fb2010.
    #[arg(long, conflicts_with = "spec")]
    preset: Option<String>,
    /// JSON file holding a workload spec.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Multiply task counts by this factor (down-scales a trace to a
    /// smaller cluster).
    #[arg(long)]
    scale: Option<f64>,
    /// Output trace path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration; flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Built-in workload preset used when no trace is given.
    #[arg(long)]
    preset: Option<String>,
    /// Comma-separated scheduler list: fifo, fair, hfsp.
    #[arg(long)]
    schedulers: Option<String>,
    /// Seed list `1,2,3` or inclusive range `1..10`.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    machines: Option<u32>,
    #[arg(long)]
    map_slots: Option<u32>,
    #[arg(long)]
    reduce_slots: Option<u32>,
    /// Reduce preemption policy for hfsp: eager, wait or kill.
    #[arg(long)]
    preemption: Option<String>,
    /// Estimation-error half width in [0, 1].
    #[arg(long)]
    alpha: Option<f64>,
    /// Emit events.ndjson per run.
    #[arg(long)]
    event_log: bool,
    /// Output directory (joined under $HFSP_OUTPUT_ROOT when relative).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScenarioArgs {
    /// fig1, fig2 or micro44.
    name: String,
    #[arg(long, default_value = "eager")]
    preemption: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Optional output directory for the full report files.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Output directory of a previous run or compare.
    #[arg(long)]
    dir: PathBuf,
}

fn parse_preemption(name: &str) -> anyhow::Result<ReducePreemption> {
    match name {
        "eager" => Ok(ReducePreemption::Eager),
        "wait" => Ok(ReducePreemption::Wait),
        "kill" => Ok(ReducePreemption::Kill),
        other => Err(anyhow!("unknown preemption mode {other:?}")),
    }
}

fn cmd_generate(args: GenerateArgs) -> anyhow::Result<()> {
    let spec: WorkloadSpec = match (&args.preset, &args.spec) {
        (Some(name), None) => {
            preset_spec(name).ok_or_else(|| anyhow!("unknown preset {name:?}"))?
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading spec {}", path.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing spec {}", path.display()))?
        }
        _ => return Err(anyhow!("set exactly one of --preset or --spec")),
    };
    let name = args
        .preset
        .clone()
        .unwrap_or_else(|| "custom".to_string());
    let mut trace = generate_workload(&spec, args.seed, &name).map_err(|e| anyhow!("{e}"))?;
    if let Some(ratio) = args.scale {
        trace = scale_trace(&trace, ratio).map_err(|e| anyhow!("{e}"))?;
    }
    let out = resolve_output(&args.out);
    write_trace(&trace, &out).map_err(|e| anyhow!("{e}"))?;
    println!(
        "wrote {} jobs spanning {:.0} s to {}",
        trace.jobs.len(),
        trace.span(),
        out.display()
    );
    Ok(())
}

fn build_config(args: &RunArgs, default_schedulers: &[&str]) -> anyhow::Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if args.config.is_none() {
        cfg.schedulers = default_schedulers.iter().map(|s| s.to_string()).collect();
    }
    if let Some(t) = &args.trace {
        cfg.trace = Some(t.clone());
        cfg.preset = None;
        cfg.generator = None;
    }
    if let Some(p) = &args.preset {
        cfg.preset = Some(p.clone());
        cfg.trace = None;
        cfg.generator = None;
    }
    if let Some(s) = &args.schedulers {
        cfg.schedulers = s.split(',').map(|x| x.trim().to_string()).collect();
    }
    if let Some(s) = &args.seeds {
        cfg.seeds = parse_seeds(s)?;
    }
    if let Some(m) = args.machines {
        cfg.cluster.num_machines = m;
    }
    if let Some(m) = args.map_slots {
        cfg.cluster.map_slots_per_machine = m;
    }
    if let Some(m) = args.reduce_slots {
        cfg.cluster.reduce_slots_per_machine = m;
    }
    if let Some(p) = &args.preemption {
        cfg.hfsp.reduce_preemption = parse_preemption(p)?;
    }
    if let Some(a) = args.alpha {
        cfg.hfsp.estimator.alpha = a;
    }
    if args.event_log {
        cfg.event_log = true;
    }
    if let Some(o) = &args.out {
        cfg.output = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_run(args: RunArgs, compare: bool) -> anyhow::Result<()> {
    let defaults: &[&str] = if compare {
        &["hfsp", "fair", "fifo"]
    } else {
        &["hfsp"]
    };
    let cfg = build_config(&args, defaults)?;
    let out = cfg.resolved_output();
    let summary = run_matrix(&cfg, &out)?;
    for (name, s) in &summary.schedulers {
        println!(
            "{name}: mean aggregate sojourn {:.1} s over {} seed(s) (std {:.1})",
            s.mean_aggregate_sojourn.mean,
            s.mean_aggregate_sojourn.seeds,
            s.mean_aggregate_sojourn.std,
        );
    }
    println!("reports in {}", out.display());
    Ok(())
}

fn cmd_scenario(args: ScenarioArgs) -> anyhow::Result<()> {
    let preemption = parse_preemption(&args.preemption)?;
    let s = scenario::by_name(&args.name, preemption)?;
    let (result, outcome) = scenario::run_scenario(&s, args.seed)?;
    println!("scenario {} ({} preemption)", outcome.name, args.preemption);
    for (job, completion) in &outcome.completions {
        println!("  {job}: completes at {completion:.1} s");
    }
    println!(
        "  mean sojourn {:.1} s ({:.2} min)",
        outcome.mean_sojourn,
        outcome.mean_sojourn / 60.0
    );
    if args.name == "fig1" {
        let oracle = scenario::fluid_ps_completions(
            &[(0.0, 30.0, 1.0), (10.0, 10.0, 1.0), (15.0, 10.0, 1.0)],
            1.0,
        );
        let mean = (oracle[0] + (oracle[1] - 10.0) + (oracle[2] - 15.0)) / 3.0;
        println!(
            "  processor-sharing reference: completions {:.1}/{:.1}/{:.1} s, mean sojourn {mean:.1} s",
            oracle[0], oracle[1], oracle[2]
        );
    }
    if let Some(out) = &args.out {
        let out = resolve_output(out);
        hfsp_sim::report::write_run_files(&out, &result, true)?;
        let text = serde_json::to_string_pretty(&outcome).expect("outcome");
        hfsp_sim::report::write_atomic(&out.join("scenario.json"), text.as_bytes())?;
        println!("reports in {}", out.display());
    }
    Ok(())
}

fn cmd_report(args: ReportArgs) -> anyhow::Result<()> {
    let dir = resolve_output(&args.dir);
    let summary = reaggregate(&dir)?;
    for (name, s) in &summary.schedulers {
        println!(
            "{name}: mean aggregate sojourn {:.1} s over {} seed(s)",
            s.mean_aggregate_sojourn.mean, s.mean_aggregate_sojourn.seeds,
        );
    }
    println!("rewrote {}", dir.join("summary.json").display());
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Run(args) => cmd_run(args, false),
        Command::Compare(args) => cmd_run(args, true),
        Command::Scenario(args) => cmd_scenario(args),
        Command::Report(args) => cmd_report(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
