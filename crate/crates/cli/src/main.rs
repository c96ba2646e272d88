use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use btsc_core::bus_network::{build_routing_graph, load_lines};
use btsc_core::events::write_jsonl;
use btsc_core::experiment::{
    metrics_csv, run_scenario_with, run_sweep, RunOptions, RunOutput, ScenarioConfig, SweepAxis,
};
use btsc_core::path_planner::{
    k_min_weight_paths, path_consistency, resolve_endpoints, select_routing_path,
};
use btsc_core::street_map::{generate_grid, load_map};
use btsc_core::{Error, Vec2};
use clap::{Parser, Subcommand};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "btsc",
    version,
    about = "Bus-trajectory street-centric routing simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Street map tools.
    Map {
        #[command(subcommand)]
        command: MapCommand,
    },
    /// Routing graph tools.
    Graph {
        #[command(subcommand)]
        command: GraphCommand,
    },
    /// Plan a street path between two points.
    Plan {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        lines: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        src_x: f64,
        #[arg(long, allow_hyphen_values = true)]
        src_y: f64,
        #[arg(long, allow_hyphen_values = true)]
        dst_x: f64,
        #[arg(long, allow_hyphen_values = true)]
        dst_y: f64,
        #[arg(short, default_value_t = 5)]
        k: usize,
    },
    /// Run a scenario or a sweep.
    Run(RunArgs),
}

#[derive(Subcommand)]
enum MapCommand {
    /// Write a grid map.
    Gen {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(long)]
        block: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a map file.
    Validate { file: PathBuf },
}

#[derive(Subcommand)]
enum GraphCommand {
    /// Emit street weights and the consistency table.
    Build {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        lines: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// Scenario config (JSON). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ["radius", "distance", "density"])]
    sweep: Option<String>,
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    values: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    events: Option<PathBuf>,
    /// Start from the full-size preset; config fields override it.
    #[arg(long = "paper-scale")]
    full_scale: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Write ant discovery events (JSON lines).
    #[arg(long)]
    ant_trace: Option<PathBuf>,
    /// Write world snapshots (JSON lines).
    #[arg(long)]
    snapshots: Option<PathBuf>,
    /// Snapshot period in seconds; defaults to every tick.
    #[arg(long)]
    snapshot_every: Option<f64>,
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_config(args: &RunArgs) -> Result<ScenarioConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = read(path)?;
            let mut value: serde_json::Value = serde_json::from_str(&text).map_err(Error::from)?;
            if args.full_scale {
                let mut base = serde_json::to_value(ScenarioConfig::full_scale())?;
                if let (Some(b), Some(o)) = (base.as_object_mut(), value.as_object()) {
                    for (k, v) in o {
                        b.insert(k.clone(), v.clone());
                    }
                }
                value = base;
            }
            let mut cfg: ScenarioConfig = serde_json::from_value(value).map_err(Error::from)?;
            cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
            cfg
        }
        None if args.full_scale => ScenarioConfig::full_scale(),
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.full_scale {
        cfg.validate_full_scale()?;
    } else {
        cfg.validate()?;
    }
    Ok(cfg)
}

fn write_jsonl_file<T: serde::Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    write_jsonl(&mut w, records)?;
    w.flush()?;
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let cfg = load_config(&args)?;
    let options = RunOptions {
        trace_ants: args.ant_trace.is_some(),
        snapshot_every_s: args
            .snapshots
            .as_ref()
            .map(|_| args.snapshot_every.unwrap_or(cfg.tick_s)),
    };
    let outputs: Vec<RunOutput> = match &args.sweep {
        Some(axis) => {
            let axis: SweepAxis = axis.parse()?;
            run_sweep(&cfg, axis, &args.values, &options)?
        }
        None => vec![run_scenario_with(&cfg, &options)?],
    };
    let rows: Vec<_> = outputs.iter().map(|o| o.metrics.clone()).collect();
    write_out(args.out.as_deref(), &metrics_csv(&rows))?;
    if let Some(path) = &args.events {
        let all: Vec<_> = outputs.iter().flat_map(|o| o.events.iter()).collect();
        write_jsonl_file(path, &all)?;
    }
    if let Some(path) = &args.ant_trace {
        let all: Vec<_> = outputs.iter().flat_map(|o| o.ant_trace.iter()).collect();
        write_jsonl_file(path, &all)?;
    }
    if let Some(path) = &args.snapshots {
        let all: Vec<_> = outputs.iter().flat_map(|o| o.snapshots.iter()).collect();
        write_jsonl_file(path, &all)?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Map { command } => match command {
            MapCommand::Gen {
                rows,
                cols,
                block,
                out,
            } => {
                let map = generate_grid(rows, cols, block)?;
                write_out(out.as_deref(), &(map.to_json() + "\n"))
            }
            MapCommand::Validate { file } => {
                let map = load_map(&read(&file)?)?;
                println!(
                    "ok: {} intersections, {} streets",
                    map.intersection_count(),
                    map.street_count()
                );
                Ok(())
            }
        },
        Command::Graph {
            command: GraphCommand::Build { map, lines, out },
        } => {
            let map = Arc::new(load_map(&read(&map)?)?);
            let lines = load_lines(&read(&lines)?)?;
            let (graph, coverage) = build_routing_graph(map, &lines)?;
            for w in coverage.warnings() {
                eprintln!("warning: {w}");
            }
            let weights: serde_json::Map<_, _> = graph
                .weights()
                .iter()
                .map(|(s, w)| (s.0.to_string(), json!(w)))
                .collect();
            let doc = json!({ "weights": weights, "psc": coverage.psc_table() });
            write_out(
                out.as_deref(),
                &(serde_json::to_string_pretty(&doc)? + "\n"),
            )
        }
        Command::Plan {
            map,
            lines,
            src_x,
            src_y,
            dst_x,
            dst_y,
            k,
        } => {
            let map = Arc::new(load_map(&read(&map)?)?);
            let lines = load_lines(&read(&lines)?)?;
            let (graph, coverage) = build_routing_graph(map.clone(), &lines)?;
            let (src, dst) =
                resolve_endpoints(&map, Vec2::new(src_x, src_y), Vec2::new(dst_x, dst_y))?;
            let candidates = k_min_weight_paths(&graph, src, dst, k)?;
            let mut table = Vec::new();
            for c in &candidates {
                table.push(json!({
                    "streets": c.streets,
                    "weight": c.total_weight,
                    "ppc": path_consistency(&coverage, &c.streets)?,
                }));
            }
            let selected = select_routing_path(&graph, &coverage, src, dst, k)?;
            let doc = json!({
                "src_vertex": src,
                "dst_vertex": dst,
                "candidates": table,
                "selected": {
                    "streets": selected.streets,
                    "weight": selected.total_weight,
                    "ppc": selected.ppc,
                },
            });
            println!("{}", serde_json::to_string_pretty(&doc)?);
            Ok(())
        }
        Command::Run(args) => run(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config_error = matches!(
                e.downcast_ref::<Error>(),
                Some(Error::Config(_) | Error::Parse(_))
            );
            ExitCode::from(if config_error { 2 } else { 1 })
        }
    }
}
