use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use bikelane::metrics::{topology, tradeoff_csv, tradeoff_table, REPORT_COLUMNS, REPORT_NOTE};
use bikelane::model::resolve_ids;
use bikelane_cli::config::KEYS;
use bikelane_cli::files::{decensor_files, ingest, synth, DecensorArgs, SynthArgs};
use bikelane_cli::pipeline::{load, load_network};
use bikelane_cli::sweep::parse_grid;
use bikelane_cli::{geojson, run_solve, run_sweep, Exit, Infeasible, PlanFile, RunConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bikelane", version, about = "Plan continuous bike-lane networks from trajectory data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set alpha=1.05`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        for kv in &self.set {
            let (k, v) = kv.split_once('=').with_context(|| format!("--set expects KEY=VALUE, got `{kv}`"))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a grid network, random walks, and optionally routes and stock.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "11x10")]
        grid: String,
        #[arg(long, default_value_t = 2000)]
        trajectories: usize,
        #[arg(long, default_value_t = 5)]
        mean_length: usize,
        #[arg(long, default_value_t = 1.0)]
        unit_cost: f64,
        /// OD groups to write to routes.csv.
        #[arg(long, default_value_t = 0)]
        ods: usize,
        #[arg(long, default_value_t = 3)]
        routes_per_od: usize,
        /// Route disutility per km.
        #[arg(long, default_value_t = 2.0)]
        eta: f64,
        /// Days of stock observations to write to stock.csv.
        #[arg(long, default_value_t = 0)]
        stock_days: usize,
    },
    /// Validate a network and trajectories and write normalized copies.
    Ingest {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        trajectories: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        unit_cost: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reweight trajectories by the days their origin had bikes.
    Decensor {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        trajectories: PathBuf,
        #[arg(long)]
        stock: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        unit_cost: f64,
        #[arg(long, default_value_t = 14)]
        horizon_days: usize,
        #[arg(long, default_value_t = 0)]
        threshold: u32,
        /// Treat unobserved slots as served instead of stocked out.
        #[arg(long)]
        missing_available: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve one configuration; writes plan.json, report.csv and timing.json.
    #[command(after_help = keys_help())]
    Solve {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Solve every cell of a parameter grid.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Axis `key=v1,v2,...`; repeat for more axes.
        #[arg(long, required = true)]
        grid: Vec<String>,
        /// Cells solved concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Topology report of one or more plans; with several, changes against the first.
    Metrics {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, required = true)]
        plan: Vec<PathBuf>,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a plan as GeoJSON.
    Export {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn keys_help() -> String {
    let mut s = String::from("Config keys:\n");
    for (k, doc) in KEYS {
        let _ = writeln!(s, "  {k:<20} {doc}");
    }
    s
}

fn parse_grid_size(s: &str) -> Result<(usize, usize)> {
    let (r, c) = s.split_once('x').with_context(|| format!("grid must look like 11x10, got `{s}`"))?;
    Ok((r.parse()?, c.parse()?))
}

fn plan_indices(network: &bikelane::model::RoadNetwork, path: &Path) -> Result<Vec<usize>> {
    let plan = PlanFile::read(path)?;
    Ok(resolve_ids(network, &plan.selected)?)
}

fn metrics(cfg: &RunConfig, plans: &[PathBuf]) -> Result<String> {
    let loaded = load(cfg)?;
    let inst = &loaded.instance;
    let mut reports = Vec::new();
    let mut out = format!("{REPORT_NOTE}\nplan,{}\n", REPORT_COLUMNS.join(","));
    for p in plans {
        let sel = plan_indices(&inst.network, p)?;
        let rep = topology(inst, &sel);
        let _ = writeln!(out, "{},{}", p.display(), rep.csv_row());
        reports.push(rep);
    }
    if reports.len() > 1 {
        let labels: Vec<String> = plans[1..].iter().map(|p| p.display().to_string()).collect();
        out.push('\n');
        out.push_str(&tradeoff_csv(&labels, &tradeoff_table(&reports[0], &reports[1..])));
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<Exit> {
    match cli.command {
        Command::Synth {
            out,
            seed,
            grid,
            trajectories,
            mean_length,
            unit_cost,
            ods,
            routes_per_od,
            eta,
            stock_days,
        } => {
            let (rows, cols) = parse_grid_size(&grid)?;
            synth(
                &SynthArgs {
                    seed,
                    rows,
                    cols,
                    trajectories,
                    mean_length,
                    unit_cost,
                    ods,
                    routes_per_od,
                    eta,
                    stock_days,
                },
                &out,
            )?;
        }
        Command::Ingest {
            network,
            trajectories,
            unit_cost,
            out,
        } => ingest(&network, &trajectories, unit_cost, &out)?,
        Command::Decensor {
            network,
            trajectories,
            stock,
            unit_cost,
            horizon_days,
            threshold,
            missing_available,
            out,
        } => decensor_files(
            &DecensorArgs {
                network: &network,
                trajectories: &trajectories,
                stock: &stock,
                unit_cost,
                horizon_days,
                threshold,
                missing_available,
            },
            &out,
        )?,
        Command::Solve { config } => return run_solve(&config.resolve()?),
        Command::Sweep { config, grid, jobs } => return run_sweep(&config.resolve()?, &parse_grid(&grid)?, jobs),
        Command::Metrics { config, plan, out } => {
            let text = metrics(&config.resolve()?, &plan)?;
            match out {
                Some(p) => std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{text}"),
            }
        }
        Command::Export { config, plan, out } => {
            let cfg = config.resolve()?;
            let network = load_network(&cfg)?;
            let sel = plan_indices(&network, &plan)?;
            let doc = geojson::export(&network, &sel);
            std::fs::write(&out, serde_json::to_string(&doc)? + "\n").with_context(|| format!("writing {}", out.display()))?;
        }
    }
    Ok(Exit::Ok)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(e) => ExitCode::from(e as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Infeasible>().is_some() {
                ExitCode::from(Exit::Infeasible as u8)
            } else {
                ExitCode::from(Exit::Error as u8)
            }
        }
    }
}
