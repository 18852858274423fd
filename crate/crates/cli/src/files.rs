//! `synth`, `ingest` and `decensor`: commands that read and write data files.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use bikelane::choice::ChoiceContext;
use bikelane::ingest::{
    decensor, geohash_encode, parse_network, parse_stock, parse_trajectories, synth_network, synth_trajectories, write_network,
    write_routes, write_stock, write_trajectories, DecensorOptions, DecensorReport, MissingPolicy, StockObservation,
    PERIODS_PER_DAY,
};
use bikelane::model::{build_instance, UtilitySpec};
use chrono::Duration;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

fn write(dir: &Path, name: &str, body: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let p = dir.join(name);
    fs::write(&p, body).with_context(|| format!("writing {}", p.display()))
}

#[derive(Debug, Clone)]
pub struct SynthArgs {
    pub seed: u64,
    pub rows: usize,
    pub cols: usize,
    pub trajectories: usize,
    pub mean_length: usize,
    pub unit_cost: f64,
    /// OD groups written to `routes.csv`; none when zero.
    pub ods: usize,
    pub routes_per_od: usize,
    pub eta: f64,
    /// Days of synthetic stock observations; none when zero.
    pub stock_days: usize,
}

/// Grid network, random walks and optionally routes and stock observations.
pub fn synth(args: &SynthArgs, out: &Path) -> Result<()> {
    let grid = synth_network(args.seed, args.rows, args.cols, args.unit_cost)?;
    let trajs = synth_trajectories(args.seed, &grid, args.trajectories, args.mean_length);
    write(out, "network.csv", &write_network(&grid.network))?;
    write(out, "trajectories.csv", &write_trajectories(&trajs, &grid.network))?;
    if args.ods > 0 {
        let picked: Vec<_> = {
            let mut seen = BTreeSet::new();
            trajs
                .iter()
                .filter(|t| t.len() > 1 && seen.insert(t.od_key()))
                .take(args.ods)
                .cloned()
                .collect()
        };
        let inst = build_instance(grid.network.clone(), picked, 0.0, UtilitySpec::power(1.1))?;
        let ctx = ChoiceContext::from_instance(&inst, args.routes_per_od, args.eta)?;
        write(out, "routes.csv", &write_routes(&ctx, &grid.network))?;
    }
    if args.stock_days > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed ^ 0x57_0c);
        let first = trajs
            .iter()
            .filter_map(|t| t.origin.as_ref())
            .map(|o| o.start.date())
            .min()
            .context("no trajectory has an origin")?;
        let hoods: BTreeSet<String> = trajs
            .iter()
            .filter_map(|t| t.origin.as_ref())
            .map(|o| geohash_encode(o.lon, o.lat, 7))
            .collect::<bikelane::Result<_>>()?;
        let mut obs = Vec::new();
        for h in &hoods {
            for d in 0..args.stock_days {
                for period in 0..PERIODS_PER_DAY {
                    obs.push(StockObservation {
                        neighborhood: h.clone(),
                        period,
                        day: first + Duration::days(d as i64),
                        available: rng.gen_range(0..8),
                    });
                }
            }
        }
        write(out, "stock.csv", &write_stock(&obs))?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct Summary {
    segments: usize,
    neighbor_pairs: usize,
    total_length_km: f64,
    total_cost: f64,
    trajectories: usize,
    total_weight: f64,
    longest_trajectory: usize,
}

/// Validates raw inputs and writes normalized copies plus `summary.json`.
pub fn ingest(network: &Path, trajectories: &Path, unit_cost: f64, out: &Path) -> Result<()> {
    let net = parse_network(network, unit_cost).with_context(|| format!("loading network {}", network.display()))?;
    let trajs = parse_trajectories(trajectories, &net).with_context(|| format!("loading trajectories {}", trajectories.display()))?;
    let summary = Summary {
        segments: net.len(),
        neighbor_pairs: net.neighbors().len(),
        total_length_km: net.segments().iter().map(|s| s.length_m).sum::<f64>() / 1000.0,
        total_cost: net.total_cost(),
        trajectories: trajs.len(),
        total_weight: trajs.iter().map(|t| t.weight).sum(),
        longest_trajectory: trajs.iter().map(|t| t.len()).max().unwrap_or(0),
    };
    write(out, "network.csv", &write_network(&net))?;
    write(out, "trajectories.csv", &write_trajectories(&trajs, &net))?;
    write(out, "summary.json", &(serde_json::to_string_pretty(&summary)? + "\n"))
}

/// `neighborhood,period,stockout_days,weight`, weight empty for dropped cells.
pub fn decensor_csv(r: &DecensorReport) -> String {
    let mut s = format!("# horizon_days={} missing_observations={} dropped_trajectories={}\n", r.horizon_days, r.missing_observations, r.dropped.len());
    s.push_str("neighborhood,period,stockout_days,weight\n");
    for (cell, days) in &r.stockout_days {
        let w = r.weights.get(cell).map(|w| w.to_string()).unwrap_or_default();
        let _ = writeln!(s, "{},{},{days},{w}", cell.0, cell.1);
    }
    s
}

pub struct DecensorArgs<'a> {
    pub network: &'a Path,
    pub trajectories: &'a Path,
    pub stock: &'a Path,
    pub unit_cost: f64,
    pub horizon_days: usize,
    pub threshold: u32,
    pub missing_available: bool,
}

/// Writes reweighted trajectories, the per-cell table and the dropped ids.
pub fn decensor_files(args: &DecensorArgs, out: &Path) -> Result<()> {
    let net = parse_network(args.network, args.unit_cost).with_context(|| format!("loading network {}", args.network.display()))?;
    let trajs = parse_trajectories(args.trajectories, &net)
        .with_context(|| format!("loading trajectories {}", args.trajectories.display()))?;
    let obs = parse_stock(args.stock).with_context(|| format!("loading stock {}", args.stock.display()))?;
    let opts = DecensorOptions {
        threshold: args.threshold,
        missing: if args.missing_available {
            MissingPolicy::Available
        } else {
            MissingPolicy::Stockout
        },
        ..DecensorOptions::new(args.horizon_days)
    };
    let (kept, report) = decensor(&trajs, &obs, &opts)?;
    write(out, "trajectories.csv", &write_trajectories(&kept, &net))?;
    write(out, "decensor.csv", &decensor_csv(&report))?;
    let mut dropped = report.dropped.join("\n");
    if !dropped.is_empty() {
        dropped.push('\n');
    }
    write(out, "dropped.txt", &dropped)
}
