//! Parameter sweeps: one solve per cell of a cartesian grid.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{anyhow, bail, Context, Result};
use bikelane::metrics::{TopologyReport, REPORT_COLUMNS, REPORT_NOTE};
use bikelane::model::PlanStatus;
use log::{error, info};

use crate::config::RunConfig;
use crate::pipeline::{load, solve, write_outputs, Exit};

/// Axis of a sweep: a config key and its values, duplicates removed.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub key: String,
    pub values: Vec<String>,
}

/// Parses `key=v1,v2,...` axes. A key given twice merges its values.
pub fn parse_grid(specs: &[String]) -> Result<Vec<Axis>> {
    let mut axes: Vec<Axis> = Vec::new();
    for spec in specs {
        let (k, vs) = spec
            .split_once('=')
            .ok_or_else(|| anyhow!("grid axis must look like key=v1,v2, got `{spec}`"))?;
        let key = k.trim().to_string();
        if key == "out" {
            bail!("`out` cannot be swept");
        }
        let idx = match axes.iter().position(|a| a.key == key) {
            Some(i) => i,
            None => {
                axes.push(Axis {
                    key: key.clone(),
                    values: Vec::new(),
                });
                axes.len() - 1
            }
        };
        for v in vs.split(',').map(str::trim).filter(|v| !v.is_empty()) {
            if !axes[idx].values.iter().any(|x| x == v) {
                axes[idx].values.push(v.to_string());
            }
        }
        if axes[idx].values.is_empty() {
            bail!("grid axis `{key}` has no values");
        }
    }
    if axes.is_empty() {
        bail!("sweep grid is empty");
    }
    Ok(axes)
}

/// Every assignment of the grid, first axis varying slowest.
pub fn cells(axes: &[Axis]) -> Vec<Vec<(String, String)>> {
    let mut out = vec![Vec::new()];
    for a in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                a.values.iter().map(move |v| {
                    let mut c = prefix.clone();
                    c.push((a.key.clone(), v.clone()));
                    c
                })
            })
            .collect();
    }
    out
}

fn cell_name(cell: &[(String, String)]) -> String {
    cell.iter()
        .map(|(k, v)| {
            let v: String = v.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' }).collect();
            format!("{k}-{v}")
        })
        .collect::<Vec<_>>()
        .join("_")
}

#[derive(Debug, Clone)]
enum CellOutcome {
    Solved {
        status: PlanStatus,
        objective: f64,
        bound: Option<f64>,
        gap: Option<f64>,
        cost: f64,
        report: TopologyReport,
        seconds: f64,
        exit: Exit,
    },
    Failed(String),
}

fn run_cell(base: &RunConfig, cell: &[(String, String)], dir: &Path) -> Result<CellOutcome> {
    let mut cfg = base.clone();
    for (k, v) in cell {
        cfg.set(k, v)?;
    }
    cfg.out = dir.to_path_buf();
    let loaded = load(&cfg)?;
    let solved = solve(&cfg, &loaded)?;
    write_outputs(dir, &solved, loaded.decensor.as_ref())?;
    Ok(CellOutcome::Solved {
        status: solved.plan.status,
        objective: solved.plan.objective,
        bound: solved.file.bound,
        gap: solved.file.gap,
        cost: solved.plan.cost,
        report: solved.report.clone(),
        seconds: solved.seconds,
        exit: solved.exit(),
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn status_name(s: PlanStatus) -> &'static str {
    match s {
        PlanStatus::Optimal => "optimal",
        PlanStatus::Feasible => "feasible",
        PlanStatus::Interrupted => "interrupted",
    }
}

/// Runs every cell with up to `jobs` concurrent solves, then writes
/// `sweep.csv` (deterministic) and `sweep_timing.csv`. A failed cell is
/// recorded and does not stop the sweep.
pub fn run_sweep(base: &RunConfig, axes: &[Axis], jobs: usize) -> Result<Exit> {
    base.validate()?;
    let cells = cells(axes);
    let names: Vec<String> = cells.iter().map(|c| cell_name(c)).collect();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<CellOutcome>>> = Mutex::new(vec![None; cells.len()]);
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, cells.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= cells.len() {
                    break;
                }
                let dir = base.out.join(&names[i]);
                let outcome = run_cell(base, &cells[i], &dir).unwrap_or_else(|e| {
                    error!("cell {}: {e:#}", names[i]);
                    CellOutcome::Failed(format!("{e:#}"))
                });
                info!("cell {} done", names[i]);
                results.lock().expect("sweep worker panicked")[i] = Some(outcome);
            });
        }
    });
    let results: Vec<CellOutcome> = results
        .into_inner()
        .expect("sweep worker panicked")
        .into_iter()
        .map(|r| r.expect("every cell ran"))
        .collect();

    let mut csv = format!("{REPORT_NOTE}\ncell,");
    for a in axes {
        csv.push_str(&a.key);
        csv.push(',');
    }
    let _ = writeln!(csv, "status,objective,bound,gap,cost,{},message", REPORT_COLUMNS.join(","));
    let mut timing = String::from("cell,wall_seconds\n");
    let mut exit = Exit::Ok;
    for ((name, cell), outcome) in names.iter().zip(&cells).zip(&results) {
        csv.push_str(name);
        csv.push(',');
        for (_, v) in cell {
            csv.push_str(v);
            csv.push(',');
        }
        match outcome {
            CellOutcome::Solved {
                status,
                objective,
                bound,
                gap,
                cost,
                report,
                seconds,
                exit: e,
            } => {
                let _ = writeln!(csv, "{},{objective},{},{},{cost},{},", status_name(*status), opt(*bound), opt(*gap), report.csv_row());
                let _ = writeln!(timing, "{name},{seconds}");
                exit = exit.worse(*e);
            }
            CellOutcome::Failed(msg) => {
                let msg = msg.replace([',', '\n'], " ");
                let _ = writeln!(csv, "error,,,,,{}{msg}", ",".repeat(REPORT_COLUMNS.len()));
                let _ = writeln!(timing, "{name},");
                exit = exit.worse(Exit::Error);
            }
        }
    }
    fs::create_dir_all(&base.out).with_context(|| format!("creating {}", base.out.display()))?;
    fs::write(base.out.join("sweep.csv"), csv).context("writing sweep.csv")?;
    fs::write(base.out.join("sweep_timing.csv"), timing).context("writing sweep_timing.csv")?;
    Ok(exit)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_grid() {
        let axes = parse_grid(&["alpha=1.02,1.05".into(), "budget_km=30,50".into()]).unwrap();
        let c = cells(&axes);
        assert_eq!(c.len(), 4);
        assert_eq!(cell_name(&c[1]), "alpha-1.02_budget_km-50");
    }

    #[test]
    fn duplicates_collapse() {
        let axes = parse_grid(&["alpha=1.02,1.02".into(), "alpha=1.05,1.02".into()]).unwrap();
        assert_eq!(axes.len(), 1);
        assert_eq!(axes[0].values, vec!["1.02", "1.05"]);
        assert!(parse_grid(&[]).is_err());
        assert!(parse_grid(&["alpha=".into()]).is_err());
    }
}
