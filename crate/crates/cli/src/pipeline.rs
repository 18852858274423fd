//! Loading an instance from a run configuration, solving it and writing the
//! plan files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use bikelane::choice::ChoiceContext;
use bikelane::ingest::{
    decensor, parse_network, parse_routes, parse_stock, parse_trajectories, synth_network, synth_trajectories, DecensorOptions,
    DecensorReport,
};
use bikelane::metrics::{topology, TopologyReport};
use bikelane::model::{build_instance, ConstructionPlan, PlanStatus, PlanningInstance, RoadNetwork, Trajectory};
use bikelane::solvers::{greedy, gu_lag_with, solve_choice, solve_exact, ChoiceOptions, ExactOptions, LagrangianOptions, SearchExit};
use log::info;
use serde::{Deserialize, Serialize};

use crate::config::{Algo, ModelKind, RunConfig};

/// Process exit status of a finished command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Error = 1,
    Infeasible = 2,
    Interrupted = 3,
}

impl Exit {
    /// The more severe of two statuses: error, infeasible, interrupted, ok.
    pub fn worse(self, other: Exit) -> Exit {
        let rank = |e: Exit| match e {
            Exit::Ok => 0,
            Exit::Interrupted => 1,
            Exit::Infeasible => 2,
            Exit::Error => 3,
        };
        if rank(other) > rank(self) {
            other
        } else {
            self
        }
    }
}

/// A model the solver proved infeasible; mapped to exit status 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct Infeasible(pub String);

pub struct Loaded {
    pub instance: PlanningInstance,
    pub routes: Option<ChoiceContext>,
    pub decensor: Option<DecensorReport>,
}

/// The configured network, or the synthetic grid for `seed`.
pub fn load_network(cfg: &RunConfig) -> Result<RoadNetwork> {
    match &cfg.network {
        Some(p) => parse_network(p, cfg.unit_cost).with_context(|| format!("loading network {}", p.display())),
        None => Ok(synth_network(cfg.seed, cfg.synth_grid.0, cfg.synth_grid.1, cfg.unit_cost)?.network),
    }
}

fn load_trajectories(cfg: &RunConfig) -> Result<(RoadNetwork, Vec<Trajectory>)> {
    match (&cfg.network, &cfg.trajectories) {
        (Some(_), Some(t)) => {
            let network = load_network(cfg)?;
            let trajs = parse_trajectories(t, &network).with_context(|| format!("loading trajectories {}", t.display()))?;
            Ok((network, trajs))
        }
        _ => {
            let grid = synth_network(cfg.seed, cfg.synth_grid.0, cfg.synth_grid.1, cfg.unit_cost)?;
            let trajs = synth_trajectories(cfg.seed, &grid, cfg.synth_trajectories, cfg.synth_mean_length);
            Ok((grid.network, trajs))
        }
    }
}

pub fn load(cfg: &RunConfig) -> Result<Loaded> {
    cfg.validate()?;
    let (network, mut trajs) = load_trajectories(cfg)?;
    let mut report = None;
    if let Some(s) = &cfg.stock {
        let obs = parse_stock(s).with_context(|| format!("loading stock {}", s.display()))?;
        let opts = DecensorOptions {
            threshold: cfg.stock_threshold,
            ..DecensorOptions::new(cfg.horizon_days)
        };
        let (kept, r) = decensor(&trajs, &obs, &opts)?;
        trajs = kept;
        report = Some(r);
    }
    let routes = match &cfg.routes {
        Some(p) if cfg.model == ModelKind::GuChoice => {
            let ctx = parse_routes(p, &network).with_context(|| format!("loading routes {}", p.display()))?;
            ctx.validate(&network)?;
            Some(ctx)
        }
        _ => None,
    };
    let instance = build_instance(network, trajs, cfg.budget_currency(), cfg.utility())?;
    Ok(Loaded {
        instance,
        routes,
        decensor: report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagrangianInfo {
    pub evaluations: usize,
    pub exit: String,
    pub u_star: f64,
    pub dual_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceInfo {
    pub approximate_objective: f64,
    pub approximate_bound: f64,
    pub strong_duality_residual: f64,
}

/// Contents of `plan.json`. Holds nothing that varies between identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    pub parameters: BTreeMap<String, String>,
    pub status: PlanStatus,
    pub selected: Vec<String>,
    pub cost: f64,
    pub budget: f64,
    pub objective: f64,
    pub bound: Option<f64>,
    /// `(bound - objective) / bound`.
    pub gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lagrangian: Option<LagrangianInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choice: Option<ChoiceInfo>,
}

impl PlanFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading plan {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing plan {}", path.display()))
    }
}

pub struct Solved {
    pub plan: ConstructionPlan,
    pub file: PlanFile,
    pub report: TopologyReport,
    pub seconds: f64,
}

impl Solved {
    pub fn exit(&self) -> Exit {
        if !self.plan.feasible {
            Exit::Infeasible
        } else if self.plan.status == PlanStatus::Interrupted {
            Exit::Interrupted
        } else {
            Exit::Ok
        }
    }
}

fn exit_name(e: SearchExit) -> &'static str {
    match e {
        SearchExit::BudgetCovers => "budget_covers",
        SearchExit::BudgetMet => "budget_met",
        SearchExit::Converged => "converged",
        SearchExit::Stalled => "stalled",
    }
}

fn infeasible_or(e: bikelane::Error) -> anyhow::Error {
    match &e {
        bikelane::Error::Validation(msg) if msg.contains("infeasible") => Infeasible(msg.clone()).into(),
        _ => e.into(),
    }
}

pub fn solve(cfg: &RunConfig, loaded: &Loaded) -> Result<Solved> {
    let inst = &loaded.instance;
    let start = Instant::now();
    let mut lagrangian = None;
    let mut choice = None;
    let plan = match (cfg.model, cfg.algo) {
        (ModelKind::GuChoice, _) => {
            let ctx = loaded.routes.as_ref().context("model gu-choice needs a routes file (key `routes`)")?;
            let sol = solve_choice(
                inst,
                ctx,
                &ChoiceOptions {
                    k: cfg.k,
                    p_min: cfg.p_min,
                    mip_gap: cfg.mip_gap,
                    time_limit: Some(cfg.time_limit()),
                },
            )
            .map_err(infeasible_or)?;
            choice = Some(ChoiceInfo {
                approximate_objective: sol.approximate_objective,
                approximate_bound: sol.approximate_bound,
                strong_duality_residual: sol.strong_duality_residual,
            });
            sol.plan
        }
        (_, Algo::Exact) => solve_exact(
            inst,
            &ExactOptions {
                mip_gap: cfg.mip_gap,
                time_limit: Some(cfg.time_limit()),
                node_limit: None,
            },
        )
        .map_err(infeasible_or)?,
        (_, Algo::Lagrangian) => {
            let (plan, state) = gu_lag_with(
                inst,
                &LagrangianOptions {
                    epsilon: cfg.epsilon,
                    widen: cfg.widen,
                    mip_gap: cfg.mip_gap,
                    time_limit: Some(cfg.time_limit()),
                    node_limit: None,
                },
            )
            .map_err(infeasible_or)?;
            lagrangian = Some(LagrangianInfo {
                evaluations: state.evaluations(),
                exit: exit_name(state.exit).to_string(),
                u_star: state.u_star,
                dual_bound: state.best_dual_bound,
            });
            plan
        }
        (_, Algo::Greedy) => greedy(inst)?,
    };
    let seconds = start.elapsed().as_secs_f64();
    info!("{} / {}: objective {} in {seconds:.3}s", cfg.model, cfg.algo, plan.objective);
    let report = topology(inst, &plan.selected);
    let file = PlanFile {
        parameters: cfg.parameters().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        status: plan.status,
        selected: plan.selected_ids(&inst.network).into_iter().map(String::from).collect(),
        cost: plan.cost,
        budget: inst.budget,
        objective: plan.objective,
        bound: plan.bound,
        gap: plan.gap().filter(|g| g.is_finite()),
        lagrangian,
        choice,
    };
    Ok(Solved {
        plan,
        file,
        report,
        seconds,
    })
}

/// Writes `plan.json`, `report.csv` and `timing.json` into `dir`.
pub fn write_outputs(dir: &Path, solved: &Solved, decensor: Option<&DecensorReport>) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let write = |name: &str, body: String| {
        let p = dir.join(name);
        fs::write(&p, body).with_context(|| format!("writing {}", p.display()))
    };
    write("plan.json", serde_json::to_string_pretty(&solved.file)? + "\n")?;
    write("report.csv", solved.report.to_csv())?;
    write("timing.json", serde_json::to_string_pretty(&serde_json::json!({ "wall_seconds": solved.seconds }))? + "\n")?;
    if let Some(r) = decensor {
        write("decensor.csv", crate::files::decensor_csv(r))?;
    }
    Ok(())
}

/// `solve` end to end: load, solve, write. Returns the exit status.
pub fn run_solve(cfg: &RunConfig) -> Result<Exit> {
    let loaded = load(cfg)?;
    let solved = solve(cfg, &loaded)?;
    write_outputs(&cfg.out, &solved, loaded.decensor.as_ref())?;
    Ok(solved.exit())
}
