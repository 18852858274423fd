use std::time::Duration;

use optkernel::{solve_milp, MilpOptions, MilpStatus};

use crate::error::{Error, Result};
use crate::formulations::{build_blac, build_blgu};
use crate::model::{evaluate_plan, ConstructionPlan, PlanStatus, PlanningInstance, Provenance, UtilitySpec};

#[derive(Debug, Clone, Copy)]
pub struct ExactOptions {
    pub mip_gap: f64,
    pub time_limit: Option<Duration>,
    pub node_limit: Option<usize>,
}

impl Default for ExactOptions {
    fn default() -> Self {
        Self {
            mip_gap: 1e-9,
            time_limit: None,
            node_limit: None,
        }
    }
}

pub(crate) fn plan_status(status: MilpStatus) -> Result<PlanStatus> {
    match status {
        MilpStatus::Optimal => Ok(PlanStatus::Optimal),
        MilpStatus::Interrupted => Ok(PlanStatus::Interrupted),
        MilpStatus::Infeasible => Err(Error::Validation("model reported infeasible".into())),
        MilpStatus::Unbounded => Err(Error::Validation("model reported unbounded".into())),
    }
}

/// Branch-and-bound on the adjacency or general-continuity MILP, matching
/// the instance's utility.
pub fn solve_exact(inst: &PlanningInstance, opts: &ExactOptions) -> Result<ConstructionPlan> {
    let (model, map) = match inst.utility {
        UtilitySpec::Ac { .. } => build_blac(inst)?,
        UtilitySpec::Gu { .. } => build_blgu(inst)?,
    };
    let result = solve_milp(
        &model,
        MilpOptions {
            mip_gap: opts.mip_gap,
            time_limit: opts.time_limit,
            node_limit: opts.node_limit,
            ..Default::default()
        },
    )?;
    let status = plan_status(result.status)?;
    let selected = result.incumbent.as_deref().map(|x| map.selected(x)).unwrap_or_default();
    let mut plan = evaluate_plan(inst, &selected)?;
    plan.bound = Some(result.bound.max(plan.objective));
    plan.status = status;
    plan.provenance = Provenance::new("exact")
        .with("mip_gap", opts.mip_gap)
        .with("nodes", result.nodes);
    Ok(plan)
}
