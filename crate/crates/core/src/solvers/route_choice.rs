use std::time::Duration;

use optkernel::{solve_milp, MilpOptions, MilpStatus};

use super::exact::plan_status;
use crate::choice::{eval_choice_objective, mnl_probabilities, ChoiceContext};
use crate::error::Result;
use crate::formulations::build_choice_milp;
use crate::model::{evaluate_plan, ConstructionPlan, PlanningInstance, Provenance};

#[derive(Debug, Clone, Copy)]
pub struct ChoiceOptions {
    /// Breakpoints of the piecewise-linear entropy.
    pub k: usize,
    pub p_min: f64,
    pub mip_gap: f64,
    pub time_limit: Option<Duration>,
}

impl Default for ChoiceOptions {
    fn default() -> Self {
        Self {
            k: 20,
            p_min: 1e-4,
            mip_gap: 1e-6,
            time_limit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceSolution {
    /// Objective re-evaluated with closed-form logit probabilities.
    pub plan: ConstructionPlan,
    /// Objective of the incumbent inside the piecewise-linear model.
    pub approximate_objective: f64,
    /// Branch-and-bound bound of the piecewise-linear model.
    pub approximate_bound: f64,
    pub milp_status: MilpStatus,
    /// `|primal - dual|` of the follower problem at the incumbent.
    pub strong_duality_residual: f64,
    /// Route probabilities of the incumbent, `[od][route]`.
    pub model_probabilities: Vec<Vec<f64>>,
    pub exact_probabilities: Vec<Vec<f64>>,
}

/// Plans lanes against route choices that follow the logit response.
pub fn solve_choice(inst: &PlanningInstance, ctx: &ChoiceContext, opts: &ChoiceOptions) -> Result<ChoiceSolution> {
    let (model, map) = build_choice_milp(inst, ctx, opts.k, opts.p_min)?;
    let result = solve_milp(
        &model,
        MilpOptions {
            mip_gap: opts.mip_gap,
            time_limit: opts.time_limit,
            ..Default::default()
        },
    )?;
    let status = plan_status(result.status)?;
    let cv = map.choice.as_ref().expect("choice model carries choice variables");
    let (selected, approx, residual, probs) = match &result.incumbent {
        Some(x) => {
            let row = &model.lp.constraints[cv.strong_duality_row];
            let activity: f64 = row.terms.iter().map(|&(v, a)| a * x[v.0]).sum();
            let probs = cv.p.iter().map(|od| od.iter().map(|v| x[v.0]).collect()).collect();
            (map.selected(x), model.lp.objective_value(x), (activity - row.rhs).abs(), probs)
        }
        None => (Vec::new(), f64::NEG_INFINITY, f64::NAN, Vec::new()),
    };
    let mut plan = evaluate_plan(inst, &selected)?;
    let mask = inst.mask(&selected);
    plan.objective = eval_choice_objective(inst, ctx, &mask)?;
    plan.status = status;
    plan.provenance = Provenance::new("choice")
        .with("k", opts.k)
        .with("p_min", opts.p_min)
        .with("mip_gap", opts.mip_gap);
    Ok(ChoiceSolution {
        approximate_bound: result.bound,
        exact_probabilities: mnl_probabilities(inst, ctx, &mask)?,
        plan,
        approximate_objective: approx,
        milp_status: result.status,
        strong_duality_residual: residual,
        model_probabilities: probs,
    })
}
