//! Budget-relaxed dual and the outer-approximation search over it.
//!
//! For a fixed multiplier `u >= 0`,
//!
//! ```text
//! Phi(u) = max_x S(x) - u (c(x) - B)
//! ```
//!
//! is a maximum-weight closure over segments (weight `w_i - u c_i`) and
//! auxiliary nodes (their nonnegative rewards), so every evaluation is one
//! min-cut. `Phi` is convex and piecewise linear in `u`; the search keeps a
//! bracket with an over-budget end and a within-budget end and moves to the
//! intersection of the two supporting lines until the cut model is tight.

use std::time::Duration;

use log::{debug, warn};
use optkernel::{solve_closure, solve_with_relaxation, ClosureProblem, MilpOptions, MilpStatus};

use super::restricted::ClosureRelaxation;
use crate::error::{Error, Result};
use crate::formulations::ClosureStructure;
use crate::model::{evaluate_plan, ConstructionPlan, PlanStatus, PlanningInstance, Provenance};

/// One point of the dual function.
#[derive(Debug, Clone, PartialEq)]
pub struct DualEvaluation {
    pub u: f64,
    pub phi: f64,
    /// `S(x(u))`.
    pub utility: f64,
    /// `c(x(u))`.
    pub cost: f64,
    /// `g(u) = B - c(x(u))`.
    pub subgradient: f64,
    pub selected: Vec<bool>,
    /// True for the closed-form bracket ends, which need no cut.
    pub analytic: bool,
}

impl DualEvaluation {
    /// Value at `v` of the supporting line through this point.
    pub fn line_at(&self, v: f64) -> f64 {
        self.phi + (v - self.u) * self.subgradient
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchExit {
    /// The whole network fits in the budget.
    BudgetCovers,
    /// `x(u*)` spends the budget exactly; it is dual-certified.
    BudgetMet,
    /// The cut model matched `Phi(u*)`; the restricted MILP picked the plan.
    Converged,
    /// The multiplier stopped moving or the evaluation cap was hit.
    Stalled,
}

/// Bracket and trail of the dual search.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSearchState {
    /// Multiplier whose selection exceeds the budget (`g < 0`).
    pub u_over: f64,
    /// Multiplier whose selection fits the budget (`g >= 0`).
    pub u_under: f64,
    pub u_star: f64,
    /// Every point in the order it was produced, analytic ends first.
    pub records: Vec<DualEvaluation>,
    pub best_dual_bound: f64,
    pub exit: SearchExit,
    /// Status of the restricted MILP when one was solved.
    pub restricted: Option<MilpStatus>,
}

impl DualSearchState {
    /// Number of cut evaluations.
    pub fn evaluations(&self) -> usize {
        self.records.iter().filter(|r| !r.analytic).count()
    }

    /// Records sorted by multiplier.
    pub fn trail(&self) -> Vec<&DualEvaluation> {
        let mut t: Vec<&DualEvaluation> = self.records.iter().collect();
        t.sort_by(|a, b| a.u.total_cmp(&b.u));
        t
    }
}

/// Closure-based evaluator of `Phi` for one instance.
#[derive(Debug, Clone)]
pub struct LagrangianEngine {
    structure: ClosureStructure,
    costs: Vec<f64>,
    budget: f64,
    problem: ClosureProblem<f64>,
}

impl LagrangianEngine {
    pub fn new(inst: &PlanningInstance) -> Result<Self> {
        if !inst.utility.is_convex() {
            return Err(Error::Unsupported(
                "the Lagrangian engine needs a convex continuity function; use the exact solver".into(),
            ));
        }
        Self::from_structure(ClosureStructure::from_instance(inst)?, inst.costs(), inst.budget)
    }

    pub fn from_structure(structure: ClosureStructure, costs: Vec<f64>, budget: f64) -> Result<Self> {
        if !structure.is_supermodular() {
            return Err(Error::Unsupported(
                "negative continuity rewards break the min-cut reduction; use the exact solver".into(),
            ));
        }
        let n = structure.num_segments();
        let mut weights = structure.seg_weight.clone();
        weights.extend(structure.aux.iter().map(|a| a.weight));
        let mut problem = ClosureProblem::new(weights);
        for (k, a) in structure.aux.iter().enumerate() {
            problem.require(n + k, a.children[0]);
            if a.children[1] != a.children[0] {
                problem.require(n + k, a.children[1]);
            }
        }
        Ok(Self {
            structure,
            costs,
            budget,
            problem,
        })
    }

    pub fn structure(&self) -> &ClosureStructure {
        &self.structure
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn num_segments(&self) -> usize {
        self.structure.num_segments()
    }

    /// Point built from a known selection, without a cut.
    pub fn point(&self, u: f64, selected: Vec<bool>, analytic: bool) -> DualEvaluation {
        let utility = self.structure.value(&selected);
        let cost: f64 = selected.iter().zip(&self.costs).filter(|(&s, _)| s).map(|(_, c)| c).sum();
        DualEvaluation {
            u,
            phi: utility - u * (cost - self.budget),
            utility,
            cost,
            subgradient: self.budget - cost,
            selected,
            analytic,
        }
    }

    pub fn evaluate(&mut self, u: f64) -> Result<DualEvaluation> {
        Ok(self.evaluate_with(u, &[], &[])?.expect("no forced segments"))
    }

    /// `Phi(u)` with some segments fixed; `None` if the fixings conflict.
    pub fn evaluate_with(&mut self, u: f64, forced_in: &[usize], forced_out: &[usize]) -> Result<Option<DualEvaluation>> {
        let n = self.num_segments();
        for i in 0..n {
            self.problem.weights[i] = self.structure.seg_weight[i] - u * self.costs[i];
        }
        self.problem.forced_in.clear();
        self.problem.forced_in.extend_from_slice(forced_in);
        self.problem.forced_out.clear();
        self.problem.forced_out.extend_from_slice(forced_out);
        let Some(sol) = solve_closure(&self.problem)? else {
            return Ok(None);
        };
        let selected = sol.selected[..n].to_vec();
        let mut e = self.point(u, selected, false);
        // the cut value is the exact maximum; the recomputed one only differs by rounding
        e.phi = sol.weight + u * self.budget;
        Ok(Some(e))
    }
}

/// `x(u)` as segment indices and `Phi(u)`.
pub fn lagrangian_subproblem(inst: &PlanningInstance, u: f64) -> Result<(Vec<usize>, f64)> {
    if !(u.is_finite() && u >= 0.0) {
        return Err(Error::Config(format!("multiplier must be a nonnegative number, got {u}")));
    }
    let e = LagrangianEngine::new(inst)?.evaluate(u)?;
    let sel = e.selected.iter().enumerate().filter(|(_, &s)| s).map(|(i, _)| i).collect();
    Ok((sel, e.phi))
}

#[derive(Debug, Clone, Copy)]
pub struct LagrangianOptions {
    /// Relative tolerance of the cut-model stopping test.
    pub epsilon: f64,
    /// Search the restricted MILP over `V(u_over)` instead of `V(u*)` when
    /// `x(u*)` leaves budget unspent. At a tolerance-converged `u*` both
    /// bracket selections are near-optimal and `x(u*)` may land on either
    /// side; on the within-budget side `V(u*)` only contains `x(u*)` itself.
    pub widen: bool,
    pub mip_gap: f64,
    pub time_limit: Option<Duration>,
    pub node_limit: Option<usize>,
}

impl Default for LagrangianOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-4,
            widen: false,
            mip_gap: 1e-6,
            time_limit: Some(Duration::from_secs(60)),
            node_limit: None,
        }
    }
}

fn indices(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter(|(_, &s)| s).map(|(i, _)| i).collect()
}

/// Lagrangian heuristic with default options and tolerance `epsilon`.
pub fn gu_lag(inst: &PlanningInstance, epsilon: f64) -> Result<(ConstructionPlan, DualSearchState)> {
    gu_lag_with(
        inst,
        &LagrangianOptions {
            epsilon,
            ..Default::default()
        },
    )
}

pub fn gu_lag_with(inst: &PlanningInstance, opts: &LagrangianOptions) -> Result<(ConstructionPlan, DualSearchState)> {
    if !(opts.epsilon > 0.0 && opts.epsilon.is_finite()) {
        return Err(Error::Config(format!("epsilon must be positive, got {}", opts.epsilon)));
    }
    let mut engine = LagrangianEngine::new(inst)?;
    let n = engine.num_segments();
    let budget = inst.budget;
    let tol = inst.budget_tolerance();
    let provenance = Provenance::new("lagrangian")
        .with("epsilon", opts.epsilon)
        .with("widen", opts.widen);

    let all = engine.point(0.0, vec![true; n], true);
    let max_ratio = engine
        .costs()
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| all.utility / c)
        .fold(0.0, f64::max);
    let zero_cost: Vec<bool> = engine.costs().iter().map(|&c| c <= 0.0).collect();
    let none = engine.point(max_ratio, zero_cost, true);

    let mut state = DualSearchState {
        u_over: 0.0,
        u_under: max_ratio,
        u_star: 0.0,
        best_dual_bound: all.phi.min(none.phi),
        records: vec![all.clone(), none.clone()],
        exit: SearchExit::BudgetCovers,
        restricted: None,
    };

    let finish = |sel: &[bool], bound: f64, status: PlanStatus, prov: Provenance| -> Result<ConstructionPlan> {
        let mut plan = evaluate_plan(inst, &indices(sel))?;
        plan.bound = Some(bound.max(plan.objective));
        plan.status = status;
        plan.provenance = prov;
        Ok(plan)
    };

    if all.cost <= budget + tol {
        let plan = finish(&all.selected, all.utility, PlanStatus::Optimal, provenance)?;
        return Ok((plan, state));
    }
    if max_ratio <= 0.0 {
        // no demand anywhere: nothing beats the free segments
        state.exit = SearchExit::Stalled;
        state.u_star = max_ratio;
        let plan = finish(&none.selected, state.best_dual_bound, PlanStatus::Optimal, provenance)?;
        return Ok((plan, state));
    }

    let mut over = all;
    let mut under = none;
    let mut last = under.clone();
    let cap = n + 1;
    state.exit = SearchExit::Stalled;
    while state.evaluations() < cap {
        let u = (over.utility - under.utility) / (over.cost - under.cost);
        if !u.is_finite() || state.records.iter().any(|r| r.u == u) {
            break;
        }
        state.u_star = u;
        let e = engine.evaluate(u)?;
        debug!("dual step u={u:.6e} phi={:.6e} cost={:.6e}", e.phi, e.cost);
        state.best_dual_bound = state.best_dual_bound.min(e.phi);
        state.records.push(e.clone());
        last = e.clone();
        if (e.cost - budget).abs() <= tol {
            state.exit = SearchExit::BudgetMet;
            break;
        }
        let model = under.line_at(u);
        let scale = if e.phi.abs() > 1e-12 { e.phi.abs() } else { 1.0 };
        if (e.phi - model).abs() / scale <= opts.epsilon {
            state.exit = SearchExit::Converged;
            break;
        }
        if e.cost > budget {
            over = e;
        } else {
            under = e;
        }
    }
    state.u_over = over.u;
    state.u_under = under.u;
    let bound = state.best_dual_bound;

    if state.exit == SearchExit::BudgetMet {
        let plan = finish(&last.selected, bound, PlanStatus::Feasible, provenance)?;
        let status = if plan.gap().unwrap_or(0.0) <= opts.epsilon {
            PlanStatus::Optimal
        } else {
            PlanStatus::Feasible
        };
        return Ok((ConstructionPlan { status, ..plan }, state));
    }
    if state.exit == SearchExit::Stalled {
        warn!("dual search stopped after {} evaluations without meeting the tolerance", state.evaluations());
    }

    let mut region = last.selected.clone();
    if opts.widen && last.cost < budget {
        region = over.selected.clone();
    }
    let (sel, status) = restricted_milp(&engine, &region, &under.selected, opts)?;
    state.restricted = Some(status);
    let mut plan = finish(&sel, bound, PlanStatus::Feasible, provenance)?;
    plan.status = match status {
        MilpStatus::Interrupted => PlanStatus::Interrupted,
        _ if plan.gap().unwrap_or(0.0) <= opts.epsilon => PlanStatus::Optimal,
        _ => PlanStatus::Feasible,
    };
    Ok((plan, state))
}

/// Best budget-feasible selection inside `region`; `fallback` is a known
/// feasible selection inside the region.
fn restricted_milp(
    engine: &LagrangianEngine,
    region: &[bool],
    fallback: &[bool],
    opts: &LagrangianOptions,
) -> Result<(Vec<bool>, MilpStatus)> {
    let sub = LagrangianEngine::from_structure(
        engine.structure().restricted(region),
        engine.costs().to_vec(),
        engine.budget(),
    )?;
    let mut relax = ClosureRelaxation::new(sub, region);
    let milp = MilpOptions {
        mip_gap: opts.mip_gap,
        time_limit: opts.time_limit,
        node_limit: opts.node_limit,
        ..Default::default()
    };
    let result = solve_with_relaxation(&mut relax, milp)?;
    debug!(
        "restricted search over {} segments: {:?}, {} nodes",
        region.iter().filter(|&&r| r).count(),
        result.status,
        result.nodes
    );
    let mut best = fallback.to_vec();
    if let Some(values) = &result.incumbent {
        let cand = relax.selection(values);
        if engine.structure().value(&cand) >= engine.structure().value(&best) {
            best = cand;
        }
    }
    Ok((best, result.status))
}
