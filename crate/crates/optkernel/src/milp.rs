//! Branch-and-bound for maximization MILPs.
//!
//! The search is generic over a [`Relaxation`]: anything that can bound a node
//! given bounds on the integer variables. [`LpRelaxation`] is the dense-simplex
//! implementation used for [`IntegerModel`]s; it keeps one tableau alive and
//! warm-starts every node with the dual simplex.
//!
//! Node selection is a depth-first dive until the first incumbent, then best
//! bound (ties: deeper node, then earlier creation). Branching picks the most
//! fractional variable, ties broken by larger priority and then lower index.

use std::time::{Duration, Instant};

use log::debug;

use crate::error::KernelError;
use crate::lp::{LpStatus, Simplex, SimplexOptions};
use crate::model::IntegerModel;

#[derive(Debug, Clone, PartialEq)]
pub enum RelaxOutcome {
    Infeasible,
    Unbounded,
    /// `values` is indexed like the relaxation's variable space.
    Solved { bound: f64, values: Vec<f64> },
}

pub trait Relaxation {
    /// Indices (into the value vector) of the integer-restricted variables.
    fn integer_vars(&self) -> Vec<usize>;

    /// Root bounds of the integer variables, parallel to [`Relaxation::integer_vars`].
    fn root_bounds(&self) -> Vec<(f64, f64)>;

    /// Tie-break weight when two variables are equally fractional.
    fn priority(&self, _var: usize) -> f64 {
        0.0
    }

    /// Bound the node whose integer variables are restricted to `bounds`.
    fn solve(&mut self, bounds: &[(f64, f64)]) -> Result<RelaxOutcome, KernelError>;

    /// Optional primal heuristic: an integral feasible point and its objective.
    fn heuristic(&mut self, _bounds: &[(f64, f64)], _relaxed: &[f64]) -> Option<(f64, Vec<f64>)> {
        None
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MilpOptions {
    /// Relative gap `(bound - incumbent) / |bound|` at which the search stops.
    pub mip_gap: f64,
    pub abs_tol: f64,
    pub int_tol: f64,
    pub time_limit: Option<Duration>,
    pub node_limit: Option<usize>,
    /// Run the relaxation's heuristic every this many nodes (root always).
    pub heuristic_every: usize,
}

impl Default for MilpOptions {
    fn default() -> Self {
        Self {
            mip_gap: 1e-9,
            abs_tol: 1e-9,
            int_tol: 1e-6,
            time_limit: None,
            node_limit: None,
            heuristic_every: 25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Time or node limit reached; incumbent (if any) and bound are still valid.
    Interrupted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpResult {
    pub status: MilpStatus,
    pub incumbent: Option<Vec<f64>>,
    pub objective: Option<f64>,
    pub bound: f64,
    pub gap: f64,
    pub nodes: usize,
    pub branches: usize,
}

impl MilpResult {
    fn finish(status: MilpStatus, incumbent: Option<(f64, Vec<f64>)>, bound: f64, nodes: usize, branches: usize) -> Self {
        let (objective, incumbent) = match incumbent {
            Some((v, x)) => (Some(v), Some(x)),
            None => (None, None),
        };
        let gap = match objective {
            Some(z) => relative_gap(bound, z),
            None => f64::INFINITY,
        };
        Self {
            status,
            incumbent,
            objective,
            bound,
            gap,
            nodes,
            branches,
        }
    }
}

/// `(bound - value) / max(|bound|, eps)`.
pub(crate) fn relative_gap(bound: f64, value: f64) -> f64 {
    ((bound - value) / bound.abs().max(1e-12)).max(0.0)
}

struct Node {
    bounds: Vec<(f64, f64)>,
    parent_bound: f64,
    depth: usize,
    seq: usize,
}

pub struct BranchAndBound {
    pub options: MilpOptions,
}

impl BranchAndBound {
    pub fn new(options: MilpOptions) -> Self {
        Self { options }
    }

    pub fn run<R: Relaxation>(&self, relax: &mut R) -> Result<MilpResult, KernelError> {
        let opts = self.options;
        let start = Instant::now();
        let ivars = relax.integer_vars();
        let mut open = vec![Node {
            bounds: relax.root_bounds(),
            parent_bound: f64::INFINITY,
            depth: 0,
            seq: 0,
        }];
        let mut seq = 1;
        let mut incumbent: Option<(f64, Vec<f64>)> = None;
        // largest bound among nodes discarded within tolerance of the incumbent
        let mut pruned_bound = f64::NEG_INFINITY;
        let mut nodes = 0usize;
        let mut branches = 0usize;

        let prune_tol = |inc: f64| opts.abs_tol.max(opts.abs_tol * inc.abs());

        while !open.is_empty() {
            let inc_val = incumbent.as_ref().map(|(v, _)| *v);
            let open_bound = open.iter().map(|n| n.parent_bound).fold(f64::NEG_INFINITY, f64::max);
            if let Some(z) = inc_val {
                let global = open_bound.max(pruned_bound).max(z);
                if relative_gap(global, z) <= opts.mip_gap || global - z <= prune_tol(z) {
                    debug!("gap closed after {nodes} nodes");
                    return Ok(MilpResult::finish(MilpStatus::Optimal, incumbent, global, nodes, branches));
                }
            }
            let limit_hit = opts.time_limit.is_some_and(|t| start.elapsed() >= t)
                || opts.node_limit.is_some_and(|n| nodes >= n);
            if limit_hit {
                let global = match inc_val {
                    Some(z) => open_bound.max(pruned_bound).max(z),
                    None => open_bound.max(pruned_bound),
                };
                return Ok(MilpResult::finish(MilpStatus::Interrupted, incumbent, global, nodes, branches));
            }

            let pick = if incumbent.is_none() {
                open.len() - 1
            } else {
                let mut best = 0;
                for (k, n) in open.iter().enumerate() {
                    let b = &open[best];
                    let better = n.parent_bound > b.parent_bound
                        || (n.parent_bound == b.parent_bound
                            && (n.depth > b.depth || (n.depth == b.depth && n.seq < b.seq)));
                    if better {
                        best = k;
                    }
                }
                best
            };
            let node = open.swap_remove(pick);
            if let Some(z) = inc_val {
                if node.parent_bound <= z + prune_tol(z) {
                    pruned_bound = pruned_bound.max(node.parent_bound.min(z + prune_tol(z)));
                    continue;
                }
            }
            nodes += 1;
            let (bound, values) = match relax.solve(&node.bounds)? {
                RelaxOutcome::Infeasible => continue,
                RelaxOutcome::Unbounded => {
                    return Ok(MilpResult::finish(MilpStatus::Unbounded, None, f64::INFINITY, nodes, branches));
                }
                RelaxOutcome::Solved { bound, values } => (bound, values),
            };
            let bound = bound.min(node.parent_bound);
            if let Some(z) = inc_val {
                if bound <= z + prune_tol(z) {
                    pruned_bound = pruned_bound.max(bound);
                    continue;
                }
            }

            // most fractional
            let mut branch: Option<(usize, f64, f64)> = None;
            for (k, &j) in ivars.iter().enumerate() {
                let v = values[j];
                let frac = (v - v.round()).abs();
                if frac <= opts.int_tol {
                    continue;
                }
                let better = match branch {
                    None => true,
                    Some((bk, bf, _)) => {
                        if frac > bf + 1e-9 {
                            true
                        } else if frac >= bf - 1e-9 {
                            let (p, bp) = (relax.priority(j), relax.priority(ivars[bk]));
                            p > bp || (p == bp && j < ivars[bk])
                        } else {
                            false
                        }
                    }
                };
                if better {
                    branch = Some((k, frac, v));
                }
            }

            let Some((k, _, v)) = branch else {
                if incumbent.as_ref().is_none_or(|(z, _)| bound > *z) {
                    let mut x = values;
                    for &j in &ivars {
                        x[j] = x[j].round();
                    }
                    incumbent = Some((bound, x));
                }
                continue;
            };

            if nodes == 1 || (opts.heuristic_every > 0 && nodes % opts.heuristic_every == 0) {
                if let Some((hv, hx)) = relax.heuristic(&node.bounds, &values) {
                    if incumbent.as_ref().is_none_or(|(z, _)| hv > *z) {
                        debug!("heuristic incumbent {hv} at node {nodes}");
                        incumbent = Some((hv, hx));
                    }
                }
            }

            branches += 1;
            let mut down = node.bounds.clone();
            down[k].1 = v.floor();
            let mut up = node.bounds;
            up[k].0 = v.ceil();
            // pushed last = explored first while diving
            open.push(Node {
                bounds: down,
                parent_bound: bound,
                depth: node.depth + 1,
                seq,
            });
            open.push(Node {
                bounds: up,
                parent_bound: bound,
                depth: node.depth + 1,
                seq: seq + 1,
            });
            seq += 2;
        }

        Ok(match incumbent {
            Some((z, x)) => {
                let bound = pruned_bound.max(z);
                MilpResult::finish(MilpStatus::Optimal, Some((z, x)), bound, nodes, branches)
            }
            None => MilpResult::finish(MilpStatus::Infeasible, None, f64::NEG_INFINITY, nodes, branches),
        })
    }
}

/// LP relaxation of an [`IntegerModel`] backed by a warm-started [`Simplex`].
pub struct LpRelaxation {
    simplex: Simplex,
    integer: Vec<usize>,
    root: Vec<(f64, f64)>,
    objective: Vec<f64>,
}

impl LpRelaxation {
    pub fn new(model: &IntegerModel, options: SimplexOptions) -> Result<Self, KernelError> {
        model.validate()?;
        let simplex = Simplex::new(&model.lp, options)?;
        let integer: Vec<usize> = model.integer.iter().map(|v| v.0).collect();
        let root = integer
            .iter()
            .map(|&j| {
                let v = &model.lp.variables[j];
                (v.lower.ceil(), v.upper.floor())
            })
            .collect();
        let objective = model.lp.variables.iter().map(|v| v.objective).collect();
        Ok(Self {
            simplex,
            integer,
            root,
            objective,
        })
    }
}

impl Relaxation for LpRelaxation {
    fn integer_vars(&self) -> Vec<usize> {
        self.integer.clone()
    }

    fn root_bounds(&self) -> Vec<(f64, f64)> {
        self.root.clone()
    }

    fn priority(&self, var: usize) -> f64 {
        self.objective[var]
    }

    fn solve(&mut self, bounds: &[(f64, f64)]) -> Result<RelaxOutcome, KernelError> {
        if bounds.iter().any(|(lo, hi)| lo > hi) {
            return Ok(RelaxOutcome::Infeasible);
        }
        for (&j, &(lo, hi)) in self.integer.iter().zip(bounds) {
            if self.simplex.bounds(j) != (lo, hi) {
                self.simplex.set_bounds(j, lo, hi);
            }
        }
        if self.simplex.pivots_since_refactor() > 4 * (self.simplex.num_structural() + 50) {
            self.simplex.refactor()?;
        }
        Ok(match self.simplex.solve()? {
            LpStatus::Optimal => RelaxOutcome::Solved {
                bound: self.simplex.objective(),
                values: self.simplex.values().to_vec(),
            },
            LpStatus::Infeasible => RelaxOutcome::Infeasible,
            LpStatus::Unbounded => RelaxOutcome::Unbounded,
        })
    }
}

/// Solve an [`IntegerModel`] by LP-based branch-and-bound.
pub fn solve_milp(model: &IntegerModel, options: MilpOptions) -> Result<MilpResult, KernelError> {
    let mut relax = LpRelaxation::new(model, SimplexOptions::default())?;
    let mut result = solve_with_relaxation(&mut relax, options)?;
    if let Some(x) = &result.incumbent {
        result.objective = Some(model.lp.objective_value(x));
        if let Some(z) = result.objective {
            result.bound = result.bound.max(z);
            result.gap = relative_gap(result.bound, z);
        }
    }
    Ok(result)
}

pub fn solve_with_relaxation<R: Relaxation>(relax: &mut R, options: MilpOptions) -> Result<MilpResult, KernelError> {
    BranchAndBound::new(options).run(relax)
}
