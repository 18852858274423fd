//! Branch-and-bound relaxation whose node bound is the budget-relaxed dual.
//!
//! For supermodular structures the dual equals the LP relaxation (the nesting
//! rows are totally unimodular), so each node is bounded by minimizing the
//! convex piecewise-linear `Phi` over `u` with a few cuts instead of a simplex
//! solve. The fractional point handed back is the convex combination of the
//! two optimal closures at the minimizer that spends the budget exactly.

use optkernel::{KernelError, RelaxOutcome, Relaxation};

use super::lagrangian::{DualEvaluation, LagrangianEngine};

const MAX_STEPS: usize = 200;

pub(crate) struct ClosureRelaxation {
    engine: LagrangianEngine,
    /// Segment index of each integer variable.
    vars: Vec<usize>,
    /// Segments outside the search region.
    excluded: Vec<usize>,
}

impl ClosureRelaxation {
    pub(crate) fn new(engine: LagrangianEngine, region: &[bool]) -> Self {
        let vars = (0..region.len()).filter(|&i| region[i]).collect();
        let excluded = (0..region.len()).filter(|&i| !region[i]).collect();
        Self {
            engine,
            vars,
            excluded,
        }
    }

    /// Segment mask of an integral variable vector.
    pub(crate) fn selection(&self, values: &[f64]) -> Vec<bool> {
        let mut mask = vec![false; self.engine.num_segments()];
        for (j, &i) in self.vars.iter().enumerate() {
            mask[i] = values[j] > 0.5;
        }
        mask
    }

    fn values_of(&self, mask: &[bool]) -> Vec<f64> {
        self.vars.iter().map(|&i| if mask[i] { 1.0 } else { 0.0 }).collect()
    }

    fn fixings(&self, bounds: &[(f64, f64)]) -> (Vec<usize>, Vec<usize>) {
        let mut fin = Vec::new();
        let mut fout = self.excluded.clone();
        for (j, &(lo, hi)) in bounds.iter().enumerate() {
            if lo > 0.5 {
                fin.push(self.vars[j]);
            } else if hi < 0.5 {
                fout.push(self.vars[j]);
            }
        }
        (fin, fout)
    }

    fn eval(&mut self, u: f64, fin: &[usize], fout: &[usize]) -> Result<Option<DualEvaluation>, KernelError> {
        self.engine.evaluate_with(u, fin, fout).map_err(|e| match e {
            crate::Error::Kernel(k) => k,
            other => KernelError::Numerical(other.to_string()),
        })
    }
}

impl Relaxation for ClosureRelaxation {
    fn integer_vars(&self) -> Vec<usize> {
        (0..self.vars.len()).collect()
    }

    fn root_bounds(&self) -> Vec<(f64, f64)> {
        vec![(0.0, 1.0); self.vars.len()]
    }

    fn priority(&self, var: usize) -> f64 {
        self.engine.structure().seg_weight[self.vars[var]]
    }

    fn solve(&mut self, bounds: &[(f64, f64)]) -> Result<RelaxOutcome, KernelError> {
        if bounds.iter().any(|(lo, hi)| lo > hi) {
            return Ok(RelaxOutcome::Infeasible);
        }
        let (fin, fout) = self.fixings(bounds);
        let budget = self.engine.budget();
        let tol = 1e-6 * budget;
        let costs = self.engine.costs();
        let fixed: f64 = fin.iter().map(|&i| costs[i]).sum();
        if fixed > budget + tol {
            return Ok(RelaxOutcome::Infeasible);
        }
        let free_min_cost = self
            .vars
            .iter()
            .filter(|i| !fin.contains(i) && !fout.contains(i))
            .map(|&i| costs[i])
            .filter(|&c| c > 0.0)
            .fold(f64::INFINITY, f64::min);

        let Some(mut over) = self.eval(0.0, &fin, &fout)? else {
            return Ok(RelaxOutcome::Infeasible);
        };
        if over.cost <= budget + tol {
            return Ok(RelaxOutcome::Solved {
                bound: over.phi,
                values: self.values_of(&over.selected),
            });
        }
        let s = self.engine.structure();
        let positive: f64 = s.seg_weight.iter().chain(s.aux.iter().map(|a| &a.weight)).filter(|&&w| w > 0.0).sum();
        let u_hi = (positive + 1.0) / free_min_cost;
        let Some(mut under) = self.eval(u_hi, &fin, &fout)? else {
            return Ok(RelaxOutcome::Infeasible);
        };
        if under.cost > budget + tol {
            return Err(KernelError::Numerical("dual bracket has no within-budget end".into()));
        }
        let mut bound = over.phi.min(under.phi);
        for _ in 0..MAX_STEPS {
            let u = (over.utility - under.utility) / (over.cost - under.cost);
            if !u.is_finite() || u <= over.u || u >= under.u {
                break;
            }
            let e = self.eval(u, &fin, &fout)?.expect("fixings already checked");
            bound = bound.min(e.phi);
            if (e.cost - budget).abs() <= tol {
                return Ok(RelaxOutcome::Solved {
                    bound: bound.max(e.utility),
                    values: self.values_of(&e.selected),
                });
            }
            let model = under.line_at(u);
            let done = e.phi <= model + 1e-9 * model.abs().max(1.0);
            if e.cost > budget {
                over = e;
            } else {
                under = e;
            }
            if done {
                break;
            }
        }
        let theta = ((budget - under.cost) / (over.cost - under.cost)).clamp(0.0, 1.0);
        let values = self
            .vars
            .iter()
            .map(|&i| theta * f64::from(u8::from(over.selected[i])) + (1.0 - theta) * f64::from(u8::from(under.selected[i])))
            .collect();
        Ok(RelaxOutcome::Solved { bound, values })
    }

    fn heuristic(&mut self, bounds: &[(f64, f64)], relaxed: &[f64]) -> Option<(f64, Vec<f64>)> {
        let (_, fout) = self.fixings(bounds);
        let n = self.engine.num_segments();
        let costs = self.engine.costs();
        let budget = self.engine.budget();
        let tol = 1e-6 * budget;
        let mut mask = vec![false; n];
        for (j, &i) in self.vars.iter().enumerate() {
            mask[i] = relaxed[j] > 1.0 - 1e-9;
        }
        let mut spent: f64 = (0..n).filter(|&i| mask[i]).map(|i| costs[i]).sum();
        if spent > budget + tol {
            return None;
        }
        let s = self.engine.structure();
        let mut value = s.value(&mask);
        loop {
            let mut best: Option<(f64, f64, usize)> = None;
            for &i in &self.vars {
                if mask[i] || fout.contains(&i) || spent + costs[i] > budget + tol {
                    continue;
                }
                mask[i] = true;
                let gain = s.value(&mask) - value;
                mask[i] = false;
                if gain <= 1e-12 {
                    continue;
                }
                let ratio = if costs[i] > 0.0 { gain / costs[i] } else { f64::INFINITY };
                if best.is_none_or(|(r, g, _)| ratio > r || (ratio == r && gain > g)) {
                    best = Some((ratio, gain, i));
                }
            }
            let Some((_, gain, i)) = best else { break };
            mask[i] = true;
            spent += costs[i];
            value += gain;
        }
        Some((s.value(&mask), self.values_of(&mask)))
    }
}
