use crate::error::Result;
use crate::model::{evaluate_plan, ConstructionPlan, PlanStatus, PlanningInstance, Provenance};
use crate::utility::RunValuer;

const MIN_GAIN: f64 = 1e-12;

/// Marginal utilities kept current by re-scoring only the trajectories that
/// touch the last added segment.
struct Marginals<'a> {
    inst: &'a PlanningInstance,
    valuer: RunValuer,
    /// Trajectories visiting each segment, deduplicated.
    visits: Vec<Vec<usize>>,
    selected: Vec<bool>,
    /// Current weighted utility of each trajectory.
    traj_value: Vec<f64>,
    gain: Vec<f64>,
}

impl<'a> Marginals<'a> {
    fn new(inst: &'a PlanningInstance) -> Result<Self> {
        let n = inst.num_segments();
        let mut visits = vec![Vec::new(); n];
        for (t, traj) in inst.trajectories.iter().enumerate() {
            for &i in &traj.segments {
                if visits[i].last() != Some(&t) {
                    visits[i].push(t);
                }
            }
        }
        let mut m = Self {
            inst,
            valuer: RunValuer::for_instance(inst),
            visits,
            selected: vec![false; n],
            traj_value: vec![0.0; inst.trajectories.len()],
            gain: vec![0.0; n],
        };
        for i in 0..n {
            m.gain[i] = m.marginal(i)?;
        }
        Ok(m)
    }

    fn weighted(&self, t: usize) -> Result<f64> {
        let traj = &self.inst.trajectories[t];
        Ok(traj.weight * self.valuer.trajectory(&traj.segments, &self.selected)?)
    }

    fn marginal(&mut self, i: usize) -> Result<f64> {
        self.selected[i] = true;
        let mut g = 0.0;
        for k in 0..self.visits[i].len() {
            let t = self.visits[i][k];
            g += self.weighted(t)? - self.traj_value[t];
        }
        self.selected[i] = false;
        Ok(g)
    }

    fn add(&mut self, i: usize) -> Result<()> {
        self.selected[i] = true;
        let mut touched = Vec::new();
        for k in 0..self.visits[i].len() {
            let t = self.visits[i][k];
            self.traj_value[t] = self.weighted(t)?;
            touched.extend(self.inst.trajectories[t].segments.iter().copied());
        }
        touched.sort_unstable();
        touched.dedup();
        for j in touched {
            if !self.selected[j] {
                self.gain[j] = self.marginal(j)?;
            }
        }
        Ok(())
    }
}

/// Repeatedly adds the affordable segment with the best utility gain per unit
/// cost (ties: larger gain, then lower index) until nothing affordable helps.
pub fn greedy(inst: &PlanningInstance) -> Result<ConstructionPlan> {
    let costs = inst.costs();
    let limit = inst.budget + inst.budget_tolerance();
    let mut m = Marginals::new(inst)?;
    let mut spent = 0.0;
    loop {
        let mut best: Option<(f64, f64, usize)> = None;
        for (i, &c) in costs.iter().enumerate() {
            let g = m.gain[i];
            if m.selected[i] || g <= MIN_GAIN || spent + c > limit {
                continue;
            }
            let ratio = if c > 0.0 { g / c } else { f64::INFINITY };
            if best.is_none_or(|(r, bg, _)| ratio > r || (ratio == r && g > bg)) {
                best = Some((ratio, g, i));
            }
        }
        let Some((_, _, i)) = best else { break };
        spent += costs[i];
        m.add(i)?;
    }
    let selected: Vec<usize> = (0..costs.len()).filter(|&i| m.selected[i]).collect();
    let mut plan = evaluate_plan(inst, &selected)?;
    plan.status = PlanStatus::Feasible;
    plan.provenance = Provenance::new("greedy");
    Ok(plan)
}
