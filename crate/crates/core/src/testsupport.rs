//! Exhaustive oracles and random instance generators for tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::choice::{approximation_regret, eval_choice_objective, generate_routes, ll_lin_solve, net_utilities, objective_regret, ChoiceContext, OdGroup};
use crate::error::{Error, Result};
use crate::ingest::{synth_instance, synth_network, synth_trajectories};
use crate::model::{build_instance, ContinuityFunction, PlanningInstance, RoadNetwork, RoadSegment, Trajectory, UtilitySpec};

pub const MAX_PLAN_ORACLE: usize = 20;
pub const MAX_CHOICE_ORACLE: usize = 14;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub value: f64,
    /// Every budget-feasible plan within `1e-9` (relative) of the optimum, as sorted indices.
    pub optimal: Vec<Vec<usize>>,
    pub enumerated: usize,
}

impl OracleResult {
    pub fn is_optimal(&self, plan: &[usize]) -> bool {
        let mut p = plan.to_vec();
        p.sort_unstable();
        self.optimal.contains(&p)
    }
}

fn enumerate<F>(inst: &PlanningInstance, cap: usize, mut score: F) -> Result<OracleResult>
where
    F: FnMut(&[bool]) -> Result<f64>,
{
    let n = inst.num_segments();
    if n > cap {
        return Err(Error::TooLarge(format!("{n} segments exceed the oracle limit of {cap}")));
    }
    let costs = inst.costs();
    let limit = inst.budget + inst.budget_tolerance();
    let mut scored = Vec::new();
    let mut mask = vec![false; n];
    for bits in 0u64..(1u64 << n) {
        let mut cost = 0.0;
        for (i, m) in mask.iter_mut().enumerate() {
            *m = bits >> i & 1 == 1;
            if *m {
                cost += costs[i];
            }
        }
        if cost <= limit {
            scored.push((bits, score(&mask)?));
        }
    }
    let value = scored.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-9 * value.abs().max(1.0);
    let optimal = scored
        .iter()
        .filter(|s| s.1 >= value - tol)
        .map(|&(bits, _)| (0..n).filter(|&i| bits >> i & 1 == 1).collect())
        .collect();
    Ok(OracleResult {
        value,
        optimal,
        enumerated: 1 << n,
    })
}

/// Best budget-feasible plan by enumerating all `2^|V|` selections.
pub fn brute_force_plan(inst: &PlanningInstance) -> Result<OracleResult> {
    enumerate(inst, MAX_PLAN_ORACLE, |m| inst.objective_of_mask(m))
}

/// Best budget-feasible plan under logit route choice.
pub fn brute_force_choice(inst: &PlanningInstance, ctx: &ChoiceContext) -> Result<OracleResult> {
    enumerate(inst, MAX_CHOICE_ORACLE, |m| eval_choice_objective(inst, ctx, m))
}

/// `max S(x) - u (c(x) - B)` over all selections, ignoring the budget.
pub fn brute_force_dual(inst: &PlanningInstance, u: f64) -> Result<f64> {
    let n = inst.num_segments();
    if n > MAX_PLAN_ORACLE {
        return Err(Error::TooLarge(format!("{n} segments exceed the oracle limit of {MAX_PLAN_ORACLE}")));
    }
    let costs = inst.costs();
    let mut best = f64::NEG_INFINITY;
    let mut mask = vec![false; n];
    for bits in 0u64..(1u64 << n) {
        let mut cost = 0.0;
        for (i, m) in mask.iter_mut().enumerate() {
            *m = bits >> i & 1 == 1;
            if *m {
                cost += costs[i];
            }
        }
        best = best.max(inst.objective_of_mask(&mask)? - u * (cost - inst.budget));
    }
    Ok(best)
}

/// Path of `n` unit-length (1 m) segments `1..=n` with unit costs.
pub fn chain_network(n: usize) -> RoadNetwork {
    let segs = (1..=n)
        .map(|k| RoadSegment {
            id: k.to_string(),
            length_m: 1.0,
            cost: 1.0,
            geometry: None,
        })
        .collect();
    RoadNetwork::new(segs, (1..n).map(|k| (k - 1, k))).expect("chain is valid")
}

/// One trajectory over a chain of `n` unit-cost segments.
pub fn chain_instance(n: usize, utility: UtilitySpec, budget: f64) -> PlanningInstance {
    let t = Trajectory::new("r", (0..n).collect());
    build_instance(chain_network(n), vec![t], budget, utility).expect("chain instance is valid")
}

/// Convex nondecreasing run function: linear, power or a random convex table.
pub fn random_convex_function(rng: &mut impl Rng, max_size: usize) -> ContinuityFunction {
    match rng.gen_range(0..3) {
        0 => ContinuityFunction::Linear(rng.gen_range(0.0..3.0)),
        1 => ContinuityFunction::PowerAlpha(rng.gen_range(1.0..1.5)),
        _ => {
            let mut step = rng.gen_range(0.1..1.5);
            let mut v = 0.0;
            let mut table = Vec::with_capacity(max_size);
            for _ in 0..max_size.max(1) {
                v += step;
                table.push(v);
                step += rng.gen_range(0.0..0.8);
            }
            ContinuityFunction::Table(table)
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RandomInstanceSpec {
    pub max_segments: usize,
    pub max_trajectories: usize,
    pub mean_length: usize,
    /// Draw adjacency utilities as well as general ones.
    pub include_adjacency: bool,
    pub length_weighted: bool,
}

impl Default for RandomInstanceSpec {
    fn default() -> Self {
        Self {
            max_segments: 14,
            max_trajectories: 8,
            mean_length: 3,
            include_adjacency: true,
            length_weighted: false,
        }
    }
}

/// Small grid instance with random costs, weights, utility and budget.
pub fn random_instance(seed: u64, spec: &RandomInstanceSpec) -> PlanningInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // grids with at most max_segments edges
    let shapes: Vec<(usize, usize)> = (1..=spec.max_segments + 1)
        .flat_map(|r| (1..=spec.max_segments + 1).map(move |c| (r, c)))
        .filter(|&(r, c)| r * c >= 2 && r * (c - 1) + c * (r - 1) <= spec.max_segments && r * (c - 1) + c * (r - 1) >= 2)
        .collect();
    let (rows, cols) = shapes[rng.gen_range(0..shapes.len())];
    let grid = synth_network(rng.gen(), rows, cols, 1.0).expect("grid shape is valid");
    let segments: Vec<RoadSegment> = grid
        .network
        .segments()
        .iter()
        .map(|s| RoadSegment {
            cost: f64::from(rng.gen_range(1..=5u8)),
            ..s.clone()
        })
        .collect();
    let pairs: Vec<(usize, usize)> = grid.network.neighbors().iter().copied().collect();
    let network = RoadNetwork::new(segments, pairs).expect("same topology");
    let grid = crate::ingest::GridNetwork { network, ..grid };
    let count = rng.gen_range(1..=spec.max_trajectories.max(1));
    let trajs: Vec<Trajectory> = synth_trajectories(rng.gen(), &grid, count, spec.mean_length)
        .into_iter()
        .map(|t| {
            let w = f64::from(rng.gen_range(1..=3u8));
            t.with_weight(w)
        })
        .collect();
    let longest = trajs.iter().map(Trajectory::len).max().unwrap_or(1);
    let utility = if spec.include_adjacency && rng.gen_bool(0.25) {
        UtilitySpec::ac(rng.gen_range(0.0..3.0))
    } else {
        let f = match random_convex_function(&mut rng, grid.network.len().max(longest)) {
            // tables are indexed by size, which length weighting does not produce
            ContinuityFunction::Table(_) if spec.length_weighted => ContinuityFunction::PowerAlpha(1.2),
            f => f,
        };
        UtilitySpec::Gu {
            f,
            length_weighted: spec.length_weighted,
        }
    };
    let total = grid.network.total_cost();
    let budget = (total * rng.gen_range(0.15..0.85)).round();
    build_instance(grid.network, trajs, budget, utility).expect("generated instance is valid")
}

/// Route-choice context over the instance's network: up to `max_ods` OD
/// pairs taken from trajectories, each with up to `max_routes` shortest routes.
pub fn random_context(seed: u64, inst: &PlanningInstance, max_ods: usize, max_routes: usize, eta: f64) -> Result<ChoiceContext> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ods: Vec<OdGroup> = Vec::new();
    for t in &inst.trajectories {
        if ods.len() >= max_ods {
            break;
        }
        let (o, d) = t.od_key();
        if o == d || ods.iter().any(|g| (g.origin, g.destination) == (o, d)) {
            continue;
        }
        let k = rng.gen_range(1..=max_routes.max(1));
        let routes = generate_routes(&inst.network, (o, d), k, eta)?;
        ods.push(OdGroup {
            origin: o,
            destination: d,
            demand: f64::from(rng.gen_range(1..=5u8)),
            routes,
        });
    }
    Ok(ChoiceContext { ods, eta })
}

/// Mean LL-Lin regret at each `K` over random contexts on a 6x6 grid with a
/// random plan each: `(objective regret, error bound)` per entry of `ks`.
pub fn regret_suite(seeds: std::ops::Range<u64>, ks: &[usize], p_min: f64) -> Result<Vec<(f64, f64)>> {
    let mut totals = vec![(0.0, 0.0); ks.len()];
    let mut count = 0usize;
    for seed in seeds {
        let inst = synth_instance(seed, 6, 6, 100, 4)?;
        let ctx = random_context(seed, &inst, 12, 4, 2.0)?;
        if ctx.ods.is_empty() {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sel: Vec<bool> = (0..inst.num_segments()).map(|_| rng.gen_bool(0.5)).collect();
        let net = net_utilities(&inst, &ctx, &sel)?;
        for (t, &k) in totals.iter_mut().zip(ks) {
            let lin = ll_lin_solve(&net, k, p_min)?;
            t.0 += objective_regret(&ctx, &net, &lin.p);
            t.1 += approximation_regret(&ctx, &net, &lin.p);
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::Validation("regret suite produced no contexts".into()));
    }
    Ok(totals.into_iter().map(|(a, b)| (a / count as f64, b / count as f64)).collect())
}
