//! Route choice under a multinomial logit model.
//!
//! Net route utility is `w = v_x(r) - vbar(r)`. The logit probabilities are the
//! unique minimizer of the entropy-regularized follower problem
//! `sum p ln p - p w` over each OD's simplex; replacing `p ln p` by the upper
//! envelope of its tangents at a breakpoint grid gives a linear program whose
//! error shrinks like `1/K`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashSet};

use log::warn;
use optkernel::{solve_lp, LinearModel, LpResult, Relation};

use crate::error::{Error, Result};
use crate::formulations::breakpoints;
use crate::model::{PlanningInstance, RoadNetwork};
use crate::utility::RunValuer;

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub segments: Vec<usize>,
    /// Exogenous disutility.
    pub vbar: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdGroup {
    pub origin: usize,
    pub destination: usize,
    pub demand: f64,
    pub routes: Vec<Route>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceContext {
    pub ods: Vec<OdGroup>,
    /// Disutility per km used by [`generate_routes`].
    pub eta: f64,
}

impl ChoiceContext {
    pub fn validate(&self, network: &RoadNetwork) -> Result<()> {
        for (m, od) in self.ods.iter().enumerate() {
            if od.routes.is_empty() {
                return Err(Error::Validation(format!("OD group {m} has no candidate route")));
            }
            if !(od.demand > 0.0 && od.demand.is_finite()) {
                return Err(Error::Validation(format!("OD group {m} has demand {}", od.demand)));
            }
            for (r, route) in od.routes.iter().enumerate() {
                if !route.vbar.is_finite() {
                    return Err(Error::Validation(format!("route {r} of OD group {m} has non-finite disutility")));
                }
                let t = crate::model::Trajectory::new(format!("od{m}/route{r}"), route.segments.clone());
                network.validate_trajectory(&t)?;
            }
        }
        Ok(())
    }

    pub fn num_routes(&self) -> usize {
        self.ods.iter().map(|o| o.routes.len()).sum()
    }

    /// Groups trajectories by (first, last) segment; each group gets its
    /// observed routes plus up to `k` shortest alternatives, priced at
    /// `eta` per km.
    pub fn from_instance(inst: &PlanningInstance, k: usize, eta: f64) -> Result<Self> {
        let mut groups: BTreeMap<(usize, usize), (f64, Vec<Vec<usize>>)> = BTreeMap::new();
        for t in &inst.trajectories {
            let g = groups.entry(t.od_key()).or_insert((0.0, Vec::new()));
            g.0 += t.weight;
            if !g.1.contains(&t.segments) {
                g.1.push(t.segments.clone());
            }
        }
        let mut ods = Vec::new();
        for ((o, d), (demand, observed)) in groups {
            if demand <= 0.0 {
                continue;
            }
            let mut paths = observed;
            if o != d {
                for r in generate_routes(&inst.network, (o, d), k, eta)? {
                    if !paths.contains(&r.segments) {
                        paths.push(r.segments);
                    }
                }
            }
            let routes = paths
                .into_iter()
                .map(|segments| Route {
                    vbar: eta * route_length_km(&inst.network, &segments),
                    segments,
                })
                .collect();
            ods.push(OdGroup {
                origin: o,
                destination: d,
                demand,
                routes,
            });
        }
        Ok(Self { ods, eta })
    }
}

pub fn route_length_km(network: &RoadNetwork, segments: &[usize]) -> f64 {
    segments.iter().map(|&i| network.segment(i).length_m).sum::<f64>() / 1000.0
}

/// `v_x(r)` for every route.
pub fn route_utilities(inst: &PlanningInstance, ctx: &ChoiceContext, selected: &[bool]) -> Result<Vec<Vec<f64>>> {
    let f = inst.utility.run_function();
    let lengths = inst.lengths_km();
    let longest = ctx.ods.iter().flat_map(|o| &o.routes).map(|r| r.segments.len()).max().unwrap_or(0);
    let valuer = RunValuer::new(&f, inst.utility.length_weighted().then_some(lengths.as_slice()), longest);
    ctx.ods
        .iter()
        .map(|od| od.routes.iter().map(|r| valuer.trajectory(&r.segments, selected)).collect())
        .collect()
}

/// `v_x(r) - vbar(r)` for every route.
pub fn net_utilities(inst: &PlanningInstance, ctx: &ChoiceContext, selected: &[bool]) -> Result<Vec<Vec<f64>>> {
    let v = route_utilities(inst, ctx, selected)?;
    Ok(ctx
        .ods
        .iter()
        .zip(v)
        .map(|(od, vs)| od.routes.iter().zip(vs).map(|(r, v)| v - r.vbar).collect())
        .collect())
}

/// Softmax per OD with max-shift stabilization.
pub fn mnl(net: &[Vec<f64>]) -> Vec<Vec<f64>> {
    net.iter()
        .map(|w| {
            let top = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = w.iter().map(|x| (x - top).exp()).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(|x| x / s).collect()
        })
        .collect()
}

pub fn mnl_probabilities(inst: &PlanningInstance, ctx: &ChoiceContext, selected: &[bool]) -> Result<Vec<Vec<f64>>> {
    Ok(mnl(&net_utilities(inst, ctx, selected)?))
}

fn xlnx(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        p * p.ln()
    }
}

/// Follower objective `sum p ln p + p (vbar - v_x)`.
pub fn ll_objective(p: &[Vec<f64>], net: &[Vec<f64>]) -> f64 {
    p.iter()
        .zip(net)
        .flat_map(|(ps, ws)| ps.iter().zip(ws))
        .map(|(&p, &w)| xlnx(p) - p * w)
        .sum()
}

/// Largest stationarity violation `|ln p + 1 - w - gamma_m|`, with each
/// `gamma_m` set to the mean of `ln p + 1 - w` over its routes.
pub fn kkt_residual(p: &[Vec<f64>], net: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0f64;
    for (ps, ws) in p.iter().zip(net) {
        let g: Vec<f64> = ps.iter().zip(ws).map(|(&p, &w)| p.ln() + 1.0 - w).collect();
        let gamma = g.iter().sum::<f64>() / g.len() as f64;
        for x in g {
            worst = worst.max((x - gamma).abs());
        }
    }
    worst
}

/// Upper-level objective `sum_m D_m sum_r p_mr w_mr`.
pub fn upper_objective(ctx: &ChoiceContext, p: &[Vec<f64>], net: &[Vec<f64>]) -> f64 {
    ctx.ods
        .iter()
        .zip(p.iter().zip(net))
        .map(|(od, (ps, ws))| od.demand * ps.iter().zip(ws).map(|(p, w)| p * w).sum::<f64>())
        .sum()
}

/// Exact planning objective of a selection: logit probabilities, then the
/// demand-weighted expected net utility.
pub fn eval_choice_objective(inst: &PlanningInstance, ctx: &ChoiceContext, selected: &[bool]) -> Result<f64> {
    let net = net_utilities(inst, ctx, selected)?;
    Ok(upper_objective(ctx, &mnl(&net), &net))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlLinSolution {
    pub p: Vec<Vec<f64>>,
    pub omega: Vec<Vec<f64>>,
    /// Dual of each OD's simplex row.
    pub gamma: Vec<f64>,
    /// Dual of each tangent row, `[od][route][piece]`.
    pub rho: Vec<Vec<Vec<f64>>>,
    pub primal_value: f64,
    pub dual_value: f64,
    pub breakpoints: Vec<f64>,
}

/// Solves the piecewise-linear follower problem, one LP per OD group since
/// the groups share no rows.
pub fn ll_lin_solve(net: &[Vec<f64>], k: usize, p_min: f64) -> Result<LlLinSolution> {
    let bp = breakpoints(k, p_min)?;
    let mut out = LlLinSolution {
        p: Vec::with_capacity(net.len()),
        omega: Vec::with_capacity(net.len()),
        gamma: Vec::with_capacity(net.len()),
        rho: Vec::with_capacity(net.len()),
        primal_value: 0.0,
        dual_value: 0.0,
        breakpoints: Vec::new(),
    };
    for (m, ws) in net.iter().enumerate() {
        let mut lp = LinearModel::new();
        let mut vars = Vec::with_capacity(ws.len());
        let mut piece_rows = Vec::with_capacity(ws.len());
        for (r, &w) in ws.iter().enumerate() {
            // maximize the negated follower objective
            let p = lp.add_var(format!("p_{m}_{r}"), 0.0, f64::INFINITY, w);
            let om = lp.add_var(format!("w_{m}_{r}"), f64::NEG_INFINITY, f64::INFINITY, -1.0);
            let rows: Vec<usize> = bp
                .iter()
                .enumerate()
                .map(|(kk, &pk)| {
                    lp.add_constraint(
                        format!("piece_{m}_{r}_{kk}"),
                        vec![(om, 1.0), (p, -(pk.ln() + 1.0))],
                        Relation::Ge,
                        -pk,
                    )
                })
                .collect();
            piece_rows.push(rows);
            vars.push((p, om));
        }
        let simplex = lp.add_constraint(format!("simplex_{m}"), vars.iter().map(|&(p, _)| (p, 1.0)).collect(), Relation::Eq, 1.0);
        let sol = match solve_lp(&lp)? {
            LpResult::Optimal(s) => s,
            other => return Err(Error::Validation(format!("follower LP of OD group {m} not optimal: {other:?}"))),
        };
        let gamma = -sol.duals[simplex];
        let rho: Vec<Vec<f64>> = piece_rows
            .iter()
            .map(|rows| rows.iter().map(|&i| (-sol.duals[i]).max(0.0)).collect())
            .collect();
        out.primal_value -= sol.value;
        out.dual_value += gamma - rho.iter().map(|pieces| pieces.iter().zip(&bp).map(|(r, pk)| r * pk).sum::<f64>()).sum::<f64>();
        out.p.push(vars.iter().map(|&(p, _)| sol.primal[p.0].max(0.0)).collect());
        out.omega.push(vars.iter().map(|&(_, o)| sol.primal[o.0]).collect());
        out.gamma.push(gamma);
        out.rho.push(rho);
    }
    out.breakpoints = bp;
    Ok(out)
}

/// `sum_m D_m sum_r |p - p'| |w|`, the objective error bound of a probability
/// approximation `p'` against the logit `p`.
pub fn approximation_regret(ctx: &ChoiceContext, net: &[Vec<f64>], approx: &[Vec<f64>]) -> f64 {
    let exact = mnl(net);
    ctx.ods
        .iter()
        .enumerate()
        .map(|(m, od)| {
            od.demand
                * (0..od.routes.len())
                    .map(|r| (exact[m][r] - approx[m][r]).abs() * net[m][r].abs())
                    .sum::<f64>()
        })
        .sum()
}

/// Change in the upper-level objective when the logit probabilities are
/// replaced by `approx`.
pub fn objective_regret(ctx: &ChoiceContext, net: &[Vec<f64>], approx: &[Vec<f64>]) -> f64 {
    (upper_objective(ctx, approx, net) - upper_objective(ctx, &mnl(net), net)).abs()
}

#[derive(PartialEq)]
struct Label(f64, usize);

impl Eq for Label {}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

/// Shortest segment path by total length (both end segments included),
/// avoiding `banned` segments and `banned_steps`.
fn shortest_path(
    network: &RoadNetwork,
    from: usize,
    to: usize,
    banned: &HashSet<usize>,
    banned_steps: &HashSet<(usize, usize)>,
) -> Option<(f64, Vec<usize>)> {
    if banned.contains(&from) || banned.contains(&to) {
        return None;
    }
    let n = network.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut prev = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    dist[from] = network.segment(from).length_m;
    heap.push(Label(dist[from], from));
    while let Some(Label(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        if u == to {
            break;
        }
        for &v in network.adjacent(u) {
            if banned.contains(&v) || banned_steps.contains(&(u, v)) {
                continue;
            }
            let nd = d + network.segment(v).length_m;
            if nd < dist[v] {
                dist[v] = nd;
                prev[v] = u;
                heap.push(Label(nd, v));
            }
        }
    }
    if !dist[to].is_finite() {
        return None;
    }
    let mut path = vec![to];
    while *path.last().unwrap() != from {
        path.push(prev[*path.last().unwrap()]);
    }
    path.reverse();
    Some((dist[to], path))
}

/// Up to `k` shortest simple segment paths by length (Yen's algorithm), each
/// priced `vbar = eta * length_km`.
pub fn generate_routes(network: &RoadNetwork, od: (usize, usize), k: usize, eta: f64) -> Result<Vec<Route>> {
    let (o, d) = od;
    let none = HashSet::new();
    let Some(first) = shortest_path(network, o, d, &none, &HashSet::new()) else {
        return Err(Error::Disconnected {
            origin: network.segment(o).id.clone(),
            destination: network.segment(d).id.clone(),
        });
    };
    let mut found: Vec<(f64, Vec<usize>)> = vec![first];
    // candidates ordered by (length, path) for determinism
    let mut candidates: BTreeSet<(u64, Vec<usize>)> = BTreeSet::new();
    let len_of = |p: &[usize]| p.iter().map(|&i| network.segment(i).length_m).sum::<f64>();
    while found.len() < k {
        let last = found.last().unwrap().1.clone();
        for spur in 0..last.len().saturating_sub(1) {
            let root = &last[..=spur];
            let mut banned_steps = HashSet::new();
            for (_, p) in &found {
                if p.len() > spur + 1 && p[..=spur] == *root {
                    banned_steps.insert((p[spur], p[spur + 1]));
                }
            }
            let banned: HashSet<usize> = root[..spur].iter().copied().collect();
            if let Some((_, tail)) = shortest_path(network, last[spur], d, &banned, &banned_steps) {
                let mut path = root[..spur].to_vec();
                path.extend(tail);
                if !found.iter().any(|(_, p)| *p == path) {
                    candidates.insert((len_of(&path).to_bits(), path));
                }
            }
        }
        let Some(best) = candidates.pop_first() else {
            break;
        };
        found.push((f64::from_bits(best.0), best.1));
    }
    if found.len() < k {
        warn!(
            "only {} simple routes between {} and {} (asked for {k})",
            found.len(),
            network.segment(o).id,
            network.segment(d).id
        );
    }
    Ok(found
        .into_iter()
        .map(|(len, segments)| Route {
            vbar: eta * len / 1000.0,
            segments,
        })
        .collect())
}
