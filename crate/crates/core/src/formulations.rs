//! MILP builders.
//!
//! Both fixed-route utilities share one shape: segment variables `x_i` with a
//! linear reward, and auxiliary variables `y` with a nonnegative reward (for
//! convex utilities) bounded above by exactly two other variables. That shape
//! is captured once as a [`ClosureStructure`]; the MILPs and the Lagrangian
//! subproblems are both generated from it.

use std::collections::HashMap;

use optkernel::{IntegerModel, LinearModel, Relation, VarId};

use crate::choice::ChoiceContext;
use crate::error::{Error, Result};
use crate::model::{PlanningInstance, UtilitySpec};
use crate::utility::{beta_coefficients, canonical_key, SublistFamily};

#[derive(Debug, Clone, PartialEq)]
pub enum AuxLabel {
    /// Adjacency reward of a neighbor pair.
    Pair(usize, usize),
    /// Contiguous sublist, canonical segment tuple.
    Sublist(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuxNode {
    pub weight: f64,
    /// Node indices (segments first, then auxiliaries) this node is bounded by.
    pub children: [usize; 2],
    /// Distinct segments covered by the node.
    pub members: Vec<usize>,
    pub label: AuxLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosureStructure {
    pub seg_weight: Vec<f64>,
    pub aux: Vec<AuxNode>,
}

impl ClosureStructure {
    pub fn num_segments(&self) -> usize {
        self.seg_weight.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.seg_weight.len() + self.aux.len()
    }

    pub fn from_instance(inst: &PlanningInstance) -> Result<Self> {
        match &inst.utility {
            UtilitySpec::Ac { lambda } => Ok(Self::adjacency(inst, *lambda)),
            UtilitySpec::Gu { .. } => Ok(Self::from_family(inst.num_segments(), &SublistFamily::from_instance(inst)?)),
        }
    }

    fn adjacency(inst: &PlanningInstance, lambda: f64) -> Self {
        let aux = if lambda == 0.0 {
            Vec::new()
        } else {
            inst.d_pair
                .iter()
                .filter(|(_, &d)| d > 0.0)
                .map(|(&(i, j), &d)| AuxNode {
                    weight: lambda * d,
                    children: [i, j],
                    members: vec![i, j],
                    label: AuxLabel::Pair(i, j),
                })
                .collect()
        };
        Self {
            seg_weight: inst.d_seg.clone(),
            aux,
        }
    }

    /// Singletons become segment weights; longer sublists become auxiliaries.
    pub fn from_family(n_segments: usize, fam: &SublistFamily) -> Self {
        let mut seg_weight = vec![0.0; n_segments];
        let mut node_of = vec![usize::MAX; fam.len()];
        let mut next = n_segments;
        for (k, e) in fam.entries().iter().enumerate() {
            if e.key.len() == 1 {
                seg_weight[e.key[0]] += e.beta;
                node_of[k] = e.key[0];
            } else {
                node_of[k] = next;
                next += 1;
            }
        }
        let mut aux = Vec::with_capacity(next - n_segments);
        for (k, e) in fam.entries().iter().enumerate() {
            if let Some((a, b)) = fam.children(k) {
                let mut members = e.key.clone();
                members.sort_unstable();
                members.dedup();
                aux.push(AuxNode {
                    weight: e.beta,
                    children: [node_of[a], node_of[b]],
                    members,
                    label: AuxLabel::Sublist(e.key.clone()),
                });
            }
        }
        Self { seg_weight, aux }
    }

    /// True when every auxiliary reward is nonnegative, so the nesting rows
    /// alone pin each `y` to the product of its members at an optimum.
    pub fn is_supermodular(&self) -> bool {
        self.aux.iter().all(|a| a.weight >= -1e-12)
    }

    /// Structure over the `allowed` segments only: other segments keep their
    /// slot with zero weight and every auxiliary touching them is dropped.
    pub fn restricted(&self, allowed: &[bool]) -> Self {
        let n = self.num_segments();
        let mut new_idx: Vec<usize> = (0..n).collect();
        new_idx.resize(self.num_nodes(), usize::MAX);
        let mut aux = Vec::new();
        for (k, a) in self.aux.iter().enumerate() {
            if a.members.iter().all(|&i| allowed[i]) {
                new_idx[n + k] = n + aux.len();
                aux.push(AuxNode {
                    children: [new_idx[a.children[0]], new_idx[a.children[1]]],
                    ..a.clone()
                });
            }
        }
        let seg_weight = self
            .seg_weight
            .iter()
            .zip(allowed)
            .map(|(&w, &ok)| if ok { w } else { 0.0 })
            .collect();
        Self { seg_weight, aux }
    }

    /// Objective of a 0/1 segment selection, evaluated through the structure.
    pub fn value(&self, selected: &[bool]) -> f64 {
        let n = self.num_segments();
        let mut on: Vec<bool> = selected.to_vec();
        on.resize(self.num_nodes(), false);
        let mut v: f64 = (0..n).filter(|&i| selected[i]).map(|i| self.seg_weight[i]).sum();
        for (k, a) in self.aux.iter().enumerate() {
            // children always precede parents
            let o = on[a.children[0]] && on[a.children[1]];
            on[n + k] = o;
            if o {
                v += a.weight;
            }
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VarRole {
    Segment(usize),
    Aux(usize),
    Prob { od: usize, route: usize },
    Omega { od: usize, route: usize },
    Gamma { od: usize },
    Rho { od: usize, route: usize, piece: usize },
    Zeta { od: usize, route: usize, sublist: usize },
    Phi { od: usize, route: usize },
}

/// Route-choice variable indices, `[od][route]` shaped.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChoiceVars {
    pub p: Vec<Vec<VarId>>,
    pub omega: Vec<Vec<VarId>>,
    pub phi: Vec<Vec<VarId>>,
    pub gamma: Vec<VarId>,
    pub rho: Vec<Vec<Vec<VarId>>>,
    /// `(sublist index, variable)` per route.
    pub zeta: Vec<Vec<Vec<(usize, VarId)>>>,
    /// Row index of the strong-duality equality.
    pub strong_duality_row: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VariableMap {
    /// `x_i`, absent for segments that cannot matter.
    pub x: Vec<Option<VarId>>,
    pub aux: Vec<VarId>,
    pub aux_labels: Vec<AuxLabel>,
    pub choice: Option<ChoiceVars>,
    pub roles: Vec<VarRole>,
    pub budget_row: usize,
}

impl VariableMap {
    pub fn role(&self, v: VarId) -> VarRole {
        self.roles[v.0]
    }

    /// Segments whose `x` is 1 in a solution vector.
    pub fn selected(&self, values: &[f64]) -> Vec<usize> {
        self.x
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.filter(|v| values[v.0] > 0.5).map(|_| i))
            .collect()
    }
}

fn add_var(lp: &mut LinearModel, roles: &mut Vec<VarRole>, role: VarRole, name: String, lo: f64, hi: f64, obj: f64) -> VarId {
    roles.push(role);
    lp.add_var(name, lo, hi, obj)
}

/// Segment and auxiliary variables with nesting rows; segments outside
/// `allowed` are left out together with every auxiliary that covers them.
fn structure_model(
    s: &ClosureStructure,
    inst: &PlanningInstance,
    allowed: Option<&[bool]>,
) -> (IntegerModel, VariableMap) {
    let n = s.num_segments();
    let mut m = IntegerModel::new(LinearModel::new());
    let mut map = VariableMap {
        x: vec![None; n],
        ..Default::default()
    };
    let seg_ok = |i: usize| allowed.is_none_or(|a| a[i]);
    for i in 0..n {
        if seg_ok(i) {
            let id = &inst.network.segment(i).id;
            let v = add_var(&mut m.lp, &mut map.roles, VarRole::Segment(i), format!("x_{id}"), 0.0, 1.0, s.seg_weight[i]);
            m.integer.push(v);
            map.x[i] = Some(v);
        }
    }
    let mut node_var: Vec<Option<VarId>> = map.x.clone();
    node_var.resize(s.num_nodes(), None);
    let supermodular = s.is_supermodular();
    for (k, a) in s.aux.iter().enumerate() {
        if !a.members.iter().all(|&i| seg_ok(i)) {
            continue;
        }
        let v = add_var(&mut m.lp, &mut map.roles, VarRole::Aux(k), format!("y_{k}"), 0.0, 1.0, a.weight);
        node_var[n + k] = Some(v);
        map.aux.push(v);
        map.aux_labels.push(a.label.clone());
        let mut children = a.children;
        children.sort_unstable();
        let children: Vec<usize> = if children[0] == children[1] { vec![children[0]] } else { children.to_vec() };
        for c in children {
            let cv = node_var[c].expect("children of a kept node are kept");
            m.lp.add_constraint(format!("nest_{k}_{c}"), vec![(v, 1.0), (cv, -1.0)], Relation::Le, 0.0);
        }
        if !supermodular && a.weight < 0.0 {
            let mut terms = vec![(v, 1.0)];
            terms.extend(a.members.iter().map(|&i| (map.x[i].expect("member kept"), -1.0)));
            m.lp.add_constraint(format!("cover_{k}"), terms, Relation::Ge, 1.0 - a.members.len() as f64);
        }
    }
    let budget_terms = (0..n)
        .filter_map(|i| map.x[i].map(|v| (v, inst.network.segment(i).cost)))
        .collect();
    map.budget_row = m.lp.add_constraint("budget", budget_terms, Relation::Le, inst.budget);
    (m, map)
}

/// Adjacency model: `max sum d_i x_i + lambda sum d_ij y_ij`.
pub fn build_blac(inst: &PlanningInstance) -> Result<(IntegerModel, VariableMap)> {
    let UtilitySpec::Ac { lambda } = inst.utility else {
        return Err(Error::Unsupported("adjacency model needs an adjacency utility".into()));
    };
    let s = ClosureStructure::adjacency(inst, lambda);
    Ok(structure_model(&s, inst, None))
}

/// General-continuity model over merged sublists with nesting rows.
pub fn build_blgu(inst: &PlanningInstance) -> Result<(IntegerModel, VariableMap)> {
    if !matches!(inst.utility, UtilitySpec::Gu { .. }) {
        return Err(Error::Unsupported("general continuity model needs a general utility".into()));
    }
    let s = ClosureStructure::from_instance(inst)?;
    Ok(structure_model(&s, inst, None))
}

/// Model of either utility restricted to the `allowed` segments.
pub fn build_structure_model(
    s: &ClosureStructure,
    inst: &PlanningInstance,
    allowed: Option<&[bool]>,
) -> (IntegerModel, VariableMap) {
    structure_model(s, inst, allowed)
}

/// Geometric grid `p_min^((K-k)/(K-1))`, `k = 1..=K`.
pub fn breakpoints(k: usize, p_min: f64) -> Result<Vec<f64>> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 breakpoints, got {k}")));
    }
    if !(p_min > 0.0 && p_min < 1.0) {
        return Err(Error::Config(format!("p_min must lie in (0, 1), got {p_min}")));
    }
    Ok((1..=k)
        .map(|j| if j == k { 1.0 } else { p_min.powf((k - j) as f64 / (k - 1) as f64) })
        .collect())
}

/// Per-route linear utility `v_x(r) = sum beta_l y_l` over canonical sublists.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteExpansion {
    /// Canonical sublist keys shared by all routes.
    pub keys: Vec<Vec<usize>>,
    /// `[od][route]` -> `(key index, beta)`, duplicates merged.
    pub terms: Vec<Vec<Vec<(usize, f64)>>>,
}

impl RouteExpansion {
    pub fn new(inst: &PlanningInstance, ctx: &ChoiceContext) -> Result<Self> {
        let f = inst.utility.run_function();
        let lengths = inst.lengths_km();
        let lw = inst.utility.length_weighted().then_some(lengths.as_slice());
        let mut keys = Vec::new();
        let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut terms = Vec::with_capacity(ctx.ods.len());
        for od in &ctx.ods {
            let mut per_od = Vec::with_capacity(od.routes.len());
            for route in &od.routes {
                let mut acc: Vec<(usize, f64)> = Vec::new();
                for (g, beta) in beta_coefficients(&route.segments, &f, lw)? {
                    let key = canonical_key(&route.segments[g]);
                    let k = *index.entry(key.clone()).or_insert_with(|| {
                        keys.push(key);
                        keys.len() - 1
                    });
                    match acc.iter_mut().find(|(kk, _)| *kk == k) {
                        Some(e) => e.1 += beta,
                        None => acc.push((k, beta)),
                    }
                }
                per_od.push(acc);
            }
            terms.push(per_od);
        }
        Ok(Self { keys, terms })
    }

    pub fn child_keys(&self, k: usize) -> Option<(usize, usize)> {
        let key = &self.keys[k];
        if key.len() < 2 {
            return None;
        }
        let find = |s: &[usize]| {
            let c = canonical_key(s);
            self.keys.iter().position(|kk| *kk == c).expect("route sublists are closed under trimming")
        };
        Some((find(&key[1..]), find(&key[..key.len() - 1])))
    }
}

/// Single-level route-choice model: the upper level maximizes
/// `sum_m D_m sum_r (phi_mr - p_mr vbar_r)` while `p` is pinned to an optimum
/// of the piecewise-linear follower problem by primal feasibility, dual
/// feasibility and equality of the two objectives.
pub fn build_choice_milp(
    inst: &PlanningInstance,
    ctx: &ChoiceContext,
    k: usize,
    p_min: f64,
) -> Result<(IntegerModel, VariableMap)> {
    let bp = breakpoints(k, p_min)?;
    ctx.validate(&inst.network)?;
    let n = inst.num_segments();
    let exp = RouteExpansion::new(inst, ctx)?;

    let mut m = IntegerModel::new(LinearModel::new());
    let mut map = VariableMap {
        x: vec![None; n],
        ..Default::default()
    };
    let mut roles = Vec::new();

    // x for segments on some route, y for longer sublists (children first)
    let mut key_var: Vec<Option<VarId>> = vec![None; exp.keys.len()];
    let mut order: Vec<usize> = (0..exp.keys.len()).collect();
    order.sort_by_key(|&q| exp.keys[q].len());
    for &q in &order {
        let key = &exp.keys[q];
        if key.len() == 1 {
            let i = key[0];
            let id = &inst.network.segment(i).id;
            let v = add_var(&mut m.lp, &mut roles, VarRole::Segment(i), format!("x_{id}"), 0.0, 1.0, 0.0);
            m.integer.push(v);
            map.x[i] = Some(v);
            key_var[q] = Some(v);
        }
    }
    for &q in &order {
        let key = &exp.keys[q];
        if key.len() < 2 {
            continue;
        }
        let aux_idx = map.aux.len();
        let v = add_var(&mut m.lp, &mut roles, VarRole::Aux(aux_idx), format!("y_{q}"), 0.0, 1.0, 0.0);
        key_var[q] = Some(v);
        map.aux.push(v);
        map.aux_labels.push(AuxLabel::Sublist(key.clone()));
        let (a, b) = exp.child_keys(q).expect("long key");
        let mut kids = vec![a, b];
        kids.dedup();
        for c in kids {
            let cv = key_var[c].expect("children built first");
            m.lp.add_constraint(format!("nest_{q}_{c}"), vec![(v, 1.0), (cv, -1.0)], Relation::Le, 0.0);
        }
        let mut members = key.clone();
        members.sort_unstable();
        members.dedup();
        let mut terms = vec![(v, 1.0)];
        terms.extend(members.iter().map(|&i| (map.x[i].expect("segment var"), -1.0)));
        m.lp.add_constraint(format!("cover_{q}"), terms, Relation::Ge, 1.0 - members.len() as f64);
    }

    let ln_bp: Vec<f64> = bp.iter().map(|p| p.ln()).collect();
    let vmax: Vec<Vec<f64>> = exp.terms.iter().map(|od| od.iter().map(|t| t.iter().map(|&(_, b)| b.max(0.0)).sum()).collect()).collect();
    let vmin: Vec<Vec<f64>> = exp.terms.iter().map(|od| od.iter().map(|t| t.iter().map(|&(_, b)| b.min(0.0)).sum()).collect()).collect();

    let mut cv = ChoiceVars::default();
    let mut sd_terms: Vec<(VarId, f64)> = Vec::new();
    for (mi, od) in ctx.ods.iter().enumerate() {
        let (mut p_row, mut om_row, mut phi_row, mut rho_row, mut zeta_row) = (vec![], vec![], vec![], vec![], vec![]);
        // dual feasibility bounds gamma above by vbar + 1 and below through the
        // strong-duality row; finite boxes keep every relaxation bounded
        let lo = od
            .routes
            .iter()
            .enumerate()
            .map(|(r, rt)| rt.vbar - vmax[mi][r] + ln_bp[0] + 1.0)
            .fold(f64::INFINITY, f64::min)
            - 1.0;
        let hi = od
            .routes
            .iter()
            .enumerate()
            .map(|(r, rt)| rt.vbar - vmin[mi][r] + 1.0)
            .fold(f64::NEG_INFINITY, f64::max)
            + 1.0;
        let gamma = add_var(&mut m.lp, &mut roles, VarRole::Gamma { od: mi }, format!("gamma_{mi}"), lo, hi, 0.0);
        sd_terms.push((gamma, -1.0));
        for (ri, route) in od.routes.iter().enumerate() {
            let role = |f: fn(usize, usize) -> VarRole| f(mi, ri);
            let p = add_var(
                &mut m.lp,
                &mut roles,
                role(|od, route| VarRole::Prob { od, route }),
                format!("p_{mi}_{ri}"),
                0.0,
                1.0,
                -od.demand * route.vbar,
            );
            let omega = add_var(
                &mut m.lp,
                &mut roles,
                role(|od, route| VarRole::Omega { od, route }),
                format!("w_{mi}_{ri}"),
                -1.0,
                1.0,
                0.0,
            );
            let phi = add_var(
                &mut m.lp,
                &mut roles,
                role(|od, route| VarRole::Phi { od, route }),
                format!("phi_{mi}_{ri}"),
                vmin[mi][ri],
                vmax[mi][ri],
                od.demand,
            );
            // omega >= p (ln p^k + 1) - p^k
            for (kk, (&pk, &lpk)) in bp.iter().zip(&ln_bp).enumerate() {
                m.lp.add_constraint(
                    format!("piece_{mi}_{ri}_{kk}"),
                    vec![(omega, 1.0), (p, -(lpk + 1.0))],
                    Relation::Ge,
                    -pk,
                );
            }
            let rho: Vec<VarId> = (0..bp.len())
                .map(|kk| {
                    add_var(
                        &mut m.lp,
                        &mut roles,
                        VarRole::Rho { od: mi, route: ri, piece: kk },
                        format!("rho_{mi}_{ri}_{kk}"),
                        0.0,
                        1.0,
                        0.0,
                    )
                })
                .collect();
            m.lp.add_constraint(format!("rho_sum_{mi}_{ri}"), rho.iter().map(|&v| (v, 1.0)).collect(), Relation::Eq, 1.0);
            // gamma - sum (ln p^k + 1) rho + v_x(r) <= vbar
            let mut dual = vec![(gamma, 1.0)];
            dual.extend(rho.iter().zip(&ln_bp).map(|(&v, &l)| (v, -(l + 1.0))));
            for &(q, beta) in &exp.terms[mi][ri] {
                dual.push((key_var[q].expect("route key var"), beta));
            }
            m.lp.add_constraint(format!("dual_{mi}_{ri}"), dual, Relation::Le, route.vbar);

            // phi = sum beta zeta, zeta = p * y
            let mut phi_terms = vec![(phi, 1.0)];
            let mut zetas = Vec::new();
            for &(q, beta) in &exp.terms[mi][ri] {
                let y = key_var[q].expect("route key var");
                let z = add_var(
                    &mut m.lp,
                    &mut roles,
                    VarRole::Zeta { od: mi, route: ri, sublist: q },
                    format!("z_{mi}_{ri}_{q}"),
                    0.0,
                    1.0,
                    0.0,
                );
                m.lp.add_constraint(format!("zp_{mi}_{ri}_{q}"), vec![(z, 1.0), (p, -1.0)], Relation::Le, 0.0);
                m.lp.add_constraint(format!("zy_{mi}_{ri}_{q}"), vec![(z, 1.0), (y, -1.0)], Relation::Le, 0.0);
                m.lp.add_constraint(
                    format!("zl_{mi}_{ri}_{q}"),
                    vec![(z, 1.0), (p, -1.0), (y, -1.0)],
                    Relation::Ge,
                    -1.0,
                );
                phi_terms.push((z, -beta));
                zetas.push((q, z));
            }
            m.lp.add_constraint(format!("phi_{mi}_{ri}"), phi_terms, Relation::Eq, 0.0);

            // primal objective sum [omega + p vbar - phi] minus dual objective
            // sum gamma - sum p^k rho must vanish
            sd_terms.push((omega, 1.0));
            sd_terms.push((p, route.vbar));
            sd_terms.push((phi, -1.0));
            sd_terms.extend(rho.iter().zip(&bp).map(|(&v, &pk)| (v, pk)));

            p_row.push(p);
            om_row.push(omega);
            phi_row.push(phi);
            rho_row.push(rho);
            zeta_row.push(zetas);
        }
        m.lp.add_constraint(format!("simplex_{mi}"), p_row.iter().map(|&v| (v, 1.0)).collect(), Relation::Eq, 1.0);
        cv.gamma.push(gamma);
        cv.p.push(p_row);
        cv.omega.push(om_row);
        cv.phi.push(phi_row);
        cv.rho.push(rho_row);
        cv.zeta.push(zeta_row);
    }
    cv.strong_duality_row = m.lp.add_constraint("strong_duality", sd_terms, Relation::Eq, 0.0);
    let budget_terms = (0..n)
        .filter_map(|i| map.x[i].map(|v| (v, inst.network.segment(i).cost)))
        .collect();
    map.budget_row = m.lp.add_constraint("budget", budget_terms, Relation::Le, inst.budget);
    map.roles = roles;
    map.choice = Some(cv);
    Ok((m, map))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_instance, ContinuityFunction, RoadNetwork, RoadSegment, Trajectory};

    fn chain_instance(n: usize, trajs: Vec<Trajectory>, budget: f64, utility: UtilitySpec) -> PlanningInstance {
        let segs = (1..=n)
            .map(|k| RoadSegment {
                id: k.to_string(),
                length_m: 100.0,
                cost: 1.0,
                geometry: None,
            })
            .collect();
        let net = RoadNetwork::new(segs, (1..n).map(|k| (k - 1, k))).unwrap();
        build_instance(net, trajs, budget, utility).unwrap()
    }

    #[test]
    fn adjacency_model_census() {
        let inst = chain_instance(2, vec![Trajectory::new("t", vec![0, 1])], 1.0, UtilitySpec::ac(2.0));
        let (m, map) = build_blac(&inst).unwrap();
        assert_eq!(m.integer.len(), 2);
        assert_eq!(m.lp.num_vars(), 3);
        assert_eq!(m.lp.num_constraints(), 3);
        assert_eq!(map.aux.len(), 1);
        let (m0, _) = build_blac(&inst.with_utility(UtilitySpec::ac(0.0)).unwrap()).unwrap();
        assert_eq!(m0.lp.num_vars(), 2);
        assert_eq!(m0.lp.num_constraints(), 1);
    }

    #[test]
    fn zero_pair_demand_has_no_variable() {
        let inst = chain_instance(2, vec![Trajectory::new("a", vec![0]), Trajectory::new("b", vec![1])], 1.0, UtilitySpec::ac(2.0));
        let (m, _) = build_blac(&inst).unwrap();
        assert_eq!(m.lp.num_vars(), 2);
    }

    #[test]
    fn general_model_nesting() {
        let inst = chain_instance(3, vec![Trajectory::new("t", vec![0, 1, 2])], 2.0, UtilitySpec::power(1.1));
        let (m, map) = build_blgu(&inst).unwrap();
        assert_eq!(m.lp.num_vars(), 6);
        let labels: Vec<_> = map.aux_labels.clone();
        assert_eq!(
            labels,
            vec![AuxLabel::Sublist(vec![0, 1]), AuxLabel::Sublist(vec![1, 2]), AuxLabel::Sublist(vec![0, 1, 2])]
        );
        let top = map.aux[2];
        let nest: Vec<_> = m
            .lp
            .constraints
            .iter()
            .filter(|c| c.terms[0].0 == top && c.relation == Relation::Le)
            .map(|c| c.terms[1].0)
            .collect();
        assert_eq!(nest.len(), 2);
        assert!(nest.contains(&map.aux[0]) && nest.contains(&map.aux[1]));
        assert!(!m.lp.constraints.iter().any(|c| c.name.starts_with("cover")));
    }

    #[test]
    fn duplicate_trajectories_double_beta() {
        let t = Trajectory::new("t", vec![0, 1, 2]);
        let one = chain_instance(3, vec![t.clone()], 2.0, UtilitySpec::power(1.1));
        let two = chain_instance(3, vec![t.clone(), t], 2.0, UtilitySpec::power(1.1));
        let (a, _) = build_blgu(&one).unwrap();
        let (b, _) = build_blgu(&two).unwrap();
        assert_eq!(a.lp.num_vars(), b.lp.num_vars());
        for (va, vb) in a.lp.variables.iter().zip(&b.lp.variables) {
            assert!((2.0 * va.objective - vb.objective).abs() < 1e-12);
        }
    }

    #[test]
    fn non_convex_table_adds_cover_rows() {
        let spec = UtilitySpec::Gu {
            f: ContinuityFunction::Table(vec![2.0, 3.0, 3.5]),
            length_weighted: false,
        };
        let inst = chain_instance(3, vec![Trajectory::new("t", vec![0, 1, 2])], 2.0, spec);
        let (m, _) = build_blgu(&inst).unwrap();
        let covers = m.lp.constraints.iter().filter(|c| c.name.starts_with("cover")).count();
        // beta(pair) = 3 - 4 = -1 for both pairs; beta(triple) = 3.5 - 6 + 2 = -0.5
        assert_eq!(covers, 3);
    }

    #[test]
    fn breakpoint_grid() {
        assert_eq!(breakpoints(2, 0.01).unwrap(), vec![0.01, 1.0]);
        let b = breakpoints(3, 0.01).unwrap();
        assert!((b[1] - 0.1).abs() < 1e-15);
        let b = breakpoints(9, 1e-4).unwrap();
        let step = (1e4f64).ln() / 8.0;
        for w in b.windows(2) {
            assert!(((w[1] / w[0]).ln() - step).abs() < 1e-12);
        }
        assert!(breakpoints(1, 0.1).is_err());
    }

    #[test]
    fn structure_value_matches_utility() {
        let inst = chain_instance(
            4,
            vec![Trajectory::new("a", vec![0, 1, 2, 3]), Trajectory::new("b", vec![2, 1]).with_weight(0.5)],
            2.0,
            UtilitySpec::power(1.2),
        );
        let s = ClosureStructure::from_instance(&inst).unwrap();
        for mask in 0..16u32 {
            let sel: Vec<bool> = (0..4).map(|i| mask >> i & 1 == 1).collect();
            assert!((s.value(&sel) - inst.objective_of_mask(&sel).unwrap()).abs() < 1e-12);
        }
    }
}
