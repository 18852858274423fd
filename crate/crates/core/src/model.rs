//! Domain types: road network, trajectories, utility specification, planning
//! instances and construction plans.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::utility;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadSegment {
    pub id: String,
    pub length_m: f64,
    pub cost: f64,
    /// `(lon, lat)` polyline, only used for export.
    pub geometry: Option<Vec<(f64, f64)>>,
}

/// Segments plus the unordered neighbor relation between them.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadNetwork {
    segments: Vec<RoadSegment>,
    index: HashMap<String, usize>,
    neighbors: BTreeSet<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl RoadNetwork {
    /// Builds a network; `pairs` are segment indices, deduplicated and unordered.
    pub fn new(segments: Vec<RoadSegment>, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut index = HashMap::with_capacity(segments.len());
        for (k, s) in segments.iter().enumerate() {
            if !(s.length_m > 0.0 && s.length_m.is_finite()) {
                return Err(Error::Validation(format!("segment {} has length {}", s.id, s.length_m)));
            }
            if !(s.cost >= 0.0 && s.cost.is_finite()) {
                return Err(Error::Validation(format!("segment {} has cost {}", s.id, s.cost)));
            }
            if index.insert(s.id.clone(), k).is_some() {
                return Err(Error::Validation(format!("duplicate segment id {}", s.id)));
            }
        }
        let n = segments.len();
        let mut neighbors = BTreeSet::new();
        for (a, b) in pairs {
            if a >= n || b >= n {
                return Err(Error::Validation(format!("neighbor pair ({a}, {b}) references a missing segment")));
            }
            if a == b {
                return Err(Error::Validation(format!("segment {} listed as its own neighbor", segments[a].id)));
            }
            neighbors.insert((a.min(b), a.max(b)));
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in &neighbors {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        Ok(Self {
            segments,
            index,
            neighbors,
            adjacency,
        })
    }

    /// Same as [`RoadNetwork::new`] with pairs given by segment id.
    pub fn from_id_pairs<S: AsRef<str>>(segments: Vec<RoadSegment>, pairs: &[(S, S)]) -> Result<Self> {
        let lookup: HashMap<&str, usize> = segments.iter().enumerate().map(|(k, s)| (s.id.as_str(), k)).collect();
        let mut idx = Vec::with_capacity(pairs.len());
        for (a, b) in pairs {
            let find = |s: &str| {
                lookup
                    .get(s)
                    .copied()
                    .ok_or_else(|| Error::Validation(format!("neighbor pair references unknown segment {s}")))
            };
            idx.push((find(a.as_ref())?, find(b.as_ref())?));
        }
        Self::new(segments, idx)
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn segments(&self) -> &[RoadSegment] {
        &self.segments
    }

    pub fn segment(&self, i: usize) -> &RoadSegment {
        &self.segments[i]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Neighbor pairs as `(min, max)` index tuples, sorted.
    pub fn neighbors(&self) -> &BTreeSet<(usize, usize)> {
        &self.neighbors
    }

    pub fn adjacent(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn are_neighbors(&self, a: usize, b: usize) -> bool {
        self.neighbors.contains(&(a.min(b), a.max(b)))
    }

    pub fn total_cost(&self) -> f64 {
        self.segments.iter().fold(0.0, |acc, s| acc + s.cost)
    }

    pub fn cost_of(&self, selected: &[usize]) -> f64 {
        selected.iter().fold(0.0, |acc, &i| acc + self.segments[i].cost)
    }

    pub fn validate_trajectory(&self, t: &Trajectory) -> Result<()> {
        let fail = |message: String| Error::Ingest {
            trajectory: t.id.clone(),
            message,
        };
        if t.segments.is_empty() {
            return Err(fail("empty segment list".into()));
        }
        if !(t.weight >= 0.0 && t.weight.is_finite()) {
            return Err(fail(format!("weight {} is not a nonnegative number", t.weight)));
        }
        if let Some(&bad) = t.segments.iter().find(|&&i| i >= self.len()) {
            return Err(fail(format!("unknown segment index {bad}")));
        }
        for w in t.segments.windows(2) {
            if w[0] == w[1] {
                return Err(Error::Validation(format!(
                    "trajectory {} repeats segment {} consecutively",
                    t.id, self.segments[w[0]].id
                )));
            }
            if !self.are_neighbors(w[0], w[1]) {
                return Err(Error::Validation(format!(
                    "trajectory {} steps between non-adjacent segments {} and {}",
                    t.id, self.segments[w[0]].id, self.segments[w[1]].id
                )));
            }
        }
        Ok(())
    }
}

/// Where and when a trip started; needed for decensoring.
#[derive(Debug, Clone, PartialEq)]
pub struct Origin {
    pub start: NaiveDateTime,
    pub lon: f64,
    pub lat: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub id: String,
    /// Segment indices into the network, in riding order.
    pub segments: Vec<usize>,
    pub weight: f64,
    pub origin: Option<Origin>,
}

impl Trajectory {
    pub fn new(id: impl Into<String>, segments: Vec<usize>) -> Self {
        Self {
            id: id.into(),
            segments,
            weight: 1.0,
            origin: None,
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn od_key(&self) -> (usize, usize) {
        (self.segments[0], *self.segments.last().expect("nonempty trajectory"))
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }
}

/// Value of a maximal continuous run of bike lanes as a function of its size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ContinuityFunction {
    /// `f(z) = z * alpha^z`
    PowerAlpha(f64),
    /// `f(z) = (lambda + 1) z - lambda`
    Linear(f64),
    /// `f(1..=values.len())`, linear in between, `f(0) = 0`.
    Table(Vec<f64>),
}

impl ContinuityFunction {
    /// `f(z)`, with `f(z) = 0` for `z <= 0`.
    pub fn eval(&self, z: f64) -> Result<f64> {
        if z <= 0.0 {
            return Ok(0.0);
        }
        Ok(match self {
            ContinuityFunction::PowerAlpha(alpha) => z * alpha.powf(z),
            ContinuityFunction::Linear(lambda) => (lambda + 1.0) * z - lambda,
            ContinuityFunction::Table(values) => {
                let zmax = values.len() as f64;
                if z > zmax + 1e-9 {
                    return Err(Error::Validation(format!("table continuity function queried at {z} > {zmax}")));
                }
                let z = z.min(zmax);
                let lo = z.floor() as usize;
                let frac = z - lo as f64;
                let at = |k: usize| if k == 0 { 0.0 } else { values[k - 1] };
                if frac == 0.0 {
                    at(lo)
                } else {
                    at(lo) + frac * (at(lo + 1) - at(lo))
                }
            }
        })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ContinuityFunction::PowerAlpha(a) if !(a.is_finite() && *a >= 1.0) => {
                Err(Error::Config(format!("alpha must be >= 1, got {a}")))
            }
            ContinuityFunction::Linear(l) if !l.is_finite() => Err(Error::Config(format!("lambda {l} is not finite"))),
            ContinuityFunction::Table(v) => {
                if v.is_empty() {
                    return Err(Error::Config("table continuity function is empty".into()));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Config("table continuity function has non-finite values".into()));
                }
                if std::iter::once(&0.0).chain(v).collect::<Vec<_>>().windows(2).any(|w| w[1] < w[0]) {
                    return Err(Error::Config("table continuity function must be nondecreasing from f(0) = 0".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Nonnegative second differences on the integers, with `f(0) = f(-1) = 0`.
    pub fn is_convex(&self) -> bool {
        match self {
            ContinuityFunction::PowerAlpha(a) => *a >= 1.0,
            ContinuityFunction::Linear(l) => *l >= 0.0,
            ContinuityFunction::Table(v) => {
                let mut ext = vec![0.0, 0.0];
                ext.extend_from_slice(v);
                ext.windows(3).all(|w| w[2] - 2.0 * w[1] + w[0] >= -1e-12)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum UtilitySpec {
    /// Adjacency continuity: one per covered visit plus `lambda` per covered consecutive pair.
    Ac { lambda: f64 },
    /// General continuity: `f` of every maximal covered run, measured in segments or kilometres.
    Gu { f: ContinuityFunction, length_weighted: bool },
}

impl UtilitySpec {
    pub fn ac(lambda: f64) -> Self {
        UtilitySpec::Ac { lambda }
    }

    pub fn power(alpha: f64) -> Self {
        UtilitySpec::Gu {
            f: ContinuityFunction::PowerAlpha(alpha),
            length_weighted: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            UtilitySpec::Ac { lambda } if !(lambda.is_finite() && *lambda >= 0.0) => {
                Err(Error::Config(format!("lambda must be >= 0, got {lambda}")))
            }
            UtilitySpec::Ac { .. } => Ok(()),
            UtilitySpec::Gu { f, .. } => f.validate(),
        }
    }

    /// The run function that reproduces this utility trajectory by trajectory.
    pub fn run_function(&self) -> ContinuityFunction {
        match self {
            UtilitySpec::Ac { lambda } => ContinuityFunction::Linear(*lambda),
            UtilitySpec::Gu { f, .. } => f.clone(),
        }
    }

    pub fn length_weighted(&self) -> bool {
        matches!(self, UtilitySpec::Gu { length_weighted: true, .. })
    }

    pub fn is_convex(&self) -> bool {
        match self {
            UtilitySpec::Ac { lambda } => *lambda >= 0.0,
            UtilitySpec::Gu { f, .. } => f.is_convex(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceStats {
    /// Longest trajectory, in segments.
    pub longest_trajectory: usize,
    pub total_cost: f64,
}

/// Everything a solver needs. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanningInstance {
    pub network: RoadNetwork,
    pub trajectories: Vec<Trajectory>,
    pub budget: f64,
    pub utility: UtilitySpec,
    /// Weighted visit count per segment.
    pub d_seg: Vec<f64>,
    /// Weighted consecutive-traversal count per neighbor pair `(min, max)`.
    pub d_pair: BTreeMap<(usize, usize), f64>,
    pub stats: InstanceStats,
}

pub fn build_instance(
    network: RoadNetwork,
    trajectories: Vec<Trajectory>,
    budget: f64,
    utility: UtilitySpec,
) -> Result<PlanningInstance> {
    if !(budget.is_finite() && budget >= 0.0) {
        return Err(Error::Config(format!("budget must be a nonnegative number, got {budget}")));
    }
    utility.validate()?;
    for t in &trajectories {
        network.validate_trajectory(t)?;
    }
    let mut d_seg = vec![0.0; network.len()];
    let mut d_pair = BTreeMap::new();
    for t in &trajectories {
        for &i in &t.segments {
            d_seg[i] += t.weight;
        }
        for w in t.segments.windows(2) {
            *d_pair.entry((w[0].min(w[1]), w[0].max(w[1]))).or_insert(0.0) += t.weight;
        }
    }
    let stats = InstanceStats {
        longest_trajectory: trajectories.iter().map(Trajectory::len).max().unwrap_or(0),
        total_cost: network.total_cost(),
    };
    Ok(PlanningInstance {
        network,
        trajectories,
        budget,
        utility,
        d_seg,
        d_pair,
        stats,
    })
}

impl PlanningInstance {
    pub fn num_segments(&self) -> usize {
        self.network.len()
    }

    /// A copy with a different budget.
    pub fn with_budget(&self, budget: f64) -> Result<Self> {
        if !(budget.is_finite() && budget >= 0.0) {
            return Err(Error::Config(format!("budget must be a nonnegative number, got {budget}")));
        }
        Ok(Self { budget, ..self.clone() })
    }

    /// A copy with a different utility; demand counts are unchanged.
    pub fn with_utility(&self, utility: UtilitySpec) -> Result<Self> {
        utility.validate()?;
        Ok(Self { utility, ..self.clone() })
    }

    pub fn budget_tolerance(&self) -> f64 {
        1e-6 * self.budget
    }

    /// Segment lengths in kilometres, the run measure in length-weighted mode.
    pub fn lengths_km(&self) -> Vec<f64> {
        self.network.segments().iter().map(|s| s.length_m / 1000.0).collect()
    }

    pub fn costs(&self) -> Vec<f64> {
        self.network.segments().iter().map(|s| s.cost).collect()
    }

    /// Weighted utility of a selection given as a membership mask.
    pub fn objective_of_mask(&self, mask: &[bool]) -> Result<f64> {
        utility::total_utility(self, mask)
    }

    pub fn mask(&self, selected: &[usize]) -> Vec<bool> {
        let mut m = vec![false; self.num_segments()];
        for &i in selected {
            m[i] = true;
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub solver: String,
    pub params: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new(solver: impl Into<String>) -> Self {
        Self {
            solver: solver.into(),
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanStatus {
    /// Proven optimal within the requested gap.
    Optimal,
    /// Feasible, no optimality claim beyond the reported bound.
    Feasible,
    /// A time or node limit stopped the search.
    Interrupted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionPlan {
    /// Sorted, deduplicated segment indices.
    pub selected: Vec<usize>,
    pub cost: f64,
    pub objective: f64,
    /// Best known upper bound on the optimal objective.
    pub bound: Option<f64>,
    pub feasible: bool,
    pub status: PlanStatus,
    pub provenance: Provenance,
}

impl ConstructionPlan {
    /// `(bound - objective) / bound`, zero when the bound is zero.
    pub fn gap(&self) -> Option<f64> {
        self.bound.map(|b| optimality_gap(b, self.objective))
    }

    pub fn selected_ids<'a>(&self, network: &'a RoadNetwork) -> Vec<&'a str> {
        self.selected.iter().map(|&i| network.segment(i).id.as_str()).collect()
    }
}

/// Relative gap `(upper - value) / upper`; zero when both vanish.
pub fn optimality_gap(upper: f64, value: f64) -> f64 {
    if upper.abs() <= 1e-12 {
        if (upper - value).abs() <= 1e-12 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (upper - value) / upper
    }
}

pub fn evaluate_plan(instance: &PlanningInstance, selected: &[usize]) -> Result<ConstructionPlan> {
    let n = instance.num_segments();
    if let Some(&bad) = selected.iter().find(|&&i| i >= n) {
        return Err(Error::Validation(format!("plan references unknown segment index {bad}")));
    }
    let mut sel = selected.to_vec();
    sel.sort_unstable();
    sel.dedup();
    let cost = instance.network.cost_of(&sel);
    let objective = instance.objective_of_mask(&instance.mask(&sel))?;
    Ok(ConstructionPlan {
        selected: sel,
        cost,
        objective,
        bound: None,
        feasible: cost <= instance.budget + instance.budget_tolerance(),
        status: PlanStatus::Feasible,
        provenance: Provenance::new("evaluate"),
    })
}

/// Resolves segment ids to indices.
pub fn resolve_ids<S: AsRef<str>>(network: &RoadNetwork, ids: &[S]) -> Result<Vec<usize>> {
    ids.iter()
        .map(|s| {
            network
                .index_of(s.as_ref())
                .ok_or_else(|| Error::Validation(format!("unknown segment id {}", s.as_ref())))
        })
        .collect()
}
