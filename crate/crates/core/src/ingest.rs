//! File formats, origin decensoring and synthetic instances.
//!
//! Trajectory lines: `trip_id,start,origin_lon,origin_lat,[seg1 seg2 ...][,weight]`.
//! Network files: `id,length_m,cost[,lon lat;lon lat;...]` lines, then a
//! `NEIGHBORS` line followed by `id_a,id_b` lines. An empty cost means
//! `unit_cost * length_m`. Stock files: `neighborhood,day,period,available`.
//! Route files: `od_id,demand,route_index,vbar,[seg ...]`.
//! Blank lines and lines starting with `#` are ignored everywhere.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use chrono::{Duration, NaiveDate, NaiveDateTime, Timelike};
use log::{debug, warn};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::choice::{ChoiceContext, OdGroup, Route};
use crate::error::{Error, Result};
use crate::model::{build_instance, Origin, PlanningInstance, RoadNetwork, RoadSegment, Trajectory, UtilitySpec};

/// Ten-minute bins per day.
pub const PERIODS_PER_DAY: u16 = 144;

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

struct Src<'a>(&'a str);

impl Src<'_> {
    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.0.to_string(),
            line,
            message: message.into(),
        }
    }
}

fn num(src: &Src, line: usize, field: &str, what: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| src.err(line, format!("invalid {what} `{field}`")))
}

/// Splits `[a b c]` into its items.
fn bracket_list<'a>(src: &Src, line: usize, field: &'a str) -> Result<Vec<&'a str>> {
    let f = field.trim();
    let inner = f
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| src.err(line, format!("expected a bracketed segment list, got `{f}`")))?;
    let items: Vec<&str> = inner.split_whitespace().collect();
    if items.is_empty() {
        return Err(src.err(line, "empty segment list"));
    }
    Ok(items)
}

fn resolve_segments(network: &RoadNetwork, trajectory: &str, ids: &[&str]) -> Result<Vec<usize>> {
    ids.iter()
        .map(|id| {
            network.index_of(id).ok_or_else(|| Error::Ingest {
                trajectory: trajectory.to_string(),
                message: format!("unknown segment id {id}"),
            })
        })
        .collect()
}

fn parse_time(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    s.parse::<NaiveDateTime>()
        .ok()
        .or_else(|| NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S").ok())
}

pub fn parse_trajectories(path: impl AsRef<Path>, network: &RoadNetwork) -> Result<Vec<Trajectory>> {
    let path = path.as_ref();
    parse_trajectories_str(&read(path)?, &path.display().to_string(), network)
}

/// Parses trajectory lines, resolving and validating segment ids against `network`.
pub fn parse_trajectories_str(text: &str, source: &str, network: &RoadNetwork) -> Result<Vec<Trajectory>> {
    let src = Src(source);
    let mut out = Vec::new();
    for (ln, line) in content_lines(text) {
        let fields: Vec<&str> = line.split(',').collect();
        if !(5..=6).contains(&fields.len()) {
            return Err(src.err(ln, format!("expected 5 or 6 fields, found {}", fields.len())));
        }
        let id = fields[0].trim();
        if id.is_empty() {
            return Err(src.err(ln, "empty trip id"));
        }
        let start = parse_time(fields[1]).ok_or_else(|| src.err(ln, format!("invalid start time `{}`", fields[1])))?;
        let lon = num(&src, ln, fields[2], "longitude")?;
        let lat = num(&src, ln, fields[3], "latitude")?;
        let ids = bracket_list(&src, ln, fields[4])?;
        let weight = match fields.get(5) {
            Some(w) => num(&src, ln, w, "weight")?,
            None => 1.0,
        };
        let segments = resolve_segments(network, id, &ids)?;
        let mut t = Trajectory::new(id, segments).with_weight(weight);
        t.origin = Some(Origin { start, lon, lat });
        network.validate_trajectory(&t)?;
        out.push(t);
    }
    Ok(out)
}

/// Inverse of [`parse_trajectories_str`]. Trajectories without an origin get
/// a placeholder origin at the Unix epoch.
pub fn write_trajectories(trajectories: &[Trajectory], network: &RoadNetwork) -> String {
    let mut s = String::new();
    for t in trajectories {
        let (start, lon, lat) = match &t.origin {
            Some(o) => (o.start, o.lon, o.lat),
            None => (NaiveDateTime::default(), 0.0, 0.0),
        };
        let ids: Vec<&str> = t.segments.iter().map(|&i| network.segment(i).id.as_str()).collect();
        let _ = write!(s, "{},{},{lon},{lat},[{}]", t.id, start.format("%Y-%m-%dT%H:%M:%S"), ids.join(" "));
        if t.weight != 1.0 {
            let _ = write!(s, ",{}", t.weight);
        }
        s.push('\n');
    }
    s
}

pub fn parse_network(path: impl AsRef<Path>, unit_cost: f64) -> Result<RoadNetwork> {
    let path = path.as_ref();
    parse_network_str(&read(path)?, &path.display().to_string(), unit_cost)
}

pub fn parse_network_str(text: &str, source: &str, unit_cost: f64) -> Result<RoadNetwork> {
    let src = Src(source);
    let mut segments = Vec::new();
    let mut pairs = Vec::new();
    let mut in_pairs = false;
    for (ln, line) in content_lines(text) {
        if line.eq_ignore_ascii_case("NEIGHBORS") {
            in_pairs = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if in_pairs {
            if fields.len() != 2 || fields[0].is_empty() || fields[1].is_empty() {
                return Err(src.err(ln, "expected `id_a,id_b`"));
            }
            pairs.push((fields[0].to_string(), fields[1].to_string()));
            continue;
        }
        if !(3..=4).contains(&fields.len()) || fields[0].is_empty() {
            return Err(src.err(ln, "expected `id,length_m,cost[,polyline]`"));
        }
        let length_m = num(&src, ln, fields[1], "length")?;
        let cost = if fields[2].is_empty() {
            unit_cost * length_m
        } else {
            num(&src, ln, fields[2], "cost")?
        };
        let geometry = match fields.get(3).filter(|g| !g.is_empty()) {
            None => None,
            Some(g) => Some(parse_polyline(g).ok_or_else(|| src.err(ln, format!("invalid polyline `{g}`")))?),
        };
        segments.push(RoadSegment {
            id: fields[0].to_string(),
            length_m,
            cost,
            geometry,
        });
    }
    RoadNetwork::from_id_pairs(segments, &pairs)
}

fn parse_polyline(s: &str) -> Option<Vec<(f64, f64)>> {
    s.split(';')
        .map(|pt| {
            let mut it = pt.split_whitespace().map(str::parse::<f64>);
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(lon)), Some(Ok(lat)), None) => Some((lon, lat)),
                _ => None,
            }
        })
        .collect()
}

pub fn write_network(network: &RoadNetwork) -> String {
    let mut s = String::new();
    for seg in network.segments() {
        let _ = write!(s, "{},{},{}", seg.id, seg.length_m, seg.cost);
        if let Some(g) = &seg.geometry {
            let pts: Vec<String> = g.iter().map(|(lon, lat)| format!("{lon} {lat}")).collect();
            let _ = write!(s, ",{}", pts.join(";"));
        }
        s.push('\n');
    }
    s.push_str("NEIGHBORS\n");
    for &(a, b) in network.neighbors() {
        let _ = writeln!(s, "{},{}", network.segment(a).id, network.segment(b).id);
    }
    s
}

/// Candidate routes from a route file, grouped by `od_id` in order of first appearance.
pub fn parse_routes(path: impl AsRef<Path>, network: &RoadNetwork) -> Result<ChoiceContext> {
    let path = path.as_ref();
    parse_routes_str(&read(path)?, &path.display().to_string(), network)
}

pub fn parse_routes_str(text: &str, source: &str, network: &RoadNetwork) -> Result<ChoiceContext> {
    let src = Src(source);
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, (f64, Vec<(i64, Route)>)> = HashMap::new();
    for (ln, line) in content_lines(text) {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(src.err(ln, format!("expected 5 fields, found {}", fields.len())));
        }
        let od = fields[0].to_string();
        let demand = num(&src, ln, fields[1], "demand")?;
        let index = fields[2]
            .parse::<i64>()
            .map_err(|_| src.err(ln, format!("invalid route index `{}`", fields[2])))?;
        let vbar = num(&src, ln, fields[3], "disutility")?;
        let ids = bracket_list(&src, ln, fields[4])?;
        let segments = resolve_segments(network, &format!("{od}/{index}"), &ids)?;
        let g = groups.entry(od.clone()).or_insert_with(|| {
            order.push(od.clone());
            (demand, Vec::new())
        });
        if g.0 != demand {
            return Err(src.err(ln, format!("OD {od} has conflicting demands {} and {demand}", g.0)));
        }
        if g.1.iter().any(|(k, _)| *k == index) {
            return Err(src.err(ln, format!("OD {od} repeats route index {index}")));
        }
        g.1.push((index, Route { segments, vbar }));
    }
    let mut ods = Vec::with_capacity(order.len());
    for od in order {
        let (demand, mut routes) = groups.remove(&od).expect("grouped");
        routes.sort_by_key(|(k, _)| *k);
        let first = &routes[0].1.segments;
        ods.push(OdGroup {
            origin: first[0],
            destination: *first.last().expect("nonempty route"),
            demand,
            routes: routes.into_iter().map(|(_, r)| r).collect(),
        });
    }
    let ctx = ChoiceContext { ods, eta: 0.0 };
    ctx.validate(network)?;
    Ok(ctx)
}

pub fn write_routes(ctx: &ChoiceContext, network: &RoadNetwork) -> String {
    let mut s = String::new();
    for (m, od) in ctx.ods.iter().enumerate() {
        for (r, route) in od.routes.iter().enumerate() {
            let ids: Vec<&str> = route.segments.iter().map(|&i| network.segment(i).id.as_str()).collect();
            let _ = writeln!(s, "od{m},{},{r},{},[{}]", od.demand, route.vbar, ids.join(" "));
        }
    }
    s
}

const BASE32: &[u8; 32] = b"0123456789bcdefghjkmnpqrstuvwxyz";

/// Standard base-32 geohash.
pub fn geohash_encode(lon: f64, lat: f64, precision: usize) -> Result<String> {
    if precision == 0 {
        return Err(Error::Config("geohash precision must be at least 1".into()));
    }
    if !(-180.0..=180.0).contains(&lon) || !(-90.0..=90.0).contains(&lat) {
        return Err(Error::Validation(format!("coordinates ({lon}, {lat}) out of range")));
    }
    let (mut lon_lo, mut lon_hi) = (-180.0, 180.0);
    let (mut lat_lo, mut lat_hi) = (-90.0, 90.0);
    let mut out = String::with_capacity(precision);
    let mut even = true;
    let (mut bits, mut ch) = (0, 0usize);
    while out.len() < precision {
        let (v, lo, hi) = if even {
            (lon, &mut lon_lo, &mut lon_hi)
        } else {
            (lat, &mut lat_lo, &mut lat_hi)
        };
        let mid = (*lo + *hi) / 2.0;
        ch <<= 1;
        if v >= mid {
            ch |= 1;
            *lo = mid;
        } else {
            *hi = mid;
        }
        even = !even;
        bits += 1;
        if bits == 5 {
            out.push(BASE32[ch] as char);
            bits = 0;
            ch = 0;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct StockObservation {
    pub neighborhood: String,
    /// Ten-minute bin of the day, `0..144`.
    pub period: u16,
    pub day: NaiveDate,
    pub available: u32,
}

pub fn parse_stock(path: impl AsRef<Path>) -> Result<Vec<StockObservation>> {
    let path = path.as_ref();
    parse_stock_str(&read(path)?, &path.display().to_string())
}

pub fn parse_stock_str(text: &str, source: &str) -> Result<Vec<StockObservation>> {
    let src = Src(source);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (ln, line) in content_lines(text) {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 4 || f[0].is_empty() {
            return Err(src.err(ln, "expected `neighborhood,day,period,available`"));
        }
        let day = f[1]
            .parse::<NaiveDate>()
            .map_err(|_| src.err(ln, format!("invalid day `{}`", f[1])))?;
        let period = f[2]
            .parse::<u16>()
            .ok()
            .filter(|p| *p < PERIODS_PER_DAY)
            .ok_or_else(|| src.err(ln, format!("period `{}` outside 0..144", f[2])))?;
        let available = f[3]
            .parse::<u32>()
            .map_err(|_| src.err(ln, format!("invalid availability `{}`", f[3])))?;
        if !seen.insert((f[0].to_string(), period, day)) {
            return Err(src.err(ln, format!("duplicate observation for {} period {period} on {day}", f[0])));
        }
        out.push(StockObservation {
            neighborhood: f[0].to_string(),
            period,
            day,
            available,
        });
    }
    Ok(out)
}

pub fn write_stock(observations: &[StockObservation]) -> String {
    let mut s = String::new();
    for o in observations {
        let _ = writeln!(s, "{},{},{},{}", o.neighborhood, o.day, o.period, o.available);
    }
    s
}

pub type Cell = (String, u16);
pub type CellDay = (String, u16, NaiveDate);

/// How unobserved (neighborhood, period, day) slots are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingPolicy {
    /// Count as a stock-out.
    #[default]
    Stockout,
    /// Count as served.
    Available,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Stockouts {
    /// Slots flagged as stocked out, including unobserved ones under [`MissingPolicy::Stockout`].
    pub flagged: BTreeSet<CellDay>,
    /// Unobserved slots within the observed neighborhoods and days.
    pub missing: usize,
}

/// Flags observed slots with `available <= threshold` and every unobserved
/// slot of the observed neighborhoods over the observed day range.
pub fn detect_stockouts(observations: &[StockObservation], threshold: u32) -> Stockouts {
    detect_stockouts_with(observations, threshold, MissingPolicy::Stockout, None)
}

fn detect_stockouts_with(
    observations: &[StockObservation],
    threshold: u32,
    missing: MissingPolicy,
    days: Option<(NaiveDate, usize)>,
) -> Stockouts {
    let mut out = Stockouts::default();
    let mut observed: HashMap<CellDay, u32> = HashMap::with_capacity(observations.len());
    for o in observations {
        observed.insert((o.neighborhood.clone(), o.period, o.day), o.available);
    }
    let Some((first, n_days)) = days.or_else(|| {
        let lo = observations.iter().map(|o| o.day).min()?;
        let hi = observations.iter().map(|o| o.day).max()?;
        Some((lo, (hi - lo).num_days() as usize + 1))
    }) else {
        return out;
    };
    let hoods: BTreeSet<&str> = observations.iter().map(|o| o.neighborhood.as_str()).collect();
    for h in hoods {
        for d in 0..n_days {
            let day = first + Duration::days(d as i64);
            for p in 0..PERIODS_PER_DAY {
                let key = (h.to_string(), p, day);
                match observed.get(&key) {
                    Some(&a) if a <= threshold => {
                        out.flagged.insert(key);
                    }
                    Some(_) => {}
                    None => {
                        out.missing += 1;
                        if missing == MissingPolicy::Stockout {
                            out.flagged.insert(key);
                        }
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecensorOptions {
    pub horizon_days: usize,
    /// Availability at or below which a slot counts as stocked out.
    pub threshold: u32,
    pub missing: MissingPolicy,
    /// First horizon day; defaults to the earliest observed day.
    pub first_day: Option<NaiveDate>,
}

impl DecensorOptions {
    pub fn new(horizon_days: usize) -> Self {
        Self {
            horizon_days,
            threshold: 0,
            missing: MissingPolicy::Stockout,
            first_day: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DecensorReport {
    /// `1 / (horizon - stockout days)` per origin cell that has service.
    pub weights: BTreeMap<Cell, f64>,
    pub stockout_days: BTreeMap<Cell, usize>,
    pub horizon_days: usize,
    /// Trajectories whose origin cell was stocked out on every horizon day.
    pub dropped: Vec<String>,
    /// Cells without a single served day.
    pub undefined: Vec<Cell>,
    pub missing_observations: usize,
}

/// Ten-minute bin of a timestamp.
pub fn period_of(t: &NaiveDateTime) -> u16 {
    ((t.hour() * 60 + t.minute()) / 10) as u16
}

/// Origin cell of a trajectory: 7-character geohash and start period.
pub fn origin_cell(t: &Trajectory) -> Result<Cell> {
    let o = t.origin.as_ref().ok_or_else(|| Error::Ingest {
        trajectory: t.id.clone(),
        message: "missing origin time and position".into(),
    })?;
    Ok((geohash_encode(o.lon, o.lat, 7)?, period_of(&o.start)))
}

/// Reweights each trajectory by the reciprocal of the number of horizon days
/// on which its origin neighborhood had bikes in its start period.
pub fn decensor(
    trajectories: &[Trajectory],
    observations: &[StockObservation],
    opts: &DecensorOptions,
) -> Result<(Vec<Trajectory>, DecensorReport)> {
    if opts.horizon_days == 0 {
        return Err(Error::Config("decensoring horizon must be at least one day".into()));
    }
    let cells: Vec<Cell> = trajectories.iter().map(origin_cell).collect::<Result<_>>()?;
    let first = opts
        .first_day
        .or_else(|| observations.iter().map(|o| o.day).min())
        .or_else(|| trajectories.iter().filter_map(|t| t.origin.as_ref()).map(|o| o.start.date()).min());
    let Some(first) = first else {
        return Ok((Vec::new(), DecensorReport {
            horizon_days: opts.horizon_days,
            ..Default::default()
        }));
    };
    let last = first + Duration::days(opts.horizon_days as i64 - 1);
    let in_horizon: Vec<StockObservation> = observations.iter().filter(|o| o.day >= first && o.day <= last).cloned().collect();
    let stock = detect_stockouts_with(&in_horizon, opts.threshold, opts.missing, Some((first, opts.horizon_days)));
    let mut report = DecensorReport {
        horizon_days: opts.horizon_days,
        missing_observations: stock.missing,
        ..Default::default()
    };
    for (h, p, _) in &stock.flagged {
        *report.stockout_days.entry((h.clone(), *p)).or_insert(0) += 1;
    }
    let observed_hoods: BTreeSet<&str> = in_horizon.iter().map(|o| o.neighborhood.as_str()).collect();
    let mut universe: BTreeSet<Cell> = observed_hoods
        .iter()
        .flat_map(|h| (0..PERIODS_PER_DAY).map(move |p| (h.to_string(), p)))
        .collect();
    for c in &cells {
        if !observed_hoods.contains(c.0.as_str()) {
            // never observed at all: every day is missing
            let days = match opts.missing {
                MissingPolicy::Stockout => opts.horizon_days,
                MissingPolicy::Available => 0,
            };
            report.stockout_days.insert(c.clone(), days);
            if opts.missing == MissingPolicy::Stockout {
                report.missing_observations += opts.horizon_days;
            }
        }
        universe.insert(c.clone());
    }
    for c in universe {
        let out = report.stockout_days.get(&c).copied().unwrap_or(0);
        report.stockout_days.entry(c.clone()).or_insert(0);
        if out < opts.horizon_days {
            report.weights.insert(c, 1.0 / (opts.horizon_days - out) as f64);
        } else {
            report.undefined.push(c);
        }
    }
    let mut kept = Vec::with_capacity(trajectories.len());
    for (t, c) in trajectories.iter().zip(&cells) {
        match report.weights.get(c) {
            Some(&w) => kept.push(t.clone().with_weight(w)),
            None => report.dropped.push(t.id.clone()),
        }
    }
    if !report.dropped.is_empty() {
        warn!("dropped {} trajectories from cells that never had bikes", report.dropped.len());
    }
    Ok((kept, report))
}

/// Grid street network and the node of each segment end.
#[derive(Debug, Clone, PartialEq)]
pub struct GridNetwork {
    pub network: RoadNetwork,
    pub rows: usize,
    pub cols: usize,
    /// `(node_a, node_b)` per segment, nodes numbered row-major.
    pub ends: Vec<(usize, usize)>,
}

const ORIGIN_LON: f64 = 113.5;
const ORIGIN_LAT: f64 = 22.2;
const NODE_STEP_DEG: f64 = 0.002;

fn node_coord(cols: usize, node: usize) -> (f64, f64) {
    let (r, c) = (node / cols, node % cols);
    (ORIGIN_LON + c as f64 * NODE_STEP_DEG, ORIGIN_LAT + r as f64 * NODE_STEP_DEG)
}

/// `rows x cols` grid: segments are grid edges with random lengths in
/// 100..400 m, neighbors are edges sharing a node.
pub fn synth_network(seed: u64, rows: usize, cols: usize, unit_cost: f64) -> Result<GridNetwork> {
    if rows == 0 || cols == 0 || rows * cols < 2 {
        return Err(Error::Config(format!("grid {rows}x{cols} has fewer than two nodes")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ends = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let v = r * cols + c;
            if c + 1 < cols {
                ends.push((v, v + 1));
            }
            if r + 1 < rows {
                ends.push((v, v + cols));
            }
        }
    }
    let segments = ends
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| {
            let length_m = (rng.gen_range(100.0..400.0_f64) * 10.0).round() / 10.0;
            RoadSegment {
                id: format!("e{k}"),
                length_m,
                cost: unit_cost * length_m,
                geometry: Some(vec![node_coord(cols, a), node_coord(cols, b)]),
            }
        })
        .collect();
    let mut at_node = vec![Vec::new(); rows * cols];
    for (k, &(a, b)) in ends.iter().enumerate() {
        at_node[a].push(k);
        at_node[b].push(k);
    }
    let mut pairs = Vec::new();
    for segs in &at_node {
        for (x, &i) in segs.iter().enumerate() {
            for &j in &segs[x + 1..] {
                pairs.push((i, j));
            }
        }
    }
    Ok(GridNetwork {
        network: RoadNetwork::new(segments, pairs)?,
        rows,
        cols,
        ends,
    })
}

/// Self-avoiding walks with lengths uniform in `1..=2*mean_length - 1`.
pub fn synth_trajectories(seed: u64, grid: &GridNetwork, count: usize, mean_length: usize) -> Vec<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let n_nodes = grid.rows * grid.cols;
    let mut incident = vec![Vec::new(); n_nodes];
    for (k, &(a, b)) in grid.ends.iter().enumerate() {
        incident[a].push((k, b));
        incident[b].push((k, a));
    }
    let day0 = NaiveDate::from_ymd_opt(2017, 3, 1).expect("valid date").and_hms_opt(0, 0, 0).expect("valid time");
    let max_len = (2 * mean_length.max(1)).saturating_sub(1).max(1);
    let mut truncated = 0;
    let mut out = Vec::with_capacity(count);
    for t in 0..count {
        let target = rng.gen_range(1..=max_len);
        let start = rng.gen_range(0..n_nodes);
        let mut visited = vec![false; n_nodes];
        visited[start] = true;
        let mut node = start;
        let mut segments = Vec::with_capacity(target);
        while segments.len() < target {
            let options: Vec<(usize, usize)> = incident[node].iter().copied().filter(|&(_, v)| !visited[v]).collect();
            let Some(&(seg, next)) = options.choose(&mut rng) else {
                break;
            };
            segments.push(seg);
            visited[next] = true;
            node = next;
        }
        if segments.len() < target {
            truncated += 1;
        }
        let (lon, lat) = node_coord(grid.cols, start);
        let minutes = rng.gen_range(0..14 * 24 * 60);
        let mut traj = Trajectory::new(format!("t{t}"), segments);
        traj.origin = Some(Origin {
            start: day0 + Duration::minutes(minutes),
            lon,
            lat,
        });
        out.push(traj);
    }
    if truncated > 0 {
        warn!("{truncated} of {count} walks were truncated before reaching their target length");
    }
    debug!("generated {count} walks on a {}x{} grid", grid.rows, grid.cols);
    out
}

/// Grid instance with walks, unit cost 1 per meter, a power utility with
/// `alpha = 1.1` and half the total cost as budget.
pub fn synth_instance(seed: u64, rows: usize, cols: usize, n_trajectories: usize, mean_length: usize) -> Result<PlanningInstance> {
    let grid = synth_network(seed, rows, cols, 1.0)?;
    let trajs = synth_trajectories(seed, &grid, n_trajectories, mean_length);
    let budget = grid.network.total_cost() / 2.0;
    build_instance(grid.network, trajs, budget, UtilitySpec::power(1.1))
}
