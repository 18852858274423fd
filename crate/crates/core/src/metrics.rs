//! Coverage and continuity statistics of a plan.

use std::fmt::Write as _;

use serde::Serialize;

use crate::model::PlanningInstance;
use crate::utility::decompose_runs;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopologyReport {
    pub n_lanes: usize,
    /// Neighbor pairs with both segments selected.
    pub continuous_pairs: usize,
    /// `2 * continuous_pairs / n_lanes`.
    pub mean_connections: f64,
    /// Trajectory-weighted mean size of covered runs.
    pub mean_run_size: f64,
    pub max_run_size: usize,
    /// `sum d_i x_i / sum d_i`.
    pub coverage_ratio: f64,
    /// Weighted share of trajectories covered end to end.
    pub strict_coverage_ratio: f64,
}

pub const REPORT_COLUMNS: [&str; 7] = [
    "n_lanes",
    "continuous_pairs",
    "mean_connections",
    "mean_run_size",
    "max_run_size",
    "coverage_ratio",
    "strict_coverage_ratio",
];

/// Comment line opening every report file.
pub const REPORT_NOTE: &str = "# mean_connections = 2 * continuous_pairs / n_lanes; coverage_ratio is demand weighted";

pub fn topology(inst: &PlanningInstance, selected: &[usize]) -> TopologyReport {
    let mask = inst.mask(selected);
    let n_lanes = mask.iter().filter(|&&s| s).count();
    let continuous_pairs = inst.network.neighbors().iter().filter(|&&(a, b)| mask[a] && mask[b]).count();
    let (mut run_weight, mut run_total, mut max_run_size) = (0.0, 0.0, 0);
    let (mut full_weight, mut traj_weight) = (0.0, 0.0);
    for t in &inst.trajectories {
        let runs = decompose_runs(&t.segments, &mask);
        for r in &runs {
            run_weight += t.weight;
            run_total += t.weight * r.len() as f64;
            max_run_size = max_run_size.max(r.len());
        }
        traj_weight += t.weight;
        if runs.len() == 1 && runs[0].len() == t.len() {
            full_weight += t.weight;
        }
    }
    let demand: f64 = inst.d_seg.iter().sum();
    let covered: f64 = inst.d_seg.iter().zip(&mask).filter(|(_, &s)| s).map(|(d, _)| d).sum();
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    TopologyReport {
        n_lanes,
        continuous_pairs,
        mean_connections: ratio(2.0 * continuous_pairs as f64, n_lanes as f64),
        mean_run_size: ratio(run_total, run_weight),
        max_run_size,
        coverage_ratio: ratio(covered, demand).min(1.0),
        strict_coverage_ratio: ratio(full_weight, traj_weight).min(1.0),
    }
}

impl TopologyReport {
    pub fn csv_header() -> String {
        REPORT_COLUMNS.join(",")
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.n_lanes,
            self.continuous_pairs,
            self.mean_connections,
            self.mean_run_size,
            self.max_run_size,
            self.coverage_ratio,
            self.strict_coverage_ratio
        )
    }

    /// Note line, header and one row.
    pub fn to_csv(&self) -> String {
        format!("{REPORT_NOTE}\n{}\n{}\n", Self::csv_header(), self.csv_row())
    }
}

/// Percentage changes against a baseline; `None` where the baseline is zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TradeoffRow {
    pub coverage_ratio: Option<f64>,
    pub mean_connections: Option<f64>,
    pub mean_run_size: Option<f64>,
}

fn pct(base: f64, other: f64) -> Option<f64> {
    (base != 0.0).then(|| 100.0 * (other - base) / base)
}

pub fn tradeoff_table(baseline: &TopologyReport, others: &[TopologyReport]) -> Vec<TradeoffRow> {
    others
        .iter()
        .map(|o| TradeoffRow {
            coverage_ratio: pct(baseline.coverage_ratio, o.coverage_ratio),
            mean_connections: pct(baseline.mean_connections, o.mean_connections),
            mean_run_size: pct(baseline.mean_run_size, o.mean_run_size),
        })
        .collect()
}

/// CSV of a trade-off table; empty cells mark undefined changes.
pub fn tradeoff_csv(labels: &[String], rows: &[TradeoffRow]) -> String {
    let cell = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_default();
    let mut s = String::from("label,coverage_change_pct,mean_connections_change_pct,mean_run_size_change_pct\n");
    for (l, r) in labels.iter().zip(rows) {
        let _ = writeln!(
            s,
            "{l},{},{},{}",
            cell(r.coverage_ratio),
            cell(r.mean_connections),
            cell(r.mean_run_size)
        );
    }
    s
}
