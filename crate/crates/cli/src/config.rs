//! Flat `key = value` run configuration.
//!
//! One setting per line, `#` starts a comment line. Relative paths in a file
//! are resolved against the file's directory. Unknown keys are errors.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use bikelane::model::{ContinuityFunction, UtilitySpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Ac,
    Gu,
    GuChoice,
}

impl FromStr for ModelKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ac" => Ok(ModelKind::Ac),
            "gu" => Ok(ModelKind::Gu),
            "gu-choice" => Ok(ModelKind::GuChoice),
            _ => bail!("model must be ac, gu or gu-choice, got `{s}`"),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Ac => "ac",
            ModelKind::Gu => "gu",
            ModelKind::GuChoice => "gu-choice",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Exact,
    Lagrangian,
    Greedy,
}

impl FromStr for Algo {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Algo::Exact),
            "lagrangian" => Ok(Algo::Lagrangian),
            "greedy" => Ok(Algo::Greedy),
            _ => bail!("algo must be exact, lagrangian or greedy, got `{s}`"),
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algo::Exact => "exact",
            Algo::Lagrangian => "lagrangian",
            Algo::Greedy => "greedy",
        })
    }
}

/// Every recognized key with its meaning, printed by `--help` and the README.
pub const KEYS: &[(&str, &str)] = &[
    ("network", "network file; when absent a synthetic grid is generated"),
    ("trajectories", "trajectory file; required with `network`"),
    ("stock", "stock file; when set, trajectories are decensored first"),
    ("routes", "route file, required by model gu-choice"),
    ("out", "output directory (default `out`)"),
    ("model", "ac | gu | gu-choice (default gu)"),
    ("algo", "exact | lagrangian | greedy (default lagrangian)"),
    ("lambda", "adjacency weight of model ac (default 2)"),
    ("alpha", "base of f(z) = z alpha^z for gu models (default 1.1)"),
    ("length_weighted", "measure runs in km instead of segments (default false)"),
    ("budget_km", "budget in km of lane, converted with unit_cost (default 50)"),
    ("budget", "budget in currency; overrides budget_km"),
    ("unit_cost", "currency per meter (default 1)"),
    ("epsilon", "Lagrangian stopping tolerance (default 1e-4)"),
    ("widen", "search the restricted MILP over the over-budget bracket (default false)"),
    ("k", "breakpoints of the linearized route choice (default 20)"),
    ("p_min", "smallest breakpoint probability (default 1e-4)"),
    ("mip_gap", "relative MILP gap (default 1e-6)"),
    ("time_limit", "seconds per MILP solve (default 600)"),
    ("seed", "seed of the synthetic instance (default 0)"),
    ("synth_grid", "synthetic grid as ROWSxCOLS (default 11x10)"),
    ("synth_trajectories", "synthetic walk count (default 2000)"),
    ("synth_mean_length", "synthetic mean walk length in segments (default 5)"),
    ("horizon_days", "decensoring horizon (default 14)"),
    ("stock_threshold", "availability counted as stock-out (default 0)"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub network: Option<PathBuf>,
    pub trajectories: Option<PathBuf>,
    pub stock: Option<PathBuf>,
    pub routes: Option<PathBuf>,
    pub out: PathBuf,
    pub model: ModelKind,
    pub algo: Algo,
    pub lambda: f64,
    pub alpha: f64,
    pub length_weighted: bool,
    pub budget_km: f64,
    pub budget: Option<f64>,
    pub unit_cost: f64,
    pub epsilon: f64,
    pub widen: bool,
    pub k: usize,
    pub p_min: f64,
    pub mip_gap: f64,
    pub time_limit: f64,
    pub seed: u64,
    pub synth_grid: (usize, usize),
    pub synth_trajectories: usize,
    pub synth_mean_length: usize,
    pub horizon_days: usize,
    pub stock_threshold: u32,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            network: None,
            trajectories: None,
            stock: None,
            routes: None,
            out: PathBuf::from("out"),
            model: ModelKind::Gu,
            algo: Algo::Lagrangian,
            lambda: 2.0,
            alpha: 1.1,
            length_weighted: false,
            budget_km: 50.0,
            budget: None,
            unit_cost: 1.0,
            epsilon: 1e-4,
            widen: false,
            k: 20,
            p_min: 1e-4,
            mip_gap: 1e-6,
            time_limit: 600.0,
            seed: 0,
            synth_grid: (11, 10),
            synth_trajectories: 2000,
            synth_mean_length: 5,
            horizon_days: 14,
            stock_threshold: 0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| anyhow!("invalid value `{value}` for `{key}`"))
}

fn parse_grid(value: &str) -> Result<(usize, usize)> {
    let (r, c) = value
        .split_once('x')
        .ok_or_else(|| anyhow!("synth_grid must look like 11x10, got `{value}`"))?;
    Ok((parse("synth_grid", r.trim())?, parse("synth_grid", c.trim())?))
}

impl RunConfig {
    /// Reads a config file; relative paths resolve against its directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let mut cfg = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{}:{}: expected `key = value`", path.display(), n + 1))?;
            cfg.set_in(k.trim(), v.trim(), Some(base))
                .with_context(|| format!("{}:{}", path.display(), n + 1))?;
        }
        Ok(cfg)
    }

    /// Applies one `key=value` override; relative paths stay as given.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        self.set_in(key, value, None)
    }

    fn set_in(&mut self, key: &str, value: &str, base: Option<&Path>) -> Result<()> {
        let path = |v: &str| match base {
            Some(b) if Path::new(v).is_relative() => b.join(v),
            _ => PathBuf::from(v),
        };
        match key {
            "network" => self.network = Some(path(value)),
            "trajectories" => self.trajectories = Some(path(value)),
            "stock" => self.stock = Some(path(value)),
            "routes" => self.routes = Some(path(value)),
            "out" => self.out = path(value),
            "model" => self.model = value.parse()?,
            "algo" => self.algo = value.parse()?,
            "lambda" => self.lambda = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "length_weighted" => self.length_weighted = parse(key, value)?,
            "budget_km" => {
                self.budget_km = parse(key, value)?;
                self.budget = None;
            }
            "budget" => self.budget = Some(parse(key, value)?),
            "unit_cost" => self.unit_cost = parse(key, value)?,
            "epsilon" => self.epsilon = parse(key, value)?,
            "widen" => self.widen = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            "p_min" => self.p_min = parse(key, value)?,
            "mip_gap" => self.mip_gap = parse(key, value)?,
            "time_limit" => self.time_limit = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "synth_grid" => self.synth_grid = parse_grid(value)?,
            "synth_trajectories" => self.synth_trajectories = parse(key, value)?,
            "synth_mean_length" => self.synth_mean_length = parse(key, value)?,
            "horizon_days" => self.horizon_days = parse(key, value)?,
            "stock_threshold" => self.stock_threshold = parse(key, value)?,
            _ => bail!("unknown config key `{key}`"),
        }
        Ok(())
    }

    /// Range checks, run before any input is read.
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: String| if ok { Ok(()) } else { Err(anyhow!(msg)) };
        check(self.lambda.is_finite() && self.lambda >= 0.0, format!("lambda must be >= 0, got {}", self.lambda))?;
        check(self.alpha.is_finite() && self.alpha >= 1.0, format!("alpha must be >= 1, got {}", self.alpha))?;
        check(self.budget_km.is_finite() && self.budget_km >= 0.0, format!("budget_km must be >= 0, got {}", self.budget_km))?;
        if let Some(b) = self.budget {
            check(b.is_finite() && b >= 0.0, format!("budget must be >= 0, got {b}"))?;
        }
        check(self.unit_cost.is_finite() && self.unit_cost > 0.0, format!("unit_cost must be > 0, got {}", self.unit_cost))?;
        check(self.epsilon > 0.0 && self.epsilon < 1.0, format!("epsilon must lie in (0, 1), got {}", self.epsilon))?;
        check(self.k >= 2, format!("k must be >= 2, got {}", self.k))?;
        check(self.p_min > 0.0 && self.p_min < 1.0, format!("p_min must lie in (0, 1), got {}", self.p_min))?;
        check(self.mip_gap.is_finite() && self.mip_gap >= 0.0, format!("mip_gap must be >= 0, got {}", self.mip_gap))?;
        check(self.time_limit.is_finite() && self.time_limit > 0.0, format!("time_limit must be > 0, got {}", self.time_limit))?;
        check(self.horizon_days >= 1, "horizon_days must be >= 1".into())?;
        let (r, c) = self.synth_grid;
        check(r * c >= 2, format!("synth_grid {r}x{c} has fewer than two nodes"))?;
        check(self.synth_mean_length >= 1, "synth_mean_length must be >= 1".into())?;
        check(
            self.network.is_some() == self.trajectories.is_some(),
            "network and trajectories must be given together".into(),
        )?;
        if self.model == ModelKind::GuChoice {
            check(self.routes.is_some(), "model gu-choice needs a routes file (key `routes`)".into())?;
            check(self.algo == Algo::Exact, format!("model gu-choice supports algo exact only, got {}", self.algo))?;
        }
        Ok(())
    }

    pub fn utility(&self) -> UtilitySpec {
        match self.model {
            ModelKind::Ac => UtilitySpec::ac(self.lambda),
            ModelKind::Gu | ModelKind::GuChoice => UtilitySpec::Gu {
                f: ContinuityFunction::PowerAlpha(self.alpha),
                length_weighted: self.length_weighted,
            },
        }
    }

    /// Budget in currency.
    pub fn budget_currency(&self) -> f64 {
        self.budget.unwrap_or(self.budget_km * 1000.0 * self.unit_cost)
    }

    pub fn time_limit(&self) -> Duration {
        Duration::from_secs_f64(self.time_limit)
    }

    /// Parameters as written into outputs, in key order.
    pub fn parameters(&self) -> BTreeMap<&'static str, String> {
        let mut m = BTreeMap::new();
        m.insert("model", self.model.to_string());
        m.insert("algo", self.algo.to_string());
        match self.model {
            ModelKind::Ac => {
                m.insert("lambda", self.lambda.to_string());
            }
            ModelKind::Gu | ModelKind::GuChoice => {
                m.insert("alpha", self.alpha.to_string());
                m.insert("length_weighted", self.length_weighted.to_string());
            }
        }
        m.insert("budget", self.budget_currency().to_string());
        m.insert("unit_cost", self.unit_cost.to_string());
        match self.algo {
            Algo::Lagrangian => {
                m.insert("epsilon", self.epsilon.to_string());
                m.insert("widen", self.widen.to_string());
                m.insert("mip_gap", self.mip_gap.to_string());
            }
            Algo::Exact => {
                m.insert("mip_gap", self.mip_gap.to_string());
            }
            Algo::Greedy => {}
        }
        if self.model == ModelKind::GuChoice {
            m.insert("k", self.k.to_string());
            m.insert("p_min", self.p_min.to_string());
        }
        if self.network.is_none() {
            m.insert("seed", self.seed.to_string());
            m.insert("synth_grid", format!("{}x{}", self.synth_grid.0, self.synth_grid.1));
            m.insert("synth_trajectories", self.synth_trajectories.to_string());
            m.insert("synth_mean_length", self.synth_mean_length.to_string());
        }
        m
    }
}
