//! Continuity-utility algebra.
//!
//! A trajectory's utility is the sum of `f(measure)` over its maximal runs of
//! selected positions. The same value is a linear function of products over
//! contiguous sublists once every sublist `l` carries the coefficient
//!
//! ```text
//! beta(l) = f(m(l)) - f(m(l without last)) - f(m(l without first)) + f(m(l without both ends))
//! ```
//!
//! where `m` is the sublist's size (or length in km) and `f` of an empty
//! sublist is zero. With unit lengths this is the second difference
//! `f(k) - 2 f(k-1) + f(k-2)`.

use std::collections::HashMap;
use std::ops::Range;

use crate::error::Result;
use crate::model::{ContinuityFunction, PlanningInstance};

/// Maximal runs of selected positions, as half-open position ranges.
pub fn decompose_runs(r: &[usize], selected: &[bool]) -> Vec<Range<usize>> {
    let mut runs = Vec::new();
    let mut start = None;
    for (p, &seg) in r.iter().enumerate() {
        match (selected[seg], start) {
            (true, None) => start = Some(p),
            (false, Some(s)) => {
                runs.push(s..p);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push(s..r.len());
    }
    runs
}

/// Evaluates `f` on run measures, memoizing integer sizes.
#[derive(Debug, Clone)]
pub struct RunValuer {
    f: ContinuityFunction,
    /// Per-segment lengths in km when runs are measured by length.
    lengths_km: Option<Vec<f64>>,
    memo: Vec<f64>,
}

impl RunValuer {
    pub fn new(f: &ContinuityFunction, lengths_km: Option<&[f64]>, max_size: usize) -> Self {
        let mut memo = vec![0.0];
        if lengths_km.is_none() {
            for k in 1..=max_size {
                match f.eval(k as f64) {
                    Ok(v) => memo.push(v),
                    Err(_) => break,
                }
            }
        }
        Self {
            f: f.clone(),
            lengths_km: lengths_km.map(<[f64]>::to_vec),
            memo,
        }
    }

    /// Valuer for an instance's utility and trajectories.
    pub fn for_instance(inst: &PlanningInstance) -> Self {
        let lengths = inst.lengths_km();
        let lw = inst.utility.length_weighted().then_some(lengths.as_slice());
        Self::new(&inst.utility.run_function(), lw, inst.stats.longest_trajectory)
    }

    fn size(&self, k: usize) -> Result<f64> {
        match self.memo.get(k) {
            Some(&v) => Ok(v),
            None => self.f.eval(k as f64),
        }
    }

    /// `f` of the sublist `r[range]`.
    pub fn value(&self, r: &[usize], range: Range<usize>) -> Result<f64> {
        if range.is_empty() {
            return Ok(0.0);
        }
        match &self.lengths_km {
            None => self.size(range.len()),
            Some(len) => self.f.eval(r[range].iter().map(|&i| len[i]).sum()),
        }
    }

    pub fn trajectory(&self, r: &[usize], selected: &[bool]) -> Result<f64> {
        utility_of_runs_with(self, r, &decompose_runs(r, selected))
    }
}

fn utility_of_runs_with(valuer: &RunValuer, r: &[usize], runs: &[Range<usize>]) -> Result<f64> {
    runs.iter().map(|run| valuer.value(r, run.clone())).sum()
}

/// `sum f(measure(run))`; `lengths_km` switches the measure from size to length.
pub fn utility_of_runs(
    r: &[usize],
    runs: &[Range<usize>],
    f: &ContinuityFunction,
    lengths_km: Option<&[f64]>,
) -> Result<f64> {
    utility_of_runs_with(&RunValuer::new(f, lengths_km, r.len()), r, runs)
}

/// Weighted utility of a selection over all trajectories of an instance.
pub fn total_utility(inst: &PlanningInstance, selected: &[bool]) -> Result<f64> {
    let valuer = RunValuer::for_instance(inst);
    let mut total = 0.0;
    for t in &inst.trajectories {
        if t.weight != 0.0 {
            total += t.weight * valuer.trajectory(&t.segments, selected)?;
        }
    }
    Ok(total)
}

/// All contiguous position ranges of a length-`n` trajectory, shortest first,
/// then by start.
pub fn enumerate_sublists(n: usize) -> Vec<Range<usize>> {
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for len in 1..=n {
        for start in 0..=n - len {
            out.push(start..start + len);
        }
    }
    out
}

/// Sublist coefficients of one trajectory, in [`enumerate_sublists`] order.
pub fn beta_coefficients(
    r: &[usize],
    f: &ContinuityFunction,
    lengths_km: Option<&[f64]>,
) -> Result<Vec<(Range<usize>, f64)>> {
    beta_with(&RunValuer::new(f, lengths_km, r.len()), r)
}

fn beta_with(valuer: &RunValuer, r: &[usize]) -> Result<Vec<(Range<usize>, f64)>> {
    let n = r.len();
    // value[s][len]
    let mut value = vec![vec![0.0; n + 1]; n + 1];
    for s in 0..n {
        for len in 1..=n - s {
            value[s][len] = valuer.value(r, s..s + len)?;
        }
    }
    let at = |s: usize, len: isize| if len <= 0 { 0.0 } else { value[s][len as usize] };
    Ok(enumerate_sublists(n)
        .into_iter()
        .map(|g| {
            let (s, k) = (g.start, g.len() as isize);
            let beta = at(s, k) - at(s, k - 1) - at(s + 1, k - 1) + at(s + 1, k - 2);
            (g, beta)
        })
        .collect())
}

/// `sum beta(l)` over sublists whose positions are all selected.
pub fn expansion_value(r: &[usize], selected: &[bool], betas: &[(Range<usize>, f64)]) -> f64 {
    // prefix count of unselected positions
    let mut holes = vec![0usize; r.len() + 1];
    for (p, &seg) in r.iter().enumerate() {
        holes[p + 1] = holes[p] + usize::from(!selected[seg]);
    }
    betas
        .iter()
        .filter(|(g, _)| holes[g.end] == holes[g.start])
        .map(|(_, b)| b)
        .sum()
}

/// Canonical key of a segment tuple: the tuple or its reverse, whichever is smaller.
pub fn canonical_key(segments: &[usize]) -> Vec<usize> {
    let rev: Vec<usize> = segments.iter().rev().copied().collect();
    if rev.as_slice() < segments {
        rev
    } else {
        segments.to_vec()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SublistEntry {
    pub key: Vec<usize>,
    /// Weighted sum of per-trajectory coefficients.
    pub beta: f64,
}

/// Merged sublist coefficients across trajectories.
#[derive(Debug, Clone, Default)]
pub struct SublistFamily {
    entries: Vec<SublistEntry>,
    index: HashMap<Vec<usize>, usize>,
}

impl SublistFamily {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `weight * beta(l)` for every positional sublist `l` of `r`.
    pub fn register(&mut self, r: &[usize], weight: f64, valuer: &RunValuer) -> Result<()> {
        for (g, beta) in beta_with(valuer, r)? {
            let k = self.insert(canonical_key(&r[g]));
            self.entries[k].beta += weight * beta;
        }
        Ok(())
    }

    fn insert(&mut self, key: Vec<usize>) -> usize {
        if let Some(&k) = self.index.get(&key) {
            return k;
        }
        let k = self.entries.len();
        self.index.insert(key.clone(), k);
        self.entries.push(SublistEntry { key, beta: 0.0 });
        k
    }

    /// Family of all trajectories of an instance under its utility.
    pub fn from_instance(inst: &PlanningInstance) -> Result<Self> {
        let valuer = RunValuer::for_instance(inst);
        let mut fam = Self::new();
        for t in &inst.trajectories {
            fam.register(&t.segments, t.weight, &valuer)?;
        }
        Ok(fam)
    }

    pub fn entries(&self) -> &[SublistEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn find(&self, segments: &[usize]) -> Option<usize> {
        self.index.get(&canonical_key(segments)).copied()
    }

    /// Entries for the key without its first and without its last element.
    pub fn children(&self, k: usize) -> Option<(usize, usize)> {
        let key = &self.entries[k].key;
        if key.len() < 2 {
            return None;
        }
        let a = self.find(&key[1..]).expect("sublists are registered with all their sub-sublists");
        let b = self.find(&key[..key.len() - 1]).expect("sublists are registered with all their sub-sublists");
        Some((a, b))
    }
}
