//! Maximum-weight closure by reduction to minimum cut.
//!
//! Choose a subset of nodes closed under `requires` arcs (`(u, v)`: picking
//! `u` forces `v`) with the largest total weight. Nodes can additionally be
//! forced in or out. Among optimal closures the largest one is returned.

use std::ops::Neg;

use crate::error::KernelError;
use crate::maxflow::{max_flow, max_flow_exact, Capacity, FlowNetwork};

#[derive(Debug, Clone, PartialEq)]
pub struct ClosureProblem<W = f64> {
    pub weights: Vec<W>,
    pub requires: Vec<(usize, usize)>,
    pub forced_in: Vec<usize>,
    pub forced_out: Vec<usize>,
}

impl<W> ClosureProblem<W> {
    pub fn new(weights: Vec<W>) -> Self {
        Self {
            weights,
            requires: Vec::new(),
            forced_in: Vec::new(),
            forced_out: Vec::new(),
        }
    }

    pub fn require(&mut self, u: usize, v: usize) {
        self.requires.push((u, v));
    }

    fn check(&self) -> Result<(), KernelError> {
        let n = self.weights.len();
        let bad = self.requires.iter().any(|&(u, v)| u >= n || v >= n)
            || self.forced_in.iter().chain(&self.forced_out).any(|&v| v >= n);
        if bad {
            return Err(KernelError::InvalidNetwork(format!("closure index out of range for {n} nodes")));
        }
        Ok(())
    }

    /// Nodes reachable from the forced-in set; `None` if that hits a forced-out node.
    fn forced_closure(&self) -> Option<Vec<bool>> {
        let n = self.weights.len();
        let mut out = vec![false; n];
        for &v in &self.forced_out {
            out[v] = true;
        }
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in &self.requires {
            adj[u].push(v);
        }
        let mut seen = vec![false; n];
        let mut stack: Vec<usize> = self.forced_in.clone();
        while let Some(u) = stack.pop() {
            if seen[u] {
                continue;
            }
            if out[u] {
                return None;
            }
            seen[u] = true;
            stack.extend(adj[u].iter().copied().filter(|&v| !seen[v]));
        }
        Some(seen)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosureSolution<W = f64> {
    pub selected: Vec<bool>,
    /// Sum of the selected weights.
    pub weight: W,
}

fn build<W>(p: &ClosureProblem<W>, inf: W) -> FlowNetwork<W>
where
    W: Capacity + Neg<Output = W>,
{
    let n = p.weights.len();
    let (s, t) = (n, n + 1);
    let mut g = FlowNetwork::new(n + 2);
    for (v, &w) in p.weights.iter().enumerate() {
        if w > W::ZERO {
            g.add_arc(s, v, w);
        } else if w < W::ZERO {
            g.add_arc(v, t, -w);
        }
    }
    for &(u, v) in &p.requires {
        g.add_arc(u, v, inf);
    }
    for &v in &p.forced_in {
        g.add_arc(s, v, inf);
    }
    for &v in &p.forced_out {
        g.add_arc(v, t, inf);
    }
    g
}

fn finish<W: Capacity>(p: &ClosureProblem<W>, source_side: &[bool]) -> ClosureSolution<W> {
    let n = p.weights.len();
    let selected = source_side[..n].to_vec();
    let weight = p
        .weights
        .iter()
        .zip(&selected)
        .filter(|(_, &s)| s)
        .fold(W::ZERO, |acc, (&w, _)| acc + w);
    ClosureSolution { selected, weight }
}

/// Floating-point closure. Returns `None` when the forced sets conflict.
pub fn solve_closure(p: &ClosureProblem<f64>) -> Result<Option<ClosureSolution<f64>>, KernelError> {
    p.check()?;
    if p.weights.iter().any(|w| !w.is_finite()) {
        return Err(KernelError::InvalidNetwork("non-finite closure weight".into()));
    }
    if p.forced_closure().is_none() {
        return Ok(None);
    }
    let inf = 1.0 + p.weights.iter().map(|w| w.abs()).sum::<f64>();
    let n = p.weights.len();
    let r = max_flow(&build(p, inf), n, n + 1)?;
    Ok(Some(finish(p, &r.source_side)))
}

/// Integer closure with exact arithmetic.
pub fn solve_closure_exact(p: &ClosureProblem<i64>) -> Result<Option<ClosureSolution<i64>>, KernelError> {
    p.check()?;
    if p.forced_closure().is_none() {
        return Ok(None);
    }
    let inf = p
        .weights
        .iter()
        .try_fold(1i64, |acc, w| acc.checked_add(w.checked_abs()?))
        .ok_or_else(|| KernelError::InvalidNetwork("closure weights overflow i64".into()))?;
    let n = p.weights.len();
    let r = max_flow_exact(&build(p, inf), n, n + 1)?;
    Ok(Some(finish(p, &r.source_side)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn project_selection() {
        // projects 0,1 need tools 2,3; tool 3 shared
        let mut p = ClosureProblem::new(vec![10, 4, -5, -6]);
        p.require(0, 2);
        p.require(0, 3);
        p.require(1, 3);
        let s = solve_closure_exact(&p).unwrap().unwrap();
        assert_eq!(s.weight, 3);
        assert_eq!(s.selected, vec![true, true, true, true]);
    }

    #[test]
    fn zero_weight_ties_take_everything_free() {
        let p = ClosureProblem::new(vec![0.0, 0.0]);
        let s = solve_closure(&p).unwrap().unwrap();
        assert_eq!(s.selected, vec![true, true]);
    }

    #[test]
    fn forced_sets() {
        let mut p = ClosureProblem::new(vec![-1, 5, -10]);
        p.require(1, 2);
        p.forced_in.push(0);
        let s = solve_closure_exact(&p).unwrap().unwrap();
        assert_eq!(s.selected, vec![true, false, false]);
        assert_eq!(s.weight, -1);
        p.forced_out.push(2);
        p.forced_in.push(1);
        assert!(solve_closure_exact(&p).unwrap().is_none());
    }
}
