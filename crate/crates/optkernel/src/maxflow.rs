//! Highest-label push-relabel maximum flow.
//!
//! Only the preflow phase is run: it already fixes the flow value and a
//! minimum cut. The reported cut is the maximal source side, i.e. every node
//! that cannot reach the sink in the final residual graph.

use std::collections::VecDeque;
use std::fmt::Debug;
use std::ops::{Add, Sub};

use crate::error::KernelError;

/// Arithmetic needed by the flow routines.
pub trait Capacity: Copy + PartialOrd + Debug + Add<Output = Self> + Sub<Output = Self> {
    const ZERO: Self;

    /// Residuals at or below this value count as saturated.
    fn tolerance(total: Self) -> Self;

    fn is_valid(self) -> bool;
}

impl Capacity for f64 {
    const ZERO: Self = 0.0;

    fn tolerance(total: Self) -> Self {
        1e-12 * total.max(1.0)
    }

    fn is_valid(self) -> bool {
        self.is_finite() && self >= 0.0
    }
}

impl Capacity for i64 {
    const ZERO: Self = 0;

    fn tolerance(_total: Self) -> Self {
        0
    }

    fn is_valid(self) -> bool {
        self >= 0
    }
}

fn min_cap<C: Capacity>(a: C, b: C) -> C {
    if a < b {
        a
    } else {
        b
    }
}

/// Directed network with paired residual arcs (`e ^ 1` is the reverse of `e`).
#[derive(Debug, Clone)]
pub struct FlowNetwork<C> {
    n: usize,
    head: Vec<usize>,
    cap: Vec<C>,
    adj: Vec<Vec<usize>>,
}

impl<C: Capacity> FlowNetwork<C> {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            head: Vec::new(),
            cap: Vec::new(),
            adj: vec![Vec::new(); n],
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn num_arcs(&self) -> usize {
        self.head.len() / 2
    }

    /// Adds arc `u -> v` and returns its index.
    pub fn add_arc(&mut self, u: usize, v: usize, capacity: C) -> usize {
        let e = self.head.len();
        self.head.push(v);
        self.cap.push(capacity);
        self.head.push(u);
        self.cap.push(C::ZERO);
        self.adj[u].push(e);
        self.adj[v].push(e + 1);
        e / 2
    }

    /// `(tail, head, capacity)` of an arc.
    pub fn arc(&self, a: usize) -> (usize, usize, C) {
        (self.head[2 * a + 1], self.head[2 * a], self.cap[2 * a])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxFlowResult<C> {
    pub value: C,
    /// Flow on each arc, indexed like [`FlowNetwork::add_arc`] results.
    pub flow: Vec<C>,
    /// Maximal source side of a minimum cut.
    pub source_side: Vec<bool>,
}

pub fn max_flow(net: &FlowNetwork<f64>, s: usize, t: usize) -> Result<MaxFlowResult<f64>, KernelError> {
    push_relabel(net, s, t)
}

pub fn max_flow_exact(net: &FlowNetwork<i64>, s: usize, t: usize) -> Result<MaxFlowResult<i64>, KernelError> {
    push_relabel(net, s, t)
}

struct State<'a, C> {
    net: &'a FlowNetwork<C>,
    res: Vec<C>,
    excess: Vec<C>,
    label: Vec<usize>,
    current: Vec<usize>,
    buckets: Vec<Vec<usize>>,
    in_bucket: Vec<bool>,
    count: Vec<usize>,
    highest: usize,
    eps: C,
    s: usize,
    t: usize,
}

impl<C: Capacity> State<'_, C> {
    fn activate(&mut self, v: usize) {
        let h = self.label[v];
        if v != self.s && v != self.t && h < self.net.n && !self.in_bucket[v] && self.excess[v] > self.eps {
            self.buckets[h].push(v);
            self.in_bucket[v] = true;
            self.highest = self.highest.max(h);
        }
    }

    /// Exact distances to the sink in the residual graph; unreachable nodes get `n`.
    fn global_relabel(&mut self) {
        let n = self.net.n;
        self.label.iter_mut().for_each(|d| *d = n);
        self.count.iter_mut().for_each(|c| *c = 0);
        self.label[self.t] = 0;
        let mut queue = VecDeque::from([self.t]);
        while let Some(w) = queue.pop_front() {
            for &e in &self.net.adj[w] {
                // arc v -> w is the partner of w -> v
                let v = self.net.head[e];
                if self.label[v] == n && v != self.s && self.res[e ^ 1] > self.eps {
                    self.label[v] = self.label[w] + 1;
                    queue.push_back(v);
                }
            }
        }
        self.label[self.s] = n;
        for v in 0..n {
            if self.label[v] < n {
                self.count[self.label[v]] += 1;
            }
            self.current[v] = 0;
        }
        for b in &mut self.buckets {
            b.clear();
        }
        self.in_bucket.iter_mut().for_each(|b| *b = false);
        self.highest = 0;
        for v in 0..n {
            self.activate(v);
        }
    }

    fn discharge(&mut self, v: usize) -> usize {
        let n = self.net.n;
        let mut relabels = 0;
        while self.excess[v] > self.eps && self.label[v] < n {
            if self.current[v] == self.net.adj[v].len() {
                relabels += 1;
                let old = self.label[v];
                let mut lowest = 2 * n;
                for &e in &self.net.adj[v] {
                    if self.res[e] > self.eps {
                        lowest = lowest.min(self.label[self.net.head[e]] + 1);
                    }
                }
                self.count[old] -= 1;
                if self.count[old] == 0 {
                    // gap: nothing above `old` can reach the sink any more
                    for u in 0..n {
                        if self.label[u] > old && self.label[u] < n {
                            self.count[self.label[u]] -= 1;
                            self.label[u] = n;
                        }
                    }
                    self.label[v] = n;
                    break;
                }
                self.label[v] = lowest.min(n);
                if self.label[v] < n {
                    self.count[self.label[v]] += 1;
                }
                self.current[v] = 0;
                continue;
            }
            let e = self.net.adj[v][self.current[v]];
            let w = self.net.head[e];
            if self.res[e] > self.eps && self.label[v] == self.label[w] + 1 {
                let delta = min_cap(self.excess[v], self.res[e]);
                self.res[e] = self.res[e] - delta;
                self.res[e ^ 1] = self.res[e ^ 1] + delta;
                self.excess[v] = self.excess[v] - delta;
                self.excess[w] = self.excess[w] + delta;
                self.activate(w);
            } else {
                self.current[v] += 1;
            }
        }
        relabels
    }
}

fn push_relabel<C: Capacity>(net: &FlowNetwork<C>, s: usize, t: usize) -> Result<MaxFlowResult<C>, KernelError> {
    let n = net.n;
    if s >= n || t >= n || s == t {
        return Err(KernelError::InvalidNetwork(format!("bad terminals s={s} t={t} on {n} nodes")));
    }
    let mut total = C::ZERO;
    for (e, &c) in net.cap.iter().enumerate().step_by(2) {
        if !c.is_valid() {
            return Err(KernelError::InvalidNetwork(format!("arc {} has capacity {c:?}", e / 2)));
        }
        total = total + c;
    }
    let mut st = State {
        net,
        res: net.cap.clone(),
        excess: vec![C::ZERO; n],
        label: vec![0; n],
        current: vec![0; n],
        buckets: vec![Vec::new(); n + 1],
        in_bucket: vec![false; n],
        count: vec![0; 2 * n + 1],
        highest: 0,
        eps: C::tolerance(total),
        s,
        t,
    };
    for &e in &net.adj[s] {
        let c = st.res[e];
        if c > C::ZERO {
            let w = net.head[e];
            st.res[e] = C::ZERO;
            st.res[e ^ 1] = st.res[e ^ 1] + c;
            st.excess[w] = st.excess[w] + c;
            st.excess[s] = st.excess[s] - c;
        }
    }
    st.global_relabel();

    let relabel_period = n.max(8) + net.head.len() / 2;
    let mut work = 0usize;
    loop {
        while st.highest > 0 && st.buckets[st.highest].is_empty() {
            st.highest -= 1;
        }
        let Some(v) = st.buckets[st.highest].pop() else {
            break;
        };
        st.in_bucket[v] = false;
        if st.label[v] >= n {
            continue;
        }
        work += st.discharge(v);
        if st.excess[v] > st.eps && st.label[v] < n {
            st.activate(v);
        }
        if work >= relabel_period {
            work = 0;
            st.global_relabel();
        }
    }

    let mut reaches_t = vec![false; n];
    reaches_t[t] = true;
    let mut queue = VecDeque::from([t]);
    while let Some(w) = queue.pop_front() {
        for &e in &net.adj[w] {
            let v = net.head[e];
            if !reaches_t[v] && st.res[e ^ 1] > st.eps {
                reaches_t[v] = true;
                queue.push_back(v);
            }
        }
    }
    let flow = (0..net.head.len() / 2).map(|a| net.cap[2 * a] - st.res[2 * a]).collect();
    Ok(MaxFlowResult {
        value: st.excess[t],
        flow,
        source_side: reaches_t.iter().map(|r| !r).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_network() {
        // CLRS example, max flow 23
        let mut g = FlowNetwork::new(6);
        for (u, v, c) in [
            (0, 1, 16),
            (0, 2, 13),
            (1, 3, 12),
            (2, 1, 4),
            (2, 4, 14),
            (3, 2, 9),
            (3, 5, 20),
            (4, 3, 7),
            (4, 5, 4),
        ] {
            g.add_arc(u, v, c);
        }
        let r = max_flow_exact(&g, 0, 5).unwrap();
        assert_eq!(r.value, 23);
        assert!(r.source_side[0] && !r.source_side[5]);
        let cut: i64 = (0..g.num_arcs())
            .map(|a| g.arc(a))
            .filter(|&(u, v, _)| r.source_side[u] && !r.source_side[v])
            .map(|(_, _, c)| c)
            .sum();
        assert_eq!(cut, 23);
    }

    #[test]
    fn disconnected_sink() {
        let mut g = FlowNetwork::new(3);
        g.add_arc(0, 1, 2.5);
        let r = max_flow(&g, 0, 2).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.source_side, vec![true, true, true].into_iter().enumerate().map(|(i, _)| i != 2).collect::<Vec<_>>());
    }

    #[test]
    fn maximal_source_side_on_ties() {
        // s -> a (1) -> t (1): both cuts have value 1; the maximal one keeps `a`
        let mut g = FlowNetwork::new(3);
        g.add_arc(0, 1, 1);
        g.add_arc(1, 2, 1);
        let r = max_flow_exact(&g, 0, 2).unwrap();
        assert_eq!(r.value, 1);
        assert_eq!(r.source_side, vec![true, true, false]);
    }

    #[test]
    fn rejects_negative_capacity() {
        let mut g = FlowNetwork::new(2);
        g.add_arc(0, 1, -1.0);
        assert!(max_flow(&g, 0, 1).is_err());
    }
}
