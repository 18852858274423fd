//! Bounded-variable simplex on a dense tableau.
//!
//! Every row `i` gets a logical variable `s_i` with column `e_i`, so the row
//! reads `a_i x + s_i = b_i` and the relation is encoded in the bounds of
//! `s_i` (`<=`: `[0, inf)`, `>=`: `(-inf, 0]`, `=`: `[0, 0]`). The tableau
//! stores `B^-1 [A | I]` together with `B^-1 b` and the reduced-cost row.
//!
//! Primal phase 1 minimizes the sum of bound violations of basic variables,
//! phase 2 is the textbook bounded primal simplex, and a bounded dual simplex
//! re-optimizes after bound changes (used by branch-and-bound). Dantzig pricing
//! switches to Bland's rule after a streak of degenerate pivots.

use log::trace;

use crate::error::KernelError;
use crate::model::{LinearModel, Relation};

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub feas_tol: f64,
    pub opt_tol: f64,
    pub pivot_tol: f64,
    /// Degenerate pivots in a row before switching to Bland's rule.
    pub bland_after: usize,
    pub max_iterations: Option<usize>,
    /// Upper limit on `rows * (structural + rows)` tableau entries.
    pub max_dense_entries: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-9,
            opt_tol: 1e-9,
            pivot_tol: 1e-9,
            bland_after: 50,
            max_iterations: None,
            max_dense_entries: 30_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub value: f64,
    /// Structural variable values.
    pub primal: Vec<f64>,
    /// Row duals: `d value / d rhs_i` at the optimum (maximization sense).
    pub duals: Vec<f64>,
    /// Reduced costs of structural variables.
    pub reduced_costs: Vec<f64>,
    /// `true` for structural variables in the final basis.
    pub basic: Vec<bool>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpResult {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

impl LpResult {
    pub fn optimal(&self) -> Option<&LpSolution> {
        match self {
            LpResult::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

/// Solve a maximization LP from a slack basis.
pub fn solve_lp(model: &LinearModel) -> Result<LpResult, KernelError> {
    let mut simplex = Simplex::new(model, SimplexOptions::default())?;
    Ok(match simplex.solve()? {
        LpStatus::Optimal => LpResult::Optimal(simplex.solution()),
        LpStatus::Infeasible => LpResult::Infeasible,
        LpStatus::Unbounded => LpResult::Unbounded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic,
    Lower,
    Upper,
    Free,
}

enum Ratio {
    Unbounded,
    Flip(f64),
    Pivot { row: usize, step: f64, to_upper: bool },
}

/// Persistent simplex state; bounds may be changed between [`Simplex::solve`] calls.
pub struct Simplex {
    m: usize,
    n: usize,
    ncols: usize,
    /// Original structural matrix, sparse by column: (row, value).
    cols: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
    cost: Vec<f64>,
    offset: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
    tab: Vec<f64>,
    beta: Vec<f64>,
    d: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<State>,
    x: Vec<f64>,
    opts: SimplexOptions,
    iterations: usize,
    pivots_since_refactor: usize,
    degenerate_streak: usize,
    solve_start: usize,
}

impl Simplex {
    pub fn new(model: &LinearModel, opts: SimplexOptions) -> Result<Self, KernelError> {
        model.validate()?;
        let m = model.num_constraints();
        let n = model.num_vars();
        let ncols = n + m;
        if m.saturating_mul(ncols) > opts.max_dense_entries {
            return Err(KernelError::TooLarge { rows: m, cols: ncols });
        }
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut tab = vec![0.0; m * ncols];
        let mut b = vec![0.0; m];
        let mut lower = Vec::with_capacity(ncols);
        let mut upper = Vec::with_capacity(ncols);
        let mut cost = Vec::with_capacity(ncols);
        for v in &model.variables {
            lower.push(v.lower);
            upper.push(v.upper);
            cost.push(v.objective);
        }
        for (i, c) in model.constraints.iter().enumerate() {
            for &(v, a) in &c.terms {
                tab[i * ncols + v.0] += a;
            }
            for j in 0..n {
                let a = tab[i * ncols + j];
                if a != 0.0 {
                    cols[j].push((i, a));
                }
            }
            tab[i * ncols + n + i] = 1.0;
            b[i] = c.rhs;
            let (lo, hi) = match c.relation {
                Relation::Le => (0.0, f64::INFINITY),
                Relation::Ge => (f64::NEG_INFINITY, 0.0),
                Relation::Eq => (0.0, 0.0),
            };
            lower.push(lo);
            upper.push(hi);
            cost.push(0.0);
        }
        let mut state = vec![State::Lower; ncols];
        let mut basis = Vec::with_capacity(m);
        for i in 0..m {
            basis.push(n + i);
            state[n + i] = State::Basic;
        }
        let mut simplex = Self {
            m,
            n,
            ncols,
            cols,
            beta: b.clone(),
            b,
            d: cost.clone(),
            cost,
            offset: model.objective_offset,
            lower,
            upper,
            tab,
            basis,
            state,
            x: vec![0.0; ncols],
            opts,
            iterations: 0,
            pivots_since_refactor: 0,
            degenerate_streak: 0,
            solve_start: 0,
        };
        for j in 0..n {
            simplex.place_nonbasic(j);
        }
        Ok(simplex)
    }

    pub fn num_structural(&self) -> usize {
        self.n
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lower[j], self.upper[j])
    }

    /// Change the bounds of structural variable `j`.
    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        assert!(j < self.n, "structural index out of range");
        self.lower[j] = lower;
        self.upper[j] = upper;
        if self.state[j] != State::Basic {
            self.place_nonbasic(j);
        }
    }

    /// Objective value at the current point (offset included).
    pub fn objective(&self) -> f64 {
        self.offset + (0..self.n).map(|j| self.cost[j] * self.x[j]).sum::<f64>()
    }

    pub fn values(&self) -> &[f64] {
        &self.x[..self.n]
    }

    pub fn solution(&self) -> LpSolution {
        LpSolution {
            value: self.objective(),
            primal: self.x[..self.n].to_vec(),
            duals: (0..self.m).map(|i| -self.d[self.n + i]).collect(),
            reduced_costs: self.d[..self.n].to_vec(),
            basic: (0..self.n).map(|j| self.state[j] == State::Basic).collect(),
            iterations: self.iterations,
        }
    }

    fn max_iterations(&self) -> usize {
        self.opts
            .max_iterations
            .unwrap_or(100_000 + 50 * (self.m + self.n))
    }

    fn tol(&self, bound: f64) -> f64 {
        self.opts.feas_tol * (1.0 + bound.abs())
    }

    /// Put a nonbasic variable at the bound preferred by its reduced cost.
    fn place_nonbasic(&mut self, j: usize) {
        let (lo, hi) = (self.lower[j], self.upper[j]);
        let (state, value) = match (lo.is_finite(), hi.is_finite()) {
            (true, true) => {
                if self.d[j] > 0.0 && hi > lo {
                    (State::Upper, hi)
                } else {
                    (State::Lower, lo)
                }
            }
            (true, false) => (State::Lower, lo),
            (false, true) => (State::Upper, hi),
            (false, false) => (State::Free, 0.0),
        };
        self.state[j] = state;
        self.x[j] = value;
    }

    fn recompute_basic_values(&mut self) {
        let ncols = self.ncols;
        let mut xb = self.beta.clone();
        for j in 0..ncols {
            if self.state[j] == State::Basic {
                continue;
            }
            let xj = self.x[j];
            if xj == 0.0 {
                continue;
            }
            for (i, v) in xb.iter_mut().enumerate() {
                let t = self.tab[i * ncols + j];
                if t != 0.0 {
                    *v -= t * xj;
                }
            }
        }
        for (i, &bv) in self.basis.iter().enumerate() {
            self.x[bv] = xb[i];
        }
    }

    fn infeasibility(&self, var: usize) -> f64 {
        let v = self.x[var];
        let (lo, hi) = (self.lower[var], self.upper[var]);
        if v < lo - self.tol(lo) {
            lo - v
        } else if v > hi + self.tol(hi) {
            v - hi
        } else {
            0.0
        }
    }

    fn primal_feasible(&self) -> bool {
        self.basis.iter().all(|&bv| self.infeasibility(bv) == 0.0)
    }

    fn dual_feasible(&self) -> bool {
        let tol = self.opts.opt_tol * 10.0;
        (0..self.ncols).all(|j| match self.state[j] {
            State::Basic => true,
            State::Lower => self.upper[j] <= self.lower[j] || self.d[j] <= tol,
            State::Upper => self.upper[j] <= self.lower[j] || self.d[j] >= -tol,
            State::Free => self.d[j].abs() <= tol,
        })
    }

    /// Run the simplex from the current basis.
    pub fn solve(&mut self) -> Result<LpStatus, KernelError> {
        self.solve_start = self.iterations;
        for j in 0..self.ncols {
            if self.state[j] != State::Basic {
                self.place_nonbasic(j);
            }
        }
        self.recompute_basic_values();
        for attempt in 0..3 {
            let status = if self.primal_feasible() {
                self.primal(false)?
            } else if self.dual_feasible() {
                match self.dual()? {
                    Some(LpStatus::Optimal) => self.primal(false)?,
                    Some(other) => other,
                    // stalled on a degenerate vertex: restart from the same basis in the primal
                    None => match self.primal(true)? {
                        LpStatus::Optimal => self.primal(false)?,
                        other => other,
                    },
                }
            } else {
                match self.primal(true)? {
                    LpStatus::Optimal => self.primal(false)?,
                    other => other,
                }
            };
            if status != LpStatus::Optimal || self.residual() <= 1e-7 * (1.0 + self.scale()) {
                if status == LpStatus::Infeasible && attempt == 0 && self.pivots_since_refactor > 0 {
                    // confirm infeasibility on a fresh factorization
                    self.refactor()?;
                    self.recompute_basic_values();
                    continue;
                }
                return Ok(status);
            }
            trace!("simplex residual {} too large, refactoring", self.residual());
            self.refactor()?;
            self.recompute_basic_values();
        }
        Err(KernelError::SingularBasis)
    }

    fn scale(&self) -> f64 {
        self.b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    /// Max row residual `|A x + s - b|` from the original data.
    fn residual(&self) -> f64 {
        let mut act: Vec<f64> = (0..self.m).map(|i| self.x[self.n + i]).collect();
        for (j, col) in self.cols.iter().enumerate() {
            for &(i, a) in col {
                act[i] += a * self.x[j];
            }
        }
        act.iter()
            .zip(&self.b)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()))
    }

    fn bump_iteration(&mut self) -> Result<(), KernelError> {
        self.iterations += 1;
        if self.iterations - self.solve_start > self.max_iterations() {
            return Err(KernelError::IterationLimit(self.max_iterations()));
        }
        Ok(())
    }

    fn phase1_costs(&self) -> Vec<f64> {
        let ncols = self.ncols;
        let mut d1 = vec![0.0; ncols];
        for (i, &bv) in self.basis.iter().enumerate() {
            let v = self.x[bv];
            let g = if v < self.lower[bv] - self.tol(self.lower[bv]) {
                1.0
            } else if v > self.upper[bv] + self.tol(self.upper[bv]) {
                -1.0
            } else {
                continue;
            };
            let row = &self.tab[i * ncols..(i + 1) * ncols];
            for (dj, t) in d1.iter_mut().zip(row) {
                if *t != 0.0 {
                    *dj -= g * t;
                }
            }
        }
        d1
    }

    fn choose_entering(&self, d: &[f64], bland: bool) -> Option<(usize, f64)> {
        let tol = self.opts.opt_tol;
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.ncols {
            let dir = match self.state[j] {
                State::Basic => continue,
                State::Lower if self.upper[j] > self.lower[j] && d[j] > tol => 1.0,
                State::Upper if self.upper[j] > self.lower[j] && d[j] < -tol => -1.0,
                State::Free if d[j].abs() > tol => d[j].signum(),
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            if d[j].abs() > best_score {
                best_score = d[j].abs();
                best = Some((j, dir));
            }
        }
        best
    }

    fn ratio_test(&self, q: usize, dir: f64, phase1: bool, bland: bool) -> Ratio {
        let ncols = self.ncols;
        let mut best: Option<(usize, f64, bool, f64)> = None;
        for i in 0..self.m {
            let t = self.tab[i * ncols + q];
            let alpha = -t * dir;
            if alpha.abs() <= self.opts.pivot_tol {
                continue;
            }
            let bv = self.basis[i];
            let v = self.x[bv];
            let (lo, hi) = (self.lower[bv], self.upper[bv]);
            let candidate = if phase1 && v < lo - self.tol(lo) {
                (alpha > 0.0).then(|| ((lo - v) / alpha, false))
            } else if phase1 && v > hi + self.tol(hi) {
                (alpha < 0.0).then(|| ((hi - v) / alpha, true))
            } else if alpha > 0.0 {
                hi.is_finite().then(|| (((hi - v) / alpha).max(0.0), true))
            } else {
                lo.is_finite().then(|| (((lo - v) / alpha).max(0.0), false))
            };
            let Some((step, to_upper)) = candidate else { continue };
            let better = match best {
                None => true,
                Some((bi, bs, _, ba)) => {
                    if step < bs - 1e-12 {
                        true
                    } else if step <= bs + 1e-12 {
                        if bland {
                            bv < self.basis[bi]
                        } else {
                            alpha.abs() > ba
                        }
                    } else {
                        false
                    }
                }
            };
            if better {
                best = Some((i, step, to_upper, alpha.abs()));
            }
        }
        let flip = self.upper[q] - self.lower[q];
        match best {
            Some((_, step, _, _)) if flip.is_finite() && flip <= step => Ratio::Flip(flip),
            Some((row, step, to_upper, _)) => Ratio::Pivot { row, step, to_upper },
            None if flip.is_finite() => Ratio::Flip(flip),
            None => Ratio::Unbounded,
        }
    }

    fn move_along(&mut self, q: usize, dir: f64, step: f64) {
        if step == 0.0 {
            return;
        }
        let ncols = self.ncols;
        self.x[q] += dir * step;
        for i in 0..self.m {
            let t = self.tab[i * ncols + q];
            if t != 0.0 {
                let bv = self.basis[i];
                self.x[bv] -= t * dir * step;
            }
        }
    }

    fn primal(&mut self, phase1: bool) -> Result<LpStatus, KernelError> {
        self.degenerate_streak = 0;
        loop {
            if phase1 && self.primal_feasible() {
                return Ok(LpStatus::Optimal);
            }
            self.bump_iteration()?;
            let bland = self.degenerate_streak >= self.opts.bland_after;
            let entering = if phase1 {
                let d1 = self.phase1_costs();
                self.choose_entering(&d1, bland)
            } else {
                self.choose_entering(&self.d, bland)
            };
            let Some((q, dir)) = entering else {
                return Ok(if phase1 { LpStatus::Infeasible } else { LpStatus::Optimal });
            };
            match self.ratio_test(q, dir, phase1, bland) {
                Ratio::Unbounded => {
                    return Ok(if phase1 { LpStatus::Infeasible } else { LpStatus::Unbounded });
                }
                Ratio::Flip(step) => {
                    self.move_along(q, dir, step);
                    self.state[q] = if dir > 0.0 { State::Upper } else { State::Lower };
                    self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
                    self.degenerate_streak = 0;
                }
                Ratio::Pivot { row, step, to_upper } => {
                    if step <= 1e-12 {
                        self.degenerate_streak += 1;
                    } else {
                        self.degenerate_streak = 0;
                    }
                    self.move_along(q, dir, step);
                    let leaving = self.basis[row];
                    self.x[leaving] = if to_upper { self.upper[leaving] } else { self.lower[leaving] };
                    self.state[leaving] = if to_upper { State::Upper } else { State::Lower };
                    if !self.x[leaving].is_finite() {
                        self.x[leaving] = 0.0;
                        self.state[leaving] = State::Free;
                    }
                    self.pivot(row, q);
                }
            }
        }
    }

    /// Bounded dual simplex; `None` when it stalls on a degenerate vertex
    /// long after switching to Bland's rule.
    fn dual(&mut self) -> Result<Option<LpStatus>, KernelError> {
        self.degenerate_streak = 0;
        let ncols = self.ncols;
        loop {
            let bland = self.degenerate_streak >= self.opts.bland_after;
            if self.degenerate_streak >= self.opts.bland_after + 10 * (self.m + 1) {
                trace!("dual simplex stalled after {} degenerate pivots", self.degenerate_streak);
                return Ok(None);
            }
            // leaving row
            let mut leave: Option<(usize, f64)> = None;
            for (i, &bv) in self.basis.iter().enumerate() {
                let inf = self.infeasibility(bv);
                if inf == 0.0 {
                    continue;
                }
                let better = match leave {
                    None => true,
                    Some((li, linf)) => {
                        if bland {
                            bv < self.basis[li]
                        } else {
                            inf > linf
                        }
                    }
                };
                if better {
                    leave = Some((i, inf));
                }
            }
            let Some((r, _)) = leave else {
                return Ok(Some(LpStatus::Optimal));
            };
            self.bump_iteration()?;
            let bv = self.basis[r];
            let below = self.x[bv] < self.lower[bv];
            let target = if below { self.lower[bv] } else { self.upper[bv] };
            let want = if below { 1.0 } else { -1.0 };
            let mut enter: Option<(usize, f64, f64)> = None;
            for k in 0..ncols {
                let st = self.state[k];
                if st == State::Basic || self.upper[k] <= self.lower[k] {
                    continue;
                }
                let a = self.tab[r * ncols + k];
                if a.abs() <= self.opts.pivot_tol {
                    continue;
                }
                // x_r changes by -a * dx_k; `raise` means dx_k > 0 moves x_r the right way
                let raise = -a * want > 0.0;
                let allowed = match st {
                    State::Lower => raise,
                    State::Upper => !raise,
                    State::Free => true,
                    State::Basic => false,
                };
                if !allowed {
                    continue;
                }
                let ratio = self.d[k].abs() / a.abs();
                let better = match enter {
                    None => true,
                    Some((ek, er, ea)) => {
                        if ratio < er - 1e-12 {
                            true
                        } else if ratio <= er + 1e-12 {
                            if bland {
                                k < ek
                            } else {
                                a.abs() > ea
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    enter = Some((k, ratio, a.abs()));
                }
            }
            let Some((q, ratio, _)) = enter else {
                return Ok(Some(LpStatus::Infeasible));
            };
            if ratio <= 1e-12 {
                self.degenerate_streak += 1;
            } else {
                self.degenerate_streak = 0;
            }
            let a = self.tab[r * ncols + q];
            let delta = (self.x[bv] - target) / a;
            self.move_along(q, 1.0, delta);
            self.x[bv] = target;
            self.state[bv] = if below { State::Lower } else { State::Upper };
            self.pivot(r, q);
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let ncols = self.ncols;
        let piv = self.tab[r * ncols + q];
        let inv = 1.0 / piv;
        let mut nz = Vec::new();
        {
            let row = &mut self.tab[r * ncols..(r + 1) * ncols];
            for (k, v) in row.iter_mut().enumerate() {
                if *v != 0.0 {
                    *v *= inv;
                    if v.abs() < 1e-14 {
                        *v = 0.0;
                    } else {
                        nz.push(k);
                    }
                }
            }
            row[q] = 1.0;
        }
        self.beta[r] *= inv;
        let pivot_row: Vec<(usize, f64)> = nz.iter().map(|&k| (k, self.tab[r * ncols + k])).collect();
        let beta_r = self.beta[r];
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.tab[i * ncols + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.tab[i * ncols..(i + 1) * ncols];
            for &(k, v) in &pivot_row {
                let nv = row[k] - f * v;
                row[k] = if nv.abs() < 1e-13 { 0.0 } else { nv };
            }
            row[q] = 0.0;
            self.beta[i] -= f * beta_r;
        }
        let f = self.d[q];
        if f != 0.0 {
            for &(k, v) in &pivot_row {
                self.d[k] -= f * v;
            }
        }
        self.d[q] = 0.0;
        self.basis[r] = q;
        self.state[q] = State::Basic;
        self.pivots_since_refactor += 1;
    }

    /// Rebuild the tableau from the original data for the current basis.
    pub fn refactor(&mut self) -> Result<(), KernelError> {
        let m = self.m;
        let n = self.n;
        let ncols = self.ncols;
        // B as dense m x m, then Gauss-Jordan to B^-1.
        let mut bmat = vec![0.0; m * m];
        for (k, &bv) in self.basis.iter().enumerate() {
            if bv < n {
                for &(i, a) in &self.cols[bv] {
                    bmat[i * m + k] = a;
                }
            } else {
                bmat[(bv - n) * m + k] = 1.0;
            }
        }
        let mut inv = vec![0.0f64; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        let mut displaced = Vec::new();
        for c in 0..m {
            let mut p = c;
            let mut best = bmat[c * m + c].abs();
            for rr in c + 1..m {
                let v = bmat[rr * m + c].abs();
                if v > best {
                    best = v;
                    p = rr;
                }
            }
            if best < 1e-12 {
                // Dependent column: swap in the nonbasic slack that best covers the remaining rows.
                let mut pick = None;
                let mut pick_val = 1e-9;
                for i in (0..m).filter(|&i| self.state[n + i] != State::Basic) {
                    for rr in c..m {
                        let v = inv[rr * m + i].abs();
                        if v > pick_val {
                            pick_val = v;
                            pick = Some((i, rr));
                        }
                    }
                }
                let Some((i, rr)) = pick else {
                    return Err(KernelError::SingularBasis);
                };
                trace!("basis repair: position {c} gives way to slack {i}");
                displaced.push(self.basis[c]);
                self.state[self.basis[c]] = State::Lower;
                self.basis[c] = n + i;
                self.state[n + i] = State::Basic;
                for k in 0..m {
                    bmat[k * m + c] = inv[k * m + i];
                }
                p = rr;
            }
            if p != c {
                for k in 0..m {
                    bmat.swap(c * m + k, p * m + k);
                    inv.swap(c * m + k, p * m + k);
                }
            }
            let pv = 1.0 / bmat[c * m + c];
            for k in 0..m {
                bmat[c * m + k] *= pv;
                inv[c * m + k] *= pv;
            }
            let brow: Vec<(usize, f64)> = (0..m)
                .filter_map(|k| (bmat[c * m + k] != 0.0).then(|| (k, bmat[c * m + k])))
                .collect();
            let irow: Vec<(usize, f64)> = (0..m)
                .filter_map(|k| (inv[c * m + k] != 0.0).then(|| (k, inv[c * m + k])))
                .collect();
            for rr in 0..m {
                if rr == c {
                    continue;
                }
                let f = bmat[rr * m + c];
                if f == 0.0 {
                    continue;
                }
                for &(k, v) in &brow {
                    bmat[rr * m + k] -= f * v;
                }
                for &(k, v) in &irow {
                    inv[rr * m + k] -= f * v;
                }
            }
        }
        // Row k of inv now belongs to basis position k.
        self.tab.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..m {
            for i in 0..m {
                let v = inv[k * m + i];
                if v != 0.0 {
                    self.tab[k * ncols + n + i] = v;
                }
            }
        }
        for (j, col) in self.cols.iter().enumerate() {
            for &(i, a) in col {
                for k in 0..m {
                    let v = inv[k * m + i];
                    if v != 0.0 {
                        self.tab[k * ncols + j] += v * a;
                    }
                }
            }
        }
        for k in 0..m {
            self.beta[k] = (0..m).map(|i| inv[k * m + i] * self.b[i]).sum();
        }
        self.d = self.cost.clone();
        for (k, &bv) in self.basis.iter().enumerate() {
            let cb = self.cost[bv];
            if cb == 0.0 {
                continue;
            }
            for j in 0..ncols {
                let t = self.tab[k * ncols + j];
                if t != 0.0 {
                    self.d[j] -= cb * t;
                }
            }
        }
        for &bv in &self.basis {
            self.d[bv] = 0.0;
        }
        for j in displaced {
            self.place_nonbasic(j);
        }
        self.pivots_since_refactor = 0;
        Ok(())
    }

    pub fn pivots_since_refactor(&self) -> usize {
        self.pivots_since_refactor
    }
}
