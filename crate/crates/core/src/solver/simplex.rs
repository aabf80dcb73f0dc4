//! Dense-tableau dual simplex with bounded variables.
//!
//! Each row `lo ≤ a·x ≤ hi` gets a logical `s = −a·x` with bounds
//! `[−hi, −lo]`, so the system is `A x + s = 0` and the slack basis is the
//! identity. Only the nonbasic part `T = B⁻¹N` of the tableau is stored
//! (basic columns are unit vectors), with `x_B = −T x_N`, plus the reduced
//! costs of the nonbasic columns. Every basis visited is kept dual feasible,
//! which lets branch-and-bound change bounds and resume from the previous
//! basis.

use super::presolve::{Reduced, Row};

/// Stand-in value for a nonbasic variable whose preferred bound is infinite.
const BIG: f64 = 1e9;
const PIVOT_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const RESIDUAL_TOL: f64 = 1e-7;
const RECOMPUTE_EVERY: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic,
    Lower,
    Upper,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub(crate) struct Tableau {
    rows: usize,
    cols: usize,
    /// `rows × cols` row-major; column `k` belongs to variable `nb[k]`.
    t: Vec<f64>,
    /// Reduced cost per nonbasic slot.
    d: Vec<f64>,
    /// Basic variable of each row.
    head: Vec<usize>,
    /// Nonbasic variable of each slot.
    nb: Vec<usize>,
    /// Slot (nonbasic) or row (basic) of each variable.
    slot: Vec<usize>,
    state: Vec<State>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    a: Vec<Vec<(usize, f64)>>,
    primal_tol: f64,
    pub iterations: usize,
    pub refactors: usize,
    nz: Vec<usize>,
}

impl Tableau {
    pub fn new(model: &Reduced, primal_tol: f64) -> Self {
        let rows = model.rows.len();
        let cols = model.cost.len();
        let mut lower = model.lower.clone();
        let mut upper = model.upper.clone();
        for r in &model.rows {
            lower.push(-r.hi);
            upper.push(-r.lo);
        }
        let mut cost = model.cost.clone();
        cost.resize(cols + rows, 0.0);
        let mut tab = Tableau {
            rows,
            cols,
            t: Vec::new(),
            d: Vec::new(),
            head: Vec::new(),
            nb: Vec::new(),
            slot: vec![0; cols + rows],
            state: vec![State::Lower; cols + rows],
            cost,
            lower,
            upper,
            x: vec![0.0; cols + rows],
            a: model.rows.iter().map(|r| r.coeffs.clone()).collect(),
            primal_tol,
            iterations: 0,
            refactors: 0,
            nz: Vec::with_capacity(cols),
        };
        tab.slack_basis();
        tab
    }

    fn slack_basis(&mut self) {
        let (m, n) = (self.rows, self.cols);
        self.t = vec![0.0; m * n];
        for (i, row) in self.a.iter().enumerate() {
            for &(j, v) in row {
                self.t[i * n + j] += v;
            }
        }
        self.head = (n..n + m).collect();
        self.nb = (0..n).collect();
        for j in 0..n {
            self.slot[j] = j;
            self.state[j] = State::Lower;
        }
        for i in 0..m {
            self.slot[n + i] = i;
            self.state[n + i] = State::Basic;
        }
        self.d = self.cost[..n].to_vec();
        for k in 0..n {
            self.place(k);
        }
        self.recompute_basics();
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            State::Lower => {
                if self.lower[j].is_finite() {
                    self.lower[j]
                } else {
                    -BIG
                }
            }
            State::Upper => {
                if self.upper[j].is_finite() {
                    self.upper[j]
                } else {
                    BIG
                }
            }
            State::Zero => 0.0,
            State::Basic => self.x[j],
        }
    }

    /// Puts the variable in slot `k` on the bound its reduced cost asks for.
    fn place(&mut self, k: usize) {
        let j = self.nb[k];
        let (lf, uf) = (self.lower[j].is_finite(), self.upper[j].is_finite());
        let d = self.d[k];
        self.state[j] = if d > DUAL_TOL {
            State::Lower
        } else if d < -DUAL_TOL {
            State::Upper
        } else if self.state[j] == State::Upper && uf {
            State::Upper
        } else if lf {
            State::Lower
        } else if uf {
            State::Upper
        } else {
            State::Zero
        };
        self.x[j] = self.nonbasic_value(j);
    }

    /// `x_B = −T x_N` from scratch.
    fn recompute_basics(&mut self) {
        let n = self.cols;
        let nzv: Vec<(usize, f64)> =
            (0..n).map(|k| (k, self.x[self.nb[k]])).filter(|&(_, v)| v != 0.0).collect();
        for i in 0..self.rows {
            let row = &self.t[i * n..(i + 1) * n];
            let s: f64 = nzv.iter().map(|&(k, v)| row[k] * v).sum();
            self.x[self.head[i]] = -s;
        }
    }

    /// Moves nonbasic slot `k` by `step`, updating the basic values.
    fn shift(&mut self, k: usize, step: f64) {
        if step == 0.0 {
            return;
        }
        let n = self.cols;
        for i in 0..self.rows {
            let a = self.t[i * n + k];
            if a != 0.0 {
                self.x[self.head[i]] -= a * step;
            }
        }
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lower[j] = lower;
        self.upper[j] = upper;
        if self.state[j] != State::Basic {
            self.place(self.slot[j]);
        }
    }

    /// Call after a batch of [`set_bounds`](Self::set_bounds).
    pub fn sync(&mut self) {
        self.recompute_basics();
    }

    pub fn objective(&self) -> f64 {
        (0..self.cols).map(|j| self.cost[j] * self.x[j]).sum()
    }

    pub fn values(&self) -> &[f64] {
        &self.x[..self.cols]
    }

    pub fn num_rows(&self) -> usize {
        self.rows
    }

    pub fn num_cols(&self) -> usize {
        self.cols
    }

    /// Basic variable of row `r` and its value; variables `≥ num_cols()` are
    /// row logicals.
    pub fn basic(&self, r: usize) -> (usize, f64) {
        let j = self.head[r];
        (j, self.x[j])
    }

    /// Nonzero `(variable, t)` of row `r`, where `x_B = −Σ t·x_N`.
    pub fn row_terms(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let n = self.cols;
        self.t[r * n..(r + 1) * n].iter().enumerate().filter(|e| *e.1 != 0.0).map(|(k, &v)| (self.nb[k], v))
    }

    /// Whether nonbasic `j` sits at its upper bound; `None` for basic or
    /// free variables.
    pub fn at_upper(&self, j: usize) -> Option<bool> {
        match self.state[j] {
            State::Lower if self.lower[j].is_finite() => Some(false),
            State::Upper if self.upper[j].is_finite() => Some(true),
            _ => None,
        }
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lower[j], self.upper[j])
    }

    /// Structural coefficients of row `i`.
    pub fn row_coeffs(&self, i: usize) -> &[(usize, f64)] {
        &self.a[i]
    }

    /// Appends `lo ≤ a·x ≤ hi` with its logical basic; the basis stays dual
    /// feasible, so [`solve`](Self::solve) continues from it.
    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, lo: f64, hi: f64) {
        let n = self.cols;
        let mut trow = vec![0.0; n];
        for &(j, a) in &coeffs {
            if self.state[j] == State::Basic {
                let r = self.slot[j];
                for (t, &v) in trow.iter_mut().zip(&self.t[r * n..(r + 1) * n]) {
                    *t -= a * v;
                }
            } else {
                trow[self.slot[j]] += a;
            }
        }
        let v = self.cols + self.rows;
        let value = -(0..n).map(|k| trow[k] * self.x[self.nb[k]]).sum::<f64>();
        self.t.extend_from_slice(&trow);
        self.head.push(v);
        self.slot.push(self.rows);
        self.state.push(State::Basic);
        self.cost.push(0.0);
        self.lower.push(-hi);
        self.upper.push(-lo);
        self.x.push(value);
        self.a.push(coeffs);
        self.rows += 1;
    }

    /// Removes every row whose logical is basic and `drop(i)` holds, and
    /// returns them. The basis of the remaining rows is unchanged.
    pub fn drop_rows(&mut self, drop: impl Fn(usize) -> bool) -> Vec<Row> {
        let (n, m) = (self.cols, self.rows);
        let gone: Vec<bool> = (0..m).map(|i| self.state[n + i] == State::Basic && drop(i)).collect();
        if !gone.iter().any(|&g| g) {
            return Vec::new();
        }
        let mut map = vec![usize::MAX; n + m];
        let mut next = n;
        for v in 0..n + m {
            if v < n {
                map[v] = v;
            } else if !gone[v - n] {
                map[v] = next;
                next += 1;
            }
        }
        let mut removed = Vec::new();
        let mut t = Vec::with_capacity(self.t.len());
        let mut head = Vec::with_capacity(m);
        for r in 0..m {
            let v = self.head[r];
            if v >= n && gone[v - n] {
                continue;
            }
            t.extend_from_slice(&self.t[r * n..(r + 1) * n]);
            head.push(map[v]);
        }
        let keep = |v: usize| v < n || !gone[v - n];
        let filter = |xs: &[f64]| -> Vec<f64> { xs.iter().enumerate().filter(|e| keep(e.0)).map(|e| *e.1).collect() };
        for i in (0..m).filter(|&i| gone[i]) {
            removed.push(Row { coeffs: self.a[i].clone(), lo: -self.upper[n + i], hi: -self.lower[n + i] });
        }
        self.cost = filter(&self.cost);
        self.lower = filter(&self.lower);
        self.upper = filter(&self.upper);
        self.x = filter(&self.x);
        self.state = self.state.iter().enumerate().filter(|e| keep(e.0)).map(|e| *e.1).collect();
        let a = std::mem::take(&mut self.a);
        self.a = a.into_iter().enumerate().filter(|e| !gone[e.0]).map(|e| e.1).collect();
        self.t = t;
        self.head = head;
        for v in self.nb.iter_mut() {
            *v = map[*v];
        }
        self.rows = self.head.len();
        self.slot = vec![0; n + self.rows];
        for (r, &v) in self.head.iter().enumerate() {
            self.slot[v] = r;
        }
        for (k, &v) in self.nb.iter().enumerate() {
            self.slot[v] = k;
        }
        removed
    }

    /// Slack of row `i` at the current point, negative when violated.
    pub fn row_slack(&self, i: usize) -> f64 {
        let v = self.x[self.cols + i];
        (v - self.lower[self.cols + i]).min(self.upper[self.cols + i] - v)
    }

    fn leaving_row(&self, bland: bool) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.rows {
            let j = self.head[i];
            let v = self.x[j];
            let inf = (self.lower[j] - v).max(v - self.upper[j]);
            if inf <= self.primal_tol {
                continue;
            }
            let tol = self.primal_tol * (1.0 + self.lower[j].abs().min(self.upper[j].abs()).min(1e6));
            if inf <= tol {
                continue;
            }
            let better = match best {
                None => true,
                Some((bi, bv)) => {
                    if bland {
                        j < self.head[bi]
                    } else {
                        inf > bv
                    }
                }
            };
            if better {
                best = Some((i, inf));
            }
        }
        best.map(|b| b.0)
    }

    fn entering_slot(&self, r: usize, increase: bool, bland: bool) -> Option<usize> {
        let n = self.cols;
        let row = &self.t[r * n..(r + 1) * n];
        let eligible = |k: usize| -> Option<f64> {
            let alpha = row[k];
            let j = self.nb[k];
            // fixed columns never enter
            if alpha.abs() <= PIVOT_TOL || self.lower[j] == self.upper[j] {
                return None;
            }
            // x_r moves by −alpha·Δx_j
            let (can_up, can_down) = match self.state[j] {
                State::Basic => return None,
                State::Lower => (true, false),
                State::Upper => (false, true),
                State::Zero => (true, true),
            };
            let ok = if increase {
                (can_up && alpha < 0.0) || (can_down && alpha > 0.0)
            } else {
                (can_up && alpha > 0.0) || (can_down && alpha < 0.0)
            };
            ok.then_some(alpha.abs())
        };
        if bland {
            let mut best: Option<(usize, f64)> = None;
            for k in 0..n {
                if let Some(a) = eligible(k) {
                    let ratio = self.d[k].abs() / a;
                    let better = match best {
                        None => true,
                        Some((bk, br)) => ratio < br || (ratio == br && self.nb[k] < self.nb[bk]),
                    };
                    if better {
                        best = Some((k, ratio));
                    }
                }
            }
            return best.map(|b| b.0);
        }
        let mut theta = f64::INFINITY;
        for k in 0..n {
            if let Some(a) = eligible(k) {
                theta = theta.min((self.d[k].abs() + DUAL_TOL) / a);
            }
        }
        if !theta.is_finite() {
            return None;
        }
        let mut best: Option<(usize, f64)> = None;
        for k in 0..n {
            if let Some(a) = eligible(k) {
                if self.d[k].abs() / a <= theta && best.is_none_or(|(_, ba)| a > ba) {
                    best = Some((k, a));
                }
            }
        }
        best.map(|b| b.0)
    }

    fn pivot(&mut self, r: usize, k: usize, target: f64, leave_state: State) {
        let n = self.cols;
        let p = self.head[r];
        let q = self.nb[k];
        let piv = self.t[r * n + k];
        let delta = (self.x[p] - target) / piv;
        self.shift(k, delta);
        let xq = self.x[q] + delta;

        let inv = 1.0 / piv;
        self.nz.clear();
        for j in 0..n {
            let v = self.t[r * n + j];
            if v != 0.0 && j != k {
                self.t[r * n + j] = v * inv;
                self.nz.push(j);
            }
        }
        self.t[r * n + k] = inv;
        let nz = std::mem::take(&mut self.nz);
        let (before, rest) = self.t.split_at_mut(r * n);
        let (prow, after) = rest.split_at_mut(n);
        let eliminate = |row: &mut [f64]| {
            let f = row[k];
            if f != 0.0 {
                for &j in &nz {
                    row[j] -= f * prow[j];
                }
                row[k] = -f * inv;
            }
        };
        before.chunks_exact_mut(n).for_each(eliminate);
        after.chunks_exact_mut(n).for_each(eliminate);
        let f = self.d[k];
        if f != 0.0 {
            for &j in &nz {
                self.d[j] -= f * prow[j];
            }
        }
        self.d[k] = -f * inv;

        self.head[r] = q;
        self.nb[k] = p;
        self.slot[q] = r;
        self.slot[p] = k;
        self.state[q] = State::Basic;
        self.x[q] = xq;
        self.state[p] = leave_state;
        self.x[p] = target;

        // keep the nonbasic columns touched by this pivot dual feasible
        for &s in nz.iter().chain(std::iter::once(&k)) {
            let j = self.nb[s];
            let d = self.d[s];
            let wrong = match self.state[j] {
                State::Lower => d < -DUAL_TOL,
                State::Upper => d > DUAL_TOL,
                State::Zero => d.abs() > DUAL_TOL,
                State::Basic => false,
            };
            if !wrong {
                continue;
            }
            let target_finite = if d < 0.0 { self.upper[j].is_finite() } else { self.lower[j].is_finite() };
            if target_finite {
                let old = self.x[j];
                self.place(s);
                let step = self.x[j] - old;
                self.shift(s, step);
            } else {
                self.d[s] = 0.0;
            }
        }
        self.nz = nz;
    }

    fn max_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, row) in self.a.iter().enumerate() {
            let act: f64 = row.iter().map(|&(j, v)| v * self.x[j]).sum();
            let scale = 1.0 + act.abs();
            worst = worst.max((act + self.x[self.cols + i]).abs() / scale);
        }
        worst
    }

    /// Rebuilds `B⁻¹N` for the current basis by Gauss-Jordan on `[A I]`;
    /// falls back to the slack basis when the basis matrix is numerically
    /// singular.
    fn refactor(&mut self) {
        self.refactors += 1;
        let (m, n) = (self.rows, self.cols);
        let w = m + n;
        let mut full = vec![0.0; m * w];
        for (i, row) in self.a.iter().enumerate() {
            for &(j, v) in row {
                full[i * w + j] += v;
            }
            full[i * w + n + i] = 1.0;
        }
        let basics = self.head.clone();
        let mut assigned = vec![false; m];
        let mut new_head = vec![usize::MAX; m];
        for &v in &basics {
            let mut best: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = full[i * w + v].abs();
                if !assigned[i] && a > 1e-11 && best.is_none_or(|(_, ba)| a > ba) {
                    best = Some((i, a));
                }
            }
            let Some((r, _)) = best else {
                log::debug!("singular basis during refactor; restarting from slack basis");
                self.slack_basis();
                return;
            };
            let inv = 1.0 / full[r * w + v];
            for j in 0..w {
                full[r * w + j] *= inv;
            }
            let prow: Vec<(usize, f64)> = (0..w).map(|j| (j, full[r * w + j])).filter(|e| e.1 != 0.0).collect();
            for i in 0..m {
                if i == r {
                    continue;
                }
                let f = full[i * w + v];
                if f != 0.0 {
                    for &(j, pv) in &prow {
                        full[i * w + j] -= f * pv;
                    }
                    full[i * w + v] = 0.0;
                }
            }
            assigned[r] = true;
            new_head[r] = v;
        }
        self.head = new_head;
        for i in 0..m {
            self.slot[self.head[i]] = i;
        }
        for k in 0..n {
            let j = self.nb[k];
            for i in 0..m {
                self.t[i * n + k] = full[i * w + j];
            }
            self.d[k] = self.cost[j] - (0..m).map(|i| self.cost[self.head[i]] * full[i * w + j]).sum::<f64>();
        }
        for k in 0..n {
            self.place(k);
        }
        self.recompute_basics();
    }

    fn at_artificial_bound(&self) -> bool {
        (0..self.cols + self.rows).any(|j| match self.state[j] {
            State::Lower => !self.lower[j].is_finite(),
            State::Upper => !self.upper[j].is_finite(),
            State::Basic => self.x[j].abs() >= BIG / 2.0,
            State::Zero => false,
        })
    }

    /// Runs dual simplex iterations from the current (dual feasible) basis.
    pub fn solve(&mut self) -> LpStatus {
        self.solve_limited(usize::MAX)
    }

    /// Like [`solve`](Self::solve) but gives up after `limit` pivots.
    pub fn solve_limited(&mut self, limit: usize) -> LpStatus {
        let bland_after = 10 * (self.rows + self.cols);
        let cap = (50 * (self.rows + self.cols) + 10_000).min(limit);
        let mut iter = 0usize;
        let mut refactors_here = 0;
        loop {
            if iter >= cap {
                return LpStatus::IterationLimit;
            }
            if iter > 0 && iter.is_multiple_of(RECOMPUTE_EVERY) {
                self.recompute_basics();
            }
            let bland = iter >= bland_after;
            let Some(r) = self.leaving_row(bland) else {
                if self.max_residual() > RESIDUAL_TOL && refactors_here < 2 {
                    refactors_here += 1;
                    self.refactor();
                    continue;
                }
                if self.at_artificial_bound() {
                    return LpStatus::Unbounded;
                }
                return LpStatus::Optimal;
            };
            let p = self.head[r];
            let increase = self.x[p] < self.lower[p];
            let Some(k) = self.entering_slot(r, increase, bland) else {
                if refactors_here < 2 {
                    // confirm with a fresh factorization before declaring infeasible
                    refactors_here += 1;
                    self.refactor();
                    continue;
                }
                return LpStatus::Infeasible;
            };
            let (target, st) = if increase { (self.lower[p], State::Lower) } else { (self.upper[p], State::Upper) };
            self.pivot(r, k, target, st);
            iter += 1;
            self.iterations += 1;
        }
    }

    /// Solves from the current basis; on an iteration limit, restarts once
    /// from the slack basis.
    pub fn solve_robust(&mut self) -> LpStatus {
        match self.solve() {
            LpStatus::IterationLimit => {
                log::debug!("simplex iteration limit; restarting from slack basis");
                self.slack_basis();
                self.solve()
            }
            s => s,
        }
    }
}
