//! Row/column reductions applied before the simplex.
//!
//! Rows are kept in two-sided form `lo ≤ a·x ≤ hi`. Each pass:
//!
//! * drops empty and redundant rows (activity bounds), detecting infeasible
//!   ones on the way,
//! * turns singleton rows into column bounds,
//! * fixes columns whose bounds meet,
//! * fixes dominated columns at the bound the objective prefers; a zero-cost
//!   column that can always repair its rows is removed together with them and
//!   recomputed during postsolve.

use crate::error::{Error, Result};
use crate::model::{Sense, StandardFormModel};

const EPS: f64 = 1e-12;
const INFEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub(crate) struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub lo: f64,
    pub hi: f64,
}

/// Model left after presolve, in reduced column indices.
#[derive(Debug, Clone)]
pub(crate) struct Reduced {
    /// Original index of each reduced column.
    pub cols: Vec<usize>,
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub integral: Vec<bool>,
    pub rows: Vec<Row>,
    /// Objective contribution of fixed columns.
    pub offset: f64,
}

#[derive(Debug, Clone)]
enum Action {
    Fix { col: usize, value: f64 },
    /// Column removed with its rows; `up` means larger values repair the rows.
    Repair { col: usize, up: bool, lower: f64, upper: f64, rows: Vec<Row> },
}

#[derive(Debug, Clone)]
pub(crate) struct Presolved {
    pub reduced: Reduced,
    num_cols: usize,
    actions: Vec<Action>,
    pub removed_rows: usize,
}

impl Presolved {
    /// Full original-space point from a reduced one.
    pub fn expand(&self, xr: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.num_cols];
        for (k, &j) in self.reduced.cols.iter().enumerate() {
            x[j] = xr[k];
        }
        for a in &self.actions {
            if let Action::Fix { col, value } = a {
                x[*col] = *value;
            }
        }
        for a in self.actions.iter().rev() {
            if let Action::Repair { col, up, lower, upper, rows } = a {
                x[*col] = repair_value(&x, *col, *up, *lower, *upper, rows);
            }
        }
        x
    }
}

fn repair_value(x: &[f64], col: usize, up: bool, lower: f64, upper: f64, rows: &[Row]) -> f64 {
    let mut v = if up { lower } else { upper };
    for row in rows {
        let mut a_col = 0.0;
        let mut rest = 0.0;
        for &(j, a) in &row.coeffs {
            if j == col {
                a_col += a;
            } else {
                rest += a * x[j];
            }
        }
        if a_col == 0.0 {
            continue;
        }
        // the side this column has to satisfy is the finite one
        let bound = if (a_col > 0.0) == up { row.lo } else { row.hi };
        if !bound.is_finite() {
            continue;
        }
        let need = (bound - rest) / a_col;
        v = if up { v.max(need) } else { v.min(need) };
    }
    if !v.is_finite() {
        v = if lower.is_finite() {
            lower
        } else if upper.is_finite() {
            upper
        } else {
            0.0
        };
    }
    v
}

struct Work {
    rows: Vec<Row>,
    row_alive: Vec<bool>,
    col_rows: Vec<Vec<usize>>,
    col_alive: Vec<bool>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    integral: Vec<bool>,
    round: bool,
    actions: Vec<Action>,
    offset: f64,
}

enum Step {
    Changed,
    Same,
}

impl Work {
    fn alive_entries(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.rows[r].coeffs.iter().copied().filter(|(j, _)| self.col_alive[*j])
    }

    fn fix(&mut self, j: usize, value: f64) {
        for &r in &self.col_rows[j] {
            if !self.row_alive[r] {
                continue;
            }
            let a: f64 = self.rows[r].coeffs.iter().filter(|(k, _)| *k == j).map(|(_, a)| a).sum();
            let row = &mut self.rows[r];
            row.lo -= a * value;
            row.hi -= a * value;
        }
        self.offset += self.cost[j] * value;
        self.col_alive[j] = false;
        self.actions.push(Action::Fix { col: j, value });
    }

    fn tighten(&mut self, j: usize, lo: f64, hi: f64) -> Result<bool, ()> {
        let (mut lo, mut hi) = (lo.max(self.lower[j]), hi.min(self.upper[j]));
        if self.round && self.integral[j] {
            lo = (lo - 1e-9).ceil();
            hi = (hi + 1e-9).floor();
        }
        if lo > hi + INFEAS_TOL * (1.0 + lo.abs()) {
            return Err(());
        }
        if lo > hi {
            hi = lo;
        }
        let changed = lo > self.lower[j] || hi < self.upper[j];
        self.lower[j] = lo;
        self.upper[j] = hi;
        Ok(changed)
    }

    fn row_pass(&mut self, r: usize) -> Result<Step, ()> {
        let entries: Vec<(usize, f64)> = self.alive_entries(r).collect();
        let (lo, hi) = (self.rows[r].lo, self.rows[r].hi);
        if entries.is_empty() {
            if lo > INFEAS_TOL || hi < -INFEAS_TOL {
                return Err(());
            }
            self.row_alive[r] = false;
            return Ok(Step::Changed);
        }
        if entries.len() == 1 {
            let (j, a) = entries[0];
            let (l, u) = if a > 0.0 { (lo / a, hi / a) } else { (hi / a, lo / a) };
            self.tighten(j, l, u)?;
            self.row_alive[r] = false;
            return Ok(Step::Changed);
        }
        let (mut min_act, mut max_act) = (0.0, 0.0);
        for &(j, a) in &entries {
            let (l, u) = (self.lower[j], self.upper[j]);
            if a > 0.0 {
                min_act += a * l;
                max_act += a * u;
            } else {
                min_act += a * u;
                max_act += a * l;
            }
        }
        // a NaN here means an inf-inf sum; treat as unbounded activity
        let min_act = if min_act.is_nan() { f64::NEG_INFINITY } else { min_act };
        let max_act = if max_act.is_nan() { f64::INFINITY } else { max_act };
        if min_act > hi + INFEAS_TOL * (1.0 + hi.abs()) || max_act < lo - INFEAS_TOL * (1.0 + lo.abs()) {
            return Err(());
        }
        let mut step = Step::Same;
        if lo.is_finite() && min_act >= lo - EPS {
            self.rows[r].lo = f64::NEG_INFINITY;
            step = Step::Changed;
        }
        if hi.is_finite() && max_act <= hi + EPS {
            self.rows[r].hi = f64::INFINITY;
            step = Step::Changed;
        }
        if self.rows[r].lo == f64::NEG_INFINITY && self.rows[r].hi == f64::INFINITY {
            self.row_alive[r] = false;
            step = Step::Changed;
        }
        Ok(step)
    }

    fn col_pass(&mut self, j: usize) -> Result<Step> {
        let (l, u, c) = (self.lower[j], self.upper[j], self.cost[j]);
        if l.is_finite() && u.is_finite() && u - l <= EPS {
            self.fix(j, l);
            return Ok(Step::Changed);
        }
        // which direction never hurts any live row
        let (mut up_safe, mut down_safe) = (true, true);
        for &r in &self.col_rows[j] {
            if !self.row_alive[r] {
                continue;
            }
            let a: f64 = self.rows[r].coeffs.iter().filter(|(k, _)| *k == j).map(|(_, a)| a).sum();
            if a == 0.0 {
                continue;
            }
            let (lo_open, hi_open) = (self.rows[r].lo == f64::NEG_INFINITY, self.rows[r].hi == f64::INFINITY);
            if a > 0.0 {
                up_safe &= hi_open;
                down_safe &= lo_open;
            } else {
                up_safe &= lo_open;
                down_safe &= hi_open;
            }
        }
        if down_safe && c >= 0.0 {
            if l.is_finite() {
                self.fix(j, l);
                return Ok(Step::Changed);
            }
            if c > 0.0 {
                return Err(Error::MalformedModel(format!("column {j} is unbounded below")));
            }
            self.remove_repairable(j, false);
            return Ok(Step::Changed);
        }
        if up_safe && c <= 0.0 {
            if u.is_finite() {
                self.fix(j, u);
                return Ok(Step::Changed);
            }
            if c < 0.0 {
                return Err(Error::MalformedModel(format!("column {j} is unbounded above")));
            }
            self.remove_repairable(j, true);
            return Ok(Step::Changed);
        }
        Ok(Step::Same)
    }

    fn remove_repairable(&mut self, j: usize, up: bool) {
        let mut rows = Vec::new();
        for &r in &self.col_rows[j] {
            if !self.row_alive[r] {
                continue;
            }
            let coeffs: Vec<(usize, f64)> = self.alive_entries(r).collect();
            rows.push(Row { coeffs, lo: self.rows[r].lo, hi: self.rows[r].hi });
            self.row_alive[r] = false;
        }
        self.col_alive[j] = false;
        self.actions.push(Action::Repair { col: j, up, lower: self.lower[j], upper: self.upper[j], rows });
    }
}

/// Reduces a model. Returns `Ok(None)` when infeasibility is detected.
///
/// With `round` set, bounds of integer columns are rounded inward, which is
/// only valid for the integer program.
pub(crate) fn presolve(model: &StandardFormModel, round: bool) -> Result<Option<Presolved>> {
    model.validate()?;
    let n = model.num_vars();
    let mut col_rows = vec![Vec::new(); n];
    let rows: Vec<Row> = model
        .constraints
        .iter()
        .enumerate()
        .map(|(r, c)| {
            let mut coeffs: Vec<(usize, f64)> = Vec::with_capacity(c.coeffs.len());
            for &(j, a) in &c.coeffs {
                match coeffs.iter_mut().find(|(k, _)| *k == j) {
                    Some(e) => e.1 += a,
                    None => coeffs.push((j, a)),
                }
            }
            coeffs.retain(|(_, a)| *a != 0.0);
            for &(j, _) in &coeffs {
                col_rows[j].push(r);
            }
            let (lo, hi) = match c.sense {
                Sense::Le => (f64::NEG_INFINITY, c.rhs),
                Sense::Ge => (c.rhs, f64::INFINITY),
                Sense::Eq => (c.rhs, c.rhs),
            };
            Row { coeffs, lo, hi }
        })
        .collect();
    let mut w = Work {
        row_alive: vec![true; rows.len()],
        rows,
        col_rows,
        col_alive: vec![true; n],
        cost: model.cost_vector(),
        lower: model.variables.iter().map(|v| v.lower).collect(),
        upper: model.variables.iter().map(|v| v.upper).collect(),
        integral: model.variables.iter().map(|v| v.kind.is_integral()).collect(),
        round,
        actions: Vec::new(),
        offset: 0.0,
    };
    for j in 0..n {
        let (l, u) = (w.lower[j], w.upper[j]);
        if w.tighten(j, l, u).is_err() {
            return Ok(None);
        }
    }
    loop {
        let mut changed = false;
        for r in 0..w.rows.len() {
            if !w.row_alive[r] {
                continue;
            }
            match w.row_pass(r) {
                Ok(Step::Changed) => changed = true,
                Ok(Step::Same) => {}
                Err(()) => return Ok(None),
            }
        }
        for j in 0..n {
            if w.col_alive[j] {
                if let Step::Changed = w.col_pass(j)? {
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    let cols: Vec<usize> = (0..n).filter(|&j| w.col_alive[j]).collect();
    let mut index = vec![usize::MAX; n];
    for (k, &j) in cols.iter().enumerate() {
        index[j] = k;
    }
    let live_rows: Vec<Row> = (0..w.rows.len())
        .filter(|&r| w.row_alive[r])
        .map(|r| Row {
            coeffs: w.alive_entries(r).map(|(j, a)| (index[j], a)).collect(),
            lo: w.rows[r].lo,
            hi: w.rows[r].hi,
        })
        .collect();
    let removed_rows = w.rows.len() - live_rows.len();
    let reduced = Reduced {
        cost: cols.iter().map(|&j| w.cost[j]).collect(),
        lower: cols.iter().map(|&j| w.lower[j]).collect(),
        upper: cols.iter().map(|&j| w.upper[j]).collect(),
        integral: cols.iter().map(|&j| w.integral[j]).collect(),
        cols,
        rows: live_rows,
        offset: w.offset,
    };
    Ok(Some(Presolved { reduced, num_cols: n, actions: w.actions, removed_rows }))
}
