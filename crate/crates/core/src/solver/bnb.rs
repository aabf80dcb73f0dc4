//! Best-first branch-and-bound on a single shared tableau.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use super::cuts::{gomory_cuts, MirSeparator};
use super::presolve::{presolve, Presolved, Row};
use super::simplex::{LpStatus, Tableau};
use super::{Branching, SolveOutcome, SolveStats, SolverOptions};
use crate::error::{Error, Result};
use crate::model::StandardFormModel;
use crate::types::{Solution, SolveStatus};

const INT_TOL: f64 = 1e-6;
/// Observations per direction before a pseudo-cost is trusted.
const RELIABLE: u32 = 4;
/// Strong-branching candidates per node.
const SB_CANDIDATES: usize = 8;
const SB_ITERATIONS: usize = 60;
const SCORE_EPS: f64 = 1e-6;
const CUT_ROUNDS: usize = 50;
const CUTS_PER_ROUND: usize = 40;
/// Relative root bound gain below which the cut loop stops.
const CUT_STALL: f64 = 1e-4;
/// Rows slacker than this at the root LP move to the pool.
const POOL_SLACK: f64 = 1e-6;

type Fix = (usize, f64, f64);

#[derive(Debug)]
struct Node {
    id: usize,
    bound: f64,
    /// LP objective of the node (the bound before strong branching lifts it).
    lp: f64,
    /// Bound changes relative to the root, applied in order.
    fixes: Vec<Fix>,
    /// LP solution of the node (reduced space).
    x: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // max-heap: the lowest bound, then the oldest node, comes out first
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then(other.id.cmp(&self.id))
    }
}

fn fractionality(v: f64) -> f64 {
    let frac = v - v.floor();
    frac.min(1.0 - frac)
}

fn fractional_columns(x: &[f64], integral: &[bool]) -> Vec<usize> {
    (0..x.len()).filter(|&j| integral[j] && fractionality(x[j]) > INT_TOL).collect()
}

/// Most fractional integer column, lowest index on ties.
fn most_fractional(x: &[f64], candidates: &[usize]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &j in candidates {
        let score = fractionality(x[j]);
        if best.is_none_or(|b| score > b.1) {
            best = Some((j, score));
        }
    }
    best.map(|b| b.0)
}

fn product_score(down: f64, up: f64) -> f64 {
    down.max(SCORE_EPS) * up.max(SCORE_EPS)
}

/// Per-column average objective gain per unit of bound change.
#[derive(Debug, Clone)]
struct PseudoCosts {
    sum: Vec<[f64; 2]>,
    count: Vec<[u32; 2]>,
}

impl PseudoCosts {
    fn new(n: usize) -> Self {
        PseudoCosts { sum: vec![[0.0; 2]; n], count: vec![[0; 2]; n] }
    }

    fn record(&mut self, j: usize, up: bool, gain: f64, dist: f64) {
        if dist > INT_TOL && gain.is_finite() {
            let d = up as usize;
            self.sum[j][d] += gain.max(0.0) / dist;
            self.count[j][d] += 1;
        }
    }

    fn reliable(&self, j: usize) -> bool {
        self.count[j][0] >= RELIABLE && self.count[j][1] >= RELIABLE
    }

    fn mean(&self, dir: usize) -> f64 {
        let (s, c) = self
            .sum
            .iter()
            .zip(&self.count)
            .fold((0.0, 0u32), |(s, c), (sj, cj)| if cj[dir] > 0 { (s + sj[dir] / cj[dir] as f64, c + 1) } else { (s, c) });
        if c == 0 {
            1.0
        } else {
            s / c as f64
        }
    }

    fn estimate(&self, j: usize, dir: usize, fallback: f64) -> f64 {
        if self.count[j][dir] == 0 {
            fallback
        } else {
            self.sum[j][dir] / self.count[j][dir] as f64
        }
    }
}

enum NodeLp {
    Infeasible,
    Solved { objective: f64, x: Vec<f64> },
}

struct Search<'a> {
    pre: &'a Presolved,
    tab: Tableau,
    root_lower: Vec<f64>,
    root_upper: Vec<f64>,
    applied: Vec<usize>,
    /// Rows taken out of the tableau while slack; added back when violated.
    pool: Vec<Row>,
    feas_tol: f64,
    stats: SolveStats,
}

impl Search<'_> {
    fn load(&mut self, fixes: &[Fix]) {
        for j in self.applied.drain(..) {
            self.tab.set_bounds(j, self.root_lower[j], self.root_upper[j]);
        }
        for &(j, l, u) in fixes {
            self.tab.set_bounds(j, l, u);
            self.applied.push(j);
        }
        self.tab.sync();
    }

    fn lp_status(status: LpStatus) -> Result<()> {
        match status {
            LpStatus::Unbounded => Err(Error::MalformedModel("LP relaxation is unbounded".into())),
            LpStatus::IterationLimit => Err(Error::MalformedModel("simplex did not converge".into())),
            _ => Ok(()),
        }
    }

    /// Moves violated pool rows back into the tableau; true if any moved.
    fn separate_pool(&mut self) -> bool {
        let x = self.tab.values();
        let tol = self.feas_tol;
        let violated = |r: &Row| {
            let act: f64 = r.coeffs.iter().map(|&(j, v)| v * x[j]).sum();
            act < r.lo - tol * (1.0 + r.lo.abs()) || act > r.hi + tol * (1.0 + r.hi.abs())
        };
        let (back, keep): (Vec<Row>, Vec<Row>) = std::mem::take(&mut self.pool).into_iter().partition(violated);
        self.pool = keep;
        let any = !back.is_empty();
        for r in back {
            self.tab.add_row(r.coeffs, r.lo, r.hi);
        }
        any
    }

    fn solve_node(&mut self, fixes: &[Fix]) -> Result<NodeLp> {
        self.load(fixes);
        self.stats.lp_solves += 1;
        let status = loop {
            let before = self.tab.iterations;
            let status = self.tab.solve_robust();
            self.stats.lp_iterations += self.tab.iterations - before;
            if status != LpStatus::Optimal || !self.separate_pool() {
                break status;
            }
        };
        Self::lp_status(status)?;
        Ok(match status {
            LpStatus::Optimal => NodeLp::Solved {
                objective: self.tab.objective() + self.pre.reduced.offset,
                x: self.tab.values().to_vec(),
            },
            _ => NodeLp::Infeasible,
        })
    }

    /// Child bounds from strong branching on each candidate, with the node's
    /// own LP re-solved first. `None` when the node turns out infeasible.
    fn strong_branch(&mut self, fixes: &[Fix], x: &[f64], cands: &[usize]) -> Result<Option<(f64, Vec<[f64; 2]>)>> {
        let base = match self.solve_node(fixes)? {
            NodeLp::Solved { objective, .. } => objective,
            NodeLp::Infeasible => return Ok(None),
        };
        let snapshot = self.tab.clone();
        let mut out = Vec::with_capacity(cands.len());
        for &j in cands {
            let (lo, hi) = current_bounds(fixes, j, self.root_lower[j], self.root_upper[j]);
            let v = x[j];
            let mut pair = [f64::INFINITY; 2];
            for (dir, (l, u)) in [(lo, v.floor()), (v.ceil(), hi)].into_iter().enumerate() {
                self.tab.set_bounds(j, l, u);
                self.tab.sync();
                let before = self.tab.iterations;
                let status = self.tab.solve_limited(SB_ITERATIONS);
                self.stats.lp_iterations += self.tab.iterations - before;
                if status == LpStatus::Unbounded {
                    Self::lp_status(status)?;
                }
                if status != LpStatus::Infeasible {
                    pair[dir] = (self.tab.objective() + self.pre.reduced.offset).max(base);
                }
                self.tab.clone_from(&snapshot);
            }
            out.push(pair);
            if pair.iter().any(|o| o.is_infinite()) {
                break;
            }
        }
        Ok(Some((base, out)))
    }
}

fn finish(
    model: &StandardFormModel,
    status: SolveStatus,
    incumbent: Option<&Vec<f64>>,
    best_bound: f64,
    start: Instant,
    stats: SolveStats,
) -> SolveOutcome {
    let (objective, y, z, x) = match incumbent {
        Some(x) => {
            let (y, z) = model.selections(x);
            (model.objective_value(x), y, z, Some(x.clone()))
        }
        None => (f64::INFINITY, vec![false; model.y_cols.len()], vec![false; model.z_cols.len()], None),
    };
    let best_bound = if status == SolveStatus::Infeasible { f64::INFINITY } else { best_bound.min(objective) };
    SolveOutcome {
        solution: Solution { status, objective, best_bound, y, z, wall_time_s: start.elapsed().as_secs_f64() },
        x,
        stats,
    }
}

pub(crate) fn branch_and_bound(model: &StandardFormModel, options: &SolverOptions) -> Result<SolveOutcome> {
    options.validate()?;
    let start = Instant::now();
    let mut stats = SolveStats::default();
    let Some(pre) = presolve(model, true)? else {
        return Ok(finish(model, SolveStatus::Infeasible, None, f64::INFINITY, start, stats));
    };
    stats.presolve_rows_removed = pre.removed_rows;
    stats.presolve_cols_removed = model.num_vars() - pre.reduced.cols.len();
    let integral = pre.reduced.integral.clone();
    let mut search = Search {
        pre: &pre,
        tab: Tableau::new(&pre.reduced, options.feas_tol),
        root_lower: pre.reduced.lower.clone(),
        root_upper: pre.reduced.upper.clone(),
        applied: Vec::new(),
        pool: Vec::new(),
        feas_tol: options.feas_tol,
        stats,
    };
    let mut pseudo = PseudoCosts::new(integral.len());

    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut heap = BinaryHeap::new();
    let mut next_id = 0usize;

    let mut consider = |objective: f64, x: Vec<f64>, fixes: Vec<Fix>, incumbent: &mut Option<(f64, Vec<f64>)>, heap: &mut BinaryHeap<Node>| {
        if let Some((inc, _)) = incumbent {
            if objective >= *inc - options.cutoff_gap(*inc) {
                return;
            }
        }
        if fractional_columns(&x, &integral).is_empty() {
            let rounded: Vec<f64> = x.iter().zip(&integral).map(|(&v, &int)| if int { v.round() } else { v }).collect();
            let full = pre.expand(&rounded);
            *incumbent = Some((model.objective_value(&full), full));
        } else {
            heap.push(Node { id: next_id, bound: objective, lp: objective, fixes, x });
            next_id += 1;
        }
    };

    let mut root = search.solve_node(&[])?;
    if let NodeLp::Solved { objective, .. } = &root {
        search.stats.root_lp = *objective;
    }
    let mir = MirSeparator::new(&pre.reduced.rows, &integral, &pre.reduced.lower);
    for _ in 0..if options.cuts { CUT_ROUNDS } else { 0 } {
        let NodeLp::Solved { objective: before, .. } = root else { break };
        let mut cuts = gomory_cuts(&search.tab, &integral, CUTS_PER_ROUND);
        cuts.extend(mir.separate(search.tab.values(), &pre.reduced.lower, &pre.reduced.upper, CUTS_PER_ROUND));
        if cuts.is_empty() {
            break;
        }
        search.stats.cuts += cuts.len();
        for c in cuts {
            search.tab.add_row(c.coeffs, c.lo, c.hi);
        }
        root = search.solve_node(&[])?;
        match &root {
            NodeLp::Solved { objective, .. } if objective - before > CUT_STALL * (1.0 + before.abs()) => {}
            _ => break,
        }
    }
    if let NodeLp::Solved { objective, x } = root {
        search.stats.root_bound = objective;
        let tab = &search.tab;
        let slack: Vec<bool> = (0..tab.num_rows()).map(|i| tab.row_slack(i) > POOL_SLACK).collect();
        search.pool = search.tab.drop_rows(|i| slack[i]);
        consider(objective, x, Vec::new(), &mut incumbent, &mut heap);
    }

    let mut status = SolveStatus::Optimal;
    while let Some(node) = heap.peek() {
        if let Some((inc, _)) = &incumbent {
            if node.bound >= inc - options.cutoff_gap(*inc) {
                break;
            }
            if let Some(g) = options.gap_limit {
                if (inc - node.bound) <= g * inc.abs().max(1e-10) {
                    status = SolveStatus::GapLimit;
                    break;
                }
            }
        }
        if options.time_limit_s.is_some_and(|t| start.elapsed().as_secs_f64() >= t) {
            status = SolveStatus::TimeLimit;
            break;
        }
        if options.node_limit.is_some_and(|n| search.stats.nodes >= n) {
            status = SolveStatus::NodeLimit;
            break;
        }
        let mut node = heap.pop().expect("peeked");
        let cands = fractional_columns(&node.x, &integral);
        let j = match options.branching {
            Branching::MostFractional => most_fractional(&node.x, &cands).expect("fractional node"),
            Branching::Reliability => {
                let mut unreliable: Vec<usize> = cands.iter().copied().filter(|&j| !pseudo.reliable(j)).collect();
                unreliable.sort_by(|&a, &b| fractionality(node.x[b]).total_cmp(&fractionality(node.x[a])).then(a.cmp(&b)));
                unreliable.truncate(SB_CANDIDATES);
                let mut strong = vec![None; integral.len()];
                if !unreliable.is_empty() {
                    let Some((base, res)) = search.strong_branch(&node.fixes, &node.x, &unreliable)? else {
                        continue;
                    };
                    for (&j, pair) in unreliable.iter().zip(&res) {
                        let v = node.x[j];
                        pseudo.record(j, false, pair[0] - base, v - v.floor());
                        pseudo.record(j, true, pair[1] - base, v.ceil() - v);
                        strong[j] = Some(pair.map(|o| o - base));
                    }
                    // both children of some column bound the node from below
                    let lifted = res.iter().map(|p| p[0].min(p[1])).fold(base, f64::max);
                    node.bound = node.bound.max(lifted);
                    if let Some((inc, _)) = &incumbent {
                        if node.bound >= inc - options.cutoff_gap(*inc) {
                            continue;
                        }
                    }
                    if lifted > base + 1e-9 && heap.peek().is_some_and(|n| n.bound < node.bound) {
                        heap.push(node);
                        continue;
                    }
                }
                let (md, mu) = (pseudo.mean(0), pseudo.mean(1));
                let mut best: Option<(usize, f64)> = None;
                for &j in &cands {
                    let v = node.x[j];
                    let (down, up) = match strong[j] {
                        Some([d, u]) => (d, u),
                        None => (pseudo.estimate(j, 0, md) * (v - v.floor()), pseudo.estimate(j, 1, mu) * (v.ceil() - v)),
                    };
                    let score = product_score(down, up);
                    if best.is_none_or(|b| score > b.1) {
                        best = Some((j, score));
                    }
                }
                best.expect("fractional node").0
            }
        };
        search.stats.nodes += 1;
        let v = node.x[j];
        let (lo, hi) = current_bounds(&node.fixes, j, search.root_lower[j], search.root_upper[j]);
        for (dir, (l, u)) in [(lo, v.floor()), (v.ceil(), hi)].into_iter().enumerate() {
            let mut fixes = node.fixes.clone();
            fixes.push((j, l, u));
            if let NodeLp::Solved { objective, x } = search.solve_node(&fixes)? {
                let dist = if dir == 0 { v - v.floor() } else { v.ceil() - v };
                pseudo.record(j, dir == 1, objective - node.lp, dist);
                consider(objective, x, fixes, &mut incumbent, &mut heap);
            }
        }
    }

    let open_bound = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    let stats = search.stats;
    Ok(match incumbent {
        Some((_, x)) => finish(model, status, Some(&x), open_bound, start, stats),
        None if status == SolveStatus::Optimal => finish(model, SolveStatus::Infeasible, None, f64::INFINITY, start, stats),
        None => finish(model, status, None, open_bound, start, stats),
    })
}

fn current_bounds(fixes: &[Fix], j: usize, lo: f64, hi: f64) -> (f64, f64) {
    fixes.iter().rev().find(|f| f.0 == j).map_or((lo, hi), |f| (f.1, f.2))
}
