//! Cutting planes for the root node: Gomory mixed-integer cuts read off the
//! optimal tableau and aggregated MIR cuts built from the model rows.

use super::presolve::Row;
use super::simplex::Tableau;

/// Smallest distance of a basic value from an integer for its row to be used.
const MIN_FRAC: f64 = 0.005;
const MIN_EFFICACY: f64 = 1e-4;
const MAX_DYNAMISM: f64 = 1e6;
/// Coefficients below this (after scaling to max 1) are relaxed away.
const TINY: f64 = 1e-9;
/// Cancellation residue, dropped outright.
const NOISE: f64 = 1e-12;
/// Two cuts with a larger cosine count as duplicates.
const MAX_PARALLEL: f64 = 0.999;

fn frac(v: f64) -> f64 {
    v - v.floor()
}

/// One GMI cut per tableau row whose integer basic is fractional, returned as
/// `Σ c·x ≥ rhs` rows in structural space, the most violated first.
pub(crate) fn gomory_cuts(tab: &Tableau, integral: &[bool], limit: usize) -> Vec<Row> {
    let n = tab.num_cols();
    let x = tab.values();
    let mut found: Vec<(f64, Row)> = Vec::new();
    'rows: for r in 0..tab.num_rows() {
        let (b, beta) = tab.basic(r);
        if b >= n || !integral[b] {
            continue;
        }
        let f0 = frac(beta);
        if !(MIN_FRAC..=1.0 - MIN_FRAC).contains(&f0) {
            continue;
        }
        let mut c = vec![0.0; n];
        let mut rhs = 1.0;
        for (j, t) in tab.row_terms(r) {
            let Some(up) = tab.at_upper(j) else { continue 'rows };
            let (lo, hi) = tab.bounds(j);
            // x_B + Σ a·s = β with s = x − lo (at lower) or hi − x (at upper)
            let a = if up { -t } else { t };
            let int_col = j < n && integral[j] && lo.fract() == 0.0 && hi.fract() == 0.0;
            let g = if int_col {
                let fj = frac(a);
                if fj <= f0 {
                    fj / f0
                } else {
                    (1.0 - fj) / (1.0 - f0)
                }
            } else if a >= 0.0 {
                a / f0
            } else {
                -a / (1.0 - f0)
            };
            if g == 0.0 {
                continue;
            }
            // g·s in terms of x_j, then x_j in structural space for logicals
            let (coef, shift) = if up { (-g, -g * hi) } else { (g, g * lo) };
            rhs += shift;
            if j < n {
                c[j] += coef;
            } else {
                for &(col, v) in tab.row_coeffs(j - n) {
                    c[col] -= coef * v;
                }
            }
        }
        if let Some(row) = clean(tab, c, rhs) {
            let act: f64 = row.coeffs.iter().map(|&(j, v)| v * x[j]).sum();
            let norm = row.coeffs.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
            let efficacy = (row.lo - act) / norm;
            if efficacy > MIN_EFFICACY {
                found.push((efficacy, row));
            }
        }
    }
    found.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut out: Vec<Row> = Vec::new();
    for (_, row) in found {
        if out.len() >= limit {
            break;
        }
        if out.iter().all(|o| cosine(o, &row) < MAX_PARALLEL) {
            out.push(row);
        }
    }
    out
}

/// Scales to max coefficient 1, relaxes tiny coefficients into the rhs and
/// rejects numerically poor cuts.
fn clean(tab: &Tableau, mut c: Vec<f64>, mut rhs: f64) -> Option<Row> {
    let max = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 || !rhs.is_finite() {
        return None;
    }
    let mut coeffs = Vec::new();
    let mut min = f64::INFINITY;
    rhs /= max;
    for (j, v) in c.iter_mut().enumerate() {
        *v /= max;
        if v.abs() < TINY {
            if v.abs() < NOISE {
                continue;
            }
            // v·x ≤ max over the box, so dropping it keeps the cut valid
            let (lo, hi) = tab.bounds(j);
            let worst = if *v > 0.0 { *v * hi } else { *v * lo };
            if !worst.is_finite() {
                return None;
            }
            rhs -= worst;
        } else {
            min = min.min(v.abs());
            coeffs.push((j, *v));
        }
    }
    if coeffs.is_empty() || 1.0 / min > MAX_DYNAMISM {
        return None;
    }
    Some(Row { coeffs, lo: rhs, hi: f64::INFINITY })
}

fn cosine(a: &Row, b: &Row) -> f64 {
    let mut dot = 0.0;
    let (mut i, mut k) = (0, 0);
    while i < a.coeffs.len() && k < b.coeffs.len() {
        match a.coeffs[i].0.cmp(&b.coeffs[k].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => k += 1,
            std::cmp::Ordering::Equal => {
                dot += a.coeffs[i].1 * b.coeffs[k].1;
                i += 1;
                k += 1;
            }
        }
    }
    let na: f64 = a.coeffs.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
    let nb: f64 = b.coeffs.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// A row `g_c·c + Σ g_k·u_k + Σ e_j·x_j ≥ lhs` that bounds continuous `c`
/// from below, with every other continuous `u_k` entering positively.
#[derive(Debug, Clone)]
struct VarBound {
    row: usize,
    /// Coefficient of the bounded column.
    g: f64,
}

/// Aggregated complemented-MIR separator over the model rows.
///
/// Each row with a fractional integer column is turned into a pure integer
/// knapsack: continuous columns are replaced by a tight variable lower bound
/// row where one exists, otherwise by their own bound. MIR rounding is then
/// tried for a few divisors.
pub(crate) struct MirSeparator<'a> {
    rows: &'a [Row],
    integral: &'a [bool],
    /// Variable lower bound rows per column (rows in `≥` orientation).
    vlb: Vec<Vec<VarBound>>,
}

/// A row read in `Σ a·x ≤ b` orientation.
fn oriented(row: &Row, upper_side: bool) -> Option<(Vec<(usize, f64)>, f64)> {
    if upper_side && row.hi.is_finite() {
        Some((row.coeffs.clone(), row.hi))
    } else if !upper_side && row.lo.is_finite() {
        Some((row.coeffs.iter().map(|&(j, v)| (j, -v)).collect(), -row.lo))
    } else {
        None
    }
}

impl<'a> MirSeparator<'a> {
    pub fn new(rows: &'a [Row], integral: &'a [bool], lower: &[f64]) -> Self {
        let mut vlb = vec![Vec::new(); integral.len()];
        for (r, row) in rows.iter().enumerate() {
            if !row.lo.is_finite() || row.hi.is_finite() {
                continue;
            }
            let cont: Vec<&(usize, f64)> = row.coeffs.iter().filter(|e| !integral[e.0]).collect();
            // all continuous columns enter positively and are bounded below
            if cont.iter().all(|&&(j, v)| v > 0.0 && lower[j].is_finite()) && cont.len() < row.coeffs.len() {
                for &&(j, g) in &cont {
                    vlb[j].push(VarBound { row: r, g });
                }
            }
        }
        MirSeparator { rows, integral, vlb }
    }

    /// Pure integer knapsack `Σ w·x ≤ b` from row `base`, or `None` when a
    /// continuous column cannot be eliminated.
    fn aggregate(&self, base: &[(usize, f64)], b: f64, x: &[f64], lower: &[f64], upper: &[f64]) -> Option<(Vec<(usize, f64)>, f64)> {
        let mut agg: std::collections::BTreeMap<usize, f64> = base.iter().copied().collect();
        let mut b = b;
        // substitute the tightest bound rows first, largest contribution first
        let mut subs: Vec<(usize, f64)> = base
            .iter()
            .filter(|&&(j, a)| !self.integral[j] && a > 0.0 && !self.vlb[j].is_empty())
            .map(|&(j, a)| (j, a * (x[j] - lower[j])))
            .collect();
        subs.sort_by(|p, q| q.1.total_cmp(&p.1).then(p.0.cmp(&q.0)));
        for (c, _) in subs {
            let a = agg.get(&c).copied().unwrap_or(0.0);
            if a <= 0.0 {
                continue;
            }
            let Some(vb) = self.vlb[c].iter().find(|vb| {
                let row = &self.rows[vb.row];
                let act: f64 = row.coeffs.iter().map(|&(j, v)| v * x[j]).sum();
                act - row.lo <= 1e-7 * (1.0 + row.lo.abs())
            }) else {
                continue;
            };
            let row = &self.rows[vb.row];
            // a·c ≥ (a/g)·(lo − Σ others) ; other continuous coefficients must
            // stay eliminable
            let f = a / vb.g;
            let ok = row.coeffs.iter().all(|&(j, v)| {
                if j == c || self.integral[j] {
                    return true;
                }
                let next = agg.get(&j).copied().unwrap_or(0.0) - f * v;
                next >= 0.0 || upper[j].is_finite()
            });
            if !ok {
                continue;
            }
            for &(j, v) in &row.coeffs {
                *agg.entry(j).or_insert(0.0) -= f * v;
            }
            agg.insert(c, 0.0);
            b -= f * row.lo;
        }
        let mut out = Vec::new();
        for (j, a) in agg {
            if a.abs() < 1e-12 {
                continue;
            }
            if self.integral[j] {
                out.push((j, a));
            } else if a > 0.0 && lower[j].is_finite() {
                b -= a * lower[j];
            } else if a < 0.0 && upper[j].is_finite() {
                b -= a * upper[j];
            } else {
                return None;
            }
        }
        Some((out, b))
    }

    pub fn separate(&self, x: &[f64], lower: &[f64], upper: &[f64], limit: usize) -> Vec<Row> {
        let mut found: Vec<(f64, Row)> = Vec::new();
        for row in self.rows {
            if !row.coeffs.iter().any(|&(j, _)| self.integral[j] && frac(x[j]).min(1.0 - frac(x[j])) > 1e-6) {
                continue;
            }
            for side in [true, false] {
                let Some((base, b)) = oriented(row, side) else { continue };
                let Some((knap, b)) = self.aggregate(&base, b, x, lower, upper) else { continue };
                if let Some(cut) = mir_knapsack(&knap, b, x, lower, upper) {
                    found.push(cut);
                }
            }
        }
        found.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut out: Vec<Row> = Vec::new();
        for (_, row) in found {
            if out.len() >= limit {
                break;
            }
            if out.iter().all(|o| cosine(o, &row) < MAX_PARALLEL) {
                out.push(row);
            }
        }
        out
    }
}

fn mir_value(a: f64, f0: f64) -> f64 {
    let fa = frac(a);
    a.floor() + (fa - f0).max(0.0) / (1.0 - f0)
}

/// Best complemented MIR cut of `Σ w·x ≤ b` over integer `x` in their
/// bounds, as `(efficacy, row)`.
fn mir_knapsack(knap: &[(usize, f64)], b: f64, x: &[f64], lower: &[f64], upper: &[f64]) -> Option<(f64, Row)> {
    if knap.is_empty() || knap.iter().any(|&(j, _)| !lower[j].is_finite() || !upper[j].is_finite()) {
        return None;
    }
    // shift to v = x − l, or v = u − x when x sits in the upper half
    let mut rhs = b;
    let mut terms = Vec::with_capacity(knap.len());
    for &(j, w) in knap {
        let up = x[j] - lower[j] > upper[j] - x[j];
        if up {
            rhs -= w * upper[j];
            terms.push((j, -w, up));
        } else {
            rhs -= w * lower[j];
            terms.push((j, w, up));
        }
    }
    let mut deltas: Vec<f64> = knap
        .iter()
        .filter(|&&(j, _)| x[j] - lower[j] > 1e-6 && upper[j] - x[j] > 1e-6)
        .map(|e| e.1.abs())
        .collect();
    deltas.sort_by(|a, b| b.total_cmp(a));
    deltas.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.abs());
    let base = deltas.clone();
    for d in base {
        for s in [2.0, 4.0, 8.0] {
            deltas.push(d / s);
        }
    }
    let mut best: Option<(f64, Row)> = None;
    for delta in deltas {
        if delta < 1e-6 {
            continue;
        }
        let bt = rhs / delta;
        let f0 = frac(bt);
        if !(0.01..=0.99).contains(&f0) || bt.abs() > 1e6 {
            continue;
        }
        // Σ F(a/δ)·v ≤ ⌊b/δ⌋, then back to x
        let mut coeffs = Vec::with_capacity(terms.len());
        let mut cut_rhs = bt.floor();
        for &(j, a, up) in &terms {
            let g = mir_value(a / delta, f0);
            if g == 0.0 {
                continue;
            }
            if up {
                cut_rhs -= g * upper[j];
                coeffs.push((j, -g));
            } else {
                cut_rhs += g * lower[j];
                coeffs.push((j, g));
            }
        }
        if coeffs.is_empty() {
            continue;
        }
        let act: f64 = coeffs.iter().map(|&(j, v)| v * x[j]).sum();
        let norm = coeffs.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
        let eff = (act - cut_rhs) / norm;
        if eff > MIN_EFFICACY && best.as_ref().is_none_or(|b| eff > b.0) {
            best = Some((eff, Row { coeffs, lo: f64::NEG_INFINITY, hi: cut_rhs }));
        }
    }
    best
}
