//! Solver-agnostic standard-form MILPs for the covering variants.
//!
//! Three builders share one representation:
//!
//! * [`build_tlcscp`]: deterministic two-level cover, one `≥ 1` row per node
//!   and level.
//! * [`build_gutlcscp_la`]: tangent relaxation over nominal miss
//!   probabilities.
//! * [`build_rutlcscp_la_rc`]: the same relaxation with the budgeted worst
//!   case dualized through `ζ`/`η` columns.

mod lp;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use lp::{parse_lp, write_lp};

use crate::error::{Error, Result};
use crate::linearization::TangentFamily;
use crate::types::{ln_miss, Instance, Level, RobustConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Binary,
    Integer,
    Continuous,
}

impl VarKind {
    pub fn is_integral(self) -> bool {
        !matches!(self, VarKind::Continuous)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

/// Identifies which family of constraint a row instantiates.
///
/// Indices: `i` demand node, `j`/`k` facility, `cut` position in the sorted
/// tangent family.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowLabel {
    CoverY { i: usize },
    CoverZ { i: usize },
    BoxY { i: usize },
    BoxZ { i: usize },
    Tangent { i: usize, cut: usize },
    DualY { i: usize, j: usize },
    DualZ { i: usize, k: usize },
    Other(String),
}

impl RowLabel {
    /// Family name used for counting rows.
    pub fn family(&self) -> &str {
        match self {
            RowLabel::CoverY { .. } => "cover-y",
            RowLabel::CoverZ { .. } => "cover-z",
            RowLabel::BoxY { .. } => "box-y",
            RowLabel::BoxZ { .. } => "box-z",
            RowLabel::Tangent { .. } => "tangent",
            RowLabel::DualY { .. } => "dual-y",
            RowLabel::DualZ { .. } => "dual-z",
            RowLabel::Other(_) => "other",
        }
    }

    pub fn demand_node(&self) -> Option<usize> {
        match *self {
            RowLabel::CoverY { i }
            | RowLabel::CoverZ { i }
            | RowLabel::BoxY { i }
            | RowLabel::BoxZ { i }
            | RowLabel::Tangent { i, .. }
            | RowLabel::DualY { i, .. }
            | RowLabel::DualZ { i, .. } => Some(i),
            RowLabel::Other(_) => None,
        }
    }
}

impl fmt::Display for RowLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowLabel::CoverY { i } => write!(f, "cover_y_{i}"),
            RowLabel::CoverZ { i } => write!(f, "cover_z_{i}"),
            RowLabel::BoxY { i } => write!(f, "box_y_{i}"),
            RowLabel::BoxZ { i } => write!(f, "box_z_{i}"),
            RowLabel::Tangent { i, cut } => write!(f, "tangent_{cut}_{i}"),
            RowLabel::DualY { i, j } => write!(f, "dual_y_{i}_{j}"),
            RowLabel::DualZ { i, k } => write!(f, "dual_z_{i}_{k}"),
            RowLabel::Other(s) => f.write_str(s),
        }
    }
}

impl FromStr for RowLabel {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split('_').collect();
        let num = |k: usize| parts.get(k).and_then(|p| p.parse::<usize>().ok());
        let parsed = match (parts.as_slice(), parts.len()) {
            (["cover", "y", ..], 3) => num(2).map(|i| RowLabel::CoverY { i }),
            (["cover", "z", ..], 3) => num(2).map(|i| RowLabel::CoverZ { i }),
            (["box", "y", ..], 3) => num(2).map(|i| RowLabel::BoxY { i }),
            (["box", "z", ..], 3) => num(2).map(|i| RowLabel::BoxZ { i }),
            (["tangent", ..], 3) => num(1).zip(num(2)).map(|(cut, i)| RowLabel::Tangent { i, cut }),
            (["dual", "y", ..], 4) => num(2).zip(num(3)).map(|(i, j)| RowLabel::DualY { i, j }),
            (["dual", "z", ..], 4) => num(2).zip(num(3)).map(|(i, k)| RowLabel::DualZ { i, k }),
            _ => None,
        };
        Ok(parsed.unwrap_or_else(|| RowLabel::Other(s.to_string())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    /// Sparse `(column, coefficient)` pairs; zero coefficients are omitted.
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub label: RowLabel,
}

/// Minimization MILP in row form.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StandardFormModel {
    pub variables: Vec<Variable>,
    /// Sparse objective; zero coefficients are omitted.
    pub objective: Vec<(usize, f64)>,
    pub constraints: Vec<Constraint>,
    /// Name → column.
    pub variable_map: BTreeMap<String, usize>,
    /// Columns of `y_0..y_{n1-1}`.
    pub y_cols: Vec<usize>,
    /// Columns of `z_0..z_{n2-1}`.
    pub z_cols: Vec<usize>,
}

impl StandardFormModel {
    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, lower: f64, upper: f64) -> usize {
        let name = name.into();
        let col = self.variables.len();
        self.variable_map.insert(name.clone(), col);
        self.variables.push(Variable { name, kind, lower, upper });
        col
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64, label: RowLabel) {
        let coeffs = coeffs.into_iter().filter(|(_, a)| *a != 0.0).collect();
        self.constraints.push(Constraint { coeffs, sense, rhs, label });
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.variable_map.get(name).copied()
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_rows(&self) -> usize {
        self.constraints.len()
    }

    /// Dense objective vector.
    pub fn cost_vector(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.variables.len()];
        for &(j, v) in &self.objective {
            c[j] += v;
        }
        c
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|&(j, c)| c * x[j]).sum()
    }

    /// Row counts per label family.
    pub fn label_counts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for c in &self.constraints {
            *out.entry(c.label.family().to_string()).or_insert(0) += 1;
        }
        out
    }

    /// Largest constraint or bound violation of a point.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, &val) in self.variables.iter().zip(x) {
            worst = worst.max(v.lower - val).max(val - v.upper);
        }
        for c in &self.constraints {
            let act: f64 = c.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            let viol = match c.sense {
                Sense::Le => act - c.rhs,
                Sense::Ge => c.rhs - act,
                Sense::Eq => (act - c.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    /// Structural checks: indices in range, finite data, consistent bounds,
    /// unique names, and a name map matching the variable list.
    pub fn validate(&self) -> Result<()> {
        let n = self.variables.len();
        if self.variable_map.len() != n {
            return Err(Error::MalformedModel("duplicate variable names".into()));
        }
        for (j, v) in self.variables.iter().enumerate() {
            if self.variable_map.get(&v.name) != Some(&j) {
                return Err(Error::MalformedModel(format!("name map out of sync at `{}`", v.name)));
            }
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(Error::MalformedModel(format!("bad bounds on `{}`", v.name)));
            }
        }
        for &(j, c) in &self.objective {
            if j >= n || !c.is_finite() {
                return Err(Error::MalformedModel(format!("bad objective entry ({j}, {c})")));
            }
        }
        for row in &self.constraints {
            if !row.rhs.is_finite() {
                return Err(Error::MalformedModel(format!("non-finite rhs in {}", row.label)));
            }
            for &(j, a) in &row.coeffs {
                if j >= n || !a.is_finite() {
                    return Err(Error::MalformedModel(format!("bad entry ({j}, {a}) in {}", row.label)));
                }
            }
        }
        for &j in self.y_cols.iter().chain(&self.z_cols) {
            if j >= n {
                return Err(Error::MalformedModel(format!("selection column {j} out of range")));
            }
        }
        Ok(())
    }

    fn add_selection_vars(&mut self, inst: &Instance) {
        self.y_cols = (0..inst.n1).map(|j| self.add_var(format!("y_{j}"), VarKind::Binary, 0.0, 1.0)).collect();
        self.z_cols = (0..inst.n2).map(|k| self.add_var(format!("z_{k}"), VarKind::Binary, 0.0, 1.0)).collect();
        self.objective = self
            .y_cols
            .iter()
            .zip(&inst.cost_y)
            .chain(self.z_cols.iter().zip(&inst.cost_z))
            .filter(|(_, c)| **c != 0.0)
            .map(|(&j, &c)| (j, c))
            .collect();
    }

    /// Binary selections read from a point (rounded at 0.5).
    pub fn selections(&self, x: &[f64]) -> (Vec<bool>, Vec<bool>) {
        let pick = |cols: &[usize]| cols.iter().map(|&j| x[j] > 0.5).collect();
        (pick(&self.y_cols), pick(&self.z_cols))
    }
}

/// Deterministic two-level cover: `a_ij = 1` iff `p̄_ij < 1`.
pub fn build_tlcscp(inst: &Instance) -> Result<StandardFormModel> {
    inst.ensure_valid()?;
    let mut model = StandardFormModel::default();
    model.add_selection_vars(inst);
    for level in [Level::Y, Level::Z] {
        let cols = if level == Level::Y { model.y_cols.clone() } else { model.z_cols.clone() };
        for i in 0..inst.m {
            let (nom, _) = inst.row(level, i);
            let coeffs = cols.iter().zip(nom).filter(|(_, p)| **p < 1.0).map(|(&c, _)| (c, 1.0)).collect();
            let label = if level == Level::Y { RowLabel::CoverY { i } } else { RowLabel::CoverZ { i } };
            model.add_row(coeffs, Sense::Ge, 1.0, label);
        }
    }
    Ok(model)
}

/// Tangent relaxation over nominal probabilities (deviations ignored).
pub fn build_gutlcscp_la(inst: &Instance, alpha: f64, betas: &[f64]) -> Result<StandardFormModel> {
    inst.ensure_valid()?;
    let family = TangentFamily::build(alpha, betas)?;
    let mut model = StandardFormModel::default();
    model.add_selection_vars(inst);
    for i in 0..inst.m {
        let ly: Vec<(usize, f64)> = model.y_cols.iter().zip(&inst.p_nom[i]).map(|(&c, &p)| (c, ln_miss(p))).collect();
        let lz: Vec<(usize, f64)> = model.z_cols.iter().zip(&inst.q_nom[i]).map(|(&c, &q)| (c, ln_miss(q))).collect();
        model.add_row(ly.clone(), Sense::Le, family.box_rhs, RowLabel::BoxY { i });
        model.add_row(lz.clone(), Sense::Le, family.box_rhs, RowLabel::BoxZ { i });
        for (cut_idx, cut) in family.cuts.iter().enumerate() {
            let coeffs = scaled(&ly, cut.beta).chain(scaled(&lz, cut.gamma)).collect();
            model.add_row(coeffs, Sense::Le, cut.log_rhs, RowLabel::Tangent { i, cut: cut_idx });
        }
    }
    Ok(model)
}

fn scaled(terms: &[(usize, f64)], w: f64) -> impl Iterator<Item = (usize, f64)> + '_ {
    terms.iter().map(move |&(c, a)| (c, w * a))
}

/// How the dual-feasibility coefficient `d` of a facility is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DualMode {
    /// `ln(p̄ + p̂) − ln(p̄)`: the log-space deviation of the miss probability.
    #[default]
    LogDeviation,
    /// `ln(p̄ + p̂) − ln(p̂)`, kept for comparison runs.
    PaperLiteral,
}

/// Dual coefficient for one pair (clamped logarithms).
pub fn dual_coefficient(nom: f64, dev: f64, mode: DualMode) -> f64 {
    match mode {
        DualMode::LogDeviation => ln_miss(nom + dev) - ln_miss(nom),
        DualMode::PaperLiteral => ln_miss(nom + dev) - ln_miss(dev),
    }
}

/// Robust counterpart of the tangent relaxation.
///
/// For node `i` the bracketed robust term of level y is
/// `Σ_j ln(p̄_ij) y_j + Σ_j ζ¹_ij + Γ_i η¹_i` with `ζ¹_ij + η¹_i ≥ d¹_ij y_j`;
/// at the optimum of the inner minimization it equals the log of the
/// worst-case miss product.
pub fn build_rutlcscp_la_rc(inst: &Instance, config: &RobustConfig) -> Result<StandardFormModel> {
    build_rutlcscp_la_rc_with(inst, config, DualMode::LogDeviation)
}

pub fn build_rutlcscp_la_rc_with(inst: &Instance, config: &RobustConfig, mode: DualMode) -> Result<StandardFormModel> {
    inst.ensure_valid()?;
    config.validate(inst.m)?;
    let family = TangentFamily::build(config.alpha, &config.beta_list)?;
    let (m, n1, n2) = (inst.m, inst.n1, inst.n2);
    let mut model = StandardFormModel::default();
    model.add_selection_vars(inst);
    let cont = |model: &mut StandardFormModel, name: String| model.add_var(name, VarKind::Continuous, 0.0, f64::INFINITY);
    let zeta1: Vec<Vec<usize>> = (0..m).map(|i| (0..n1).map(|j| cont(&mut model, format!("zeta1_{i}_{j}"))).collect()).collect();
    let zeta2: Vec<Vec<usize>> = (0..m).map(|i| (0..n2).map(|k| cont(&mut model, format!("zeta2_{i}_{k}"))).collect()).collect();
    let eta1: Vec<usize> = (0..m).map(|i| cont(&mut model, format!("eta1_{i}"))).collect();
    let eta2: Vec<usize> = (0..m).map(|i| cont(&mut model, format!("eta2_{i}"))).collect();

    for i in 0..m {
        let gamma = f64::from(config.gamma_budget.for_node(i));
        let robust_term = |sel: &[usize], nom: &[f64], zeta: &[usize], eta: usize| -> Vec<(usize, f64)> {
            sel.iter()
                .zip(nom)
                .map(|(&c, &p)| (c, ln_miss(p)))
                .chain(zeta.iter().map(|&c| (c, 1.0)))
                .chain(std::iter::once((eta, gamma)))
                .collect()
        };
        let ty = robust_term(&model.y_cols, &inst.p_nom[i], &zeta1[i], eta1[i]);
        let tz = robust_term(&model.z_cols, &inst.q_nom[i], &zeta2[i], eta2[i]);
        model.add_row(ty.clone(), Sense::Le, family.box_rhs, RowLabel::BoxY { i });
        model.add_row(tz.clone(), Sense::Le, family.box_rhs, RowLabel::BoxZ { i });
        for (cut_idx, cut) in family.cuts.iter().enumerate() {
            let coeffs = scaled(&ty, cut.beta).chain(scaled(&tz, cut.gamma)).collect();
            model.add_row(coeffs, Sense::Le, cut.log_rhs, RowLabel::Tangent { i, cut: cut_idx });
        }
    }
    for i in 0..m {
        for j in 0..n1 {
            let d = dual_coefficient(inst.p_nom[i][j], inst.p_dev[i][j], mode);
            let coeffs = vec![(zeta1[i][j], 1.0), (eta1[i], 1.0), (model.y_cols[j], -d)];
            model.add_row(coeffs, Sense::Ge, 0.0, RowLabel::DualY { i, j });
        }
    }
    for i in 0..m {
        for k in 0..n2 {
            let d = dual_coefficient(inst.q_nom[i][k], inst.q_dev[i][k], mode);
            let coeffs = vec![(zeta2[i][k], 1.0), (eta2[i], 1.0), (model.z_cols[k], -d)];
            model.add_row(coeffs, Sense::Ge, 0.0, RowLabel::DualZ { i, k });
        }
    }
    Ok(model)
}

/// Which model family to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    Tlcscp,
    GutlcscpLa,
    RutlcscpLaRc,
}
