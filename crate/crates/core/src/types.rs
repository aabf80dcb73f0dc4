//! Domain data model shared by every other module.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::GeneratorConfig;

/// Version tag written into every instance file.
pub const INSTANCE_FORMAT: u32 = 1;

/// Lower clamp applied to miss probabilities before taking logarithms.
pub const MIN_MISS_PROB: f64 = 1e-6;

/// Clamp a miss probability into `[MIN_MISS_PROB, 1]`.
pub fn clamp_miss(p: f64) -> f64 {
    p.clamp(MIN_MISS_PROB, 1.0)
}

/// `ln` of a clamped miss probability. Always finite and `<= 0`.
pub fn ln_miss(p: f64) -> f64 {
    clamp_miss(p).ln()
}

/// Optional planar positions (km) recorded by the generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coords {
    pub demand: Vec<[f64; 2]>,
    pub y: Vec<[f64; 2]>,
    pub z: Vec<[f64; 2]>,
}

/// A robust two-level cooperative covering instance.
///
/// `p_*` rows are indexed by demand node and columns by y-site; `q_*` likewise
/// for z-sites. All probabilities are *miss* probabilities: a value of exactly
/// 1 means the site cannot cover the node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    #[serde(default = "default_format")]
    pub format: u32,
    pub m: usize,
    pub n1: usize,
    pub n2: usize,
    pub cost_y: Vec<f64>,
    pub cost_z: Vec<f64>,
    pub p_nom: Vec<Vec<f64>>,
    pub p_dev: Vec<Vec<f64>>,
    pub q_nom: Vec<Vec<f64>>,
    pub q_dev: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Coords>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_config: Option<GeneratorConfig>,
}

fn default_format() -> u32 {
    INSTANCE_FORMAT
}

/// One invariant breach found by [`Instance::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Dimension { field: &'static str, expected: String, found: String },
    NegativeCost { level: Level, index: usize, value: f64 },
    ProbabilityRange { field: &'static str, row: usize, col: usize, value: f64 },
    NegativeDeviation { field: &'static str, row: usize, col: usize, value: f64 },
    IntervalExceedsOne { level: Level, row: usize, col: usize, sum: f64 },
    Format(u32),
}

/// Facility level: y (first level) or z (second level).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Level {
    Y,
    Z,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Level::Y => f.write_str("y"),
            Level::Z => f.write_str("z"),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Dimension { field, expected, found } => {
                write!(f, "dimension of {field}: expected {expected}, found {found}")
            }
            Violation::NegativeCost { level, index, value } => {
                write!(f, "negative {level}-cost {value} at {index}")
            }
            Violation::ProbabilityRange { field, row, col, value } => {
                write!(f, "{field} = {value} outside [0,1] at ({row},{col})")
            }
            Violation::NegativeDeviation { field, row, col, value } => {
                write!(f, "{field} = {value} negative at ({row},{col})")
            }
            Violation::IntervalExceedsOne { level, row, col, sum } => {
                let sym = if *level == Level::Y { "p" } else { "q" };
                write!(f, "{sym}\u{304}+{sym}\u{302} > 1 at ({row},{col}): {sum}")
            }
            Violation::Format(v) => write!(f, "unsupported format version {v}"),
        }
    }
}

impl Instance {
    /// Lists every invariant breach. An empty result certifies the instance.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.format != INSTANCE_FORMAT {
            out.push(Violation::Format(self.format));
        }
        check_len(&mut out, "cost_y", self.n1, self.cost_y.len());
        check_len(&mut out, "cost_z", self.n2, self.cost_z.len());
        for (level, costs) in [(Level::Y, &self.cost_y), (Level::Z, &self.cost_z)] {
            for (index, &value) in costs.iter().enumerate() {
                if !(value >= 0.0) || !value.is_finite() {
                    out.push(Violation::NegativeCost { level, index, value });
                }
            }
        }
        let mats = [
            ("p_nom", &self.p_nom, self.n1),
            ("p_dev", &self.p_dev, self.n1),
            ("q_nom", &self.q_nom, self.n2),
            ("q_dev", &self.q_dev, self.n2),
        ];
        let mut shapes_ok = true;
        for (field, mat, cols) in mats {
            check_len(&mut out, field, self.m, mat.len());
            shapes_ok &= mat.len() == self.m;
            for (i, row) in mat.iter().enumerate() {
                if row.len() != cols {
                    shapes_ok = false;
                    out.push(Violation::Dimension {
                        field,
                        expected: format!("row {i} of length {cols}"),
                        found: row.len().to_string(),
                    });
                }
            }
        }
        for (field, mat) in [("p_nom", &self.p_nom), ("q_nom", &self.q_nom)] {
            for (i, row) in mat.iter().enumerate() {
                for (j, &value) in row.iter().enumerate() {
                    if !(0.0..=1.0).contains(&value) {
                        out.push(Violation::ProbabilityRange { field, row: i, col: j, value });
                    }
                }
            }
        }
        for (field, mat) in [("p_dev", &self.p_dev), ("q_dev", &self.q_dev)] {
            for (i, row) in mat.iter().enumerate() {
                for (j, &value) in row.iter().enumerate() {
                    if !(value >= 0.0) {
                        out.push(Violation::NegativeDeviation { field, row: i, col: j, value });
                    }
                }
            }
        }
        if shapes_ok {
            for (level, nom, dev) in [
                (Level::Y, &self.p_nom, &self.p_dev),
                (Level::Z, &self.q_nom, &self.q_dev),
            ] {
                for (i, (nr, dr)) in nom.iter().zip(dev).enumerate() {
                    for (j, (&a, &b)) in nr.iter().zip(dr).enumerate() {
                        if a + b > 1.0 {
                            out.push(Violation::IntervalExceedsOne { level, row: i, col: j, sum: a + b });
                        }
                    }
                }
            }
        }
        out
    }

    /// Returns `Err` listing all violations if the instance is not valid.
    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            let msg: Vec<String> = v.iter().map(ToString::to_string).collect();
            Err(Error::InvalidInstance(msg.join("; ")))
        }
    }

    /// Nominal and deviation rows for demand node `i` at the given level.
    pub fn row(&self, level: Level, i: usize) -> (&[f64], &[f64]) {
        match level {
            Level::Y => (&self.p_nom[i], &self.p_dev[i]),
            Level::Z => (&self.q_nom[i], &self.q_dev[i]),
        }
    }

    pub fn costs(&self, level: Level) -> &[f64] {
        match level {
            Level::Y => &self.cost_y,
            Level::Z => &self.cost_z,
        }
    }

    /// The instance obtained by moving every probability to the top of its
    /// interval (`p̄ + p̂`), with zero deviations.
    pub fn worst_case_nominal(&self) -> Instance {
        let shift = |nom: &[Vec<f64>], dev: &[Vec<f64>]| -> Vec<Vec<f64>> {
            nom.iter()
                .zip(dev)
                .map(|(n, d)| n.iter().zip(d).map(|(a, b)| (a + b).min(1.0)).collect())
                .collect()
        };
        let zeros = |mat: &[Vec<f64>]| -> Vec<Vec<f64>> {
            mat.iter().map(|r| vec![0.0; r.len()]).collect()
        };
        Instance {
            p_nom: shift(&self.p_nom, &self.p_dev),
            q_nom: shift(&self.q_nom, &self.q_dev),
            p_dev: zeros(&self.p_dev),
            q_dev: zeros(&self.q_dev),
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let inst: Instance = serde_json::from_str(text)?;
        if inst.format != INSTANCE_FORMAT {
            return Err(Error::InvalidInstance(format!(
                "unsupported format version {}",
                inst.format
            )));
        }
        Ok(inst)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

fn check_len(out: &mut Vec<Violation>, field: &'static str, expected: usize, found: usize) {
    if expected != found {
        out.push(Violation::Dimension {
            field,
            expected: expected.to_string(),
            found: found.to_string(),
        });
    }
}

/// Budget of uncertainty: how many miss probabilities per demand node may
/// deviate simultaneously.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaBudget {
    Uniform(u32),
    PerNode(Vec<u32>),
}

impl GammaBudget {
    pub fn for_node(&self, i: usize) -> u32 {
        match self {
            GammaBudget::Uniform(g) => *g,
            GammaBudget::PerNode(v) => v[i],
        }
    }

    pub fn expand(&self, m: usize) -> Vec<u32> {
        (0..m).map(|i| self.for_node(i)).collect()
    }
}

/// The seventeen tangent weights used throughout the experiments.
pub const DEFAULT_BETAS: [f64; 17] = [
    0.001, 0.01, 0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.85, 0.9, 0.95, 0.99, 0.999,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustConfig {
    /// Required joint coverage probability, in `[0, 1)`.
    pub alpha: f64,
    pub gamma_budget: GammaBudget,
    /// Tangent weights β, each strictly inside `(0, 1)`; γ = 1 − β.
    pub beta_list: Vec<f64>,
}

impl RobustConfig {
    pub fn new(alpha: f64, gamma: u32) -> Self {
        RobustConfig {
            alpha,
            gamma_budget: GammaBudget::Uniform(gamma),
            beta_list: DEFAULT_BETAS.to_vec(),
        }
    }

    pub fn with_betas(mut self, betas: Vec<f64>) -> Self {
        self.beta_list = betas;
        self
    }

    pub fn with_budget(mut self, budget: GammaBudget) -> Self {
        self.gamma_budget = budget;
        self
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha = {} outside [0,1)", self.alpha)));
        }
        if let GammaBudget::PerNode(v) = &self.gamma_budget {
            if v.len() != m {
                return Err(Error::Dimension(format!(
                    "gamma budget has {} entries for {m} demand nodes",
                    v.len()
                )));
            }
        }
        if let Some(b) = self.beta_list.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
            return Err(Error::Config(format!("beta = {b} outside (0,1)")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    TimeLimit,
    NodeLimit,
    GapLimit,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::TimeLimit => "time-limit",
            SolveStatus::NodeLimit => "node-limit",
            SolveStatus::GapLimit => "gap-limit",
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A y/z selection returned by a solver.
///
/// `objective` and `best_bound` are `+inf` when no incumbent exists; they are
/// written as `null` in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub status: SolveStatus,
    #[serde(with = "finite_or_null")]
    pub objective: f64,
    #[serde(with = "finite_or_null")]
    pub best_bound: f64,
    #[serde(with = "bits")]
    pub y: Vec<bool>,
    #[serde(with = "bits")]
    pub z: Vec<bool>,
    pub wall_time_s: f64,
}

impl Solution {
    pub fn has_incumbent(&self) -> bool {
        self.status != SolveStatus::Infeasible && self.objective.is_finite()
    }

    /// Building cost of the selection.
    pub fn cost(&self, instance: &Instance) -> f64 {
        let sum = |costs: &[f64], sel: &[bool]| -> f64 {
            costs.iter().zip(sel).filter(|(_, s)| **s).map(|(c, _)| *c).sum()
        };
        sum(&instance.cost_y, &self.y) + sum(&instance.cost_z, &self.z)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    /// Solver proved optimality and the solution satisfies the exact robust
    /// constraints, so it is optimal for the nonlinear problem too.
    Optimal,
    /// Optimal for the relaxation but violates some exact constraint.
    UnderApproximate,
    /// The relaxation is infeasible, hence so is the nonlinear problem.
    NoSolution,
    /// Exactly feasible incumbent from a run stopped by a limit.
    Feasible,
    /// Stopped by a limit before any incumbent was found.
    Aborted,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Optimal => "optimal",
            Classification::UnderApproximate => "under-approximate",
            Classification::NoSolution => "no-solution",
            Classification::Feasible => "feasible",
            Classification::Aborted => "aborted",
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// Worst-case joint coverage probability per demand node.
    pub coverage: Vec<f64>,
    /// Total violation `Σ max(0, α − coverage_i)`.
    pub phi: f64,
    /// Number of nodes with `coverage_i < α − tol`.
    pub violated: usize,
    pub m: usize,
    pub classification: Classification,
}

pub(crate) mod finite_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

mod bits {
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[bool], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|b| u8::from(*b)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<bool>, D::Error> {
        Vec::<u8>::deserialize(d)?
            .into_iter()
            .map(|b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(D::Error::custom(format!("expected 0 or 1, found {other}"))),
            })
            .collect()
    }
}
