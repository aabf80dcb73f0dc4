//! Enumeration of every `(y, z)` for small instances.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linearization::TangentFamily;
use crate::model::{dual_coefficient, DualMode};
use crate::oracle::{dual_value, worst_case_miss, TOL_FEAS};
use crate::types::{ln_miss, Instance, Level, RobustConfig, Solution, SolveStatus};

/// Largest `n1 + n2` accepted by [`exhaustive_solve`].
pub const EXHAUSTIVE_MAX_SITES: usize = 24;

/// Slack allowed on each tangent or box row in the `La` variant.
const LA_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExhaustiveVariant {
    /// Exact Γ-robust constraint `(1 − β¹_i)(1 − β²_i) ≥ α`.
    Exact,
    /// Robust tangent relaxation, i.e. the feasible set of the dualized MILP.
    La,
}

/// Per-node quantity of one level under a selection: the worst-case miss
/// probability (`Exact`) or the log-space robust term (`La`).
fn level_values(inst: &Instance, config: &RobustConfig, level: Level, sel: &[bool], variant: ExhaustiveVariant) -> Result<Vec<f64>> {
    (0..inst.m)
        .map(|i| {
            let (nom, dev) = inst.row(level, i);
            let g = config.gamma_budget.for_node(i) as usize;
            match variant {
                ExhaustiveVariant::Exact => Ok(worst_case_miss(nom, dev, sel, g)?.value),
                ExhaustiveVariant::La => {
                    let mut base = 0.0;
                    let mut d = Vec::new();
                    for j in (0..nom.len()).filter(|&j| sel[j]) {
                        base += ln_miss(nom[j]);
                        d.push(dual_coefficient(nom[j], dev[j], DualMode::LogDeviation));
                    }
                    Ok(base + dual_value(&d, g)?)
                }
            }
        })
        .collect()
}

fn mask_bits(mask: u32, n: usize) -> Vec<bool> {
    (0..n).map(|j| mask >> j & 1 == 1).collect()
}

fn mask_cost(costs: &[f64], mask: u32) -> f64 {
    costs.iter().enumerate().filter(|(j, _)| mask >> j & 1 == 1).map(|(_, c)| c).sum()
}

/// Minimum-cost `(y, z)` satisfying the chosen constraint set, found by
/// enumeration. Ties go to the lowest y mask, then the lowest z mask.
pub fn exhaustive_solve(inst: &Instance, config: &RobustConfig, variant: ExhaustiveVariant) -> Result<Solution> {
    let start = Instant::now();
    inst.ensure_valid()?;
    config.validate(inst.m)?;
    if inst.n1 + inst.n2 > EXHAUSTIVE_MAX_SITES {
        return Err(Error::SizeCap(inst.n1 + inst.n2, EXHAUSTIVE_MAX_SITES));
    }
    let family = match variant {
        ExhaustiveVariant::La => Some(TangentFamily::build(config.alpha, &config.beta_list)?),
        ExhaustiveVariant::Exact => None,
    };
    let alpha = config.alpha;
    let feasible = |yv: &[f64], zv: &[f64]| -> bool {
        match &family {
            None => yv.iter().zip(zv).all(|(a, b)| (1.0 - a) * (1.0 - b) >= alpha - TOL_FEAS),
            Some(f) => yv.iter().zip(zv).all(|(&m, &n)| {
                m <= f.box_rhs + LA_TOL
                    && n <= f.box_rhs + LA_TOL
                    && f.cuts.iter().all(|c| c.beta * m + c.gamma * n <= c.log_rhs + LA_TOL)
            }),
        }
    };

    // z side precomputed, sorted by cost so the inner scan can stop early
    let mut zs: Vec<(f64, u32, Vec<f64>)> = (0..1u32 << inst.n2)
        .map(|mask| {
            let v = level_values(inst, config, Level::Z, &mask_bits(mask, inst.n2), variant)?;
            Ok((mask_cost(&inst.cost_z, mask), mask, v))
        })
        .collect::<Result<_>>()?;
    zs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut best: Option<(f64, u32, u32)> = None;
    for ymask in 0..1u32 << inst.n1 {
        let cy = mask_cost(&inst.cost_y, ymask);
        if best.is_some_and(|b| cy >= b.0) {
            continue;
        }
        let yv = level_values(inst, config, Level::Y, &mask_bits(ymask, inst.n1), variant)?;
        for (cz, zmask, zv) in &zs {
            let total = cy + cz;
            if best.is_some_and(|b| total >= b.0) {
                break;
            }
            if feasible(&yv, zv) {
                best = Some((total, ymask, *zmask));
                break;
            }
        }
    }
    let wall = start.elapsed().as_secs_f64();
    Ok(match best {
        Some((_, ym, zm)) => {
            let (y, z) = (mask_bits(ym, inst.n1), mask_bits(zm, inst.n2));
            let mut sol = Solution { status: SolveStatus::Optimal, objective: 0.0, best_bound: 0.0, y, z, wall_time_s: wall };
            sol.objective = sol.cost(inst);
            sol.best_bound = sol.objective;
            sol
        }
        None => Solution {
            status: SolveStatus::Infeasible,
            objective: f64::INFINITY,
            best_bound: f64::INFINITY,
            y: vec![false; inst.n1],
            z: vec![false; inst.n2],
            wall_time_s: wall,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{generate, GeneratorConfig};
    use crate::oracle::verify;

    #[test]
    fn exact_is_never_cheaper_than_la() {
        for seed in 0..6 {
            let inst = generate(&GeneratorConfig::new(4, 4, 4, 10.0, 7.0, 14.0, 14.0, seed)).unwrap();
            for gamma in [0, 1, 4] {
                let cfg = RobustConfig::new(0.8, gamma);
                let ex = exhaustive_solve(&inst, &cfg, ExhaustiveVariant::Exact).unwrap();
                let la = exhaustive_solve(&inst, &cfg, ExhaustiveVariant::La).unwrap();
                if ex.has_incumbent() {
                    assert!(la.has_incumbent());
                    assert!(la.objective <= ex.objective + 1e-9);
                    assert_eq!(verify(&inst, &ex, &cfg).unwrap().violated, 0);
                }
            }
        }
    }

    #[test]
    fn size_cap() {
        let inst = generate(&GeneratorConfig::new(2, 13, 12, 10.0, 5.0, 25.0, 25.0, 0)).unwrap();
        let err = exhaustive_solve(&inst, &RobustConfig::new(0.8, 0), ExhaustiveVariant::Exact).unwrap_err();
        assert!(matches!(err, Error::SizeCap(25, 24)));
    }

    #[test]
    fn single_feasible_pair() {
        let mut inst = generate(&GeneratorConfig::new(1, 2, 2, 10.0, 5.0, 1.0, 1.0, 3)).unwrap();
        // only y_1 and z_0 can cover the node
        inst.p_nom[0] = vec![1.0, 0.05];
        inst.p_dev[0] = vec![0.0, 0.0];
        inst.q_nom[0] = vec![0.02, 1.0];
        inst.q_dev[0] = vec![0.0, 0.0];
        let sol = exhaustive_solve(&inst, &RobustConfig::new(0.9, 0), ExhaustiveVariant::Exact).unwrap();
        assert_eq!((sol.y, sol.z), (vec![false, true], vec![true, false]));
    }
}
