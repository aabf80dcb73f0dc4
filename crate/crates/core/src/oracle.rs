//! Exact Γ-robust worst-case coverage and solution verification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{
    Classification, GammaBudget, Instance, Level, RobustConfig, Solution, SolveStatus,
    VerificationReport,
};

/// Feasibility tolerance used when counting violated coverage constraints.
pub const TOL_FEAS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseResult {
    /// Worst-case product of miss probabilities over the selection.
    pub value: f64,
    /// Indices whose probabilities are pushed to `nom + dev`, ascending.
    pub deviated_set: Vec<usize>,
}

/// Deviation ratio `(nom + dev)/nom`; a zero nominal with positive deviation
/// ranks above every finite ratio.
fn ratio(nom: f64, dev: f64) -> f64 {
    if nom > 0.0 {
        (nom + dev) / nom
    } else if dev > 0.0 {
        f64::INFINITY
    } else {
        1.0
    }
}

/// Product over selected indices in ascending order, deviated where flagged.
#[cfg(test)]
pub(crate) fn ordered_product(nom: &[f64], dev: &[f64], selection: &[bool], deviated: &[bool]) -> f64 {
    let mut v = 1.0;
    for j in 0..nom.len() {
        if selection[j] {
            v *= if deviated[j] { nom[j] + dev[j] } else { nom[j] };
        }
    }
    v
}

/// Largest product `Π_U (nom+dev) · Π_{S∖U} nom` over subsets `U` of the
/// selection `S` with `|U| ≤ gamma`.
///
/// The maximum is attained by deviating the `gamma` selected entries with the
/// largest ratio `(nom+dev)/nom`, ties broken by lowest index. Entries with
/// `nom = 1` are certain misses and are skipped: they contribute a factor of 1
/// and cannot deviate.
pub fn worst_case_miss(nom: &[f64], dev: &[f64], selection: &[bool], gamma: usize) -> Result<WorstCaseResult> {
    if nom.len() != dev.len() || nom.len() != selection.len() {
        return Err(Error::Dimension(format!(
            "nom/dev/selection lengths {}/{}/{}",
            nom.len(),
            dev.len(),
            selection.len()
        )));
    }
    let mut candidates: Vec<(usize, f64)> = (0..nom.len())
        .filter(|&j| selection[j] && nom[j] < 1.0)
        .map(|j| (j, ratio(nom[j], dev[j])))
        .collect();
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut deviated = vec![false; nom.len()];
    let mut deviated_set: Vec<usize> = candidates.iter().take(gamma).map(|c| c.0).collect();
    for &j in &deviated_set {
        deviated[j] = true;
    }
    deviated_set.sort_unstable();
    let mut value = 1.0;
    for j in 0..nom.len() {
        if selection[j] && nom[j] < 1.0 {
            value *= if deviated[j] { nom[j] + dev[j] } else { nom[j] };
        }
    }
    Ok(WorstCaseResult { value, deviated_set })
}

/// Worst-case joint coverage `(1 − β¹_i)(1 − β²_i)` for every demand node.
pub fn coverage(instance: &Instance, y: &[bool], z: &[bool], gamma: &GammaBudget) -> Result<Vec<f64>> {
    if y.len() != instance.n1 || z.len() != instance.n2 {
        return Err(Error::Dimension(format!(
            "selection lengths {}/{} for n1/n2 = {}/{}",
            y.len(),
            z.len(),
            instance.n1,
            instance.n2
        )));
    }
    if let GammaBudget::PerNode(v) = gamma {
        if v.len() != instance.m {
            return Err(Error::Dimension(format!("gamma budget of length {} for m = {}", v.len(), instance.m)));
        }
    }
    (0..instance.m)
        .map(|i| {
            let g = gamma.for_node(i) as usize;
            let (pn, pd) = instance.row(Level::Y, i);
            let (qn, qd) = instance.row(Level::Z, i);
            let b1 = worst_case_miss(pn, pd, y, g)?.value;
            let b2 = worst_case_miss(qn, qd, z, g)?.value;
            Ok((1.0 - b1) * (1.0 - b2))
        })
        .collect()
}

/// Checks a solution against the exact robust constraints.
pub fn verify(instance: &Instance, solution: &Solution, config: &RobustConfig) -> Result<VerificationReport> {
    if !solution.has_incumbent() {
        return Ok(VerificationReport {
            coverage: Vec::new(),
            phi: 0.0,
            violated: 0,
            m: instance.m,
            classification: if solution.status == SolveStatus::Infeasible {
                Classification::NoSolution
            } else {
                Classification::Aborted
            },
        });
    }
    let coverage = coverage(instance, &solution.y, &solution.z, &config.gamma_budget)?;
    let alpha = config.alpha;
    let phi = coverage.iter().map(|c| (alpha - c).max(0.0)).sum();
    let violated = coverage.iter().filter(|&&c| c < alpha - TOL_FEAS).count();
    let classification = match (violated, solution.status) {
        (0, SolveStatus::Optimal) => Classification::Optimal,
        (0, _) => Classification::Feasible,
        _ => Classification::UnderApproximate,
    };
    Ok(VerificationReport { coverage, phi, violated, m: instance.m, classification })
}

/// Optimal value of `min γη + Σζ_j  s.t.  ζ_j + η ≥ d_j, ζ ≥ 0, η ≥ 0`,
/// which equals the sum of the `gamma` largest entries of `d`.
pub fn dual_value(d: &[f64], gamma: usize) -> Result<f64> {
    if let Some(x) = d.iter().find(|x| !(**x >= 0.0)) {
        return Err(Error::Domain(format!("dual coefficient {x} is negative")));
    }
    let mut sorted = d.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    Ok(sorted.iter().take(gamma).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::INSTANCE_FORMAT;

    #[test]
    fn two_facility_example() {
        // enumerate: deviate 0 → 0.10·0.02 = 0.002, deviate 1 → 0.05·0.05 = 0.0025
        let r = worst_case_miss(&[0.05, 0.02], &[0.05, 0.03], &[true, true], 1).unwrap();
        assert!((r.value - 0.0025).abs() < 1e-15);
        assert_eq!(r.deviated_set, vec![1]);
    }

    #[test]
    fn gamma_zero_and_soyster_limits() {
        let nom = [0.05, 0.3, 0.02, 1.0];
        let dev = [0.01, 0.2, 0.03, 0.0];
        let sel = [true, true, false, true];
        let r = worst_case_miss(&nom, &dev, &sel, 0).unwrap();
        assert_eq!(r.value, 0.05 * 0.3);
        assert!(r.deviated_set.is_empty());
        let r = worst_case_miss(&nom, &dev, &sel, 3).unwrap();
        assert_eq!(r.value, (0.05 + 0.01) * (0.3 + 0.2));
        assert_eq!(r.deviated_set, vec![0, 1]);
    }

    #[test]
    fn empty_selection_is_certain_miss() {
        let r = worst_case_miss(&[0.1, 0.2], &[0.1, 0.1], &[false, false], 2).unwrap();
        assert_eq!(r.value, 1.0);
    }

    #[test]
    fn ties_prefer_lowest_index() {
        let r = worst_case_miss(&[0.1, 0.1, 0.1], &[0.1, 0.1, 0.1], &[true; 3], 2).unwrap();
        assert_eq!(r.deviated_set, vec![0, 1]);
    }

    #[test]
    fn zero_nominal_deviates_first() {
        let r = worst_case_miss(&[0.0, 0.5], &[0.1, 0.4], &[true, true], 1).unwrap();
        assert!((r.value - 0.05).abs() < 1e-15);
        assert_eq!(r.deviated_set, vec![0]);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(worst_case_miss(&[0.1], &[0.1, 0.2], &[true], 1).is_err());
    }

    fn one_node() -> Instance {
        Instance {
            format: INSTANCE_FORMAT,
            m: 1,
            n1: 1,
            n2: 1,
            cost_y: vec![1.0],
            cost_z: vec![1.0],
            p_nom: vec![vec![0.05]],
            p_dev: vec![vec![0.05]],
            q_nom: vec![vec![0.02]],
            q_dev: vec![vec![0.03]],
            coords: None,
            seed: None,
            generator_config: None,
        }
    }

    #[test]
    fn coverage_examples() {
        let inst = one_node();
        let c = coverage(&inst, &[true], &[true], &GammaBudget::Uniform(1)).unwrap();
        assert!((c[0] - 0.9 * 0.95).abs() < 1e-15);
        let c = coverage(&inst, &[true], &[true], &GammaBudget::Uniform(0)).unwrap();
        assert!((c[0] - 0.95 * 0.98).abs() < 1e-15);
        let c = coverage(&inst, &[false], &[false], &GammaBudget::Uniform(0)).unwrap();
        assert_eq!(c, vec![0.0]);
        assert!(coverage(&inst, &[true, true], &[true], &GammaBudget::Uniform(0)).is_err());
    }

    fn sol(y: Vec<bool>, z: Vec<bool>) -> Solution {
        Solution {
            status: SolveStatus::Optimal,
            objective: 0.0,
            best_bound: 0.0,
            y,
            z,
            wall_time_s: 0.0,
        }
    }

    #[test]
    fn verify_feasible_solution_is_optimal() {
        let inst = one_node();
        let r = verify(&inst, &sol(vec![true], vec![true]), &RobustConfig::new(0.85, 1)).unwrap();
        assert_eq!(r.classification, Classification::Optimal);
        assert_eq!((r.violated, r.phi), (0, 0.0));
        let mut s = sol(vec![true], vec![true]);
        s.status = SolveStatus::TimeLimit;
        let r = verify(&inst, &s, &RobustConfig::new(0.85, 1)).unwrap();
        assert_eq!(r.classification, Classification::Feasible);
    }

    #[test]
    fn verify_empty_selection() {
        let mut inst = one_node();
        inst.m = 3;
        for mat in [&mut inst.p_nom, &mut inst.p_dev, &mut inst.q_nom, &mut inst.q_dev] {
            let row = mat[0].clone();
            mat.push(row.clone());
            mat.push(row);
        }
        let r = verify(&inst, &sol(vec![false], vec![false]), &RobustConfig::new(0.9, 0)).unwrap();
        assert_eq!(r.violated, 3);
        assert!((r.phi - 2.7).abs() < 1e-12);
        assert_eq!(r.classification, Classification::UnderApproximate);
    }

    #[test]
    fn verify_infeasible_solution() {
        let mut s = sol(vec![], vec![]);
        s.status = SolveStatus::Infeasible;
        s.objective = f64::INFINITY;
        let r = verify(&one_node(), &s, &RobustConfig::new(0.9, 0)).unwrap();
        assert_eq!(r.classification, Classification::NoSolution);
    }

    /// LP oracle: the optimum is piecewise linear in η with breakpoints at
    /// 0 and at each d_j, so minimizing over those candidates is exact.
    fn dual_by_breakpoints(d: &[f64], gamma: usize) -> f64 {
        std::iter::once(0.0)
            .chain(d.iter().copied())
            .map(|eta| gamma as f64 * eta + d.iter().map(|x| (x - eta).max(0.0)).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn dual_value_examples() {
        assert_eq!(dual_value(&[3.0, 1.0, 2.0], 1).unwrap(), 3.0);
        assert_eq!(dual_by_breakpoints(&[3.0, 1.0, 2.0], 1), 3.0);
        assert_eq!(dual_value(&[3.0, 1.0, 2.0], 0).unwrap(), 0.0);
        assert_eq!(dual_value(&[0.5, 0.5], 5).unwrap(), 1.0);
        assert_eq!(dual_by_breakpoints(&[0.5, 0.5], 5), 1.0);
        assert!(dual_value(&[0.5, -0.1], 1).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn enumerate(nom: &[f64], dev: &[f64], sel: &[bool], gamma: usize) -> f64 {
            let idx: Vec<usize> = (0..nom.len()).filter(|&j| sel[j] && nom[j] < 1.0).collect();
            let mut best = 0.0f64;
            for mask in 0u32..(1 << idx.len()) {
                if mask.count_ones() as usize > gamma {
                    continue;
                }
                let mut dv = vec![false; nom.len()];
                for (b, &j) in idx.iter().enumerate() {
                    dv[j] = mask >> b & 1 == 1;
                }
                let mut s = vec![false; nom.len()];
                for &j in &idx {
                    s[j] = true;
                }
                best = best.max(ordered_product(nom, dev, &s, &dv));
            }
            best
        }

        fn row() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<bool>)> {
            (1usize..=9).prop_flat_map(|n| {
                (
                    prop::collection::vec(0.001f64..0.999, n),
                    prop::collection::vec(0.0f64..1.0, n),
                    prop::collection::vec(any::<bool>(), n),
                )
                    .prop_map(|(nom, frac, sel)| {
                        let dev = nom.iter().zip(&frac).map(|(p, f)| (1.0 - p) * f).collect();
                        (nom, dev, sel)
                    })
            })
        }

        proptest! {
            #[test]
            fn greedy_matches_enumeration((nom, dev, sel) in row(), gamma in 0usize..10) {
                let g = worst_case_miss(&nom, &dev, &sel, gamma).unwrap();
                prop_assert_eq!(g.value, enumerate(&nom, &dev, &sel, gamma));
                prop_assert!(g.deviated_set.len() <= gamma);
                prop_assert!(g.deviated_set.iter().all(|&j| sel[j]));
            }

            #[test]
            fn monotone_in_gamma((nom, dev, sel) in row(), gamma in 0usize..9) {
                let a = worst_case_miss(&nom, &dev, &sel, gamma).unwrap().value;
                let b = worst_case_miss(&nom, &dev, &sel, gamma + 1).unwrap().value;
                prop_assert!(b >= a);
            }

            #[test]
            fn adding_a_facility_never_raises_the_worst_case((nom, dev, mut sel) in row(), gamma in 0usize..4, pick in any::<prop::sample::Index>()) {
                let j = pick.index(nom.len());
                sel[j] = false;
                let before = worst_case_miss(&nom, &dev, &sel, gamma).unwrap().value;
                sel[j] = true;
                let after = worst_case_miss(&nom, &dev, &sel, gamma).unwrap().value;
                prop_assert!(after <= before);
                if gamma == 0 {
                    prop_assert!(after < before);
                }
            }

            #[test]
            fn dual_value_matches_breakpoint_lp(d in prop::collection::vec(0.0f64..5.0, 0..12), gamma in 0usize..14) {
                let a = dual_value(&d, gamma).unwrap();
                let b = dual_by_breakpoints(&d, gamma);
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
