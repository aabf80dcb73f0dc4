mod common;

use common::{enumerate_worst_case, small_instance};
use proptest::prelude::*;
use rck_core::generator::{generate, GeneratorConfig};
use rck_core::linearization::{boundary_partner, build_family, sample_gap, tangent_objective, TangentCut};
use rck_core::model::{build_rutlcscp_la_rc, parse_lp, write_lp};
use rck_core::oracle::{coverage, dual_value, worst_case_miss};
use rck_core::solver::{solve, SolverOptions};
use rck_core::types::{ln_miss, DEFAULT_BETAS, MIN_MISS_PROB};
use rck_core::{GammaBudget, Instance, RobustConfig, SolveStatus};

fn row(max_len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<bool>)> {
    prop::collection::vec((prop_oneof![Just(1.0), MIN_MISS_PROB..1.0f64], 0.0..1.0f64, any::<bool>()), 1..=max_len).prop_map(
        |entries| {
            let nom: Vec<f64> = entries.iter().map(|e| e.0).collect();
            let dev = entries.iter().map(|e| e.1 * (1.0 - e.0)).collect();
            let sel = entries.iter().map(|e| e.2).collect();
            (nom, dev, sel)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn tangent_cut_invariants(alpha in 0.01..0.99f64, beta in 0.001..0.999f64) {
        let cut = TangentCut::new(alpha, beta).unwrap();
        prop_assert!((cut.beta + cut.gamma - 1.0).abs() < 1e-15);
        prop_assert!(cut.delta > 0.0 && cut.delta < 1.0 - alpha);
        prop_assert!(cut.log_rhs < 0.0);
        let m_star = boundary_partner(alpha, cut.delta);
        let lhs = cut.beta * m_star.ln() + cut.gamma * cut.delta.ln();
        prop_assert!((lhs - cut.log_rhs).abs() < 1e-12);
    }

    #[test]
    fn tangency_is_the_maximum(alpha in 0.05..0.95f64, beta in 0.05..0.95f64, t in 0.001..0.999f64) {
        let cut = TangentCut::new(alpha, beta).unwrap();
        let n = t * (1.0 - alpha);
        prop_assert!(tangent_objective(alpha, beta, n) <= tangent_objective(alpha, beta, cut.delta) * (1.0 + 1e-12));
    }

    #[test]
    fn relaxation_admits_every_exact_point(alpha in 0.5..0.99f64, a in 0.0..1.0f64, b in 0.0..1.0f64) {
        // a point on or inside the exact region: (1 - m)(1 - n) >= α
        let m = a * (1.0 - alpha);
        let n = b * (1.0 - alpha / (1.0 - m));
        prop_assume!(m > 0.0 && n > 0.0);
        let family = build_family(alpha, &DEFAULT_BETAS).unwrap();
        prop_assert!(family.admits(m.ln(), n.ln(), 1e-12));
    }

    #[test]
    fn greedy_matches_enumeration((nom, dev, sel) in row(10), gamma in 0usize..=10) {
        let greedy = worst_case_miss(&nom, &dev, &sel, gamma).unwrap();
        prop_assert_eq!(greedy.value, enumerate_worst_case(&nom, &dev, &sel, gamma));
        prop_assert!(greedy.deviated_set.len() <= gamma);
        prop_assert!(greedy.deviated_set.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn worst_case_non_decreasing_in_gamma((nom, dev, sel) in row(10), gamma in 0usize..10) {
        let a = worst_case_miss(&nom, &dev, &sel, gamma).unwrap().value;
        let b = worst_case_miss(&nom, &dev, &sel, gamma + 1).unwrap().value;
        prop_assert!(b >= a);
    }

    #[test]
    fn strong_duality((nom, dev, sel) in row(12), gamma in 0usize..=12) {
        let dy: Vec<f64> = nom
            .iter()
            .zip(&dev)
            .zip(&sel)
            .map(|((&n, &d), &s)| if s { ln_miss(n + d) - ln_miss(n) } else { 0.0 })
            .collect();
        let nominal: f64 = nom.iter().zip(&sel).filter(|(_, &s)| s).map(|(&n, _)| ln_miss(n)).sum();
        let primal = worst_case_miss(&nom, &dev, &sel, gamma).unwrap().value.ln() - nominal;
        prop_assert!((dual_value(&dy, gamma).unwrap() - primal).abs() < 1e-9);
    }

    #[test]
    fn adding_a_facility_never_lowers_coverage(seed in 0u64..500, gamma in 0u32..4) {
        let inst = small_instance(seed);
        let y: Vec<bool> = (0..inst.n1).map(|j| (seed >> j) & 1 == 1).collect();
        let z = vec![true; inst.n2];
        let budget = GammaBudget::Uniform(gamma);
        let before = coverage(&inst, &y, &z, &budget).unwrap();
        if let Some(j) = y.iter().position(|s| !s) {
            let mut more = y.clone();
            more[j] = true;
            let after = coverage(&inst, &more, &z, &budget).unwrap();
            for (a, b) in after.iter().zip(&before) {
                prop_assert!(*a >= *b - 1e-15);
            }
        }
        let tighter = coverage(&inst, &y, &z, &GammaBudget::Uniform(gamma + 1)).unwrap();
        for (t, b) in tighter.iter().zip(&before) {
            prop_assert!(*t <= *b + 1e-15);
        }
    }

    #[test]
    fn generator_postconditions(seed in any::<u64>(), m in 1usize..12, yr in 1.0..15.0f64) {
        let cfg = GeneratorConfig::new(m, m, m + 2, yr, yr / 2.0, 20.0, 20.0, seed);
        let inst = generate(&cfg).unwrap();
        prop_assert!(inst.validate().is_empty());
        prop_assert_eq!(&generate(&cfg).unwrap(), &inst);
        for (noms, devs) in [(&inst.p_nom, &inst.p_dev), (&inst.q_nom, &inst.q_dev)] {
            for (nr, dr) in noms.iter().zip(devs) {
                for (&n, &d) in nr.iter().zip(dr) {
                    prop_assert!((MIN_MISS_PROB..=1.0).contains(&n));
                    prop_assert!(d >= 0.0 && n + d <= 1.0);
                    prop_assert!(n < 1.0 || d == 0.0);
                }
            }
        }
        prop_assert!(inst.cost_y.iter().chain(&inst.cost_z).all(|c| (0.0..=100.0).contains(c)));
    }

    #[test]
    fn instance_json_round_trip(seed in any::<u64>()) {
        let inst = small_instance(seed);
        prop_assert_eq!(Instance::from_json(&inst.to_json().unwrap()).unwrap(), inst);
    }
}

#[test]
fn monotone_tightening_as_cuts_are_added() {
    let mut betas = Vec::new();
    let mut previous: Option<Vec<bool>> = None;
    for &b in &DEFAULT_BETAS {
        betas.push(b);
        let admitted: Vec<bool> = sample_gap(0.85, &betas, 120).unwrap().iter().map(|s| s.la_feasible).collect();
        if let Some(prev) = &previous {
            assert!(admitted.iter().zip(prev).all(|(now, before)| !now || *before));
        }
        previous = Some(admitted);
    }
}

#[test]
fn robust_counts_follow_formulas() {
    for seed in 0..20 {
        let inst = small_instance(seed);
        let model = build_rutlcscp_la_rc(&inst, &RobustConfig::new(0.85, 1)).unwrap();
        let (m, n1, n2) = (inst.m, inst.n1, inst.n2);
        assert_eq!(model.num_vars(), n1 + n2 + m * n1 + m * n2 + 2 * m);
        assert_eq!(model.num_rows(), m * (2 + DEFAULT_BETAS.len()) + m * n1 + m * n2);
        let counts = model.label_counts();
        assert_eq!(counts["box-y"], m);
        assert_eq!(counts["box-z"], m);
        assert_eq!(counts["tangent"], m * DEFAULT_BETAS.len());
        assert_eq!(counts["dual-y"], m * n1);
        assert_eq!(counts["dual-z"], m * n2);
    }
}

#[test]
fn objective_non_decreasing_in_gamma() {
    for seed in 0..25 {
        let inst = small_instance(seed);
        for alpha in [0.8, 0.85, 0.9] {
            let mut last = f64::NEG_INFINITY;
            for gamma in 0..=inst.n1.max(inst.n2) as u32 {
                let model = build_rutlcscp_la_rc(&inst, &RobustConfig::new(alpha, gamma)).unwrap();
                let sol = solve(&model, &SolverOptions::default()).unwrap();
                assert!(sol.objective >= last - 1e-6, "seed {seed} α={alpha} Γ={gamma}");
                last = sol.objective;
            }
        }
    }
}

#[test]
fn lp_export_round_trip_preserves_optimum() {
    for seed in 0..10 {
        let inst = small_instance(seed);
        let model = build_rutlcscp_la_rc(&inst, &RobustConfig::new(0.8, 1)).unwrap();
        let back = parse_lp(&write_lp(&model)).unwrap();
        assert_eq!(back.num_vars(), model.num_vars());
        assert_eq!(back.num_rows(), model.num_rows());
        let a = solve(&model, &SolverOptions::default()).unwrap();
        let b = solve(&back, &SolverOptions::default()).unwrap();
        assert_eq!(a.status, b.status);
        if a.status == SolveStatus::Optimal {
            assert!((a.objective - b.objective).abs() < 1e-9);
            assert_eq!((a.y, a.z), (b.y, b.z));
        }
    }
}
