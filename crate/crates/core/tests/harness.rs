use std::fs;

use rck_core::generator::GeneratorConfig;
use rck_core::harness::{
    report, run_matrix, summarize, Family, GammaPolicy, GammaSpec, MatrixOptions, ReportFormat, RunRecord, SuiteSummary,
    CellSummary,
};
use rck_core::{Classification, SolveStatus};

fn custom(name: &str, m: usize) -> Family {
    Family::Custom { name: name.into(), config: GeneratorConfig::new(m, m, m, 6.0, 4.0, 10.0, 10.0, 0) }
}

fn options(workers: usize) -> MatrixOptions {
    MatrixOptions { workers, ..MatrixOptions::default() }
}

fn small_matrix(workers: usize) -> Vec<RunRecord> {
    let families = [custom("S6", 6), custom("S5", 5)];
    run_matrix(&families, &[0.9, 0.8], &GammaPolicy::List(vec![GammaSpec::All, GammaSpec::Value(0), GammaSpec::Value(1)]), 3, 11, &options(workers))
        .unwrap()
}

#[test]
fn one_record_per_combination_in_key_order() {
    let records = small_matrix(2);
    assert_eq!(records.len(), 2 * 2 * 3 * 3);
    let family_rank = |f: &str| if f == "S6" { 0 } else { 1 };
    let keys: Vec<_> = records.iter().map(|r| (family_rank(&r.family), r.alpha.to_bits(), r.gamma, r.replicate)).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert_eq!(records[0].instance, "S6.1");
    assert_eq!(records[0].alpha, 0.8);
}

#[test]
fn records_are_consistent() {
    for r in small_matrix(1) {
        match r.classification {
            Classification::NoSolution => assert_eq!(r.status, SolveStatus::Infeasible),
            Classification::Optimal => assert!(r.violated == 0 && r.phi == 0.0),
            Classification::UnderApproximate => assert!(r.violated > 0 && r.phi > 0.0),
            other => panic!("unexpected {other:?} without limits"),
        }
        assert!(r.wall_time_s >= 0.0);
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let a = small_matrix(1);
    let b = small_matrix(3);
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!((&x.instance, x.gamma, x.classification), (&y.instance, y.gamma, y.classification));
        assert_eq!(x.objective.to_bits(), y.objective.to_bits());
        assert_eq!(x.phi.to_bits(), y.phi.to_bits());
    }
}

#[test]
fn shares_account_for_every_record() {
    let records = small_matrix(0);
    let s = summarize(&records).unwrap();
    let total = s.optimal.pct + s.under_approximate.pct + s.no_solution.pct + s.aborted.pct;
    assert!((total - 100.0).abs() < 0.01);
    assert_eq!(s.optimal.count + s.under_approximate.count + s.no_solution.count + s.aborted.count, records.len());
    for c in &s.cells {
        let t = c.optimal_share_pct + c.under_approximate_share_pct + c.no_solution_share_pct + c.aborted_share_pct;
        assert!((t - 100.0).abs() < 0.01);
        assert_eq!(c.runs, 9);
    }
}

#[test]
fn degenerate_family_is_all_optimal() {
    let mut config = GeneratorConfig::new(1, 1, 1, 1.0, 1.0, 1.0, 1.0, 0);
    config.cover_prob_range = [0.99, 1.0];
    config.dev_range = [0.0, 0.01];
    let family = Family::Custom { name: "D".into(), config };
    let records = run_matrix(&[family], &[0.8, 0.85, 0.9], &GammaPolicy::Sweep, 4, 0, &options(1)).unwrap();
    assert_eq!(records.len(), 3 * 2 * 4);
    assert!(records.iter().all(|r| r.classification == Classification::Optimal && r.phi == 0.0));
    let s = summarize(&records).unwrap();
    assert!(s.cells.iter().all(|c| c.opt_pct == 100.0 && c.cv_pct == 0.0));
}

#[test]
fn paper_family_counts() {
    let family: Family = "P1".parse().unwrap();
    let records = run_matrix(&[family], &[0.8], &GammaPolicy::List(vec![GammaSpec::Value(0)]), 2, 42, &options(0)).unwrap();
    assert_eq!(records.iter().map(|r| r.instance.as_str()).collect::<Vec<_>>(), ["P1.1", "P1.2"]);
    assert!(records.iter().all(|r| r.m == 20));
    assert_eq!(GammaPolicy::Sweep.gammas(20).len(), 21);
}

#[test]
fn bad_inputs_are_rejected() {
    assert!("P11".parse::<Family>().is_err());
    assert!(run_matrix(&[custom("S", 3)], &[1.0], &GammaPolicy::Sweep, 1, 0, &options(1)).is_err());
    assert!(run_matrix(&[], &[0.8], &GammaPolicy::Sweep, 1, 0, &options(1)).is_err());
    assert!("tsv".parse::<ReportFormat>().is_err());
}

#[test]
fn reports_agree_across_formats() {
    let records = small_matrix(0);
    let summary = summarize(&records).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nested");
    let written = report(&summary, &records, &[ReportFormat::Csv, ReportFormat::Json, ReportFormat::Markdown], &out).unwrap();
    assert_eq!(written.len(), 6);

    let json: Vec<RunRecord> = serde_json::from_str(&fs::read_to_string(out.join("records.json")).unwrap()).unwrap();
    let mut reader = csv::Reader::from_path(out.join("records.csv")).unwrap();
    let from_csv: Vec<RunRecord> = reader.deserialize().map(Result::unwrap).collect();
    assert_eq!(json.len(), records.len());
    for ((a, b), r) in json.iter().zip(&from_csv).zip(&records) {
        assert_eq!(a.instance, r.instance);
        assert_eq!((a.gamma, a.classification, a.violated), (b.gamma, b.classification, b.violated));
        if r.objective.is_finite() {
            assert_eq!(a.objective, r.objective);
            assert_eq!(b.objective, r.objective);
        } else {
            assert!(a.objective.is_infinite() && b.objective.is_infinite());
        }
    }

    let summary_json: SuiteSummary = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let mut reader = csv::Reader::from_path(out.join("summary.csv")).unwrap();
    let cells: Vec<CellSummary> = reader.deserialize().map(Result::unwrap).collect();
    assert_eq!(summary_json.cells, cells);

    let table3 = fs::read_to_string(out.join("table3.md")).unwrap();
    let under = records.iter().filter(|r| r.classification == Classification::UnderApproximate).count();
    assert_eq!(table3.lines().count(), 2 + under);
    assert!(fs::read_to_string(out.join("table2.md")).unwrap().contains("| S6 | 0.8 | 9 |"));
}

#[test]
fn unwritable_directory_is_an_error() {
    let records = small_matrix(0);
    let summary = summarize(&records).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain");
    fs::write(&file, "x").unwrap();
    assert!(report(&summary, &records, &[ReportFormat::Json], &file.join("sub")).is_err());
}
