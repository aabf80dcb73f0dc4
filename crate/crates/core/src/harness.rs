//! Experiment matrix: instance suites swept over α and Γ, solved, verified
//! against the exact robust constraints, classified and summarized.
//!
//! Records come back sorted by (family, α, Γ, replicate) no matter how many
//! workers ran them, so reports are reproducible byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::{generate, generate_suite, GeneratorConfig, NamedInstance};
use crate::model::{build_rutlcscp_la_rc_with, DualMode};
use crate::oracle::verify;
use crate::solver::{solve_detailed, SolverOptions};
use crate::types::{Classification, RobustConfig, SolveStatus};

/// Environment variable capping the time of each solve, in seconds.
pub const TIME_LIMIT_ENV: &str = "RCK_TIME_LIMIT_S";

/// α values of the published experiment.
pub const PAPER_ALPHAS: [f64; 3] = [0.8, 0.85, 0.9];

/// A family of generated instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Family {
    /// A Table I row, `P1`..`P10`.
    Table1(String),
    /// Any generator configuration; its seed is replaced per replicate.
    Custom { name: String, config: GeneratorConfig },
}

impl Family {
    pub fn name(&self) -> &str {
        match self {
            Family::Table1(row) => row,
            Family::Custom { name, .. } => name,
        }
    }

    /// Replicate `r` (0-based) uses seed `base_seed + r`.
    pub fn suite(&self, replicates: usize, base_seed: u64) -> Result<Vec<NamedInstance>> {
        match self {
            Family::Table1(row) => generate_suite(row, replicates, base_seed),
            Family::Custom { name, config } => (0..replicates)
                .map(|r| {
                    let cfg = GeneratorConfig { seed: base_seed.wrapping_add(r as u64), ..config.clone() };
                    Ok(NamedInstance {
                        id: format!("{name}.{}", r + 1),
                        family: name.clone(),
                        replicate: r + 1,
                        instance: generate(&cfg)?,
                    })
                })
                .collect(),
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GeneratorConfig::table1(s, 0)?;
        Ok(Family::Table1(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GammaSpec {
    Value(u32),
    /// Γ = m, every site may deviate.
    All,
}

impl GammaSpec {
    pub fn resolve(self, m: usize) -> u32 {
        match self {
            GammaSpec::Value(g) => g,
            GammaSpec::All => m as u32,
        }
    }
}

impl FromStr for GammaSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "all" => Ok(GammaSpec::All),
            t => t.parse().map(GammaSpec::Value).map_err(|_| Error::Config(format!("bad Γ value `{t}`"))),
        }
    }
}

/// Which Γ values each instance is solved for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GammaPolicy {
    /// Every Γ in `0..=m`.
    Sweep,
    List(Vec<GammaSpec>),
}

impl GammaPolicy {
    /// Γ values for an instance with `m` demand nodes, duplicates removed.
    pub fn gammas(&self, m: usize) -> Vec<u32> {
        let mut out: Vec<u32> = match self {
            GammaPolicy::Sweep => (0..=m as u32).collect(),
            GammaPolicy::List(specs) => specs.iter().map(|g| g.resolve(m)).collect(),
        };
        out.sort_unstable();
        out.dedup();
        out
    }
}

impl FromStr for GammaPolicy {
    type Err = Error;

    /// `sweep`, or a comma list such as `0,1,2,all`.
    fn from_str(s: &str) -> Result<Self> {
        if s.trim() == "sweep" {
            return Ok(GammaPolicy::Sweep);
        }
        let specs = s.split(',').map(str::parse).collect::<Result<Vec<_>>>()?;
        if specs.is_empty() {
            return Err(Error::Config("empty Γ list".into()));
        }
        Ok(GammaPolicy::List(specs))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixOptions {
    pub solver: SolverOptions,
    /// Worker threads; 0 lets the pool pick.
    pub workers: usize,
    pub dual_mode: DualMode,
}

impl Default for MatrixOptions {
    fn default() -> Self {
        MatrixOptions { solver: SolverOptions::default(), workers: 0, dual_mode: DualMode::LogDeviation }
    }
}

impl MatrixOptions {
    /// Applies `RCK_TIME_LIMIT_S` when set, keeping the tighter of the two
    /// limits.
    pub fn with_env_time_limit(mut self) -> Result<Self> {
        if let Some(t) = env_time_limit()? {
            self.solver.time_limit_s = Some(self.solver.time_limit_s.map_or(t, |cur| cur.min(t)));
        }
        Ok(self)
    }
}

/// Per-solve time cap from the environment.
pub fn env_time_limit() -> Result<Option<f64>> {
    match std::env::var(TIME_LIMIT_ENV) {
        Ok(v) => match v.trim().parse::<f64>() {
            Ok(t) if t >= 0.0 => Ok(Some(t)),
            _ => Err(Error::Config(format!("{TIME_LIMIT_ENV} must be a non-negative number, got `{v}`"))),
        },
        Err(_) => Ok(None),
    }
}

/// Outcome of one (instance, α, Γ) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub family: String,
    pub instance: String,
    pub replicate: usize,
    pub alpha: f64,
    pub gamma: u32,
    pub status: SolveStatus,
    /// Empty when there is no incumbent.
    #[serde(with = "crate::types::finite_or_null")]
    pub objective: f64,
    pub wall_time_s: f64,
    /// Total exact-constraint violation; zero unless under-approximate.
    pub phi: f64,
    pub violated: usize,
    pub m: usize,
    pub classification: Classification,
    pub nodes: usize,
}

impl RunRecord {
    /// Stopped by a time, node or gap limit.
    pub fn aborted(&self) -> bool {
        !matches!(self.status, SolveStatus::Optimal | SolveStatus::Infeasible)
    }
}

struct Job<'a> {
    family: usize,
    inst: &'a NamedInstance,
    alpha: f64,
    gamma: u32,
}

fn run_job(job: &Job<'_>, options: &MatrixOptions) -> Result<RunRecord> {
    let inst = &job.inst.instance;
    let config = RobustConfig::new(job.alpha, job.gamma);
    let model = build_rutlcscp_la_rc_with(inst, &config, options.dual_mode)?;
    let out = solve_detailed(&model, &options.solver)?;
    let sol = out.solution;
    let report = verify(inst, &sol, &config)?;
    log::debug!("{} α={} Γ={}: {} {}", job.inst.id, job.alpha, job.gamma, sol.status, report.classification);
    Ok(RunRecord {
        family: job.inst.family.clone(),
        instance: job.inst.id.clone(),
        replicate: job.inst.replicate,
        alpha: job.alpha,
        gamma: job.gamma,
        status: sol.status,
        objective: sol.objective,
        wall_time_s: sol.wall_time_s,
        phi: if report.violated > 0 { report.phi } else { 0.0 },
        violated: report.violated,
        m: inst.m,
        classification: report.classification,
        nodes: out.stats.nodes,
    })
}

/// Solves every (instance, α, Γ) combination. Replicate `r` of each family
/// uses seed `base_seed + r`.
pub fn run_matrix(
    families: &[Family],
    alphas: &[f64],
    gammas: &GammaPolicy,
    replicates: usize,
    base_seed: u64,
    options: &MatrixOptions,
) -> Result<Vec<RunRecord>> {
    if families.is_empty() || alphas.is_empty() || replicates == 0 {
        return Err(Error::Config("empty experiment matrix".into()));
    }
    if let Some(a) = alphas.iter().find(|a| !(0.0..1.0).contains(*a)) {
        return Err(Error::Config(format!("α = {a} outside [0, 1)")));
    }
    options.solver.validate()?;
    let suites = families.iter().map(|f| f.suite(replicates, base_seed)).collect::<Result<Vec<_>>>()?;
    let mut jobs = Vec::new();
    for (fi, suite) in suites.iter().enumerate() {
        for &alpha in alphas {
            let Some(first) = suite.first() else { continue };
            for gamma in gammas.gammas(first.instance.m) {
                for inst in suite {
                    jobs.push(Job { family: fi, inst, alpha, gamma });
                }
            }
        }
    }
    log::info!("running {} solves", jobs.len());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let mut keyed: Vec<(usize, RunRecord)> =
        pool.install(|| jobs.par_iter().map(|j| Ok((j.family, run_job(j, options)?))).collect::<Result<Vec<_>>>())?;
    keyed.sort_by(|(fa, a), (fb, b)| {
        fa.cmp(fb).then(a.alpha.total_cmp(&b.alpha)).then(a.gamma.cmp(&b.gamma)).then(a.replicate.cmp(&b.replicate))
    });
    Ok(keyed.into_iter().map(|(_, r)| r).collect())
}

/// Statistics of one (family, α) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub family: String,
    pub alpha: f64,
    pub runs: usize,
    /// Share of the runs with a solution whose solution is exact-optimal
    /// ("Opt." column). Runs without a solution enter `feasibility_pct`.
    pub opt_pct: f64,
    /// Arithmetic mean of solve times.
    pub mean_time_s: f64,
    /// Violated exact constraints over all exact constraints, among the
    /// under-approximate runs.
    pub cv_pct: f64,
    /// Share of runs whose relaxation has a solution.
    pub feasibility_pct: f64,
    pub optimal: usize,
    pub under_approximate: usize,
    pub no_solution: usize,
    pub aborted: usize,
    /// Split of all runs of the cell; the four shares add up to 100.
    pub optimal_share_pct: f64,
    pub under_approximate_share_pct: f64,
    pub no_solution_share_pct: f64,
    pub aborted_share_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Share {
    pub count: usize,
    pub pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub cells: Vec<CellSummary>,
    pub runs: usize,
    pub optimal: Share,
    pub under_approximate: Share,
    pub no_solution: Share,
    /// Runs stopped by a limit; zero when every solve finished.
    pub aborted: Share,
    pub mean_time_s: f64,
}

fn pct(count: usize, total: usize) -> f64 {
    100.0 * count as f64 / total as f64
}

fn share(count: usize, total: usize) -> Share {
    Share { count, pct: pct(count, total) }
}

/// Class counted in the global split: limit runs are aborted whatever their
/// incumbent looks like.
fn bucket(r: &RunRecord) -> Classification {
    if r.aborted() {
        Classification::Aborted
    } else {
        r.classification
    }
}

pub fn summarize(records: &[RunRecord]) -> Result<SuiteSummary> {
    if records.is_empty() {
        return Err(Error::Config("no records to summarize".into()));
    }
    let mut family_order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<(usize, u64), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        let fi = match family_order.iter().position(|f| *f == r.family) {
            Some(i) => i,
            None => {
                family_order.push(&r.family);
                family_order.len() - 1
            }
        };
        groups.entry((fi, r.alpha.to_bits())).or_default().push(r);
    }
    let mut cells: Vec<CellSummary> = groups
        .into_values()
        .map(|rs| {
            let n = rs.len();
            let count = |c: Classification| rs.iter().filter(|r| bucket(r) == c).count();
            let under: Vec<&&RunRecord> = rs.iter().filter(|r| bucket(r) == Classification::UnderApproximate).collect();
            let violated: usize = under.iter().map(|r| r.violated).sum();
            let constraints: usize = under.iter().map(|r| r.m).sum();
            let no_solution = count(Classification::NoSolution);
            let optimal = count(Classification::Optimal);
            let aborted = count(Classification::Aborted);
            CellSummary {
                family: rs[0].family.clone(),
                alpha: rs[0].alpha,
                runs: n,
                opt_pct: if n == no_solution { 0.0 } else { pct(optimal, n - no_solution) },
                mean_time_s: rs.iter().map(|r| r.wall_time_s).sum::<f64>() / n as f64,
                cv_pct: if constraints == 0 { 0.0 } else { pct(violated, constraints) },
                feasibility_pct: pct(n - no_solution, n),
                optimal,
                under_approximate: under.len(),
                no_solution,
                aborted,
                optimal_share_pct: pct(optimal, n),
                under_approximate_share_pct: pct(under.len(), n),
                no_solution_share_pct: pct(no_solution, n),
                aborted_share_pct: pct(aborted, n),
            }
        })
        .collect();
    cells.sort_by(|a, b| {
        let fa = family_order.iter().position(|f| *f == a.family);
        let fb = family_order.iter().position(|f| *f == b.family);
        fa.cmp(&fb).then(a.alpha.total_cmp(&b.alpha))
    });
    let n = records.len();
    let count = |c: Classification| records.iter().filter(|r| bucket(r) == c).count();
    Ok(SuiteSummary {
        cells,
        runs: n,
        optimal: share(count(Classification::Optimal), n),
        under_approximate: share(count(Classification::UnderApproximate), n),
        no_solution: share(count(Classification::NoSolution), n),
        aborted: share(records.iter().filter(|r| r.aborted()).count(), n),
        mean_time_s: records.iter().map(|r| r.wall_time_s).sum::<f64>() / n as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    /// `records.csv` and `summary.csv`.
    Csv,
    /// `records.json` and `summary.json`.
    Json,
    /// `table2.md` (per-cell summary) and `table3.md` (violations).
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" | "markdown-table" => Ok(ReportFormat::Markdown),
            other => Err(Error::Config(format!("unknown report format `{other}`"))),
        }
    }
}

fn csv_string<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Config(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Config(format!("csv: {e}")))
}

/// Per-cell table with the global split underneath.
pub fn table2_markdown(summary: &SuiteSummary) -> String {
    let mut s = String::new();
    s.push_str("| Family | α | Runs | Opt. (%) | Time (s) | CV (%) | Degree of feasibility (%) |\n");
    s.push_str("|---|---|---|---|---|---|---|\n");
    for c in &summary.cells {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {:.2} | {:.3} | {:.2} | {:.2} |",
            c.family, c.alpha, c.runs, c.opt_pct, c.mean_time_s, c.cv_pct, c.feasibility_pct
        );
    }
    let _ = write!(
        s,
        "\n{} runs: {:.2}% ({}) optimal, {:.2}% ({}) under-approximate, {:.2}% ({}) no solution",
        summary.runs,
        summary.optimal.pct,
        summary.optimal.count,
        summary.under_approximate.pct,
        summary.under_approximate.count,
        summary.no_solution.pct,
        summary.no_solution.count,
    );
    if summary.aborted.count > 0 {
        let _ = write!(s, ", {:.2}% ({}) stopped by a limit", summary.aborted.pct, summary.aborted.count);
    }
    s.push_str(".\n");
    s
}

/// Under-approximate runs only; header alone when there are none.
pub fn table3_markdown(records: &[RunRecord]) -> String {
    let mut s = String::from("| Instance | α | Γ | Obj. | φ | # |\n|---|---|---|---|---|---|\n");
    for r in records.iter().filter(|r| bucket(r) == Classification::UnderApproximate) {
        let _ = writeln!(s, "| {} | {} | {} | {:.2} | {:.2E} | {}/{} |", r.instance, r.alpha, r.gamma, r.objective, r.phi, r.violated, r.m);
    }
    s
}

/// Writes the requested report files into `dir` (created if missing) and
/// returns their paths.
pub fn report(summary: &SuiteSummary, records: &[RunRecord], formats: &[ReportFormat], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<(&str, String)> = Vec::new();
    for f in formats {
        match f {
            ReportFormat::Csv => {
                files.push(("records.csv", csv_string(records)?));
                files.push(("summary.csv", csv_string(&summary.cells)?));
            }
            ReportFormat::Json => {
                files.push(("records.json", serde_json::to_string_pretty(records)?));
                files.push(("summary.json", serde_json::to_string_pretty(summary)?));
            }
            ReportFormat::Markdown => {
                files.push(("table2.md", table2_markdown(summary)));
                files.push(("table3.md", table3_markdown(records)));
            }
        }
    }
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(family: &str, alpha: f64, gamma: u32, class: Classification, violated: usize) -> RunRecord {
        RunRecord {
            family: family.into(),
            instance: format!("{family}.1"),
            replicate: 1,
            alpha,
            gamma,
            status: if class == Classification::NoSolution { SolveStatus::Infeasible } else { SolveStatus::Optimal },
            objective: if class == Classification::NoSolution { f64::INFINITY } else { 100.0 },
            wall_time_s: 0.5,
            phi: if violated > 0 { 1e-4 } else { 0.0 },
            violated,
            m: 20,
            classification: class,
            nodes: 0,
        }
    }

    #[test]
    fn gamma_policy_parsing() {
        let p: GammaPolicy = "0,1,2,all".parse().unwrap();
        assert_eq!(p.gammas(20), vec![0, 1, 2, 20]);
        assert_eq!("sweep".parse::<GammaPolicy>().unwrap().gammas(3), vec![0, 1, 2, 3]);
        assert!("0,x".parse::<GammaPolicy>().is_err());
    }

    #[test]
    fn all_optimal_summary() {
        let rs: Vec<_> = (0..4).map(|g| rec("P1", 0.8, g, Classification::Optimal, 0)).collect();
        let s = summarize(&rs).unwrap();
        assert_eq!(s.cells.len(), 1);
        assert_eq!((s.cells[0].opt_pct, s.cells[0].cv_pct), (100.0, 0.0));
        assert_eq!(s.optimal.pct, 100.0);
    }

    #[test]
    fn cv_of_one_violation_in_twenty() {
        let s = summarize(&[rec("P1", 0.9, 1, Classification::UnderApproximate, 1)]).unwrap();
        assert!((s.cells[0].cv_pct - 5.0).abs() < 1e-12);
        assert_eq!(format!("{:.2}", s.cells[0].cv_pct), "5.00");
    }

    #[test]
    fn shares_add_up() {
        let rs = vec![
            rec("P1", 0.8, 0, Classification::Optimal, 0),
            rec("P1", 0.8, 1, Classification::UnderApproximate, 2),
            rec("P1", 0.9, 1, Classification::NoSolution, 0),
        ];
        let s = summarize(&rs).unwrap();
        let total = s.optimal.pct + s.under_approximate.pct + s.no_solution.pct;
        assert!((total - 100.0).abs() < 0.01);
        assert_eq!(s.cells.len(), 2);
        assert!((s.cells[1].feasibility_pct - 0.0).abs() < 1e-12);
        assert_eq!(s.cells[0].opt_pct, 50.0);
        for c in &s.cells {
            let t = c.optimal_share_pct + c.under_approximate_share_pct + c.no_solution_share_pct + c.aborted_share_pct;
            assert!((t - 100.0).abs() < 0.01);
        }
    }

    #[test]
    fn opt_pct_counts_runs_with_a_solution() {
        let rs = vec![
            rec("P1", 0.9, 0, Classification::Optimal, 0),
            rec("P1", 0.9, 1, Classification::NoSolution, 0),
            rec("P1", 0.9, 2, Classification::NoSolution, 0),
        ];
        let c = &summarize(&rs).unwrap().cells[0];
        assert_eq!(c.opt_pct, 100.0);
        assert!((c.feasibility_pct - 100.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn empty_records_rejected() {
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn table3_header_only_without_violations() {
        let t = table3_markdown(&[rec("P1", 0.8, 0, Classification::Optimal, 0)]);
        assert_eq!(t.lines().count(), 2);
        assert!(t.starts_with("| Instance | α | Γ | Obj. | φ | # |"));
        let t = table3_markdown(&[rec("P1", 0.9, 2, Classification::UnderApproximate, 1)]);
        assert!(t.contains("| P1.1 | 0.9 | 2 | 100.00 | 1.00E-4 | 1/20 |"));
    }
}
