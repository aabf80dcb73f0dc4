use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rck_core::generator::generate_suite;
use rck_core::harness::{
    report, run_matrix, summarize, table2_markdown, Family, GammaPolicy, GammaSpec, MatrixOptions, ReportFormat,
    PAPER_ALPHAS,
};
use rck_core::linearization::{build_family, sample_gap};
use rck_core::model::{
    build_gutlcscp_la, build_rutlcscp_la_rc_with, build_tlcscp, parse_lp, write_lp, DualMode, StandardFormModel,
};
use rck_core::oracle::verify;
use rck_core::solver::{solve_detailed, Branching, SolverOptions};
use rck_core::types::DEFAULT_BETAS;
use rck_core::{Instance, RobustConfig, Solution};

/// Robust two-level cooperative set covering: generate, model, solve, verify.
#[derive(Parser)]
#[command(name = "rck", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded instance suite from a Table I row.
    Gen(GenArgs),
    /// Tangent cuts for one α, or the relaxation gap grid as CSV.
    Cuts(CutsArgs),
    /// Build a MILP and print its size; optionally dump it in LP format.
    Model(ModelArgs),
    /// Solve an LP-format model, or build and solve one from an instance.
    Solve(SolveArgs),
    /// Check a solution against the exact robust coverage constraints.
    Verify(VerifyArgs),
    /// Run the experiment matrix and write reports.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Table I row, P1..P10.
    #[arg(long)]
    row: String,
    #[arg(long, default_value_t = 5)]
    replicates: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output directory; receives `<row>.<r>.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CutsArgs {
    #[arg(long, default_value_t = 0.9)]
    alpha: f64,
    /// Comma-separated β values; defaults to the 17-value family.
    #[arg(long, value_delimiter = ',')]
    betas: Option<Vec<f64>>,
    /// Write the cut family as JSON here instead of stdout.
    #[arg(long)]
    dump: Option<PathBuf>,
    /// Emit the sample grid (points per axis) as CSV instead of the cuts.
    #[arg(long)]
    gap_grid: Option<usize>,
    /// Destination of the CSV grid; stdout when omitted.
    #[arg(long, requires = "gap_grid")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    /// Deterministic cover.
    Tlcscp,
    /// Nominal tangent relaxation.
    GutlcscpLa,
    /// Robust counterpart of the tangent relaxation.
    RutlcscpLaRc,
}

#[derive(Args)]
struct BuildArgs {
    /// Instance JSON.
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum, default_value = "rutlcscp-la-rc")]
    variant: VariantArg,
    #[arg(long, default_value_t = 0.9)]
    alpha: f64,
    /// Budget Γ: a number or `all`.
    #[arg(long, default_value = "0")]
    gamma: String,
    #[arg(long, value_delimiter = ',')]
    betas: Option<Vec<f64>>,
    /// Dual coefficient ln(p̄+p̂) − ln(p̂) instead of ln(p̄+p̂) − ln(p̄).
    #[arg(long)]
    paper_literal_dual: bool,
}

#[derive(Args)]
struct ModelArgs {
    #[command(flatten)]
    build: BuildArgs,
    #[arg(long)]
    dump_lp: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BranchingArg {
    MostFractional,
    Reliability,
}

#[derive(Args)]
struct SolverArgs {
    /// Seconds per solve.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    node_limit: Option<usize>,
    #[arg(long, value_enum, default_value = "most-fractional")]
    branching: BranchingArg,
    /// Disable root cutting planes.
    #[arg(long)]
    no_cuts: bool,
}

impl SolverArgs {
    fn options(&self) -> SolverOptions {
        let branching = match self.branching {
            BranchingArg::MostFractional => Branching::MostFractional,
            BranchingArg::Reliability => Branching::Reliability,
        };
        let mut o = SolverOptions::default().with_branching(branching).with_cuts(!self.no_cuts).with_time_limit(self.time_limit);
        o.node_limit = self.node_limit;
        o
    }
}

#[derive(Args)]
struct SolveArgs {
    /// LP-format model.
    #[arg(long, conflicts_with = "instance")]
    model: Option<PathBuf>,
    /// Instance JSON; the model is built with the options below.
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "rutlcscp-la-rc")]
    variant: VariantArg,
    #[arg(long, default_value_t = 0.9)]
    alpha: f64,
    #[arg(long, default_value = "0")]
    gamma: String,
    #[arg(long)]
    paper_literal_dual: bool,
    #[command(flatten)]
    solver: SolverArgs,
    /// Solution JSON; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    solution: PathBuf,
    #[arg(long)]
    alpha: f64,
    /// Budget Γ: a number or `all`.
    #[arg(long)]
    gamma: String,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "P1,P2,P3")]
    families: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "0.8,0.85,0.9")]
    alphas: Vec<f64>,
    /// `sweep` for 0..=m, or a list such as `0,1,2,all`.
    #[arg(long, default_value = "0,1,2,all")]
    gammas: String,
    #[arg(long, default_value_t = 3)]
    replicates: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Full matrix: P1..P10, every Γ, 5 replicates, all three α.
    #[arg(long)]
    full: bool,
    #[arg(long, value_delimiter = ',', default_value = "csv,json,markdown")]
    formats: Vec<String>,
    #[arg(long)]
    paper_literal_dual: bool,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

fn dual_mode(literal: bool) -> DualMode {
    if literal {
        DualMode::PaperLiteral
    } else {
        DualMode::LogDeviation
    }
}

fn robust_config(inst: &Instance, alpha: f64, gamma: &str, betas: Option<&[f64]>) -> Result<RobustConfig> {
    let g: GammaSpec = gamma.parse()?;
    let mut config = RobustConfig::new(alpha, g.resolve(inst.m));
    if let Some(b) = betas {
        config = config.with_betas(b.to_vec());
    }
    config.validate(inst.m)?;
    Ok(config)
}

fn build(inst: &Instance, variant: VariantArg, config: &RobustConfig, literal: bool) -> Result<StandardFormModel> {
    Ok(match variant {
        VariantArg::Tlcscp => build_tlcscp(inst)?,
        VariantArg::GutlcscpLa => build_gutlcscp_la(inst, config.alpha, &config.beta_list)?,
        VariantArg::RutlcscpLaRc => build_rutlcscp_la_rc_with(inst, config, dual_mode(literal))?,
    })
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                stdout.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}

fn gen(args: GenArgs) -> Result<()> {
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    for named in generate_suite(&args.row, args.replicates, args.seed)? {
        let path = args.out.join(format!("{}.json", named.id));
        named.instance.write(&path)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn cuts(args: CutsArgs) -> Result<()> {
    let betas = args.betas.unwrap_or_else(|| DEFAULT_BETAS.to_vec());
    if let Some(grid) = args.gap_grid {
        let mut csv = String::from("m,n,exact_feasible,la_feasible\n");
        for s in sample_gap(args.alpha, &betas, grid)? {
            csv.push_str(&format!("{},{},{},{}\n", s.m, s.n, s.exact_feasible, s.la_feasible));
        }
        return emit(&csv, args.out.as_deref());
    }
    let family = build_family(args.alpha, &betas)?;
    emit(&serde_json::to_string_pretty(&family)?, args.dump.as_deref())
}

fn model(args: ModelArgs) -> Result<()> {
    let b = &args.build;
    let inst = Instance::read(&b.instance)?;
    let config = robust_config(&inst, b.alpha, &b.gamma, b.betas.as_deref())?;
    let model = build(&inst, b.variant, &config, b.paper_literal_dual)?;
    if let Some(path) = &args.dump_lp {
        fs::write(path, write_lp(&model)).with_context(|| format!("writing {}", path.display()))?;
    }
    let summary = serde_json::json!({
        "variables": model.num_vars(),
        "rows": model.num_rows(),
        "rows_by_label": model.label_counts(),
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn solve(args: SolveArgs) -> Result<()> {
    let model = match (&args.model, &args.instance) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            parse_lp(&text)?
        }
        (None, Some(path)) => {
            let inst = Instance::read(path)?;
            let config = robust_config(&inst, args.alpha, &args.gamma, None)?;
            build(&inst, args.variant, &config, args.paper_literal_dual)?
        }
        (None, None) => bail!("pass --model or --instance"),
    };
    let out = solve_detailed(&model, &args.solver.options())?;
    log::info!("{:?}", out.stats);
    emit(&out.solution.to_json()?, args.out.as_deref())
}

fn verify_cmd(args: VerifyArgs) -> Result<()> {
    let inst = Instance::read(&args.instance)?;
    let solution = Solution::read(&args.solution)?;
    let config = robust_config(&inst, args.alpha, &args.gamma, None)?;
    let report = verify(&inst, &solution, &config)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let (families, alphas, gammas, replicates) = if args.full {
        let families = (1..=10).map(|r| format!("P{r}")).collect();
        (families, PAPER_ALPHAS.to_vec(), GammaPolicy::Sweep, 5)
    } else {
        (args.families.clone(), args.alphas.clone(), args.gammas.parse()?, args.replicates)
    };
    let families = families.iter().map(|f| f.parse()).collect::<Result<Vec<Family>, _>>()?;
    let formats = args.formats.iter().map(|f| f.parse()).collect::<Result<Vec<ReportFormat>, _>>()?;
    let options = MatrixOptions {
        solver: args.solver.options(),
        workers: args.workers,
        dual_mode: dual_mode(args.paper_literal_dual),
    }
    .with_env_time_limit()?;
    let records = run_matrix(&families, &alphas, &gammas, replicates, args.seed, &options)?;
    let summary = summarize(&records)?;
    for path in report(&summary, &records, &formats, &args.out)? {
        eprintln!("wrote {}", path.display());
    }
    print!("{}", table2_markdown(&summary));
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Gen(a) => gen(a),
        Command::Cuts(a) => cuts(a),
        Command::Model(a) => model(a),
        Command::Solve(a) => solve(a),
        Command::Verify(a) => verify_cmd(a),
        Command::Bench(a) => bench(a),
    }
}
