use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;

use stablecert::analysis::AnalysisOperator;
use stablecert::certify::{self, CertifyConfig, Classification};
use stablecert::fixtures;
use stablecert::harness::{self, SweepConfig};
use stablecert::solvers::{self, ProblemInstance, SolverConfig};
use stablecert::Result;

#[derive(Parser)]
#[command(name = "stablecert", version, about = "Certify sharpness, uniqueness, and \
stability of group-sparse / total-variation recovery problems")]
struct Cli {
    /// Size of the rayon thread pool (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Diagnose a single instance and print the result as JSON.
    Certify(CertifyArgs),
    /// Run a phase-transition sweep from a JSON config, writing CSV and SVG.
    Sweep(SweepArgs),
    /// Empirically probe recovery stability under shrinking perturbations.
    Probe(ProbeArgs),
    /// Check the built-in reference problems against their known diagnoses.
    Examples,
}

#[derive(Args)]
struct CertifyArgs {
    /// Instance JSON, or an ASCII PGM (P2) image for a total-variation
    /// instance.
    input: PathBuf,
    #[arg(long, default_value_t = certify::DEFAULT_THETA)]
    theta: f64,
    #[arg(long, default_value_t = 1e-8)]
    kkt_tol: f64,
    /// For PGM input: rows of a random Gaussian measurement matrix
    /// (default: identity measurements).
    #[arg(long)]
    phi_rows: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep configuration JSON.
    config: PathBuf,
    /// Output directory for sweep.csv and sweep.svg.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ProbeArgs {
    /// Instance JSON (same schema as `certify`).
    input: PathBuf,
    /// Regularization scaling: mu = c * delta.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Comma-separated perturbation radii.
    #[arg(long, default_value = "1e-1,1e-2,1e-3,1e-4", value_delimiter = ',')]
    deltas: Vec<f64>,
    /// Random perturbation directions per radius.
    #[arg(long, default_value_t = 20)]
    dirs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-8)]
    kkt_tol: f64,
}

fn load_certify_instance(args: &CertifyArgs) -> Result<ProblemInstance> {
    if args.input.extension().is_some_and(|e| e == "pgm") {
        let (n1, n2, img) = harness::load_pgm(&args.input)?;
        let n = n1 * n2;
        let phi = match args.phi_rows {
            Some(m) => harness::gen_gaussian_matrix(m, n, args.seed),
            None => DMatrix::identity(n, n),
        };
        let d = AnalysisOperator::gradient2d(n1, n2);
        let part = d.natural_partition()?;
        ProblemInstance::new(phi, d, part, img)
    } else {
        harness::load_instance(&args.input)
    }
}

fn run_certify(args: &CertifyArgs) -> Result<ExitCode> {
    let inst = load_certify_instance(args)?;
    let cfg = CertifyConfig {
        theta: args.theta,
        solver: SolverConfig {
            kkt_tol: args.kkt_tol,
            ..SolverConfig::default()
        },
        ..CertifyConfig::default()
    };
    let diag = certify::diagnose(&inst, &cfg);
    println!("{}", serde_json::to_string_pretty(&diag).expect("diagnosis serializes"));
    Ok(ExitCode::SUCCESS)
}

fn run_sweep(args: &SweepArgs) -> Result<ExitCode> {
    let text = std::fs::read_to_string(&args.config)?;
    let cfg: SweepConfig = serde_json::from_str(&text)
        .map_err(|e| stablecert::Error::Parse(format!("{e}")))?;
    std::fs::create_dir_all(&args.out)?;
    let csv = args.out.join("sweep.csv");
    let records = harness::run_sweep(&cfg, Some(&csv))?;
    harness::emit_plot(&records, &args.out.join("sweep.svg"))?;
    for rec in &records {
        println!(
            "m={:4}  recovered {:3}/{}  sharp {:3}  strong_nonsharp {:3}  certified_stable {:3}  failed {:3}",
            rec.m, rec.recovered, rec.trials, rec.sharp, rec.strong_nonsharp,
            rec.stable_certified_nonsharp, rec.failed
        );
    }
    println!("wrote {} and sweep.svg", csv.display());
    Ok(ExitCode::SUCCESS)
}

fn run_probe(args: &ProbeArgs) -> Result<ExitCode> {
    let inst = harness::load_instance(&args.input)?;
    let cfg = SolverConfig {
        kkt_tol: args.kkt_tol,
        ..SolverConfig::default()
    };
    let result =
        solvers::stability_probe(&inst, args.c, &args.deltas, args.dirs, args.seed, &cfg)?;
    println!("{:>10}  {:>10}  {:>4}  {:>12}  conv", "delta", "mu", "dir", "ratio");
    for row in &result.rows {
        println!(
            "{:>10.3e}  {:>10.3e}  {:>4}  {:>12.6}  {}",
            row.delta, row.mu, row.direction_id, row.ratio, row.converged
        );
    }
    println!("max ratio over converged solves: {:.6}", result.max_ratio);
    Ok(ExitCode::SUCCESS)
}

fn run_examples() -> Result<ExitCode> {
    let cfg = CertifyConfig::default();
    let cases: Vec<(&str, ProblemInstance, Classification)> = vec![
        (
            "overlap-stable",
            fixtures::stable_nonsharp_fixture(),
            Classification::StrongNonsharpStable,
        ),
        (
            "kernel-aligned-unstable",
            fixtures::unstable_strong_fixture(),
            Classification::StrongNonsharpUncertified,
        ),
        (
            "four-group-mixed-signs",
            fixtures::parametric_four_group_fixture(
                &[1.0, 0.0, 1.0, 0.0, 1.0],
                &[1.0, 0.0, -1.0, 0.0, 1.0],
            ),
            Classification::StrongNonsharpStable,
        ),
        (
            "four-group-same-signs",
            fixtures::parametric_four_group_fixture(
                &[1.0, 0.0, 1.0, 0.0, 1.0],
                &[1.0, 0.0, 1.0, 0.0, 1.0],
            ),
            Classification::Sharp,
        ),
    ];
    let mut all_ok = true;
    for (name, inst, expected) in cases {
        let diag = certify::diagnose(&inst, &cfg);
        let ok = diag.classification == expected && diag.errors.is_empty();
        all_ok &= ok;
        println!(
            "{:<26} expected {:<26} got {:<26} {}",
            name,
            format!("{:?}", expected),
            format!("{:?}", diag.classification),
            if ok { "ok" } else { "MISMATCH" }
        );
    }
    Ok(if all_ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: failed to configure thread pool: {e}");
            return ExitCode::FAILURE;
        }
    }
    let result = match &cli.command {
        Command::Certify(args) => run_certify(args),
        Command::Sweep(args) => run_sweep(args),
        Command::Probe(args) => run_probe(args),
        Command::Examples => run_examples(),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
