use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hpvem::adaptivity::{EstimatorKind, Mode, Threshold};
use hpvem::primal::StabVariant;
use hpvem::problem::CaseId;
use hpvem_cli::{run, tables, MeshKind, RunConfig, THREADS_ENV};

#[derive(Parser)]
#[command(name = "hpvem", about = "hp-adaptive virtual elements with a posteriori error estimators")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, env = THREADS_ENV, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve, estimate and (optionally) refine; writes results.csv, results.json, plot.svg.
    Run {
        #[arg(long, value_parser = ["tc1", "tc2", "tc3", "smooth"])]
        case: String,
        #[arg(long, default_value = "cartesian", value_parser = ["cartesian", "triangular", "nonconvex"])]
        mesh: String,
        /// Starting mesh level (default: the coarse mesh of the case).
        #[arg(long)]
        level: Option<u32>,
        #[arg(long, default_value_t = 1)]
        p: usize,
        #[arg(long, default_value = "uniform", value_parser = ["uniform", "adapt-h", "adapt-hp", "p-sweep"])]
        mode: String,
        #[arg(long, default_value = "eq", value_parser = ["eq", "res", "flux"])]
        estimator: String,
        #[arg(long, default_value = "drecipe", value_parser = ["theoretical", "drecipe", "drecipe-h2"])]
        stab: String,
        /// Number of solves.
        #[arg(long, default_value_t = 1)]
        iters: usize,
        /// Marking parameter in (0, 1].
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value = "mean", value_parser = ["mean", "rms", "global_over_count"])]
        threshold: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Rerun a printed table and diff every cell.
    Repro {
        #[arg(long)]
        table: String,
    },
    /// List the reproducible tables.
    Tables,
}

fn run_command(cmd: Command) -> hpvem::Result<ExitCode> {
    match cmd {
        Command::Run {
            case,
            mesh,
            level,
            p,
            mode,
            estimator,
            stab,
            iters,
            sigma,
            threshold,
            out,
        } => {
            let cfg = RunConfig {
                case: CaseId::parse(&case)?,
                mesh: MeshKind::parse(&mesh)?,
                level,
                p,
                mode: Mode::parse(&mode)?,
                estimator: EstimatorKind::parse(&estimator)?,
                stab: StabVariant::parse(&stab)?,
                iters,
                sigma,
                threshold: Threshold::parse(&threshold)?,
                out,
            };
            let records = run(&cfg)?;
            for r in &records {
                println!(
                    "iter {:>2}  ndof {:>7}  p {}..{}  err {:.4e}  eta {}",
                    r.iter,
                    r.ndof,
                    r.p_min,
                    r.p_max,
                    r.err_primal,
                    [r.eta_eq, r.eta_res, r.eta_flux]
                        .iter()
                        .flatten()
                        .map(|e| format!("{e:.4e}"))
                        .collect::<Vec<_>>()
                        .join(" ")
                );
            }
            println!("wrote {}", cfg.out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Repro { table } => {
            let (report, _) = tables::repro(&table)?;
            print!("{}", report.render());
            Ok(if report.pass() { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Tables => {
            for t in tables::registry() {
                println!("{:<10} {}", t.id, t.caption);
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("thread pool: {e}");
        }
    }
    match run_command(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
