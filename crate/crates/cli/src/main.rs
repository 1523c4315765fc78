use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use cq_core::config::RunConfig;
use cq_core::geometry::{
    analytic_surface, codazzi_residual_in, curvature_error, gauss_residual_in, GraphPatch,
    Region, STRUCTURE_MIN_RING,
};
use cq_core::harness::{aux_p_max, curvature_report, run_sweep_with, JacobiContext};
use cq_core::ineq_lab::{run_campaign, CampaignConfig, Distribution};
use cq_core::io::{patch_csv_bytes, write_patch, write_trace, PatchMeta};
use cq_core::solver::newton_solve;
use cq_core::{parallel, Error};

/// Relative slack allowed when comparing empirical constants to their candidates.
const CANDIDATE_SLACK: f64 = 1e-6;

#[derive(Parser)]
#[command(name = "cq", version, about = "Curvature quotient sigma_n/sigma_k toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the positive cone and check every identity and inequality.
    Verify {
        /// Dimension or inclusive range, e.g. `4` or `3..6`.
        #[arg(long, value_parser = parse_dims)]
        n: Dims,
        /// Spectra per dimension.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "aniso")]
        dist: Distribution,
        /// Violation threshold on normalized gaps.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Campaign CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the single problem of a config file.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Writes `<prefix>.csv`, `<prefix>.json` and `<prefix>_trace.csv`.
        #[arg(long)]
        out_prefix: PathBuf,
    },
    /// Solve every problem of a config file on every grid and tabulate diagnostics.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample an analytic surface; prints the patch CSV, or error metrics with `--report`.
    Surface {
        #[arg(long)]
        kind: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        params: Vec<f64>,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        report: bool,
    },
}

#[derive(Clone)]
struct Dims(Vec<usize>);

fn parse_dims(s: &str) -> Result<Dims, String> {
    let num = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| format!("expected an integer or a range a..b, got {s:?}"))
    };
    match s.split_once("..") {
        Some((a, b)) => {
            let (a, b) = (num(a)?, num(b.trim_start_matches('='))?);
            if a > b {
                return Err(format!("empty range {s:?}"));
            }
            Ok(Dims((a..=b).collect()))
        }
        None => Ok(Dims(vec![num(s)?])),
    }
}

/// Failure that maps to an exit code.
enum Failure {
    /// Checks failed or the solver did not converge (exit 1).
    Negative(String),
    /// Bad arguments, config or files (exit 2).
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NoConvergence { .. } => Failure::Negative(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Negative(msg)) => {
            eprintln!("cq: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("cq: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    let workers = parallel::worker_count()?;
    match command {
        Command::Verify {
            n,
            samples,
            seed,
            dist,
            tol,
            out,
        } => {
            let config = CampaignConfig {
                dimensions: n.0,
                samples,
                distribution: dist,
                seed,
                tolerance: tol,
                ..CampaignConfig::default()
            };
            let report = parallel::install(workers, || run_campaign(&config))??;
            report.write_csv(&out)?;
            let mut bad = Vec::new();
            for row in &report.rows {
                if row.violations > 0 {
                    bad.push(format!("{} n={}: {} violations", row.lemma, row.n, row.violations));
                }
                if row.exceeds_candidate(CANDIDATE_SLACK) {
                    bad.push(format!(
                        "{} n={}: constant {:e} exceeds candidate {:e}",
                        row.lemma,
                        row.n,
                        row.implied_constant_max.unwrap_or(f64::NAN),
                        row.candidate.unwrap_or(f64::NAN)
                    ));
                }
            }
            println!(
                "{} rows, {} violations written to {}",
                report.rows.len(),
                report.total_violations(),
                out.display()
            );
            if bad.is_empty() {
                Ok(())
            } else {
                Err(Failure::Negative(bad.join("\n")))
            }
        }
        Command::Solve { config, out_prefix } => {
            let cfg = RunConfig::load(&config)?;
            let jobs = cfg.jobs()?;
            let &[(index, m)] = &jobs[..] else {
                return Err(Failure::Usage(format!(
                    "solve needs exactly one problem on one grid, config gives {} jobs",
                    jobs.len()
                )));
            };
            let problem = &cfg.problems[index];
            let spec = problem.build(m)?;
            let run = parallel::install(workers, || newton_solve(&spec, &cfg.solver))??;
            let patch = GraphPatch::new(*spec.grid(), run.state.u.clone())?;
            let meta = PatchMeta::new(spec.grid(), problem.surface.kind(), problem.surface.params());
            write_patch(&with_suffix(&out_prefix, ".csv"), &patch, &meta)?;
            write_trace(&with_suffix(&out_prefix, "_trace.csv"), &run.trace)?;
            let mut summary = json!({
                "problem": problem.name,
                "status": run.status.as_str(),
                "iterations": run.state.step,
                "residual": run.state.residual_norm,
            });
            if run.converged() {
                let report = curvature_report(&run.state.u, &spec)?;
                summary["diagnostics"] = json!(report);
                if let Ok(p) = aux_p_max(&patch, &cfg.diagnostics.aux) {
                    summary["p_max"] = json!(p);
                }
                let jac = JacobiContext::new(&patch, *spec.operator())
                    .and_then(|c| c.minimum(cfg.diagnostics.c_for(problem.n)))?;
                summary["jacobi"] = json!(jac);
            }
            println!("{}", serde_json::to_string_pretty(&summary).expect("plain JSON values"));
            run.into_result()?;
            Ok(())
        }
        Command::Sweep { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let report = run_sweep_with(&cfg, workers)?;
            report.write_csv(&out)?;
            println!("{} rows written to {}", report.rows.len(), out.display());
            match report.failures() {
                0 => Ok(()),
                k => Err(Failure::Negative(format!("{k} sweep rows did not converge"))),
            }
        }
        Command::Surface {
            kind,
            params,
            n,
            r,
            m,
            report,
        } => {
            let (surface, patch, exact) = analytic_surface(&kind, &params, n, r, m)?;
            if report {
                let region = Region::from_ring(STRUCTURE_MIN_RING);
                let summary = json!({
                    "kind": surface.kind(),
                    "params": surface.params(),
                    "n": n,
                    "r": r,
                    "m": m,
                    "spacing": patch.grid().spacing(),
                    "curvature_error": curvature_error(&patch, &exact, &region),
                    "codazzi_residual": codazzi_residual_in(&patch, &region),
                    "gauss_residual": gauss_residual_in(&patch, &region),
                });
                println!("{}", serde_json::to_string_pretty(&summary).expect("plain JSON values"));
            } else {
                let bytes = patch_csv_bytes(&patch)?;
                print!("{}", String::from_utf8(bytes).expect("CSV is UTF-8"));
            }
            Ok(())
        }
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}
