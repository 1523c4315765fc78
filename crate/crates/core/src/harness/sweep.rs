//! Parameter sweeps: solve each configured problem on each grid and collect
//! the curvature bound with its diagnostics.

use std::path::Path;

use rayon::prelude::*;

use super::diagnostics::{aux_p_max, curvature_report, JacobiContext};
use crate::config::{ProblemConfig, RunConfig};
use crate::error::{Error, Result};
use crate::geometry::GraphPatch;
use crate::parallel;
use crate::solver::newton_solve;

pub const SWEEP_HEADER: [&str; 19] = [
    "problem",
    "n",
    "k",
    "m",
    "status",
    "iterations",
    "residual",
    "f_min",
    "f_c2_norm",
    "m_c1_norm",
    "sup_lambda1_inner",
    "sup_location",
    "p_max",
    "p_location",
    "p_gradient_residual",
    "rho2_log_lambda1",
    "jacobi_min",
    "jacobi_eligible",
    "note",
];

/// One row of a sweep. Diagnostic fields are `None` when the solve failed or
/// the diagnostic had no eligible node; `note` says which.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub problem: String,
    pub n: usize,
    pub k: usize,
    pub m: usize,
    /// `ok`, a solver status such as `step underflow`, or `error`.
    pub status: String,
    pub iterations: Option<usize>,
    pub residual: Option<f64>,
    pub f_min: Option<f64>,
    pub f_c2_norm: Option<f64>,
    pub m_c1_norm: Option<f64>,
    pub sup_lambda1_inner: Option<f64>,
    pub sup_location: Option<Vec<f64>>,
    pub p_max: Option<f64>,
    pub p_location: Option<Vec<f64>>,
    pub p_gradient_residual: Option<f64>,
    pub rho2_log_lambda1: Option<f64>,
    pub jacobi_min: Option<f64>,
    pub jacobi_eligible: Option<usize>,
    pub note: String,
}

impl SweepRow {
    fn blank(p: &ProblemConfig, m: usize) -> Self {
        Self {
            problem: p.name.clone(),
            n: p.n,
            k: p.k,
            m,
            status: String::new(),
            iterations: None,
            residual: None,
            f_min: None,
            f_c2_norm: None,
            m_c1_norm: None,
            sup_lambda1_inner: None,
            sup_location: None,
            p_max: None,
            p_location: None,
            p_gradient_residual: None,
            rho2_log_lambda1: None,
            jacobi_min: None,
            jacobi_eligible: None,
            note: String::new(),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

fn num(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

fn point(v: &Option<Vec<f64>>) -> String {
    v.as_ref()
        .map(|x| x.iter().map(f64::to_string).collect::<Vec<_>>().join(" "))
        .unwrap_or_default()
}

impl SweepReport {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.is_ok()).count()
    }

    /// Rows of one problem, in grid order.
    pub fn problem_rows<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a SweepRow> + 'a {
        self.rows.iter().filter(move |r| r.problem == name)
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let wrap = |e| Error::csv("<memory>", e);
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(SWEEP_HEADER).map_err(wrap)?;
        for r in &self.rows {
            w.write_record([
                r.problem.clone(),
                r.n.to_string(),
                r.k.to_string(),
                r.m.to_string(),
                r.status.clone(),
                r.iterations.map(|i| i.to_string()).unwrap_or_default(),
                num(r.residual),
                num(r.f_min),
                num(r.f_c2_norm),
                num(r.m_c1_norm),
                num(r.sup_lambda1_inner),
                point(&r.sup_location),
                num(r.p_max),
                point(&r.p_location),
                num(r.p_gradient_residual),
                num(r.rho2_log_lambda1),
                num(r.jacobi_min),
                r.jacobi_eligible.map(|i| i.to_string()).unwrap_or_default(),
                r.note.clone(),
            ])
            .map_err(wrap)?;
        }
        w.into_inner()
            .map_err(|e| Error::Argument(format!("cannot flush CSV buffer: {e}")))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let bytes = self.to_csv_bytes()?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }
}

fn run_one(config: &RunConfig, p: &ProblemConfig, m: usize) -> SweepRow {
    let mut row = SweepRow::blank(p, m);
    let spec = match p.build(m) {
        Ok(s) => s,
        Err(e) => {
            row.status = "error".into();
            row.note = e.to_string();
            return row;
        }
    };
    let run = match newton_solve(&spec, &config.solver) {
        Ok(r) => r,
        Err(e) => {
            row.status = "error".into();
            row.note = e.to_string();
            return row;
        }
    };
    row.iterations = Some(run.state.step);
    row.residual = Some(run.state.residual_norm);
    if !run.converged() {
        row.status = run.status.as_str().into();
        return row;
    }
    row.status = "ok".into();
    let mut notes = Vec::new();
    match curvature_report(&run.state.u, &spec) {
        Ok(d) => {
            row.f_min = Some(d.f_min);
            row.f_c2_norm = Some(d.f_c2_norm);
            row.m_c1_norm = Some(d.m_c1_norm);
            row.sup_lambda1_inner = Some(d.sup_lambda1_inner);
            row.sup_location = Some(d.location);
        }
        Err(e) => notes.push(format!("curvature: {e}")),
    }
    let patch = GraphPatch::new(*spec.grid(), run.state.u).expect("solver keeps the grid length");
    match aux_p_max(&patch, &config.diagnostics.aux) {
        Ok(a) => {
            row.p_max = Some(a.value);
            row.p_location = Some(a.position);
            row.p_gradient_residual = a.gradient_residual;
            row.rho2_log_lambda1 = Some(a.rho2_log_lambda1);
        }
        Err(e) => notes.push(format!("P: {e}")),
    }
    match JacobiContext::new(&patch, *spec.operator())
        .and_then(|ctx| ctx.minimum(config.diagnostics.c_for(p.n)))
    {
        Ok(j) => {
            row.jacobi_eligible = Some(j.eligible);
            row.jacobi_min = j.min.map(|(_, v)| v);
        }
        Err(e) => notes.push(format!("jacobi: {e}")),
    }
    row.note = notes.join("; ");
    row
}

/// Runs every `(problem, m)` job of the config with `workers` threads.
/// Rows come back in config order; per-job failures are recorded in the
/// status column and do not stop the sweep.
pub fn run_sweep_with(config: &RunConfig, workers: usize) -> Result<SweepReport> {
    let jobs = config.jobs()?;
    let rows = parallel::install(workers, || {
        jobs.par_iter()
            .map(|&(i, m)| run_one(config, &config.problems[i], m))
            .collect::<Vec<_>>()
    })?;
    Ok(SweepReport { rows })
}

/// [`run_sweep_with`] using the `CQ_THREADS` worker count.
pub fn run_sweep(config: &RunConfig) -> Result<SweepReport> {
    run_sweep_with(config, parallel::worker_count()?)
}
