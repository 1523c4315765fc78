//! Run configuration read from TOML files.
//!
//! ```toml
//! [solver]
//! tol_residual = 1e-9
//!
//! [diagnostics]
//! alpha = 0.1
//! beta = 0.1
//!
//! [sweep]
//! m = [17, 25, 33]
//!
//! [problem.sphere]
//! n = 3
//! r = 1.0
//! mode = "dirichlet"
//! surface = "sphere"
//! surface_params = [2.0]
//! rhs = "dip"
//! rhs_params = [0.0833, 0.5, 0.3]
//! ```
//!
//! Every table whose name starts with `problem` is one problem, in file
//! order. Unknown tables and keys are rejected.

use std::path::Path;

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::geometry::{AnalyticSurface, Grid};
use crate::harness::{default_c_candidate, AuxFunction};
use crate::quotient::QuotientOperator;
use crate::solver::{manufacture, InitialGuess, ProblemSpec, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Right-hand side computed from the discrete curvatures of the surface,
    /// so the surface sampled on the grid is the exact discrete solution.
    Manufactured,
    /// Boundary data from the surface, right-hand side from `rhs`.
    Dirichlet,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RhsSpec {
    Constant(f64),
    /// `base * (1 - depth * exp(-|x - centre|^2 / width^2))`; a negative
    /// depth gives a bump.
    Dip {
        base: f64,
        depth: f64,
        width: f64,
        centre: Vec<f64>,
    },
    /// `F` of the exact curvatures of the boundary surface.
    FromSurface,
}

impl RhsSpec {
    pub fn value(&self, op: &QuotientOperator, surface: &AnalyticSurface, x: &[f64]) -> Result<f64> {
        match self {
            Self::Constant(c) => Ok(*c),
            Self::Dip {
                base,
                depth,
                width,
                centre,
            } => {
                let d2: f64 = x.iter().zip(centre).map(|(a, c)| (a - c).powi(2)).sum();
                Ok(base * (1.0 - depth * (-d2 / (width * width)).exp()))
            }
            Self::FromSurface => op.value(&surface.curvatures(x)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    pub name: String,
    pub n: usize,
    pub k: usize,
    pub r: f64,
    pub m: Option<usize>,
    pub mode: Mode,
    pub surface: AnalyticSurface,
    pub rhs: RhsSpec,
    /// Amplitude `a` of an explicit initial guess
    /// `surface + a * prod_i (1 - x_i^2 / r^2)`; `None` uses the automatic guess.
    pub initial_bump: Option<f64>,
}

impl ProblemConfig {
    /// Discrete problem on the `m^n` grid.
    pub fn build(&self, m: usize) -> Result<ProblemSpec> {
        self.surface.validate(self.n, self.r)?;
        let s = &self.surface;
        let spec = match self.mode {
            Mode::Manufactured => manufacture(|x| s.value(x), self.n, self.k, self.r, m)?,
            Mode::Dirichlet => {
                let grid = Grid::new(self.n, self.r, m)?;
                let op = QuotientOperator::new(self.n, self.k)?;
                let rhs = (0..grid.len())
                    .map(|i| self.rhs.value(&op, s, &grid.position(i)))
                    .collect::<Result<Vec<_>>>()?;
                let boundary = (0..grid.len()).map(|i| s.value(&grid.position(i))).collect();
                ProblemSpec::from_fields(grid, op, rhs, boundary)?
            }
        };
        match self.initial_bump {
            None => Ok(spec),
            Some(a) => {
                let grid = *spec.grid();
                let r2 = self.r * self.r;
                let guess = (0..grid.len())
                    .map(|i| {
                        let x = grid.position(i);
                        s.value(&x) + a * x.iter().map(|v| 1.0 - v * v / r2).product::<f64>()
                    })
                    .collect();
                spec.with_initial_guess(InitialGuess::Field(guess))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsConfig {
    pub aux: AuxFunction,
    /// `None` means `1 / (2 (n - 1))` per problem.
    pub c_candidate: Option<f64>,
}

impl DiagnosticsConfig {
    pub fn c_for(&self, n: usize) -> f64 {
        self.c_candidate.unwrap_or_else(|| default_c_candidate(n))
    }
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            aux: AuxFunction {
                alpha: 0.1,
                beta: 0.1,
            },
            c_candidate: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub solver: SolverConfig,
    pub diagnostics: DiagnosticsConfig,
    /// Grid sizes applied to every problem; overrides per-problem `m`.
    pub sweep_m: Option<Vec<usize>>,
    pub problems: Vec<ProblemConfig>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        text.parse()
    }

    /// `(problem index, m)` pairs in config order.
    pub fn jobs(&self) -> Result<Vec<(usize, usize)>> {
        let mut out = Vec::new();
        for (i, p) in self.problems.iter().enumerate() {
            match (&self.sweep_m, p.m) {
                (Some(ms), _) => out.extend(ms.iter().map(|&m| (i, m))),
                (None, Some(m)) => out.push((i, m)),
                (None, None) => {
                    return Err(Error::Config(format!(
                        "problem {:?} has no m and there is no [sweep] m list",
                        p.name
                    )))
                }
            }
        }
        Ok(out)
    }
}

impl std::str::FromStr for RunConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let root: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut cfg = RunConfig::default();
        for (key, value) in &root {
            let table = value
                .as_table()
                .ok_or_else(|| Error::Config(format!("top-level key {key:?} must be a [section]")))?;
            match key.as_str() {
                "solver" => cfg.solver = parse_solver(table)?,
                "diagnostics" => cfg.diagnostics = parse_diagnostics(table)?,
                "sweep" => cfg.sweep_m = Some(parse_sweep(table)?),
                k if k.starts_with("problem") => {
                    // `[problem.a]` nests a table per problem under `problem`.
                    if table.values().all(Value::is_table) && !table.is_empty() {
                        for (sub, v) in table {
                            cfg.problems.push(parse_problem(&format!("{k}.{sub}"), v.as_table().unwrap())?);
                        }
                    } else {
                        cfg.problems.push(parse_problem(k, table)?);
                    }
                }
                other => return Err(Error::Config(format!("unknown section [{other}]"))),
            }
        }
        cfg.solver
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }
}

struct Section<'a> {
    name: &'a str,
    table: &'a Table,
}

impl<'a> Section<'a> {
    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.table.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(Error::Config(format!("unknown key {k:?} in [{}]", self.name))),
            None => Ok(()),
        }
    }

    fn err(&self, key: &str, want: &str) -> Error {
        Error::Config(format!("[{}] {key} must be {want}", self.name))
    }

    fn float(&self, key: &str) -> Result<Option<f64>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(*x)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(_) => Err(self.err(key, "a number")),
        }
    }

    fn uint(&self, key: &str) -> Result<Option<usize>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as usize)),
            Some(_) => Err(self.err(key, "a nonnegative integer")),
        }
    }

    fn string(&self, key: &str) -> Result<Option<&'a str>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.as_str())),
            Some(_) => Err(self.err(key, "a quoted string")),
        }
    }

    fn floats(&self, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(v) = self.table.get(key) else {
            return Ok(None);
        };
        let arr = v.as_array().ok_or_else(|| self.err(key, "an array of numbers"))?;
        arr.iter()
            .map(|x| match x {
                Value::Float(f) => Ok(*f),
                Value::Integer(i) => Ok(*i as f64),
                _ => Err(self.err(key, "an array of numbers")),
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }
}

fn parse_solver(table: &Table) -> Result<SolverConfig> {
    let s = Section { name: "solver", table };
    s.check_keys(&["tol_residual", "max_iters", "backtrack", "min_step", "linear_tol"])?;
    let d = SolverConfig::default();
    Ok(SolverConfig {
        tol_residual: s.float("tol_residual")?.unwrap_or(d.tol_residual),
        max_iters: s.uint("max_iters")?.unwrap_or(d.max_iters),
        backtrack: s.float("backtrack")?.unwrap_or(d.backtrack),
        min_step: s.float("min_step")?.unwrap_or(d.min_step),
        linear_tol: s.float("linear_tol")?.unwrap_or(d.linear_tol),
    })
}

fn parse_diagnostics(table: &Table) -> Result<DiagnosticsConfig> {
    let s = Section {
        name: "diagnostics",
        table,
    };
    s.check_keys(&["alpha", "beta", "c_candidate"])?;
    let d = DiagnosticsConfig::default();
    let aux = AuxFunction::new(
        s.float("alpha")?.unwrap_or(d.aux.alpha),
        s.float("beta")?.unwrap_or(d.aux.beta),
    )
    .map_err(|e| Error::Config(e.to_string()))?;
    let c_candidate = s.float("c_candidate")?;
    if c_candidate.is_some_and(|c| !(c >= 0.0 && c.is_finite())) {
        return Err(s.err("c_candidate", "finite and nonnegative"));
    }
    Ok(DiagnosticsConfig { aux, c_candidate })
}

fn parse_sweep(table: &Table) -> Result<Vec<usize>> {
    let s = Section { name: "sweep", table };
    s.check_keys(&["m"])?;
    let arr = table
        .get("m")
        .and_then(Value::as_array)
        .ok_or_else(|| s.err("m", "an array of grid sizes"))?;
    arr.iter()
        .map(|v| match v {
            Value::Integer(i) if *i >= 0 => Ok(*i as usize),
            _ => Err(s.err("m", "an array of grid sizes")),
        })
        .collect()
}

fn parse_problem(name: &str, table: &Table) -> Result<ProblemConfig> {
    let s = Section { name, table };
    s.check_keys(&[
        "n",
        "k",
        "r",
        "m",
        "mode",
        "surface",
        "surface_params",
        "rhs",
        "rhs_params",
        "initial_bump",
    ])?;
    let cfg_err = |e: Error| Error::Config(format!("[{name}] {e}"));
    let n = s.uint("n")?.ok_or_else(|| s.err("n", "given"))?;
    if n < 2 {
        return Err(s.err("n", "at least 2"));
    }
    let k = s.uint("k")?.unwrap_or(n.saturating_sub(2));
    let r = s.float("r")?.unwrap_or(1.0);
    let mode = match s.string("mode")?.unwrap_or("dirichlet") {
        "manufactured" => Mode::Manufactured,
        "dirichlet" => Mode::Dirichlet,
        _ => return Err(s.err("mode", "\"manufactured\" or \"dirichlet\"")),
    };
    let kind = s.string("surface")?.ok_or_else(|| s.err("surface", "given"))?;
    let params = s.floats("surface_params")?.unwrap_or_default();
    let surface = AnalyticSurface::from_params(kind, &params, n).map_err(cfg_err)?;
    surface.validate(n, r).map_err(cfg_err)?;
    QuotientOperator::new(n, k).map_err(cfg_err)?;

    let rhs_params = s.floats("rhs_params")?.unwrap_or_default();
    let rhs = match (mode, s.string("rhs")?) {
        (Mode::Manufactured, None) => RhsSpec::FromSurface,
        (Mode::Manufactured, Some(_)) => {
            return Err(Error::Config(format!(
                "[{name}] rhs is computed from the surface in manufactured mode"
            )))
        }
        (Mode::Dirichlet, None | Some("surface")) => RhsSpec::FromSurface,
        (Mode::Dirichlet, Some("constant")) => match rhs_params[..] {
            [c] if c > 0.0 && c.is_finite() => RhsSpec::Constant(c),
            _ => return Err(s.err("rhs_params", "[c] with c > 0 for a constant rhs")),
        },
        (Mode::Dirichlet, Some("dip")) => {
            let bad = || s.err("rhs_params", "[base, depth, width] or [base, depth, width, centre...] with base > 0, depth < 1, width > 0");
            if rhs_params.len() != 3 && rhs_params.len() != 3 + n {
                return Err(bad());
            }
            let (base, depth, width) = (rhs_params[0], rhs_params[1], rhs_params[2]);
            if !(base > 0.0 && depth < 1.0 && width > 0.0) || rhs_params.iter().any(|v| !v.is_finite()) {
                return Err(bad());
            }
            let centre = if rhs_params.len() == 3 {
                vec![0.0; n]
            } else {
                rhs_params[3..].to_vec()
            };
            RhsSpec::Dip {
                base,
                depth,
                width,
                centre,
            }
        }
        (Mode::Dirichlet, Some(_)) => return Err(s.err("rhs", "\"surface\", \"constant\" or \"dip\"")),
    };
    let initial_bump = s.float("initial_bump")?;
    if initial_bump.is_some_and(|a| !a.is_finite()) {
        return Err(s.err("initial_bump", "finite"));
    }
    Ok(ProblemConfig {
        name: name.to_string(),
        n,
        k,
        r,
        m: s.uint("m")?,
        mode,
        surface,
        rhs,
        initial_bump,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
# two problems and a grid list
[solver]
max_iters = 30

[diagnostics]
alpha = 0.2
beta = 0.5

[sweep]
m = [9, 11]

[problem.cap]
n = 3
k = 1
surface = "sphere"
surface_params = [2]
rhs = "dip"
rhs_params = [0.08, 0.5, 0.3]

[problem.quartic]
n = 3
mode = "manufactured"
surface = "quartic"
surface_params = [1.0, 1.0, 1.0, 1.0]
initial_bump = 0.15
"#;

    #[test]
    fn parses_sections_in_order() {
        let cfg: RunConfig = SAMPLE.parse().unwrap();
        assert_eq!(cfg.solver.max_iters, 30);
        assert_eq!(cfg.solver.tol_residual, SolverConfig::default().tol_residual);
        assert_eq!(cfg.diagnostics.aux, AuxFunction { alpha: 0.2, beta: 0.5 });
        assert_eq!(cfg.diagnostics.c_for(3), 0.25);
        let names: Vec<_> = cfg.problems.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["problem.cap", "problem.quartic"]);
        assert_eq!(cfg.problems[1].k, 1);
        assert_eq!(cfg.problems[1].rhs, RhsSpec::FromSurface);
        assert_eq!(cfg.jobs().unwrap(), [(0, 9), (0, 11), (1, 9), (1, 11)]);
    }

    #[test]
    fn flat_problem_sections() {
        let cfg: RunConfig = "[problem]\nn = 2\nk = 1\nm = 7\nsurface = \"paraboloid\"\nsurface_params = [1.0]\n"
            .parse()
            .unwrap();
        assert_eq!(cfg.problems.len(), 1);
        assert_eq!(cfg.jobs().unwrap(), [(0, 7)]);
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "[solverz]\n",
            "[solver]\nmax_iter = 3\n",
            "[solver]\nbacktrack = 2.0\n",
            "[problem]\nn = 3\nsurface = \"sphere\"\nsurface_params = [1.0]\n",
            "[problem]\nn = 3\nsurface = \"cube\"\n",
            "[problem]\nn = 3\nmode = \"manufactured\"\nsurface = \"paraboloid\"\nsurface_params = [1]\nrhs = \"constant\"\n",
            "[problem]\nn = 3\nsurface = \"paraboloid\"\nsurface_params = [1]\nrhs = \"constant\"\nrhs_params = [-1]\n",
            "[problem]\nn = 3\nsurface = \"paraboloid\"\nsurface_params = [1]\nrhs = \"dip\"\nrhs_params = [1, 1, 0.3]\n",
            "[diagnostics]\nalpha = -1\n",
            "[sweep]\nm = 17\n",
            "n = 3\n",
        ] {
            assert!(matches!(text.parse::<RunConfig>(), Err(Error::Config(_))), "{text}");
        }
        let no_m: RunConfig = "[problem]\nn = 3\nsurface = \"paraboloid\"\nsurface_params = [1]\n"
            .parse()
            .unwrap();
        assert!(no_m.jobs().is_err());
    }

    #[test]
    fn dip_rhs_values() {
        let op = QuotientOperator::new(2, 1).unwrap();
        let s = AnalyticSurface::Paraboloid { c: 1.0 };
        let dip = RhsSpec::Dip {
            base: 2.0,
            depth: 0.5,
            width: 1.0,
            centre: vec![0.0, 0.0],
        };
        assert_eq!(dip.value(&op, &s, &[0.0, 0.0]).unwrap(), 1.0);
        let far = dip.value(&op, &s, &[0.0, 1.0]).unwrap();
        assert!((far - 2.0 * (1.0 - 0.5 * (-1.0f64).exp())).abs() < 1e-15);
        // sigma_2 / sigma_1 of (1, 1) at the vertex.
        assert_eq!(RhsSpec::FromSurface.value(&op, &s, &[0.0, 0.0]).unwrap(), 0.5);
    }

    #[test]
    fn builds_manufactured_with_bump() {
        let cfg: RunConfig = SAMPLE.parse().unwrap();
        let spec = cfg.problems[1].build(9).unwrap();
        let InitialGuess::Field(g) = spec.initial_guess() else {
            panic!("expected explicit guess")
        };
        let centre = spec.grid().nearest(&[0.0; 3]);
        assert!((g[centre] - spec.boundary()[centre] - 0.15).abs() < 1e-15);
        assert_eq!(g[0], spec.boundary()[0]);
    }
}
