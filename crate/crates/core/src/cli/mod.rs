//! Experiment drivers: uniform convergence on the disk, estimator rates
//! on the square, the adaptive loop, and the property suite.

pub mod verify;

use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Parser, ValueEnum};

use crate::adapt::{adapt_loop, fmt_real, AdaptConfig, AdaptProblem, AdaptTrace};
use crate::fespace::{eoc, FEFunction, FunctionSpace};
use crate::lagrangian::{
    Constant, DiskSolution, DiskSource, GaussianSolution, GaussianSource, PLaplacian, SmoothField,
};
use crate::mesh::{
    build_disk_mesh, build_square_mesh, uniform_refine, write_mesh, Mesh, SquareMeshOptions,
};
use crate::noether::{
    estimator, Aggregation, GradientConvention, NoetherOptions, RotationSymmetry, Symmetry,
    TranslationUSymmetry,
};
use crate::solver::{newton_solve, NewtonConfig};
use crate::Vec2;

pub use verify::{run_properties, PropertyResult, VerifyReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Convergence,
    Estimator,
    Adapt,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Domain {
    Disk,
    Square,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SymmetryName {
    Rotation,
    TranslationU,
}

impl SymmetryName {
    fn build(self) -> Arc<dyn Symmetry> {
        match self {
            SymmetryName::Rotation => Arc::new(RotationSymmetry),
            SymmetryName::TranslationU => Arc::new(TranslationUSymmetry),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AggregationName {
    Broken,
    Weighted,
    Literal,
}

impl From<AggregationName> for Aggregation {
    fn from(a: AggregationName) -> Self {
        match a {
            AggregationName::Broken => Aggregation::Broken,
            AggregationName::Weighted => Aggregation::Weighted,
            AggregationName::Literal => Aggregation::Literal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GradientName {
    Total,
    Explicit,
}

impl From<GradientName> for GradientConvention {
    fn from(g: GradientName) -> Self {
        match g {
            GradientName::Total => GradientConvention::Total,
            GradientName::Explicit => GradientConvention::Explicit,
        }
    }
}

/// Command-line configuration.
#[derive(Debug, Clone, Parser)]
#[command(
    name = "noether",
    version,
    about = "p-Laplacian finite elements with discrete Noether conservation laws"
)]
pub struct RunConfig {
    #[arg(long = "cmd", value_enum)]
    pub command: Command,
    /// Defaults to the disk for `convergence` and the square otherwise.
    #[arg(long, value_enum)]
    pub domain: Option<Domain>,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Number of meshes in a uniform study.
    #[arg(long, default_value_t = 5)]
    pub levels: usize,
    /// Refinements applied to the coarse mesh before the first level.
    #[arg(long, default_value_t = 1)]
    pub start_level: usize,
    /// Cells per side of the coarse square mesh.
    #[arg(long, default_value_t = 3)]
    pub cells: usize,
    #[arg(long, value_enum, default_value = "rotation")]
    pub sym: SymmetryName,
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,
    #[arg(long = "target-e", default_value_t = 1e-2)]
    pub target_e: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_dofs: usize,
    #[arg(long, default_value_t = 40)]
    pub max_rounds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; tables go to standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-10)]
    pub newton_tol: f64,
    #[arg(long, value_enum, default_value = "broken")]
    pub aggregation: AggregationName,
    #[arg(long, value_enum, default_value = "total")]
    pub gradient: GradientName,
    /// Replace the source by zero (with zero boundary data).
    #[arg(long)]
    pub zero_source: bool,
    /// Expect the opposite sign in the pointwise conservation identity.
    #[arg(long)]
    pub flip_sign: bool,
}

impl RunConfig {
    /// Configuration with every default and the given command.
    pub fn new(command: Command) -> Self {
        let name = match command {
            Command::Convergence => "convergence",
            Command::Estimator => "estimator",
            Command::Adapt => "adapt",
            Command::Verify => "verify",
        };
        RunConfig::parse_from(["noether", "--cmd", name])
    }

    fn validate(&self) -> crate::Result<()> {
        if !(self.p > 1.0) {
            return Err(crate::Error::Config(format!(
                "p must exceed 1, got {}",
                self.p
            )));
        }
        if !(1..=3).contains(&self.k) {
            return Err(crate::Error::Config(format!(
                "k must be 1, 2 or 3, got {}",
                self.k
            )));
        }
        if self.levels == 0 {
            return Err(crate::Error::Config("at least one level is needed".into()));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(crate::Error::Config(format!(
                "theta must lie in (0, 1], got {}",
                self.theta
            )));
        }
        Ok(())
    }

    fn newton(&self) -> NewtonConfig {
        NewtonConfig {
            tolerance: self.newton_tol,
            ..Default::default()
        }
    }

    fn noether(&self) -> NoetherOptions {
        NoetherOptions {
            gradient: self.gradient.into(),
            ..Default::default()
        }
    }
}

/// A CSV table: header row and pre-formatted cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", self.header.join(","))?;
        for row in &self.rows {
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    /// Parsed values of a numeric column.
    pub fn column(&self, name: &str) -> Vec<f64> {
        let i = self
            .header
            .iter()
            .position(|h| h == name)
            .unwrap_or_else(|| panic!("no column {name}"));
        self.rows
            .iter()
            .map(|r| r[i].parse().unwrap_or(f64::NAN))
            .collect()
    }
}

/// A driver failure, with the rows finished before it.
#[derive(Debug, thiserror::Error)]
#[error("{error}")]
pub struct RunFailure {
    pub partial: Table,
    #[source]
    pub error: crate::Error,
}

fn failure(partial: &Table, error: impl Into<crate::Error>) -> RunFailure {
    RunFailure {
        partial: partial.clone(),
        error: error.into(),
    }
}

/// EOC column entries: empty for the first level.
fn eoc_cells(values: &[f64], h: &[f64]) -> Vec<String> {
    let mut cells = vec![String::new()];
    if values.len() >= 2 {
        match eoc(values, h) {
            Ok(rates) => cells.extend(rates.into_iter().map(fmt_real)),
            Err(_) => cells.extend(std::iter::repeat(String::new()).take(values.len() - 1)),
        }
    }
    cells
}

fn disk_meshes(config: &RunConfig) -> Vec<Mesh> {
    let mut mesh = build_disk_mesh(config.start_level);
    let mut out = vec![mesh.clone()];
    for _ in 1..config.levels {
        mesh = uniform_refine(&mesh);
        out.push(mesh.clone());
    }
    out
}

fn square_coarse(config: &RunConfig) -> Mesh {
    build_square_mesh(
        config.cells,
        &SquareMeshOptions {
            seed: config.seed,
            ..Default::default()
        },
    )
}

fn square_meshes(config: &RunConfig) -> Vec<Mesh> {
    let mut mesh = square_coarse(config);
    for _ in 0..config.start_level {
        mesh = uniform_refine(&mesh);
    }
    let mut out = vec![mesh.clone()];
    for _ in 1..config.levels {
        mesh = uniform_refine(&mesh);
        out.push(mesh.clone());
    }
    out
}

/// Benchmark problem on a domain: model, exact solution and boundary data.
struct Benchmark {
    model: PLaplacian,
    exact: Arc<dyn SmoothField>,
}

fn benchmark(config: &RunConfig, domain: Domain) -> crate::Result<Benchmark> {
    let p = config.p;
    if config.zero_source {
        return Ok(Benchmark {
            model: PLaplacian::new(p, Arc::new(Constant(0.0)))?,
            exact: Arc::new(Constant(0.0)),
        });
    }
    Ok(match domain {
        Domain::Disk => Benchmark {
            model: PLaplacian::new(p, Arc::new(DiskSource { p }))?,
            exact: Arc::new(DiskSolution),
        },
        Domain::Square => {
            let model = if p == 2.0 {
                PLaplacian::new(p, Arc::new(GaussianSource))?
            } else {
                return Err(crate::Error::Config(format!(
                    "the square benchmark is defined for p = 2 only, got {p}"
                )));
            };
            Benchmark {
                model,
                exact: Arc::new(GaussianSolution),
            }
        }
    })
}

/// Solution with the benchmark's boundary values as Dirichlet data.
fn solve_on(
    mesh: Mesh,
    config: &RunConfig,
    bench: &Benchmark,
) -> crate::Result<(FEFunction, crate::solver::NewtonResult)> {
    let space = Arc::new(FunctionSpace::new(Arc::new(mesh), config.k)?);
    let mut u0 = FEFunction::zero(space.clone());
    for (i, &x) in space.nodes().iter().enumerate() {
        if space.is_boundary_node(i) {
            u0.values_mut()[i] = bench.exact.value(x);
        }
    }
    let res = newton_solve(&bench.model, &config.newton(), u0)?;
    Ok((res.solution.clone(), res))
}

/// Uniform study on the disk benchmark: dimension, `L^p` and `W^{1,p}`
/// errors with EOCs, and `N[U]`; then mesh size and solver diagnostics.
pub fn run_convergence(config: &RunConfig) -> Result<Table, RunFailure> {
    let mut table = Table::new(&[
        "dim",
        "lp_err",
        "lp_eoc",
        "w1p_err",
        "w1p_eoc",
        "N",
        "h",
        "newton_iterations",
        "residual",
    ]);
    config.validate().map_err(|e| failure(&table, e))?;
    let domain = config.domain.unwrap_or(Domain::Disk);
    let bench = benchmark(config, domain).map_err(|e| failure(&table, e))?;
    let sym = config.sym.build();
    let meshes = match domain {
        Domain::Disk => disk_meshes(config),
        Domain::Square => square_meshes(config),
    };
    let (mut lp, mut w1p, mut h) = (Vec::new(), Vec::new(), Vec::new());
    for mesh in meshes {
        let meshsize = mesh.meshsize();
        let (u, res) = solve_on(mesh, config, &bench).map_err(|e| failure(&table, e))?;
        let n = crate::noether::discrete_noether(&bench.model, sym.as_ref(), &u, &config.noether())
            .map_err(|e| failure(&table, e))?;
        let exact = bench.exact.clone();
        let (a, b) = u.error_norms(|x| (exact.value(x), exact.gradient(x)), config.p);
        lp.push(a);
        w1p.push(b);
        h.push(meshsize);
        let lp_eoc = eoc_cells(&lp, &h);
        let w1p_eoc = eoc_cells(&w1p, &h);
        table.rows.push(vec![
            u.space().dim().to_string(),
            fmt_real(a),
            lp_eoc.last().cloned().unwrap_or_default(),
            fmt_real(b),
            w1p_eoc.last().cloned().unwrap_or_default(),
            fmt_real(n),
            fmt_real(meshsize),
            res.iterations.to_string(),
            fmt_real(*res.history.last().expect("history is never empty")),
        ]);
    }
    Ok(table)
}

/// Uniform study of the estimator on the square benchmark.
pub fn run_estimator(config: &RunConfig) -> Result<Table, RunFailure> {
    let mut table = Table::new(&[
        "dofs",
        "l2_err",
        "l2_eoc",
        "h1_err",
        "h1_eoc",
        "E",
        "E_eoc",
        "N",
        "h",
        "E_literal",
    ]);
    config.validate().map_err(|e| failure(&table, e))?;
    let domain = config.domain.unwrap_or(Domain::Square);
    let bench = benchmark(config, domain).map_err(|e| failure(&table, e))?;
    let sym = config.sym.build();
    let meshes = match domain {
        Domain::Disk => disk_meshes(config),
        Domain::Square => square_meshes(config),
    };
    let (mut l2, mut h1, mut es, mut h) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for mesh in meshes {
        let meshsize = mesh.meshsize();
        let (u, _) = solve_on(mesh, config, &bench).map_err(|e| failure(&table, e))?;
        let report = estimator(
            &bench.model,
            sym.as_ref(),
            &u,
            &config.noether(),
            config.aggregation.into(),
        )
        .map_err(|e| failure(&table, e))?;
        let exact = bench.exact.clone();
        let (a, b) = u.error_norms(|x| (exact.value(x), exact.gradient(x)), 2.0);
        l2.push(a);
        h1.push(b);
        es.push(report.e_total);
        h.push(meshsize);
        let last = |v: &[f64]| eoc_cells(v, &h).last().cloned().unwrap_or_default();
        table.rows.push(vec![
            u.space().dim().to_string(),
            fmt_real(a),
            last(&l2),
            fmt_real(b),
            last(&h1),
            fmt_real(report.e_total),
            last(&es),
            fmt_real(report.n_value),
            fmt_real(meshsize),
            fmt_real(report.e_literal),
        ]);
    }
    Ok(table)
}

/// The adaptive loop on the square benchmark; returns the trace and the
/// final mesh.
pub fn run_adapt(config: &RunConfig) -> Result<(AdaptTrace, Mesh), RunFailure> {
    let empty = Table::default();
    config.validate().map_err(|e| failure(&empty, e))?;
    let domain = config.domain.unwrap_or(Domain::Square);
    let bench = benchmark(config, domain).map_err(|e| failure(&empty, e))?;
    let exact = bench.exact.clone();
    let problem = AdaptProblem {
        model: bench.model.clone(),
        symmetry: config.sym.build(),
        degree: config.k,
        boundary: Arc::new(move |x: Vec2| exact.value(x)),
        exact: Some(bench.exact.clone()),
        newton: config.newton(),
        noether: config.noether(),
        aggregation: config.aggregation.into(),
    };
    let initial = match domain {
        Domain::Disk => build_disk_mesh(config.start_level),
        Domain::Square => square_coarse(config),
    };
    let adapt = AdaptConfig {
        theta: config.theta,
        target_e: config.target_e,
        max_dofs: config.max_dofs,
        max_rounds: config.max_rounds,
    };
    match adapt_loop(&problem, initial, &adapt) {
        Ok(out) => Ok((out.trace, (*out.mesh).clone())),
        Err(f) => {
            let mut partial = Vec::new();
            f.trace.write_csv(&mut partial).expect("writing to memory");
            let text = String::from_utf8(partial).expect("ascii output");
            let mut lines = text.lines();
            let header: Vec<String> = lines
                .next()
                .unwrap_or_default()
                .split(',')
                .map(String::from)
                .collect();
            let rows = lines
                .map(|l| l.split(',').map(String::from).collect())
                .collect();
            Err(RunFailure {
                partial: Table { header, rows },
                error: f.error,
            })
        }
    }
}

pub fn run_verify(config: &RunConfig) -> crate::Result<VerifyReport> {
    run_properties(config.seed, config.flip_sign)
}

fn verify_table(report: &VerifyReport) -> Table {
    let mut t = Table::new(&["property", "passed", "value", "tolerance"]);
    for p in &report.properties {
        t.rows.push(vec![
            p.name.to_string(),
            p.passed.to_string(),
            fmt_real(p.value),
            fmt_real(p.tolerance),
        ]);
    }
    t
}

fn emit(config: &RunConfig, table: &Table) -> std::io::Result<()> {
    match &config.out {
        Some(path) => table.write_csv(std::fs::File::create(path)?),
        None => table.write_csv(std::io::stdout().lock()),
    }
}

/// Runs a configuration and returns the process exit status: 0 on success,
/// 1 on solver or input failure, 2 when a verified property fails.
pub fn run(config: &RunConfig) -> i32 {
    let result: Result<i32, RunFailure> = (|| match config.command {
        Command::Convergence => {
            let t = run_convergence(config)?;
            emit(config, &t).map_err(|e| failure(&t, e))?;
            Ok(0)
        }
        Command::Estimator => {
            let t = run_estimator(config)?;
            emit(config, &t).map_err(|e| failure(&t, e))?;
            Ok(0)
        }
        Command::Adapt => {
            let (trace, mesh) = run_adapt(config)?;
            let empty = Table::default();
            match &config.out {
                Some(path) => {
                    trace
                        .write_csv(std::fs::File::create(path).map_err(|e| failure(&empty, e))?)
                        .map_err(|e| failure(&empty, e))?;
                    let mesh_path = path.with_extension("mesh");
                    let file = std::fs::File::create(mesh_path).map_err(|e| failure(&empty, e))?;
                    write_mesh(&mesh, std::io::BufWriter::new(file))
                        .map_err(|e| failure(&empty, e))?;
                }
                None => trace
                    .write_csv(std::io::stdout().lock())
                    .map_err(|e| failure(&empty, e))?,
            }
            Ok(0)
        }
        Command::Verify => {
            let report = run_verify(config).map_err(|e| failure(&Table::default(), e))?;
            let t = verify_table(&report);
            emit(config, &t).map_err(|e| failure(&t, e))?;
            Ok(if report.all_passed() { 0 } else { 2 })
        }
    })();
    match result {
        Ok(code) => code,
        Err(f) => {
            if !f.partial.rows.is_empty() {
                let _ = f.partial.write_csv(std::io::stdout().lock());
            }
            eprintln!("error: {}", f.error);
            1
        }
    }
}
