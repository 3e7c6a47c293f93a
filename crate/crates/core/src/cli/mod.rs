//! Command-line front end.
//!
//! Exit codes: 0 success (whatever the classification), 1 I/O failure,
//! 2 unreadable or invalid problem file (or bad arguments), 3 numerical
//! failure, 4 convergence hypothesis rejected, 5 self-test failure.

pub mod file;
pub mod selftest;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::characteristic::Warning;
use crate::function::{Grid, GridVectorFunction, DEFAULT_N_STEPS};
use crate::limits::{
    check_hypothesis, check_semicontinuity, run_family_with, ConvergenceTrace, HypothesisCheck,
    SemicontinuityVerdict,
};
use crate::solver::{solve_with, verify_solution, BvpProblem, BvpSolution, Residuals};

pub use file::{FileError, ProblemFile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_HYPOTHESIS: i32 = 4;
pub const EXIT_SELFTEST: i32 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "fredholm-bvp",
    version,
    about = "Fredholm analysis of linear boundary-value problems"
)]
pub struct Cli {
    /// Grid steps (overrides the file's `grid.n_steps`).
    #[arg(long, global = true)]
    pub n_steps: Option<usize>,
    /// Absolute rank tolerance for the characteristic matrix.
    #[arg(long, global = true)]
    pub rank_tol: Option<f64>,
    /// Emit a JSON report instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Characteristic matrix, Fredholm numbers and classification.
    Analyze { file: PathBuf },
    /// Solve and dump solution samples and kernel basis as CSV.
    Solve {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the file's perturbation family and dump the convergence trace.
    Converge {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in oracle checks.
    Selftest {
        /// Replace every check's tolerance with this value.
        #[arg(long)]
        tolerance: Option<f64>,
    },
}

/// A command failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<crate::Error> for Failure {
    fn from(e: crate::Error) -> Self {
        Self::new(EXIT_NUMERICAL, format!("numerical failure: {e}"))
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::new(EXIT_IO, format!("i/o error: {e}"))
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{e}");
            return e.exit_code();
        }
    };
    match dispatch(&cli, out, err) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    match &cli.command {
        Command::Analyze { file } => {
            let (pf, problem, grid) = load(file, cli.n_steps)?;
            let (report, _) = analyze(&pf, &problem, &grid, cli.rank_tol)?;
            emit_report(&report, cli.json, out)?;
            Ok(EXIT_OK)
        }
        Command::Solve {
            file,
            out: csv_path,
        } => {
            let (pf, problem, grid) = load(file, cli.n_steps)?;
            let (report, solution) = analyze(&pf, &problem, &grid, cli.rank_tol)?;
            let csv = solution_csv(&grid, &solution);
            match csv_path {
                Some(path) => {
                    std::fs::write(path, csv)?;
                    emit_report(&report, cli.json, out)?;
                }
                None if cli.json => emit_report(&report, true, out)?,
                None => {
                    emit_report(&report, false, err)?;
                    out.write_all(csv.as_bytes())?;
                }
            }
            Ok(EXIT_OK)
        }
        Command::Converge {
            file,
            out: csv_path,
        } => {
            let (pf, _, grid) = load(file, cli.n_steps)?;
            let family = pf.to_family().map_err(|e| Failure::new(EXIT_PARSE, e.0))?;
            let trace = run_family_with(&family, &grid, cli.rank_tol)?;
            let report = ConvergeReport {
                problem_hash: pf.hash(),
                n_steps: grid.n_steps(),
                semicontinuity: check_semicontinuity(&trace, &trace.base_report),
                hypothesis: check_hypothesis(&trace),
                matrix_ratio: trace.matrix_ratio(),
                trace,
            };
            ensure_finite("convergence trace", report.numbers())?;
            let csv = report.trace.to_csv();
            match csv_path {
                Some(path) => {
                    std::fs::write(path, &csv)?;
                    emit_converge(&report, cli.json, out)?;
                }
                None if cli.json => emit_converge(&report, true, out)?,
                None => {
                    out.write_all(csv.as_bytes())?;
                    emit_converge(&report, false, err)?;
                }
            }
            if !report.hypothesis.holds {
                return Err(Failure::new(
                    EXIT_HYPOTHESIS,
                    format!(
                        "convergence hypothesis rejected: the coefficient and boundary data do not \
                         converge in the order-(s-1) norm (first distance {:e}, last {:e}); \
                         the limit results do not apply to this family",
                        report.hypothesis.first_distance, report.hypothesis.last_distance
                    ),
                ));
            }
            Ok(EXIT_OK)
        }
        Command::Selftest { tolerance } => {
            let checks = selftest::run_checks(*tolerance);
            if cli.json {
                serde_json::to_writer_pretty(&mut *out, &checks)
                    .map_err(|e| Failure::new(EXIT_IO, e.to_string()))?;
                writeln!(out)?;
            } else {
                out.write_all(selftest::render_table(&checks).as_bytes())?;
            }
            Ok(if checks.iter().all(|c| c.passed) {
                EXIT_OK
            } else {
                EXIT_SELFTEST
            })
        }
    }
}

fn load(path: &Path, n_steps: Option<usize>) -> Result<(ProblemFile, BvpProblem, Grid), Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_IO, format!("cannot read {}: {e}", path.display())))?;
    let parse_err = |e: FileError| Failure::new(EXIT_PARSE, format!("{}: {}", path.display(), e.0));
    let pf = ProblemFile::parse(&text).map_err(parse_err)?;
    let problem = pf.to_problem().map_err(parse_err)?;
    let n = n_steps.or(pf.n_steps()).unwrap_or(DEFAULT_N_STEPS);
    let grid = Grid::new(problem.interval(), n)
        .map_err(|e| Failure::new(EXIT_PARSE, format!("grid.n_steps: {e}")))?;
    problem
        .boundary()
        .check_points(&problem.interval())
        .map_err(|e| Failure::new(EXIT_PARSE, format!("{}: boundary: {e}", path.display())))?;
    Ok((pf, problem, grid))
}

/// Machine-readable analysis report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub problem_hash: String,
    pub n_steps: usize,
    pub m: usize,
    pub r: usize,
    pub s: usize,
    /// `r × m`, row-major, entries `[re, im]`.
    pub characteristic_matrix: Vec<Vec<[f64; 2]>>,
    pub singular_values: Vec<f64>,
    pub rank_tolerance: f64,
    pub rank: usize,
    pub dim_ker: usize,
    pub dim_coker: usize,
    pub index: i64,
    pub invertible: bool,
    pub spectral_gap: Option<f64>,
    pub classification: Vec<&'static str>,
    pub residuals: ReportResiduals,
    pub warnings: Vec<Warning>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportResiduals {
    /// `‖M q + B y_p - c‖`.
    pub least_squares: f64,
    pub solvability_tolerance: f64,
    pub solution: Option<Residuals>,
    pub kernel: Vec<Residuals>,
}

pub fn analyze(
    pf: &ProblemFile,
    problem: &BvpProblem,
    grid: &Grid,
    rank_tol: Option<f64>,
) -> Result<(Report, BvpSolution), Failure> {
    let solution = solve_with(problem, grid, rank_tol)?;
    let diagnostics = verify_solution(problem, &solution, grid)?;
    let cm = &solution.characteristic;
    let rep = &solution.report;
    let report = Report {
        problem_hash: pf.hash(),
        n_steps: grid.n_steps(),
        m: rep.m,
        r: rep.r,
        s: problem.s(),
        characteristic_matrix: (0..cm.r())
            .map(|i| {
                (0..cm.m())
                    .map(|j| [cm.matrix[(i, j)].re, cm.matrix[(i, j)].im])
                    .collect()
            })
            .collect(),
        singular_values: cm.singular_values.clone(),
        rank_tolerance: cm.rank_tolerance,
        rank: rep.rank,
        dim_ker: rep.dim_ker,
        dim_coker: rep.dim_coker,
        index: rep.index,
        invertible: rep.invertible,
        spectral_gap: rep.spectral_gap,
        classification: solution.labels(),
        residuals: ReportResiduals {
            least_squares: solution.residual_norm,
            solvability_tolerance: solution.solvability_tolerance,
            solution: diagnostics.solution,
            kernel: diagnostics.kernel,
        },
        warnings: rep.warnings.clone(),
    };
    ensure_finite("report", report.numbers())?;
    Ok((report, solution))
}

fn ensure_finite(what: &str, values: impl IntoIterator<Item = f64>) -> Result<(), Failure> {
    if values.into_iter().all(f64::is_finite) {
        Ok(())
    } else {
        Err(Failure::new(
            EXIT_NUMERICAL,
            format!("non-finite value in {what}"),
        ))
    }
}

impl Report {
    fn numbers(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .characteristic_matrix
            .iter()
            .flatten()
            .flatten()
            .copied()
            .collect();
        v.extend(&self.singular_values);
        v.push(self.rank_tolerance);
        v.extend(self.spectral_gap);
        v.push(self.residuals.least_squares);
        v.push(self.residuals.solvability_tolerance);
        for r in self.residuals.solution.iter().chain(&self.residuals.kernel) {
            v.extend([r.ode, r.boundary]);
        }
        v
    }
}

impl ConvergeReport {
    fn numbers(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .trace
            .records
            .iter()
            .flat_map(|r| [r.eps, r.norm_a_diff, r.norm_b_diff, r.norm_m_diff])
            .collect();
        v.extend(self.matrix_ratio);
        v.extend([
            self.hypothesis.first_distance,
            self.hypothesis.last_distance,
        ]);
        v
    }
}

fn emit_report(report: &Report, json: bool, w: &mut dyn Write) -> Result<(), Failure> {
    if json {
        serde_json::to_writer_pretty(&mut *w, report)
            .map_err(|e| Failure::new(EXIT_IO, e.to_string()))?;
        writeln!(w)?;
    } else {
        w.write_all(render_report(report).as_bytes())?;
    }
    Ok(())
}

pub fn render_report(r: &Report) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    let _ = writeln!(s, "problem_hash      {}", r.problem_hash);
    let _ = writeln!(s, "n_steps           {}", r.n_steps);
    let _ = writeln!(s, "m r s             {} {} {}", r.m, r.r, r.s);
    let _ = writeln!(s, "characteristic matrix M ({}x{}):", r.r, r.m);
    for row in &r.characteristic_matrix {
        let cells: Vec<String> = row
            .iter()
            .map(|[re, im]| format!("{re:+.12e}{im:+.12e}i"))
            .collect();
        let _ = writeln!(s, "  [{}]", cells.join(", "));
    }
    let sv: Vec<String> = r
        .singular_values
        .iter()
        .map(|x| format!("{x:.6e}"))
        .collect();
    let _ = writeln!(s, "singular_values   {}", sv.join(" "));
    let _ = writeln!(s, "rank_tolerance    {:.3e}", r.rank_tolerance);
    let _ = writeln!(s, "rank              {}", r.rank);
    let _ = writeln!(s, "dim_ker           {}", r.dim_ker);
    let _ = writeln!(s, "dim_coker         {}", r.dim_coker);
    let _ = writeln!(s, "index             {}", r.index);
    let _ = writeln!(s, "invertible        {}", r.invertible);
    match r.spectral_gap {
        Some(g) => _ = writeln!(s, "spectral_gap      {g:.6e}"),
        None => _ = writeln!(s, "spectral_gap      unbounded"),
    }
    let _ = writeln!(s, "classification    {}", r.classification.join(" "));
    let res = &r.residuals;
    let _ = writeln!(
        s,
        "least_squares     {:.6e} (tolerance {:.3e})",
        res.least_squares, res.solvability_tolerance
    );
    if let Some(sol) = res.solution {
        let _ = writeln!(
            s,
            "solution residual ode {:.3e} boundary {:.3e}",
            sol.ode, sol.boundary
        );
    }
    for (i, k) in res.kernel.iter().enumerate() {
        let _ = writeln!(
            s,
            "kernel[{i}] residual ode {:.3e} boundary {:.3e}",
            k.ode, k.boundary
        );
    }
    if r.warnings.is_empty() {
        let _ = writeln!(s, "warnings          none");
    }
    for w in &r.warnings {
        match w {
            Warning::RankUnstable { spectral_gap } => {
                _ = writeln!(
                    s,
                    "warning           RankUnstable (spectral gap {spectral_gap:.3e})"
                )
            }
        }
    }
    s
}

/// CSV of the solution (when it exists) and each kernel basis function.
pub fn solution_csv(grid: &Grid, solution: &BvpSolution) -> String {
    use std::fmt::Write as _;
    let mut columns: Vec<(String, &GridVectorFunction)> = Vec::new();
    if let Some(y) = &solution.particular {
        columns.push((String::new(), y));
    }
    for (i, k) in solution.kernel_basis.iter().enumerate() {
        columns.push((format!("ker{}_", i + 1), k));
    }
    let mut s = String::from("t");
    for (prefix, f) in &columns {
        for j in 1..=f.dim() {
            let _ = write!(s, ",{prefix}re_y{j},{prefix}im_y{j}");
        }
    }
    s.push('\n');
    for (i, t) in grid.nodes().iter().enumerate() {
        let _ = write!(s, "{t:e}");
        for (_, f) in &columns {
            for z in f.level(0)[i].iter() {
                let _ = write!(s, ",{:e},{:e}", z.re, z.im);
            }
        }
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergeReport {
    pub problem_hash: String,
    pub n_steps: usize,
    pub trace: ConvergenceTrace,
    pub matrix_ratio: Option<f64>,
    pub semicontinuity: SemicontinuityVerdict,
    pub hypothesis: HypothesisCheck,
}

fn emit_converge(r: &ConvergeReport, json: bool, w: &mut dyn Write) -> Result<(), Failure> {
    if json {
        serde_json::to_writer_pretty(&mut *w, r)
            .map_err(|e| Failure::new(EXIT_IO, e.to_string()))?;
        writeln!(w)?;
        return Ok(());
    }
    writeln!(w, "problem_hash      {}", r.problem_hash)?;
    let b = &r.trace.base_report;
    writeln!(
        w,
        "base              rank {} dim_ker {} dim_coker {} invertible {}",
        b.rank, b.dim_ker, b.dim_coker, b.invertible
    )?;
    match r.matrix_ratio {
        Some(x) => writeln!(w, "matrix_ratio      {x:.6e}")?,
        None => writeln!(w, "matrix_ratio      undefined")?,
    }
    let v = &r.semicontinuity;
    match v.k_star {
        Some(k) => writeln!(w, "k_star            {k}")?,
        None => writeln!(w, "k_star            none")?,
    }
    writeln!(
        w,
        "semicontinuity    {}",
        if v.holds() { "holds" } else { "violated" }
    )?;
    writeln!(w, "rank_monotone     {}", v.rank_monotone)?;
    writeln!(
        w,
        "invertibility     {}",
        if v.invertibility_preserved {
            "preserved"
        } else {
            "not preserved"
        }
    )?;
    writeln!(
        w,
        "hypothesis        {} (first {:.3e}, last {:.3e})",
        if r.hypothesis.holds {
            "holds"
        } else {
            "rejected"
        },
        r.hypothesis.first_distance,
        r.hypothesis.last_distance
    )?;
    Ok(())
}
