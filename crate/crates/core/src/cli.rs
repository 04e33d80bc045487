//! Batch command-line front end.
//!
//! JSON goes to stdout, diagnostics to stderr. Exit codes: 0 success,
//! 1 usage error, 2 unsolved, 3 validation failure (bad expression, `f` not
//! vanishing on degenerate segments, failed invariant), 4 other errors.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use serde::Serialize;

use crate::cascade::{self, CascadeStack};
use crate::error::Error;
use crate::mvf::{self, nearest_level};
use crate::oracle;
use crate::segfunc::{self, SegmentFunction, DIAGONAL_TOL};
use crate::solver::{self, SolveConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_UNSOLVED: i32 = 2;
pub const EXIT_INVALID: i32 = 3;
pub const EXIT_ERROR: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Solve,
    Oracle,
    Verify,
    Slices,
}

#[derive(Debug, Parser)]
#[command(name = "equipart", version, about = "Equal-value partitions of [0,1] under a segment function")]
struct Args {
    /// Segment function as an expression in a and b, e.g. "sin(3*(b-a))*cos(a+b)".
    #[arg(long = "f", value_name = "EXPR", conflicts_with = "family")]
    expr: Option<String>,
    /// Built-in family: additive, uniform or oscillatory.
    #[arg(long)]
    family: Option<String>,
    /// Family parameter, repeatable: density=<expr in t>, freq=<x>, phase=<x>.
    #[arg(long = "param", value_name = "KEY=VALUE", requires = "family")]
    params: Vec<String>,
    /// Number of parts.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..))]
    m: u32,
    /// Segment-axis grid resolution (power of two).
    #[arg(long, default_value_t = 256)]
    grid_n: usize,
    /// Level-axis grid resolution (power of two).
    #[arg(long, default_value_t = 256)]
    grid_m: usize,
    /// Zero band of the first graph (default 4/M plus the grid modulus of f).
    #[arg(long)]
    band: Option<f64>,
    /// Newton tolerance on max |f(I_i) - y|.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = Mode::Solve)]
    mode: Mode,
    /// Output file (solve, oracle, verify) or file prefix (slices).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized components.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Grid for the exhaustive oracle (m ≤ 3).
    #[arg(long, default_value_t = 400)]
    oracle_grid: usize,
    /// Starts for the multistart oracle (m ≥ 4).
    #[arg(long, default_value_t = 50)]
    starts: usize,
    /// Coordinate sweeps per multistart run.
    #[arg(long, default_value_t = 400)]
    sweeps: usize,
    /// Extra levels to dump in slices mode, repeatable.
    #[arg(long = "slice-k")]
    slice_k: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionSpec {
    Expression(String),
    Family {
        name: String,
        params: BTreeMap<String, String>,
    },
}

impl FunctionSpec {
    pub fn build(&self) -> crate::Result<SegmentFunction> {
        match self {
            FunctionSpec::Expression(text) => SegmentFunction::parse_expression(text),
            FunctionSpec::Family { name, params } => SegmentFunction::family(name, params),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSpec {
    pub function: FunctionSpec,
    pub m: usize,
    pub config: SolveConfig,
    pub mode: Mode,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub threads: Option<usize>,
    pub oracle_grid: usize,
    pub starts: usize,
    pub sweeps: usize,
    pub slice_levels: Vec<usize>,
}

/// Usage error, or help/version text that should exit successfully.
#[derive(Debug)]
pub struct UsageError {
    pub message: String,
    pub exit_code: i32,
}

pub fn parse_args<I, T>(argv: I) -> Result<RunSpec, UsageError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = Args::try_parse_from(argv).map_err(|e| UsageError {
        message: e.render().to_string(),
        exit_code: if e.use_stderr() { EXIT_USAGE } else { EXIT_OK },
    })?;
    let usage = |message: String| UsageError {
        message,
        exit_code: EXIT_USAGE,
    };
    let function = match (args.expr, args.family) {
        (Some(text), None) => FunctionSpec::Expression(text),
        (None, Some(name)) => {
            let mut params = BTreeMap::new();
            for p in &args.params {
                let (k, v) = p
                    .split_once('=')
                    .ok_or_else(|| usage(format!("--param expects KEY=VALUE, got '{p}'")))?;
                let v = v.trim().trim_matches('"');
                params.insert(k.trim().to_string(), v.to_string());
            }
            FunctionSpec::Family { name, params }
        }
        (None, None) => return Err(usage("one of --f or --family is required".into())),
        (Some(_), Some(_)) => return Err(usage("--f and --family are mutually exclusive".into())),
    };
    if args.mode == Mode::Slices && args.out.is_none() {
        return Err(usage("--mode slices needs --out <prefix>".into()));
    }
    if args.threads == Some(0) {
        return Err(usage("--threads must be positive".into()));
    }
    let config = SolveConfig {
        grid_n: args.grid_n,
        grid_m: args.grid_m,
        band: args.band,
        tol: args.tol,
        ..SolveConfig::default()
    };
    config.validate().map_err(|e| usage(e.to_string()))?;
    Ok(RunSpec {
        function,
        m: args.m as usize,
        config,
        mode: args.mode,
        out: args.out,
        seed: args.seed,
        threads: args.threads,
        oracle_grid: args.oracle_grid,
        starts: args.starts,
        sweeps: args.sweeps,
        slice_levels: args.slice_k,
    })
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. }
        | Error::DiagonalViolation { .. }
        | Error::Evaluation { .. }
        | Error::Integration { .. }
        | Error::InvalidSegment { .. }
        | Error::Precondition(_)
        | Error::NotNice { .. }
        | Error::Degeneracy { .. } => EXIT_INVALID,
        Error::Unsolved(_) | Error::ResolutionTooCoarse { .. } => EXIT_UNSOLVED,
        Error::InvalidConfiguration(_) | Error::Internal(_) | Error::Io(_) | Error::Json(_) => EXIT_ERROR,
    }
}

/// Parses `argv` and runs; returns the process exit code.
pub fn main_with(argv: Vec<String>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    match parse_args(argv) {
        Ok(spec) => run(&spec, stdout, stderr),
        Err(e) => {
            let _ = write!(stderr, "{}", e.message);
            if !e.message.ends_with('\n') {
                let _ = writeln!(stderr);
            }
            e.exit_code
        }
    }
}

/// Runs one batch job; JSON goes to `stdout` (and `--out` when given).
pub fn run(spec: &RunSpec, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let mut log = Vec::new();
    let result = match spec.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(spec, &mut log)),
            Err(e) => Err(Error::Internal(format!("thread pool: {e}"))),
        },
        None => dispatch(spec, &mut log),
    };
    let _ = stderr.write_all(&log);
    match result {
        Ok((json, code)) => {
            let text = match serde_json::to_string_pretty(&json) {
                Ok(t) => t,
                Err(e) => {
                    let _ = writeln!(stderr, "error: {e}");
                    return EXIT_ERROR;
                }
            };
            let _ = writeln!(stdout, "{text}");
            if spec.mode != Mode::Slices {
                if let Some(path) = &spec.out {
                    if let Err(e) = std::fs::write(path, format!("{text}\n")) {
                        let _ = writeln!(stderr, "error: cannot write {}: {e}", path.display());
                        return EXIT_ERROR;
                    }
                }
            }
            code
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

type Outcome = crate::Result<(serde_json::Value, i32)>;

fn dispatch(spec: &RunSpec, stderr: &mut Vec<u8>) -> Outcome {
    let f = spec.function.build()?;
    f.validate_diagonal(1001, DIAGONAL_TOL)?;
    match spec.mode {
        Mode::Solve => run_solve(spec, &f, stderr),
        Mode::Oracle => run_oracle(spec, &f, stderr),
        Mode::Verify => run_verify(spec, &f, stderr),
        Mode::Slices => run_slices(spec, &f, stderr),
    }
}

fn run_solve(spec: &RunSpec, f: &SegmentFunction, stderr: &mut dyn Write) -> Outcome {
    let w = solver::solve(f, spec.m, &spec.config)?;
    let _ = writeln!(
        stderr,
        "m = {}: level {} of {}, {} Newton iterations, max residual {:e}{}",
        w.m,
        w.stats.level,
        w.stats.grid_m,
        w.stats.iterations,
        w.max_residual(),
        if w.converged { "" } else { " (not converged)" }
    );
    let code = if w.converged { EXIT_OK } else { EXIT_UNSOLVED };
    Ok((serde_json::to_value(&w)?, code))
}

fn run_oracle(spec: &RunSpec, f: &SegmentFunction, stderr: &mut dyn Write) -> Outcome {
    let r = if spec.m <= 3 {
        oracle::exhaustive(f, spec.m, spec.oracle_grid)?
    } else {
        let _ = writeln!(stderr, "m = {} > 3: multistart search (heuristic)", spec.m);
        oracle::multistart(f, spec.m, spec.starts, spec.sweeps, spec.seed)?
    };
    let _ = writeln!(stderr, "oracle objective {:e}", r.objective);
    Ok((serde_json::to_value(r.report(f)?)?, EXIT_OK))
}

#[derive(Debug, Serialize)]
struct Check {
    name: String,
    passed: bool,
    detail: String,
}

fn run_verify(spec: &RunSpec, f: &SegmentFunction, stderr: &mut dyn Write) -> Outcome {
    let mut checks = Vec::new();
    let mut push = |checks: &mut Vec<Check>, name: String, passed: bool, detail: String| {
        let _ = writeln!(stderr, "[{}] {name}: {detail}", if passed { "pass" } else { "FAIL" });
        checks.push(Check { name, passed, detail });
    };
    push(
        &mut checks,
        "diagonal".into(),
        true,
        format!("|f([a,a])| ≤ {DIAGONAL_TOL:e} at 1001 points"),
    );

    let (witness, stack) = solver::solve_with_stack(f, spec.m, &spec.config)?;
    for (s, z) in stack.graphs().iter().enumerate() {
        let sep = mvf::check_separation(z);
        push(
            &mut checks,
            format!("separation/stage{}", s + 1),
            sep.is_separated(),
            match &sep {
                mvf::Separation::Separated => format!("{} occupied cells", z.count()),
                mvf::Separation::Path(p) => format!("leak along {} cells", p.len()),
            },
        );
        let deg = mvf::check_degeneracy(z, stack.band());
        push(
            &mut checks,
            format!("degeneracy/stage{}", s + 1),
            deg.is_ok(),
            match deg {
                Ok(()) => format!("diagonal occupied iff |y| ≤ {:.6}", stack.band()),
                Err(e) => e.to_string(),
            },
        );
    }
    let audit = cascade::audit_witnesses(&stack, Some(200_000))?;
    push(
        &mut checks,
        "witness-soundness".into(),
        audit.failures == 0,
        format!("{} chains checked, {} unsound", audit.chains, audit.failures),
    );
    let spread = witness.max_pairwise(f)?;
    push(
        &mut checks,
        "equipartition".into(),
        witness.converged && spread <= 2.0 * spec.config.tol,
        format!("converged = {}, max pairwise difference {spread:e}", witness.converged),
    );
    let passed = checks.iter().all(|c| c.passed);
    let json = serde_json::json!({
        "m": spec.m,
        "passed": passed,
        "checks": checks,
        "witness": witness,
    });
    Ok((json, if passed { EXIT_OK } else { EXIT_INVALID }))
}

fn run_slices(spec: &RunSpec, f: &SegmentFunction, stderr: &mut dyn Write) -> Outcome {
    let prefix = spec.out.as_ref().expect("checked in parse_args");
    let rescaled = segfunc::rescale(f)?;
    let cfg = &spec.config;
    let stack: CascadeStack =
        cascade::build_cascade(&rescaled.function, spec.m, cfg.grid_n, cfg.grid_m, cfg.band)?;
    let mut levels = spec.slice_levels.clone();
    if levels.is_empty() {
        levels.push(match solver::find_level(&stack) {
            Ok(k) => k,
            Err(_) => nearest_level(0.0, stack.m()),
        });
    }
    if let Some(&k) = levels.iter().find(|&&k| k > stack.m()) {
        return Err(Error::Precondition(format!("level {k} outside 0..={}", stack.m())));
    }
    let mut files = Vec::new();
    for (s, z) in stack.graphs().iter().enumerate() {
        for &k in &levels {
            let path = PathBuf::from(format!("{}_stage{}_k{}.csv", prefix.display(), s + 1, k));
            let mut out = BufWriter::new(File::create(&path)?);
            z.write_level_csv(k, &mut out)?;
            out.flush()?;
            files.push(path.display().to_string());
        }
    }
    let _ = writeln!(stderr, "wrote {} slice files", files.len());
    let json = serde_json::json!({
        "m": spec.m,
        "levels": levels,
        "files": files,
        "stats": stack.stats(),
    });
    Ok((json, EXIT_OK))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<String> {
        std::iter::once("equipart".to_string())
            .chain(s.split_whitespace().map(String::from))
            .collect()
    }

    #[test]
    fn parse_family_with_density() {
        let spec = parse_args(vec!["equipart", "--family", "additive", "--param", "density=\"2*t\"", "--m", "3"]).unwrap();
        let mut params = BTreeMap::new();
        params.insert("density".to_string(), "2*t".to_string());
        assert_eq!(
            spec.function,
            FunctionSpec::Family {
                name: "additive".into(),
                params
            }
        );
        assert_eq!(spec.m, 3);
        assert_eq!(spec.mode, Mode::Solve);
    }

    #[test]
    fn usage_errors() {
        for bad in [
            "--f b-a --m 0",
            "--f b-a --family uniform",
            "--m 2",
            "--f b-a --bogus",
            "--f b-a --grid-n 100",
            "--f b-a --mode slices",
        ] {
            let e = parse_args(argv(bad)).unwrap_err();
            assert_eq!(e.exit_code, EXIT_USAGE, "{bad}");
        }
    }
}
