//! Segments of `[0,1]` and continuous functions on them.

mod expr;
mod quad;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Triangle, TriangleTable};

pub use expr::{BinOp, DomainError, Env, Expr, Func, Var};
pub use quad::{integrate_density, try_integrate_density};

/// Default tolerance for `|f([a,a])|` on user expressions.
pub const DIAGONAL_TOL: f64 = 1e-9;
/// Grid used to estimate `sup |f|` before rescaling.
pub const RANGE_GRID: usize = 512;
/// Added to the range bound so rescaled values stay strictly inside (-1, 1).
pub const RESCALE_MARGIN: f64 = 0.01;
/// Quadrature tolerance for the additive family.
pub const DENSITY_TOL: f64 = 1e-12;

/// A closed, possibly degenerate subsegment `[a, b]` of `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "(f64, f64)", into = "(f64, f64)")]
pub struct Segment {
    a: f64,
    b: f64,
}

impl Segment {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || a > b {
            return Err(Error::InvalidSegment { a, b });
        }
        Ok(Segment { a, b })
    }

    pub fn degenerate(x: f64) -> Result<Self> {
        Segment::new(x, x)
    }

    pub fn unit() -> Self {
        Segment { a: 0.0, b: 1.0 }
    }

    #[inline]
    pub fn a(&self) -> f64 {
        self.a
    }

    #[inline]
    pub fn b(&self) -> f64 {
        self.b
    }

    #[inline]
    pub fn len(&self) -> f64 {
        self.b - self.a
    }

    #[inline]
    pub fn is_degenerate(&self) -> bool {
        self.a == self.b
    }
}

impl TryFrom<(f64, f64)> for Segment {
    type Error = Error;
    fn try_from((a, b): (f64, f64)) -> Result<Self> {
        Segment::new(a, b)
    }
}

impl From<Segment> for (f64, f64) {
    fn from(s: Segment) -> Self {
        (s.a, s.b)
    }
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.a, self.b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionKind {
    AdditiveFromDensity,
    Oscillatory,
    Expression,
    Composite,
}

/// Density of an additive segment function.
#[derive(Clone)]
pub enum Density {
    Expression(Expr),
    Fn(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Density {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(Density::Expression(Expr::parse(text, &[Var::T])?))
    }

    fn eval(&self, t: f64) -> Result<f64, DomainError> {
        match self {
            Density::Expression(e) => e.eval(&Env { a: 0.0, b: 0.0, t }),
            Density::Fn(g) => {
                let v = g(t);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(DomainError(format!("non-finite density {v}")))
                }
            }
        }
    }
}

impl fmt::Debug for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Density::Expression(e) => write!(f, "Density({e})"),
            Density::Fn(_) => f.write_str("Density(<fn>)"),
        }
    }
}

#[derive(Debug, Clone)]
enum Repr {
    Additive { density: Density, tol: f64 },
    /// `sin(2π·freq·(b−a)) · cos(π·phase·(a+b))`
    Oscillatory { freq: f64, phase: f64 },
    Expression(Expr),
    Composite(Vec<(f64, SegmentFunction)>),
}

#[derive(Debug)]
struct Inner {
    kind: FunctionKind,
    repr: Repr,
    scale: f64,
    range_bound: OnceLock<f64>,
}

/// A continuous function on segments, vanishing on degenerate segments.
///
/// Cheap to clone; immutable and safe to share between threads.
#[derive(Debug, Clone)]
pub struct SegmentFunction {
    inner: Arc<Inner>,
}

impl SegmentFunction {
    fn build(kind: FunctionKind, repr: Repr, scale: f64) -> Self {
        SegmentFunction {
            inner: Arc::new(Inner {
                kind,
                repr,
                scale,
                range_bound: OnceLock::new(),
            }),
        }
    }

    /// Additive function `f([a,b]) = ∫_a^b g(t) dt`.
    pub fn additive(density: Density) -> Self {
        Self::build(
            FunctionKind::AdditiveFromDensity,
            Repr::Additive {
                density,
                tol: DENSITY_TOL,
            },
            1.0,
        )
    }

    /// Additive function with density given as an expression in `t`.
    pub fn additive_expr(text: &str) -> Result<Self> {
        Ok(Self::additive(Density::parse(text)?))
    }

    /// `sin(2π·freq·(b−a)) · cos(π·phase·(a+b))`.
    pub fn oscillatory(freq: f64, phase: f64) -> Self {
        Self::build(FunctionKind::Oscillatory, Repr::Oscillatory { freq, phase }, 1.0)
    }

    /// Weighted sum of other segment functions.
    pub fn composite(terms: Vec<(f64, SegmentFunction)>) -> Self {
        Self::build(FunctionKind::Composite, Repr::Composite(terms), 1.0)
    }

    /// Parses `f(a, b)` from text. Diagonal validation is separate, see
    /// [`SegmentFunction::validate_diagonal`].
    pub fn parse_expression(text: &str) -> Result<Self> {
        let e = Expr::parse(text, &[Var::A, Var::B])?;
        Ok(Self::build(FunctionKind::Expression, Repr::Expression(e), 1.0))
    }

    /// Builds a function from a family name and `key=value` parameters, as
    /// accepted by the command line.
    pub fn family(name: &str, params: &BTreeMap<String, String>) -> Result<Self> {
        let num = |key: &str, default: f64| -> Result<f64> {
            match params.get(key) {
                None => Ok(default),
                Some(v) => v.trim().parse::<f64>().map_err(|_| {
                    Error::Precondition(format!("parameter {key}={v} is not a number"))
                }),
            }
        };
        let check_keys = |allowed: &[&str]| -> Result<()> {
            match params.keys().find(|k| !allowed.contains(&k.as_str())) {
                Some(k) => Err(Error::Precondition(format!(
                    "unknown parameter '{k}' for family '{name}'"
                ))),
                None => Ok(()),
            }
        };
        match name {
            "additive" => {
                check_keys(&["density"])?;
                let density = params.get("density").map(String::as_str).unwrap_or("1");
                Self::additive_expr(density)
            }
            "uniform" => {
                check_keys(&[])?;
                Self::additive_expr("1")
            }
            "oscillatory" => {
                check_keys(&["freq", "phase"])?;
                Ok(Self::oscillatory(num("freq", 1.0)?, num("phase", 1.0)?))
            }
            other => Err(Error::Precondition(format!(
                "unknown family '{other}' (expected additive, uniform or oscillatory)"
            ))),
        }
    }

    pub fn kind(&self) -> FunctionKind {
        self.inner.kind
    }

    /// Cumulative positive factor applied by [`SegmentFunction::scaled`].
    pub fn scale(&self) -> f64 {
        self.inner.scale
    }

    /// `factor · f`, with the same kind. `factor` must be positive.
    pub fn scaled(&self, factor: f64) -> Self {
        assert!(factor > 0.0 && factor.is_finite(), "scale factor must be positive");
        Self::build(self.inner.kind, self.inner.repr.clone(), self.inner.scale * factor)
    }

    /// Whether the function is one of the built-in families (possibly
    /// combined), which vanish on degenerate segments by construction.
    pub fn is_builtin(&self) -> bool {
        match &self.inner.repr {
            Repr::Additive { .. } | Repr::Oscillatory { .. } => true,
            Repr::Expression(_) => false,
            Repr::Composite(terms) => terms.iter().all(|(_, f)| f.is_builtin()),
        }
    }

    /// Text form of the underlying expression, if any.
    pub fn describe(&self) -> String {
        let base = match &self.inner.repr {
            Repr::Additive { density, .. } => match density {
                Density::Expression(e) => format!("additive(density = {e})"),
                Density::Fn(_) => "additive(<fn>)".to_string(),
            },
            Repr::Oscillatory { freq, phase } => {
                format!("sin(2*pi*{freq:?}*(b-a))*cos(pi*{phase:?}*(a+b))")
            }
            Repr::Expression(e) => e.to_string(),
            Repr::Composite(terms) => terms
                .iter()
                .map(|(w, f)| format!("{w:?}*[{}]", f.describe()))
                .collect::<Vec<_>>()
                .join(" + "),
        };
        if self.inner.scale == 1.0 {
            base
        } else {
            format!("{:?}*[{base}]", self.inner.scale)
        }
    }

    pub fn eval(&self, s: Segment) -> Result<f64> {
        Ok(self.inner.scale * self.raw(s.a, s.b)?)
    }

    /// Evaluates on `[a, b]` without the segment check; callers guarantee
    /// `0 ≤ a ≤ b ≤ 1`.
    pub(crate) fn value(&self, a: f64, b: f64) -> Result<f64> {
        debug_assert!(a <= b, "[{a}, {b}]");
        Ok(self.inner.scale * self.raw(a, b)?)
    }

    fn raw(&self, a: f64, b: f64) -> Result<f64> {
        let domain = |e: DomainError| Error::Evaluation {
            a,
            b,
            message: e.0,
        };
        match &self.inner.repr {
            Repr::Additive { density, tol } => {
                if a == b {
                    return Ok(0.0);
                }
                let s = Segment { a, b };
                try_integrate_density(|t| density.eval(t).map_err(domain), s, *tol)
            }
            Repr::Oscillatory { freq, phase } => {
                Ok((2.0 * PI * freq * (b - a)).sin() * (PI * phase * (a + b)).cos())
            }
            Repr::Expression(e) => e.eval(&Env { a, b, t: 0.0 }).map_err(domain),
            Repr::Composite(terms) => {
                let mut sum = 0.0;
                for (w, f) in terms {
                    sum += w * f.value(a, b)?;
                }
                Ok(sum)
            }
        }
    }

    /// Values on all grid segments `[i/n, j/n]`, `i ≤ j`.
    ///
    /// Additive functions are tabulated from per-cell integrals and prefix
    /// sums, so their diagonal is exactly zero.
    pub fn tabulate(&self, n: usize) -> Result<TriangleTable> {
        assert!(n >= 1);
        let tri = Triangle::new(n);
        if let Repr::Additive { .. } = self.inner.repr {
            let cells = (0..n)
                .into_par_iter()
                .map(|i| self.value(tri.x(i), tri.x(i + 1)))
                .collect::<Result<Vec<_>>>()?;
            let mut prefix = Vec::with_capacity(n + 1);
            prefix.push(0.0);
            for c in &cells {
                prefix.push(prefix.last().unwrap() + c);
            }
            let values = tri.cells().map(|(i, j)| prefix[j] - prefix[i]).collect();
            return Ok(TriangleTable::from_values(tri, values));
        }
        let rows = (0..=n)
            .into_par_iter()
            .map(|i| {
                (i..=n)
                    .map(|j| self.value(tri.x(i), tri.x(j)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TriangleTable::from_values(tri, rows.concat()))
    }

    /// Estimated `sup |f|` over a `grid × grid` triangular sample.
    pub fn estimate_range_bound(&self, grid: usize) -> Result<f64> {
        Ok(self.tabulate(grid)?.max_abs())
    }

    /// Cached [`SegmentFunction::estimate_range_bound`] at [`RANGE_GRID`].
    pub fn range_bound(&self) -> Result<f64> {
        if let Some(v) = self.inner.range_bound.get() {
            return Ok(*v);
        }
        let v = self.estimate_range_bound(RANGE_GRID)?;
        Ok(*self.inner.range_bound.get_or_init(|| v))
    }

    /// Checks `|f([a,a])| ≤ tol` at `samples` equispaced points of `[0,1]`.
    pub fn validate_diagonal(&self, samples: usize, tol: f64) -> Result<()> {
        if samples < 2 {
            return Err(Error::Precondition("validate_diagonal needs at least 2 samples".into()));
        }
        let mut worst = (0.0, 0.0_f64);
        for s in 0..samples {
            let a = s as f64 / (samples - 1) as f64;
            let v = self.value(a, a)?;
            if v.abs() > worst.1.abs() {
                worst = (a, v);
            }
        }
        if worst.1.abs() > tol {
            return Err(Error::DiagonalViolation {
                a: worst.0,
                value: worst.1,
                tol,
            });
        }
        Ok(())
    }
}

/// Rescaled function and the factor applied to it.
#[derive(Debug, Clone)]
pub struct Rescaled {
    pub function: SegmentFunction,
    pub factor: f64,
}

/// Scales `f` by `1 / (range_bound + margin)` when that bound exceeds one, so
/// that sampled values lie strictly inside (-1, 1). Equal-value partitions are
/// unaffected by a positive factor.
pub fn rescale(f: &SegmentFunction) -> Result<Rescaled> {
    rescale_with(f, f.range_bound()?, RESCALE_MARGIN)
}

pub fn rescale_with(f: &SegmentFunction, range_bound: f64, margin: f64) -> Result<Rescaled> {
    let denom = range_bound + margin;
    if range_bound == 0.0 || denom <= 1.0 {
        return Ok(Rescaled {
            function: f.clone(),
            factor: 1.0,
        });
    }
    let factor = 1.0 / denom;
    Ok(Rescaled {
        function: f.scaled(factor),
        factor,
    })
}

/// `φ([a,b], y) = y − f([a,b])`, with `φ([a,a], y) = y` exactly.
#[derive(Debug, Clone)]
pub struct PhiFunction {
    base: SegmentFunction,
}

impl PhiFunction {
    pub fn new(base: SegmentFunction) -> Self {
        PhiFunction { base }
    }

    pub fn base(&self) -> &SegmentFunction {
        &self.base
    }

    pub fn eval(&self, s: Segment, y: f64) -> Result<f64> {
        if s.is_degenerate() {
            return Ok(y);
        }
        Ok(y - self.base.eval(s)?)
    }
}
