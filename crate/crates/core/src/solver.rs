//! End-to-end equipartition: cascade, level choice, unwinding, Newton polish.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cascade::{self, CascadeStack, StackStats};
use crate::error::{Error, Result};
use crate::mvf::level;
use crate::segfunc::{self, SegmentFunction, DIAGONAL_TOL};

/// Samples used when validating `f` on degenerate segments before solving.
const DIAGONAL_SAMPLES: usize = 1001;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    /// Segment-axis resolution `N` (power of two).
    pub grid_n: usize,
    /// Level-axis resolution `M` (power of two).
    pub grid_m: usize,
    /// Zero band of the first graph; `None` picks `4/M + ω`.
    pub band: Option<f64>,
    /// Target `max |f(I_i) − y|` in the units of `f`.
    pub tol: f64,
    pub max_iter: usize,
    /// Central finite-difference step for the Jacobian.
    pub fd_step: f64,
    /// How many occupied levels to polish before giving up.
    pub max_candidates: usize,
    /// Double `N` and `M` once when the grid is too coarse.
    pub retry: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            grid_n: 256,
            grid_m: 256,
            band: None,
            tol: 1e-10,
            max_iter: 50,
            fd_step: 1e-6,
            max_candidates: 16,
            retry: true,
        }
    }
}

impl SolveConfig {
    pub fn with_grid(mut self, n: usize, m: usize) -> Self {
        self.grid_n = n;
        self.grid_m = m;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let pow2 = |v: usize| v >= 2 && v.is_power_of_two();
        if !pow2(self.grid_n) || !pow2(self.grid_m) {
            return Err(Error::Precondition(format!(
                "grid sizes must be powers of two ≥ 2, got N = {}, M = {}",
                self.grid_n, self.grid_m
            )));
        }
        if self.band.is_some_and(|b| !(b > 0.0 && b.is_finite())) {
            return Err(Error::Precondition("band must be positive".into()));
        }
        if !(self.tol > 0.0 && self.fd_step > 0.0 && self.max_iter > 0 && self.max_candidates > 0) {
            return Err(Error::Precondition(
                "tolerance, step, iteration and candidate limits must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Diagnostics attached to a witness.
#[derive(Debug, Clone, Serialize)]
pub struct SolveStats {
    pub grid_n: usize,
    pub grid_m: usize,
    pub band: f64,
    pub scale_factor: f64,
    /// Chosen level index and its scaled value.
    pub level: usize,
    pub level_value: f64,
    pub grid_cuts: Vec<usize>,
    pub grid_residual: f64,
    pub iterations: usize,
    pub candidates_tried: usize,
    pub retried: bool,
    pub stack: StackStats,
}

/// Cuts `0 < x_1 ≤ … ≤ x_{m−1} < 1` (interior only), the common value, and
/// per-part residuals `f(I_i) − y` in the units of `f`.
#[derive(Debug, Clone, Serialize)]
pub struct PartitionWitness {
    pub m: usize,
    pub cuts: Vec<f64>,
    pub y: f64,
    pub y_scaled: f64,
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub method: String,
    pub config: SolveConfig,
    pub stats: SolveStats,
}

impl PartitionWitness {
    /// `0, x_1, …, x_{m−1}, 1`.
    pub fn boundaries(&self) -> Vec<f64> {
        boundaries(&self.cuts)
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    /// `max_{i,j} |f(I_i) − f(I_j)|`, re-evaluated from scratch.
    pub fn max_pairwise(&self, f: &SegmentFunction) -> Result<f64> {
        spread(f, &self.cuts)
    }
}

pub(crate) fn boundaries(cuts: &[f64]) -> Vec<f64> {
    let mut b = Vec::with_capacity(cuts.len() + 2);
    b.push(0.0);
    b.extend_from_slice(cuts);
    b.push(1.0);
    b
}

/// Part values for interior cuts.
pub fn part_values(f: &SegmentFunction, cuts: &[f64]) -> Result<Vec<f64>> {
    boundaries(cuts)
        .windows(2)
        .map(|w| f.eval(segfunc::Segment::new(w[0], w[1])?))
        .collect()
}

/// `max − min` of the part values.
pub fn spread(f: &SegmentFunction, cuts: &[f64]) -> Result<f64> {
    let v = part_values(f, cuts)?;
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(hi - lo)
}

/// Best occupied level of the top graph at the full segment.
pub fn find_level(stack: &CascadeStack) -> Result<usize> {
    Ok(cascade::rank_levels(stack)?[0].0)
}

/// Interior grid cut indices at level `k`.
pub fn unwind(stack: &CascadeStack, k: usize) -> Result<Vec<usize>> {
    let points = cascade::unwind_points(stack, k)?;
    Ok(points[1..points.len() - 1].to_vec())
}

/// Result of [`polish`].
#[derive(Debug, Clone)]
pub struct Polished {
    pub cuts: Vec<f64>,
    pub y: f64,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl Polished {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

/// Euclidean projection onto `0 ≤ x_1 ≤ … ≤ x_k ≤ 1`: pool-adjacent-violators
/// isotonic regression followed by clamping.
pub fn project_ordered(x: &mut [f64]) {
    // Blocks of (sum, count).
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(x.len());
    for &v in x.iter() {
        blocks.push((v, 1));
        while blocks.len() >= 2 {
            let (s2, c2) = blocks[blocks.len() - 1];
            let (s1, c1) = blocks[blocks.len() - 2];
            if s1 / c1 as f64 > s2 / c2 as f64 {
                blocks.pop();
                *blocks.last_mut().unwrap() = (s1 + s2, c1 + c2);
            } else {
                break;
            }
        }
    }
    let mut pos = 0;
    for (s, c) in blocks {
        let v = (s / c as f64).clamp(0.0, 1.0);
        x[pos..pos + c].iter_mut().for_each(|e| *e = v);
        pos += c;
    }
}

/// `f` on `[a, b]`, continued by `−f([b, a])` when `a > b` and clamped into
/// `[0, 1]`; used only for difference quotients.
fn extended(f: &SegmentFunction, a: f64, b: f64) -> Result<f64> {
    let (a, b) = (a.clamp(0.0, 1.0), b.clamp(0.0, 1.0));
    if a <= b {
        f.value(a, b)
    } else {
        Ok(-f.value(b, a)?)
    }
}

fn residuals(f: &SegmentFunction, cuts: &[f64], y: f64) -> Result<Vec<f64>> {
    Ok(part_values(f, cuts)?.into_iter().map(|v| v - y).collect())
}

fn norm(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn max_abs(r: &[f64]) -> f64 {
    r.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Damped Newton on `r_i(x, y) = f([x_{i−1}, x_i]) − y`, `i = 1..m`, with a
/// central-difference Jacobian, step halving until the residual norm drops,
/// and projection of the cuts onto the ordered simplex after every step.
pub fn polish(f: &SegmentFunction, cuts: &[f64], y: f64, cfg: &SolveConfig) -> Result<Polished> {
    let m = cuts.len() + 1;
    let mut x = cuts.to_vec();
    project_ordered(&mut x);
    let mut y = y;
    let mut r = residuals(f, &x, y)?;
    let mut iterations = 0;
    let h = cfg.fd_step;

    while max_abs(&r) > cfg.tol && iterations < cfg.max_iter {
        iterations += 1;
        let pts = boundaries(&x);
        let mut jac = DMatrix::<f64>::zeros(m, m);
        for c in 0..m - 1 {
            // Cut c is boundary point c + 1: right end of part c, left end of part c + 1.
            let p = c + 1;
            let (lo, hi) = ((pts[p] - h).max(0.0), (pts[p] + h).min(1.0));
            let width = hi - lo;
            if width <= 0.0 {
                continue;
            }
            let left = extended(f, pts[p - 1], hi)? - extended(f, pts[p - 1], lo)?;
            let right = extended(f, hi, pts[p + 1])? - extended(f, lo, pts[p + 1])?;
            jac[(c, c)] = left / width;
            jac[(c + 1, c)] = right / width;
        }
        for i in 0..m {
            jac[(i, m - 1)] = -1.0;
        }
        let rhs = -DVector::from_column_slice(&r);
        let step = match jac.clone().lu().solve(&rhs) {
            Some(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => jac
                .svd(true, true)
                .solve(&rhs, 1e-14)
                .map_err(|e| Error::Internal(format!("least-squares step failed: {e}")))?,
        };

        let current = norm(&r);
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut xn: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + lambda * d).collect();
            project_ordered(&mut xn);
            let yn = y + lambda * step[m - 1];
            let rn = residuals(f, &xn, yn)?;
            if norm(&rn) < current {
                accepted = Some((xn, yn, rn));
                break;
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((xn, yn, rn)) => {
                x = xn;
                y = yn;
                r = rn;
            }
            None => break,
        }
    }
    let converged = max_abs(&r) <= cfg.tol;
    Ok(Polished {
        cuts: x,
        y,
        residuals: r,
        iterations,
        converged,
    })
}

/// Solves and also returns the cascade stack that produced the witness.
pub fn solve_with_stack(
    f: &SegmentFunction,
    m: usize,
    cfg: &SolveConfig,
) -> Result<(PartitionWitness, CascadeStack)> {
    cfg.validate()?;
    if m == 0 {
        return Err(Error::Precondition("m must be at least 1".into()));
    }
    f.validate_diagonal(DIAGONAL_SAMPLES, DIAGONAL_TOL)?;
    let rescaled = segfunc::rescale(f)?;

    let (stack, retried) = match build(&rescaled.function, m, cfg.grid_n, cfg.grid_m, cfg.band) {
        Ok(s) => (s, false),
        Err(first @ Error::ResolutionTooCoarse { .. }) => {
            if !cfg.retry {
                return Err(Error::Unsolved(first.to_string()));
            }
            match build(&rescaled.function, m, 2 * cfg.grid_n, 2 * cfg.grid_m, cfg.band) {
                Ok(s) => (s, true),
                Err(second @ Error::ResolutionTooCoarse { .. }) => {
                    return Err(Error::Unsolved(format!(
                        "{first}; after doubling to N = {}, M = {}: {second}",
                        2 * cfg.grid_n,
                        2 * cfg.grid_m
                    )))
                }
                Err(e) => return Err(e),
            }
        }
        Err(e) => return Err(e),
    };
    let ranked = cascade::rank_levels(&stack)?;

    let factor = rescaled.factor;
    let (n_grid, m_grid) = (stack.n(), stack.m());
    let mut best: Option<(Polished, usize, Vec<usize>, f64)> = None;
    let mut tried = 0;
    'levels: for &(k, grid_residual) in ranked.iter().take(cfg.max_candidates) {
        tried += 1;
        let tight = cascade::tightest_points(&stack, k)?.0;
        let tight = tight[1..tight.len() - 1].to_vec();
        let witnessed = unwind(&stack, k)?;
        let starts = if witnessed == tight { vec![tight] } else { vec![tight, witnessed] };
        for grid_cuts in starts {
            let cuts: Vec<f64> = grid_cuts.iter().map(|&t| t as f64 / n_grid as f64).collect();
            let y0 = level(k, m_grid) / factor;
            let p = polish(f, &cuts, y0, cfg)?;
            let better = best
                .as_ref()
                .is_none_or(|(b, ..)| p.max_residual() < b.max_residual());
            let done = p.converged;
            if better {
                best = Some((p, k, grid_cuts, grid_residual));
            }
            if done {
                break 'levels;
            }
        }
    }
    let (p, k, grid_cuts, grid_residual) = best.expect("at least one candidate level");
    let witness = PartitionWitness {
        m,
        cuts: p.cuts.clone(),
        y: p.y,
        y_scaled: p.y * factor,
        residuals: p.residuals.clone(),
        converged: p.converged,
        method: "cascade".into(),
        config: *cfg,
        stats: SolveStats {
            grid_n: n_grid,
            grid_m: m_grid,
            band: stack.band(),
            scale_factor: factor,
            level: k,
            level_value: level(k, m_grid),
            grid_cuts,
            grid_residual,
            iterations: p.iterations,
            candidates_tried: tried,
            retried,
            stack: stack.stats(),
        },
    };
    Ok((witness, stack))
}

fn build(f: &SegmentFunction, m: usize, n: usize, levels: usize, band: Option<f64>) -> Result<CascadeStack> {
    let stack = cascade::build_cascade(f, m, n, levels, band)?;
    if stack.top().levels(0, n).is_empty() {
        return Err(Error::ResolutionTooCoarse {
            stage: stack.graphs().len(),
            detail: "no level is occupied at the full segment".into(),
        });
    }
    Ok(stack)
}

/// Equipartition of `[0, 1]` into `m` possibly degenerate parts of equal
/// `f`-value. When Newton does not converge from any candidate level, the
/// best iterate is returned with `converged = false`.
pub fn solve(f: &SegmentFunction, m: usize, cfg: &SolveConfig) -> Result<PartitionWitness> {
    solve_with_stack(f, m, cfg).map(|(w, _)| w)
}
