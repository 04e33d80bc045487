//! Reference solvers that share nothing with the cascade: they minimize
//! `max_{i,j} |f(I_i) − f(I_j)|` directly over cut tuples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::TriangleTable;
use crate::segfunc::SegmentFunction;
use crate::solver::boundaries;

/// Largest grid accepted by [`exhaustive`].
pub const MAX_EXHAUSTIVE_GRID: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleMethod {
    /// Global optimum over the cut grid.
    Exhaustive,
    /// Best of several local searches; heuristic.
    Multistart,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleResult {
    pub m: usize,
    /// Interior cuts.
    pub cuts: Vec<f64>,
    /// `max − min` of the part values at `cuts`.
    pub objective: f64,
    pub method: OracleMethod,
    /// Grid size `K` (exhaustive) or number of starts (multistart).
    pub budget: usize,
    pub evaluations: usize,
}

/// JSON shape shared with solver witnesses, plus the method tag.
#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub m: usize,
    pub cuts: Vec<f64>,
    pub y: f64,
    pub residuals: Vec<f64>,
    /// Global optimum on the grid was established (exhaustive search only).
    pub converged: bool,
    pub method: OracleMethod,
    pub heuristic: bool,
    pub objective: f64,
    pub config: serde_json::Value,
    pub stats: serde_json::Value,
}

impl OracleResult {
    pub fn report(&self, f: &SegmentFunction) -> Result<OracleReport> {
        let values = parts(f, &self.cuts)?;
        let y = values.iter().sum::<f64>() / values.len() as f64;
        let config = match self.method {
            OracleMethod::Exhaustive => serde_json::json!({ "grid": self.budget }),
            OracleMethod::Multistart => serde_json::json!({ "starts": self.budget }),
        };
        Ok(OracleReport {
            m: self.m,
            cuts: self.cuts.clone(),
            y,
            residuals: values.iter().map(|v| v - y).collect(),
            converged: self.method == OracleMethod::Exhaustive,
            method: self.method,
            heuristic: self.method == OracleMethod::Multistart,
            objective: self.objective,
            config,
            stats: serde_json::json!({ "evaluations": self.evaluations }),
        })
    }
}

fn parts(f: &SegmentFunction, cuts: &[f64]) -> Result<Vec<f64>> {
    boundaries(cuts)
        .windows(2)
        .map(|w| f.value(w[0], w[1]))
        .collect()
}

fn spread_of(values: &[f64]) -> f64 {
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    hi - lo
}

fn check_exhaustive(m: usize, k: usize) -> Result<()> {
    if !(1..=3).contains(&m) {
        return Err(Error::Precondition(format!("exhaustive oracle supports m ≤ 3, got {m}")));
    }
    if k == 0 || k > MAX_EXHAUSTIVE_GRID {
        return Err(Error::Precondition(format!(
            "exhaustive grid must be in 1..={MAX_EXHAUSTIVE_GRID}, got {k}"
        )));
    }
    Ok(())
}

/// Objective of a grid tuple on the table.
fn grid_objective(table: &TriangleTable, k: usize, tuple: &[usize]) -> f64 {
    let mut pts = Vec::with_capacity(tuple.len() + 2);
    pts.push(0);
    pts.extend_from_slice(tuple);
    pts.push(k);
    let values: Vec<f64> = pts.windows(2).map(|w| table.get(w[0], w[1])).collect();
    spread_of(&values)
}

/// Calls `visit` on every sorted cut tuple of the `k`-grid, in parallel over
/// the first cut, and reduces with `reduce`.
fn enumerate<T: Send>(
    m: usize,
    k: usize,
    init: impl Fn() -> T + Sync + Send,
    visit: impl Fn(&mut T, &[usize]) + Sync + Send,
    reduce: impl Fn(T, T) -> T + Sync + Send,
) -> T {
    match m {
        1 => {
            let mut acc = init();
            visit(&mut acc, &[]);
            acc
        }
        2 => (0..=k)
            .into_par_iter()
            .fold(&init, |mut acc, t| {
                visit(&mut acc, &[t]);
                acc
            })
            .reduce(&init, &reduce),
        _ => (0..=k)
            .into_par_iter()
            .fold(&init, |mut acc, t1| {
                for t2 in t1..=k {
                    visit(&mut acc, &[t1, t2]);
                }
                acc
            })
            .reduce(&init, &reduce),
    }
}

/// Global minimum of the objective over all cut tuples on the grid
/// `{0, 1/K, …, 1}`, for `m ≤ 3`. Ties go to the lexicographically smallest
/// tuple.
pub fn exhaustive(f: &SegmentFunction, m: usize, k: usize) -> Result<OracleResult> {
    check_exhaustive(m, k)?;
    let table = f.tabulate(k)?;
    let best = enumerate(
        m,
        k,
        || (f64::INFINITY, Vec::<usize>::new()),
        |acc, tuple| {
            let obj = grid_objective(&table, k, tuple);
            if obj < acc.0 || (obj == acc.0 && tuple < acc.1.as_slice()) {
                *acc = (obj, tuple.to_vec());
            }
        },
        |a, b| {
            if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
                b
            } else {
                a
            }
        },
    );
    Ok(OracleResult {
        m,
        cuts: best.1.iter().map(|&t| t as f64 / k as f64).collect(),
        objective: best.0,
        method: OracleMethod::Exhaustive,
        budget: k,
        evaluations: table.values().len(),
    })
}

/// All grid cut tuples whose objective is at most `threshold`, as grid
/// indices, for `m ≤ 3`.
pub fn near_optimal(f: &SegmentFunction, m: usize, k: usize, threshold: f64) -> Result<Vec<Vec<usize>>> {
    check_exhaustive(m, k)?;
    let table = f.tabulate(k)?;
    let mut found = enumerate(
        m,
        k,
        Vec::new,
        |acc: &mut Vec<Vec<usize>>, tuple| {
            if grid_objective(&table, k, tuple) <= threshold {
                acc.push(tuple.to_vec());
            }
        },
        |mut a, b| {
            a.extend(b);
            a
        },
    );
    found.sort();
    Ok(found)
}

/// Best of `starts` coordinate-descent runs from random sorted cuts, each
/// limited to `sweeps` passes over the cuts per phase. Each coordinate step
/// minimizes the objective plus the gap between the two parts sharing the
/// cut (or, in the middle phase, the squared deviation of the part values),
/// by a coarse scan followed by golden-section refinement. Heuristic.
pub fn multistart(f: &SegmentFunction, m: usize, starts: usize, sweeps: usize, seed: u64) -> Result<OracleResult> {
    if m == 0 {
        return Err(Error::Precondition("m must be at least 1".into()));
    }
    if m == 1 {
        return Ok(OracleResult {
            m,
            cuts: Vec::new(),
            objective: 0.0,
            method: OracleMethod::Multistart,
            budget: starts,
            evaluations: 0,
        });
    }
    if starts == 0 {
        return Err(Error::Precondition("need at least one start".into()));
    }
    let runs = (0..starts)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(s as u64));
            let mut cuts: Vec<f64> = (0..m - 1).map(|_| rng.random::<f64>()).collect();
            cuts.sort_by(f64::total_cmp);
            local_search(f, cuts, sweeps)
        })
        .collect::<Result<Vec<_>>>()?;
    let evaluations = runs.iter().map(|r| r.2).sum();
    let (cuts, objective, _) = runs
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one start");
    Ok(OracleResult {
        m,
        cuts,
        objective,
        method: OracleMethod::Multistart,
        budget: starts,
        evaluations,
    })
}

const SCAN_POINTS: usize = 16;
const GOLDEN_ITERS: usize = 80;

/// Coordinate score: the objective plus the gap across the moved cut.
fn minimax_score(values: &[f64], c: usize) -> f64 {
    spread_of(values) + (values[c] - values[c + 1]).abs()
}

/// Smooth surrogate: squared deviation of the part values from their mean.
fn deviation_score(values: &[f64], _: usize) -> f64 {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| (v - mean) * (v - mean)).sum()
}

/// Minimax descent, then descent on the smooth surrogate to leave corners
/// of the nonsmooth objective, then minimax again; keeps the best iterate.
fn local_search(f: &SegmentFunction, cuts: Vec<f64>, sweeps: usize) -> Result<(Vec<f64>, f64, usize)> {
    let mut evals = 0;
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut current = cuts;
    for score in [minimax_score, deviation_score, minimax_score] {
        let (next, objective, used) = descend(f, current, sweeps, score)?;
        evals += used;
        if best.as_ref().is_none_or(|b| objective < b.1) {
            best = Some((next.clone(), objective));
        }
        current = next;
    }
    let (cuts, objective) = best.expect("three phases ran");
    Ok((cuts, objective, evals))
}

fn descend(
    f: &SegmentFunction,
    mut cuts: Vec<f64>,
    sweeps: usize,
    criterion: fn(&[f64], usize) -> f64,
) -> Result<(Vec<f64>, f64, usize)> {
    let mut values = parts(f, &cuts)?;
    let mut evals = values.len();
    for _ in 0..sweeps {
        let mut moved = 0.0_f64;
        for c in 0..cuts.len() {
            let lo = if c == 0 { 0.0 } else { cuts[c - 1] };
            let hi = if c + 1 == cuts.len() { 1.0 } else { cuts[c + 1] };
            let left_end = lo_boundary(&cuts, c);
            let right_end = hi_boundary(&cuts, c);
            let mut trial = values.clone();
            let mut score = |x: f64| -> Result<f64> {
                let x = x.clamp(lo, hi);
                trial[c] = f.value(left_end, x)?;
                trial[c + 1] = f.value(x, right_end)?;
                evals += 2;
                Ok(criterion(&trial, c))
            };
            // Coarse scan, then golden section around the best sample.
            let step = (hi - lo) / SCAN_POINTS as f64;
            let mut best = (score(cuts[c])?, cuts[c]);
            for s in 0..=SCAN_POINTS {
                let x = lo + step * s as f64;
                let v = score(x)?;
                if v < best.0 {
                    best = (v, x);
                }
            }
            let (mut a, mut b) = ((best.1 - step).max(lo), (best.1 + step).min(hi));
            let g = 0.5 * (5f64.sqrt() - 1.0);
            let mut x1 = b - g * (b - a);
            let mut x2 = a + g * (b - a);
            let mut f1 = score(x1)?;
            let mut f2 = score(x2)?;
            for _ in 0..GOLDEN_ITERS {
                if b - a <= 1e-15 {
                    break;
                }
                if f1 <= f2 {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - g * (b - a);
                    f1 = score(x1)?;
                } else {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + g * (b - a);
                    f2 = score(x2)?;
                }
            }
            for (v, x) in [(f1, x1), (f2, x2)] {
                if v < best.0 {
                    best = (v, x);
                }
            }
            best.1 = best.1.clamp(lo, hi);
            moved = moved.max((best.1 - cuts[c]).abs());
            cuts[c] = best.1;
            values[c] = f.value(left_end, cuts[c])?;
            values[c + 1] = f.value(cuts[c], right_end)?;
            evals += 2;
        }
        if moved <= 1e-15 {
            break;
        }
    }
    Ok((cuts, spread_of(&values), evals))
}

fn lo_boundary(cuts: &[f64], c: usize) -> f64 {
    if c == 0 {
        0.0
    } else {
        cuts[c - 1]
    }
}

fn hi_boundary(cuts: &[f64], c: usize) -> f64 {
    cuts.get(c + 1).copied().unwrap_or(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exhaustive_uniform_halves() {
        let f = SegmentFunction::additive_expr("1").unwrap();
        let r = exhaustive(&f, 2, 200).unwrap();
        assert_eq!(r.cuts, vec![0.5]);
        assert!(r.objective < 1e-12);
    }

    #[test]
    fn exhaustive_quadratic_thirds() {
        let f = SegmentFunction::parse_expression("b^2-a^2").unwrap();
        let r = exhaustive(&f, 3, 400).unwrap();
        assert!((r.cuts[0] - (1.0f64 / 3.0).sqrt()).abs() <= 1.0 / 400.0);
        assert!((r.cuts[1] - (2.0f64 / 3.0).sqrt()).abs() <= 1.0 / 400.0);
        // Moving a cut by one step changes a part by at most 2·(1/400)·1.
        assert!(r.objective <= 2.0 * 2.0 / 400.0);
    }

    #[test]
    fn exhaustive_rejects_large_inputs() {
        let f = SegmentFunction::additive_expr("1").unwrap();
        assert!(exhaustive(&f, 4, 10).is_err());
        assert!(exhaustive(&f, 2, 401).is_err());
        assert_eq!(exhaustive(&f, 1, 10).unwrap().objective, 0.0);
    }

    #[test]
    fn multistart_uniform_sixths() {
        let f = SegmentFunction::additive_expr("1").unwrap();
        let r = multistart(&f, 6, 50, 400, 1).unwrap();
        assert!(r.objective <= 1e-8, "{}", r.objective);
        for (i, c) in r.cuts.iter().enumerate() {
            assert!((c - (i + 1) as f64 / 6.0).abs() < 1e-8);
        }
        let single = multistart(&f, 1, 5, 10, 1).unwrap();
        assert!(single.cuts.is_empty() && single.objective == 0.0);
    }

    #[test]
    fn multistart_is_seeded() {
        let f = SegmentFunction::oscillatory(1.0, 1.0);
        let a = multistart(&f, 3, 4, 20, 9).unwrap();
        let b = multistart(&f, 3, 4, 20, 9).unwrap();
        assert_eq!(a.cuts, b.cuts);
    }
}
