//! Witness-carrying relation composition over the prime factorization of `m`.
//!
//! At a fixed level `y_k`, a graph defines the relation "segment
//! `[x_i, x_j]` lies on the graph at `y_k`". Its `p`-fold boolean power
//! relates exactly the segments that split into `p` consecutive, possibly
//! degenerate parts each lying on the graph at the same level. Stacking the
//! powers over the levels gives the next stage's graph; each stage keeps one
//! intermediate index per new cell so that cuts can be recovered.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Triangle, TriangleTable};
use crate::mvf::{self, level, GraphSet, PhiGrid, Separation};
use crate::segfunc::SegmentFunction;

/// Witness marker for cells without a witness.
const NO_WITNESS: u16 = u16::MAX;

/// Nondecreasing prime factors of `m`; empty for `m = 1`.
pub fn factorize(m: usize) -> Result<Vec<usize>> {
    if m == 0 {
        return Err(Error::Precondition("m must be at least 1".into()));
    }
    let mut primes = Vec::new();
    let mut rest = m;
    let mut d = 2;
    while d * d <= rest {
        while rest % d == 0 {
            primes.push(d);
            rest /= d;
        }
        d += 1;
    }
    if rest > 1 {
        primes.push(rest);
    }
    Ok(primes)
}

/// Upper-triangular boolean matrix over grid points `0..=n`, one bitset row
/// per left endpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitRelation {
    size: usize,
    words: usize,
    bits: Vec<u64>,
}

impl BitRelation {
    pub fn new(n: usize) -> Self {
        let size = n + 1;
        let words = size.div_ceil(64);
        BitRelation {
            size,
            words,
            bits: vec![0; size * words],
        }
    }

    /// Grid intervals `n`; points are `0..=n`.
    pub fn n(&self) -> usize {
        self.size - 1
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize) {
        debug_assert!(i <= j);
        self.bits[i * self.words + j / 64] |= 1 << (j % 64);
    }

    #[inline]
    fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Column indices set in row `i`.
    pub fn row_iter(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(i).iter().enumerate().flat_map(|(w, &word)| {
            let mut rest = word;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let b = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(w * 64 + b)
            })
        })
    }

    /// `self ∘ rhs`, with one witness per true cell: the smallest `t` such
    /// that `self(i,t)` and `rhs(t,j)`. Witnesses are stored row-packed over
    /// the triangle.
    pub fn compose(&self, rhs: &BitRelation) -> (BitRelation, Vec<u16>) {
        assert_eq!(self.size, rhs.size);
        let tri = Triangle::new(self.n());
        let mut out = BitRelation::new(self.n());
        let mut witness = vec![NO_WITNESS; tri.len()];
        let words = self.words;
        for i in 0..self.size {
            let acc = &mut out.bits[i * words..(i + 1) * words];
            for t in self.row_iter(i) {
                let src = rhs.row(t);
                for w in 0..words {
                    let mut fresh = src[w] & !acc[w];
                    acc[w] |= src[w];
                    while fresh != 0 {
                        let j = w * 64 + fresh.trailing_zeros() as usize;
                        fresh &= fresh - 1;
                        witness[tri.index(i, j)] = t as u16;
                    }
                }
            }
        }
        (out, witness)
    }
}

/// One level's relation, possibly a `p`-fold power of a base relation with
/// the witnesses of each binary step.
#[derive(Debug, Clone)]
pub struct LevelRelation {
    pub level: usize,
    pub reach: BitRelation,
    /// `witnesses[s]` explains the `(s + 2)`-fold power: a true cell `(i, j)`
    /// has `t` with the `(s + 1)`-fold power at `(i, t)` and the base at `(t, j)`.
    pub witnesses: Vec<Vec<u16>>,
}

impl LevelRelation {
    /// Chain `i = t_0 ≤ t_1 ≤ … ≤ t_p = j` with every step in the base
    /// relation, or `None` when `(i, j)` is not related.
    pub fn chain(&self, i: usize, j: usize) -> Option<Vec<usize>> {
        if i > j || !self.reach.get(i, j) {
            return None;
        }
        chain_from(&self.witnesses, Triangle::new(self.reach.n()), i, j)
    }
}

fn chain_from(witnesses: &[Vec<u16>], tri: Triangle, i: usize, j: usize) -> Option<Vec<usize>> {
    let mut points = vec![j];
    let mut right = j;
    for step in witnesses.iter().rev() {
        let t = step[tri.index(i, right)];
        if t == NO_WITNESS {
            return None;
        }
        points.push(t as usize);
        right = t as usize;
    }
    points.push(i);
    points.reverse();
    Some(points)
}

/// Level `k` of `z` as a relation, without witnesses.
pub fn relation_from_graph(z: &GraphSet, k: usize) -> LevelRelation {
    let mut reach = BitRelation::new(z.n());
    for (t, (i, j)) in z.triangle().cells().enumerate() {
        if z.get_packed(t, k) {
            reach.set(i, j);
        }
    }
    LevelRelation {
        level: k,
        reach,
        witnesses: Vec::new(),
    }
}

/// `p`-fold power of `r`'s relation, computed as `p − 1` binary products
/// with chained witnesses. Degenerate steps occur exactly where `r` holds on
/// the diagonal.
pub fn compose_p(r: &LevelRelation, p: usize) -> LevelRelation {
    assert!(p >= 1);
    let mut acc = r.reach.clone();
    let mut witnesses = Vec::with_capacity(p - 1);
    for _ in 1..p {
        let (next, w) = acc.compose(&r.reach);
        acc = next;
        witnesses.push(w);
    }
    LevelRelation {
        level: r.level,
        reach: acc,
        witnesses,
    }
}

/// Witnesses of one composition stage: per level, the binary-step tables
/// (absent for levels with an empty relation).
#[derive(Debug, Clone)]
struct StageWitnesses {
    prime: usize,
    levels: Vec<Option<Vec<Vec<u16>>>>,
}

/// Occupancy statistics, for diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct StackStats {
    pub n: usize,
    pub m: usize,
    pub band: f64,
    pub primes: Vec<usize>,
    /// Occupied cells per graph `Z_1 … Z_{n+1}`.
    pub occupancy: Vec<usize>,
    /// Occupied levels at the full segment, per graph.
    pub full_segment_levels: Vec<usize>,
}

/// Graphs `Z_1 … Z_{n+1}` with the witnesses linking consecutive stages.
#[derive(Debug, Clone)]
pub struct CascadeStack {
    n: usize,
    m: usize,
    band: f64,
    primes: Vec<usize>,
    graphs: Vec<GraphSet>,
    stages: Vec<StageWitnesses>,
    table: Option<TriangleTable>,
}

impl CascadeStack {
    /// Stack rooted at a given graph, composed for the factors of `parts`.
    /// Used for hand-built graphs; there is no tabulated function, so level
    /// ranking falls back to `|y|`.
    pub fn from_graph(z: GraphSet, parts: usize, band: f64) -> Result<Self> {
        let mut stack = CascadeStack {
            n: z.n(),
            m: z.m(),
            band,
            primes: Vec::new(),
            graphs: vec![z],
            stages: Vec::new(),
            table: None,
        };
        for p in factorize(parts)? {
            stack.push_stage(p, false)?;
        }
        Ok(stack)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn band(&self) -> f64 {
        self.band
    }

    pub fn primes(&self) -> &[usize] {
        &self.primes
    }

    /// Number of parts encoded by the top stage.
    pub fn parts(&self) -> usize {
        self.primes.iter().product()
    }

    /// `Z_1 … Z_{n+1}`.
    pub fn graphs(&self) -> &[GraphSet] {
        &self.graphs
    }

    pub fn top(&self) -> &GraphSet {
        self.graphs.last().expect("stack has a base graph")
    }

    /// Tabulated (rescaled) `f`, when built from a function.
    pub fn table(&self) -> Option<&TriangleTable> {
        self.table.as_ref()
    }

    /// Chain of stage `stage` (1-based: splits a cell of `Z_{stage+1}` into
    /// cells of `Z_stage`) at level `k`.
    pub fn chain(&self, stage: usize, k: usize, i: usize, j: usize) -> Option<Vec<usize>> {
        let s = self.stages.get(stage.checked_sub(1)?)?;
        if !self.graphs[stage].get(i, j, k) {
            return None;
        }
        let tables = s.levels[k].as_ref()?;
        chain_from(tables, Triangle::new(self.n), i, j)
    }

    pub fn stats(&self) -> StackStats {
        StackStats {
            n: self.n,
            m: self.m,
            band: self.band,
            primes: self.primes.clone(),
            occupancy: self.graphs.iter().map(GraphSet::count).collect(),
            full_segment_levels: self.graphs.iter().map(|g| g.levels(0, self.n).len()).collect(),
        }
    }

    fn push_stage(&mut self, p: usize, check: bool) -> Result<()> {
        let z = self.top();
        let (n, m) = (self.n, self.m);
        let tri = Triangle::new(n);
        let composed: Vec<(BitRelation, Option<Vec<Vec<u16>>>)> = (0..=m)
            .into_par_iter()
            .map(|k| {
                let base = relation_from_graph(z, k);
                if base.reach.count() == 0 {
                    return (base.reach, None);
                }
                let power = compose_p(&base, p);
                (power.reach, Some(power.witnesses))
            })
            .collect();
        let mut next = GraphSet::empty(n, m);
        next.level_words_mut()
            .zip(composed.par_iter())
            .for_each(|(words, (reach, _))| {
                for (t, (i, j)) in tri.cells().enumerate() {
                    if reach.get(i, j) {
                        words[t / 64] |= 1 << (t % 64);
                    }
                }
            });
        let stage = self.graphs.len();
        if check {
            check_stage(&next, self.band, stage + 1)?;
        }
        self.graphs.push(next);
        self.primes.push(p);
        self.stages.push(StageWitnesses {
            prime: p,
            levels: composed.into_iter().map(|(_, w)| w).collect(),
        });
        Ok(())
    }
}

/// Separation and degeneracy of stage graph `Z_stage`.
fn check_stage(z: &GraphSet, band: f64, stage: usize) -> Result<()> {
    if let Separation::Path(path) = mvf::check_separation(z) {
        let (i, j, k) = path[path.len() / 2];
        return Err(Error::ResolutionTooCoarse {
            stage,
            detail: format!(
                "graph does not separate top from bottom (leak through ({i}, {j}, {k}), path of {} cells)",
                path.len()
            ),
        });
    }
    mvf::check_degeneracy(z, band).map_err(|e| Error::Internal(format!("stage {stage}: {e}")))
}

/// Builds `Z_1` from `y − f` and composes it over the prime factors of
/// `parts` in nondecreasing order. `f` should already be rescaled into
/// (−1, 1). `band = None` selects [`mvf::default_band`].
pub fn build_cascade(
    f: &SegmentFunction,
    parts: usize,
    n: usize,
    m: usize,
    band: Option<f64>,
) -> Result<CascadeStack> {
    if n == 0 || n >= NO_WITNESS as usize || m < 2 {
        return Err(Error::Precondition(format!("unsupported grid N = {n}, M = {m}")));
    }
    let primes = factorize(parts)?;
    let table = f.tabulate(n)?;
    let band = band.unwrap_or_else(|| mvf::default_band(m, table.adjacent_modulus()));
    if band + 2.0 / m as f64 >= 1.0 {
        return Err(Error::ResolutionTooCoarse {
            stage: 1,
            detail: format!("band {band} reaches the faces at M = {m}"),
        });
    }
    let z1 = mvf::graph_from_function(&PhiGrid::new(&table, m), band)?;
    check_stage(&z1, band, 1)?;
    let mut stack = CascadeStack {
        n,
        m,
        band,
        primes: Vec::new(),
        graphs: vec![z1],
        stages: Vec::new(),
        table: Some(table),
    };
    for p in primes {
        stack.push_stage(p, true)?;
    }
    Ok(stack)
}

/// Expands the full segment at level `k` of the top graph into grid
/// boundary points `0 = t_0 ≤ … ≤ t_parts = n`, checking every expanded cell
/// against its stage graph.
pub fn unwind_points(stack: &CascadeStack, k: usize) -> Result<Vec<usize>> {
    let top = stack.graphs.len() - 1;
    if !stack.graphs[top].get(0, stack.n, k) {
        return Err(Error::Precondition(format!(
            "level {k} is not occupied at the full segment"
        )));
    }
    let mut points = vec![0];
    expand(stack, top, k, 0, stack.n, &mut points)?;
    Ok(points)
}

fn expand(stack: &CascadeStack, stage: usize, k: usize, i: usize, j: usize, out: &mut Vec<usize>) -> Result<()> {
    if !stack.graphs[stage].get(i, j, k) {
        return Err(Error::Internal(format!(
            "cell ({i}, {j}, {k}) missing from stage {}",
            stage + 1
        )));
    }
    if stage == 0 {
        out.push(j);
        return Ok(());
    }
    let chain = stack.chain(stage, k, i, j).ok_or_else(|| {
        Error::Internal(format!("no witness for ({i}, {j}, {k}) at stage {}", stage + 1))
    })?;
    debug_assert_eq!(chain.len(), stack.stages[stage - 1].prime + 1);
    for w in chain.windows(2) {
        expand(stack, stage - 1, k, w[0], w[1], out)?;
    }
    Ok(())
}

/// Among all chains certified by the stack at level `k`, the one whose
/// largest base-cell residual `|f(part) − y_k|` is smallest, as boundary
/// points `0 = t_0 ≤ … ≤ t_parts = n`, together with that residual. Needs the
/// tabulated function.
pub fn tightest_points(stack: &CascadeStack, k: usize) -> Result<(Vec<usize>, f64)> {
    let table = stack
        .table
        .as_ref()
        .ok_or_else(|| Error::Precondition("stack has no tabulated function".into()))?;
    let n = stack.n;
    let tri = Triangle::new(n);
    let y = level(k, stack.m);
    let base = &stack.graphs[0];
    let mut cost: Vec<f64> = tri
        .cells()
        .enumerate()
        .map(|(t, (i, j))| {
            if base.get_packed(t, k) {
                (table.get(i, j) - y).abs()
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let top = stack.primes.len();
    let mut choices: Vec<Vec<Vec<u16>>> = Vec::with_capacity(top);
    for (s, &p) in stack.primes.iter().enumerate() {
        let rows = if s + 1 == top { 0..=0 } else { 0..=n };
        let per_row: Vec<(usize, Vec<f64>, Vec<Vec<u16>>)> = rows
            .into_par_iter()
            .map(|i| {
                let mut best: Vec<f64> = (i..=n).map(|j| cost[tri.index(i, j)]).collect();
                let mut preds = Vec::with_capacity(p - 1);
                for _ in 1..p {
                    let mut next = vec![f64::INFINITY; n - i + 1];
                    let mut pred = vec![NO_WITNESS; n - i + 1];
                    for t in i..=n {
                        let bt = best[t - i];
                        if bt == f64::INFINITY {
                            continue;
                        }
                        let row = &cost[tri.index(t, t)..=tri.index(t, n)];
                        for (j, &c) in (t..=n).zip(row) {
                            let v = bt.max(c);
                            if v < next[j - i] {
                                next[j - i] = v;
                                pred[j - i] = t as u16;
                            }
                        }
                    }
                    best = next;
                    preds.push(pred);
                }
                (i, best, preds)
            })
            .collect();
        let mut next_cost = vec![f64::INFINITY; tri.len()];
        let mut tables = vec![vec![NO_WITNESS; tri.len()]; p - 1];
        for (i, best, preds) in per_row {
            for j in i..=n {
                let idx = tri.index(i, j);
                next_cost[idx] = best[j - i];
                for (table, pred) in tables.iter_mut().zip(&preds) {
                    table[idx] = pred[j - i];
                }
            }
        }
        cost = next_cost;
        choices.push(tables);
    }
    let residual = cost[tri.index(0, n)];
    if residual == f64::INFINITY {
        return Err(Error::Precondition(format!(
            "level {k} is not occupied at the full segment"
        )));
    }
    let mut points = vec![0];
    expand_choices(&choices, tri, top, 0, n, &mut points)?;
    Ok((points, residual))
}

fn expand_choices(
    choices: &[Vec<Vec<u16>>],
    tri: Triangle,
    stage: usize,
    i: usize,
    j: usize,
    out: &mut Vec<usize>,
) -> Result<()> {
    if stage == 0 {
        out.push(j);
        return Ok(());
    }
    let chain = chain_from(&choices[stage - 1], tri, i, j)
        .ok_or_else(|| Error::Internal(format!("no chain for ({i}, {j}) at stage {}", stage + 1)))?;
    for w in chain.windows(2) {
        expand_choices(choices, tri, stage - 1, w[0], w[1], out)?;
    }
    Ok(())
}

/// Result of [`audit_witnesses`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct WitnessAudit {
    /// Occupied cells whose chain was checked.
    pub chains: usize,
    /// Chains that are missing, malformed or step outside the stage below.
    pub failures: usize,
}

/// Checks, for every stage and every occupied cell `(i, j, k)` of the upper
/// graph, that its chain has `p + 1` nondecreasing points from `i` to `j` and
/// every step is occupied at level `k` one stage down. With `limit`, at most
/// that many cells per stage are checked, spread evenly.
pub fn audit_witnesses(stack: &CascadeStack, limit: Option<usize>) -> Result<WitnessAudit> {
    let tri = Triangle::new(stack.n);
    let mut total = WitnessAudit::default();
    for stage in 1..stack.graphs.len() {
        let upper = &stack.graphs[stage];
        let lower = &stack.graphs[stage - 1];
        let p = stack.stages[stage - 1].prime;
        let cells: Vec<(usize, usize, usize)> = (0..=stack.m)
            .flat_map(|k| tri.cells().enumerate().map(move |(t, (i, j))| (t, i, j, k)))
            .filter(|&(t, _, _, k)| upper.get_packed(t, k))
            .map(|(_, i, j, k)| (i, j, k))
            .collect();
        let stride = match limit {
            Some(l) if l > 0 && cells.len() > l => cells.len().div_ceil(l),
            _ => 1,
        };
        let (chains, failures) = cells
            .par_iter()
            .step_by(stride)
            .map(|&(i, j, k)| {
                let sound = stack.chain(stage, k, i, j).is_some_and(|c| {
                    c.len() == p + 1
                        && c[0] == i
                        && c[p] == j
                        && c.windows(2).all(|w| w[0] <= w[1] && lower.get(w[0], w[1], k))
                });
                (1, usize::from(!sound))
            })
            .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
        total.chains += chains;
        total.failures += failures;
    }
    Ok(total)
}

/// Grid residual of boundary points at level `k`: `max |f(part) − y_k|` on
/// the tabulated function.
pub fn grid_residual(table: &TriangleTable, points: &[usize], y: f64) -> f64 {
    points
        .windows(2)
        .map(|w| (table.get(w[0], w[1]) - y).abs())
        .fold(0.0, f64::max)
}

/// Levels occupied at the full segment of the top graph, best first: by
/// the grid residual of [`tightest_points`], then `|y|`.
pub fn rank_levels(stack: &CascadeStack) -> Result<Vec<(usize, f64)>> {
    let ks = stack.top().levels(0, stack.n);
    if ks.is_empty() {
        return Err(Error::ResolutionTooCoarse {
            stage: stack.graphs.len(),
            detail: "no level is occupied at the full segment".into(),
        });
    }
    let mut ranked = ks
        .into_par_iter()
        .map(|k| {
            let residual = match &stack.table {
                Some(_) => tightest_points(stack, k)?.1,
                None => 0.0,
            };
            Ok((k, residual))
        })
        .collect::<Result<Vec<_>>>()?;
    let m = stack.m;
    ranked.sort_by(|a, b| {
        a.1.total_cmp(&b.1)
            .then(level(a.0, m).abs().total_cmp(&level(b.0, m).abs()))
            .then(a.0.cmp(&b.0))
    });
    Ok(ranked)
}
