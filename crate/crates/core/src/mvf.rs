//! Multi-valued functions on the cylinder `segments × [-1, 1]`, discretized
//! on the grid `x_i = i/N` (segments `[x_i, x_j]`, `i ≤ j`) times levels
//! `y_k = −1 + 2k/M`.
//!
//! A graph is *nice* when its complement does not connect the bottom face
//! `k = 0` to the top face `k = M`. Conversions go both ways: the zero band of
//! a function with the right boundary signs is a graph, and a nice graph is
//! the zero set of a reconstructed function that equals `y` on degenerate
//! segments.

use std::collections::VecDeque;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Triangle, TriangleTable};

/// Level value `y_k = −1 + 2k/M`.
#[inline]
pub fn level(k: usize, m: usize) -> f64 {
    -1.0 + 2.0 * k as f64 / m as f64
}

/// Level index nearest to `y`.
pub fn nearest_level(y: f64, m: usize) -> usize {
    (((y + 1.0) * m as f64 / 2.0).round().max(0.0) as usize).min(m)
}

/// Default zero band `2·(2/M) + ω`, with `ω` the modulus of the tabulated
/// function between adjacent grid segments.
pub fn default_band(m: usize, modulus: f64) -> f64 {
    2.0 * (2.0 / m as f64) + modulus
}

/// Anything that can be sampled on the cylinder grid.
pub trait CylinderField: Sync {
    fn n(&self) -> usize;
    fn m(&self) -> usize;
    fn value(&self, i: usize, j: usize, k: usize) -> f64;
}

/// Materialized cylinder function, stored column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderGrid {
    tri: Triangle,
    m: usize,
    values: Vec<f64>,
}

impl CylinderGrid {
    pub fn from_fn(n: usize, m: usize, f: impl Fn(usize, usize, usize) -> f64 + Sync) -> Self {
        let tri = Triangle::new(n);
        let cells: Vec<(usize, usize)> = tri.cells().collect();
        let values = cells
            .par_iter()
            .flat_map_iter(|&(i, j)| (0..=m).map(move |k| (i, j, k)))
            .map(|(i, j, k)| f(i, j, k))
            .collect();
        CylinderGrid { tri, m, values }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        self.tri.index(i, j) * (self.m + 1) + k
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.idx(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let idx = self.idx(i, j, k);
        self.values[idx] = v;
    }

    /// CSV with header `i,j,value` for all cells at level `k`.
    pub fn write_level_csv<W: Write>(&self, k: usize, out: W) -> Result<()> {
        write_level(self.tri, out, |i, j| self.get(i, j, k))
    }

    /// CSV with header `i,k,value` for all cells with right endpoint `j`.
    pub fn write_column_csv<W: Write>(&self, j: usize, out: W) -> Result<()> {
        write_column(self.tri, self.m, j, out, |i, k| self.get(i, j, k))
    }
}

impl CylinderField for CylinderGrid {
    fn n(&self) -> usize {
        self.tri.n()
    }
    fn m(&self) -> usize {
        self.m
    }
    fn value(&self, i: usize, j: usize, k: usize) -> f64 {
        self.get(i, j, k)
    }
}

/// `φ = y − f` over a tabulated `f`, exactly `y` on degenerate segments.
#[derive(Debug, Clone, Copy)]
pub struct PhiGrid<'a> {
    table: &'a TriangleTable,
    m: usize,
}

impl<'a> PhiGrid<'a> {
    pub fn new(table: &'a TriangleTable, m: usize) -> Self {
        PhiGrid { table, m }
    }
}

impl CylinderField for PhiGrid<'_> {
    fn n(&self) -> usize {
        self.table.triangle().n()
    }
    fn m(&self) -> usize {
        self.m
    }
    #[inline]
    fn value(&self, i: usize, j: usize, k: usize) -> f64 {
        let y = level(k, self.m);
        if i == j {
            y
        } else {
            y - self.table.get(i, j)
        }
    }
}

/// Boolean occupancy on the cylinder grid: the graph `Z` of a multi-valued
/// function. Levels are stored one after another, each as a row-packed
/// triangle padded to whole words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphSet {
    tri: Triangle,
    m: usize,
    stride: usize,
    bits: Vec<u64>,
}

impl GraphSet {
    pub fn empty(n: usize, m: usize) -> Self {
        let tri = Triangle::new(n);
        let stride = tri.len().div_ceil(64);
        GraphSet {
            tri,
            m,
            stride,
            bits: vec![0; stride * (m + 1)],
        }
    }

    pub fn from_fn(n: usize, m: usize, f: impl Fn(usize, usize, usize) -> bool + Sync) -> Self {
        let mut g = GraphSet::empty(n, m);
        let tri = g.tri;
        let stride = g.stride;
        g.bits
            .par_chunks_mut(stride)
            .enumerate()
            .for_each(|(k, words)| {
                for (t, (i, j)) in tri.cells().enumerate() {
                    if f(i, j, k) {
                        words[t / 64] |= 1 << (t % 64);
                    }
                }
            });
        g
    }

    /// Every segment occupied exactly at level `k0`.
    pub fn slab(n: usize, m: usize, k0: usize) -> Self {
        GraphSet::from_fn(n, m, |_, _, k| k == k0)
    }

    pub fn n(&self) -> usize {
        self.tri.n()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn triangle(&self) -> Triangle {
        self.tri
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.get_packed(self.tri.index(i, j), k)
    }

    #[inline]
    pub(crate) fn get_packed(&self, t: usize, k: usize) -> bool {
        self.bits[k * self.stride + t / 64] >> (t % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: bool) {
        let t = self.tri.index(i, j);
        let w = &mut self.bits[k * self.stride + t / 64];
        if v {
            *w |= 1 << (t % 64);
        } else {
            *w &= !(1 << (t % 64));
        }
    }

    /// Mutable words of one level, for bulk writers.
    pub(crate) fn level_words_mut(&mut self) -> impl IndexedParallelIterator<Item = &mut [u64]> {
        self.bits.par_chunks_mut(self.stride)
    }

    pub fn count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn count_level(&self, k: usize) -> usize {
        self.bits[k * self.stride..(k + 1) * self.stride]
            .iter()
            .map(|w| w.count_ones() as usize)
            .sum()
    }

    /// Levels occupied at segment `(i, j)`.
    pub fn levels(&self, i: usize, j: usize) -> Vec<usize> {
        let t = self.tri.index(i, j);
        (0..=self.m).filter(|&k| self.get_packed(t, k)).collect()
    }

    /// Whether any cell on the faces `k = 0` or `k = M` is occupied.
    pub fn touches_faces(&self) -> bool {
        let face = |k: usize| self.bits[k * self.stride..(k + 1) * self.stride].iter().any(|&w| w != 0);
        face(0) || face(self.m)
    }

    pub fn write_level_csv<W: Write>(&self, k: usize, out: W) -> Result<()> {
        write_level(self.tri, out, |i, j| if self.get(i, j, k) { 1.0 } else { 0.0 })
    }

    pub fn write_column_csv<W: Write>(&self, j: usize, out: W) -> Result<()> {
        write_column(self.tri, self.m, j, out, |i, k| if self.get(i, j, k) { 1.0 } else { 0.0 })
    }
}

fn write_level<W: Write>(tri: Triangle, mut out: W, v: impl Fn(usize, usize) -> f64) -> Result<()> {
    writeln!(out, "i,j,value")?;
    for (i, j) in tri.cells() {
        writeln!(out, "{i},{j},{}", v(i, j))?;
    }
    Ok(())
}

fn write_column<W: Write>(tri: Triangle, m: usize, j: usize, mut out: W, v: impl Fn(usize, usize) -> f64) -> Result<()> {
    if j > tri.n() {
        return Err(Error::Precondition(format!("column {j} outside grid {}", tri.n())));
    }
    writeln!(out, "i,k,value")?;
    for i in 0..=j {
        for k in 0..=m {
            writeln!(out, "{i},{k},{}", v(i, k))?;
        }
    }
    Ok(())
}

/// Zero band of `φ`: cells with `|φ| ≤ band`, plus the lower cell of every
/// sign change along a column. Faces are never occupied; a sign change
/// between levels 0 and 1 marks level 1 instead.
pub fn graph_from_function<F: CylinderField>(phi: &F, band: f64) -> Result<GraphSet> {
    let (n, m) = (phi.n(), phi.m());
    if m < 2 {
        return Err(Error::Precondition("need at least 3 levels".into()));
    }
    let tri = Triangle::new(n);
    let cells: Vec<(usize, usize)> = tri.cells().collect();
    if let Some(&(i, j)) = cells
        .par_iter()
        .find_first(|&&(i, j)| !(phi.value(i, j, 0) < 0.0 && phi.value(i, j, m) > 0.0))
    {
        return Err(Error::NotNice {
            i,
            j,
            detail: format!(
                "boundary signs violated: phi(-1) = {}, phi(1) = {}",
                phi.value(i, j, 0),
                phi.value(i, j, m)
            ),
        });
    }
    let mut g = GraphSet::empty(n, m);
    g.level_words_mut().enumerate().for_each(|(k, words)| {
        if k == 0 || k == m {
            return;
        }
        for (t, &(i, j)) in cells.iter().enumerate() {
            let v = phi.value(i, j, k);
            let changes = |lo: f64, hi: f64| (lo < 0.0 && hi > 0.0) || (lo > 0.0 && hi < 0.0);
            let hit = v.abs() <= band
                || changes(v, phi.value(i, j, k + 1))
                || (k == 1 && changes(phi.value(i, j, 0), v));
            if hit {
                words[t / 64] |= 1 << (t % 64);
            }
        }
    });
    Ok(g)
}

/// Outcome of the top–bottom separation check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Separation {
    Separated,
    /// A face-connected chain of free cells `(i, j, k)` from `k = 0` to `k = M`.
    Path(Vec<(usize, usize, usize)>),
}

impl Separation {
    pub fn is_separated(&self) -> bool {
        matches!(self, Separation::Separated)
    }
}

/// Cell addressing shared by the flood fills: id = `k·T + t`.
struct Cells {
    tri: Triangle,
    m: usize,
    ti: Vec<u16>,
    tj: Vec<u16>,
}

impl Cells {
    fn new(tri: Triangle, m: usize) -> Self {
        let (ti, tj) = tri.cells().map(|(i, j)| (i as u16, j as u16)).unzip();
        Cells { tri, m, ti, tj }
    }

    #[inline]
    fn len(&self) -> usize {
        self.tri.len() * (self.m + 1)
    }

    #[inline]
    fn decode(&self, id: usize) -> (usize, usize, usize) {
        let t = id % self.tri.len();
        (self.ti[t] as usize, self.tj[t] as usize, id / self.tri.len())
    }

    #[inline]
    fn encode(&self, i: usize, j: usize, k: usize) -> usize {
        k * self.tri.len() + self.tri.index(i, j)
    }

    /// Face neighbours (6-connectivity) inside the prism.
    fn face_neighbours(&self, id: usize, out: &mut Vec<usize>) {
        out.clear();
        let (i, j, k) = self.decode(id);
        let n = self.tri.n();
        let tl = self.tri.len();
        if i > 0 {
            out.push(self.encode(i - 1, j, k));
        }
        if i < j {
            out.push(self.encode(i + 1, j, k));
            out.push(self.encode(i, j - 1, k));
        }
        if j < n {
            out.push(self.encode(i, j + 1, k));
        }
        if k > 0 {
            out.push(id - tl);
        }
        if k < self.m {
            out.push(id + tl);
        }
    }

    /// All 26 surrounding cells inside the prism.
    fn box_neighbours(&self, id: usize, out: &mut Vec<usize>) {
        out.clear();
        let (i, j, k) = self.decode(id);
        let n = self.tri.n() as isize;
        for di in -1isize..=1 {
            for dj in -1isize..=1 {
                let (a, b) = (i as isize + di, j as isize + dj);
                if a < 0 || b > n || a > b {
                    continue;
                }
                for dk in -1isize..=1 {
                    let c = k as isize + dk;
                    if c < 0 || c > self.m as isize || (di, dj, dk) == (0, 0, 0) {
                        continue;
                    }
                    out.push(self.encode(a as usize, b as usize, c as usize));
                }
            }
        }
    }
}

/// Flood fill over free cells from the bottom face; `Separated` iff no free
/// top-face cell is reached.
pub fn check_separation(z: &GraphSet) -> Separation {
    let cells = Cells::new(z.tri, z.m);
    let tl = z.tri.len();
    let free = |id: usize| !z.get_packed(id % tl, id / tl);
    let mut visited = vec![false; cells.len()];
    let mut parent: Vec<u32> = Vec::new();
    // Parents are only needed to report a path; they are recorded on a
    // second pass once a leak is known.
    for with_parents in [false, true] {
        visited.iter_mut().for_each(|v| *v = false);
        if with_parents {
            parent = vec![u32::MAX; cells.len()];
        }
        let mut queue = VecDeque::new();
        for t in 0..tl {
            if free(t) {
                visited[t] = true;
                queue.push_back(t);
            }
        }
        let mut nb = Vec::with_capacity(6);
        let mut leak = None;
        'bfs: while let Some(id) = queue.pop_front() {
            if id / tl == z.m {
                leak = Some(id);
                break;
            }
            cells.face_neighbours(id, &mut nb);
            for &v in &nb {
                if !visited[v] && free(v) {
                    visited[v] = true;
                    if with_parents {
                        parent[v] = id as u32;
                    }
                    if v / tl == z.m && !with_parents {
                        leak = Some(v);
                        break 'bfs;
                    }
                    queue.push_back(v);
                }
            }
        }
        match leak {
            None => return Separation::Separated,
            Some(end) if with_parents => {
                let mut path = vec![cells.decode(end)];
                let mut cur = end;
                while parent[cur] != u32::MAX {
                    cur = parent[cur] as usize;
                    path.push(cells.decode(cur));
                }
                path.reverse();
                return Separation::Path(path);
            }
            Some(_) => {}
        }
    }
    unreachable!("second pass always returns")
}

/// Diagonal condition: every degenerate segment is occupied at the levels
/// with `|y| ≤ band` and at no level with `|y| > band + 2/M`. On violation
/// the cell farthest from compliance is reported.
pub fn check_degeneracy(z: &GraphSet, band: f64) -> Result<()> {
    let spacing = 2.0 / z.m as f64;
    let mut worst: Option<(f64, usize, usize)> = None;
    for i in 0..=z.n() {
        for k in 0..=z.m {
            let y = level(k, z.m);
            let occupied = z.get(i, i, k);
            let excess = if occupied {
                y.abs() - (band + spacing)
            } else {
                band - y.abs()
            };
            let bad = if occupied { excess > 0.0 } else { excess >= 0.0 };
            if bad && worst.is_none_or(|(w, _, _)| excess > w) {
                worst = Some((excess, i, k));
            }
        }
    }
    match worst {
        None => Ok(()),
        Some((_, i, k)) => Err(Error::Degeneracy {
            i,
            k,
            y: level(k, z.m),
        }),
    }
}

/// Strict form: diagonal cells are occupied exactly where `|y_k| ≤ band`.
pub fn diagonal_matches_band(z: &GraphSet, band: f64) -> bool {
    (0..=z.n()).all(|i| (0..=z.m).all(|k| z.get(i, i, k) == (level(k, z.m).abs() <= band)))
}

/// Levels occupied at segment `(i, j)`. For a separated graph every column
/// meets the graph, so an empty answer is an internal error.
pub fn values_at(z: &GraphSet, i: usize, j: usize) -> Result<Vec<usize>> {
    if i > j || j > z.n() {
        return Err(Error::Precondition(format!("({i}, {j}) is not a grid segment")));
    }
    let ks = z.levels(i, j);
    if ks.is_empty() {
        return Err(Error::Internal(format!(
            "column ({i}, {j}) misses the graph, which therefore does not separate"
        )));
    }
    Ok(ks)
}

/// Half-width of the diagonal band of a graph, after checking that every
/// degenerate segment carries the same contiguous block of levels around 0.
fn diagonal_band(z: &GraphSet) -> Result<f64> {
    let reference = z.levels(0, 0);
    let centre = nearest_level(0.0, z.m);
    let bad = |i: usize, k: usize| Error::Degeneracy {
        i,
        k,
        y: level(k, z.m),
    };
    if !reference.contains(&centre) {
        return Err(bad(0, centre));
    }
    if reference.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(bad(0, reference[0]));
    }
    let band = reference
        .iter()
        .map(|&k| level(k, z.m).abs())
        .fold(0.0, f64::max);
    for i in 0..=z.n() {
        for k in 0..=z.m {
            if z.get(i, i, k) != reference.contains(&k) {
                return Err(bad(i, k));
            }
            if !z.get(i, i, k) && level(k, z.m).abs() <= band {
                return Err(bad(i, k));
            }
        }
    }
    Ok(band)
}

/// Reconstructs a function whose zero set is `z`, equal to `y` on degenerate
/// segments and to `±1` on the faces.
///
/// Off the graph, the diagonal and the faces, `|ψ|` is the Chebyshev grid
/// distance to their union scaled into (0, 1); the sign is positive on
/// complement components reaching the top face or neither face, negative on
/// those reaching the bottom. Cells next to the diagonal are averaged with
/// `y_k` when the signs agree.
pub fn function_from_graph(z: &GraphSet) -> Result<CylinderGrid> {
    if z.touches_faces() {
        return Err(Error::NotNice {
            i: 0,
            j: 0,
            detail: "graph occupies a face level".into(),
        });
    }
    if let Separation::Path(path) = check_separation(z) {
        let (i, j, _) = path[0];
        return Err(Error::NotNice {
            i,
            j,
            detail: format!("complement connects bottom to top in {} steps", path.len()),
        });
    }
    diagonal_band(z)?;

    let (n, m) = (z.n(), z.m);
    let tl = z.tri.len();
    let cells = Cells::new(z.tri, m);
    let total = cells.len();
    let in_graph = |id: usize| z.get_packed(id % tl, id / tl);

    // Components of the complement and their sign.
    const UNSET: u32 = u32::MAX;
    let mut comp = vec![UNSET; total];
    let mut comp_sign: Vec<f64> = Vec::new();
    let mut nb = Vec::with_capacity(26);
    let mut queue = VecDeque::new();
    for seed in 0..total {
        if comp[seed] != UNSET || in_graph(seed) {
            continue;
        }
        let label = comp_sign.len() as u32;
        comp[seed] = label;
        queue.push_back(seed);
        let (mut top, mut bottom) = (false, false);
        while let Some(id) = queue.pop_front() {
            let k = id / tl;
            top |= k == m;
            bottom |= k == 0;
            cells.face_neighbours(id, &mut nb);
            for &v in &nb {
                if comp[v] == UNSET && !in_graph(v) {
                    comp[v] = label;
                    queue.push_back(v);
                }
            }
        }
        debug_assert!(!(top && bottom), "separation already checked");
        comp_sign.push(if bottom && !top { -1.0 } else { 1.0 });
    }

    // Chebyshev distance to Y = graph ∪ diagonal ∪ faces.
    let mut dist = vec![u32::MAX; total];
    for id in 0..total {
        let (i, j, k) = cells.decode(id);
        if in_graph(id) || i == j || k == 0 || k == m {
            dist[id] = 0;
            queue.push_back(id);
        }
    }
    while let Some(id) = queue.pop_front() {
        cells.box_neighbours(id, &mut nb);
        for &v in &nb {
            if dist[v] == u32::MAX {
                dist[v] = dist[id] + 1;
                queue.push_back(v);
            }
        }
    }
    let dmax = dist.iter().copied().filter(|&d| d != u32::MAX).max().unwrap_or(0) as f64;

    let psi = CylinderGrid::from_fn(n, m, |i, j, k| {
        let id = cells.encode(i, j, k);
        let y = level(k, m);
        if i == j {
            return y;
        }
        if in_graph(id) {
            return 0.0;
        }
        if k == 0 {
            return -1.0;
        }
        if k == m {
            return 1.0;
        }
        let sign = comp_sign[comp[id] as usize];
        let v = sign * dist[id] as f64 / (dmax + 1.0);
        if j - i == 1 && y * sign > 0.0 {
            0.5 * (v + y)
        } else {
            v
        }
    });
    Ok(psi)
}
