//! Partitions of a segment by configurations of pairwise distinct affine
//! functions: part `i` is where line `i` is the lowest.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segfunc::Segment;

/// `x ↦ slope·x + intercept`. Serialized as `[slope, intercept]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, f64)", into = "(f64, f64)")]
pub struct Line {
    pub slope: f64,
    pub intercept: f64,
}

impl Line {
    pub fn new(slope: f64, intercept: f64) -> Self {
        Line { slope, intercept }
    }

    #[inline]
    pub fn at(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }

    /// Abscissa where `self` and `other` meet; slopes must differ.
    fn meet(&self, other: &Line) -> f64 {
        (other.intercept - self.intercept) / (self.slope - other.slope)
    }
}

impl From<(f64, f64)> for Line {
    fn from((slope, intercept): (f64, f64)) -> Self {
        Line { slope, intercept }
    }
}

impl From<Line> for (f64, f64) {
    fn from(l: Line) -> Self {
        (l.slope, l.intercept)
    }
}

/// An ordered tuple of pairwise distinct lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Line>", into = "Vec<Line>")]
pub struct LineConfig {
    lines: Vec<Line>,
}

impl TryFrom<Vec<Line>> for LineConfig {
    type Error = Error;
    fn try_from(lines: Vec<Line>) -> Result<Self> {
        LineConfig::new(lines)
    }
}

impl From<LineConfig> for Vec<Line> {
    fn from(c: LineConfig) -> Self {
        c.lines
    }
}

impl LineConfig {
    pub fn new(lines: Vec<Line>) -> Result<Self> {
        if lines.is_empty() {
            return Err(Error::InvalidConfiguration("no lines".into()));
        }
        for (i, l) in lines.iter().enumerate() {
            if !l.slope.is_finite() || !l.intercept.is_finite() {
                return Err(Error::InvalidConfiguration(format!("line {i} is not finite")));
            }
            if let Some(j) = lines[..i].iter().position(|m| m == l) {
                return Err(Error::InvalidConfiguration(format!(
                    "lines {j} and {i} coincide"
                )));
            }
        }
        Ok(LineConfig { lines })
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    /// Reorders the lines: line `i` of the result is line `perm[i]` of
    /// `self`, so part `i` of the result is part `perm[i]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> Result<LineConfig> {
        let p = self.lines.len();
        let mut seen = vec![false; p];
        if perm.len() != p {
            return Err(Error::Precondition(format!(
                "permutation of length {} for {p} lines",
                perm.len()
            )));
        }
        for &k in perm {
            if k >= p || std::mem::replace(&mut seen[k], true) {
                return Err(Error::Precondition(format!("{perm:?} is not a permutation")));
            }
        }
        Ok(LineConfig {
            lines: perm.iter().map(|&k| self.lines[k]).collect(),
        })
    }

    /// Splits `s` into `p` consecutive closed parts, part `i` being the closure
    /// of the set where line `i` is strictly lowest. Lines that are never
    /// lowest inside `s` get a degenerate part at the junction between the
    /// envelope lines of larger and smaller slope.
    pub fn partition(&self, s: Segment) -> Vec<Segment> {
        let p = self.lines.len();
        // Left to right along the envelope slopes decrease; equal slopes keep
        // only the lowest line.
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&i, &j| {
            let (a, b) = (&self.lines[i], &self.lines[j]);
            b.slope
                .partial_cmp(&a.slope)
                .unwrap_or(Ordering::Equal)
                .then(a.intercept.partial_cmp(&b.intercept).unwrap_or(Ordering::Equal))
        });

        // Convex chain scan. `hull` holds positions into `order`.
        let mut hull: Vec<usize> = Vec::with_capacity(p);
        for (pos, &idx) in order.iter().enumerate() {
            let line = &self.lines[idx];
            if let Some(&last) = hull.last() {
                if self.lines[order[last]].slope == line.slope {
                    continue;
                }
            }
            while hull.len() >= 2 {
                let l1 = &self.lines[order[hull[hull.len() - 2]]];
                let l2 = &self.lines[order[hull[hull.len() - 1]]];
                // l2 is useless when l1 meets the new line no later than l2.
                if l1.meet(line) <= l1.meet(l2) {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(pos);
        }

        // Breakpoints between consecutive hull lines, clipped to s.
        let clip = |x: f64| x.clamp(s.a(), s.b());
        let mut start = vec![s.a(); p];
        let mut end = vec![s.b(); p];
        for w in hull.windows(2) {
            let x = clip(self.lines[order[w[0]]].meet(&self.lines[order[w[1]]]));
            end[w[0]] = x;
            start[w[1]] = x;
        }
        // Breakpoints computed independently may cross by rounding.
        let mut cursor = s.a();
        let mut parts = vec![Segment::unit(); p];
        let mut h = 0;
        for pos in 0..p {
            let idx = order[pos];
            if h < hull.len() && hull[h] == pos {
                let a = start[pos].max(cursor);
                let b = end[pos].max(a);
                parts[idx] = Segment::new(a, b).expect("clipped to s");
                cursor = b;
                h += 1;
            } else {
                parts[idx] = Segment::new(cursor, cursor).expect("inside s");
            }
        }
        // The last hull line always runs to the right end.
        if let Some(&last) = hull.last() {
            let idx = order[last];
            parts[idx] = Segment::new(parts[idx].a(), s.b()).expect("inside s");
        }
        parts
    }
}

/// A configuration whose partition of `s` is delimited by `cuts`: line `i`
/// (0-based) has slope `p − 1 − i`, and consecutive lines meet at the cuts.
pub fn realize(cuts: &[f64], s: Segment) -> Result<LineConfig> {
    if cuts.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Precondition(format!("cuts {cuts:?} are not sorted")));
    }
    if cuts.iter().any(|&c| !(s.a()..=s.b()).contains(&c)) {
        return Err(Error::Precondition(format!("cuts {cuts:?} leave {s}")));
    }
    let p = cuts.len() + 1;
    let mut lines = Vec::with_capacity(p);
    let mut intercept = 0.0;
    for i in 0..p {
        lines.push(Line::new((p - 1 - i) as f64, intercept));
        if i < cuts.len() {
            intercept += cuts[i];
        }
    }
    LineConfig::new(lines)
}
