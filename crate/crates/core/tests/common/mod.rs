#![allow(dead_code)]

use equipart::{Segment, SegmentFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn seg(a: f64, b: f64) -> Segment {
    Segment::new(a, b).unwrap()
}

fn coef(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo..hi) * 100.0).round() / 100.0
}

/// Random expression vanishing on degenerate segments by construction:
/// `(b-a)*h` or `sin(c*(b-a))*h` with a smooth factor `h`.
pub fn random_expression(rng: &mut ChaCha8Rng) -> String {
    let outer = if rng.random_bool(0.5) {
        "(b-a)".to_string()
    } else {
        format!("sin({}*(b-a))", coef(rng, 1.0, 7.0))
    };
    let (u, v, w, d) = (
        coef(rng, 0.2, 2.0),
        coef(rng, 0.2, 2.0),
        coef(rng, 1.0, 6.0),
        coef(rng, -1.5, 1.5),
    );
    let h = match rng.random_range(0..5) {
        0 => format!("cos({w}*(a+b)+{d})"),
        1 => format!("({u}-{v}*a-{w}*b*b)"),
        2 => format!("(exp(-{u}*a)-{v}*b)"),
        3 => format!("sin({w}*a+{d})*cos({v}*b)"),
        _ => format!("({u}*a*b-{v}+cos({w}*b))"),
    };
    format!("{outer}*{h}")
}

/// Takes both signs by at least `1e-3` on a coarse segment grid.
pub fn is_signed(f: &SegmentFunction) -> bool {
    let table = f.tabulate(64).unwrap();
    let hi = table.values().iter().copied().fold(f64::MIN, f64::max);
    let lo = table.values().iter().copied().fold(f64::MAX, f64::min);
    hi > 1e-3 && lo < -1e-3
}

/// Fails additivity by at least `1e-3` somewhere on a coarse grid.
pub fn is_non_additive(f: &SegmentFunction) -> bool {
    let n = 16;
    let x = |i: usize| i as f64 / n as f64;
    (0..=n).any(|i| {
        (i..=n).any(|j| {
            (j..=n).any(|l| {
                let whole = f.eval(seg(x(i), x(l))).unwrap();
                let split = f.eval(seg(x(i), x(j))).unwrap() + f.eval(seg(x(j), x(l))).unwrap();
                (whole - split).abs() > 1e-3
            })
        })
    })
}

/// `count` random expressions that parse, pass diagonal validation, and are
/// signed and non-additive.
pub fn validated_expressions(seed: u64, count: usize) -> Vec<(String, SegmentFunction)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let text = random_expression(&mut rng);
        let Ok(f) = SegmentFunction::parse_expression(&text) else {
            continue;
        };
        if f.validate_diagonal(1001, 1e-9).is_err() || !is_signed(&f) || !is_non_additive(&f) {
            continue;
        }
        out.push((text, f));
    }
    out
}

/// Direct re-evaluation of `f` on the parts cut at `cuts`.
pub fn part_values(f: &SegmentFunction, cuts: &[f64]) -> Vec<f64> {
    let mut pts = vec![0.0];
    pts.extend_from_slice(cuts);
    pts.push(1.0);
    pts.windows(2).map(|w| f.eval(seg(w[0], w[1])).unwrap()).collect()
}

pub fn max_pairwise(values: &[f64]) -> f64 {
    let hi = values.iter().copied().fold(f64::MIN, f64::max);
    let lo = values.iter().copied().fold(f64::MAX, f64::min);
    hi - lo
}
