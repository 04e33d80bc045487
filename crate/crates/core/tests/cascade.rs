mod common;

use equipart::cascade::{self, compose_p, relation_from_graph, CascadeStack};
use equipart::mvf::{self, level, nearest_level, GraphSet, PhiGrid};
use equipart::{segfunc, SegmentFunction};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Mask `|y_k − g(x_i, x_j)| ≤ band`, built directly.
fn level_mask(n: usize, m: usize, band: f64, g: impl Fn(f64, f64) -> f64 + Sync) -> GraphSet {
    GraphSet::from_fn(n, m, |i, j, k| {
        let (a, b) = (i as f64 / n as f64, j as f64 / n as f64);
        (level(k, m) - g(a, b)).abs() <= band
    })
}

#[test]
fn relation_of_rescaled_uniform() {
    let scale = 1.0 / 2.01;
    let f = SegmentFunction::additive_expr("1").unwrap().scaled(scale);
    let (n, m) = (100, 200);
    let table = f.tabulate(n).unwrap();
    let band = mvf::default_band(m, table.adjacent_modulus());
    let z = mvf::graph_from_function(&PhiGrid::new(&table, m), band).unwrap();
    let target: f64 = 0.5 * scale;
    assert!((target - 0.2488).abs() < 1e-4);
    let k = nearest_level(target, m);
    let y = level(k, m);
    let r = relation_from_graph(&z, k);
    assert!(r.witnesses.is_empty());
    let next = level(k + 1, m);
    for i in 0..=n {
        for j in 0..=n {
            if i > j {
                assert!(!r.reach.get(i, j));
                continue;
            }
            let v = (j - i) as f64 / n as f64 * scale;
            let phi = |y: f64| y - v;
            let oracle = phi(y).abs() <= band || (phi(y) < 0.0) != (phi(next) < 0.0);
            assert_eq!(r.reach.get(i, j), oracle, "({i},{j})");
            // Closed form, up to the distance between y_k and the target.
            let d = ((j - i) as f64 / n as f64 - 0.5).abs();
            let slack = (y - target).abs() / scale;
            if d <= band / scale - slack - 1e-12 {
                assert!(r.reach.get(i, j));
            }
            if d > (band + 2.0 / m as f64) / scale + slack + 1e-12 {
                assert!(!r.reach.get(i, j));
            }
        }
    }
}

#[test]
fn diagonal_relation_follows_band_and_empty_levels_are_empty() {
    let f = segfunc::rescale(&SegmentFunction::oscillatory(1.0, 1.0)).unwrap().function;
    let (n, m) = (32, 64);
    let stack = cascade::build_cascade(&f, 1, n, m, None).unwrap();
    let z = &stack.graphs()[0];
    for k in 0..=m {
        let r = relation_from_graph(z, k);
        for i in 0..=n {
            assert_eq!(r.reach.get(i, i), level(k, m).abs() <= stack.band());
        }
    }
    assert_eq!(relation_from_graph(z, m).reach.count(), 0);
    assert_eq!(relation_from_graph(z, 0).reach.count(), 0);
}

#[test]
fn compose_uniform_halves() {
    let (n, m) = (100, 100);
    let z = level_mask(n, m, 0.01, |a, b| b - a);
    let k = 75;
    assert_eq!(level(k, m), 0.5);
    let two = compose_p(&relation_from_graph(&z, k), 2);
    assert!(two.reach.get(0, n));
    assert_eq!(two.chain(0, n).unwrap(), vec![0, 50, n]);

    let k = 70;
    assert!((level(k, m) - 0.4).abs() < 1e-15);
    assert!(!compose_p(&relation_from_graph(&z, k), 2).reach.get(0, n));
}

#[test]
fn compose_quadratic_halves() {
    let (n, m) = (100, 100);
    let z = level_mask(n, m, 0.01, |a, b| b * b - a * a);
    let two = compose_p(&relation_from_graph(&z, 75), 2);
    let chain = two.chain(0, n).unwrap();
    assert!((chain[1] as f64 - 0.5f64.sqrt() * n as f64).abs() <= 1.0, "{chain:?}");
}

#[test]
fn compose_allows_degenerate_steps_exactly_on_the_diagonal_band() {
    let (n, m) = (20, 40);
    let z = level_mask(n, m, 0.06, |a, b| b - a);
    for k in [m / 2, m / 2 + 1, m / 2 + 3] {
        let base = relation_from_graph(&z, k);
        let three = compose_p(&base, 3);
        for i in 0..=n {
            for j in i..=n {
                if let Some(chain) = three.chain(i, j) {
                    for w in chain.windows(2) {
                        assert!(base.reach.get(w[0], w[1]));
                        if w[0] == w[1] {
                            assert!(level(k, m).abs() <= 0.06);
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn cascade_of_rescaled_uniform() {
    let f = SegmentFunction::additive_expr("1").unwrap().scaled(1.0 / 2.01);
    let (n, m) = (128, 256);
    for (parts, target) in [(2, 0.5 / 2.01), (6, 1.0 / 6.0 / 2.01)] {
        let stack = cascade::build_cascade(&f, parts, n, m, None).unwrap();
        assert_eq!(stack.parts(), parts);
        let ks = stack.top().levels(0, n);
        assert!(!ks.is_empty());
        assert!(ks.contains(&nearest_level(target, m)), "{parts}: {ks:?}");
        for k in ks {
            assert!((level(k, m) - target).abs() <= stack.band() + 1e-12, "{parts}: level {k}");
        }
    }
    assert!((0.5 / 2.01 - 0.2488f64).abs() < 1e-4 && (1.0 / 6.0 / 2.01 - 0.0829f64).abs() < 1e-4);

    let single = cascade::build_cascade(&f, 1, n, m, None).unwrap();
    assert_eq!(single.graphs().len(), 1);
    assert!(single.primes().is_empty());
    let ks = single.top().levels(0, n);
    assert!(ks.contains(&nearest_level(1.0 / 2.01, m)));
}

#[test]
fn stats_serialize() {
    let f = segfunc::rescale(&SegmentFunction::oscillatory(1.0, 1.0)).unwrap().function;
    let stack = cascade::build_cascade(&f, 6, 32, 32, None).unwrap();
    let json = serde_json::to_value(stack.stats()).unwrap();
    assert_eq!(json["primes"], serde_json::json!([2, 3]));
    assert_eq!(json["occupancy"].as_array().unwrap().len(), 3);
}

fn random_stack(seed: u64, parts: usize, n: usize, m: usize, band: Option<f64>) -> Option<CascadeStack> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = SegmentFunction::parse_expression(&common::random_expression(&mut rng)).unwrap();
    let f = segfunc::rescale(&f).unwrap().function;
    cascade::build_cascade(&f, parts, n, m, band).ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn degeneracy_propagates(seed in any::<u64>(), parts in prop::sample::select(vec![2usize, 3, 4, 6])) {
        if let Some(stack) = random_stack(seed, parts, 16, 32, None) {
            for z in stack.graphs() {
                prop_assert!(mvf::diagonal_matches_band(z, stack.band()));
            }
        }
    }

    #[test]
    fn witnesses_are_sound(seed in any::<u64>(), parts in prop::sample::select(vec![2usize, 3, 4, 6])) {
        if let Some(stack) = random_stack(seed, parts, 16, 32, None) {
            let audit = cascade::audit_witnesses(&stack, None).unwrap();
            prop_assert_eq!(audit.failures, 0);
            for k in stack.top().levels(0, 16) {
                let pts = cascade::unwind_points(&stack, k).unwrap();
                prop_assert_eq!(pts.len(), parts + 1);
                for w in pts.windows(2) {
                    prop_assert!(w[0] <= w[1] && stack.graphs()[0].get(w[0], w[1], k));
                }
            }
        }
    }

    #[test]
    fn wider_band_never_removes_cells(seed in any::<u64>(), extra in 0.0f64..0.2) {
        let narrow = 0.2;
        let (Some(a), Some(b)) = (
            random_stack(seed, 6, 12, 32, Some(narrow)),
            random_stack(seed, 6, 12, 32, Some(narrow + extra)),
        ) else {
            return Ok(());
        };
        for (za, zb) in a.graphs().iter().zip(b.graphs()) {
            for (i, j) in za.triangle().cells() {
                for k in 0..=32 {
                    prop_assert!(!za.get(i, j, k) || zb.get(i, j, k));
                }
            }
        }
    }

    #[test]
    fn levels_compose_independently(seed in any::<u64>(), k in 1usize..16, noise in prop::collection::vec((0usize..13, 0usize..13), 1..20)) {
        let (n, m) = (12, 16);
        let Some(stack) = random_stack(seed, 1, n, m, None) else { return Ok(()); };
        let z = &stack.graphs()[0];
        let mut other = z.clone();
        let target = if k + 1 < m { k + 1 } else { k - 1 };
        for (i, j) in noise {
            let (i, j) = (i.min(j), i.max(j));
            if i != j {
                other.set(i, j, target, !other.get(i, j, target));
            }
        }
        for p in [2, 3] {
            let x = compose_p(&relation_from_graph(z, k), p);
            let y = compose_p(&relation_from_graph(&other, k), p);
            prop_assert_eq!(x.reach, y.reach);
        }
    }
}
