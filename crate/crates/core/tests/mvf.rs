mod common;

use equipart::mvf::{
    self, level, nearest_level, CylinderGrid, GraphSet, PhiGrid, Separation,
};
use equipart::{segfunc, Error, SegmentFunction};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn graph_of(f: &SegmentFunction, n: usize, m: usize) -> (GraphSet, f64) {
    let table = f.tabulate(n).unwrap();
    let band = mvf::default_band(m, table.adjacent_modulus());
    (mvf::graph_from_function(&PhiGrid::new(&table, m), band).unwrap(), band)
}

fn is_path(z: &GraphSet, path: &[(usize, usize, usize)]) -> bool {
    let steps_ok = path.windows(2).all(|w| {
        let (a, b) = (w[0], w[1]);
        a.0.abs_diff(b.0) + a.1.abs_diff(b.1) + a.2.abs_diff(b.2) == 1
    });
    let free = path.iter().all(|&(i, j, k)| i <= j && !z.get(i, j, k));
    steps_ok && free && path.first().map(|c| c.2) == Some(0) && path.last().map(|c| c.2) == Some(z.m())
}

#[test]
fn zero_function_marks_the_band_around_zero() {
    let (n, m, band) = (10, 64, 0.1);
    let phi = CylinderGrid::from_fn(n, m, |_, _, k| level(k, m));
    let z = mvf::graph_from_function(&phi, band).unwrap();
    for (i, j) in z.triangle().cells() {
        for k in 0..=m {
            assert_eq!(z.get(i, j, k), level(k, m).abs() <= band, "({i},{j},{k})");
        }
    }
}

#[test]
fn uniform_rescaled_full_segment_sits_near_its_value() {
    let f = SegmentFunction::additive_expr("1").unwrap().scaled(1.0 / 2.01);
    let (n, m) = (64, 128);
    let (z, band) = graph_of(&f, n, m);
    let target: f64 = 1.0 / 2.01;
    assert!((target - 0.4975).abs() < 1e-4);
    let ks = mvf::values_at(&z, 0, n).unwrap();
    assert!(ks.contains(&nearest_level(target, m)));
    for k in ks {
        assert!((level(k, m) - target).abs() <= band + 2.0 / m as f64);
    }
}

#[test]
fn wrong_boundary_sign_is_not_nice() {
    let phi = CylinderGrid::from_fn(4, 8, |_, _, k| if k == 0 { 1.0 } else { level(k, 8) });
    assert!(matches!(mvf::graph_from_function(&phi, 0.1), Err(Error::NotNice { .. })));
}

#[test]
fn separation_examples() {
    let (n, m) = (12, 16);
    assert_eq!(mvf::check_separation(&GraphSet::slab(n, m, m / 2)), Separation::Separated);
    let empty = GraphSet::empty(n, m);
    match mvf::check_separation(&empty) {
        Separation::Path(p) => assert!(is_path(&empty, &p)),
        Separation::Separated => panic!("empty graph separates"),
    }
    // A slab with one hole leaks through the hole.
    let mut holed = GraphSet::slab(n, m, m / 2);
    holed.set(3, 7, m / 2, false);
    match mvf::check_separation(&holed) {
        Separation::Path(p) => {
            assert!(is_path(&holed, &p));
            assert!(p.contains(&(3, 7, m / 2)));
        }
        Separation::Separated => panic!("holed slab separates"),
    }
    let f = SegmentFunction::oscillatory(2.0, 0.5);
    let (z, _) = graph_of(&f, 64, 64);
    assert!(mvf::check_separation(&z).is_separated());
}

#[test]
fn degeneracy_examples() {
    let f = SegmentFunction::parse_expression("sin(3*(b-a))*cos(a+b)").unwrap();
    let (mut z, band) = graph_of(&f, 32, 64);
    mvf::check_degeneracy(&z, band).unwrap();
    assert!(mvf::diagonal_matches_band(&z, band));
    z.set(3, 3, 0, true);
    match mvf::check_degeneracy(&z, band) {
        Err(Error::Degeneracy { i, k, y }) => assert_eq!((i, k, y), (3, 0, -1.0)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn reconstruction_of_a_flat_slab() {
    let (n, m) = (8, 16);
    let z = GraphSet::slab(n, m, m / 2);
    let psi = mvf::function_from_graph(&z).unwrap();
    for (i, j) in z.triangle().cells() {
        for k in 0..=m {
            let v = psi.get(i, j, k);
            let y = level(k, m);
            assert_eq!(v.partial_cmp(&0.0), y.partial_cmp(&0.0), "({i},{j},{k})");
            if i == j {
                assert_eq!(v, y);
            }
        }
    }
}

#[test]
fn values_at_examples() {
    let (n, m) = (8, 16);
    let slab = GraphSet::slab(n, m, m / 2);
    for (i, j) in slab.triangle().cells() {
        assert_eq!(mvf::values_at(&slab, i, j).unwrap(), vec![m / 2]);
    }
    let f = segfunc::rescale(&SegmentFunction::oscillatory(1.0, 1.0)).unwrap().function;
    let (z, band) = graph_of(&f, 32, 64);
    for i in 0..=32 {
        for k in mvf::values_at(&z, i, i).unwrap() {
            assert!(level(k, 64).abs() <= band);
        }
    }
    assert!(mvf::values_at(&GraphSet::empty(4, 8), 0, 4).is_err());
}

#[test]
fn refinement_keeps_separation() {
    let families = [
        SegmentFunction::additive_expr("1").unwrap(),
        SegmentFunction::oscillatory(1.0, 1.0),
        SegmentFunction::oscillatory(3.0, 0.5),
        SegmentFunction::parse_expression("(b-a)*cos(4*(a+b)+0.5)").unwrap(),
    ];
    for f in &families {
        let f = segfunc::rescale(f).unwrap().function;
        for size in [64, 128, 256] {
            let (z, band) = graph_of(&f, size, size);
            assert!(mvf::check_separation(&z).is_separated(), "{} at {size}", f.describe());
            assert!(mvf::diagonal_matches_band(&z, band));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn graphs_of_random_functions_are_nice(seed in any::<u64>(), n in 4usize..24, half_m in 8usize..24) {
        let m = 2 * half_m;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = SegmentFunction::parse_expression(&common::random_expression(&mut rng)).unwrap();
        let f = segfunc::rescale(&f).unwrap().function;
        let (z, band) = graph_of(&f, n, m);
        prop_assume!(band + 2.0 / (m as f64) < 1.0);
        prop_assert!(mvf::check_separation(&z).is_separated());
        prop_assert!(mvf::check_degeneracy(&z, band).is_ok());
        for (i, j) in z.triangle().cells() {
            prop_assert!(!mvf::values_at(&z, i, j).unwrap().is_empty());
        }

        let psi = mvf::function_from_graph(&z).unwrap();
        for (i, j) in z.triangle().cells() {
            prop_assert!(psi.get(i, j, 0) < 0.0 && psi.get(i, j, m) > 0.0);
            for k in 0..=m {
                let v = psi.get(i, j, k);
                prop_assert!(v.abs() <= 1.0);
                if i == j {
                    prop_assert_eq!(v, level(k, m));
                } else if z.get(i, j, k) {
                    prop_assert_eq!(v, 0.0);
                }
            }
        }
        let back = mvf::graph_from_function(&psi, band).unwrap();
        for (i, j) in z.triangle().cells() {
            for k in 0..=m {
                prop_assert!(!z.get(i, j, k) || back.get(i, j, k));
            }
        }
    }
}
