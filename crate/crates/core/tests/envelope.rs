use equipart::envelope::{realize, Line, LineConfig};
use equipart::Segment;
use proptest::prelude::*;

fn unit() -> Segment {
    Segment::unit()
}

fn bounds(parts: &[Segment]) -> Vec<(f64, f64)> {
    parts.iter().map(|s| (s.a(), s.b())).collect()
}

fn config(lines: &[(f64, f64)]) -> LineConfig {
    LineConfig::new(lines.iter().map(|&l| Line::from(l)).collect()).unwrap()
}

#[test]
fn partition_examples() {
    assert_eq!(bounds(&config(&[(1.0, 0.0), (-1.0, 1.0)]).partition(unit())), vec![(0.0, 0.5), (0.5, 1.0)]);
    let parts = config(&[(0.0, 0.0), (0.0, 1.0)]).partition(unit());
    assert_eq!(parts[0], unit());
    assert!(parts[1].is_degenerate());
    let thirds = bounds(&config(&[(1.0, 0.0), (0.0, 1.0 / 3.0), (-1.0, 1.0)]).partition(unit()));
    let expected = [(0.0, 1.0 / 3.0), (1.0 / 3.0, 2.0 / 3.0), (2.0 / 3.0, 1.0)];
    for (got, want) in thirds.iter().zip(expected) {
        assert!((got.0 - want.0).abs() < 1e-15 && (got.1 - want.1).abs() < 1e-15);
    }
}

#[test]
fn identical_lines_are_rejected() {
    let lines = vec![Line::new(1.0, 0.5), Line::new(1.0, 0.5)];
    assert!(LineConfig::new(lines).is_err());
}

#[test]
fn realize_examples() {
    let cfg = realize(&[0.5], unit()).unwrap();
    let slopes: Vec<f64> = cfg.lines().iter().map(|l| l.slope).collect();
    assert_eq!(slopes, vec![1.0, 0.0]);
    assert_eq!(bounds(&cfg.partition(unit())), vec![(0.0, 0.5), (0.5, 1.0)]);

    let thirds = realize(&[1.0 / 3.0, 2.0 / 3.0], unit()).unwrap().partition(unit());
    assert!((thirds[1].a() - 1.0 / 3.0).abs() < 1e-15 && (thirds[1].b() - 2.0 / 3.0).abs() < 1e-15);

    let glued = realize(&[0.2, 0.2], unit()).unwrap().partition(unit());
    assert_eq!(bounds(&glued), vec![(0.0, 0.2), (0.2, 0.2), (0.2, 1.0)]);

    assert!(realize(&[0.6, 0.2], unit()).is_err());
    assert!(realize(&[0.2], Segment::new(0.5, 1.0).unwrap()).is_err());
}

#[test]
fn permute_examples() {
    let two = config(&[(1.0, 0.0), (-1.0, 1.0)]);
    let swapped = two.permute(&[1, 0]).unwrap().partition(unit());
    assert_eq!(bounds(&swapped), vec![(0.5, 1.0), (0.0, 0.5)]);
    assert_eq!(two.permute(&[0, 1]).unwrap(), two);

    let thirds = config(&[(1.0, 0.0), (0.0, 1.0 / 3.0), (-1.0, 1.0)]);
    let base = thirds.partition(unit());
    let cycled = thirds.permute(&[1, 2, 0]).unwrap().partition(unit());
    assert_eq!(cycled, vec![base[1], base[2], base[0]]);
    let mut a = bounds(&base);
    let mut b = bounds(&cycled);
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    assert_eq!(a, b);
    assert!(thirds.permute(&[0, 0, 1]).is_err());
}

fn lines(max: usize) -> impl Strategy<Value = LineConfig> {
    prop::collection::vec((-4.0f64..4.0, -4.0f64..4.0), 1..=max).prop_filter_map("distinct lines", |v| {
        LineConfig::new(v.into_iter().map(Line::from).collect()).ok()
    })
}

fn segment() -> impl Strategy<Value = Segment> {
    (0.0f64..=1.0, 0.0f64..=1.0).prop_map(|(x, y)| Segment::new(x.min(y), x.max(y)).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn parts_tile_the_segment(cfg in lines(8), s in segment()) {
        let parts = cfg.partition(s);
        prop_assert_eq!(parts.len(), cfg.len());
        let total: f64 = parts.iter().map(Segment::len).sum();
        prop_assert!((total - s.len()).abs() <= 1e-12);
        let mut sorted = parts.clone();
        sorted.sort_by(|x, y| x.a().total_cmp(&y.a()).then(x.b().total_cmp(&y.b())));
        prop_assert_eq!(sorted[0].a(), s.a());
        prop_assert_eq!(sorted.last().unwrap().b(), s.b());
        for w in sorted.windows(2) {
            prop_assert_eq!(w[0].b(), w[1].a());
        }
    }

    #[test]
    fn owners_appear_in_decreasing_slope(cfg in lines(8), s in segment()) {
        let parts = cfg.partition(s);
        let mut owners: Vec<usize> = (0..cfg.len()).filter(|&i| !parts[i].is_degenerate()).collect();
        owners.sort_by(|&x, &y| parts[x].a().total_cmp(&parts[y].a()));
        for w in owners.windows(2) {
            prop_assert!(cfg.lines()[w[0]].slope > cfg.lines()[w[1]].slope);
        }
        // each owner is lowest at the midpoint of its part
        for &i in &owners {
            let x = 0.5 * (parts[i].a() + parts[i].b());
            let own = cfg.lines()[i].at(x);
            prop_assert!(cfg.lines().iter().all(|l| l.at(x) >= own - 1e-9));
        }
    }

    #[test]
    fn partition_is_equivariant(cfg in lines(8), s in segment(), seed in any::<u64>()) {
        let p = cfg.len();
        let mut sigma: Vec<usize> = (0..p).collect();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(sigma.as_mut_slice(), &mut rng);
        // permute takes line i of the result from line perm[i]; relabelling by
        // sigma uses its inverse.
        let mut inverse = vec![0; p];
        for (i, &t) in sigma.iter().enumerate() {
            inverse[t] = i;
        }
        let original = cfg.partition(s);
        let permuted = cfg.permute(&inverse).unwrap().partition(s);
        for i in 0..p {
            let (x, y) = (permuted[sigma[i]], original[i]);
            prop_assert!((x.a() - y.a()).abs() <= 1e-12 && (x.b() - y.b()).abs() <= 1e-12);
        }
    }

    #[test]
    fn realize_round_trips(s in segment(), raw in prop::collection::vec(0.0f64..=1.0, 0..7)) {
        let mut cuts: Vec<f64> = raw.iter().map(|u| s.a() + u * s.len()).map(|c| c.clamp(s.a(), s.b())).collect();
        cuts.sort_by(f64::total_cmp);
        let parts = realize(&cuts, s).unwrap().partition(s);
        let mut pts = vec![s.a()];
        pts.extend_from_slice(&cuts);
        pts.push(s.b());
        prop_assert_eq!(parts.len(), pts.len() - 1);
        for (part, w) in parts.iter().zip(pts.windows(2)) {
            prop_assert!((part.a() - w[0]).abs() <= 1e-12 && (part.b() - w[1]).abs() <= 1e-12);
        }
    }
}
