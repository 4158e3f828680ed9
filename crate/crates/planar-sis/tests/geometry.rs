use planar_sis::geometry::{
    brute_force_neighbors, sample_poisson, torus_distance, CellIndex, Position, TorusDomain,
};
use proptest::prelude::*;

fn point(side: f64) -> impl Strategy<Value = Position> {
    (0.0..side, 0.0..side).prop_map(|(x, y)| Position::new(x, y))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cell_index_agrees_with_brute_force(
        side in 4.0f64..20.0,
        a_frac in 0.05f64..0.45,
        raw in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..200),
    ) {
        let a = a_frac * side;
        let dom = TorusDomain::new(side, a).unwrap();
        let pts: Vec<Position> = raw.iter().map(|&(x, y)| Position::new(x * side, y * side)).collect();
        let idx = CellIndex::new(&pts, a, dom);
        for i in 0..pts.len() {
            let mut got = idx.neighbors_of(i);
            got.sort_unstable();
            prop_assert_eq!(got, brute_force_neighbors(&pts, pts[i], a, &dom, Some(i)));
        }
    }

    #[test]
    fn torus_distance_is_a_metric(p in point(10.0), q in point(10.0), r in point(10.0)) {
        let dom = TorusDomain::new(10.0, 1.0).unwrap();
        let d = |u, v| torus_distance(u, v, &dom);
        prop_assert!((d(p, q) - d(q, p)).abs() < 1e-12);
        prop_assert!(d(p, p) == 0.0);
        prop_assert!(d(p, q) <= 10.0 * std::f64::consts::FRAC_1_SQRT_2 + 1e-12);
        prop_assert!(d(p, r) <= d(p, q) + d(q, r) + 1e-9);
    }

    #[test]
    fn shifting_both_points_keeps_distance(p in point(10.0), q in point(10.0), s in point(10.0)) {
        let dom = TorusDomain::new(10.0, 1.0).unwrap();
        let shift = |u: Position| Position::new(dom.wrap(u.x + s.x), dom.wrap(u.y + s.y));
        let d0 = torus_distance(p, q, &dom);
        let d1 = torus_distance(shift(p), shift(q), &dom);
        prop_assert!((d0 - d1).abs() < 1e-9);
    }

    #[test]
    fn relocation_matches_fresh_index(
        raw in prop::collection::vec((0.0f64..8.0, 0.0f64..8.0), 2..60),
        moves in prop::collection::vec((0usize..1000, 0.0f64..8.0, 0.0f64..8.0), 1..40),
    ) {
        let dom = TorusDomain::new(8.0, 1.0).unwrap();
        let mut pts: Vec<Position> = raw.iter().map(|&(x, y)| Position::new(x, y)).collect();
        let mut idx = CellIndex::new(&pts, 1.0, dom);
        for (k, x, y) in moves {
            let id = k % pts.len();
            pts[id] = Position::new(x, y);
            idx.relocate(id, pts[id]);
        }
        for i in 0..pts.len() {
            let mut got = idx.neighbors_of(i);
            got.sort_unstable();
            prop_assert_eq!(got, brute_force_neighbors(&pts, pts[i], 1.0, &dom, Some(i)));
        }
    }
}

#[test]
fn poisson_counts_are_equidispersed() {
    let dom = TorusDomain::new(10.0, 1.0).unwrap();
    let lambda = 0.7;
    let n: Vec<f64> = (0..2000)
        .map(|s| sample_poisson(lambda, &dom, s).unwrap().len() as f64)
        .collect();
    let m = n.iter().sum::<f64>() / n.len() as f64;
    let var = n.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n.len() - 1) as f64;
    let expected = lambda * dom.area();
    // se of the mean is sqrt(70/2000) ~ 0.19; dispersion index se ~ sqrt(2/2000)
    assert!((m - expected).abs() < 0.8, "mean {m}");
    assert!((var / m - 1.0).abs() < 0.15, "dispersion {}", var / m);
}

#[test]
fn poisson_points_are_uniform() {
    let dom = TorusDomain::new(10.0, 1.0).unwrap();
    let pts = sample_poisson(5.0, &dom, 42).unwrap();
    let mut cells = [0.0f64; 16];
    for p in &pts {
        let i = ((p.x / 2.5) as usize).min(3) * 4 + ((p.y / 2.5) as usize).min(3);
        cells[i] += 1.0;
    }
    let e = pts.len() as f64 / 16.0;
    let chi2: f64 = cells.iter().map(|c| (c - e).powi(2) / e).sum();
    // 15 dof; 99.9% quantile is 37.7
    assert!(chi2 < 37.7, "chi2 {chi2}");
}
