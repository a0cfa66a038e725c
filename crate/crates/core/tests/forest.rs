use mrseq_core::forest::{best_split, fit_forest, gini, predict_forest, ForestConfig, Node, RandomForest};
use mrseq_core::seed;
use proptest::prelude::*;
use rand::Rng;

fn row(a: f64, b: f64) -> [f64; 10] {
    let mut r = [0.0; 10];
    r[0] = a;
    r[1] = b;
    r
}

/// Exhaustive enumeration with an f64 Gini: every (feature, midpoint) pair,
/// keeping the first strictly-better candidate in (feature, threshold) order.
fn brute_force(points: &[([f64; 10], usize)], min_leaf: usize) -> Option<(usize, f64)> {
    let parent: Vec<u32> = (0..4)
        .map(|c| points.iter().filter(|p| p.1 == c).count() as u32)
        .collect();
    let parent_g = gini(&parent).unwrap();
    let n = points.len() as f64;
    let mut best: Option<(f64, usize, f64)> = None;
    for f in 0..2 {
        let mut vals: Vec<f64> = points.iter().map(|p| p.0[f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = w[0] + (w[1] - w[0]) / 2.0;
            let mut l = [0u32; 4];
            let mut r = [0u32; 4];
            for p in points {
                if p.0[f] <= t {
                    l[p.1] += 1
                } else {
                    r[p.1] += 1
                }
            }
            let (nl, nr) = (l.iter().sum::<u32>(), r.iter().sum::<u32>());
            if (nl as usize) < min_leaf || (nr as usize) < min_leaf {
                continue;
            }
            let imp = (f64::from(nl) * gini(&l).unwrap() + f64::from(nr) * gini(&r).unwrap()) / n;
            if imp >= parent_g - 1e-12 {
                continue;
            }
            if best.is_none_or(|b| imp < b.0 - 1e-12) {
                best = Some((imp, f, t));
            }
        }
    }
    best.map(|b| (b.1, b.2))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn greedy_split_matches_exhaustive_search(
        pts in prop::collection::vec(((0i32..6), (0i32..6), 0usize..3), 2..=8),
        min_leaf in 1usize..3,
    ) {
        let points: Vec<([f64; 10], usize)> =
            pts.iter().map(|&(a, b, c)| (row(f64::from(a), f64::from(b)), c)).collect();
        let x: Vec<[f64; 10]> = points.iter().map(|p| p.0).collect();
        let y: Vec<usize> = points.iter().map(|p| p.1).collect();
        let rows: Vec<usize> = (0..x.len()).collect();
        let got = best_split(&x, &y, &rows, &[0, 1], 4, min_leaf).map(|s| (s.feature, s.threshold));
        prop_assert_eq!(got, brute_force(&points, min_leaf));
    }

    #[test]
    fn strictly_increasing_transform_keeps_tree_structure(seed_v in any::<u64>(), bootstrap in any::<bool>()) {
        let mut rng = seed::rng(seed_v, "mono", 0);
        let x: Vec<[f64; 10]> = (0..40)
            .map(|_| std::array::from_fn(|_| rng.gen_range(-3.0..3.0)))
            .collect();
        let y: Vec<usize> = x.iter().map(|r| usize::from(r[0] + r[3] > 0.0) + 2 * usize::from(r[5] > 1.0)).collect();
        let f = |v: f64| v.exp() + 3.0 * v;
        let xt: Vec<[f64; 10]> = x.iter().map(|r| r.map(f)).collect();
        let cfg = ForestConfig { n_trees: 5, bootstrap, ..ForestConfig::default() };
        let Ok(a) = fit_forest(&x, &y, &cfg, seed_v) else { return Ok(()) };
        let b = fit_forest(&xt, &y, &cfg, seed_v).unwrap();
        for (ta, tb) in a.trees.iter().zip(&b.trees) {
            prop_assert_eq!(ta.nodes.len(), tb.nodes.len());
            for (na, nb) in ta.nodes.iter().zip(&tb.nodes) {
                match (na, nb) {
                    (Node::Leaf { counts: ca }, Node::Leaf { counts: cb }) => prop_assert_eq!(ca, cb),
                    (
                        Node::Split { feature: fa, left: la, right: ra, .. },
                        Node::Split { feature: fb, left: lb, right: rb, .. },
                    ) => prop_assert_eq!((fa, la, ra), (fb, lb, rb)),
                    _ => prop_assert!(false, "node kinds differ"),
                }
            }
            // Paths agree for every input seen by the tree. Unseen inputs that
            // fall between two neighbouring training values may cross the
            // midpoint differently, so they are not compared.
            if !bootstrap {
                for (r, rt) in x.iter().zip(&xt) {
                    prop_assert_eq!(ta.decision_path(r), tb.decision_path(rt));
                }
            }
        }
    }

    #[test]
    fn probabilities_sum_to_one(seed_v in any::<u64>(), probe in prop::array::uniform10(-5.0f64..5.0)) {
        let mut rng = seed::rng(seed_v, "sum", 0);
        let x: Vec<[f64; 10]> = (0..30).map(|_| std::array::from_fn(|_| rng.gen_range(-2.0..2.0))).collect();
        let y: Vec<usize> = (0..30).map(|i| i % 4).collect();
        let cfg = ForestConfig { n_trees: 7, ..ForestConfig::default() };
        let forest = fit_forest(&x, &y, &cfg, seed_v).unwrap();
        let p = predict_forest(&forest, &probe);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn separable_toy_set_is_learned() {
    // Two classes split by x0 < 0.5: verify separability by brute force first.
    let x: Vec<[f64; 10]> = (0..20)
        .map(|i| row(f64::from(i) / 20.0, f64::from((i * 7) % 5)))
        .collect();
    let y: Vec<usize> = x.iter().map(|r| usize::from(r[0] >= 0.5)).collect();
    let separable = (0..2).any(|f| {
        let mut v: Vec<f64> = x.iter().map(|r| r[f]).collect();
        v.sort_by(f64::total_cmp);
        v.windows(2).any(|w| {
            let t = (w[0] + w[1]) / 2.0;
            x.iter().zip(&y).all(|(r, &l)| (r[f] > t) == (l == 1))
        })
    });
    assert!(separable);
    let forest = fit_forest(&x, &y, &ForestConfig::default(), 1).unwrap();
    for (r, &l) in x.iter().zip(&y) {
        let p = predict_forest(&forest, r);
        assert_eq!(mrseq_core::class::argmax(&p), l);
    }
}

#[test]
fn same_seed_same_bytes() {
    let mut rng = seed::rng(8, "det", 0);
    let x: Vec<[f64; 10]> = (0..60)
        .map(|_| std::array::from_fn(|_| rng.gen_range(0.0..1.0)))
        .collect();
    let y: Vec<usize> = x.iter().map(|r| (r[2] * 4.0) as usize).collect();
    let a = fit_forest(&x, &y, &ForestConfig::default(), 42).unwrap();
    let b = fit_forest(&x, &y, &ForestConfig::default(), 42).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    let c = fit_forest(&x, &y, &ForestConfig::default(), 43).unwrap();
    assert_ne!(a.to_json(), c.to_json());
    let back = RandomForest::from_json(&a.to_json()).unwrap();
    assert_eq!(back, a);
    assert!(a.trees.iter().all(|t| t.depth() <= 12));
}
