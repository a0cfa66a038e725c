use mrseq_core::dicom::{InstanceMetadata, SeriesRecord};
use mrseq_core::geometry::{classify_orientation, compute_geometry, DEFAULT_OVERLAP_TOL};
use proptest::collection::vec;
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Frame {
    row: [f64; 3],
    col: [f64; 3],
    normal: [f64; 3],
}

fn unit(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    v.map(|x| x / n)
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn frame() -> impl Strategy<Value = Frame> {
    (prop::array::uniform3(-1.0..1.0f64), prop::array::uniform3(-1.0..1.0f64))
        .prop_filter("independent axes", |(a, b)| {
            let c = cross(*a, *b);
            (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt() > 0.1
        })
        .prop_map(|(a, b)| {
            let row = unit(a);
            let normal = unit(cross(row, b));
            let col = cross(normal, row);
            Frame { row, col, normal }
        })
}

/// Offsets on a 2.5 mm grid with jitter chosen so every pairwise gap is
/// either ≤ 0.004 mm or ≥ 0.026 mm, far from the 0.01 mm tolerance.
fn offsets() -> impl Strategy<Value = Vec<f64>> {
    vec(
        (0u32..30, prop::sample::select(vec![0.0, 0.002, -0.002, 0.03, -0.03])),
        1..=50,
    )
    .prop_map(|v| v.into_iter().map(|(k, j)| f64::from(k) * 2.5 + j).collect())
}

#[derive(Debug, Clone)]
struct Case {
    frame: Frame,
    origin: [f64; 3],
    offsets: Vec<f64>,
    inplane: Vec<(f64, f64)>,
}

fn case() -> impl Strategy<Value = Case> {
    (frame(), prop::array::uniform3(-200.0..200.0f64), offsets()).prop_flat_map(|(frame, origin, offsets)| {
        let n = offsets.len();
        vec((-50.0..50.0f64, -50.0..50.0f64), n).prop_map(move |inplane| Case {
            frame: frame.clone(),
            origin,
            offsets: offsets.clone(),
            inplane,
        })
    })
}

fn series(c: &Case, shift: [f64; 3]) -> SeriesRecord {
    let f = &c.frame;
    let orientation = [f.row[0], f.row[1], f.row[2], f.col[0], f.col[1], f.col[2]];
    let instances = c
        .offsets
        .iter()
        .zip(&c.inplane)
        .enumerate()
        .map(|(i, (&o, &(u, v)))| {
            let p: [f64; 3] =
                std::array::from_fn(|k| c.origin[k] + shift[k] + o * f.normal[k] + u * f.row[k] + v * f.col[k]);
            InstanceMetadata {
                sop_instance_uid: format!("1.2.{i}"),
                series_instance_uid: "1.2".into(),
                image_position_patient: Some(p),
                image_orientation_patient: Some(orientation),
                ..Default::default()
            }
        })
        .collect();
    SeriesRecord {
        series_instance_uid: "1.2".into(),
        patient_id: "P".into(),
        series_description: String::new(),
        instances,
    }
}

/// Pairwise check on offsets the test computes itself.
fn oracle(s: &SeriesRecord, normal: [f64; 3]) -> bool {
    let offs: Vec<f64> = s
        .instances
        .iter()
        .map(|i| {
            let p = i.image_position_patient.unwrap();
            p[0] * normal[0] + p[1] * normal[1] + p[2] * normal[2]
        })
        .collect();
    (0..offs.len()).any(|i| (0..offs.len()).any(|j| i != j && (offs[i] - offs[j]).abs() <= DEFAULT_OVERLAP_TOL))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn is4d_matches_pairwise_oracle(c in case()) {
        let s = series(&c, [0.0; 3]);
        let g = compute_geometry(&s, DEFAULT_OVERLAP_TOL);
        prop_assert_eq!(g.is4d, oracle(&s, c.frame.normal));
        prop_assert_eq!(g.offsets.len(), s.instances.len());
        prop_assert!(g.distinct_positions <= s.instances.len());
        let n = g.normal.unwrap();
        prop_assert!(((n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt() - 1.0).abs() < 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn is4d_survives_permutation_and_translation(
        c in case(),
        shift in prop::array::uniform3(-500.0..500.0f64),
        perm_seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let base = compute_geometry(&series(&c, [0.0; 3]), DEFAULT_OVERLAP_TOL);

        let mut permuted = series(&c, [0.0; 3]);
        permuted.instances.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(perm_seed));
        let pg = compute_geometry(&permuted, DEFAULT_OVERLAP_TOL);
        prop_assert_eq!(pg.is4d, base.is4d);
        prop_assert_eq!(pg.distinct_positions, base.distinct_positions);

        let moved = compute_geometry(&series(&c, shift), DEFAULT_OVERLAP_TOL);
        prop_assert_eq!(moved.is4d, base.is4d);
        prop_assert_eq!(moved.distinct_positions, base.distinct_positions);
    }

    #[test]
    fn orientation_ignores_normal_sign(f in frame()) {
        let neg = f.normal.map(|v| -v);
        prop_assert_eq!(classify_orientation(&f.normal), classify_orientation(&neg));
    }
}

#[test]
fn dce_like_positions_times_repeats() {
    let c = Case {
        frame: Frame {
            row: [1.0, 0.0, 0.0],
            col: [0.0, 1.0, 0.0],
            normal: [0.0, 0.0, 1.0],
        },
        origin: [0.0; 3],
        offsets: (0..3)
            .flat_map(|p| std::iter::repeat_n(f64::from(p) * 3.0, 5))
            .collect(),
        inplane: vec![(0.0, 0.0); 15],
    };
    let s = series(&c, [0.0; 3]);
    let g = compute_geometry(&s, DEFAULT_OVERLAP_TOL);
    assert!(g.is4d);
    assert_eq!(g.distinct_positions, 3);
    assert!(oracle(&s, c.frame.normal));
}
