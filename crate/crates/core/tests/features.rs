use mrseq_core::features::{fit_scaler, vectorize, RawMetadata, FEATURE_LEN};
use mrseq_core::imaging::{normalize01, resample_bilinear, ImageMatrix};
use proptest::collection::vec;
use proptest::prelude::*;
use proptest::sample::subsequence;

fn raw() -> impl Strategy<Value = RawMetadata> {
    (
        prop::option::of(0.5..8000.0f64),
        prop::option::of(0.5..200.0f64),
        prop::option::of(1.0..180.0f64),
        subsequence(vec!["SE", "GR", "EP", "IR", "RM", "XX"], 0..=3),
        any::<bool>(),
        any::<bool>(),
    )
        .prop_map(|(tr, te, fa, seq, contrast, is4d)| RawMetadata {
            repetition_time: tr,
            echo_time: te,
            flip_angle: fa,
            scanning_sequence: seq.into_iter().map(String::from).collect(),
            contrast_present: contrast,
            is4d,
        })
}

fn wild_raw() -> impl Strategy<Value = RawMetadata> {
    let any_f = prop_oneof![any::<f64>(), Just(f64::NAN), Just(f64::INFINITY), Just(-0.0)];
    (
        prop::option::of(any_f.clone()),
        prop::option::of(any_f.clone()),
        prop::option::of(any_f),
        any::<bool>(),
    )
        .prop_map(|(tr, te, fa, is4d)| RawMetadata {
            repetition_time: tr,
            echo_time: te,
            flip_angle: fa,
            scanning_sequence: vec!["EP".into()],
            contrast_present: false,
            is4d,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn scaled_training_set_is_standardized(train in vec(raw(), 2..60)) {
        let scaler = fit_scaler(&train).unwrap();
        let vs: Vec<_> = train.iter().map(|r| vectorize(r, &scaler)).collect();
        let getters: [fn(&RawMetadata) -> Option<f64>; 3] =
            [|r| r.repetition_time, |r| r.echo_time, |r| r.flip_angle];
        for (k, get) in getters.iter().enumerate() {
            // Statistics over rows that carry the attribute; fills sit at 0.
            let present: Vec<f64> = train.iter().zip(&vs).filter(|(r, _)| get(r).is_some()).map(|(_, v)| v.0[k]).collect();
            if present.is_empty() {
                continue;
            }
            let n = present.len() as f64;
            let mean = present.iter().sum::<f64>() / n;
            prop_assert!(mean.abs() < 1e-9, "attribute {} mean {}", k, mean);
            let a = &scaler.attributes[k];
            prop_assert!(a.std > 0.0);
            if !a.degenerate {
                let var = present.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                prop_assert!((var.sqrt() - 1.0).abs() < 1e-9, "attribute {} std {}", k, var.sqrt());
            }
        }
    }

    #[test]
    fn vectorize_is_total_and_leaves_scaler_alone(train in vec(raw(), 1..20), probe in wild_raw()) {
        let scaler = fit_scaler(&train).unwrap();
        let before = scaler.clone();
        let v = vectorize(&probe, &scaler);
        prop_assert_eq!(v.0.len(), FEATURE_LEN);
        prop_assert!(v.0.iter().all(|x| x.is_finite()));
        prop_assert!(v.0[3..].iter().all(|x| *x == 0.0 || *x == 1.0));
        prop_assert_eq!(vectorize(&probe, &scaler), v);
        prop_assert_eq!(scaler, before);
    }
}

fn image() -> impl Strategy<Value = ImageMatrix> {
    (1usize..20, 1usize..20)
        .prop_flat_map(|(h, w)| vec(-1000.0..70000.0f64, h * w).prop_map(move |d| ImageMatrix::new(h, w, d).unwrap()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn resampling_stays_within_input_bounds(img in image(), oh in 1usize..70, ow in 1usize..70) {
        let lo = img.data().iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = img.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let out = resample_bilinear(&img, oh, ow).unwrap();
        prop_assert_eq!((out.rows(), out.cols()), (oh, ow));
        let slack = 1e-9 * hi.abs().max(lo.abs()).max(1.0);
        prop_assert!(out.data().iter().all(|v| *v >= lo - slack && *v <= hi + slack));
    }

    #[test]
    fn normalization_range_and_affine_invariance(img in image(), a in 0.01..100.0f64, b in -1000.0..1000.0f64) {
        let n = normalize01(&img);
        prop_assert!(n.values.iter().all(|v| (0.0..=1.0).contains(v)));
        let lo = img.data().iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = img.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            prop_assert!(n.values.contains(&0.0));
            prop_assert!(n.values.contains(&1.0));
        }
        let moved = ImageMatrix::new(img.rows(), img.cols(), img.data().iter().map(|v| a * v + b).collect()).unwrap();
        let m = normalize01(&moved);
        for (x, y) in n.values.iter().zip(&m.values) {
            prop_assert!((x - y).abs() < 1e-9, "{} vs {}", x, y);
        }
    }
}

#[test]
fn identity_resample_is_bitwise() {
    let data: Vec<f64> = (0..64 * 64).map(|i| (f64::from(i) * 0.37).sin()).collect();
    let img = ImageMatrix::new(64, 64, data).unwrap();
    assert_eq!(resample_bilinear(&img, 64, 64).unwrap(), img);
}
