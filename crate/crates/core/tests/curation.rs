use std::collections::BTreeSet;

use mrseq_core::geometry::OrientationClass;
use mrseq_core::labeling::{curate, default_rules, load_rules, CurationInput, DEFAULT_RULES};
use proptest::collection::vec;
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Item {
    uid: String,
    description: String,
    orientation: OrientationClass,
}

impl CurationInput for Item {
    fn series_uid(&self) -> &str {
        &self.uid
    }
    fn description(&self) -> &str {
        &self.description
    }
    fn orientation(&self) -> OrientationClass {
        self.orientation
    }
}

fn orientation() -> impl Strategy<Value = OrientationClass> {
    prop::sample::select(vec![
        OrientationClass::Axial,
        OrientationClass::Axial,
        OrientationClass::Sagittal,
        OrientationClass::Coronal,
        OrientationClass::Oblique,
        OrientationClass::Unknown,
    ])
}

fn description() -> impl Strategy<Value = String> {
    let words = vec![
        "t2",
        "tse",
        "ax",
        "DWI",
        "diff",
        "ADC",
        "apparent",
        "dyn",
        "vibe",
        "localizer",
        "calc",
        "b1400",
        "b50",
        "series",
        "prostate",
        "",
        "sag",
        "x",
        "trace",
        "+c",
        "3-plane",
    ];
    vec(prop::sample::select(words), 0..4).prop_map(|w| w.join(" "))
}

fn items() -> impl Strategy<Value = Vec<Item>> {
    vec((description(), orientation()), 0..60).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (description, orientation))| Item {
                uid: format!("1.9.{i}"),
                description,
                orientation,
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn curation_partitions_input(items in items()) {
        let r = curate(&items, &default_rules());
        prop_assert_eq!(r.total(), items.len());
        let mut seen = BTreeSet::new();
        for uid in r.labeled.iter().map(|l| &l.series_uid)
            .chain(r.excluded.iter().map(|e| &e.series_uid))
            .chain(r.unmatched.iter())
        {
            prop_assert!(seen.insert(uid.clone()), "{} appears twice", uid);
        }
        let expected = if items.is_empty() { 0.0 } else { r.labeled.len() as f64 / items.len() as f64 };
        prop_assert_eq!(r.coverage_fraction, expected);
    }

    #[test]
    fn rule_line_order_is_irrelevant(items in items(), perm in Just(()).prop_perturb(|_, mut rng| rng.next_u64())) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut lines: Vec<&str> = DEFAULT_RULES.lines().collect();
        lines.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(perm));
        let shuffled = load_rules(&lines.join("\n")).unwrap();
        prop_assert_eq!(curate(&items, &shuffled), curate(&items, &default_rules()));
    }

    #[test]
    fn sagittal_and_coronal_always_excluded(desc in description(), sag in any::<bool>()) {
        let o = if sag { OrientationClass::Sagittal } else { OrientationClass::Coronal };
        let r = curate(&[Item { uid: "1".into(), description: desc, orientation: o }], &default_rules());
        prop_assert_eq!(r.excluded.len(), 1);
    }
}

#[test]
fn empty_description_is_unmatched() {
    let r = curate(
        &[Item {
            uid: "1".into(),
            description: "   ".into(),
            orientation: OrientationClass::Axial,
        }],
        &default_rules(),
    );
    assert_eq!(r.unmatched, vec!["1".to_string()]);
}

#[test]
fn ten_series_arithmetic() {
    let mut items: Vec<Item> = (0..8)
        .map(|i| Item {
            uid: format!("1.{i}"),
            description: "t2_tse_tra".into(),
            orientation: OrientationClass::Axial,
        })
        .collect();
    items.push(Item {
        uid: "1.8".into(),
        description: "localizer".into(),
        orientation: OrientationClass::Axial,
    });
    items.push(Item {
        uid: "1.9".into(),
        description: "mystery".into(),
        orientation: OrientationClass::Axial,
    });
    let r = curate(&items, &default_rules());
    assert_eq!((r.labeled.len(), r.excluded.len(), r.unmatched.len()), (8, 1, 1));
    assert!((r.coverage_fraction - 0.8).abs() < 1e-12);
    assert_eq!(curate::<Item>(&[], &default_rules()).coverage_fraction, 0.0);
}
