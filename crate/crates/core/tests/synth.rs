use std::collections::BTreeMap;

use mrseq_core::dicom::{group_series, parse_part10};
use mrseq_core::features::{extract_raw, fit_scaler, vectorize, RawMetadata};
use mrseq_core::forest::{fit_forest, predict_forest, ForestConfig};
use mrseq_core::geometry::{compute_geometry, DEFAULT_OVERLAP_TOL};
use mrseq_core::imaging::preprocess;
use mrseq_core::labeling::{curate, default_rules};
use mrseq_core::synth::{
    export_distribution_plot, external_profiles, generate_dataset, internal_profiles, serialize_part10, write_dataset,
    ExtraKind, PlotRow, ShiftKnobs, SyntheticSeries, Truth,
};
use mrseq_core::{class, SeqClass};

fn bytes(data: &[SyntheticSeries]) -> Vec<u8> {
    data.iter()
        .flat_map(|s| s.record.instances.iter().flat_map(serialize_part10))
        .collect()
}

#[test]
fn same_seed_same_bytes() {
    let p = internal_profiles(ShiftKnobs::SEPARABLE);
    let a = generate_dataset(&p, 6, 11).unwrap();
    let b = generate_dataset(&p, 6, 11).unwrap();
    assert_eq!(bytes(&a), bytes(&b));
    let c = generate_dataset(&p, 6, 12).unwrap();
    assert_ne!(bytes(&a), bytes(&c));
}

#[test]
fn fifty_patients_give_balanced_classes() {
    let p = internal_profiles(ShiftKnobs::SEPARABLE);
    let data = generate_dataset(&p, 50, 3).unwrap();
    let mut per_class: BTreeMap<SeqClass, usize> = BTreeMap::new();
    let mut per_extra: BTreeMap<ExtraKind, usize> = BTreeMap::new();
    for s in &data {
        match s.truth {
            Truth::Class(c) => *per_class.entry(c).or_default() += 1,
            Truth::Extra(k) => *per_extra.entry(k).or_default() += 1,
        }
    }
    assert_eq!(per_class.values().sum::<usize>(), 200);
    assert!(per_class.values().all(|&n| n == 50));
    assert_eq!(data.iter().filter(|s| s.nonconforming).count(), 20);
    assert_eq!(per_extra.get(&ExtraKind::Localizer), Some(&2));
    assert_eq!(per_extra.get(&ExtraKind::SagittalT2), Some(&2));
    assert_eq!(per_extra.get(&ExtraKind::CalculatedB), Some(&1));
}

#[test]
fn geometry_recovers_drawn_4d_structure() {
    let p = internal_profiles(ShiftKnobs {
        dwi_adc_overlap: 0.5,
        is4d_noise: 0.5,
    });
    let data = generate_dataset(&p, 20, 5).unwrap();
    for s in &data {
        let g = compute_geometry(&s.record, DEFAULT_OVERLAP_TOL);
        assert_eq!(g.is4d, s.is4d_drawn, "{}", s.record.series_instance_uid);
        if s.truth == Truth::Class(SeqClass::DCE) {
            assert!(g.is4d);
        }
    }
}

#[test]
fn default_mix_coverage_and_label_agreement() {
    for p in [
        internal_profiles(ShiftKnobs::SEPARABLE),
        external_profiles(ShiftKnobs::SEPARABLE),
    ] {
        let data = generate_dataset(&p, 50, 9).unwrap();
        let inputs: Vec<_> = data
            .iter()
            .map(|s| (s.record.clone(), compute_geometry(&s.record, DEFAULT_OVERLAP_TOL)))
            .collect();
        let r = curate(&inputs, &default_rules());
        assert!((0.85..=0.9).contains(&r.coverage_fraction), "{}", r.coverage_fraction);
        let truth: BTreeMap<&str, Truth> = data
            .iter()
            .map(|s| (s.record.series_instance_uid.as_str(), s.truth))
            .collect();
        for l in &r.labeled {
            assert_eq!(truth[l.series_uid.as_str()], Truth::Class(l.class));
        }
        for e in &r.excluded {
            assert!(matches!(truth[e.series_uid.as_str()], Truth::Extra(_)));
        }
    }
}

#[test]
fn written_tree_parses_back() {
    let p = external_profiles(ShiftKnobs::SEPARABLE);
    let data = generate_dataset(&p, 2, 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let paths = write_dataset(&data, dir.path()).unwrap();
    let parsed: Vec<_> = paths
        .iter()
        .map(|f| parse_part10(&std::fs::read(f).unwrap()).unwrap())
        .collect();
    let mut grouped = group_series(parsed).unwrap();
    let mut expected: Vec<_> = data.iter().map(|s| s.record.clone()).collect();
    expected.sort_by(|a, b| a.series_instance_uid.cmp(&b.series_instance_uid));
    grouped.sort_by(|a, b| a.series_instance_uid.cmp(&b.series_instance_uid));
    assert_eq!(grouped.len(), expected.len());
    for (g, e) in grouped.iter().zip(&expected) {
        let mut a = g.instances.clone();
        let mut b = e.instances.clone();
        a.sort_by(|x, y| x.sop_instance_uid.cmp(&y.sop_instance_uid));
        b.sort_by(|x, y| x.sop_instance_uid.cmp(&y.sop_instance_uid));
        assert_eq!(a, b);
    }
    for s in &data {
        let g = compute_geometry(&s.record, DEFAULT_OVERLAP_TOL);
        let img = preprocess(&s.record, &g, 64).unwrap();
        assert_eq!(img.values.len(), 64 * 64);
    }
}

fn labeled_raw(data: &[SyntheticSeries]) -> Vec<(RawMetadata, usize)> {
    data.iter()
        .filter_map(|s| {
            let c = s.truth.class()?;
            let g = compute_geometry(&s.record, DEFAULT_OVERLAP_TOL);
            Some((extract_raw(&s.record, &g), c.index()))
        })
        .collect()
}

#[test]
fn separable_profiles_give_near_perfect_forest() {
    let p = internal_profiles(ShiftKnobs::SEPARABLE);
    let train = labeled_raw(&generate_dataset(&p, 50, 21).unwrap());
    let mut test_profiles = p.clone();
    test_profiles.name = "SYNTH-INT-TEST".into();
    let test = labeled_raw(&generate_dataset(&test_profiles, 20, 22).unwrap());

    let raws: Vec<RawMetadata> = train.iter().map(|(r, _)| r.clone()).collect();
    let scaler = fit_scaler(&raws).unwrap();
    let x: Vec<[f64; 10]> = train.iter().map(|(r, _)| vectorize(r, &scaler).0).collect();
    let y: Vec<usize> = train.iter().map(|(_, l)| *l).collect();
    let forest = fit_forest(&x, &y, &ForestConfig::default(), 4).unwrap();
    let correct = test
        .iter()
        .filter(|(r, l)| class::argmax(&predict_forest(&forest, &vectorize(r, &scaler).0)) == *l)
        .count();
    let acc = correct as f64 / test.len() as f64;
    assert!(acc >= 0.99, "held-out accuracy {acc}");
}

#[test]
fn plot_rows_from_synth() {
    let data = generate_dataset(&internal_profiles(ShiftKnobs::SEPARABLE), 1, 0).unwrap();
    let rows: Vec<PlotRow> = labeled_raw(&data)
        .into_iter()
        .zip(&data)
        .map(|((r, l), s)| PlotRow {
            series_uid: s.record.series_instance_uid.clone(),
            label: SeqClass::from_index(l).unwrap().to_string(),
            repetition_time: r.repetition_time,
            echo_time: r.echo_time,
            flip_angle: r.flip_angle,
            contrast_present: r.contrast_present,
            is4d: r.is4d,
        })
        .collect();
    assert_eq!(rows.len(), 4);
    let plot = export_distribution_plot(&rows, None).unwrap();
    assert_eq!(plot.csv.lines().count(), 5);
    assert!(plot.html.starts_with("<!DOCTYPE html>"));
}
