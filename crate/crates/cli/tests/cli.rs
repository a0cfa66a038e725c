use std::ffi::{OsStr, OsString};
use std::path::Path;
use std::process::Command;

use mrseq::{EXIT_OK, EXIT_USAGE};
use mrseq_core::dicom::InstanceMetadata;
use mrseq_core::evaluate::ReportRow;
use mrseq_core::synth::serialize_part10;

/// Owned argument list, so paths built inline outlive the statement.
macro_rules! argv {
    ($($a:expr),* $(,)?) => { vec![$(OsString::from($a)),*] };
}

fn bin<S: AsRef<OsStr>>(args: &[S]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_mrseq"))
        .args(args)
        .output()
        .expect("spawn mrseq")
        .status
        .code()
        .expect("exit code")
}

fn run<S: AsRef<OsStr>>(args: &[S]) -> i32 {
    let argv = std::iter::once(OsString::from("mrseq")).chain(args.iter().map(|a| a.as_ref().to_owned()));
    mrseq::main_with_args(argv)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn data_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(String::from)
        .collect()
}

fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Vec<T> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .unwrap()
        .deserialize()
        .collect::<Result<_, _>>()
        .unwrap()
}

#[test]
fn usage_errors_exit_2_and_help_exits_0() {
    assert_eq!(bin::<&str>(&[]), EXIT_USAGE);
    assert_eq!(bin(&["ingest"]), EXIT_USAGE);
    assert_eq!(bin(&["frobnicate"]), EXIT_USAGE);
    assert_eq!(bin(&["--help"]), EXIT_OK);
}

#[test]
fn missing_root_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.csv");
    assert_eq!(
        bin(&["ingest", s(&dir.path().join("absent")), "--out", s(&out)]),
        EXIT_USAGE
    );
    assert!(!out.exists());
}

#[test]
fn missing_rules_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.csv");
    let data = dir.path().join("data");
    std::fs::create_dir(&data).unwrap();
    assert_eq!(bin(&["ingest", s(&data), "--out", s(&manifest)]), EXIT_OK);
    let args = argv![
        "curate",
        "--manifest",
        s(&manifest),
        "--rules",
        "/nonexistent/rules.csv",
        "--out",
        s(&dir.path().join("c.csv")),
    ];
    assert_eq!(bin(&args), EXIT_USAGE);
}

#[test]
fn empty_directory_gives_empty_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    std::fs::create_dir(&data).unwrap();
    let manifest = dir.path().join("m.csv");
    assert_eq!(run(&["ingest", s(&data), "--out", s(&manifest)]), EXIT_OK);
    let text = std::fs::read_to_string(&manifest).unwrap();
    assert!(text.starts_with("# mrseq "));
    assert!(data_lines(&manifest).is_empty());
    assert!(data_lines(&dir.path().join("skipped.csv")).is_empty());
}

fn valid_instance() -> InstanceMetadata {
    InstanceMetadata {
        sop_instance_uid: "1.2.3.4.1".into(),
        series_instance_uid: "1.2.3.4".into(),
        patient_id: "P1".into(),
        series_description: "t2_tse_tra".into(),
        repetition_time: Some(4000.0),
        echo_time: Some(100.0),
        flip_angle: Some(90.0),
        scanning_sequence: vec!["SE".into()],
        image_position_patient: Some([0.0, 0.0, 0.0]),
        image_orientation_patient: Some([1.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
        rows: Some(2),
        cols: Some(2),
        pixel_spacing: Some([0.5, 0.5]),
        pixel_payload: Some(vec![1, 0, 2, 0, 3, 0, 4, 0]),
        ..Default::default()
    }
}

#[test]
fn corrupt_file_is_skipped_and_rerun_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data").join("site");
    std::fs::create_dir_all(&data).unwrap();
    std::fs::write(data.join("good.dcm"), serialize_part10(&valid_instance())).unwrap();
    std::fs::write(data.join("bad.dcm"), b"not a dicom file at all").unwrap();
    let root = dir.path().join("data");
    let first = dir.path().join("a.csv");
    let second = dir.path().join("b.csv");
    assert_eq!(run(&["ingest", s(&root), "--out", s(&first)]), EXIT_OK);
    let rows = data_lines(&first);
    assert_eq!(rows.len(), 1);
    assert!(rows[0].starts_with("1.2.3.4,P1,site,t2_tse_tra,1,"), "{}", rows[0]);
    let skipped = data_lines(&dir.path().join("skipped.csv"));
    assert_eq!(skipped.len(), 1);
    assert!(skipped[0].contains("bad.dcm"));

    let skip2 = dir.path().join("skip2.csv");
    assert_eq!(
        run(&["ingest", s(&root), "--out", s(&second), "--skipped", s(&skip2)]),
        EXIT_OK
    );
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
    assert_eq!(
        std::fs::read(dir.path().join("skipped.csv")).unwrap(),
        std::fs::read(&skip2).unwrap()
    );
}

#[test]
fn classify_rejects_method_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let synth = p.join("synth");
    let data = synth.join("dicom");
    assert_eq!(
        run(&["synth", "--out", s(&synth), "--patients", "10", "--seed", "3"]),
        EXIT_OK
    );
    assert_eq!(run(&["ingest", s(&data), "--out", s(&p.join("m.csv"))]), EXIT_OK);
    assert_eq!(
        run(&[
            "curate",
            "--manifest",
            s(&p.join("m.csv")),
            "--out",
            s(&p.join("c.csv"))
        ]),
        EXIT_OK
    );
    let train = argv![
        "train",
        "--data",
        s(&data),
        "--curation",
        s(&p.join("c.csv")),
        "--method",
        "metadata",
        "--k",
        "2",
        "--out",
        s(&p.join("model")),
    ];
    assert_eq!(run(&train), EXIT_OK);
    let ensemble = p.join("model").join("ensemble");
    let out = p.join("pred.csv");
    let args = argv![
        "classify",
        "--ensemble",
        s(&ensemble),
        "--data",
        s(&data),
        "--out",
        s(&out)
    ];
    let mut mismatch = args.clone();
    mismatch.extend(argv!["--method", "fusion"]);
    assert_eq!(bin(&mismatch), EXIT_USAGE);
    assert!(!out.exists());
    let mut matching = args.clone();
    matching.extend(argv!["--method", "metadata"]);
    assert_eq!(bin(&matching), EXIT_OK);
    assert!(!data_lines(&out).is_empty());
}

const CLASSES: [&str; 4] = ["T2W", "DWI", "ADC", "DCE"];

fn write_eval_inputs(dir: &Path, predicted: impl Fn(&str) -> &'static str) {
    let mut truth = String::from("series_uid,disposition,value,rule_priority\n");
    let mut pred =
        String::from("series_uid,patient_id,collection,method,predicted,p_t2w,p_dwi,p_adc,p_dce,member_predictions\n");
    for (i, class) in CLASSES.iter().enumerate() {
        for j in 0..2 {
            let uid = format!("1.{i}.{j}");
            truth.push_str(&format!("{uid},labeled,{class},1\n"));
            let p = predicted(class);
            let idx = CLASSES.iter().position(|c| *c == p).unwrap();
            pred.push_str(&format!("{uid},P{j},X,metadata,{p},0.25,0.25,0.25,0.25,{idx};{idx}\n"));
        }
    }
    truth.push_str("9.9,unmatched,,\n");
    std::fs::write(dir.join("truth.csv"), truth).unwrap();
    std::fs::write(dir.join("pred.csv"), pred).unwrap();
}

fn evaluate(dir: &Path) -> Vec<ReportRow> {
    let args = argv![
        "evaluate",
        "--predictions",
        s(&dir.join("pred.csv")),
        "--truth",
        s(&dir.join("truth.csv")),
        "--out",
        s(&dir.join("report.csv")),
    ];
    assert_eq!(run(&args), EXIT_OK);
    assert!(dir.join("confusion.csv").is_file());
    read_csv(&dir.join("report.csv"))
}

#[test]
fn evaluate_perfect_predictions() {
    let dir = tempfile::tempdir().unwrap();
    write_eval_inputs(dir.path(), |c| CLASSES.into_iter().find(|k| *k == c).unwrap());
    let rows = evaluate(dir.path());
    assert_eq!(rows.len(), 4);
    for r in rows {
        assert_eq!(r.f_beta, 1.0, "{}", r.class);
        assert_eq!(r.fold_mean_f_beta, Some(1.0));
        assert_eq!(r.support, 2);
    }
}

#[test]
fn evaluate_dwi_adc_swap() {
    let dir = tempfile::tempdir().unwrap();
    write_eval_inputs(dir.path(), |c| match c {
        "DWI" => "ADC",
        "ADC" => "DWI",
        "T2W" => "T2W",
        _ => "DCE",
    });
    let rows = evaluate(dir.path());
    let f = |c: &str| rows.iter().find(|r| r.class == c).unwrap().f_beta;
    assert_eq!(f("T2W"), 1.0);
    assert_eq!(f("DCE"), 1.0);
    assert_eq!(f("DWI"), 0.0);
    assert_eq!(f("ADC"), 0.0);
}

#[test]
fn evaluate_without_matches_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    write_eval_inputs(dir.path(), |_| "T2W");
    std::fs::write(
        dir.path().join("truth.csv"),
        "series_uid,disposition,value,rule_priority\n",
    )
    .unwrap();
    let args = argv![
        "evaluate",
        "--predictions",
        s(&dir.path().join("pred.csv")),
        "--truth",
        s(&dir.path().join("truth.csv")),
        "--out",
        s(&dir.path().join("report.csv")),
    ];
    assert_eq!(run(&args), EXIT_USAGE);
}

#[test]
fn plot_writes_one_line_per_series() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let synth = p.join("synth");
    assert_eq!(
        run(&["synth", "--out", s(&synth), "--patients", "1", "--seed", "2"]),
        EXIT_OK
    );
    assert_eq!(
        run(&["ingest", s(&synth.join("dicom")), "--out", s(&p.join("m.csv"))]),
        EXIT_OK
    );
    assert_eq!(
        run(&[
            "curate",
            "--manifest",
            s(&p.join("m.csv")),
            "--out",
            s(&p.join("c.csv"))
        ]),
        EXIT_OK
    );
    let args = argv![
        "plot",
        "--manifest",
        s(&p.join("m.csv")),
        "--curation",
        s(&p.join("c.csv")),
        "--out-csv",
        s(&p.join("plot.csv")),
        "--out-html",
        s(&p.join("plot.html")),
    ];
    assert_eq!(run(&args), EXIT_OK);
    let series = data_lines(&p.join("m.csv")).len();
    assert_eq!(series, 4);
    assert_eq!(data_lines(&p.join("plot.csv")).len(), series);
    let html = std::fs::read_to_string(p.join("plot.html")).unwrap();
    assert_eq!(html.matches("<polyline").count(), series);
}
