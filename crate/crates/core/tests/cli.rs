mod common;

use std::path::Path;
use std::process::{Command, Output};

use agridw::OptimalFinding;

fn agridw(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_agridw"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Writes a three-crop synth config and generates it into `dir/src`.
fn synth_fixture(dir: &Path, records: usize) {
    let mut config = common::recovery_config(5, records);
    config.crops.truncate(3);
    std::fs::write(dir.join("config.json"), config.to_json()).unwrap();
    let o = agridw(dir, &["synth", "--config", "config.json", "--out", "src"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn synth_ingest_analyze_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth_fixture(dir, 400);
    let o = agridw(dir, &["ingest", "--store", "wh", "--plan", "src/manifest.json", "--out", "load"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("load/load_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["rows_rejected"], 0);
    assert_eq!(report["tables"]["FieldFact"]["rows_accepted"], 1200);
    let ledger = std::fs::read_to_string(dir.join("wh/rejects.csv")).unwrap();
    assert_eq!(ledger, "source,row,binding,reason,raw\n");

    for args in [
        &["analyze", "groups", "--store", "wh", "--out", "out"][..],
        &["analyze", "factor", "--factor", "soil_ph", "--store", "wh", "--out", "out"],
        &["analyze", "mine", "--store", "wh", "--out", "out"],
        &["analyze", "mine", "--store", "wh", "--out", "out", "--format", "markdown"],
        &["analyze", "groups", "--store", "wh", "--out", "out", "--format", "json"],
    ] {
        let o = agridw(dir, args);
        assert_eq!(code(&o), 0, "{args:?}: {}", stderr(&o));
    }
    let snap = agridw::store::Snapshot::open(&dir.join("wh"), &agridw::builtin_catalog()).unwrap();
    let expected = common::analysis_outputs(&snap);
    for name in ["groups.csv", "groups.json", "factor_soil_ph.csv", "findings.json", "findings.md"] {
        let got = std::fs::read_to_string(dir.join("out").join(name)).unwrap();
        assert_eq!(got, expected[name], "{name}");
    }
    let findings = agridw::report::parse_findings(&expected["findings.json"]).unwrap();
    assert_eq!(findings.len(), 18);
    assert!(findings.iter().all(|f: &OptimalFinding| f.evidence.rule == Default::default()));

    let run: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("out/run.json")).unwrap()).unwrap();
    assert_eq!(run["snapshot_digest"], snap.digest().to_hex());
}

#[test]
fn rejects_exit_one_and_reach_the_ledger() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let sources = common::write_etl_corpus(dir);
    let mut args = vec!["ingest".to_string(), "--store".into(), "wh".into()];
    for (i, s) in sources.iter().enumerate() {
        let m = dir.join(format!("m{i}.json"));
        std::fs::write(&m, s.mapping.to_json()).unwrap();
        args.push("--source".into());
        args.push(s.descriptor.path.file_name().unwrap().to_string_lossy().into_owned());
        args.push("--mapping".into());
        args.push(m.display().to_string());
    }
    args.extend(["--rejects".into(), "ledger.csv".into()]);
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let o = agridw(dir, &args);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    let ledger = agridw::etl::read_reject_ledger(&dir.join("ledger.csv")).unwrap();
    assert_eq!(ledger.len(), 13);
    assert!(!dir.join("wh/rejects.csv").exists());
}

#[test]
fn usage_and_environment_failures_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth_fixture(dir, 50);
    let o = agridw(dir, &["ingest", "--store", "wh", "--plan", "src/manifest.json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let cases: [&[&str]; 8] = [
        &[],
        &["frobnicate"],
        &["analyze", "groups", "--out", "out"],
        &["analyze", "factor", "--factor", "nitrogen", "--store", "wh", "--out", "out"],
        &["analyze", "mine", "--rule", "gap:2", "--store", "wh", "--out", "out"],
        &["analyze", "groups", "--store", "nowhere", "--out", "out"],
        &["ingest", "--store", "wh2", "--source", "src/crops.csv"],
        &["synth", "--config", "missing.json", "--out", "x"],
    ];
    for args in cases {
        let o = agridw(dir, args);
        assert_eq!(code(&o), 2, "{args:?}: {}", stderr(&o));
        assert!(o.stdout.is_empty(), "{args:?} wrote to stdout");
    }
    let o = agridw(dir, &["analyze", "factor", "--factor", "nitrogen", "--store", "wh", "--out", "o"]);
    assert!(stderr(&o).contains("soil_ph"), "{}", stderr(&o));
}

#[test]
fn locked_store_is_an_environment_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth_fixture(dir, 20);
    let _held = agridw::store::open_store(&dir.join("wh"), &agridw::builtin_catalog()).unwrap();
    let o = agridw(dir, &["ingest", "--store", "wh", "--plan", "src/manifest.json"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn catalog_validation_and_help() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_eq!(code(&agridw(dir, &["catalog", "validate"])), 0);
    assert_eq!(code(&agridw(dir, &["--help"])), 0);

    let mut catalog: serde_json::Value =
        serde_json::from_str(agridw::catalog::BUILTIN_CATALOG_JSON).unwrap();
    let tables = catalog["tables"].as_array_mut().unwrap();
    let ff = tables.iter_mut().find(|t| t["name"] == "FieldFact").unwrap();
    ff["dimension_refs"].as_array_mut().unwrap().push("Nowhere".into());
    std::fs::write(dir.join("broken.json"), catalog.to_string()).unwrap();
    let o = agridw(dir, &["catalog", "validate", "--catalog", "broken.json"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("dangling-ref"), "{}", stderr(&o));
}

#[test]
fn tiny_crops_report_insufficient_data() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth_fixture(dir, 4);
    let o = agridw(dir, &["ingest", "--store", "wh", "--plan", "src/manifest.json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = agridw(dir, &["analyze", "mine", "--store", "wh", "--out", "out"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.join("out/findings.json")).unwrap();
    let findings = agridw::report::parse_findings(&text).unwrap();
    assert_eq!(findings.len(), 18);
    assert!(findings.iter().all(|f| f.verdict == agridw::Verdict::InsufficientData));
}
