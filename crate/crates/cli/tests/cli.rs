use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pgp_core::evaluation::{MetricsReport, ModelKind};
use pgp_core::ingestion::{parse_csv, select_cohort, write_csv, CohortCriteria, MissingCell};
use pgp_core::synth::{generate, SynthConfig};
use pgp_core::Schema;
use serde_json::Value;

fn pgp(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pgp")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

fn metrics(dir: &Path) -> MetricsReport {
    MetricsReport::from_json(&std::fs::read_to_string(dir.join("metrics.json")).unwrap()).unwrap()
}

/// Writes a synthetic cohort through `pgp synth` and returns (data, schema).
fn synth(cwd: &Path, name: &str, extra: &[&str]) -> (PathBuf, PathBuf) {
    let mut args = vec!["synth", "-o", name];
    args.extend_from_slice(extra);
    ok(&pgp(&args, cwd));
    (cwd.join(name).join("synth.csv"), cwd.join(name).join("schema.toml"))
}

#[test]
fn synth_writes_distinct_patients() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, schema) = synth(tmp.path(), "s", &["--patients", "5", "--seed", "4"]);
    let records = parse_csv(&data, &Schema::load(&schema).unwrap()).unwrap();
    let ids: BTreeSet<&str> = records.iter().map(|r| r.patient_id.as_str()).collect();
    assert_eq!(ids.len(), 5);
    assert!(tmp.path().join("s/manifest.json").is_file());
}

#[test]
fn synth_is_byte_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "a", &["--patients", "20", "--seed", "9"]);
    synth(tmp.path(), "b", &["--patients", "20", "--seed", "9"]);
    synth(tmp.path(), "c", &["--patients", "20", "--seed", "10"]);
    let a = std::fs::read(tmp.path().join("a/synth.csv")).unwrap();
    assert_eq!(a, std::fs::read(tmp.path().join("b/synth.csv")).unwrap());
    assert_ne!(a, std::fs::read(tmp.path().join("c/synth.csv")).unwrap());
}

#[test]
fn preprocess_counts_match_the_generator() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, schema) = synth(tmp.path(), "s", &["--seed", "2", "--missing-rate", "0.3"]);
    let out =
        pgp(&["preprocess", "--schema", schema.to_str().unwrap(), "-i", data.to_str().unwrap(), "-o", "p"], tmp.path());
    ok(&out);

    let truth = generate(&SynthConfig { seed: 2, missing_rate: 0.3, ..SynthConfig::default() }).unwrap();
    let long = truth.records.iter().filter(|r| r.n_visits() > 10).count();
    let (kept, _) = select_cohort(&truth.records, &CohortCriteria::default());
    assert_eq!(kept.len(), long);

    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("p/selection.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["input"], 100);
    assert_eq!(report["report"]["kept"], long);
    assert_eq!(report["report"]["too_few_visits"], 100 - long);

    let cohort = parse_csv(&tmp.path().join("p/cohort.csv"), &truth.schema).unwrap();
    let ids: Vec<&str> = cohort.iter().map(|r| r.patient_id.as_str()).collect();
    let expected: Vec<&str> = kept.iter().map(|r| r.patient_id.as_str()).collect();
    assert_eq!(ids, expected);
}

#[test]
fn preprocess_is_repeatable() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, schema) = synth(tmp.path(), "s", &["--seed", "5"]);
    for dir in ["p1", "p2"] {
        ok(&pgp(
            &["preprocess", "--schema", schema.to_str().unwrap(), "-i", data.to_str().unwrap(), "-o", dir],
            tmp.path(),
        ));
    }
    let strip = |v: Vec<(String, Vec<u8>)>| v.into_iter().filter(|(n, _)| n != "manifest.json").collect::<Vec<_>>();
    assert_eq!(strip(files(&tmp.path().join("p1"))), strip(files(&tmp.path().join("p2"))));
}

#[test]
fn missing_schema_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, _) = synth(tmp.path(), "s", &["--patients", "5"]);
    let out = pgp(&["preprocess", "--schema", "absent.toml", "-i", data.to_str().unwrap(), "-o", "p"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("absent.toml"), "{}", stderr(&out));

    let out = pgp(&["evaluate", "-i", data.to_str().unwrap(), "-o", "e"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("schema"));
}

#[test]
fn parse_errors_name_the_file_and_line() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, schema) = synth(tmp.path(), "s", &["--patients", "5"]);
    let text = std::fs::read_to_string(tmp.path().join("s/synth.csv")).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let mut cells: Vec<&str> = lines[3].split(',').collect();
    cells[1] = "soon";
    lines[3] = cells.join(",");
    std::fs::write(tmp.path().join("bad.csv"), lines.join("\n")).unwrap();
    let out = pgp(&["preprocess", "--schema", schema.to_str().unwrap(), "-i", "bad.csv", "-o", "p"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("bad.csv") && err.contains("line 4"), "{err}");
}

#[test]
fn bad_flags_and_values_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(pgp(&["evaluate", "--bogus"], tmp.path()).status.code(), Some(2));
    assert_eq!(pgp(&["synth", "--missing-rate", "1.5", "-o", "x"], tmp.path()).status.code(), Some(2));
    let out = pgp(&["evaluate", "--models", "gp,unknown", "--schema", "s.toml", "-i", "a.csv"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unknown"));
}

#[test]
fn undersized_cohort_is_an_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, schema) = synth(tmp.path(), "s", &["--patients", "4"]);
    let out =
        pgp(&["evaluate", "--schema", schema.to_str().unwrap(), "-i", data.to_str().unwrap(), "-o", "e"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("folds"), "{}", stderr(&out));
}

#[test]
fn flags_override_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, schema) = synth(tmp.path(), "s", &["--patients", "12", "--seed", "1"]);
    let config = format!(
        "schema = {:?}\ninput = [{:?}]\nfolds = 3\nrestarts = 1\nmodels = [\"gp\"]\nseed = 8\n",
        schema.to_str().unwrap(),
        data.to_str().unwrap()
    );
    std::fs::write(tmp.path().join("run.toml"), config).unwrap();
    ok(&pgp(&["evaluate", "--config", "run.toml", "-o", "a"], tmp.path()));
    ok(&pgp(&["evaluate", "--config", "run.toml", "--folds", "4", "-o", "b"], tmp.path()));
    let (a, b) = (metrics(&tmp.path().join("a")), metrics(&tmp.path().join("b")));
    assert_eq!((a.folds, a.seed), (3, 8));
    assert_eq!(b.folds, 4);
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("b/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["folds"], 4);
    assert_eq!(manifest["config"]["restarts"], 1);
    assert_eq!(manifest["seeds"].as_array().unwrap().len(), 4);
}

#[test]
fn rerun_from_saved_config_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, schema) = synth(tmp.path(), "s", &["--patients", "24", "--seed", "6"]);
    ok(&pgp(
        &[
            "evaluate",
            "--schema",
            schema.to_str().unwrap(),
            "-i",
            data.to_str().unwrap(),
            "-o",
            "first",
            "--models",
            "all",
            "--folds",
            "4",
            "--restarts",
            "2",
            "--seed",
            "3",
        ],
        tmp.path(),
    ));
    ok(&pgp(&["evaluate", "--config", "first/run.toml", "-o", "second"], tmp.path()));
    ok(&pgp(&["evaluate", "--config", "first/run.toml", "-o", "third", "--jobs", "3"], tmp.path()));
    let reports = |dir: &str| {
        files(&tmp.path().join(dir))
            .into_iter()
            .filter(|(n, _)| n != "manifest.json" && n != "run.toml")
            .collect::<Vec<_>>()
    };
    let first = reports("first");
    assert!(first.len() >= 10);
    assert_eq!(first, reports("second"));
    assert_eq!(first, reports("third"));
}

#[test]
fn personalization_beats_its_baseline_on_heterogeneous_data() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, schema) = synth(tmp.path(), "s", &["--seed", "0", "--offset-scale", "1.0"]);
    ok(&pgp(
        &[
            "evaluate",
            "--schema",
            schema.to_str().unwrap(),
            "-i",
            data.to_str().unwrap(),
            "-o",
            "e",
            "--models",
            "gp-ar,pgp-ar",
            "--restarts",
            "1",
        ],
        tmp.path(),
    ));
    let report = metrics(&tmp.path().join("e"));
    let (p, g) = (report.model(ModelKind::PgpAr).unwrap(), report.model(ModelKind::GpAr).unwrap());
    for j in 0..4 {
        assert!(p.mae[j].mean < g.mae[j].mean, "target {j}: {} vs {}", p.mae[j].mean, g.mae[j].mean);
    }
}

#[test]
fn two_visit_patients_get_population_predictions() {
    let tmp = tempfile::tempdir().unwrap();
    let cohort = generate(&SynthConfig { n_patients: 30, seed: 12, ..SynthConfig::default() }).unwrap();
    let mut records = cohort.records.clone();
    records.retain(|r| r.n_visits() >= 2);
    for r in &mut records {
        r.visits.truncate(2);
    }
    write_csv(&tmp.path().join("short.csv"), &cohort.schema, &records, MissingCell::Empty).unwrap();
    std::fs::write(tmp.path().join("schema.toml"), cohort.schema.to_toml_string().unwrap()).unwrap();
    ok(&pgp(
        &[
            "evaluate",
            "--schema",
            "schema.toml",
            "-i",
            "short.csv",
            "-o",
            "e",
            "--models",
            "pgp",
            "--folds",
            "5",
            "--restarts",
            "1",
        ],
        tmp.path(),
    ));
    let report = metrics(&tmp.path().join("e"));
    let (p, g) = (report.model(ModelKind::Pgp).unwrap(), report.model(ModelKind::Gp).unwrap());
    assert_eq!(p.folds, g.folds);
    assert_eq!(p.confusion, g.confusion);
}

fn skeleton(v: &Value) -> Value {
    match v {
        Value::Object(m) => Value::Object(m.iter().map(|(k, v)| (k.clone(), skeleton(v))).collect()),
        Value::Array(a) => Value::Array(a.iter().take(1).map(skeleton).collect()),
        _ => Value::Null,
    }
}

#[test]
fn seed_changes_folds_but_not_report_shape() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, schema) = synth(tmp.path(), "s", &["--patients", "20", "--seed", "7"]);
    for (dir, seed) in [("a", "1"), ("b", "2")] {
        ok(&pgp(
            &[
                "evaluate",
                "--schema",
                schema.to_str().unwrap(),
                "-i",
                data.to_str().unwrap(),
                "-o",
                dir,
                "--folds",
                "4",
                "--restarts",
                "1",
                "--seed",
                seed,
            ],
            tmp.path(),
        ));
    }
    let read = |d: &str| -> Value {
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join(d).join("metrics.json")).unwrap()).unwrap()
    };
    let (a, b) = (read("a"), read("b"));
    assert_eq!(skeleton(&a), skeleton(&b));
    assert_ne!(a["models"], b["models"]);
}

#[test]
fn report_reprints_and_reemits() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, schema) = synth(tmp.path(), "s", &["--patients", "15", "--seed", "2"]);
    ok(&pgp(
        &[
            "evaluate",
            "--schema",
            schema.to_str().unwrap(),
            "-i",
            data.to_str().unwrap(),
            "-o",
            "e",
            "--folds",
            "3",
            "--restarts",
            "1",
        ],
        tmp.path(),
    ));
    let out = pgp(&["report", "e/metrics.json", "-o", "r"], tmp.path());
    ok(&out);
    let table = std::fs::read_to_string(tmp.path().join("e/table.txt")).unwrap();
    assert_eq!(String::from_utf8_lossy(&out.stdout), table);
    for name in ["metrics.json", "table.txt", "conversions.csv"] {
        assert_eq!(
            std::fs::read(tmp.path().join("e").join(name)).unwrap(),
            std::fs::read(tmp.path().join("r").join(name)).unwrap()
        );
    }
    assert_eq!(pgp(&["report", "missing.json"], tmp.path()).status.code(), Some(2));
}
