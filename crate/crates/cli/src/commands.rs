//! The four subcommands. Each writes its outputs and a manifest into the
//! configured output directory.

use std::collections::BTreeSet;
use std::path::Path;

use pgp_core::evaluation::{cross_validate, MetricsReport};
use pgp_core::ingestion::{
    parse_csv, select_cohort, visit_histogram, write_csv, CohortCriteria, MissingCell, SelectionReport, VisitHistogram,
};
use pgp_core::synth::generate;
use pgp_core::{PatientRecord, Schema};
use serde::Serialize;

use crate::config::RunConfig;
use crate::manifest::Manifest;
use crate::Failure;

pub const SYNTH_DATA: &str = "synth.csv";
pub const SYNTH_SCHEMA: &str = "schema.toml";
pub const COHORT_FILE: &str = "cohort.csv";
pub const SELECTION_FILE: &str = "selection.json";
pub const RUN_CONFIG_FILE: &str = "run.toml";

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::input(format!("cannot create {}: {e}", dir.display())))
}

fn write_text(dir: &Path, name: &str, body: &str) -> Result<String, Failure> {
    std::fs::write(dir.join(name), body)
        .map_err(|e| Failure::input(format!("cannot write {}: {e}", dir.join(name).display())))?;
    Ok(name.to_string())
}

fn load_schema(config: &RunConfig) -> Result<Schema, Failure> {
    let path = config.schema_path()?;
    if !path.is_file() {
        return Err(Failure::input(format!("schema file {} does not exist", path.display())));
    }
    Schema::load(path).map_err(Failure::core(&path.display().to_string()))
}

/// Parses every input file; a patient may appear in only one of them.
fn load_records(config: &RunConfig, schema: &Schema) -> Result<Vec<PatientRecord>, Failure> {
    let mut records = Vec::new();
    let mut seen = BTreeSet::new();
    for path in config.inputs()? {
        for r in parse_csv(path, schema).map_err(Failure::core(&path.display().to_string()))? {
            if !seen.insert(r.patient_id.clone()) {
                return Err(Failure::input(format!(
                    "{}: patient {} already appeared in an earlier input",
                    path.display(),
                    r.patient_id
                )));
            }
            records.push(r);
        }
    }
    records.sort_by(|a, b| a.patient_id.cmp(&b.patient_id));
    Ok(records)
}

pub fn synth(config: &RunConfig) -> Result<(), Failure> {
    let cfg = config.synth_config();
    let cohort = generate(&cfg).map_err(Failure::core("synth"))?;
    let dir = &config.output;
    create_dir(dir)?;
    write_csv(&dir.join(SYNTH_DATA), &cohort.schema, &cohort.records, MissingCell::Sentinel)
        .map_err(Failure::core(SYNTH_DATA))?;
    let schema = cohort.schema.to_toml_string().map_err(Failure::core(SYNTH_SCHEMA))?;
    write_text(dir, SYNTH_SCHEMA, &schema)?;

    let mut manifest = Manifest::new("synth", config);
    manifest.add_outputs(dir, &[SYNTH_DATA.into(), SYNTH_SCHEMA.into()])?;
    manifest.write(dir)?;
    println!("wrote {} patients to {}", cohort.records.len(), dir.join(SYNTH_DATA).display());
    Ok(())
}

#[derive(Serialize)]
struct Selection<'a> {
    criteria: CohortCriteria,
    report: &'a SelectionReport,
    visits_before: VisitHistogram,
    visits_after: VisitHistogram,
}

pub fn preprocess(config: &RunConfig) -> Result<(), Failure> {
    let schema = load_schema(config)?;
    let records = load_records(config, &schema)?;
    let (kept, report) = select_cohort(&records, &config.criteria());
    let dir = &config.output;
    create_dir(dir)?;
    write_csv(&dir.join(COHORT_FILE), &schema, &kept, MissingCell::Sentinel).map_err(Failure::core(COHORT_FILE))?;
    let selection = Selection {
        criteria: config.criteria(),
        report: &report,
        visits_before: visit_histogram(&records),
        visits_after: visit_histogram(&kept),
    };
    let body = serde_json::to_string_pretty(&selection).expect("selection report serializes") + "\n";
    write_text(dir, SELECTION_FILE, &body)?;

    let mut manifest = Manifest::new("preprocess", config);
    manifest.add_inputs(config.inputs()?)?;
    manifest.add_inputs(&[config.schema_path()?])?;
    manifest.add_outputs(dir, &[COHORT_FILE.into(), SELECTION_FILE.into()])?;
    manifest.write(dir)?;
    println!(
        "kept {} of {} patients ({} with too few visits, {} with too much missing data)",
        report.kept, report.input, report.too_few_visits, report.too_much_missing
    );
    Ok(())
}

pub fn evaluate(config: &RunConfig) -> Result<(), Failure> {
    let schema = load_schema(config)?;
    let records = load_records(config, &schema)?;
    let cv = cross_validate(&records, schema.n_features(), &config.cv_config()).map_err(Failure::core("evaluate"))?;
    let report = MetricsReport::build(&cv, &records).map_err(Failure::core("evaluate"))?;

    let dir = &config.output;
    create_dir(dir)?;
    let mut written = report.write_files(dir).map_err(Failure::core("writing reports"))?;
    written.push(write_text(dir, RUN_CONFIG_FILE, &config.to_toml())?);

    let mut manifest = Manifest::new("evaluate", config);
    manifest.add_inputs(config.inputs()?)?;
    manifest.add_inputs(&[config.schema_path()?])?;
    manifest.add_outputs(dir, &written)?;
    manifest.add_cv(&cv);
    manifest.write(dir)?;
    print!("{}", report.table());
    Ok(())
}

pub fn report(metrics: &Path, config: Option<&RunConfig>) -> Result<(), Failure> {
    let text = std::fs::read_to_string(metrics)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", metrics.display())))?;
    let report = MetricsReport::from_json(&text).map_err(Failure::core(&metrics.display().to_string()))?;
    print!("{}", report.table());
    if let Some(config) = config {
        let dir = &config.output;
        let written = report.write_files(dir).map_err(Failure::core("writing reports"))?;
        let mut manifest = Manifest::new("report", config);
        manifest.add_inputs(&[metrics])?;
        manifest.add_outputs(dir, &written)?;
        manifest.write(dir)?;
    }
    Ok(())
}
