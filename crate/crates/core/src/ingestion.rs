//! Longitudinal visit CSVs: parsing, missing-value conventions, causal
//! forward-fill and cohort selection.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Marker used by the source data for a missing cell.
pub const SENTINEL: f64 = -99999999.0;
/// Spacing of the visit grid in months.
pub const GRID_MONTHS: u32 = 6;
/// Number of predicted scores per visit.
pub const N_TARGETS: usize = 4;
pub const TARGET_NAMES: [&str; N_TARGETS] = ["MMSE", "ADAS13", "CDRSB", "CS"];
/// Inclusive clinical range of each score.
pub const TARGET_RANGES: [(f64, f64); N_TARGETS] = [(0.0, 30.0), (0.0, 85.0), (0.0, 18.0), (0.0, 2.0)];
/// Column of the clinical status label.
pub const CS: usize = 3;

/// Feature groups a schema may declare.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModalityKind {
    Demographics,
    Genetics,
    Cognitive,
    Csf,
    Mri,
    Dti,
}

impl ModalityKind {
    /// Modalities that do not change between a patient's visits.
    pub fn is_static(self) -> bool {
        matches!(self, ModalityKind::Demographics | ModalityKind::Genetics)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Modality {
    pub kind: ModalityKind,
    pub features: Vec<String>,
}

/// Feature columns of a visit file, grouped by modality. Column order in the
/// file follows declaration order.
///
/// ```toml
/// [[modality]]
/// kind = "demographics"
/// features = ["age", "education"]
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    #[serde(rename = "modality")]
    pub modalities: Vec<Modality>,
}

impl Schema {
    pub fn new(modalities: Vec<Modality>) -> Result<Self> {
        let schema = Self { modalities };
        schema.validate()?;
        Ok(schema)
    }

    fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for name in self.feature_names() {
            if name.is_empty() || name.contains(',') {
                return Err(Error::Validation(format!("invalid feature name {name:?}")));
            }
            if name == "patient_id" || name == "month" || TARGET_NAMES.contains(&name) || !seen.insert(name) {
                return Err(Error::Validation(format!("duplicate or reserved column {name:?}")));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let schema: Schema = toml::from_str(s)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn feature_names(&self) -> impl Iterator<Item = &str> {
        self.modalities.iter().flat_map(|m| m.features.iter().map(String::as_str))
    }

    pub fn n_features(&self) -> usize {
        self.modalities.iter().map(|m| m.features.len()).sum()
    }

    /// Modality of every feature column, in column order.
    pub fn feature_kinds(&self) -> Vec<ModalityKind> {
        self.modalities.iter().flat_map(|m| m.features.iter().map(move |_| m.kind)).collect()
    }

    /// The full header row of a visit file.
    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["patient_id".to_string(), "month".to_string()];
        h.extend(self.feature_names().map(str::to_string));
        h.extend(TARGET_NAMES.iter().map(|s| s.to_string()));
        h
    }
}

/// One time point of a patient. `None` marks a missing cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Visit {
    pub month: u32,
    pub features: Vec<Option<f64>>,
    pub targets: [Option<f64>; N_TARGETS],
}

impl Visit {
    /// Position on the visit grid.
    pub fn visit_index(&self) -> usize {
        (self.month / GRID_MONTHS) as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub patient_id: String,
    /// Sorted by month, months unique.
    pub visits: Vec<Visit>,
    /// Share of missing feature cells before any filling.
    pub missing_fraction: f64,
}

impl PatientRecord {
    /// Sorts the visits, rejects duplicate months and computes the missing
    /// fraction from the cells as given.
    pub fn new(patient_id: impl Into<String>, mut visits: Vec<Visit>) -> Result<Self> {
        let patient_id = patient_id.into();
        visits.sort_by_key(|v| v.month);
        if let Some(w) = visits.windows(2).find(|w| w[0].month == w[1].month) {
            return Err(Error::Validation(format!("patient {patient_id} has two visits at month {}", w[0].month)));
        }
        if let Some(d) = visits.first().map(|v| v.features.len()) {
            if visits.iter().any(|v| v.features.len() != d) {
                return Err(Error::Validation(format!("patient {patient_id} has ragged feature rows")));
            }
        }
        for v in &visits {
            check_targets(&v.targets).map_err(|m| Error::Validation(format!("patient {patient_id}: {m}")))?;
        }
        let missing_fraction = missing_fraction(&visits);
        Ok(Self { patient_id, visits, missing_fraction })
    }

    pub fn n_visits(&self) -> usize {
        self.visits.len()
    }
}

fn missing_fraction(visits: &[Visit]) -> f64 {
    let total: usize = visits.iter().map(|v| v.features.len()).sum();
    if total == 0 {
        return 0.0;
    }
    let missing: usize = visits.iter().map(|v| v.features.iter().filter(|c| c.is_none()).count()).sum();
    missing as f64 / total as f64
}

fn check_targets(targets: &[Option<f64>; N_TARGETS]) -> std::result::Result<(), String> {
    for (j, t) in targets.iter().enumerate() {
        let Some(v) = *t else { continue };
        let (lo, hi) = TARGET_RANGES[j];
        if !(lo..=hi).contains(&v) {
            return Err(format!("{} = {v} outside [{lo}, {hi}]", TARGET_NAMES[j]));
        }
        if j == CS && v.fract() != 0.0 {
            return Err(format!("CS = {v} is not one of 0, 1, 2"));
        }
    }
    Ok(())
}

fn parse_cell(raw: &str, line: u64, column: &str) -> Result<Option<f64>> {
    let s = raw.trim();
    if s.is_empty() {
        return Ok(None);
    }
    let v: f64 = s
        .parse()
        .map_err(|_| Error::Parse { line, message: format!("column {column}: cannot parse {s:?} as a number") })?;
    if v == SENTINEL {
        return Ok(None);
    }
    if !v.is_finite() {
        return Err(Error::Parse { line, message: format!("column {column}: non-finite value {s:?}") });
    }
    Ok(Some(v))
}

fn parse_month(raw: &str, line: u64) -> Result<u32> {
    let bad = || Error::Parse { line, message: format!("month {raw:?} is not a nonnegative number") };
    let m: f64 = raw.trim().parse().map_err(|_| bad())?;
    if !m.is_finite() || m < 0.0 {
        return Err(bad());
    }
    let grid = f64::from(GRID_MONTHS);
    let snapped = (m / grid).round() * grid;
    if snapped != m {
        log::warn!("line {line}: month {m} snapped to grid month {snapped}");
    }
    Ok(snapped as u32)
}

/// Parses a visit file. Patients come back sorted by id, visits by month.
pub fn parse_reader<R: Read>(reader: R, schema: &Schema) -> Result<Vec<PatientRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let expected = schema.header();
    let header = rdr.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?;
    let found: Vec<&str> = header.iter().map(str::trim).collect();
    if found != expected {
        return Err(Error::Parse {
            line: 1,
            message: format!("header does not match schema: expected {}", expected.join(",")),
        });
    }
    let d = schema.n_features();
    let names: Vec<&str> = schema.feature_names().collect();

    let mut grouped: BTreeMap<String, Vec<(u64, Visit)>> = BTreeMap::new();
    for row in rdr.records() {
        let row =
            row.map_err(|e| Error::Parse { line: e.position().map_or(0, |p| p.line()), message: e.to_string() })?;
        let line = row.position().map_or(0, |p| p.line());
        let patient_id = row[0].trim();
        if patient_id.is_empty() {
            return Err(Error::Parse { line, message: "empty patient_id".into() });
        }
        let month = parse_month(&row[1], line)?;
        let features = (0..d).map(|j| parse_cell(&row[2 + j], line, names[j])).collect::<Result<Vec<_>>>()?;
        let mut targets = [None; N_TARGETS];
        for (j, t) in targets.iter_mut().enumerate() {
            *t = parse_cell(&row[2 + d + j], line, TARGET_NAMES[j])?;
        }
        check_targets(&targets).map_err(|m| Error::Validation(format!("line {line}: {m}")))?;
        grouped.entry(patient_id.to_string()).or_default().push((line, Visit { month, features, targets }));
    }

    grouped
        .into_iter()
        .map(|(id, mut rows)| {
            rows.sort_by_key(|(_, v)| v.month);
            if let Some(w) = rows.windows(2).find(|w| w[0].1.month == w[1].1.month) {
                return Err(Error::Validation(format!(
                    "line {}: patient {id} already has a visit at month {}",
                    w[1].0.max(w[0].0),
                    w[0].1.month
                )));
            }
            PatientRecord::new(id, rows.into_iter().map(|(_, v)| v).collect())
        })
        .collect()
}

pub fn parse_csv(path: &Path, schema: &Schema) -> Result<Vec<PatientRecord>> {
    parse_reader(File::open(path)?, schema)
}

/// How missing cells are written out.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MissingCell {
    #[default]
    Empty,
    Sentinel,
}

fn format_cell(v: Option<f64>, missing: MissingCell) -> String {
    match (v, missing) {
        (Some(x), _) => format!("{x}"),
        (None, MissingCell::Empty) => String::new(),
        (None, MissingCell::Sentinel) => format!("{SENTINEL}"),
    }
}

/// Writes records in the visit-file format.
pub fn write_records<W: Write>(
    writer: W,
    schema: &Schema,
    records: &[PatientRecord],
    missing: MissingCell,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    let csv_err = |e: csv::Error| Error::Serialization(e.to_string());
    w.write_record(schema.header()).map_err(csv_err)?;
    let d = schema.n_features();
    for r in records {
        for v in &r.visits {
            if v.features.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: v.features.len() });
            }
            let mut row = Vec::with_capacity(2 + d + N_TARGETS);
            row.push(r.patient_id.clone());
            row.push(v.month.to_string());
            row.extend(v.features.iter().map(|c| format_cell(*c, missing)));
            row.extend(v.targets.iter().map(|c| format_cell(*c, missing)));
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(path: &Path, schema: &Schema, records: &[PatientRecord], missing: MissingCell) -> Result<()> {
    write_records(std::io::BufWriter::new(File::create(path)?), schema, records, missing)
}

/// Fill values for cells that have no earlier observation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fallback {
    pub features: Vec<f64>,
    pub targets: [f64; N_TARGETS],
}

impl Fallback {
    /// Per-column means of the observed cells; columns never observed get 0.
    /// The clinical status fallback is rounded to a valid label.
    pub fn from_records(records: &[PatientRecord], n_features: usize) -> Self {
        let mut sum = vec![0.0; n_features];
        let mut count = vec![0usize; n_features];
        let mut tsum = [0.0; N_TARGETS];
        let mut tcount = [0usize; N_TARGETS];
        for v in records.iter().flat_map(|r| &r.visits) {
            for (j, c) in v.features.iter().enumerate().take(n_features) {
                if let Some(x) = c {
                    sum[j] += x;
                    count[j] += 1;
                }
            }
            for j in 0..N_TARGETS {
                if let Some(x) = v.targets[j] {
                    tsum[j] += x;
                    tcount[j] += 1;
                }
            }
        }
        let mean = |s: f64, c: usize| if c == 0 { 0.0 } else { s / c as f64 };
        let features = sum.iter().zip(&count).map(|(s, c)| mean(*s, *c)).collect();
        let mut targets = [0.0; N_TARGETS];
        for j in 0..N_TARGETS {
            targets[j] = mean(tsum[j], tcount[j]);
        }
        targets[CS] = targets[CS].round();
        Self { features, targets }
    }
}

/// Replaces every missing cell with the nearest earlier observation of the
/// same column, or with the fallback when there is none. Later visits are
/// never consulted. The pre-fill missing fraction is kept.
pub fn forward_fill(record: &PatientRecord, fallback: &Fallback) -> Result<PatientRecord> {
    let mut out = record.clone();
    let d = fallback.features.len();
    let mut last_f: Vec<f64> = fallback.features.clone();
    let mut last_t = fallback.targets;
    for v in &mut out.visits {
        if v.features.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: v.features.len() });
        }
        for (cell, last) in v.features.iter_mut().zip(last_f.iter_mut()) {
            match cell {
                Some(x) => *last = *x,
                None => *cell = Some(*last),
            }
        }
        for (cell, last) in v.targets.iter_mut().zip(last_t.iter_mut()) {
            match cell {
                Some(x) => *last = *x,
                None => *cell = Some(*last),
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortCriteria {
    /// Fewest visits a patient needs to be kept.
    pub min_visits: usize,
    /// Largest tolerated missing fraction (inclusive).
    pub max_missing: f64,
}

impl Default for CohortCriteria {
    fn default() -> Self {
        Self { min_visits: 11, max_missing: 0.825 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub input: usize,
    pub too_few_visits: usize,
    pub too_much_missing: usize,
    /// Patients failing both criteria (also counted in each of the above).
    pub failed_both: usize,
    pub kept: usize,
}

/// Keeps patients with enough visits and little enough missing data.
pub fn select_cohort(records: &[PatientRecord], criteria: &CohortCriteria) -> (Vec<PatientRecord>, SelectionReport) {
    let mut report = SelectionReport { input: records.len(), ..Default::default() };
    let mut kept = Vec::new();
    for r in records {
        let few = r.n_visits() < criteria.min_visits;
        let sparse = r.missing_fraction > criteria.max_missing;
        report.too_few_visits += few as usize;
        report.too_much_missing += sparse as usize;
        report.failed_both += (few && sparse) as usize;
        if !few && !sparse {
            kept.push(r.clone());
        }
    }
    report.kept = kept.len();
    (kept, report)
}

/// Mean, population standard deviation and quartiles of a sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl Summary {
    /// `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (sorted.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        };
        Some(Self {
            n: values.len(),
            mean,
            sd,
            min: sorted[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: sorted[sorted.len() - 1],
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisitHistogram {
    /// Number of patients per total visit count.
    pub counts: BTreeMap<usize, usize>,
    /// `None` when there are no patients.
    pub summary: Option<Summary>,
}

pub fn visit_histogram(records: &[PatientRecord]) -> VisitHistogram {
    let mut counts = BTreeMap::new();
    for r in records {
        *counts.entry(r.n_visits()).or_insert(0) += 1;
    }
    let values: Vec<f64> = records.iter().map(|r| r.n_visits() as f64).collect();
    VisitHistogram { counts, summary: Summary::of(&values) }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> Schema {
        Schema::new(vec![
            Modality { kind: ModalityKind::Demographics, features: vec!["age".into()] },
            Modality { kind: ModalityKind::Mri, features: vec!["hippo".into(), "ventricles".into()] },
        ])
        .unwrap()
    }

    const HEADER: &str = "patient_id,month,age,hippo,ventricles,MMSE,ADAS13,CDRSB,CS\n";

    fn parse(body: &str) -> Result<Vec<PatientRecord>> {
        parse_reader(format!("{HEADER}{body}").as_bytes(), &schema())
    }

    fn visit(month: u32, features: Vec<Option<f64>>) -> Visit {
        Visit { month, features, targets: [Some(28.0), Some(10.0), Some(0.5), Some(0.0)] }
    }

    #[test]
    fn sentinel_and_empty_cells_are_missing() {
        let recs = parse("a,0,-99999999,,1.5,28,10,0.5,0\n").unwrap();
        assert_eq!(recs[0].visits[0].features, vec![None, None, Some(1.5)]);
        assert!((recs[0].missing_fraction - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn header_only_gives_no_patients() {
        assert!(parse("").unwrap().is_empty());
    }

    #[test]
    fn rows_are_grouped_and_sorted() {
        let recs = parse("b,6,1,2,3,27,11,1,1\na,0,1,2,3,,,,\nb,0,1,2,3,28,10,0.5,0\n").unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].patient_id, "a");
        assert_eq!(recs[1].visits.iter().map(|v| v.month).collect::<Vec<_>>(), vec![0, 6]);
        assert_eq!(recs[1].visits[1].visit_index(), 1);
    }

    #[test]
    fn malformed_row_reports_its_line() {
        match parse("a,0,1,2,3,28,10,0.5,0\na,6,1,x,3,28,10,0.5,0\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match parse("a,0,1,2\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn out_of_range_targets_are_rejected() {
        assert!(matches!(parse("a,0,1,2,3,31,10,0.5,0\n"), Err(Error::Validation(_))));
        assert!(matches!(parse("a,0,1,2,3,28,10,0.5,1.5\n"), Err(Error::Validation(_))));
        assert!(matches!(parse("a,0,1,2,3,28,10,0.5,3\n"), Err(Error::Validation(_))));
    }

    #[test]
    fn wrong_header_is_rejected() {
        let r = parse_reader("patient_id,month,age,MMSE,ADAS13,CDRSB,CS\n".as_bytes(), &schema());
        assert!(matches!(r, Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn off_grid_months_snap_and_duplicates_fail() {
        let recs = parse("a,7,1,2,3,,,,\n").unwrap();
        assert_eq!(recs[0].visits[0].month, 6);
        assert!(matches!(parse("a,6,1,2,3,,,,\na,5,1,2,3,,,,\n"), Err(Error::Validation(_))));
    }

    #[test]
    fn write_then_parse_round_trips() {
        let text = "a,0,0.1,,3e-7,28,10,0.5,0\na,6,-99999999,2.25,1,,9,,1\nb,12,1,2,3,30,0,18,2\n";
        let recs = parse(text).unwrap();
        for style in [MissingCell::Empty, MissingCell::Sentinel] {
            let mut buf = Vec::new();
            write_records(&mut buf, &schema(), &recs, style).unwrap();
            let again = parse_reader(buf.as_slice(), &schema()).unwrap();
            assert_eq!(recs, again);
        }
    }

    #[test]
    fn schema_toml_round_trip() {
        let s = schema();
        let text = s.to_toml_string().unwrap();
        assert_eq!(Schema::from_toml_str(&text).unwrap(), s);
        assert_eq!(s.feature_kinds(), vec![ModalityKind::Demographics, ModalityKind::Mri, ModalityKind::Mri]);
    }

    #[test]
    fn schema_rejects_reserved_names() {
        let m = |n: &str| vec![Modality { kind: ModalityKind::Csf, features: vec![n.into()] }];
        assert!(Schema::new(m("MMSE")).is_err());
        assert!(Schema::new(m("month")).is_err());
    }

    fn series(vals: &[Option<f64>]) -> PatientRecord {
        let visits = vals.iter().enumerate().map(|(i, v)| visit(6 * i as u32, vec![*v])).collect();
        PatientRecord::new("p", visits).unwrap()
    }

    fn fallback(v: f64) -> Fallback {
        Fallback { features: vec![v], targets: [0.0; 4] }
    }

    fn values(r: &PatientRecord) -> Vec<f64> {
        r.visits.iter().map(|v| v.features[0].unwrap()).collect()
    }

    #[test]
    fn forward_fill_uses_last_observation() {
        let r = series(&[Some(5.0), None, None, Some(7.0)]);
        assert_eq!(values(&forward_fill(&r, &fallback(0.0)).unwrap()), vec![5.0, 5.0, 5.0, 7.0]);
    }

    #[test]
    fn forward_fill_leading_gap_uses_fallback() {
        let r = series(&[None, Some(3.0)]);
        let filled = forward_fill(&r, &fallback(0.0)).unwrap();
        assert_eq!(values(&filled), vec![0.0, 3.0]);
        assert_eq!(filled.missing_fraction, 0.5);
    }

    #[test]
    fn forward_fill_fills_targets() {
        let mut r = series(&[Some(1.0), Some(2.0)]);
        r.visits[1].targets = [None, Some(12.0), None, None];
        r.visits[0].targets[1] = None;
        let f = Fallback { features: vec![0.0], targets: [20.0, 15.0, 1.0, 1.0] };
        let filled = forward_fill(&r, &f).unwrap();
        assert_eq!(filled.visits[0].targets, [Some(28.0), Some(15.0), Some(0.5), Some(0.0)]);
        assert_eq!(filled.visits[1].targets, [Some(28.0), Some(12.0), Some(0.5), Some(0.0)]);
    }

    #[test]
    fn fallback_means_skip_missing_cells() {
        let r = series(&[Some(1.0), None, Some(3.0)]);
        let f = Fallback::from_records(&[r], 1);
        assert_eq!(f.features, vec![2.0]);
        assert_eq!(f.targets, [28.0, 10.0, 0.5, 0.0]);
    }

    fn cohort_patient(visits: usize, missing: usize, d: usize) -> PatientRecord {
        let mut left = missing;
        let vs = (0..visits)
            .map(|i| {
                let f = (0..d)
                    .map(|_| {
                        if left > 0 {
                            left -= 1;
                            None
                        } else {
                            Some(1.0)
                        }
                    })
                    .collect();
                visit(6 * i as u32, f)
            })
            .collect();
        PatientRecord::new(format!("v{visits}m{missing}"), vs).unwrap()
    }

    #[test]
    fn cohort_boundaries() {
        let c = CohortCriteria::default();
        // 11 visits × 1000 features: 9075 missing cells = 0.825, 9086 = 0.826
        let eleven = cohort_patient(11, 2200, 1000);
        let ten = cohort_patient(10, 0, 1000);
        let at_limit = cohort_patient(11, 9075, 1000);
        let over = cohort_patient(11, 9086, 1000);
        assert!((eleven.missing_fraction - 0.2).abs() < 1e-15);
        assert_eq!(at_limit.missing_fraction, 0.825);
        let (kept, report) = select_cohort(&[eleven, ten, at_limit, over], &c);
        let ids: Vec<_> = kept.iter().map(|r| r.patient_id.as_str()).collect();
        assert_eq!(ids, vec!["v11m2200", "v11m9075"]);
        assert_eq!(
            report,
            SelectionReport { input: 4, too_few_visits: 1, too_much_missing: 1, failed_both: 0, kept: 2 }
        );
    }

    #[test]
    fn histogram_of_one_patient() {
        let h = visit_histogram(&[cohort_patient(5, 0, 1)]);
        assert_eq!(h.counts, BTreeMap::from([(5, 1)]));
        let s = h.summary.unwrap();
        assert_eq!((s.mean, s.sd, s.median), (5.0, 0.0, 5.0));
    }

    #[test]
    fn histogram_of_nothing() {
        let h = visit_histogram(&[]);
        assert!(h.counts.is_empty() && h.summary.is_none());
    }

    #[test]
    fn quartiles_interpolate() {
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!((s.q1, s.median, s.q3), (1.75, 2.5, 3.25));
        assert!((s.sd - 1.25f64.sqrt()).abs() < 1e-15);
    }
}
