use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::DataError;

/// One row of the Broward County records file, before encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub age: u32,
    pub sex: String,
    pub race: String,
    pub priors_count: u32,
    pub charge_degree: String,
    pub juv_fel_count: u32,
    pub juv_misd_count: u32,
    pub juv_other_count: u32,
    pub jail_in: Option<NaiveDate>,
    pub jail_out: Option<NaiveDate>,
    pub recid_label: u8,
    pub compas_decile: Option<u8>,
}

impl RawRecord {
    /// Builds a record from `key=value` pairs, as given on the command line.
    ///
    /// Missing counts default to zero, missing dates to `None`.
    pub fn from_pairs<'a, I>(pairs: I) -> Result<Self, String>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut rec = RawRecord {
            age: 0,
            sex: String::new(),
            race: String::new(),
            priors_count: 0,
            charge_degree: String::new(),
            juv_fel_count: 0,
            juv_misd_count: 0,
            juv_other_count: 0,
            jail_in: None,
            jail_out: None,
            recid_label: 0,
            compas_decile: None,
        };
        for (key, value) in pairs {
            let value = value.trim();
            let count = || value.parse::<u32>().map_err(|_| format!("{key}: expected a count, got {value:?}"));
            match key.trim() {
                "age" => rec.age = count()?,
                "sex" => rec.sex = value.to_string(),
                "race" => rec.race = value.to_string(),
                "priors_count" => rec.priors_count = count()?,
                "charge_degree" | "c_charge_degree" => rec.charge_degree = value.to_string(),
                "juv_fel_count" => rec.juv_fel_count = count()?,
                "juv_misd_count" => rec.juv_misd_count = count()?,
                "juv_other_count" => rec.juv_other_count = count()?,
                "jail_in" | "c_jail_in" => rec.jail_in = parse_date(value)?,
                "jail_out" | "c_jail_out" => rec.jail_out = parse_date(value)?,
                "recid" | "recid_label" => rec.recid_label = parse_label(value).ok_or(format!("bad label {value:?}"))?,
                "decile_score" | "compas_decile" => rec.compas_decile = parse_decile(value)?,
                other => return Err(format!("unknown record field {other:?}")),
            }
        }
        if rec.age == 0 {
            return Err("age must be a positive integer".to_string());
        }
        Ok(rec)
    }
}

/// Row-level validity filters applied while loading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordFilter {
    /// Races retained; the first entry is group 0, the second group 1.
    pub races: Vec<String>,
    pub recid_column: String,
    pub charge_degrees: Vec<String>,
    /// When set, drop rows whose `days_b_screening_arrest` is missing or
    /// farther than this many days from the screening date.
    pub screening_window_days: Option<i64>,
    /// Parse failures tolerated before the load is aborted.
    pub max_parse_errors: usize,
}

impl Default for RecordFilter {
    fn default() -> Self {
        RecordFilter {
            races: vec!["Caucasian".to_string(), "African-American".to_string()],
            recid_column: "two_year_recid".to_string(),
            charge_degrees: vec!["F".to_string(), "M".to_string()],
            screening_window_days: None,
            max_parse_errors: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

/// Summary of what happened to every row of the input file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub rows_kept: usize,
    pub dropped: BTreeMap<String, usize>,
    pub parse_errors: Vec<RowError>,
    pub missing_jail_dates: usize,
}

impl IngestReport {
    fn drop(&mut self, reason: &str) {
        *self.dropped.entry(reason.to_string()).or_default() += 1;
    }
}

const REQUIRED: [&str; 11] = [
    "race",
    "age",
    "sex",
    "priors_count",
    "c_charge_degree",
    "juv_fel_count",
    "juv_misd_count",
    "juv_other_count",
    "c_jail_in",
    "c_jail_out",
    "decile_score",
];

struct Columns {
    race: usize,
    age: usize,
    sex: usize,
    priors: usize,
    charge: usize,
    juv_fel: usize,
    juv_misd: usize,
    juv_other: usize,
    jail_in: usize,
    jail_out: usize,
    decile: usize,
    label: usize,
    screening: Option<usize>,
}

impl Columns {
    fn resolve(headers: &csv::StringRecord, filter: &RecordFilter) -> Result<Self, DataError> {
        // The ProPublica files repeat some column names; the first occurrence wins.
        let find = |name: &str| headers.iter().position(|h| h.trim() == name);
        let need = |name: &str| find(name).ok_or_else(|| DataError::MalformedHeader(format!("missing column {name:?}")));
        for name in REQUIRED {
            need(name)?;
        }
        Ok(Columns {
            race: need("race")?,
            age: need("age")?,
            sex: need("sex")?,
            priors: need("priors_count")?,
            charge: need("c_charge_degree")?,
            juv_fel: need("juv_fel_count")?,
            juv_misd: need("juv_misd_count")?,
            juv_other: need("juv_other_count")?,
            jail_in: need("c_jail_in")?,
            jail_out: need("c_jail_out")?,
            decile: need("decile_score")?,
            label: need(&filter.recid_column)?,
            screening: match filter.screening_window_days {
                Some(_) => Some(need("days_b_screening_arrest")?),
                None => None,
            },
        })
    }
}

enum RowOutcome {
    Keep(RawRecord),
    Drop(&'static str),
}

/// Reads the records CSV, keeping only the configured races and valid rows.
pub fn load_records(path: &Path, filter: &RecordFilter) -> Result<(Vec<RawRecord>, IngestReport), DataError> {
    if !path.exists() {
        return Err(DataError::InputNotFound(path.to_path_buf()));
    }
    let file = File::open(path).map_err(|source| DataError::Io { path: path.to_path_buf(), source })?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(file);
    let headers = reader.headers()?.clone();
    if headers.is_empty() || headers.iter().all(|h| h.trim().is_empty()) {
        return Err(DataError::MalformedHeader("empty header row".to_string()));
    }
    let cols = Columns::resolve(&headers, filter)?;

    let mut report = IngestReport::default();
    let mut kept = Vec::new();
    for row in reader.records() {
        report.rows_read += 1;
        let row = match row {
            Ok(row) => row,
            Err(err) => {
                let line = err.position().map(|p| p.line()).unwrap_or(0);
                report.parse_errors.push(RowError { line, message: err.to_string() });
                report.drop("parse_error");
                continue;
            }
        };
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        match parse_row(&row, &cols, filter) {
            Ok(RowOutcome::Keep(rec)) => {
                if rec.jail_in.is_none() || rec.jail_out.is_none() {
                    report.missing_jail_dates += 1;
                }
                kept.push(rec);
            }
            Ok(RowOutcome::Drop(reason)) => report.drop(reason),
            Err(message) => {
                report.parse_errors.push(RowError { line, message });
                report.drop("parse_error");
            }
        }
    }
    if report.parse_errors.len() > filter.max_parse_errors {
        let first = &report.parse_errors[0];
        return Err(DataError::TooManyParseErrors {
            count: report.parse_errors.len(),
            limit: filter.max_parse_errors,
            first_line: first.line,
            first_message: first.message.clone(),
        });
    }
    report.rows_kept = kept.len();
    log::info!(
        "loaded {} of {} rows from {} ({:?})",
        report.rows_kept,
        report.rows_read,
        path.display(),
        report.dropped
    );
    Ok((kept, report))
}

fn parse_row(row: &csv::StringRecord, cols: &Columns, filter: &RecordFilter) -> Result<RowOutcome, String> {
    let field = |idx: usize| row.get(idx).map(str::trim).unwrap_or("");

    let race = field(cols.race);
    if !filter.races.iter().any(|r| r == race) {
        return Ok(RowOutcome::Drop("race_excluded"));
    }
    let Some(recid_label) = parse_label(field(cols.label)) else {
        return Ok(RowOutcome::Drop("missing_label"));
    };
    let charge = field(cols.charge);
    if charge.is_empty() {
        return Ok(RowOutcome::Drop("missing_charge_degree"));
    }
    if !filter.charge_degrees.iter().any(|c| c == charge) {
        return Ok(RowOutcome::Drop("excluded_charge_degree"));
    }
    if let (Some(window), Some(idx)) = (filter.screening_window_days, cols.screening) {
        match field(idx).parse::<i64>() {
            Ok(days) if days.abs() <= window => {}
            _ => return Ok(RowOutcome::Drop("screening_window")),
        }
    }

    let count = |idx: usize, name: &str| -> Result<u32, String> {
        field(idx).parse::<u32>().map_err(|_| format!("{name}: expected a non-negative integer, got {:?}", field(idx)))
    };
    let age = count(cols.age, "age")?;
    if age == 0 {
        return Err("age: must be positive".to_string());
    }
    Ok(RowOutcome::Keep(RawRecord {
        age,
        sex: field(cols.sex).to_string(),
        race: race.to_string(),
        priors_count: count(cols.priors, "priors_count")?,
        charge_degree: charge.to_string(),
        juv_fel_count: count(cols.juv_fel, "juv_fel_count")?,
        juv_misd_count: count(cols.juv_misd, "juv_misd_count")?,
        juv_other_count: count(cols.juv_other, "juv_other_count")?,
        jail_in: parse_date(field(cols.jail_in))?,
        jail_out: parse_date(field(cols.jail_out))?,
        recid_label,
        compas_decile: parse_decile(field(cols.decile))?,
    }))
}

/// `"0"`/`"1"` map to a label; anything else (including the `-1` the fuller
/// scores file uses) counts as missing.
fn parse_label(s: &str) -> Option<u8> {
    match s.trim() {
        "0" | "0.0" => Some(0),
        "1" | "1.0" => Some(1),
        _ => None,
    }
}

fn parse_decile(s: &str) -> Result<Option<u8>, String> {
    let s = s.trim();
    if s.is_empty() || s == "-1" {
        return Ok(None);
    }
    match s.parse::<u8>() {
        Ok(d) if (1..=10).contains(&d) => Ok(Some(d)),
        _ => Err(format!("decile_score: expected 1-10, got {s:?}")),
    }
}

/// Accepts `YYYY-MM-DD`, `YYYY-MM-DD HH:MM:SS` and the `T`-separated form.
pub(crate) fn parse_date(s: &str) -> Result<Option<NaiveDate>, String> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(None);
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(Some(d));
    }
    for fmt in ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(Some(dt.date()));
        }
    }
    if let Ok(dt) = chrono::DateTime::parse_from_rfc3339(s) {
        return Ok(Some(dt.date_naive()));
    }
    Err(format!("unparseable date {s:?}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    const HEADER: &str = "id,race,age,sex,priors_count,c_charge_degree,juv_fel_count,juv_misd_count,juv_other_count,c_jail_in,c_jail_out,decile_score,two_year_recid,days_b_screening_arrest\n";

    fn write_csv(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(HEADER.as_bytes()).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    #[test]
    fn keeps_only_two_races() {
        let f = write_csv(
            "1,Hispanic,30,Male,0,F,0,0,0,,,3,0,0\n\
             2,Caucasian,30,Male,0,F,0,0,0,,,3,0,0\n\
             3,African-American,41,Female,2,M,0,1,0,2013-01-01 10:00:00,2013-01-11 09:00:00,7,1,-1\n",
        );
        let (recs, report) = load_records(f.path(), &RecordFilter::default()).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(report.rows_read, 3);
        assert_eq!(report.dropped["race_excluded"], 1);
        assert_eq!(recs[1].jail_in, NaiveDate::from_ymd_opt(2013, 1, 1));
        assert_eq!(recs[1].compas_decile, Some(7));
        assert_eq!(report.missing_jail_dates, 1);
    }

    #[test]
    fn drops_missing_label_and_charge() {
        let f = write_csv(
            "1,Caucasian,30,Male,0,F,0,0,0,,,3,,0\n\
             2,Caucasian,30,Male,0,,0,0,0,,,3,0,0\n\
             3,Caucasian,30,Male,0,O,0,0,0,,,3,-1,0\n\
             4,Caucasian,30,Male,0,O,0,0,0,,,3,1,0\n",
        );
        let (recs, report) = load_records(f.path(), &RecordFilter::default()).unwrap();
        assert!(recs.is_empty());
        assert_eq!(report.dropped["missing_label"], 2);
        assert_eq!(report.dropped["missing_charge_degree"], 1);
        assert_eq!(report.dropped["excluded_charge_degree"], 1);
    }

    #[test]
    fn screening_window_filter() {
        let f = write_csv(
            "1,Caucasian,30,Male,0,F,0,0,0,,,3,0,-45\n\
             2,Caucasian,30,Male,0,F,0,0,0,,,3,0,12\n\
             3,Caucasian,30,Male,0,F,0,0,0,,,3,0,\n",
        );
        let filter = RecordFilter { screening_window_days: Some(30), ..RecordFilter::default() };
        let (recs, report) = load_records(f.path(), &filter).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(report.dropped["screening_window"], 2);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let f = write_csv(
            "1,Caucasian,thirty,Male,0,F,0,0,0,,,3,0,0\n\
             2,Caucasian,30,Male,0,F,0,0,0,,,3,0,0\n\
             3,Caucasian,30,Male,0,F,0,0,0,,,11,0,0\n",
        );
        let (recs, report) = load_records(f.path(), &RecordFilter::default()).unwrap();
        assert_eq!(recs.len(), 1);
        let lines: Vec<u64> = report.parse_errors.iter().map(|e| e.line).collect();
        assert_eq!(lines, vec![2, 4]);

        let strict = RecordFilter { max_parse_errors: 1, ..RecordFilter::default() };
        match load_records(f.path(), &strict) {
            Err(DataError::TooManyParseErrors { count: 2, first_line: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_file_and_header() {
        let err = load_records(Path::new("/nonexistent/records.csv"), &RecordFilter::default()).unwrap_err();
        assert!(matches!(err, DataError::InputNotFound(_)));

        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(b"race,age\nCaucasian,30\n").unwrap();
        let err = load_records(f.path(), &RecordFilter::default()).unwrap_err();
        assert!(matches!(err, DataError::MalformedHeader(_)));
    }

    #[test]
    fn date_formats() {
        let d = NaiveDate::from_ymd_opt(2013, 8, 13);
        assert_eq!(parse_date("2013-08-13").unwrap(), d);
        assert_eq!(parse_date("2013-08-13 06:03:42").unwrap(), d);
        assert_eq!(parse_date("2013-08-13T06:03:42").unwrap(), d);
        assert_eq!(parse_date("").unwrap(), None);
        assert!(parse_date("13/08/2013").is_err());
    }

    #[test]
    fn record_from_pairs() {
        let rec = RawRecord::from_pairs([("age", "55"), ("sex", "Male"), ("race", "African-American"), ("priors_count", "1"), ("charge_degree", "F")]).unwrap();
        assert_eq!(rec.age, 55);
        assert_eq!(rec.juv_fel_count, 0);
        assert!(RawRecord::from_pairs([("height", "3")]).is_err());
        assert!(RawRecord::from_pairs([("sex", "Male")]).is_err());
    }
}
