use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

use super::{ReportError, REPORTED_ROWS};
use crate::metrics::{FairnessReport, GroupRates};

#[derive(Debug, Clone, PartialEq)]
pub struct NamedReport {
    pub model: String,
    pub report: FairnessReport,
}

impl NamedReport {
    pub fn new(model: impl Into<String>, report: FairnessReport) -> Self {
        NamedReport { model: model.into(), report }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Text,
    Csv,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Text => "txt",
            ReportFormat::Csv => "csv",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "text" | "txt" => Ok(ReportFormat::Text),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(ReportError::UnknownFormat(other.to_string())),
        }
    }
}

/// Serializes as a JSON number with exactly four decimals.
#[derive(Debug, Clone, Copy)]
struct Fixed4(f64);

impl Serialize for Fixed4 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_none();
        }
        let raw = RawValue::from_string(format!("{:.4}", self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

fn fixed(v: Option<f64>) -> Option<Fixed4> {
    v.map(Fixed4)
}

#[derive(Serialize)]
struct GroupOut {
    group: u8,
    count: usize,
    high_risk_rate: Option<Fixed4>,
    fp_rate: Option<Fixed4>,
    fn_rate: Option<Fixed4>,
    base_rate: Option<Fixed4>,
}

#[derive(Serialize)]
struct BinOut {
    bin_low: Fixed4,
    bin_high: Fixed4,
    group: u8,
    count: usize,
    rate: Option<Fixed4>,
}

#[derive(Serialize)]
struct ModelOut<'a> {
    model: &'a str,
    threshold: Fixed4,
    high_risk_gap: Fixed4,
    fn_gap: Fixed4,
    fp_gap: Fixed4,
    auc: Fixed4,
    accuracy: Fixed4,
    groups: Vec<GroupOut>,
    calibration: Vec<BinOut>,
}

#[derive(Serialize)]
struct ReferenceOut {
    model: &'static str,
    accuracy: Fixed4,
    fp_gap: Fixed4,
    fn_gap: Fixed4,
}

#[derive(Serialize)]
struct ReportOut<'a> {
    manifest_id: Option<&'a str>,
    models: Vec<ModelOut<'a>>,
    reported_not_reproduced: Vec<ReferenceOut>,
}

fn group_out(g: usize, r: &GroupRates) -> GroupOut {
    GroupOut {
        group: g as u8,
        count: r.count,
        high_risk_rate: fixed(r.high_risk_rate),
        fp_rate: fixed(r.fp_rate),
        fn_rate: fixed(r.fn_rate),
        base_rate: fixed(r.base_rate),
    }
}

pub fn render_json(reports: &[NamedReport], manifest_id: Option<&str>) -> Result<String, ReportError> {
    let out = ReportOut {
        manifest_id,
        models: reports
            .iter()
            .map(|n| {
                let r = &n.report;
                ModelOut {
                    model: &n.model,
                    threshold: Fixed4(r.threshold),
                    high_risk_gap: Fixed4(r.high_risk_gap),
                    fn_gap: Fixed4(r.fn_gap),
                    fp_gap: Fixed4(r.fp_gap),
                    auc: Fixed4(r.auc),
                    accuracy: Fixed4(r.accuracy),
                    groups: r.groups.iter().enumerate().map(|(g, rates)| group_out(g, rates)).collect(),
                    calibration: r
                        .calibration
                        .bins
                        .iter()
                        .map(|b| BinOut {
                            bin_low: Fixed4(b.bin_low),
                            bin_high: Fixed4(b.bin_high),
                            group: b.group,
                            count: b.count,
                            rate: fixed(b.rate),
                        })
                        .collect(),
                }
            })
            .collect(),
        reported_not_reproduced: REPORTED_ROWS
            .iter()
            .map(|r| ReferenceOut {
                model: r.model,
                accuracy: Fixed4(r.accuracy),
                fp_gap: Fixed4(r.fp_gap),
                fn_gap: Fixed4(r.fn_gap),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&out)?;
    text.push('\n');
    Ok(text)
}

fn table(out: &mut String, title: &str, header: &[&str], rows: &[Vec<String>]) {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<String>| -> String {
        cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, &w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect::<Vec<_>>()
            .join(" | ")
    };
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out, "{}", line(header.iter().map(|s| s.to_string()).collect()));
    let _ = writeln!(out, "{}", widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().join("-+-"));
    for row in rows {
        let _ = writeln!(out, "{}", line(row.clone()));
    }
    out.push('\n');
}

/// Three aligned tables: fairness gaps, AUC, and accuracy with error gaps
/// (the last one followed by published reference rows).
pub fn render_text(reports: &[NamedReport], manifest_id: Option<&str>) -> String {
    let f = |v: f64| format!("{v:.4}");
    let mut out = String::new();
    if let Some(id) = manifest_id {
        let _ = writeln!(out, "manifest: {id}\n");
    }
    let gaps: Vec<Vec<String>> = reports
        .iter()
        .map(|n| vec![n.model.clone(), f(n.report.high_risk_gap), f(n.report.fn_gap), f(n.report.fp_gap)])
        .collect();
    table(&mut out, "Fairness gaps", &["Model", "High Risk Gap", "FN Gap", "FP Gap"], &gaps);

    let aucs: Vec<Vec<String>> = reports.iter().map(|n| vec![n.model.clone(), f(n.report.auc)]).collect();
    table(&mut out, "ROC AUC", &["Model", "AUC"], &aucs);

    let mut acc: Vec<Vec<String>> = reports
        .iter()
        .map(|n| vec![n.model.clone(), f(n.report.accuracy), f(n.report.fp_gap), f(n.report.fn_gap)])
        .collect();
    acc.extend(REPORTED_ROWS.iter().map(|r| {
        vec![format!("{} (reported, not reproduced)", r.model), f(r.accuracy), f(r.fp_gap), f(r.fn_gap)]
    }));
    table(&mut out, "Accuracy and error-rate gaps", &["Model", "Accuracy", "FP Gap", "FN Gap"], &acc);

    let thresholds: Vec<String> = reports.iter().map(|n| format!("{} @ {}", n.model, f(n.report.threshold))).collect();
    let _ = writeln!(out, "thresholds: {}", thresholds.join("; "));
    out
}

pub fn render_csv(reports: &[NamedReport]) -> String {
    let mut out = String::from("model,threshold,high_risk_gap,fn_gap,fp_gap,auc,accuracy\n");
    for n in reports {
        let r = &n.report;
        let _ = writeln!(
            out,
            "{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
            csv_field(&n.model),
            r.threshold,
            r.high_risk_gap,
            r.fn_gap,
            r.fp_gap,
            r.auc,
            r.accuracy
        );
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn emit_report(
    reports: &[NamedReport],
    format: ReportFormat,
    path: &Path,
    manifest_id: Option<&str>,
) -> Result<(), ReportError> {
    let body = match format {
        ReportFormat::Json => render_json(reports, manifest_id)?,
        ReportFormat::Text => render_text(reports, manifest_id),
        ReportFormat::Csv => render_csv(reports),
    };
    fs::write(path, body).map_err(|source| ReportError::Io { path: path.to_path_buf(), source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::GroupedPredictions;

    fn sample() -> Vec<NamedReport> {
        let gp = GroupedPredictions::new(
            vec![0.9, 0.2, 0.6, 0.4, 0.7, 0.1, 0.55, 0.3],
            vec![true, false, true, false, false, true, true, false],
            vec![false, false, false, false, true, true, true, true],
        )
        .unwrap();
        vec![NamedReport::new("Toy, model", FairnessReport::evaluate(&gp, 0.5, 4).unwrap())]
    }

    #[test]
    fn byte_identical_output() {
        let dir = tempfile::tempdir().unwrap();
        for format in [ReportFormat::Json, ReportFormat::Text, ReportFormat::Csv] {
            let a = dir.path().join(format!("a.{}", format.extension()));
            let b = dir.path().join(format!("b.{}", format.extension()));
            emit_report(&sample(), format, &a, Some("abc")).unwrap();
            emit_report(&sample(), format, &b, Some("abc")).unwrap();
            assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
        }
    }

    #[test]
    fn text_column_order() {
        let text = render_text(&sample(), None);
        let header = text.lines().nth(1).unwrap();
        let cols: Vec<&str> = header.split('|').map(str::trim).collect();
        assert_eq!(cols, ["Model", "High Risk Gap", "FN Gap", "FP Gap"]);
        assert!(text.contains("Hardt et al. (reported, not reproduced)"));
    }

    #[test]
    fn json_uses_four_decimals() {
        let json = render_json(&sample(), Some("m1")).unwrap();
        assert!(json.contains("\"threshold\": 0.5000"));
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["manifest_id"], "m1");
        assert_eq!(v["models"][0]["model"], "Toy, model");
        assert_eq!(v["reported_not_reproduced"].as_array().unwrap().len(), 6);
    }

    #[test]
    fn csv_is_parseable() {
        let text = render_csv(&sample());
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
        assert_eq!(rows.len(), 1);
        assert_eq!(&rows[0][0], "Toy, model");
        assert!(rows[0].iter().skip(1).all(|c| c.parse::<f64>().is_ok()));
    }

    #[test]
    fn format_names() {
        assert_eq!("text".parse::<ReportFormat>().unwrap(), ReportFormat::Text);
        assert!("xml".parse::<ReportFormat>().is_err());
    }
}
