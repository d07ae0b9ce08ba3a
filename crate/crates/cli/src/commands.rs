use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use advfair::data::{RawRecord, Scaler};
use advfair::explain::{case_study_records, explain_record, permutation_importance, RecordExplanation};
use advfair::pipeline::{
    compas_report, ensure_dir, load_trained, model_report, prepare, save_trained, sweep_csv, train_model, Prepared,
    RunConfig,
};
use advfair::report::{emit_report, render_text, NamedReport, ReportFormat, RunManifest};
use advfair::train::{TrainConfig, TrainedPair};
use serde::Serialize;

use crate::exit::{Class, Failure};
use crate::settings::Settings;

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::new(Class::Other, format!("cannot write {}: {e}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| io_failure(path, e))?;
    fs::write(path, text + "\n").map_err(|e| io_failure(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| io_failure(path, e))
}

fn resolve(settings: &Settings, base: RunConfig) -> Result<RunConfig, Failure> {
    let mut rc = base;
    settings.apply(&mut rc)?;
    Ok(rc)
}

fn manifest(command: &str, settings: &Settings, rc: &RunConfig, prepared: &Prepared) -> RunManifest {
    let mut config = rc.to_map();
    config.extend(settings.command_entries());
    RunManifest::new(command, config, prepared.fingerprint(&rc.data), rc.train.seed)
}

fn save_manifest(m: &RunManifest, out: &Path) -> Result<PathBuf, Failure> {
    let path = out.join(format!("manifest-{}.json", m.command));
    m.save(&path)?;
    Ok(path)
}

/// Loaded models must have been fit on exactly the split being evaluated.
fn check_scaler(saved: &Scaler, prepared: &Prepared, dir: &Path) -> Result<(), Failure> {
    if *saved != prepared.scaler {
        return Err(Failure::new(
            Class::Data,
            format!(
                "model in {} was trained on a different dataset or split; pass the same --data/--split-* settings",
                dir.display()
            ),
        ));
    }
    Ok(())
}

fn model_label(cfg: &TrainConfig) -> String {
    match cfg.mode.as_str() {
        "baseline" => "Baseline".to_string(),
        mode => format!("Adversarial {mode} (alpha={})", cfg.alpha),
    }
}

fn slug(name: &str) -> String {
    let s: String = name.chars().map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '-' }).collect();
    s.split('-').filter(|p| !p.is_empty()).collect::<Vec<_>>().join("-")
}

fn formats(settings: &Settings) -> Result<Vec<ReportFormat>, Failure> {
    match settings.get("format") {
        Some(f) => Ok(vec![f.parse::<ReportFormat>()?]),
        None => Ok(vec![ReportFormat::Json, ReportFormat::Text, ReportFormat::Csv]),
    }
}

fn write_calibration(named: &NamedReport, path: &Path) -> Result<(), Failure> {
    let file = File::create(path).map_err(|e| io_failure(path, e))?;
    named.report.calibration.write_csv(BufWriter::new(file)).map_err(|e| io_failure(path, e))
}

pub fn ingest(settings: &Settings) -> Result<(), Failure> {
    let rc = resolve(settings, RunConfig::default())?;
    let out = settings.out_dir();
    ensure_dir(&out)?;
    let prepared = prepare(&rc)?;
    let mut m = manifest("ingest", settings, &rc, &prepared);

    let report_path = out.join("ingest_report.json");
    write_json(&report_path, &prepared.ingest)?;
    m.record_output(&report_path);
    let data_path = out.join("dataset.csv");
    let file = File::create(&data_path).map_err(|e| io_failure(&data_path, e))?;
    prepared.encoded.write_csv(BufWriter::new(file))?;
    m.record_output(&data_path);
    save_manifest(&m, &out)?;

    let ing = &prepared.ingest;
    println!("rows read {}, kept {}", ing.rows_read, ing.rows_kept);
    for (reason, count) in &ing.dropped {
        println!("  dropped {count:>6} {reason}");
    }
    let g1 = prepared.encoded.d.iter().filter(|&&g| g == 1).count();
    let [g0_name, g1_name] = &prepared.encoded.schema.group_levels;
    println!("groups: {g0_name} {}, {g1_name} {g1}", prepared.encoded.n_rows() - g1);
    println!("split: train {} (fit {}, valid {}), test {}", prepared.train.n_rows(), prepared.fit.n_rows(), prepared.valid.n_rows(), prepared.test.n_rows());
    println!("manifest {}", m.id);
    Ok(())
}

pub fn train(settings: &Settings) -> Result<(), Failure> {
    let rc = resolve(settings, RunConfig::default())?;
    let out = settings.out_dir();
    let prepared = prepare(&rc)?;
    let pair = train_model(&prepared, &rc.train)?;
    let mut m = manifest("train", settings, &rc, &prepared);
    for path in save_trained(&out, &pair, &prepared.scaler, &rc)? {
        m.record_output(&path);
    }
    save_manifest(&m, &out)?;

    let v = &pair.history[pair.selected_epoch].valid;
    println!(
        "{}: selected epoch {} of {}; validation auc {:.4} accuracy {:.4} high-risk gap {:.4} fp gap {:.4} fn gap {:.4}",
        pair.mode,
        pair.selected_epoch,
        pair.history.len(),
        v.auc,
        v.accuracy,
        v.high_risk_gap,
        v.fp_gap,
        v.fn_gap
    );
    println!("wrote {} (manifest {})", out.display(), m.id);
    Ok(())
}

fn load_model(dir: &Path) -> Result<(TrainedPair, Scaler, RunConfig), Failure> {
    load_trained(dir).map_err(|e| Failure::new(Class::Data, format!("cannot load model from {}: {e}", dir.display())))
}

pub fn evaluate(settings: &Settings) -> Result<(), Failure> {
    let out = settings.out_dir();
    let dir = settings.path("model").unwrap_or_else(|| out.clone());
    let (pair, scaler, saved) = load_model(&dir)?;
    let rc = resolve(settings, saved)?;
    let prepared = prepare(&rc)?;
    check_scaler(&scaler, &prepared, &dir)?;
    ensure_dir(&out)?;

    let named = vec![NamedReport::new(model_label(&pair.config), model_report(&pair, &prepared.test, rc.train.threshold, rc.bins)?)];
    let mut m = manifest("evaluate", settings, &rc, &prepared);
    for format in formats(settings)? {
        let path = out.join(format!("report.{}", format.extension()));
        emit_report(&named, format, &path, Some(&m.id))?;
        m.record_output(&path);
    }
    let cal = out.join("calibration.csv");
    write_calibration(&named[0], &cal)?;
    m.record_output(&cal);
    save_manifest(&m, &out)?;
    print!("{}", render_text(&named, Some(&m.id)));
    Ok(())
}

fn trained_or_loaded(
    settings: &Settings,
    key: &str,
    cfg: TrainConfig,
    prepared: &Prepared,
    rc: &RunConfig,
    out: &Path,
) -> Result<TrainedPair, Failure> {
    match settings.path(key) {
        Some(dir) => {
            let (pair, scaler, _) = load_model(&dir)?;
            check_scaler(&scaler, prepared, &dir)?;
            Ok(pair)
        }
        None => {
            let pair = train_model(prepared, &cfg)?;
            let dir = out.join(slug(&cfg.mode));
            save_trained(&dir, &pair, &prepared.scaler, &RunConfig { train: cfg, ..rc.clone() })?;
            Ok(pair)
        }
    }
}

pub fn compare(settings: &Settings) -> Result<(), Failure> {
    let rc = resolve(settings, RunConfig::default())?;
    if rc.train.mode == "baseline" && settings.get("adversarial").is_none() {
        return Err(Failure::config("compare needs an adversarial --mode (parity or eq_odds)"));
    }
    let out = settings.out_dir();
    ensure_dir(&out)?;
    let prepared = prepare(&rc)?;

    let base_cfg = TrainConfig { mode: "baseline".to_string(), alpha: 0.0, ..rc.train.clone() };
    let baseline = trained_or_loaded(settings, "baseline", base_cfg, &prepared, &rc, &out)?;
    let adversarial = trained_or_loaded(settings, "adversarial", rc.train.clone(), &prepared, &rc, &out)?;

    let (t, bins) = (rc.train.threshold, rc.bins);
    let named = vec![
        NamedReport::new("COMPAS Scores (Our Test Set)", compas_report(&prepared.test, rc.compas_high_risk_decile, bins)?),
        NamedReport::new(model_label(&baseline.config), model_report(&baseline, &prepared.test, t, bins)?),
        NamedReport::new(model_label(&adversarial.config), model_report(&adversarial, &prepared.test, t, bins)?),
    ];
    let mut m = manifest("compare", settings, &rc, &prepared);
    for format in formats(settings)? {
        let path = out.join(format!("compare.{}", format.extension()));
        emit_report(&named, format, &path, Some(&m.id))?;
        m.record_output(&path);
    }
    for n in &named {
        let path = out.join(format!("calibration-{}.csv", slug(&n.model)));
        write_calibration(n, &path)?;
        m.record_output(&path);
    }
    save_manifest(&m, &out)?;
    print!("{}", render_text(&named, Some(&m.id)));
    Ok(())
}

pub fn sweep(settings: &Settings) -> Result<(), Failure> {
    let rc = resolve(settings, RunConfig::default())?;
    let grid = settings.sweep_grid()?;
    let out = settings.out_dir();
    ensure_dir(&out)?;
    let prepared = prepare(&rc)?;
    let cells = advfair::pipeline::sweep(&prepared, &rc.train, &grid, rc.bins)?;

    let mut m = manifest("sweep", settings, &rc, &prepared);
    let csv = sweep_csv(&cells);
    let csv_path = out.join("sweep.csv");
    write_text(&csv_path, &csv)?;
    m.record_output(&csv_path);
    let json_path = out.join("sweep.json");
    write_json(&json_path, &cells)?;
    m.record_output(&json_path);
    save_manifest(&m, &out)?;
    print!("{csv}");
    Ok(())
}

#[derive(Serialize)]
struct ExplainedRecord {
    name: String,
    compas_decile: Option<u8>,
    threshold: f64,
    high_risk: bool,
    #[serde(flatten)]
    explanation: RecordExplanation,
}

fn parse_record(spec: &str) -> Result<RawRecord, Failure> {
    let mut pairs = Vec::new();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Failure::config(format!("record field {item:?} is not key=value")))?;
        pairs.push((k, v));
    }
    RawRecord::from_pairs(pairs).map_err(|e| Failure::config(format!("record: {e}")))
}

fn records(settings: &Settings) -> Result<Vec<(String, RawRecord)>, Failure> {
    if let Some(spec) = settings.get("record") {
        return Ok(vec![("record".to_string(), parse_record(spec)?)]);
    }
    let wanted = settings.get("case").unwrap_or("all").to_ascii_lowercase();
    let all = case_study_records();
    let picked: Vec<(String, RawRecord)> = all
        .into_iter()
        .filter(|(name, _)| wanted == "all" || name.eq_ignore_ascii_case(&wanted))
        .map(|(name, r)| (name.to_string(), r))
        .collect();
    if picked.is_empty() {
        return Err(Failure::config(format!("unknown case {wanted:?}; expected joe, bob or all")));
    }
    Ok(picked)
}

fn explanation_text(recs: &[ExplainedRecord]) -> String {
    let mut out = String::new();
    for r in recs {
        let risk = if r.high_risk { "high" } else { "low" };
        out.push_str(&format!("{}: score {:.4} ({risk} risk at {:.4})", r.name, r.explanation.score, r.threshold));
        if let Some(d) = r.compas_decile {
            out.push_str(&format!("; COMPAS decile {d}"));
        }
        out.push('\n');
        let mut deltas = r.explanation.deltas.clone();
        deltas.sort_by(|a, b| b.delta.abs().total_cmp(&a.delta.abs()));
        let width = deltas.iter().map(|d| d.feature.len()).max().unwrap_or(7).max(7);
        out.push_str(&format!("  {:<width$} {:>9} {:>9}\n", "feature", "value", "delta"));
        for d in deltas {
            out.push_str(&format!("  {:<width$} {:>9.4} {:>+9.4}\n", d.feature, d.value, d.delta));
        }
        out.push('\n');
    }
    out
}

pub fn explain(settings: &Settings) -> Result<(), Failure> {
    let out = settings.out_dir();
    let dir = settings.path("model").unwrap_or_else(|| out.clone());
    let (pair, scaler, saved) = load_model(&dir)?;
    let rc = resolve(settings, saved)?;
    let repeats = settings.parse::<usize>("repeats")?.unwrap_or(10);
    let targets = records(settings)?;
    let prepared = prepare(&rc)?;
    check_scaler(&scaler, &prepared, &dir)?;
    ensure_dir(&out)?;

    let mut m = manifest("explain", settings, &rc, &prepared);
    let importance = permutation_importance(&pair, &prepared.test, repeats, rc.train.seed)?;
    let imp_json = out.join("importance.json");
    write_json(&imp_json, &importance)?;
    m.record_output(&imp_json);
    let imp_csv = out.join("importance.csv");
    let file = File::create(&imp_csv).map_err(|e| io_failure(&imp_csv, e))?;
    importance.write_csv(BufWriter::new(file)).map_err(|e| io_failure(&imp_csv, e))?;
    m.record_output(&imp_csv);

    let threshold = rc.train.threshold;
    let explained = targets
        .into_iter()
        .map(|(name, rec)| {
            let explanation = explain_record(&pair, &rec, &scaler)?;
            Ok(ExplainedRecord {
                name,
                compas_decile: rec.compas_decile,
                threshold,
                high_risk: explanation.score >= threshold,
                explanation,
            })
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    let rec_json = out.join("explain.json");
    write_json(&rec_json, &explained)?;
    m.record_output(&rec_json);
    let text = explanation_text(&explained);
    let rec_txt = out.join("explain.txt");
    write_text(&rec_txt, &text)?;
    m.record_output(&rec_txt);
    save_manifest(&m, &out)?;

    println!("permutation importance (test AUC {:.4}, {} repeats)", importance.baseline_auc, importance.repeats);
    for f in importance.features.iter().take(5) {
        println!("  {:<20} {:.4} ± {:.4}", f.feature, f.importance, f.std);
    }
    println!();
    print!("{text}");
    Ok(())
}
