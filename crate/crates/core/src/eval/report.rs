use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::{EvalError, EvalReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(EvalError::InsufficientData(format!("unknown report format {other:?}"))),
        }
    }
}

/// `section,key,value` rows at full precision.
pub fn render_csv(report: &EvalReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut row = |section: &str, key: &str, value: String| {
        w.write_record([section, key, value.as_str()]).expect("in-memory write");
    };
    row("section", "key", "value".into());
    row("overall", "accuracy", report.accuracy_overall.to_string());
    row("overall", "mean_over_subjects", report.mean_over_subjects.to_string());
    row("overall", "mean_over_tasks", report.mean_over_tasks.to_string());
    row("overall", "correct", report.correct.to_string());
    row("overall", "total", report.total.to_string());
    for (k, v) in &report.accuracy_by_task {
        row("task", k, v.to_string());
    }
    for (k, v) in &report.accuracy_by_emotion {
        row("emotion", k.name(), v.to_string());
    }
    for (k, v) in &report.accuracy_by_subject {
        row("subject", k, v.to_string());
    }
    for (k, v) in &report.accuracy_by_class_count {
        row("class_count", &k.to_string(), v.to_string());
    }
    for (i, t) in report.classes.iter().enumerate() {
        for (j, p) in report.classes.iter().enumerate() {
            row(
                "confusion",
                &format!("{}>{}", t.name(), p.name()),
                report.confusion[i][j].to_string(),
            );
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

/// Reads [`render_csv`] output back into `section -> key -> value`.
pub fn parse_csv_report(text: &str) -> Result<BTreeMap<String, BTreeMap<String, f64>>, EvalError> {
    let mut out: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    for rec in reader.records() {
        let rec = rec.map_err(|e| EvalError::InsufficientData(format!("report row: {e}")))?;
        let value: f64 = rec[2]
            .parse()
            .map_err(|_| EvalError::InsufficientData(format!("report value {:?}", &rec[2])))?;
        out.entry(rec[0].to_string())
            .or_default()
            .insert(rec[1].to_string(), value);
    }
    Ok(out)
}

fn table(out: &mut String, title: &str, header: &str, rows: &[(String, f64)], mean: Option<f64>) {
    if rows.is_empty() {
        return;
    }
    let _ = writeln!(out, "\n## {title}\n\n| {header} | Accuracy |\n|---|---|");
    for (k, v) in rows {
        let _ = writeln!(out, "| {k} | {v:.4} |");
    }
    if let Some(m) = mean {
        let _ = writeln!(out, "| Mean | {m:.4} |");
    }
}

/// Markdown tables with accuracies to 4 decimal places. Empty sections are
/// left out.
pub fn render_markdown(report: &EvalReport) -> String {
    let mut out = String::from("# Evaluation report\n\n| Metric | Value |\n|---|---|\n");
    let _ = writeln!(out, "| Overall accuracy | {:.4} |", report.accuracy_overall);
    let _ = writeln!(out, "| Mean over subjects | {:.4} |", report.mean_over_subjects);
    let _ = writeln!(out, "| Mean over tasks | {:.4} |", report.mean_over_tasks);
    let _ = writeln!(out, "| Predictions | {} |", report.total);

    let rows = |m: &BTreeMap<String, f64>| m.iter().map(|(k, v)| (k.clone(), *v)).collect::<Vec<_>>();
    table(&mut out, "Accuracy by task", "Task", &rows(&report.accuracy_by_task), None);
    let emotions: Vec<(String, f64)> = report
        .accuracy_by_emotion
        .iter()
        .map(|(k, v)| (k.to_string(), *v))
        .collect();
    let emotion_mean = (!emotions.is_empty())
        .then(|| emotions.iter().map(|(_, v)| v).sum::<f64>() / emotions.len() as f64);
    table(&mut out, "Accuracy by emotion", "Emotion", &emotions, emotion_mean);
    table(&mut out, "Accuracy by subject", "Subject", &rows(&report.accuracy_by_subject), None);
    let counts: Vec<(String, f64)> = report
        .accuracy_by_class_count
        .iter()
        .map(|(k, v)| (k.to_string(), *v))
        .collect();
    table(&mut out, "Accuracy by number of classes", "Classes", &counts, None);

    if !report.classes.is_empty() {
        let _ = write!(out, "\n## Confusion matrix\n\n| true \\ predicted |");
        for c in &report.classes {
            let _ = write!(out, " {c} |");
        }
        let _ = write!(out, "\n|---|");
        for _ in &report.classes {
            out.push_str("---|");
        }
        out.push('\n');
        for (i, c) in report.classes.iter().enumerate() {
            let _ = write!(out, "| {c} |");
            for n in &report.confusion[i] {
                let _ = write!(out, " {n} |");
            }
            out.push('\n');
        }
    }
    out
}

pub fn emit_report(report: &EvalReport, path: &Path, format: ReportFormat) -> Result<(), EvalError> {
    let text = match format {
        ReportFormat::Csv => render_csv(report),
        ReportFormat::Markdown => render_markdown(report),
    };
    std::fs::write(path, text).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })
}
