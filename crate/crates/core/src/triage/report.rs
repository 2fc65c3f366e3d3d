use std::fmt::Write as _;
use std::str::FromStr;

use super::{CorpusReport, TriageCategory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Table,
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(ReportFormat::Table),
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!(
                "unknown report format `{other}` (table, json, csv)"
            )),
        }
    }
}

pub fn render_report(report: &CorpusReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Table => render_table(report),
        ReportFormat::Json => {
            // struct fields serialize in declaration order and counts is a
            // BTreeMap, so the output is stable
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Csv => render_csv(report),
    }
}

pub fn parse_json_report(text: &str) -> Result<CorpusReport, serde_json::Error> {
    serde_json::from_str(text)
}

fn render_csv(report: &CorpusReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "file",
        "category",
        "kind",
        "line",
        "function",
        "duration_ms",
    ])
    .expect("in-memory write");
    for r in &report.rows {
        w.write_record([
            r.file.clone(),
            r.category.to_string(),
            r.kind.clone().unwrap_or_default(),
            r.line.map(|l| l.to_string()).unwrap_or_default(),
            r.function.clone().unwrap_or_default(),
            r.duration_ms.map(|d| d.to_string()).unwrap_or_default(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv of utf-8 is utf-8")
}

fn render_table(report: &CorpusReport) -> String {
    let headers = ["FILE", "CAT", "KIND", "LINE", "FUNCTION", "MS"];
    let cells: Vec<[String; 6]> = report
        .rows
        .iter()
        .map(|r| {
            [
                r.file.clone(),
                r.category.to_string(),
                r.kind.clone().unwrap_or_else(|| "-".into()),
                r.line.map_or("-".into(), |l| l.to_string()),
                r.function.clone().unwrap_or_else(|| "-".into()),
                r.duration_ms.map_or("-".into(), |d| d.to_string()),
            ]
        })
        .collect();
    let mut widths = headers.map(str::len);
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, row: &[&str]| {
        let mut s = String::new();
        for (i, (cell, w)) in row.iter().zip(widths).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            let _ = write!(s, "{cell:<w$}");
        }
        out.push_str(s.trim_end());
        out.push('\n');
    };
    line(&mut out, &headers);
    for row in &cells {
        let refs: Vec<&str> = row.iter().map(String::as_str).collect();
        line(&mut out, &refs);
    }
    out.push('\n');
    let summary: Vec<String> = TriageCategory::ALL
        .iter()
        .map(|&c| format!("{c}={}", report.count(c)))
        .collect();
    let _ = writeln!(out, "{}  total={}", summary.join("  "), report.total);
    out
}
