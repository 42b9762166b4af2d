//! Output formats for metrics and localization-error reports. Scores are
//! rounded to three decimals on the way out.

use std::fmt::Write as _;

use navground_core::grounding::DialogueType;
use navground_core::level1::ErrorReport;
use navground_core::metrics::{MetricsReport, ReportRow};
use serde::Serialize;

pub const CSV_HEADER: [&str; 5] = ["space", "case", "SR_or_AR", "AS_or_NS", "T"];

pub fn round3(x: f64) -> f64 {
    let r = (x * 1000.0).round() / 1000.0;
    // Avoid printing -0.0.
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

#[derive(Serialize)]
struct WeightsOut {
    sr: f64,
    #[serde(rename = "as")]
    as_: f64,
    ar: f64,
    ns: f64,
}

#[derive(Serialize)]
struct RowOut<'a> {
    #[serde(rename = "type")]
    dialogue_type: DialogueType,
    space: &'a str,
    case: &'a str,
    items: usize,
    #[serde(rename = "SR_or_AR")]
    score1: f64,
    #[serde(rename = "AS_or_NS")]
    score2: f64,
    #[serde(rename = "T")]
    total: f64,
}

#[derive(Serialize)]
struct ItemOut<'a> {
    id: &'a str,
    #[serde(rename = "type")]
    dialogue_type: DialogueType,
    space: &'a str,
    case: &'a str,
    k: usize,
    alpha: usize,
    resolved_id: Option<&'a str>,
    #[serde(rename = "SR_or_AR")]
    score1: f64,
    #[serde(rename = "AS_or_NS")]
    score2: f64,
    #[serde(rename = "T")]
    total: f64,
    step_sizes: &'a [usize],
    #[serde(skip_serializing_if = "Option::is_none")]
    diagnostics: Option<&'a str>,
}

#[derive(Serialize)]
struct ReportOut<'a> {
    weights: WeightsOut,
    rows: Vec<RowOut<'a>>,
    items: Vec<ItemOut<'a>>,
}

fn row_out(r: &ReportRow) -> RowOut<'_> {
    RowOut {
        dialogue_type: r.dialogue_type,
        space: &r.space,
        case: &r.case,
        items: r.items,
        score1: round3(r.score1),
        score2: round3(r.score2),
        total: round3(r.total),
    }
}

/// Pretty JSON with weights, grouped rows and per-item scores.
pub fn metrics_json(report: &MetricsReport) -> String {
    let [sr, as_, ar, ns] = report.weights.as_array();
    let out = ReportOut {
        weights: WeightsOut { sr, as_, ar, ns },
        rows: report.rows.iter().map(row_out).collect(),
        items: report
            .items
            .iter()
            .map(|s| ItemOut {
                id: &s.item_id,
                dialogue_type: s.dialogue_type,
                space: &s.space,
                case: &s.case,
                k: s.k,
                alpha: s.alpha,
                resolved_id: s.resolved_id.as_ref().map(|i| i.as_str()),
                score1: round3(s.score1),
                score2: round3(s.score2),
                total: round3(s.total),
                step_sizes: &s.step_sizes,
                diagnostics: s.diagnostics.as_deref(),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&out).expect("report serializes");
    s.push('\n');
    s
}

/// One CSV line per row: `space,case,SR_or_AR,AS_or_NS,T`.
pub fn metrics_csv(report: &MetricsReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for r in &report.rows {
        let cells = [
            r.space.clone(),
            r.case.clone(),
            format!("{:.3}", round3(r.score1)),
            format!("{:.3}", round3(r.score2)),
            format!("{:.3}", round3(r.total)),
        ];
        w.write_record(&cells).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}

/// Fixed-width table split by dialogue type, as printed on the terminal.
pub fn metrics_table(report: &MetricsReport) -> String {
    let mut out = String::new();
    for t in [DialogueType::A, DialogueType::B] {
        let rows: Vec<&ReportRow> = report.rows.iter().filter(|r| r.dialogue_type == t).collect();
        if rows.is_empty() {
            continue;
        }
        let (c1, c2, ct) = match t {
            DialogueType::A => ("SR", "AS", "T_A"),
            DialogueType::B => ("AR", "NS", "T_B"),
        };
        let _ = writeln!(out, "Type-{t}");
        let _ = writeln!(out, "{:<16}{:<16}{:>6}{:>8}{:>8}{:>8}", "space", "case", "items", c1, c2, ct);
        for r in rows {
            let _ = writeln!(
                out,
                "{:<16}{:<16}{:>6}{:>8.3}{:>8.3}{:>8.3}",
                r.space,
                r.case,
                r.items,
                round3(r.score1),
                round3(r.score2),
                round3(r.total)
            );
        }
        out.push('\n');
    }
    let aborted: Vec<_> = report.aborted().collect();
    if !aborted.is_empty() {
        let _ = writeln!(out, "aborted items:");
        for s in aborted {
            let _ = writeln!(out, "  {}: {}", s.item_id, s.diagnostics.as_deref().unwrap_or(""));
        }
    }
    out
}

#[derive(Serialize)]
struct ErrorReportOut<'a> {
    mean: f64,
    std: f64,
    min: f64,
    max: f64,
    per_object: Vec<(&'a str, f64)>,
}

/// Localization errors as JSON. Meters, three decimals.
pub fn error_report_json(report: &ErrorReport) -> String {
    let out = ErrorReportOut {
        mean: round3(report.mean),
        std: round3(report.std),
        min: round3(report.min),
        max: round3(report.max),
        per_object: report.per_object.iter().map(|(id, e)| (id.as_str(), round3(*e))).collect(),
    };
    let mut s = serde_json::to_string_pretty(&out).expect("report serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use navground_core::metrics::{ItemScores, Weights};

    fn item(id: &str, t: DialogueType, space: &str, s1: f64, s2: f64) -> ItemScores {
        let (l1, l2) = Weights::default().for_type(t);
        ItemScores {
            item_id: id.into(),
            dialogue_type: t,
            space: space.into(),
            case: "c1".into(),
            k: 3,
            alpha: 1,
            resolved_id: None,
            score1: s1,
            score2: s2,
            total: l1 * s1 + l2 * s2,
            step_sizes: vec![1],
            diagnostics: None,
        }
    }

    fn report() -> MetricsReport {
        let items = vec![
            item("a", DialogueType::A, "office", 0.866, 0.835),
            item("b", DialogueType::B, "room", 1.0, 0.783),
            item("c", DialogueType::B, "room", 1.0, 0.783),
        ];
        MetricsReport::from_items(items, Weights::default()).unwrap()
    }

    #[test]
    fn csv_columns_exact() {
        let csv = metrics_csv(&report());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "space,case,SR_or_AR,AS_or_NS,T");
        assert_eq!(lines[1], "office,c1,0.866,0.835,0.860");
        assert_eq!(lines[2], "room,c1,1.000,0.783,0.913");
        assert_eq!(lines[3], "overall,type-A,0.866,0.835,0.860");
        assert_eq!(lines[4], "overall,type-B,1.000,0.783,0.913");
        assert_eq!(lines.len(), 5);
    }

    #[test]
    fn json_rounds() {
        let v: serde_json::Value = serde_json::from_str(&metrics_json(&report())).unwrap();
        assert_eq!(v["rows"][1]["T"], 0.913);
        assert_eq!(v["items"][0]["type"], "A");
        assert_eq!(v["weights"]["as"], 0.2);
    }

    #[test]
    fn table_has_both_types() {
        let t = metrics_table(&report());
        assert!(t.contains("T_A") && t.contains("T_B"));
        assert!(!t.contains("aborted"));
    }

    #[test]
    fn round3_no_negative_zero() {
        assert_eq!(round3(-0.0001).to_string(), "0");
        assert_eq!(round3(0.9888), 0.989);
    }
}
