use std::fmt::Write as _;

use super::scores::EvalReport;

pub fn report_json(report: &EvalReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

/// Aligned table: dataset line then one line per trait.
pub fn report_text(name: &str, report: &EvalReport) -> String {
    let width = report
        .per_trait
        .iter()
        .map(|t| t.trait_name.chars().count())
        .chain([name.chars().count(), 5])
        .max()
        .unwrap();
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<width$}  {:>9}  {:>9}  {:>9}  {:>9}",
        "", "Precision", "Recall", "F1", "Coverage"
    );
    let mut line = |label: &str, p: f64, r: f64, f: f64, c: f64| {
        let _ = writeln!(s, "{label:<width$}  {p:>9.4}  {r:>9.4}  {f:>9.4}  {c:>9.4}");
    };
    line(name, report.precision, report.recall, report.f1, report.coverage);
    line(
        "macro",
        report.macro_precision,
        report.macro_recall,
        report.macro_f1,
        report.coverage,
    );
    for t in &report.per_trait {
        line(&t.trait_name, t.precision, t.recall, t.f1, t.coverage);
    }
    let _ = writeln!(
        s,
        "\nTP={} FP={} FN={} unverifiable cells={}",
        report.counts.tp, report.counts.fp, report.counts.fn_, report.unverifiable
    );
    s
}

pub fn per_trait_csv(report: &EvalReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "trait",
        "precision",
        "recall",
        "f1",
        "coverage",
        "tp",
        "fp",
        "fn",
        "unverifiable",
    ])
    .unwrap();
    for t in &report.per_trait {
        w.write_record([
            t.trait_name.clone(),
            format!("{:.4}", t.precision),
            format!("{:.4}", t.recall),
            format!("{:.4}", t.f1),
            format!("{:.4}", t.coverage),
            t.counts.tp.to_string(),
            t.counts.fp.to_string(),
            t.counts.fn_.to_string(),
            t.unverifiable.to_string(),
        ])
        .unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}
