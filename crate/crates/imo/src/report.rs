//! Report emitters.
//!
//! The summary table has one row per dataset plus an average row; the shots
//! table has one row per (dataset, shots). Both use the fixed column layout
//! below whatever methods were run; missing values print as `-`.

use std::fmt::Write as _;

use imo_core::harness::{DatasetReport, EvalReport, StudyReport, DELTA_COLUMNS};
use imo_core::metrics::ImoReport;
use imo_core::{EmbeddingSet, Method};
use serde::Serialize;

use crate::error::Result;

/// Method columns, in table order.
pub const METHOD_COLUMNS: [Method; 7] = Method::ALL;

/// Pretty JSON with a trailing newline. Field order follows the type
/// definitions and floats print in shortest round-trip form, so equal
/// reports give equal bytes.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn header(with_shots: bool) -> Vec<String> {
    let mut h = vec![String::from("Dataset")];
    if with_shots {
        h.push("Shots".into());
    }
    h.extend(METHOD_COLUMNS.iter().map(|m| m.display_name().to_owned()));
    h.extend(
        DELTA_COLUMNS
            .iter()
            .map(|(a, b)| format!("Δ({}, {})", a.display_name(), b.display_name())),
    );
    h
}

struct Row {
    label: String,
    shots: Option<usize>,
    methods: Vec<Option<f64>>,
    deltas: Vec<Option<f64>>,
}

fn overall_row(d: &DatasetReport) -> Row {
    Row {
        label: d.name.clone(),
        shots: None,
        methods: METHOD_COLUMNS.iter().map(|&m| d.overall_of(m)).collect(),
        deltas: DELTA_COLUMNS
            .iter()
            .map(|&(a, b)| d.deltas.iter().find(|x| x.improved == a && x.baseline == b).map(|x| x.overall))
            .collect(),
    }
}

fn shot_rows(d: &DatasetReport, shots: &[usize]) -> Vec<Row> {
    shots
        .iter()
        .map(|&s| Row {
            label: d.name.clone(),
            shots: Some(s),
            methods: METHOD_COLUMNS.iter().map(|&m| d.shot_mean(m, s)).collect(),
            deltas: DELTA_COLUMNS
                .iter()
                .map(|&(a, b)| {
                    d.deltas
                        .iter()
                        .find(|x| x.improved == a && x.baseline == b)
                        .and_then(|x| x.per_shot.iter().find(|(k, _)| *k == s).map(|(_, v)| *v))
                })
                .collect(),
        })
        .collect()
}

/// Column-wise mean over rows that have every value of that column.
fn average_row(rows: &[Row]) -> Row {
    let mean = |col: &dyn Fn(&Row) -> Option<f64>| -> Option<f64> {
        let vals: Option<Vec<f64>> = rows.iter().map(col).collect();
        vals.filter(|v| !v.is_empty()).map(|v| v.iter().sum::<f64>() / v.len() as f64)
    };
    Row {
        label: "Average".into(),
        shots: None,
        methods: (0..METHOD_COLUMNS.len()).map(|i| mean(&|r: &Row| r.methods[i])).collect(),
        deltas: (0..DELTA_COLUMNS.len()).map(|i| mean(&|r: &Row| r.deltas[i])).collect(),
    }
}

fn summary_rows(report: &EvalReport) -> Vec<Row> {
    let mut rows: Vec<Row> = report.datasets.iter().map(overall_row).collect();
    if rows.len() > 1 {
        let avg = average_row(&rows);
        rows.push(avg);
    }
    rows
}

fn by_shot_rows(report: &EvalReport) -> Vec<Row> {
    report
        .datasets
        .iter()
        .flat_map(|d| shot_rows(d, &report.plan.shots))
        .collect()
}

fn cells(r: &Row, with_shots: bool, signed: bool) -> Vec<String> {
    let mut out = vec![r.label.clone()];
    if with_shots {
        out.push(r.shots.map(|s| s.to_string()).unwrap_or_else(|| "-".into()));
    }
    let fmt = |v: Option<f64>, sign: bool| match v {
        Some(x) if sign => format!("{x:+.2}"),
        Some(x) => format!("{x:.2}"),
        None => "-".into(),
    };
    out.extend(r.methods.iter().map(|&v| fmt(v, false)));
    out.extend(r.deltas.iter().map(|&v| fmt(v, signed)));
    out
}

fn markdown(rows: &[Row], with_shots: bool) -> String {
    let h = header(with_shots);
    let mut s = String::new();
    let _ = writeln!(s, "| {} |", h.join(" | "));
    let align: Vec<&str> = h
        .iter()
        .enumerate()
        .map(|(i, _)| if i == 0 { ":---" } else { "---:" })
        .collect();
    let _ = writeln!(s, "| {} |", align.join(" | "));
    for r in rows {
        let _ = writeln!(s, "| {} |", cells(r, with_shots, true).join(" | "));
    }
    s
}

fn csv_table(rows: &[Row], with_shots: bool) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header(with_shots))?;
    for r in rows {
        w.write_record(cells(r, with_shots, false))?;
    }
    Ok(String::from_utf8(w.into_inner().expect("in-memory writer")).expect("UTF-8 fields"))
}

/// Mean accuracy over shots per dataset, with an average row.
pub fn summary_markdown(report: &EvalReport) -> String {
    markdown(&summary_rows(report), false)
}

/// Mean accuracy over seeds per (dataset, shots).
pub fn shots_markdown(report: &EvalReport) -> String {
    markdown(&by_shot_rows(report), true)
}

pub fn summary_csv(report: &EvalReport) -> Result<String> {
    csv_table(&summary_rows(report), false)
}

pub fn shots_csv(report: &EvalReport) -> Result<String> {
    csv_table(&by_shot_rows(report), true)
}

/// `bin_center,paired_density,unpaired_density`.
pub fn histogram_csv(r: &ImoReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["bin_center", "paired_density", "unpaired_density"])?;
    for ((c, p), u) in r.bin_centers().iter().zip(&r.paired_hist).zip(&r.unpaired_hist) {
        w.write_record([c.to_string(), p.to_string(), u.to_string()])?;
    }
    Ok(String::from_utf8(w.into_inner().expect("in-memory writer")).expect("UTF-8 fields"))
}

/// One row per embedding: `label,class,f0,...` for external plotting.
pub fn features_csv(set: &EmbeddingSet) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut h = vec![String::from("label"), String::from("class")];
    h.extend((0..set.dim()).map(|i| format!("f{i}")));
    w.write_record(&h)?;
    for (row, &label) in set.vectors().iter_rows().zip(set.labels()) {
        let mut rec = vec![label.to_string(), set.class_names()[label].clone()];
        rec.extend(row.iter().map(|x| x.to_string()));
        w.write_record(&rec)?;
    }
    Ok(String::from_utf8(w.into_inner().expect("in-memory writer")).expect("UTF-8 fields"))
}

pub fn study_markdown(r: &StudyReport) -> String {
    let mut s = String::from("| Dataset | IMO original | IMO adapted | ΔIMO | TA | TA++ | Δ(TA++, TA) |\n");
    s.push_str("| :--- | ---: | ---: | ---: | ---: | ---: | ---: |\n");
    for row in &r.rows {
        let _ = writeln!(
            s,
            "| {} | {:.4} | {:.4} | {:+.4} | {:.2} | {:.2} | {:+.2} |",
            row.name, row.imo_original, row.imo_adapted, row.delta_imo, row.ta_accuracy, row.ta_plus_accuracy, row.delta_accuracy
        );
    }
    s.push('\n');
    match (r.pearson, r.slope) {
        (Some(p), Some(m)) => {
            let _ = writeln!(s, "pearson r = {p:.4}, slope = {m:.4} accuracy points per unit ΔIMO");
        }
        _ => s.push_str("correlation undefined (constant ΔIMO or Δaccuracy)\n"),
    }
    s
}
