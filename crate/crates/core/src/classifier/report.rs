//! Tab-separated metric reports.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::{ClassifierError, DetectionMetrics};

/// Standard test-set rows of the training-data ablation.
pub const ABLATION_ROWS: [&str; 5] =
    ["DDI-2013 (All)", "DDI-2013 (DrugBank)", "DDI-2013 (Medline)", "NLM-DailyMed", "All"];

/// Source tags covered by each ablation row.
pub fn ablation_row_sources(row: &str) -> Option<&'static [&'static str]> {
    match row {
        "DDI-2013 (All)" => Some(&["ddi2013-drugbank", "ddi2013-medline"]),
        "DDI-2013 (DrugBank)" => Some(&["ddi2013-drugbank"]),
        "DDI-2013 (Medline)" => Some(&["ddi2013-medline"]),
        "NLM-DailyMed" => Some(&["nlm-dailymed"]),
        "All" => Some(&["ddi2013-drugbank", "ddi2013-medline", "nlm-dailymed"]),
        _ => None,
    }
}

fn fmt2(x: f64) -> String {
    format!("{x:.2}")
}

/// Precision, recall and F1 per evaluation set.
pub fn report_detection(rows: &[(&str, DetectionMetrics)]) -> String {
    let mut out = String::from("Evaluation set\tPrec.\tRec.\tF1\n");
    for (name, m) in rows {
        let _ = writeln!(out, "{name}\t{}\t{}\t{}", fmt2(m.precision), fmt2(m.recall), fmt2(m.f1));
    }
    out
}

/// F1 per (training configuration, test set) cell, with the instance
/// count of each test set. Cells are keyed by `(column, row)`.
pub fn report_ablation(
    rows: &[&str],
    columns: &[&str],
    cells: &BTreeMap<(String, String), DetectionMetrics>,
) -> Result<String, ClassifierError> {
    if rows.is_empty() || columns.is_empty() {
        return Err(ClassifierError::Report("report needs at least one row and one column".into()));
    }
    let mut out = String::from("Test dataset\tNum. pairwise instances");
    for c in columns {
        let _ = write!(out, "\t{c}");
    }
    out.push('\n');
    for row in rows {
        let mut count = None;
        let mut f1s = Vec::with_capacity(columns.len());
        for col in columns {
            let m = cells
                .get(&(col.to_string(), row.to_string()))
                .ok_or_else(|| ClassifierError::Report(format!("missing cell ({col}, {row})")))?;
            match count {
                None => count = Some(m.total()),
                Some(n) if n != m.total() => {
                    return Err(ClassifierError::Report(format!(
                        "row {row} has inconsistent instance counts {n} and {}",
                        m.total()
                    )))
                }
                Some(_) => {}
            }
            f1s.push(fmt2(m.f1));
        }
        let _ = writeln!(out, "{row}\t{}\t{}", count.unwrap_or(0), f1s.join("\t"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(tp: usize, fp: usize, fn_: usize, tn: usize) -> DetectionMetrics {
        DetectionMetrics::from_counts(tp, fp, fn_, tn)
    }

    #[test]
    fn detection_layout() {
        let r = report_detection(&[("Drugs", m(9, 1, 1, 9))]);
        assert_eq!(r, "Evaluation set\tPrec.\tRec.\tF1\nDrugs\t0.90\t0.90\t0.90\n");
    }

    #[test]
    fn single_cell_table() {
        let mut cells = BTreeMap::new();
        cells.insert(("base".to_string(), "NLM-DailyMed".to_string()), m(100, 20, 30, 777));
        let r = report_ablation(&["NLM-DailyMed"], &["base"], &cells).unwrap();
        let lines: Vec<&str> = r.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], "Test dataset\tNum. pairwise instances\tbase");
        assert_eq!(lines[1], "NLM-DailyMed\t927\t0.80");
    }

    #[test]
    fn missing_cell_is_an_error() {
        let cells = BTreeMap::new();
        assert!(matches!(report_ablation(&["All"], &["base"], &cells), Err(ClassifierError::Report(_))));
    }

    #[test]
    fn row_sources_known() {
        for row in ABLATION_ROWS {
            assert!(ablation_row_sources(row).is_some());
        }
    }
}
