use std::fmt::Write;

use shm_locate_core::pipeline::ConfusionMatrix;

/// Aligned text table: one row per true class ("Missing panel i"), one column
/// per predicted class, followed by the total accuracy.
pub fn render_confusion(title: &str, cm: &ConfusionMatrix) -> String {
    let row_labels: Vec<String> = cm.classes().iter().map(|c| format!("Missing panel {c}")).collect();
    let col_labels: Vec<String> = cm.classes().iter().map(|c| format!("Panel {c}")).collect();
    let label_w = row_labels.iter().map(String::len).max().unwrap_or(0);
    let cell_w = col_labels
        .iter()
        .map(String::len)
        .chain(cm.counts().iter().flatten().map(|v| v.to_string().len()))
        .max()
        .unwrap_or(1);

    let mut out = String::new();
    let _ = writeln!(out, "{title}");
    let _ = write!(out, "{:label_w$}", "");
    for c in &col_labels {
        let _ = write!(out, "  {c:>cell_w$}");
    }
    out.push('\n');
    for (label, row) in row_labels.iter().zip(cm.counts()) {
        let _ = write!(out, "{label:<label_w$}");
        for v in row {
            let _ = write!(out, "  {v:>cell_w$}");
        }
        out.push('\n');
    }
    let _ = writeln!(
        out,
        "total accuracy: {:.2}% ({}/{})",
        100.0 * cm.accuracy(),
        cm.trace(),
        cm.total()
    );
    out
}
