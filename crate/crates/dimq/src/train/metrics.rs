//! Append-only delimited training metrics.

/// One logged step. `eval_success` is present only on evaluation steps.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub step: usize,
    pub loss_td: f64,
    pub loss_reg: f64,
    pub mean_q_dataset: f64,
    pub mean_q_unseen: f64,
    pub eval_success: Option<f64>,
}

pub const METRICS_HEADER: &str = "step,loss_td,loss_reg,mean_q_dataset,mean_q_unseen,eval_success_rate";

impl MetricsRow {
    pub fn to_csv(&self) -> String {
        let eval = self
            .eval_success
            .map(|v| v.to_string())
            .unwrap_or_default();
        format!(
            "{},{},{},{},{},{}",
            self.step, self.loss_td, self.loss_reg, self.mean_q_dataset, self.mean_q_unseen, eval
        )
    }
}

/// Renders the full metrics document. `provenance` lines (resolved config,
/// seed) are embedded as leading `#` comments so artifacts are
/// self-describing.
pub fn render_metrics(rows: &[MetricsRow], provenance: &[String]) -> String {
    let mut out = String::new();
    for line in provenance {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv());
        out.push('\n');
    }
    out
}
