//! Machine-readable attack reports: per-image CSV, summary document, and the
//! score-change diagnostic. Payloads carry no timestamps so identical runs
//! serialize to identical bytes.

use crate::metrics::MetricsReport;

pub const SCHEMA_VERSION: u32 = 1;

/// One per-image row of a full attack run.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub id: String,
    pub orig_score: f64,
    pub target_score: f64,
    pub adv_score: f64,
    pub rank_before: usize,
    pub rank_after: usize,
    pub linf: f64,
}

/// Complete payload of one attack run.
#[derive(Debug, Clone)]
pub struct AttackReport {
    pub seed: u64,
    /// Ordered key/value echo of the run configuration.
    pub config_echo: Vec<(String, String)>,
    pub metrics: MetricsReport,
    pub rows: Vec<ReportRow>,
}

impl AttackReport {
    /// Per-image rows as CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,orig_score,target_score,adv_score,rank_before,rank_after,linf\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.id, r.orig_score, r.target_score, r.adv_score, r.rank_before, r.rank_after, r.linf
            ));
        }
        out
    }

    /// Human- and diff-friendly summary document.
    pub fn to_summary(&self) -> String {
        let mut out = String::new();
        out.push_str("sma attack report\n");
        out.push_str(&format!("schema_version: {SCHEMA_VERSION}\n"));
        out.push_str(&format!("seed: {}\n", self.seed));
        for (k, v) in &self.config_echo {
            out.push_str(&format!("{k}: {v}\n"));
        }
        out.push_str(&format!("n_images: {}\n", self.rows.len()));
        out.push_str("metrics:\n");
        let m = &self.metrics;
        out.push_str(&format!("  srocc: {}\n", m.srocc));
        out.push_str(&format!("  krocc: {}\n", m.krocc));
        out.push_str(&format!("  plcc: {}\n", m.plcc));
        out.push_str(&format!("  mse: {}\n", m.mse));
        out.push_str(&format!("  rmse: {}\n", m.rmse));
        out.push_str(&format!("  abs_gain: {}\n", m.abs_gain));
        out.push_str(&format!("  r_metric: {}\n", m.r_metric));
        out.push_str(&format!("  delta_rank: {}\n", m.delta_rank));
        out
    }

    /// Score-change diagnostic: original score against the absolute target
    /// displacement, one row per image.
    pub fn to_diagnostic_csv(&self) -> String {
        let mut out = String::from("orig_score,abs_target_delta\n");
        for r in &self.rows {
            out.push_str(&format!("{},{}\n", r.orig_score, (r.target_score - r.orig_score).abs()));
        }
        out
    }
}
