//! The evaluation report and its JSON, CSV and text renderings.

use calrisk::confusion::{all_cw_counts, cw_metrics};
use calrisk::ranking::{macro_average, per_class_auc};
use calrisk::{AucGap, CalRiskError, CwMetricRow, EvaluationSet, MacroAuc, RiskReport};
use serde::{Deserialize, Serialize};

use crate::error::CliResult;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub command: String,
    pub input: Option<String>,
    pub epsilon: f64,
    pub m_bins: usize,
    pub seed: Option<u64>,
    pub n: usize,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    pub risk: RiskReport,
    pub cw_per_class: Vec<CwMetricRow>,
    /// Classes with both positives and negatives.
    pub auc_per_class: Vec<AucGap>,
    /// `None` when no class has a defined AUC or class scores are missing.
    pub auc_macro: Option<MacroAuc>,
    pub provenance: Provenance,
}

/// Per-class gaps and their macro average. Multiclass sets without class
/// confidences have no ranking scores, so both come back empty.
pub fn ranking_summary(set: &EvaluationSet) -> CliResult<(Vec<AucGap>, Option<MacroAuc>)> {
    let per_class = match per_class_auc(set) {
        Ok(v) => v,
        Err(CalRiskError::MissingClassConfidences { .. }) => return Ok((Vec::new(), None)),
        Err(e) => return Err(e.into()),
    };
    let auc_macro = match macro_average(&per_class) {
        Ok(m) => Some(m),
        Err(CalRiskError::NoValidClasses) => None,
        Err(e) => return Err(e.into()),
    };
    Ok((per_class.into_iter().flatten().collect(), auc_macro))
}

pub fn build_report(set: &EvaluationSet, m_bins: usize, provenance: Provenance) -> CliResult<ReportDocument> {
    let risk = calrisk::risk_report(set, m_bins)?;
    let cw_per_class = all_cw_counts(set).iter().map(cw_metrics).collect();
    let (auc_per_class, auc_macro) = ranking_summary(set)?;
    Ok(ReportDocument {
        schema_version: SCHEMA_VERSION,
        risk,
        cw_per_class,
        auc_per_class,
        auc_macro,
        provenance,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

fn opt_fixed(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.digits$}"))
}

fn pct(v: f64) -> String {
    format!("{:.2}%", 100.0 * v)
}

/// Scalar risk fields as `(name, value)` pairs, full precision.
pub fn risk_fields(r: &RiskReport) -> Vec<(&'static str, String)> {
    vec![
        ("N", r.n.to_string()),
        ("Acc", r.acc.to_string()),
        ("cwA", r.cwa.to_string()),
        ("gain", opt(r.gain)),
        ("CSR", r.csr.to_string()),
        ("sigma_CSR", r.sigma_csr.to_string()),
        ("z", r.z.to_string()),
        ("P_risk", r.p_risk.to_string()),
        ("P_risk_one_sided", r.p_risk_one_sided.to_string()),
        ("ECE", r.ece.to_string()),
        ("Brier", r.brier.to_string()),
        ("mean_conf", r.mean_conf.to_string()),
        ("mean_conf_wrong", opt(r.mean_conf_wrong)),
        ("jensen_lower_bound", opt(r.jensen_lower_bound)),
    ]
}

/// Long-format CSV: `section,class,metric,value`.
pub fn render_csv(doc: &ReportDocument) -> String {
    let mut out = String::from("section,class,metric,value\n");
    for (name, value) in risk_fields(&doc.risk) {
        out.push_str(&format!("risk,,{name},{value}\n"));
    }
    for row in &doc.cw_per_class {
        let c = row.class_id;
        for (name, v) in [
            ("cw_precision", row.cw_precision),
            ("cw_recall", row.cw_recall),
            ("cw_specificity", row.cw_specificity),
            ("cw_f1", row.cw_f1),
            ("cw_mcc", row.cw_mcc),
            ("cw_acc", row.cw_acc),
        ] {
            out.push_str(&format!("cw,{c},{name},{}\n", opt(v)));
        }
    }
    for g in &doc.auc_per_class {
        let c = g.class_id;
        for (name, v) in [("AUC", g.auc), ("cwAUC", g.cw_auc), ("delta", g.delta), ("cov_form", g.cov_form)] {
            out.push_str(&format!("auc,{c},{name},{v}\n"));
        }
    }
    if let Some(m) = &doc.auc_macro {
        out.push_str(&format!("auc_macro,,AUC,{}\n", m.auc));
        out.push_str(&format!("auc_macro,,cwAUC,{}\n", m.cw_auc));
    }
    out
}

/// Left-aligns the first column and right-aligns the rest.
pub fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| {
                if c == 0 {
                    format!("{s:<w$}", w = widths[c])
                } else {
                    format!("{s:>w$}", w = widths[c])
                }
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

fn risk_row(label: &str, r: &RiskReport) -> Vec<String> {
    vec![
        label.to_string(),
        r.n.to_string(),
        format!("{:.4}", r.acc),
        format!("{:.4}", r.cwa),
        r.gain.map_or_else(|| "NA".into(), pct),
        format!("{:.4}", r.csr),
        format!("{:.4}", r.sigma_csr),
        pct(r.p_risk),
        format!("{:.4}", r.ece),
        format!("{:.4}", r.brier),
    ]
}

pub fn risk_header(first: &str) -> Vec<String> {
    [first, "N", "Acc", "cwA", "gain", "CSR", "σ_CSR", "P_risk", "ECE", "Brier"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

/// Text rows comparing several reports, one per labelled row.
pub fn risk_table(rows: &[(&str, &RiskReport)], first: &str) -> String {
    let mut table = vec![risk_header(first)];
    table.extend(rows.iter().map(|(label, r)| risk_row(label, r)));
    align(&table)
}

pub fn render_text(doc: &ReportDocument) -> String {
    let mut out = String::new();
    let label = doc.provenance.input.as_deref().unwrap_or("input");
    out.push_str(&risk_table(&[(label, &doc.risk)], "dataset"));
    out.push_str(&format!(
        "z = {:.4}; mean conf = {:.4}; mean conf (wrong) = {}; Jensen bound = {}\n",
        doc.risk.z,
        doc.risk.mean_conf,
        opt_fixed(doc.risk.mean_conf_wrong, 4),
        opt_fixed(doc.risk.jensen_lower_bound, 4),
    ));

    out.push('\n');
    let mut cw = vec![["class", "cwPrec", "cwRec", "cwSpec", "cwF1", "cwMCC", "cwAcc"]
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()];
    for row in &doc.cw_per_class {
        cw.push(vec![
            row.class_id.to_string(),
            opt_fixed(row.cw_precision, 4),
            opt_fixed(row.cw_recall, 4),
            opt_fixed(row.cw_specificity, 4),
            opt_fixed(row.cw_f1, 4),
            opt_fixed(row.cw_mcc, 4),
            opt_fixed(row.cw_acc, 4),
        ]);
    }
    out.push_str(&align(&cw));

    out.push('\n');
    if doc.auc_per_class.is_empty() {
        out.push_str("AUC: not available (no class scores or no class with both outcomes)\n");
        return out;
    }
    let mut auc = vec![["class", "AUC", "cwAUC", "Δ", "Cov/E[w]"]
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()];
    for g in &doc.auc_per_class {
        auc.push(vec![
            g.class_id.to_string(),
            format!("{:.4}", g.auc),
            format!("{:.4}", g.cw_auc),
            format!("{:+.4}", g.delta),
            format!("{:+.4}", g.cov_form),
        ]);
    }
    if let Some(m) = &doc.auc_macro {
        auc.push(vec![
            "macro".into(),
            format!("{:.4}", m.auc),
            format!("{:.4}", m.cw_auc),
            format!("{:+.4}", m.cw_auc - m.auc),
            String::new(),
        ]);
    }
    out.push_str(&align(&auc));
    if let Some(m) = &doc.auc_macro {
        if !m.degenerate.is_empty() {
            let ids: Vec<String> = m.degenerate.iter().map(|k| k.to_string()).collect();
            out.push_str(&format!("excluded degenerate classes: {}\n", ids.join(", ")));
        }
    }
    out
}
