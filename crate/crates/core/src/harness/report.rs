use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{fit_decay, pearson, ScenarioTrace};

/// Per (model, policy) decay and correlation statistics. Statistics are
/// `None` when no trace admitted a fit or a correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub model: String,
    pub policy: String,
    pub scenarios: usize,
    pub fitted: usize,
    pub p_min: Option<f64>,
    pub p_max: Option<f64>,
    pub p_avg: Option<f64>,
    pub r2_avg: Option<f64>,
    pub correlated: usize,
    pub rho_min: Option<f64>,
    pub rho_avg: Option<f64>,
    pub rho_gt_095: Option<f64>,
    pub rho_gt_0975: Option<f64>,
}

#[derive(Default)]
struct Acc {
    scenarios: usize,
    ps: Vec<f64>,
    r2s: Vec<f64>,
    rhos: Vec<f64>,
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

fn frac(values: &[f64], bound: f64) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().filter(|&&v| v > bound).count() as f64 / values.len() as f64)
}

/// Fits every trace and reduces per (model, policy). Traces too short to fit
/// or with constant series are counted but contribute no statistics.
pub fn summarize<'a>(traces: impl IntoIterator<Item = (&'a str, &'a ScenarioTrace)>) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, String), Acc> = BTreeMap::new();
    for (model, trace) in traces {
        let acc = groups.entry((model.to_string(), trace.policy.name().to_string())).or_default();
        acc.scenarios += 1;
        if let Ok(f) = fit_decay(&trace.remaining_series()) {
            acc.ps.push(f.p);
            acc.r2s.push(f.r_squared);
        }
        let (expected, remaining) = trace.expected_pairs();
        if let Ok(r) = pearson(&expected, &remaining) {
            acc.rhos.push(r);
        }
    }
    groups
        .into_iter()
        .map(|((model, policy), mut acc)| {
            for v in [&mut acc.ps, &mut acc.r2s, &mut acc.rhos] {
                v.sort_by(f64::total_cmp);
            }
            SummaryRow {
                model,
                policy,
                scenarios: acc.scenarios,
                fitted: acc.ps.len(),
                p_min: acc.ps.first().copied(),
                p_max: acc.ps.last().copied(),
                p_avg: mean(&acc.ps),
                r2_avg: mean(&acc.r2s),
                correlated: acc.rhos.len(),
                rho_min: acc.rhos.first().copied(),
                rho_avg: mean(&acc.rhos),
                rho_gt_095: frac(&acc.rhos, 0.95),
                rho_gt_0975: frac(&acc.rhos, 0.975),
            }
        })
        .collect()
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(
        "model,policy,scenarios,fitted,p_min,p_max,p_avg,r2_avg,correlated,rho_min,rho_avg,rho_gt_0.95,rho_gt_0.975\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.model,
            r.policy,
            r.scenarios,
            r.fitted,
            cell(r.p_min),
            cell(r.p_max),
            cell(r.p_avg),
            cell(r.r2_avg),
            r.correlated,
            cell(r.rho_min),
            cell(r.rho_avg),
            cell(r.rho_gt_095),
            cell(r.rho_gt_0975)
        );
    }
    out
}

pub fn summary_text(rows: &[SummaryRow]) -> String {
    let dash = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into());
    let mut out = format!(
        "{:<10} {:<10} {:>5} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}\n",
        "model", "policy", "n", "p_min", "p_max", "p_avg", "R2", "rho_min", "rho_avg", ">.95", ">.975"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<10} {:<10} {:>5} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}",
            r.model,
            r.policy,
            r.scenarios,
            dash(r.p_min),
            dash(r.p_max),
            dash(r.p_avg),
            dash(r.r2_avg),
            dash(r.rho_min),
            dash(r.rho_avg),
            dash(r.rho_gt_095),
            dash(r.rho_gt_0975)
        );
    }
    out
}
