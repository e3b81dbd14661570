use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::PolicyResult;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SavingsRow {
    pub workload: String,
    pub baseline_latency_ns: f64,
    pub policy_latency_ns: f64,
    pub latency_savings_pct: f64,
    pub baseline_energy_nj: f64,
    pub policy_energy_nj: f64,
    pub energy_savings_pct: f64,
}

/// Per-workload savings against a baseline, `(base - policy) / base`, and
/// aggregate savings `1 - geomean(policy / base)`, all in percent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SavingsReport {
    pub policy: String,
    pub baseline: String,
    pub rows: Vec<SavingsRow>,
    pub latency_geomean_savings_pct: f64,
    pub energy_geomean_savings_pct: f64,
}

pub fn geometric_mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidParams("geometric mean of nothing".into()));
    }
    if let Some(v) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidParams(format!("geometric mean needs positive values, got {v}")));
    }
    Ok((values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64).exp())
}

fn savings_pct(base: f64, policy: f64) -> f64 {
    if base == policy {
        0.0
    } else {
        100.0 * (base - policy) / base
    }
}

fn aggregate(ratios: &[f64]) -> Result<f64> {
    if ratios.iter().all(|r| *r == 1.0) {
        return Ok(0.0);
    }
    Ok(100.0 * (1.0 - geometric_mean(ratios)?))
}

pub fn savings_report<F: Scalar>(results: &[PolicyResult<F>], baseline: &[PolicyResult<F>]) -> Result<SavingsReport> {
    let mut base_by_name = HashMap::new();
    for b in baseline {
        if base_by_name.insert(b.workload.as_str(), b).is_some() {
            return Err(Error::Schema(format!("workload `{}` appears twice in the baseline", b.workload)));
        }
    }
    if results.len() != baseline.len() {
        return Err(Error::Schema(format!(
            "{} results against {} baseline workloads",
            results.len(),
            baseline.len()
        )));
    }
    let mut rows = Vec::with_capacity(results.len());
    let mut seen = HashMap::new();
    for r in results {
        let b = base_by_name
            .get(r.workload.as_str())
            .ok_or_else(|| Error::Schema(format!("workload `{}` missing from the baseline", r.workload)))?;
        if seen.insert(r.workload.as_str(), ()).is_some() {
            return Err(Error::Schema(format!("workload `{}` appears twice in the results", r.workload)));
        }
        let (bl, pl) = (b.latency_ns.as_f64(), r.latency_ns.as_f64());
        let (be, pe) = (b.energy_nj.as_f64(), r.energy_nj.as_f64());
        rows.push(SavingsRow {
            workload: r.workload.clone(),
            baseline_latency_ns: bl,
            policy_latency_ns: pl,
            latency_savings_pct: savings_pct(bl, pl),
            baseline_energy_nj: be,
            policy_energy_nj: pe,
            energy_savings_pct: savings_pct(be, pe),
        });
    }
    let lat: Vec<f64> = rows.iter().map(|r| r.policy_latency_ns / r.baseline_latency_ns).collect();
    let en: Vec<f64> = rows.iter().map(|r| r.policy_energy_nj / r.baseline_energy_nj).collect();
    let label = |rs: &[PolicyResult<F>]| rs.first().map(|r| r.policy.clone()).unwrap_or_default();
    Ok(SavingsReport {
        policy: label(results),
        baseline: label(baseline),
        latency_geomean_savings_pct: if rows.is_empty() { 0.0 } else { aggregate(&lat)? },
        energy_geomean_savings_pct: if rows.is_empty() { 0.0 } else { aggregate(&en)? },
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(savings_pct(100.0, 80.0), 20.0);
        assert_eq!(savings_pct(3.7, 3.7), 0.0);
        let g = aggregate(&[0.8, 0.5]).unwrap();
        assert!((g - 100.0 * (1.0 - 0.4f64.sqrt())).abs() < 1e-12);
        assert!((g - 36.754446).abs() < 1e-6);
        assert!(geometric_mean(&[1.0, -1.0]).is_err());
    }
}
