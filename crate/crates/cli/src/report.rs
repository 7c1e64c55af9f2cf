//! Machine-readable run reports: one JSON object (or CSV row) per run.
//! Fields are stable; evolution is additive only.

use std::collections::BTreeMap;

use otfs::util::MemoryLog;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct InputSummary {
    pub n: usize,
    pub n_tilde: usize,
    pub dim: usize,
    pub r: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ResultSummary {
    /// d_r for the exact method.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distance: Option<f64>,
    /// d_r^r, the raw transport objective.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distance_pow: Option<f64>,
    /// Sinkhorn divergence with the entropy term (lower bound on d_r^r).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    /// Transport cost of the scaled plan (upper bound on approximating
    /// d_r^r from above as lambda grows).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
    /// r-th root of the upper divergence, on the distance scale.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper_root: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AllocationEntry {
    pub label: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct MemoryReport {
    pub major_allocations: Vec<AllocationEntry>,
    /// Estimate assuming the major arrays are live simultaneously.
    pub peak_bytes: usize,
}

impl From<&MemoryLog> for MemoryReport {
    fn from(log: &MemoryLog) -> Self {
        Self {
            major_allocations: log
                .entries()
                .iter()
                .map(|(label, bytes)| AllocationEntry {
                    label: label.clone(),
                    bytes: *bytes,
                })
                .collect(),
            peak_bytes: log.peak_bytes(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub method: String,
    pub inputs: InputSummary,
    pub results: ResultSummary,
    /// Wall time per phase, milliseconds.
    pub timings_ms: BTreeMap<String, f64>,
    pub memory: MemoryReport,
}

impl RunReport {
    /// Every reported number must be finite; emitting NaN/inf would be a
    /// numerical failure that slipped through.
    pub fn all_finite(&self) -> bool {
        let opts = [
            self.results.distance,
            self.results.distance_pow,
            self.results.lower,
            self.results.upper,
            self.results.upper_root,
            self.results.dual,
            self.results.residual,
        ];
        opts.iter().flatten().all(|v| v.is_finite())
            && self.timings_ms.values().all(|v| v.is_finite() && *v >= 0.0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Flat single-row CSV rendering with a header line.
    pub fn to_csv(&self) -> String {
        let header = "method,n,n_tilde,dim,r,lambda,eps,distance,distance_pow,lower,upper,upper_root,dual,iterations,residual,converged,wall_ms_total,peak_bytes";
        let fmt_opt = |v: Option<f64>| v.map(|x| format!("{x:.12e}")).unwrap_or_default();
        let row = format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.method,
            self.inputs.n,
            self.inputs.n_tilde,
            self.inputs.dim,
            self.inputs.r,
            fmt_opt(self.inputs.lambda),
            fmt_opt(self.inputs.eps),
            fmt_opt(self.results.distance),
            fmt_opt(self.results.distance_pow),
            fmt_opt(self.results.lower),
            fmt_opt(self.results.upper),
            fmt_opt(self.results.upper_root),
            fmt_opt(self.results.dual),
            self.results
                .iterations
                .map(|v| v.to_string())
                .unwrap_or_default(),
            fmt_opt(self.results.residual),
            self.results
                .converged
                .map(|v| v.to_string())
                .unwrap_or_default(),
            self.timings_ms.get("total").copied().unwrap_or(0.0),
            self.memory.peak_bytes,
        );
        format!("{header}\n{row}")
    }
}
