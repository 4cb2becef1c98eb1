//! Experiment report container shared by the scan and fit operations.

use serde::Serialize;

/// A fitted scaling experiment: abscissae, measured values, the straight-line
/// fit, and an echo of the generating parameters.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub label: String,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub fit: LineFit,
    pub metadata: serde_json::Value,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
}

impl ExperimentReport {
    pub fn new(
        label: impl Into<String>,
        grid: Vec<f64>,
        values: Vec<f64>,
        fit: LineFit,
        metadata: serde_json::Value,
    ) -> Self {
        assert_eq!(grid.len(), values.len(), "grid/values length mismatch");
        ExperimentReport { label: label.into(), grid, values, fit, metadata }
    }
}
