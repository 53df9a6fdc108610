//! JSON run reports. Every experiment drops one machine-readable report
//! next to its CSV/SVG outputs; recovery diagnostics are flattened here so
//! a report is self-contained.

use std::path::Path;

use num_complex::Complex64;
use serde_json::{json, Value};
use superres_core::{RecoveryResult, Result};

pub fn complex_to_json(z: Complex64) -> Value {
    json!([z.re, z.im])
}

/// Full dump of an estimate: locations row-per-source, weights as
/// [re, im] pairs, match scores when present, and the diagnostics chain.
pub fn recovery_to_json(res: &RecoveryResult) -> Value {
    let locations: Vec<Vec<f64>> = res
        .locations
        .rows()
        .into_iter()
        .map(|r| r.to_vec())
        .collect();
    let weights: Vec<Value> = res.weights.iter().map(|&w| complex_to_json(w)).collect();
    let d = &res.diagnostics;
    json!({
        "locations": locations,
        "weights": weights,
        "matched_error": d_opt(res.matched_error),
        "weight_error": d_opt(res.weight_error),
        "diagnostics": {
            "sigma_k": d.decomposition.sigma_k,
            "sigma_k_plus_1": d.decomposition.sigma_k_plus_1,
            "whitening_residual": d.decomposition.whitening_residual,
            "sep_d": d.decomposition.sep_d,
            "cond_vhat": d.decomposition.cond_vhat,
            "factorization": d.decomposition.factorization,
            "decomposition_warnings": d.decomposition.warnings,
            "weight_residual": d.weight_residual,
            "weight_cond": d.weight_cond,
            "basis_modulus_dev": d.basis_modulus_dev,
            "attempts": d.attempts,
            "distinct_points": d.distinct_points,
            "cells": d.cells,
            "warnings": d.warnings,
        },
    })
}

/// JSON has no NaN/inf; report them as strings so the file stays valid.
fn d_opt(x: Option<f64>) -> Value {
    match x {
        None => Value::Null,
        Some(v) if v.is_finite() => json!(v),
        Some(v) => json!(v.to_string()),
    }
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_report<P: AsRef<Path>>(path: P, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report values are finite JSON");
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nonfinite_scores_stay_valid_json() {
        assert_eq!(d_opt(None), Value::Null);
        assert_eq!(d_opt(Some(0.5)), json!(0.5));
        assert_eq!(d_opt(Some(f64::NAN)), json!("NaN"));
    }
}
