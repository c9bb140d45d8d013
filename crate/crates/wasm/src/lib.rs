//! Browser bindings for the interactive demo page.
//!
//! Each export is a thin wrapper over a plain function in [`demo`], so the
//! demo logic is testable natively.

use wasm_bindgen::prelude::*;

pub mod demo;

fn js_err(e: String) -> JsValue {
    JsValue::from_str(&e)
}

/// Comma-separated lead names of the demo dataset.
#[wasm_bindgen]
pub fn lead_names() -> String {
    demo::lead_names().join(",")
}

/// Row-major 12x12 lead graph estimated from a synthetic dataset.
#[wasm_bindgen]
pub fn estimate_graph(n_records: u32, direction_jitter: f64, seed: u32) -> Result<Vec<f64>, JsValue> {
    demo::estimate_graph(n_records as usize, direction_jitter, seed as u64).map_err(js_err)
}

/// One lead before and after augmentation: `n_samples` original values
/// followed by `n_samples` augmented values.
#[wasm_bindgen]
pub fn augment_lead(
    lead: u32,
    p: f64,
    alpha: f64,
    gamma: f64,
    ops: &str,
    n_ops: u32,
    seed: u32,
) -> Result<Vec<f64>, JsValue> {
    let params = demo::AugmentParams {
        lead: lead as usize,
        p,
        alpha,
        gamma,
        ops: ops.to_string(),
        n_ops: n_ops as usize,
        seed: seed as u64,
    };
    demo::augment_lead(&params).map_err(js_err)
}

/// Small robustness comparison: `k` epsilons, then `k` baseline macro-F1
/// values, then `k` graph-augmented macro-F1 values.
#[wasm_bindgen]
pub fn robustness_curves(n_records: u32, seed: u32) -> Result<Vec<f64>, JsValue> {
    demo::robustness_curves(n_records as usize, seed as u64).map_err(js_err)
}
