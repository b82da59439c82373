//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Models travel as the same JSON documents the CLI reads. The plain
//! functions return `Result<_, String>` so they run natively in tests; the
//! `#[wasm_bindgen]` wrappers only turn errors into JS exceptions.

use inar_core::marginal::{marginal_moments, marginal_pmf};
use inar_core::presets::presets;
use inar_core::process::{simulate, Init};
use inar_core::StationaryModel;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Longest path the page may request.
pub const MAX_STEPS: usize = 200_000;

#[derive(Serialize)]
struct PmfView {
    probabilities: Vec<f64>,
    tail_bound: f64,
    method: String,
    mean: f64,
    variance: f64,
    dispersion_index: f64,
}

#[derive(Serialize)]
struct PathView {
    values: Vec<u64>,
    sample_mean: f64,
    sample_variance: f64,
    /// Empirical frequencies of `0..=max`.
    frequencies: Vec<f64>,
}

#[derive(Serialize)]
struct PresetView<'a> {
    name: &'a str,
    description: &'a str,
    model: &'a StationaryModel,
}

fn parse(model_json: &str) -> Result<StationaryModel, String> {
    StationaryModel::from_json(model_json).map_err(|e| e.to_string())
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("serializable")
}

pub fn presets_view() -> String {
    let all = presets();
    let views: Vec<PresetView> = all
        .iter()
        .map(|p| PresetView {
            name: p.name,
            description: p.description,
            model: &p.model,
        })
        .collect();
    to_json(&views)
}

pub fn pmf_view(model_json: &str, tol: f64) -> Result<String, String> {
    let model = parse(model_json)?;
    let dist = marginal_pmf(&model, tol).map_err(|e| e.to_string())?;
    let moments = marginal_moments(&model, 2).map_err(|e| e.to_string())?;
    Ok(to_json(&PmfView {
        probabilities: dist.pmf.probs().to_vec(),
        tail_bound: dist.pmf.tail_bound(),
        method: to_json(&dist.method).trim_matches('"').to_string(),
        mean: moments.mean,
        variance: moments.variance,
        dispersion_index: moments.dispersion_index,
    }))
}

pub fn moments_view(model_json: &str, orders: usize) -> Result<String, String> {
    let model = parse(model_json)?;
    let report = marginal_moments(&model, orders).map_err(|e| e.to_string())?;
    Ok(to_json(&report))
}

pub fn path_view(model_json: &str, steps: usize, seed: u32, init: &str) -> Result<String, String> {
    let model = parse(model_json)?;
    if steps == 0 || steps > MAX_STEPS {
        return Err(format!("steps must lie in 1..={MAX_STEPS}, got {steps}"));
    }
    let init: Init = init
        .parse()
        .map_err(|e: inar_core::InarError| e.to_string())?;
    let path = simulate(&model, steps, seed as u64, init).map_err(|e| e.to_string())?;
    let n = path.values.len() as f64;
    let mean = path.values.iter().map(|&x| x as f64).sum::<f64>() / n;
    let var = path
        .values
        .iter()
        .map(|&x| (x as f64 - mean).powi(2))
        .sum::<f64>()
        / n;
    let max = path.values.iter().copied().max().unwrap_or(0) as usize;
    let mut frequencies = vec![0.0; max + 1];
    for &x in &path.values {
        frequencies[x as usize] += 1.0 / n;
    }
    Ok(to_json(&PathView {
        values: path.values,
        sample_mean: mean,
        sample_variance: var,
        frequencies,
    }))
}

#[wasm_bindgen]
pub fn preset_list() -> String {
    presets_view()
}

/// Stationary pmf plus mean, variance and dispersion index.
#[wasm_bindgen]
pub fn stationary_pmf(model_json: &str, tol: f64) -> Result<String, JsError> {
    pmf_view(model_json, tol).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn moment_report(model_json: &str, orders: usize) -> Result<String, JsError> {
    moments_view(model_json, orders).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn sample_path(
    model_json: &str,
    steps: usize,
    seed: u32,
    init: &str,
) -> Result<String, JsError> {
    path_view(model_json, steps, seed, init).map_err(|e| JsError::new(&e))
}
