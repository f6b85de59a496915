//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each export takes and returns JSON strings; the page does the drawing.
//! The `*_json` functions hold the logic and are what the native tests call.

use std::collections::BTreeMap;

use qsched_core::backend::{derive_seed, execute, probabilities};
use qsched_core::composer::compose_with_id;
use qsched_core::{
    demux, hellinger, parse_qasm, parse_quirk, serialize_qasm, wasserstein_normalized, BatchId, Circuit,
    CountsDistribution, JobId, NoiseConfig,
};
use serde::{Deserialize, Serialize};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Largest composed circuit the page will simulate; keeps the tab responsive.
const DEMO_MAX_QUBITS: usize = 16;

#[derive(Debug, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Qasm,
    Quirk,
}

#[derive(Debug, Deserialize)]
struct Source {
    #[serde(default)]
    name: Option<String>,
    format: Format,
    source: String,
}

impl Source {
    fn circuit(&self, index: usize) -> Result<Circuit, String> {
        let name = self.name.clone().unwrap_or_else(|| format!("circuit {}", index + 1));
        let parsed = match self.format {
            Format::Qasm => parse_qasm(&self.source),
            Format::Quirk => parse_quirk(&self.source),
        };
        let mut c = parsed.map_err(|e| format!("{name}: {e}"))?.ensure_measurements();
        c.name = name;
        Ok(c)
    }
}

fn default_shots() -> u64 {
    2000
}

#[derive(Debug, Deserialize)]
struct PackRequest {
    circuits: Vec<Source>,
    capacity: usize,
    #[serde(default = "default_shots")]
    shots: u64,
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Serialize)]
struct PlacementView {
    name: String,
    qubit_offset: usize,
    qubit_count: usize,
    clbit_offset: usize,
    clbit_count: usize,
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Packs the circuits first-fit into as many batches as needed, runs each
/// batch and each circuit alone, and reports layouts, counts and distances.
pub fn compose_and_run_json(request: &str) -> Result<String, String> {
    let req: PackRequest = serde_json::from_str(request).map_err(err)?;
    if req.circuits.is_empty() {
        return Err("add at least one circuit".into());
    }
    if req.capacity == 0 || req.capacity > DEMO_MAX_QUBITS {
        return Err(format!("capacity must be between 1 and {DEMO_MAX_QUBITS}"));
    }
    if req.shots == 0 || req.shots > 100_000 {
        return Err("shots must be between 1 and 100000".into());
    }
    let circuits: Vec<Circuit> = req
        .circuits
        .iter()
        .enumerate()
        .map(|(i, s)| s.circuit(i))
        .collect::<Result<_, _>>()?;
    if let Some(c) = circuits.iter().find(|c| c.num_qubits > req.capacity) {
        return Err(format!("{} needs {} qubits, capacity is {}", c.name, c.num_qubits, req.capacity));
    }
    let ids: Vec<JobId> = (0..circuits.len()).map(|i| JobId::from(format!("job-{i}"))).collect();
    let name_of = |id: &JobId| circuits[ids.iter().position(|x| x == id).expect("known id")].name.clone();

    let mut pending: Vec<(JobId, Circuit)> = ids.iter().cloned().zip(circuits.iter().cloned()).collect();
    let mut scheduled: BTreeMap<usize, (usize, CountsDistribution)> = BTreeMap::new();
    let mut batches = Vec::new();
    while !pending.is_empty() {
        let b = batches.len();
        let comp = compose_with_id(&pending, req.capacity, BatchId::from(format!("batch-{b}"))).map_err(err)?;
        let counts = execute(&comp.composed.circuit, req.shots, Some(derive_seed(req.seed, 2, b as u64)), None)
            .map_err(err)?;
        for (id, d) in demux(&counts, &comp.composed.placements).map_err(err)? {
            scheduled.insert(ids.iter().position(|x| *x == id).expect("known id"), (b, d));
        }
        let placements: Vec<PlacementView> = comp
            .composed
            .placements
            .iter()
            .map(|p| PlacementView {
                name: name_of(&p.job_id),
                qubit_offset: p.qubit_offset,
                qubit_count: p.qubit_count,
                clbit_offset: p.clbit_offset,
                clbit_count: p.clbit_count,
            })
            .collect();
        batches.push(json!({
            "width": comp.composed.circuit.num_qubits,
            "qasm": serialize_qasm(&comp.composed.circuit),
            "placements": placements,
            "skipped": comp.skipped.iter().map(&name_of).collect::<Vec<_>>(),
            "counts": counts.counts(),
        }));
        pending.retain(|(id, _)| !comp.selected.contains(id));
    }

    let mut jobs = Vec::new();
    for (i, c) in circuits.iter().enumerate() {
        let alone = execute(c, req.shots, Some(derive_seed(req.seed, 1, i as u64)), None).map_err(err)?;
        let (batch, together) = &scheduled[&i];
        jobs.push(json!({
            "name": c.name,
            "width": c.num_qubits,
            "batch": batch,
            "scheduled": together.counts(),
            "individual": alone.counts(),
            "hellinger": hellinger(&alone, together).map_err(err)?,
            "wasserstein": wasserstein_normalized(&alone, together).map_err(err)?,
        }));
    }
    Ok(json!({ "batches": batches, "jobs": jobs }).to_string())
}

fn counts_from(label: &str, text: &str) -> Result<CountsDistribution, String> {
    let map: BTreeMap<String, u64> =
        serde_json::from_str(text).map_err(|e| format!("{label}: expected {{\"bitstring\": count}}: {e}"))?;
    let width = map.keys().next().map(String::len).ok_or(format!("{label} is empty"))?;
    CountsDistribution::new(width, map).map_err(|e| format!("{label}: {e}"))
}

/// Hellinger and normalised Wasserstein distance between two histograms
/// given as `{"bitstring": count}` objects.
pub fn distance_json(p: &str, q: &str) -> Result<String, String> {
    let (p, q) = (counts_from("P", p)?, counts_from("Q", q)?);
    Ok(json!({
        "hellinger": hellinger(&p, &q).map_err(err)?,
        "wasserstein": wasserstein_normalized(&p, &q).map_err(err)?,
        "bits": p.num_bits(),
    })
    .to_string())
}

#[derive(Debug, Deserialize)]
struct SweepRequest {
    #[serde(flatten)]
    circuit: Source,
    depolarizing: Vec<f64>,
    #[serde(default)]
    readout: f64,
    #[serde(default = "default_shots")]
    shots: u64,
    #[serde(default)]
    seed: u64,
}

/// Runs one circuit at each depolarizing rate and measures how far each
/// histogram drifts from the exact noiseless distribution.
pub fn noise_sweep_json(request: &str) -> Result<String, String> {
    let req: SweepRequest = serde_json::from_str(request).map_err(err)?;
    let c = req.circuit.circuit(0)?;
    if c.num_qubits > DEMO_MAX_QUBITS {
        return Err(format!("{} qubits is more than the demo simulates ({DEMO_MAX_QUBITS})", c.num_qubits));
    }
    if req.depolarizing.is_empty() || req.depolarizing.len() > 20 {
        return Err("give between 1 and 20 noise levels".into());
    }
    if req.shots == 0 || req.shots > 100_000 {
        return Err("shots must be between 1 and 100000".into());
    }
    let ideal = probabilities(&c, DEMO_MAX_QUBITS).map_err(err)?;
    let mut rows = Vec::new();
    for &p in &req.depolarizing {
        let noise = NoiseConfig::new(p, req.readout).map_err(err)?;
        let counts = execute(&c, req.shots, Some(req.seed), Some(&noise)).map_err(err)?;
        rows.push(json!({
            "depolarizing": p,
            "hellinger": hellinger(&ideal, &counts).map_err(err)?,
            "wasserstein": wasserstein_normalized(&ideal, &counts).map_err(err)?,
            "most_frequent": counts.most_frequent(),
            "counts": counts.counts(),
        }));
    }
    Ok(json!({ "name": c.name, "ideal": ideal.probs, "rows": rows }).to_string())
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = composeAndRun)]
pub fn compose_and_run(request: &str) -> Result<String, JsError> {
    js(compose_and_run_json(request))
}

#[wasm_bindgen]
pub fn distance(p: &str, q: &str) -> Result<String, JsError> {
    js(distance_json(p, q))
}

#[wasm_bindgen(js_name = noiseSweep)]
pub fn noise_sweep(request: &str) -> Result<String, JsError> {
    js(noise_sweep_json(request))
}
