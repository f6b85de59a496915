//! Scheduled-versus-individual comparison over a directory of circuits.
//!
//! Every circuit runs once on its own and once inside composed batches
//! (first-fit, as many batches as the capacity requires). The demultiplexed
//! results are compared with [`compare_runs`]. All randomness derives from
//! one seed, so a fixed configuration always yields the same report.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::backend::{derive_seed, execute, BackendError, NoiseConfig, SIMULATOR_MAX_QUBITS};
use crate::circuit::{parse_qasm, parse_quirk, Circuit, CircuitError};
use crate::composer::{compose_with_id, ComposeError};
use crate::counts::CountsDistribution;
use crate::metrics::{compare_runs, DistanceReport, MetricError, RunPair};
use crate::queue::{BatchId, JobId};
use crate::unscheduler::{demux, UnscheduleError};

const INDIVIDUAL: u64 = 1;
const BATCH: u64 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub corpus_dir: PathBuf,
    pub capacity: usize,
    pub shots: u64,
    pub seed: u64,
    /// Noise for the scheduled runs.
    pub noise: Option<NoiseConfig>,
    /// Apply `noise` to the individual runs as well.
    pub noise_on_individual: bool,
    pub parallel: bool,
    pub output: Option<PathBuf>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            corpus_dir: PathBuf::from("corpus"),
            capacity: 12,
            shots: 10_000,
            seed: 2024,
            noise: None,
            noise_on_individual: false,
            parallel: false,
            output: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("corpus {0} contains no .qasm or .quirk circuits")]
    EmptyCorpus(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: CircuitError,
    },
    #[error("{path}: circuit is {width} qubits wide, the limit is {limit}")]
    TooWide { path: PathBuf, width: usize, limit: usize },
    #[error("{name}: {source}")]
    Backend {
        name: String,
        #[source]
        source: BackendError,
    },
    #[error(transparent)]
    Compose(#[from] ComposeError),
    #[error(transparent)]
    Unschedule(#[from] UnscheduleError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEntry {
    pub name: String,
    pub path: PathBuf,
    pub circuit: Circuit,
}

/// Reads every `.qasm` (OpenQASM) and `.quirk` (Quirk URL or JSON) file in
/// `dir`, sorted by file name. Circuits are named after their file stem and
/// measured in full when they carry no measurement.
pub fn load_corpus(dir: &Path) -> Result<Vec<CorpusEntry>, BenchError> {
    let io = |source| BenchError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("qasm" | "quirk")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(BenchError::EmptyCorpus(dir.to_path_buf()));
    }
    paths.into_iter().map(|p| load_entry(&p)).collect()
}

fn load_entry(path: &Path) -> Result<CorpusEntry, BenchError> {
    let text = fs::read_to_string(path).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let parsed = match path.extension().and_then(|e| e.to_str()) {
        Some("quirk") => parse_quirk(&text),
        _ => parse_qasm(&text),
    };
    let mut circuit = parsed
        .map_err(|source| BenchError::Parse {
            path: path.to_path_buf(),
            source,
        })?
        .ensure_measurements();
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("circuit")
        .to_string();
    circuit.name = name.clone();
    Ok(CorpusEntry {
        name,
        path: path.to_path_buf(),
        circuit,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOutcome {
    pub report: DistanceReport,
    /// Job ids of each composed batch, in dispatch order.
    pub batches: Vec<Vec<JobId>>,
    pub individual: Vec<CountsDistribution>,
    pub scheduled: Vec<CountsDistribution>,
}

/// Loads the corpus, runs the comparison and writes the CSV report if an
/// output path is configured. Nothing is written on error.
pub fn run_bench(config: &BenchConfig) -> Result<BenchOutcome, BenchError> {
    let entries = load_corpus(&config.corpus_dir)?;
    let outcome = run_bench_on(&entries, config)?;
    if let Some(path) = &config.output {
        fs::write(path, outcome.report.to_csv()).map_err(|source| BenchError::Io {
            path: path.clone(),
            source,
        })?;
    }
    Ok(outcome)
}

pub fn run_bench_on(entries: &[CorpusEntry], config: &BenchConfig) -> Result<BenchOutcome, BenchError> {
    if entries.is_empty() {
        return Err(BenchError::EmptyCorpus(config.corpus_dir.clone()));
    }
    let limit = config.capacity.min(SIMULATOR_MAX_QUBITS);
    for e in entries {
        if e.circuit.num_qubits > limit {
            return Err(BenchError::TooWide {
                path: e.path.clone(),
                width: e.circuit.num_qubits,
                limit,
            });
        }
    }
    let ids: Vec<JobId> = entries
        .iter()
        .enumerate()
        .map(|(i, e)| JobId::from(format!("{:02}-{}", i, e.name)))
        .collect();

    let individual_noise = config.noise.filter(|_| config.noise_on_individual);
    let run_one = |i: usize| -> Result<CountsDistribution, BenchError> {
        let e = &entries[i];
        execute(
            &e.circuit,
            config.shots,
            Some(derive_seed(config.seed, INDIVIDUAL, i as u64)),
            individual_noise.as_ref(),
        )
        .map_err(|source| BenchError::Backend {
            name: e.name.clone(),
            source,
        })
    };
    let individual: Vec<CountsDistribution> = if config.parallel {
        run_parallel(entries.len(), &run_one)?
    } else {
        (0..entries.len()).map(run_one).collect::<Result<_, _>>()?
    };

    let mut pending: Vec<(JobId, Circuit)> = ids
        .iter()
        .cloned()
        .zip(entries.iter().map(|e| e.circuit.clone()))
        .collect();
    let mut scheduled: Vec<Option<CountsDistribution>> = vec![None; entries.len()];
    let mut batches = Vec::new();
    while !pending.is_empty() {
        let b = batches.len();
        let comp = compose_with_id(&pending, config.capacity, BatchId::from(format!("batch-{b}")))?;
        let counts = execute(
            &comp.composed.circuit,
            config.shots,
            Some(derive_seed(config.seed, BATCH, b as u64)),
            config.noise.as_ref(),
        )
        .map_err(|source| BenchError::Backend {
            name: comp.composed.circuit.name.clone(),
            source,
        })?;
        for (id, dist) in demux(&counts, &comp.composed.placements)? {
            let idx = ids.iter().position(|x| *x == id).expect("known id");
            scheduled[idx] = Some(dist);
        }
        pending.retain(|(id, _)| !comp.selected.contains(id));
        batches.push(comp.selected);
    }
    let scheduled: Vec<CountsDistribution> = scheduled.into_iter().map(|d| d.expect("every job ran")).collect();

    let pairs: Vec<RunPair> = entries
        .iter()
        .enumerate()
        .map(|(i, e)| RunPair {
            job_id: ids[i].clone(),
            name: e.name.clone(),
            width: e.circuit.num_qubits,
            shots: config.shots,
            individual: individual[i].clone(),
            scheduled: scheduled[i].clone(),
        })
        .collect();
    let report = compare_runs(&pairs)?;
    Ok(BenchOutcome {
        report,
        batches,
        individual,
        scheduled,
    })
}

#[cfg(feature = "parallel")]
fn run_parallel<F>(n: usize, f: &F) -> Result<Vec<CountsDistribution>, BenchError>
where
    F: Fn(usize) -> Result<CountsDistribution, BenchError> + Sync,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn run_parallel<F>(n: usize, f: &F) -> Result<Vec<CountsDistribution>, BenchError>
where
    F: Fn(usize) -> Result<CountsDistribution, BenchError>,
{
    (0..n).map(f).collect()
}
