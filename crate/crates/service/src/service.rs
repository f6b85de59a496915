use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};

use qsched_core::backend::derive_seed;
use qsched_core::queue::{Batch, QueueEntry, QueueError};
use qsched_core::{
    parse_qasm, parse_quirk, Backend, BackendDescriptor, CircuitError, Clock, DispatchDecision, JobId, JobRecord,
    JobStatus, QuantumJob, Scheduler, StatevectorBackend, Timestamp,
};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tracing::{info, warn};

use crate::journal::{Event, Journal};
use crate::{ServiceConfig, ServiceError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubmitFormat {
    Qasm,
    Quirk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitRequest {
    pub format: SubmitFormat,
    pub payload: String,
    pub shots: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

/// Error returned to API clients as `{code, message, detail}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: &'static str,
    pub message: String,
    pub detail: serde_json::Value,
}

impl ApiError {
    pub fn new(status: u16, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            detail: serde_json::Value::Null,
        }
    }

    pub fn with_detail(mut self, detail: serde_json::Value) -> Self {
        self.detail = detail;
        self
    }

    fn circuit(e: CircuitError) -> Self {
        let detail = match e.position() {
            Some((line, column)) => json!({ "line": line, "column": column }),
            None => serde_json::Value::Null,
        };
        ApiError::new(400, "invalid_circuit", e.to_string()).with_detail(detail)
    }

    fn internal(e: ServiceError) -> Self {
        ApiError::new(500, "internal", e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timings {
    pub enqueued: Timestamp,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dispatched: Option<Timestamp>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub completed: Option<Timestamp>,
}

/// What `GET /results/{id}` returns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JobView {
    pub job_id: JobId,
    pub status: JobStatus,
    pub name: String,
    pub width: usize,
    pub requested_shots: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counts: Option<BTreeMap<String, u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub timings: Timings,
}

struct State {
    scheduler: Scheduler,
    journal: Journal,
}

struct Inner {
    config: ServiceConfig,
    state: Mutex<State>,
    backend: Arc<dyn Backend>,
    clock: Arc<dyn Clock>,
    batches: AtomicU64,
}

/// Shared handle to the scheduler state, the journal and the backend.
#[derive(Clone)]
pub struct Service {
    inner: Arc<Inner>,
}

/// Builds the backend named in the configuration.
pub fn backend_from_config(config: &ServiceConfig) -> Result<Arc<dyn Backend>, ServiceError> {
    match config.scheduler.backend.as_str() {
        "statevector" => {
            let mut b = StatevectorBackend::new();
            if let Some(n) = config.noise {
                b = b.with_noise(n);
            }
            Ok(Arc::new(b))
        }
        other => Err(ServiceError::Config(format!("unknown backend `{other}`"))),
    }
}

fn stable_hash(s: &str) -> u64 {
    // FNV-1a
    s.bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

impl Service {
    /// Replays the journal and rebuilds the queue. Unfinished jobs come back
    /// as QUEUED in their original order. Packing capacity is the smaller of
    /// the configured capacity and the backend's width.
    pub fn open(config: ServiceConfig, backend: Arc<dyn Backend>, clock: Arc<dyn Clock>) -> Result<Self, ServiceError> {
        config.validate()?;
        let mut sched_config = config.scheduler.clone();
        let max = backend.descriptor().max_qubits;
        if sched_config.capacity > max {
            info!(
                configured = sched_config.capacity,
                backend_max = max,
                "packing capacity limited by backend width"
            );
            sched_config.capacity = max;
        }
        let mut scheduler = Scheduler::new(sched_config).map_err(|e| ServiceError::Config(e.to_string()))?;
        let (journal, records) = Journal::open(&config.journal_path)?;
        let restored = records.len();
        for record in records {
            scheduler
                .restore(record)
                .map_err(|e| ServiceError::Journal(e.to_string()))?;
        }
        if restored > 0 {
            info!(restored, queued = scheduler.queue_len(), "journal replayed");
        }
        Ok(Service {
            inner: Arc::new(Inner {
                config,
                state: Mutex::new(State { scheduler, journal }),
                backend,
                clock,
                batches: AtomicU64::new(0),
            }),
        })
    }

    fn state(&self) -> MutexGuard<'_, State> {
        self.inner.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.inner.config
    }

    pub fn capacity(&self) -> usize {
        self.state().scheduler.config().capacity
    }

    /// Parses, normalises and enqueues a circuit. The submission is in the
    /// journal before the id is returned.
    pub fn submit(&self, req: SubmitRequest) -> Result<JobId, ApiError> {
        if req.shots == 0 {
            return Err(ApiError::new(400, "invalid_request", "shots must be at least 1"));
        }
        let parsed = match req.format {
            SubmitFormat::Qasm => parse_qasm(&req.payload),
            SubmitFormat::Quirk => parse_quirk(&req.payload),
        };
        let mut circuit = parsed.map_err(ApiError::circuit)?.ensure_measurements();
        circuit.name = req.name.unwrap_or_else(|| format!("{:?}", req.format).to_lowercase());

        let mut state = self.state();
        if let Err(QueueError::TooWide { width, capacity }) = state.scheduler.check_width(&circuit) {
            return Err(ApiError::new(
                422,
                "too_wide",
                format!("circuit is {width} qubits wide but capacity is {capacity}"),
            )
            .with_detail(json!({ "width": width, "capacity": capacity })));
        }
        let job = QuantumJob::new(JobId::random(), circuit, req.shots, self.inner.clock.now());
        state
            .journal
            .append(&Event::Submitted { job: job.clone() })
            .map_err(ApiError::internal)?;
        state
            .scheduler
            .enqueue(job)
            .map_err(|e| ApiError::new(500, "internal", e.to_string()))
    }

    pub fn job_view(&self, id: &JobId, downsample: bool) -> Result<JobView, ApiError> {
        let state = self.state();
        let record = state
            .scheduler
            .record(id)
            .ok_or_else(|| ApiError::new(404, "not_found", format!("unknown job {id}")))?;
        Ok(view(record, downsample))
    }

    pub fn queue(&self) -> Vec<QueueEntry> {
        self.state().scheduler.queue_snapshot()
    }

    pub fn backends(&self) -> Vec<BackendDescriptor> {
        vec![self.inner.backend.descriptor()]
    }

    /// One cycle boundary. On dispatch the batch is journaled, marked
    /// RUNNING and returned for execution.
    pub fn tick(&self) -> Result<Option<Batch>, ServiceError> {
        let now = self.inner.clock.now();
        let mut state = self.state();
        let DispatchDecision::Dispatch(batch) = state.scheduler.run_cycle(now) else {
            return Ok(None);
        };
        let ids = batch.job_ids.clone();
        state.journal.append(&Event::Scheduled {
            batch_id: batch.batch_id().clone(),
            job_ids: ids.clone(),
            at: now,
        })?;
        state
            .scheduler
            .mark_running(batch.batch_id())
            .map_err(|e| ServiceError::Journal(e.to_string()))?;
        state.journal.append(&Event::Running {
            batch_id: batch.batch_id().clone(),
            job_ids: ids,
            at: now,
        })?;
        info!(batch = %batch.batch_id(), jobs = batch.job_ids.len(), width = batch.composed.circuit.num_qubits, "dispatching");
        Ok(Some(batch))
    }

    /// Executes a dispatched batch on the backend (blocking) and records
    /// the per-job outcome.
    pub fn run_batch(&self, batch: &Batch) -> Result<(), ServiceError> {
        let n = self.inner.batches.fetch_add(1, Ordering::SeqCst);
        let seed = self.inner.config.seed.map(|s| derive_seed(s, 3, n));
        let shots = self.state().scheduler.config().composed_shots;
        let result = self.inner.backend.execute(&batch.composed.circuit, shots, seed);
        if let Err(e) = &result {
            warn!(batch = %batch.batch_id(), error = %e, "batch failed");
        }
        let now = self.inner.clock.now();
        let mut state = self.state();
        let outcome = state
            .scheduler
            .complete_batch(batch.batch_id(), result, now)
            .map_err(|e| ServiceError::Journal(e.to_string()))?;
        for (job_id, res) in outcome {
            let event = match res {
                Ok(counts) => Event::Done { job_id, counts, at: now },
                Err(error) => Event::Failed { job_id, error, at: now },
            };
            state.journal.append(&event)?;
        }
        Ok(())
    }

    /// Drops finished jobs older than the configured retention.
    pub fn prune(&self) -> Result<usize, ServiceError> {
        let Some(ttl) = self.inner.config.result_ttl_secs else {
            return Ok(0);
        };
        let now = self.inner.clock.now().millis();
        let mut state = self.state();
        let expired: Vec<JobId> = state
            .scheduler
            .records()
            .filter(|r| r.job.status.is_terminal())
            .filter(|r| r.completed_at.is_some_and(|t| t.millis() + ttl * 1000 <= now))
            .map(|r| r.job.job_id.clone())
            .collect();
        for id in &expired {
            state.journal.append(&Event::Pruned { job_id: id.clone() })?;
            state.scheduler.forget(id);
        }
        Ok(expired.len())
    }
}

fn view(record: &JobRecord, downsample: bool) -> JobView {
    let job = &record.job;
    let result = record.result.as_ref().map(|counts| {
        if downsample && job.requested_shots < counts.total_shots() {
            let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(job.job_id.as_str()));
            counts
                .downsample(job.requested_shots, &mut rng)
                .expect("requested below total")
        } else {
            counts.clone()
        }
    });
    JobView {
        job_id: job.job_id.clone(),
        status: job.status,
        name: job.circuit.name.clone(),
        width: job.width(),
        requested_shots: job.requested_shots,
        shots: result.as_ref().map(|c| c.total_shots()),
        counts: result.map(|c| c.counts().clone()),
        batch_id: job.batch_id.as_ref().map(|b| b.to_string()),
        error: job.error.clone(),
        timings: Timings {
            enqueued: job.submitted_at,
            dispatched: record.dispatched_at,
            completed: record.completed_at,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use qsched_core::queue::ManualClock;
    use std::time::Duration;

    const BELL: &str = "OPENQASM 2.0;\nqreg q[2];\ncreg c[2];\nh q[0];\ncx q[0],q[1];\nmeasure q -> c;\n";

    fn open(dir: &std::path::Path, capacity: usize) -> (Service, ManualClock) {
        let clock = ManualClock::new(Timestamp(1_000));
        let mut config = ServiceConfig {
            journal_path: dir.join("journal.jsonl"),
            seed: Some(5),
            ..ServiceConfig::default()
        };
        config.scheduler.capacity = capacity;
        let backend = backend_from_config(&config).unwrap();
        (Service::open(config, backend, Arc::new(clock.clone())).unwrap(), clock)
    }

    fn bell(shots: u64) -> SubmitRequest {
        SubmitRequest {
            format: SubmitFormat::Qasm,
            payload: BELL.into(),
            shots,
            name: None,
        }
    }

    #[test]
    fn submit_run_and_fetch() {
        let dir = tempfile::tempdir().unwrap();
        let (svc, clock) = open(dir.path(), 12);
        let id = svc.submit(bell(100)).unwrap();
        assert_eq!(svc.job_view(&id, false).unwrap().status, JobStatus::Queued);
        assert!(svc.tick().unwrap().is_none(), "arrival during the cycle");
        clock.advance(Duration::from_secs(5));
        let batch = svc.tick().unwrap().expect("quiet cycle dispatches");
        assert_eq!(svc.job_view(&id, false).unwrap().status, JobStatus::Running);
        svc.run_batch(&batch).unwrap();
        let v = svc.job_view(&id, false).unwrap();
        assert_eq!(v.status, JobStatus::Done);
        assert_eq!(v.shots, Some(10_000));
        assert_eq!(v.counts.unwrap().values().sum::<u64>(), 10_000);
        let small = svc.job_view(&id, true).unwrap();
        assert_eq!(small.shots, Some(100));
        assert_eq!(small, svc.job_view(&id, true).unwrap());
    }

    #[test]
    fn rejections() {
        let dir = tempfile::tempdir().unwrap();
        let (svc, _) = open(dir.path(), 127);
        // packing capacity is capped by the simulator width
        assert_eq!(svc.capacity(), 24);
        let wide = SubmitRequest {
            payload: "qreg q[200]; h q[0];".into(),
            ..bell(10)
        };
        let err = svc.submit(wide).unwrap_err();
        assert_eq!((err.status, err.code), (422, "too_wide"));
        let err = svc.submit(SubmitRequest { payload: "qreg q[1];\nh q[0]".into(), ..bell(10) }).unwrap_err();
        assert_eq!(err.status, 400);
        assert_eq!(err.detail, json!({"line": 2, "column": 7}));
        assert_eq!(svc.submit(bell(0)).unwrap_err().status, 400);
        assert_eq!(svc.job_view(&JobId::random(), false).unwrap_err().status, 404);
    }

    #[test]
    fn prune_honours_ttl() {
        let dir = tempfile::tempdir().unwrap();
        let clock = ManualClock::new(Timestamp(0));
        let config = ServiceConfig {
            journal_path: dir.path().join("j.jsonl"),
            result_ttl_secs: Some(60),
            ..ServiceConfig::default()
        };
        let svc = Service::open(config.clone(), backend_from_config(&config).unwrap(), Arc::new(clock.clone())).unwrap();
        let id = svc.submit(bell(10)).unwrap();
        svc.tick().unwrap();
        clock.advance(Duration::from_secs(5));
        let batch = svc.tick().unwrap().unwrap();
        svc.run_batch(&batch).unwrap();
        clock.advance(Duration::from_secs(59));
        assert_eq!(svc.prune().unwrap(), 0);
        clock.advance(Duration::from_secs(1));
        assert_eq!(svc.prune().unwrap(), 1);
        assert_eq!(svc.job_view(&id, false).unwrap_err().status, 404);
    }
}
