//! Job queue and cycle-driven dispatch.
//!
//! A [`Scheduler`] owns the FIFO queue and every job record. The dispatcher
//! calls [`Scheduler::run_cycle`] at each cycle boundary; a cycle dispatches
//! when the queue is non-empty and either nothing arrived during the cycle
//! or the first-fit selection is saturated (capacity exactly used, or some
//! queued job left behind because it no longer fits). Otherwise it waits
//! for another cycle so more circuits can join the batch.
//!
//! Execution is split into [`Scheduler::mark_running`] and
//! [`Scheduler::complete_batch`] so a caller can release its lock while the
//! backend runs; [`Scheduler::execute_batch`] does both in one call.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{Backend, BackendError};
use crate::circuit::Circuit;
use crate::composer::{compose, ComposeError, ComposedCircuit};
use crate::counts::CountsDistribution;
use crate::unscheduler::demux;

macro_rules! string_id {
    ($name:ident) => {
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            /// Fresh random (v4 UUID, 122 random bits) identifier.
            pub fn random() -> Self {
                $name(uuid::Uuid::new_v4().to_string())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_string())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                $name(s)
            }
        }
    };
}

string_id!(JobId);
string_id!(BatchId);

/// Milliseconds since the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub fn millis(self) -> u64 {
        self.0
    }

    pub fn plus(self, d: Duration) -> Timestamp {
        Timestamp(self.0 + d.as_millis() as u64)
    }
}

pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        let since = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .unwrap_or_default();
        Timestamp(since.as_millis() as u64)
    }
}

/// Hand-driven clock for tests and simulations.
#[derive(Debug, Default, Clone)]
pub struct ManualClock(Arc<AtomicU64>);

impl ManualClock {
    pub fn new(start: Timestamp) -> Self {
        ManualClock(Arc::new(AtomicU64::new(start.0)))
    }

    pub fn set(&self, t: Timestamp) {
        self.0.store(t.0, Ordering::SeqCst);
    }

    pub fn advance(&self, d: Duration) {
        self.0.fetch_add(d.as_millis() as u64, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Timestamp {
        Timestamp(self.0.load(Ordering::SeqCst))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum JobStatus {
    Queued,
    Scheduled,
    Running,
    Done,
    Failed,
}

impl JobStatus {
    pub fn can_become(self, next: JobStatus) -> bool {
        use JobStatus::*;
        matches!(
            (self, next),
            (Queued, Scheduled) | (Scheduled, Running) | (Running, Done) | (Running, Failed)
        )
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, JobStatus::Done | JobStatus::Failed)
    }
}

impl fmt::Display for JobStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            JobStatus::Queued => "QUEUED",
            JobStatus::Scheduled => "SCHEDULED",
            JobStatus::Running => "RUNNING",
            JobStatus::Done => "DONE",
            JobStatus::Failed => "FAILED",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumJob {
    pub job_id: JobId,
    pub circuit: Circuit,
    pub requested_shots: u64,
    pub status: JobStatus,
    pub submitted_at: Timestamp,
    pub batch_id: Option<BatchId>,
    pub error: Option<String>,
}

impl QuantumJob {
    pub fn new(job_id: JobId, circuit: Circuit, requested_shots: u64, submitted_at: Timestamp) -> Self {
        QuantumJob {
            job_id,
            circuit,
            requested_shots,
            status: JobStatus::Queued,
            submitted_at,
            batch_id: None,
            error: None,
        }
    }

    pub fn width(&self) -> usize {
        self.circuit.num_qubits
    }
}

/// A job plus everything learned about it after submission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub job: QuantumJob,
    pub result: Option<CountsDistribution>,
    pub dispatched_at: Option<Timestamp>,
    pub completed_at: Option<Timestamp>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulerConfig {
    pub capacity: usize,
    #[serde(with = "millis")]
    pub cycle_duration: Duration,
    pub composed_shots: u64,
    pub backend: String,
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig {
            capacity: 127,
            cycle_duration: Duration::from_secs(5),
            composed_shots: 10_000,
            backend: "statevector".to_string(),
        }
    }
}

impl SchedulerConfig {
    pub fn validate(&self) -> Result<(), QueueError> {
        let bad = |m: &str| Err(QueueError::InvalidConfig(m.to_string()));
        if self.capacity == 0 {
            return bad("capacity must be at least 1");
        }
        if self.composed_shots == 0 {
            return bad("composed_shots must be at least 1");
        }
        if self.cycle_duration.is_zero() {
            return bad("cycle_duration must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueueError {
    #[error("circuit is {width} qubits wide but capacity is {capacity}")]
    TooWide { width: usize, capacity: usize },
    #[error("job {0} is already known")]
    Duplicate(JobId),
    #[error("job {0} is not queued")]
    NotQueued(JobId),
    #[error("unknown job {0}")]
    UnknownJob(JobId),
    #[error("unknown batch {0}")]
    UnknownBatch(BatchId),
    #[error("job {job_id}: illegal status change {from} -> {to}")]
    IllegalTransition { job_id: JobId, from: JobStatus, to: JobStatus },
    #[error("invalid scheduler configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub composed: ComposedCircuit,
    pub job_ids: Vec<JobId>,
}

impl Batch {
    pub fn batch_id(&self) -> &BatchId {
        &self.composed.batch_id
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DispatchDecision {
    Dispatch(Batch),
    Wait,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueEntry {
    pub job_id: JobId,
    pub width: usize,
    pub position: usize,
}

/// Per-job outcome of a finished batch.
pub type BatchOutcome = Vec<(JobId, Result<CountsDistribution, String>)>;

#[derive(Debug)]
pub struct Scheduler {
    config: SchedulerConfig,
    queue: VecDeque<JobId>,
    records: HashMap<JobId, JobRecord>,
    in_flight: HashMap<BatchId, Batch>,
    arrivals: usize,
}

impl Scheduler {
    pub fn new(config: SchedulerConfig) -> Result<Self, QueueError> {
        config.validate()?;
        Ok(Scheduler {
            config,
            queue: VecDeque::new(),
            records: HashMap::new(),
            in_flight: HashMap::new(),
            arrivals: 0,
        })
    }

    pub fn config(&self) -> &SchedulerConfig {
        &self.config
    }

    /// Width check that [`Scheduler::enqueue`] applies, usable before a job
    /// is persisted.
    pub fn check_width(&self, circuit: &Circuit) -> Result<(), QueueError> {
        if circuit.num_qubits > self.config.capacity {
            return Err(QueueError::TooWide {
                width: circuit.num_qubits,
                capacity: self.config.capacity,
            });
        }
        Ok(())
    }

    /// Appends a QUEUED job to the tail of the queue.
    pub fn enqueue(&mut self, job: QuantumJob) -> Result<JobId, QueueError> {
        self.check_width(&job.circuit)?;
        if job.status != JobStatus::Queued {
            return Err(QueueError::NotQueued(job.job_id));
        }
        if self.records.contains_key(&job.job_id) {
            return Err(QueueError::Duplicate(job.job_id));
        }
        let id = job.job_id.clone();
        self.queue.push_back(id.clone());
        self.records.insert(
            id.clone(),
            JobRecord {
                job,
                result: None,
                dispatched_at: None,
                completed_at: None,
            },
        );
        self.arrivals += 1;
        Ok(id)
    }

    /// Reinstates a record read back from storage. Unfinished jobs re-enter
    /// the queue as QUEUED (in call order); finished ones are kept for
    /// retrieval only. Restored jobs do not count as arrivals.
    pub fn restore(&mut self, mut record: JobRecord) -> Result<(), QueueError> {
        let id = record.job.job_id.clone();
        if self.records.contains_key(&id) {
            return Err(QueueError::Duplicate(id));
        }
        if !record.job.status.is_terminal() {
            record.job.status = JobStatus::Queued;
            record.job.batch_id = None;
            record.job.error = None;
            record.result = None;
            record.dispatched_at = None;
            self.queue.push_back(id.clone());
        }
        self.records.insert(id, record);
        Ok(())
    }

    pub fn record(&self, id: &JobId) -> Option<&JobRecord> {
        self.records.get(id)
    }

    pub fn records(&self) -> impl Iterator<Item = &JobRecord> {
        self.records.values()
    }

    /// Drops a finished job's record; returns whether anything was removed.
    pub fn forget(&mut self, id: &JobId) -> bool {
        match self.records.get(id) {
            Some(r) if r.job.status.is_terminal() => {
                self.records.remove(id);
                true
            }
            _ => false,
        }
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn queue_snapshot(&self) -> Vec<QueueEntry> {
        self.queue
            .iter()
            .enumerate()
            .map(|(position, id)| QueueEntry {
                job_id: id.clone(),
                width: self.records[id].job.width(),
                position,
            })
            .collect()
    }

    pub fn pending_arrivals(&self) -> usize {
        self.arrivals
    }

    fn transition(&mut self, id: &JobId, to: JobStatus) -> Result<&mut JobRecord, QueueError> {
        let record = self
            .records
            .get_mut(id)
            .ok_or_else(|| QueueError::UnknownJob(id.clone()))?;
        let from = record.job.status;
        if !from.can_become(to) {
            return Err(QueueError::IllegalTransition {
                job_id: id.clone(),
                from,
                to,
            });
        }
        record.job.status = to;
        Ok(record)
    }

    /// Cycle boundary: either selects a batch (jobs become SCHEDULED) or
    /// asks the dispatcher to wait one more cycle.
    pub fn run_cycle(&mut self, now: Timestamp) -> DispatchDecision {
        let arrivals = std::mem::take(&mut self.arrivals);
        if self.queue.is_empty() {
            return DispatchDecision::Wait;
        }
        let jobs: Vec<&QuantumJob> = self.queue.iter().map(|id| &self.records[id].job).collect();
        let composition = match compose(&jobs, self.config.capacity) {
            Ok(c) => c,
            Err(ComposeError::EmptyBatch { .. }) => return DispatchDecision::Wait,
        };
        let used = composition.composed.circuit.num_qubits;
        let saturated = used == self.config.capacity || !composition.skipped.is_empty();
        if arrivals > 0 && !saturated {
            return DispatchDecision::Wait;
        }

        let batch_id = composition.composed.batch_id.clone();
        self.queue.retain(|id| !composition.selected.contains(id));
        for id in &composition.selected {
            let record = self.transition(id, JobStatus::Scheduled).expect("queued job");
            record.job.batch_id = Some(batch_id.clone());
            record.dispatched_at = Some(now);
        }
        let batch = Batch {
            composed: composition.composed,
            job_ids: composition.selected,
        };
        self.in_flight.insert(batch_id, batch.clone());
        DispatchDecision::Dispatch(batch)
    }

    pub fn mark_running(&mut self, batch_id: &BatchId) -> Result<(), QueueError> {
        let ids = self
            .in_flight
            .get(batch_id)
            .ok_or_else(|| QueueError::UnknownBatch(batch_id.clone()))?
            .job_ids
            .clone();
        for id in &ids {
            self.transition(id, JobStatus::Running)?;
        }
        Ok(())
    }

    /// Records the backend's answer for a running batch: demultiplexed
    /// counts on success, the error message on every member otherwise.
    pub fn complete_batch(
        &mut self,
        batch_id: &BatchId,
        result: Result<CountsDistribution, BackendError>,
        now: Timestamp,
    ) -> Result<BatchOutcome, QueueError> {
        let batch = self
            .in_flight
            .remove(batch_id)
            .ok_or_else(|| QueueError::UnknownBatch(batch_id.clone()))?;
        let per_job: Result<Vec<(JobId, CountsDistribution)>, String> = match result {
            Ok(counts) => demux(&counts, &batch.composed.placements).map_err(|e| e.to_string()),
            Err(e) => Err(e.to_string()),
        };
        let mut outcome = Vec::with_capacity(batch.job_ids.len());
        match per_job {
            Ok(parts) => {
                for (id, counts) in parts {
                    let record = self.transition(&id, JobStatus::Done)?;
                    record.result = Some(counts.clone());
                    record.completed_at = Some(now);
                    outcome.push((id, Ok(counts)));
                }
            }
            Err(message) => {
                for id in batch.job_ids {
                    let record = self.transition(&id, JobStatus::Failed)?;
                    record.job.error = Some(message.clone());
                    record.completed_at = Some(now);
                    outcome.push((id, Err(message.clone())));
                }
            }
        }
        Ok(outcome)
    }

    /// Runs a dispatched batch to completion on `backend` with the
    /// configured composed shot count.
    pub fn execute_batch(
        &mut self,
        batch: &Batch,
        backend: &dyn Backend,
        seed: Option<u64>,
        clock: &dyn Clock,
    ) -> Result<BatchOutcome, QueueError> {
        self.mark_running(batch.batch_id())?;
        let result = backend.execute(&batch.composed.circuit, self.config.composed_shots, seed);
        self.complete_batch(batch.batch_id(), result, clock.now())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{BackendDescriptor, StatevectorBackend};
    use crate::circuit::{parse_qasm, GateKind, Instruction};

    fn circuit(width: usize) -> Circuit {
        let mut c = Circuit::new(format!("w{width}"), width, 0);
        for q in 0..width {
            c.push(Instruction::gate(GateKind::X, [q]));
        }
        c.ensure_measurements()
    }

    fn job(id: &str, width: usize) -> QuantumJob {
        QuantumJob::new(JobId::from(id), circuit(width), 100, Timestamp(0))
    }

    fn config(capacity: usize) -> SchedulerConfig {
        SchedulerConfig {
            capacity,
            ..SchedulerConfig::default()
        }
    }

    #[test]
    fn enqueue_width_boundaries() {
        let mut s = Scheduler::new(config(127)).unwrap();
        s.enqueue(job("a", 4)).unwrap();
        assert_eq!(s.queue_snapshot().last().unwrap().job_id, JobId::from("a"));
        assert_eq!(
            s.enqueue(job("b", 128)),
            Err(QueueError::TooWide { width: 128, capacity: 127 })
        );
        s.enqueue(job("c", 127)).unwrap();
        assert_eq!(s.enqueue(job("a", 1)), Err(QueueError::Duplicate(JobId::from("a"))));
    }

    #[test]
    fn quiescent_queue_dispatches() {
        let mut s = Scheduler::new(config(127)).unwrap();
        s.enqueue(job("a", 4)).unwrap();
        // the submission itself happened during this cycle
        assert_eq!(s.run_cycle(Timestamp(5000)), DispatchDecision::Wait);
        match s.run_cycle(Timestamp(10_000)) {
            DispatchDecision::Dispatch(b) => assert_eq!(b.job_ids, vec![JobId::from("a")]),
            DispatchDecision::Wait => panic!("expected dispatch"),
        }
        let r = s.record(&JobId::from("a")).unwrap();
        assert_eq!(r.job.status, JobStatus::Scheduled);
        assert_eq!(r.dispatched_at, Some(Timestamp(10_000)));
    }

    #[test]
    fn keeps_waiting_while_arrivals_continue() {
        let mut s = Scheduler::new(config(127)).unwrap();
        for i in 0..5 {
            s.enqueue(job(&format!("j{i}"), 3)).unwrap();
            assert_eq!(s.run_cycle(Timestamp(i * 5000)), DispatchDecision::Wait);
        }
        assert_eq!(s.queue_len(), 5);
    }

    #[test]
    fn saturation_dispatches_despite_arrivals() {
        let mut s = Scheduler::new(config(10)).unwrap();
        s.enqueue(job("a", 4)).unwrap();
        s.enqueue(job("b", 6)).unwrap();
        let DispatchDecision::Dispatch(b) = s.run_cycle(Timestamp(1)) else {
            panic!("exact fill must dispatch");
        };
        assert_eq!(b.composed.circuit.num_qubits, 10);

        // a leftover that cannot fit also counts as saturated
        let mut s = Scheduler::new(config(7)).unwrap();
        for (id, w) in [("1", 4), ("2", 6), ("3", 2)] {
            s.enqueue(job(id, w)).unwrap();
        }
        let DispatchDecision::Dispatch(b) = s.run_cycle(Timestamp(1)) else {
            panic!("expected dispatch");
        };
        assert_eq!(b.job_ids, vec![JobId::from("1"), JobId::from("3")]);
        assert_eq!(s.queue_snapshot()[0].job_id, JobId::from("2"));
        assert_eq!(s.queue_snapshot()[0].position, 0);
    }

    #[test]
    fn execute_batch_on_simulator() {
        let mut s = Scheduler::new(config(12)).unwrap();
        for (id, w) in [("a", 2), ("b", 3), ("c", 1)] {
            s.enqueue(job(id, w)).unwrap();
        }
        s.run_cycle(Timestamp(0));
        let DispatchDecision::Dispatch(batch) = s.run_cycle(Timestamp(1)) else {
            panic!("expected dispatch");
        };
        let clock = ManualClock::new(Timestamp(7));
        let out = s
            .execute_batch(&batch, &StatevectorBackend::new(), Some(3), &clock)
            .unwrap();
        assert_eq!(out.len(), 3);
        for (id, res) in out {
            let counts = res.unwrap();
            assert_eq!(counts.total_shots(), 10_000);
            let r = s.record(&id).unwrap();
            assert_eq!(r.job.status, JobStatus::Done);
            assert_eq!(r.completed_at, Some(Timestamp(7)));
            // all-X circuits measure all ones
            assert_eq!(counts.get(&"1".repeat(counts.num_bits())), 10_000);
        }
    }

    struct Broken;

    impl Backend for Broken {
        fn descriptor(&self) -> BackendDescriptor {
            BackendDescriptor {
                name: "broken".into(),
                max_qubits: 1,
                noise: None,
                seedable: false,
            }
        }

        fn execute(&self, c: &Circuit, _: u64, _: Option<u64>) -> Result<CountsDistribution, BackendError> {
            Err(BackendError::CapacityExceeded {
                requested: c.num_qubits,
                max_qubits: 1,
            })
        }
    }

    #[test]
    fn backend_failure_fails_every_member() {
        let mut s = Scheduler::new(config(12)).unwrap();
        s.enqueue(job("a", 2)).unwrap();
        s.enqueue(job("b", 2)).unwrap();
        s.run_cycle(Timestamp(0));
        let DispatchDecision::Dispatch(batch) = s.run_cycle(Timestamp(1)) else {
            panic!()
        };
        let out = s.execute_batch(&batch, &Broken, None, &SystemClock).unwrap();
        let expected = BackendError::CapacityExceeded {
            requested: 4,
            max_qubits: 1,
        }
        .to_string();
        for (id, res) in out {
            assert_eq!(res.unwrap_err(), expected);
            let r = s.record(&id).unwrap();
            assert_eq!(r.job.status, JobStatus::Failed);
            assert_eq!(r.job.error.as_deref(), Some(expected.as_str()));
            assert!(r.result.is_none());
        }
    }

    #[test]
    fn single_job_batch_matches_direct_execution() {
        let bell = parse_qasm("qreg q[2]; creg c[2]; h q[0]; cx q[0],q[1]; measure q -> c;").unwrap();
        let mut s = Scheduler::new(config(12)).unwrap();
        s.enqueue(QuantumJob::new(JobId::from("bell"), bell.clone(), 10, Timestamp(0)))
            .unwrap();
        s.run_cycle(Timestamp(0));
        let DispatchDecision::Dispatch(batch) = s.run_cycle(Timestamp(1)) else {
            panic!()
        };
        let backend = StatevectorBackend::new();
        let out = s.execute_batch(&batch, &backend, Some(99), &SystemClock).unwrap();
        let direct = backend.execute(&bell, 10_000, Some(99)).unwrap();
        assert_eq!(out[0].1.as_ref().unwrap(), &direct);
    }

    #[test]
    fn illegal_transitions_are_refused() {
        let mut s = Scheduler::new(config(12)).unwrap();
        s.enqueue(job("a", 1)).unwrap();
        assert!(matches!(
            s.transition(&JobId::from("a"), JobStatus::Done),
            Err(QueueError::IllegalTransition { .. })
        ));
        assert!(s.mark_running(&BatchId::from("nope")).is_err());
        assert!(!JobStatus::Done.can_become(JobStatus::Queued));
        assert!(JobStatus::Running.can_become(JobStatus::Failed));
    }

    #[test]
    fn restore_requeues_unfinished_jobs() {
        let mut s = Scheduler::new(config(12)).unwrap();
        let mut scheduled = job("s", 2);
        scheduled.status = JobStatus::Scheduled;
        scheduled.batch_id = Some(BatchId::from("b"));
        let mut done = job("d", 2);
        done.status = JobStatus::Done;
        for j in [scheduled, job("q", 1), done] {
            s.restore(JobRecord {
                job: j,
                result: None,
                dispatched_at: None,
                completed_at: None,
            })
            .unwrap();
        }
        let ids: Vec<JobId> = s.queue_snapshot().into_iter().map(|e| e.job_id).collect();
        assert_eq!(ids, vec![JobId::from("s"), JobId::from("q")]);
        assert_eq!(s.record(&JobId::from("s")).unwrap().job.status, JobStatus::Queued);
        assert_eq!(s.pending_arrivals(), 0);
        assert!(s.forget(&JobId::from("d")));
        assert!(!s.forget(&JobId::from("q")));
    }

    #[test]
    fn config_validation() {
        assert!(Scheduler::new(config(0)).is_err());
        let c = SchedulerConfig {
            composed_shots: 0,
            ..SchedulerConfig::default()
        };
        assert!(c.validate().is_err());
        let json = serde_json::to_string(&SchedulerConfig::default()).unwrap();
        assert!(json.contains("\"cycle_duration\":5000"));
    }
}
