//! Multiprogramming for quantum processors.
//!
//! Circuits submitted by several users are queued, packed side by side into
//! one wider circuit per dispatch cycle, run once, and the measured
//! bitstrings are sliced back into one histogram per user.
//!
//! * [`circuit`]: gate-level IR, OpenQASM 2.0 and Quirk parsers.
//! * [`composer`]: first-fit packing with qubit/clbit offsetting.
//! * [`queue`]: job lifecycle, cycle-driven dispatch.
//! * [`unscheduler`]: per-job demultiplexing of composed results.
//! * [`backend`]: backend contract and the seeded statevector simulator.
//! * [`metrics`]: Hellinger and normalised Wasserstein distances.
//! * [`bench`]: scheduled-versus-individual comparison over a corpus.

pub mod backend;
pub mod bench;
pub mod circuit;
pub mod composer;
pub mod counts;
pub mod metrics;
pub mod queue;
pub mod unscheduler;

pub use backend::{Backend, BackendDescriptor, BackendError, NoiseConfig, StatevectorBackend};
pub use circuit::{parse_qasm, parse_quirk, serialize_qasm, Circuit, CircuitError, GateKind, Instruction};
pub use composer::{compose, offset_circuit, ComposedCircuit, Composition, Placement};
pub use counts::{CountsDistribution, Distribution, ProbabilityDistribution};
pub use metrics::{compare_runs, hellinger, wasserstein_normalized, DistanceReport};
pub use queue::{
    BatchId, Clock, DispatchDecision, JobId, JobRecord, JobStatus, QuantumJob, Scheduler, SchedulerConfig, Timestamp,
};
pub use unscheduler::{demux, slice_key};
