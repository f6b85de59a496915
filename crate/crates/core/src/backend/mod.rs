//! Circuit execution.
//!
//! [`Backend`] is the contract every execution target implements. The
//! bundled [`StatevectorBackend`] runs circuits on a dense statevector and
//! samples shots with a seeded ChaCha8 generator (see [`execute`] for the
//! stream layout). Adapters for real providers must return keys in this
//! crate's bit order (clbit 0 leftmost).

mod sampler;
mod statevector;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, CircuitError};
use crate::counts::CountsDistribution;

pub use sampler::{derive_seed, execute};
pub use statevector::{probabilities, single_qubit_matrix, statevector, Matrix2, Outcomes, StateVector};

/// Widest circuit the bundled simulator accepts.
pub const SIMULATOR_MAX_QUBITS: usize = 24;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("circuit needs {requested} qubits but the backend supports at most {max_qubits}")]
    CapacityExceeded { requested: usize, max_qubits: usize },
    #[error("shot count must be at least 1")]
    InvalidShots,
    #[error("circuit has no measurements")]
    NoMeasurements,
    #[error("qubit {qubit} is used by instruction {position} after being measured")]
    MidCircuitMeasurement { qubit: usize, position: usize },
    #[error("invalid noise configuration: {0}")]
    InvalidNoise(String),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("backend failure: {0}")]
    Other(String),
}

/// Per-gate depolarizing and per-bit readout error rates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub depolarizing_prob: f64,
    pub readout_flip_prob: f64,
}

impl NoiseConfig {
    pub fn new(depolarizing_prob: f64, readout_flip_prob: f64) -> Result<Self, BackendError> {
        let n = NoiseConfig {
            depolarizing_prob,
            readout_flip_prob,
        };
        n.validate()?;
        Ok(n)
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        for (name, p) in [
            ("depolarizing_prob", self.depolarizing_prob),
            ("readout_flip_prob", self.readout_flip_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(BackendError::InvalidNoise(format!("{name} = {p} is outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.depolarizing_prob == 0.0 && self.readout_flip_prob == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub name: String,
    pub max_qubits: usize,
    pub noise: Option<NoiseConfig>,
    pub seedable: bool,
}

pub trait Backend: Send + Sync {
    fn descriptor(&self) -> BackendDescriptor;

    fn execute(&self, circuit: &Circuit, shots: u64, seed: Option<u64>) -> Result<CountsDistribution, BackendError>;
}

/// Local statevector simulator, optionally with stochastic Pauli noise.
#[derive(Debug, Clone)]
pub struct StatevectorBackend {
    name: String,
    max_qubits: usize,
    noise: Option<NoiseConfig>,
}

impl Default for StatevectorBackend {
    fn default() -> Self {
        StatevectorBackend {
            name: "statevector".to_string(),
            max_qubits: SIMULATOR_MAX_QUBITS,
            noise: None,
        }
    }
}

impl StatevectorBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_noise(mut self, noise: NoiseConfig) -> Self {
        self.noise = Some(noise);
        self
    }

    pub fn with_max_qubits(mut self, max_qubits: usize) -> Self {
        self.max_qubits = max_qubits.clamp(1, SIMULATOR_MAX_QUBITS);
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

impl Backend for StatevectorBackend {
    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor {
            name: self.name.clone(),
            max_qubits: self.max_qubits,
            noise: self.noise,
            seedable: true,
        }
    }

    fn execute(&self, circuit: &Circuit, shots: u64, seed: Option<u64>) -> Result<CountsDistribution, BackendError> {
        if circuit.num_qubits > self.max_qubits {
            return Err(BackendError::CapacityExceeded {
                requested: circuit.num_qubits,
                max_qubits: self.max_qubits,
            });
        }
        execute(circuit, shots, seed, self.noise.as_ref())
    }
}
