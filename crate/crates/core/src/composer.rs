//! Packs several circuits side by side into one wider circuit.
//!
//! Each selected circuit keeps its own gates; only its qubit and clbit
//! indices move into a private window. The windows are recorded as
//! [`Placement`]s so the combined measurement results can later be split
//! back per job (see [`crate::unscheduler`]).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, Instruction};
use crate::queue::{BatchId, JobId, QuantumJob};

/// Window of one job inside a composed circuit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub job_id: JobId,
    pub qubit_offset: usize,
    pub qubit_count: usize,
    pub clbit_offset: usize,
    pub clbit_count: usize,
}

impl Placement {
    pub fn qubit_range(&self) -> std::ops::Range<usize> {
        self.qubit_offset..self.qubit_offset + self.qubit_count
    }

    pub fn clbit_range(&self) -> std::ops::Range<usize> {
        self.clbit_offset..self.clbit_offset + self.clbit_count
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComposedCircuit {
    pub circuit: Circuit,
    pub placements: Vec<Placement>,
    pub batch_id: BatchId,
}

/// Result of one first-fit pass over a queue.
#[derive(Debug, Clone, PartialEq)]
pub struct Composition {
    pub composed: ComposedCircuit,
    pub selected: Vec<JobId>,
    pub skipped: Vec<JobId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ComposeError {
    #[error("no queued circuit fits in the available {capacity} qubits")]
    EmptyBatch { capacity: usize },
}

/// Anything that can be placed into a batch.
pub trait Composable {
    fn job_id(&self) -> &JobId;
    fn circuit(&self) -> &Circuit;
}

impl Composable for QuantumJob {
    fn job_id(&self) -> &JobId {
        &self.job_id
    }

    fn circuit(&self) -> &Circuit {
        &self.circuit
    }
}

impl Composable for (JobId, Circuit) {
    fn job_id(&self) -> &JobId {
        &self.0
    }

    fn circuit(&self) -> &Circuit {
        &self.1
    }
}

impl<T: Composable> Composable for &T {
    fn job_id(&self) -> &JobId {
        (*self).job_id()
    }

    fn circuit(&self) -> &Circuit {
        (*self).circuit()
    }
}

/// Shifts every qubit index by `qubit_offset` and every clbit index by
/// `clbit_offset`. Order and parameters are untouched.
pub fn offset_circuit(circuit: &Circuit, qubit_offset: usize, clbit_offset: usize) -> Vec<Instruction> {
    circuit
        .instructions
        .iter()
        .map(|inst| Instruction {
            kind: inst.kind,
            qubits: inst.qubits.iter().map(|q| q + qubit_offset).collect(),
            params: inst.params.clone(),
            clbit: inst.clbit.map(|c| c + clbit_offset),
        })
        .collect()
}

/// Scans `jobs` once in order and takes every job whose width still fits in
/// the remaining capacity. Circuits without measurements are measured in
/// full before placement.
pub fn compose<J: Composable>(jobs: &[J], capacity: usize) -> Result<Composition, ComposeError> {
    compose_with_id(jobs, capacity, BatchId::random())
}

pub fn compose_with_id<J: Composable>(
    jobs: &[J],
    capacity: usize,
    batch_id: BatchId,
) -> Result<Composition, ComposeError> {
    let mut remaining = capacity;
    let mut selected = Vec::new();
    let mut skipped = Vec::new();
    let mut placements = Vec::new();
    let mut instructions = Vec::new();
    let (mut qubit_offset, mut clbit_offset) = (0usize, 0usize);

    for job in jobs {
        let width = job.circuit().num_qubits;
        if width > remaining {
            skipped.push(job.job_id().clone());
            continue;
        }
        let circuit = job.circuit().clone().ensure_measurements();
        instructions.extend(offset_circuit(&circuit, qubit_offset, clbit_offset));
        placements.push(Placement {
            job_id: job.job_id().clone(),
            qubit_offset,
            qubit_count: width,
            clbit_offset,
            clbit_count: circuit.num_clbits,
        });
        qubit_offset += width;
        clbit_offset += circuit.num_clbits;
        remaining -= width;
        selected.push(job.job_id().clone());
    }

    if selected.is_empty() {
        return Err(ComposeError::EmptyBatch { capacity });
    }
    let circuit = Circuit {
        name: format!("batch-{batch_id}"),
        num_qubits: qubit_offset,
        num_clbits: clbit_offset,
        instructions,
    };
    Ok(Composition {
        composed: ComposedCircuit {
            circuit,
            placements,
            batch_id,
        },
        selected,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::GateKind;
    use proptest::prelude::*;

    fn chain(name: &str, width: usize) -> Circuit {
        let mut c = Circuit::new(name, width, 0);
        c.push(Instruction::gate(GateKind::H, [0]));
        for q in 1..width {
            c.push(Instruction::gate(GateKind::Cx, [q - 1, q]));
        }
        c.ensure_measurements()
    }

    fn jobs(widths: &[usize]) -> Vec<(JobId, Circuit)> {
        widths
            .iter()
            .enumerate()
            .map(|(i, &w)| (JobId::from(format!("job{}", i + 1)), chain("w", w)))
            .collect()
    }

    #[test]
    fn offsets_match_case_study() {
        let simon = chain("simon", 6);
        let shifted = offset_circuit(&simon, 4, 4);
        let touched: Vec<usize> = shifted.iter().flat_map(|i| i.qubits.clone()).collect();
        assert_eq!(touched.iter().min(), Some(&4));
        assert_eq!(touched.iter().max(), Some(&9));
        let tsp = chain("tsp", 3);
        let shifted = offset_circuit(&tsp, 10, 10);
        let touched: Vec<usize> = shifted.iter().flat_map(|i| i.qubits.clone()).collect();
        assert_eq!((touched.iter().min(), touched.iter().max()), (Some(&10), Some(&12)));
        assert_eq!(offset_circuit(&simon, 0, 0), simon.instructions);
    }

    #[test]
    fn packs_4_6_3_on_127() {
        let c = compose(&jobs(&[4, 6, 3]), 127).unwrap();
        let offsets: Vec<usize> = c.composed.placements.iter().map(|p| p.qubit_offset).collect();
        assert_eq!(offsets, vec![0, 4, 10]);
        assert_eq!(c.composed.circuit.num_qubits, 13);
        assert_eq!(c.composed.circuit.num_clbits, 13);
        assert!(c.skipped.is_empty());
        c.composed.circuit.validate().unwrap();
    }

    #[test]
    fn skips_too_wide_job() {
        let c = compose(&jobs(&[4, 6, 3]), 7).unwrap();
        assert_eq!(c.selected, vec![JobId::from("job1"), JobId::from("job3")]);
        assert_eq!(c.skipped, vec![JobId::from("job2")]);
        let offsets: Vec<usize> = c.composed.placements.iter().map(|p| p.qubit_offset).collect();
        assert_eq!(offsets, vec![0, 4]);
    }

    #[test]
    fn exact_fit_and_empty_batch() {
        let c = compose(&jobs(&[5]), 5).unwrap();
        assert_eq!(c.composed.placements[0].qubit_offset, 0);
        assert_eq!(
            compose(&jobs(&[6]), 5).unwrap_err(),
            ComposeError::EmptyBatch { capacity: 5 }
        );
        assert!(compose::<(JobId, Circuit)>(&[], 5).is_err());
    }

    #[test]
    fn partial_measurement_keeps_declared_clbits() {
        let c = Circuit::new("one", 3, 1)
            .with(Instruction::gate(GateKind::X, [2]))
            .with(Instruction::measure(2, 0));
        let comp = compose(&[(JobId::from("a"), c), (JobId::from("b"), chain("b", 2))], 10).unwrap();
        let p = &comp.composed.placements;
        assert_eq!((p[0].clbit_offset, p[0].clbit_count), (0, 1));
        assert_eq!((p[1].clbit_offset, p[1].clbit_count), (1, 2));
        assert_eq!(p[1].qubit_offset, 3);
        comp.composed.circuit.validate().unwrap();
    }

    proptest! {
        #[test]
        fn placements_tile_and_respect_capacity(
            widths in proptest::collection::vec(1usize..10, 1..20),
            capacity in 1usize..40,
        ) {
            let js = jobs(&widths);
            match compose(&js, capacity) {
                Ok(c) => {
                    let p = &c.composed.placements;
                    let total: usize = p.iter().map(|p| p.qubit_count).sum();
                    prop_assert!(total <= capacity);
                    prop_assert_eq!(total, c.composed.circuit.num_qubits);
                    let mut q = 0;
                    let mut b = 0;
                    for pl in p {
                        prop_assert_eq!(pl.qubit_offset, q);
                        prop_assert_eq!(pl.clbit_offset, b);
                        q += pl.qubit_count;
                        b += pl.clbit_count;
                    }
                    prop_assert_eq!(b, c.composed.circuit.num_clbits);
                    // order-stable: selected ids are a subsequence of the input
                    let order: Vec<&JobId> = js.iter().map(|(id, _)| id).collect();
                    let mut it = order.iter();
                    for id in &c.selected {
                        prop_assert!(it.any(|o| *o == id));
                    }
                    prop_assert_eq!(c.selected.len() + c.skipped.len(), js.len());
                    // a skipped job never fits in what was left over
                    let left = capacity - total;
                    for id in &c.skipped {
                        let w = js.iter().find(|(j, _)| j == id).unwrap().1.num_qubits;
                        prop_assert!(w > left);
                    }
                    c.composed.circuit.validate().unwrap();
                }
                Err(ComposeError::EmptyBatch { .. }) => {
                    prop_assert!(widths.iter().all(|&w| w > capacity));
                }
            }
        }
    }
}
