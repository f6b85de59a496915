//! Gate-level circuit representation shared by every stage of the pipeline.
//!
//! A [`Circuit`] is an ordered list of [`Instruction`]s over `num_qubits`
//! qubits and `num_clbits` classical bits. Circuits are built either through
//! [`Circuit::new`] + [`Circuit::push`], or parsed from OpenQASM 2.0
//! ([`parse_qasm`]) or a Quirk share link ([`parse_quirk`]). Every parser ends
//! with [`Circuit::validate`], so any `Circuit` handed out by this module
//! satisfies the index, arity and measurement invariants.

mod qasm;
mod quirk;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use qasm::{parse_qasm, serialize_qasm};
pub use quirk::parse_quirk;

/// Supported gate kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    H,
    X,
    Y,
    Z,
    S,
    Sdg,
    T,
    Tdg,
    Rx,
    Ry,
    Rz,
    Cx,
    Cz,
    Swap,
    Ccx,
    Measure,
    Barrier,
}

impl GateKind {
    pub const ALL: [GateKind; 17] = [
        GateKind::H,
        GateKind::X,
        GateKind::Y,
        GateKind::Z,
        GateKind::S,
        GateKind::Sdg,
        GateKind::T,
        GateKind::Tdg,
        GateKind::Rx,
        GateKind::Ry,
        GateKind::Rz,
        GateKind::Cx,
        GateKind::Cz,
        GateKind::Swap,
        GateKind::Ccx,
        GateKind::Measure,
        GateKind::Barrier,
    ];

    /// Number of qubit operands, `None` for the variadic barrier.
    pub fn arity(self) -> Option<usize> {
        match self {
            GateKind::Cx | GateKind::Cz | GateKind::Swap => Some(2),
            GateKind::Ccx => Some(3),
            GateKind::Barrier => None,
            _ => Some(1),
        }
    }

    pub fn param_count(self) -> usize {
        match self {
            GateKind::Rx | GateKind::Ry | GateKind::Rz => 1,
            _ => 0,
        }
    }

    /// Lowercase OpenQASM mnemonic.
    pub fn qasm_name(self) -> &'static str {
        match self {
            GateKind::H => "h",
            GateKind::X => "x",
            GateKind::Y => "y",
            GateKind::Z => "z",
            GateKind::S => "s",
            GateKind::Sdg => "sdg",
            GateKind::T => "t",
            GateKind::Tdg => "tdg",
            GateKind::Rx => "rx",
            GateKind::Ry => "ry",
            GateKind::Rz => "rz",
            GateKind::Cx => "cx",
            GateKind::Cz => "cz",
            GateKind::Swap => "swap",
            GateKind::Ccx => "ccx",
            GateKind::Measure => "measure",
            GateKind::Barrier => "barrier",
        }
    }

    pub fn from_qasm_name(name: &str) -> Option<GateKind> {
        GateKind::ALL.into_iter().find(|k| k.qasm_name() == name)
    }

    /// True for the gates that act unitarily on the state.
    pub fn is_unitary(self) -> bool {
        !matches!(self, GateKind::Measure | GateKind::Barrier)
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.qasm_name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instruction {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clbit: Option<usize>,
}

impl Instruction {
    pub fn gate(kind: GateKind, qubits: impl Into<Vec<usize>>) -> Self {
        Instruction {
            kind,
            qubits: qubits.into(),
            params: Vec::new(),
            clbit: None,
        }
    }

    pub fn rotation(kind: GateKind, qubit: usize, angle: f64) -> Self {
        Instruction {
            kind,
            qubits: vec![qubit],
            params: vec![angle],
            clbit: None,
        }
    }

    pub fn measure(qubit: usize, clbit: usize) -> Self {
        Instruction {
            kind: GateKind::Measure,
            qubits: vec![qubit],
            params: Vec::new(),
            clbit: Some(clbit),
        }
    }

    /// Checks the per-instruction invariants (arity, parameters, operand
    /// uniqueness, clbit presence). Range checks need the owning circuit.
    pub fn check_shape(&self) -> Result<(), CircuitError> {
        match self.kind.arity() {
            Some(n) if self.qubits.len() != n => {
                return Err(CircuitError::Arity {
                    gate: self.kind,
                    expected: n,
                    found: self.qubits.len(),
                })
            }
            None if self.qubits.is_empty() => {
                return Err(CircuitError::Arity {
                    gate: self.kind,
                    expected: 1,
                    found: 0,
                })
            }
            _ => {}
        }
        if self.params.len() != self.kind.param_count() {
            return Err(CircuitError::ParamCount {
                gate: self.kind,
                expected: self.kind.param_count(),
                found: self.params.len(),
            });
        }
        for (i, q) in self.qubits.iter().enumerate() {
            if self.qubits[..i].contains(q) {
                return Err(CircuitError::DuplicateQubit {
                    gate: self.kind,
                    qubit: *q,
                });
            }
        }
        if (self.kind == GateKind::Measure) != self.clbit.is_some() {
            return Err(CircuitError::ClbitUsage { gate: self.kind });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub name: String,
    pub num_qubits: usize,
    pub num_clbits: usize,
    pub instructions: Vec<Instruction>,
}

impl Circuit {
    pub fn new(name: impl Into<String>, num_qubits: usize, num_clbits: usize) -> Self {
        Circuit {
            name: name.into(),
            num_qubits,
            num_clbits,
            instructions: Vec::new(),
        }
    }

    pub fn push(&mut self, instruction: Instruction) -> &mut Self {
        self.instructions.push(instruction);
        self
    }

    pub fn with(mut self, instruction: Instruction) -> Self {
        self.instructions.push(instruction);
        self
    }

    /// Enforces every structural invariant of the IR.
    pub fn validate(&self) -> Result<(), CircuitError> {
        if self.num_qubits == 0 {
            return Err(CircuitError::NoQubits);
        }
        let mut measured = vec![false; self.num_clbits];
        for (position, inst) in self.instructions.iter().enumerate() {
            inst.check_shape()?;
            if let Some(&q) = inst.qubits.iter().find(|&&q| q >= self.num_qubits) {
                return Err(CircuitError::QubitOutOfRange {
                    index: q,
                    num_qubits: self.num_qubits,
                });
            }
            if let Some(c) = inst.clbit {
                if c >= self.num_clbits {
                    return Err(CircuitError::ClbitOutOfRange {
                        index: c,
                        num_clbits: self.num_clbits,
                    });
                }
                if std::mem::replace(&mut measured[c], true) {
                    return Err(CircuitError::DuplicateMeasureTarget {
                        clbit: c,
                        position,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.num_qubits
    }

    /// Longest dependency chain. Instructions sharing a qubit are ordered;
    /// a barrier aligns its qubits without adding a layer; measurements
    /// count as a layer.
    pub fn depth(&self) -> usize {
        let mut level = vec![0usize; self.num_qubits];
        for inst in &self.instructions {
            let front = inst.qubits.iter().map(|&q| level[q]).max().unwrap_or(0);
            let next = if inst.kind == GateKind::Barrier {
                front
            } else {
                front + 1
            };
            for &q in &inst.qubits {
                level[q] = next;
            }
        }
        level.into_iter().max().unwrap_or(0)
    }

    pub fn has_measurements(&self) -> bool {
        self.instructions
            .iter()
            .any(|inst| inst.kind == GateKind::Measure)
    }

    /// `(qubit, clbit)` pairs in instruction order.
    pub fn measurement_map(&self) -> Vec<(usize, usize)> {
        self.instructions
            .iter()
            .filter(|inst| inst.kind == GateKind::Measure)
            .filter_map(|inst| inst.clbit.map(|c| (inst.qubits[0], c)))
            .collect()
    }

    /// Returns the circuit with every qubit measured into the clbit of the
    /// same index when it contains no measurement at all; otherwise returns
    /// it unchanged.
    pub fn ensure_measurements(mut self) -> Circuit {
        if self.has_measurements() {
            return self;
        }
        self.num_clbits = self.num_clbits.max(self.num_qubits);
        for q in 0..self.num_qubits {
            self.instructions.push(Instruction::measure(q, q));
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CircuitError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported gate `{name}` at line {line}, column {column}")]
    UnsupportedGate { name: String, line: usize, column: usize },
    #[error("unsupported Quirk cell {0}")]
    UnsupportedCell(String),
    #[error("unsupported Quirk column layout in column {column}: {reason}")]
    UnsupportedLayout { column: usize, reason: String },
    #[error("qubit index {index} out of range for {num_qubits} qubits")]
    QubitOutOfRange { index: usize, num_qubits: usize },
    #[error("classical bit index {index} out of range for {num_clbits} bits")]
    ClbitOutOfRange { index: usize, num_clbits: usize },
    #[error("register `{name}` is not declared")]
    UnknownRegister { name: String },
    #[error("{gate} expects {expected} qubit operand(s), got {found}")]
    Arity {
        gate: GateKind,
        expected: usize,
        found: usize,
    },
    #[error("{gate} expects {expected} parameter(s), got {found}")]
    ParamCount {
        gate: GateKind,
        expected: usize,
        found: usize,
    },
    #[error("{gate} uses qubit {qubit} more than once")]
    DuplicateQubit { gate: GateKind, qubit: usize },
    #[error("{gate}: a classical bit target is required for measure and forbidden otherwise")]
    ClbitUsage { gate: GateKind },
    #[error("classical bit {clbit} is measured twice (instruction {position})")]
    DuplicateMeasureTarget { clbit: usize, position: usize },
    #[error("circuit has no qubits")]
    NoQubits,
}

impl CircuitError {
    /// Line/column for errors tied to a spot in the source text.
    pub fn position(&self) -> Option<(usize, usize)> {
        match self {
            CircuitError::Syntax { line, column, .. } | CircuitError::UnsupportedGate { line, column, .. } => {
                Some((*line, *column))
            }
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bell() -> Circuit {
        Circuit::new("bell", 2, 2)
            .with(Instruction::gate(GateKind::H, [0]))
            .with(Instruction::gate(GateKind::Cx, [0, 1]))
            .with(Instruction::measure(0, 0))
            .with(Instruction::measure(1, 1))
    }

    #[test]
    fn bell_depth_is_three() {
        let c = bell();
        c.validate().unwrap();
        assert_eq!(c.depth(), 3);
        assert_eq!(c.width(), 2);
    }

    #[test]
    fn empty_circuit_has_zero_depth() {
        assert_eq!(Circuit::new("e", 3, 0).depth(), 0);
    }

    #[test]
    fn barrier_aligns_without_adding_layer() {
        let c = Circuit::new("b", 2, 0)
            .with(Instruction::gate(GateKind::H, [0]))
            .with(Instruction::gate(GateKind::H, [0]))
            .with(Instruction::gate(GateKind::Barrier, [0, 1]))
            .with(Instruction::gate(GateKind::X, [1]));
        assert_eq!(c.depth(), 3);
    }

    #[test]
    fn rejects_duplicate_operands() {
        let c = Circuit::new("d", 2, 0).with(Instruction::gate(GateKind::Cx, [0, 0]));
        assert!(matches!(
            c.validate(),
            Err(CircuitError::DuplicateQubit { qubit: 0, .. })
        ));
    }

    #[test]
    fn rejects_out_of_range_and_double_measure() {
        let c = Circuit::new("r", 1, 1).with(Instruction::gate(GateKind::X, [1]));
        assert!(matches!(c.validate(), Err(CircuitError::QubitOutOfRange { .. })));
        let c = Circuit::new("m", 2, 1)
            .with(Instruction::measure(0, 0))
            .with(Instruction::measure(1, 0));
        assert!(matches!(
            c.validate(),
            Err(CircuitError::DuplicateMeasureTarget { clbit: 0, .. })
        ));
        let c = Circuit::new("m", 1, 1).with(Instruction::measure(0, 1));
        assert!(matches!(c.validate(), Err(CircuitError::ClbitOutOfRange { .. })));
    }

    #[test]
    fn rejects_bad_shapes() {
        let mut rx = Instruction::gate(GateKind::Rx, [0]);
        assert!(matches!(rx.check_shape(), Err(CircuitError::ParamCount { .. })));
        rx.params.push(1.0);
        rx.check_shape().unwrap();
        let mut h = Instruction::gate(GateKind::H, [0]);
        h.clbit = Some(0);
        assert!(matches!(h.check_shape(), Err(CircuitError::ClbitUsage { .. })));
        assert!(Instruction::gate(GateKind::Barrier, Vec::new()).check_shape().is_err());
        assert!(Instruction::gate(GateKind::Ccx, [0, 1]).check_shape().is_err());
    }

    #[test]
    fn ensure_measurements_appends_measure_all_once() {
        let c = Circuit::new("ghz", 3, 0)
            .with(Instruction::gate(GateKind::H, [0]))
            .with(Instruction::gate(GateKind::Cx, [0, 1]))
            .with(Instruction::gate(GateKind::Cx, [1, 2]));
        let once = c.ensure_measurements();
        assert_eq!(once.num_clbits, 3);
        assert_eq!(once.measurement_map(), vec![(0, 0), (1, 1), (2, 2)]);
        once.validate().unwrap();
        let twice = once.clone().ensure_measurements();
        assert_eq!(once, twice);
        assert_eq!(bell().ensure_measurements(), bell());
    }
}
