use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use super::BackendError;
use crate::circuit::{Circuit, GateKind, Instruction};
use crate::counts::ProbabilityDistribution;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Row-major 2x2 unitary.
pub type Matrix2 = [[Complex64; 2]; 2];

/// Dense state of `num_qubits` qubits. Bit `i` of a basis index is qubit `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
}

pub fn single_qubit_matrix(kind: GateKind, params: &[f64]) -> Option<Matrix2> {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let m = match kind {
        GateKind::H => [[h, h], [h, -h]],
        GateKind::X => [[ZERO, ONE], [ONE, ZERO]],
        GateKind::Y => [[ZERO, -I], [I, ZERO]],
        GateKind::Z => [[ONE, ZERO], [ZERO, -ONE]],
        GateKind::S => [[ONE, ZERO], [ZERO, I]],
        GateKind::Sdg => [[ONE, ZERO], [ZERO, -I]],
        GateKind::T => [[ONE, ZERO], [ZERO, Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4)]],
        GateKind::Tdg => [[ONE, ZERO], [ZERO, Complex64::from_polar(1.0, -std::f64::consts::FRAC_PI_4)]],
        GateKind::Rx => {
            let (s, c) = (params[0] / 2.0).sin_cos();
            [[Complex64::new(c, 0.0), Complex64::new(0.0, -s)], [Complex64::new(0.0, -s), Complex64::new(c, 0.0)]]
        }
        GateKind::Ry => {
            let (s, c) = (params[0] / 2.0).sin_cos();
            [[Complex64::new(c, 0.0), Complex64::new(-s, 0.0)], [Complex64::new(s, 0.0), Complex64::new(c, 0.0)]]
        }
        GateKind::Rz => {
            let half = params[0] / 2.0;
            [[Complex64::from_polar(1.0, -half), ZERO], [ZERO, Complex64::from_polar(1.0, half)]]
        }
        _ => return None,
    };
    Some(m)
}

impl StateVector {
    /// `|0…0⟩`.
    pub fn zero(num_qubits: usize) -> Self {
        let mut amplitudes = vec![ZERO; 1 << num_qubits];
        amplitudes[0] = ONE;
        StateVector {
            num_qubits,
            amplitudes,
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(Complex64::norm_sqr).sum()
    }

    pub fn apply_matrix(&mut self, qubit: usize, m: &Matrix2) {
        let bit = 1usize << qubit;
        for i0 in 0..self.amplitudes.len() {
            if i0 & bit != 0 {
                continue;
            }
            let i1 = i0 | bit;
            let (a0, a1) = (self.amplitudes[i0], self.amplitudes[i1]);
            self.amplitudes[i0] = m[0][0] * a0 + m[0][1] * a1;
            self.amplitudes[i1] = m[1][0] * a0 + m[1][1] * a1;
        }
    }

    /// Swaps amplitude pairs `(i, i ^ flip)` for every `i` with all
    /// `require` bits set and the `flip` bits equal to `from`.
    fn swap_where(&mut self, require: usize, flip: usize, from: usize) {
        for i in 0..self.amplitudes.len() {
            if i & require == require && i & flip == from {
                self.amplitudes.swap(i, i ^ flip);
            }
        }
    }

    pub fn apply(&mut self, inst: &Instruction) {
        let q = &inst.qubits;
        match inst.kind {
            GateKind::Cx => self.swap_where(1 << q[0], 1 << q[1], 0),
            GateKind::Ccx => self.swap_where((1 << q[0]) | (1 << q[1]), 1 << q[2], 0),
            GateKind::Swap => self.swap_where(0, (1 << q[0]) | (1 << q[1]), 1 << q[0]),
            GateKind::Cz => {
                let mask = (1 << q[0]) | (1 << q[1]);
                for (i, a) in self.amplitudes.iter_mut().enumerate() {
                    if i & mask == mask {
                        *a = -*a;
                    }
                }
            }
            GateKind::Measure | GateKind::Barrier => {}
            kind => {
                let m = single_qubit_matrix(kind, &inst.params).expect("single-qubit gate");
                self.apply_matrix(q[0], &m);
            }
        }
    }

    /// Outcome weights for the given `(qubit, clbit)` map, in ascending
    /// order of the clbit strings they stand for, with probabilities below
    /// 1e-15 dropped. Use [`Outcomes::key`] to turn an index into its string.
    pub fn outcomes(&self, measurements: &[(usize, usize)], num_clbits: usize) -> Outcomes {
        // Comparing clbit strings left to right is comparing the measured
        // qubits in order of the first clbit each one writes.
        let mut first: Vec<(usize, usize)> = Vec::new();
        for &(q, c) in measurements {
            match first.iter_mut().find(|(fq, _)| *fq == q) {
                Some(e) => e.1 = e.1.min(c),
                None => first.push((q, c)),
            }
        }
        first.sort_by_key(|&(_, c)| c);
        let order: Vec<usize> = first.into_iter().map(|(q, _)| q).collect();
        let k = order.len();
        let mut dense = vec![0.0; 1 << k];
        for (i, a) in self.amplitudes.iter().enumerate() {
            let p = a.norm_sqr();
            if p > 0.0 {
                let idx = order.iter().fold(0usize, |acc, &q| acc << 1 | (i >> q & 1));
                dense[idx] += p;
            }
        }
        let weights = dense
            .into_iter()
            .enumerate()
            .filter(|&(_, p)| p >= 1e-15)
            .collect();
        Outcomes {
            order,
            measurements: measurements.to_vec(),
            num_clbits,
            weights,
        }
    }

    /// Distribution of classical bits for the given `(qubit, clbit)` map.
    /// Unmeasured clbits read `0`.
    pub fn clbit_probabilities(&self, measurements: &[(usize, usize)], num_clbits: usize) -> ProbabilityDistribution {
        let outcomes = self.outcomes(measurements, num_clbits);
        ProbabilityDistribution {
            num_bits: num_clbits,
            probs: outcomes.weights.iter().map(|&(idx, p)| (outcomes.key(idx), p)).collect(),
        }
    }
}

/// Non-negligible measurement outcomes of a state, sorted by clbit string.
#[derive(Debug, Clone)]
pub struct Outcomes {
    order: Vec<usize>,
    measurements: Vec<(usize, usize)>,
    num_clbits: usize,
    /// `(outcome index, probability)`, ascending by index.
    pub weights: Vec<(usize, f64)>,
}

impl Outcomes {
    /// The clbit string for an outcome index.
    pub fn key(&self, idx: usize) -> String {
        let k = self.order.len();
        let mut key = vec![b'0'; self.num_clbits];
        for &(q, c) in &self.measurements {
            let rank = self.order.iter().position(|&o| o == q).expect("measured qubit");
            if idx >> (k - 1 - rank) & 1 == 1 {
                key[c] = b'1';
            }
        }
        String::from_utf8(key).expect("ascii")
    }
}

/// Rejects gates acting on a qubit after it has been measured.
pub(crate) fn check_terminal_measurements(circuit: &Circuit) -> Result<(), BackendError> {
    let mut measured = vec![false; circuit.num_qubits];
    for (position, inst) in circuit.instructions.iter().enumerate() {
        match inst.kind {
            GateKind::Measure => measured[inst.qubits[0]] = true,
            GateKind::Barrier => {}
            _ => {
                if let Some(&q) = inst.qubits.iter().find(|&&q| measured[q]) {
                    return Err(BackendError::MidCircuitMeasurement { qubit: q, position });
                }
            }
        }
    }
    Ok(())
}

/// Final state of `circuit` applied to `|0…0⟩`; measurements are ignored.
pub fn statevector(circuit: &Circuit, max_qubits: usize) -> Result<StateVector, BackendError> {
    if circuit.num_qubits > max_qubits {
        return Err(BackendError::CapacityExceeded {
            requested: circuit.num_qubits,
            max_qubits,
        });
    }
    circuit.validate()?;
    let mut state = StateVector::zero(circuit.num_qubits);
    for inst in &circuit.instructions {
        state.apply(inst);
    }
    Ok(state)
}

/// Exact distribution of the measured classical bits.
pub fn probabilities(circuit: &Circuit, max_qubits: usize) -> Result<ProbabilityDistribution, BackendError> {
    check_terminal_measurements(circuit)?;
    let measurements = circuit.measurement_map();
    if measurements.is_empty() {
        return Err(BackendError::NoMeasurements);
    }
    let state = statevector(circuit, max_qubits)?;
    Ok(state.clbit_probabilities(&measurements, circuit.num_clbits))
}

/// Like [`probabilities`], without building a string per outcome.
pub(crate) fn outcomes(circuit: &Circuit, max_qubits: usize) -> Result<Outcomes, BackendError> {
    check_terminal_measurements(circuit)?;
    let measurements = circuit.measurement_map();
    if measurements.is_empty() {
        return Err(BackendError::NoMeasurements);
    }
    let state = statevector(circuit, max_qubits)?;
    Ok(state.outcomes(&measurements, circuit.num_clbits))
}
