//! Shot sampling.
//!
//! Generator: ChaCha8 (`rand_chacha`) seeded with `seed_from_u64(seed)`.
//!
//! * Noiseless runs use stream 0: one 64-bit draw per shot, mapped to a
//!   uniform in `[0, 1)` from its top 53 bits, then inverted through the
//!   cumulative distribution of outcomes sorted by key.
//! * Noisy runs give shot `s` its own stream `s + 1`, so shots are
//!   independent of each other and of the shot count. Within a shot, each
//!   connected block of qubits is simulated separately (noise is local, so
//!   blocks stay independent): for every unitary gate and every qubit it
//!   touches, one uniform decides whether a Pauli error occurs and a second
//!   draw picks X, Y or Z; one uniform then samples the block's basis state;
//!   finally one uniform per measured bit decides a readout flip.
//!
//! A noise configuration with both rates at zero takes the noiseless path.

use std::collections::{BTreeMap, HashMap};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::statevector::{check_terminal_measurements, outcomes, StateVector};
use super::{BackendError, NoiseConfig, SIMULATOR_MAX_QUBITS};
use crate::circuit::{Circuit, GateKind, Instruction};
use crate::counts::CountsDistribution;

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Mixes `(seed, domain, index)` into an independent 64-bit seed
/// (SplitMix64 finaliser).
pub fn derive_seed(seed: u64, domain: u64, index: u64) -> u64 {
    let mut z = seed
        ^ domain.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ index.wrapping_add(1).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `shots` repetitions of `circuit` and returns the histogram of its
/// classical bits. Identical arguments give identical counts.
pub fn execute(
    circuit: &Circuit,
    shots: u64,
    seed: Option<u64>,
    noise: Option<&NoiseConfig>,
) -> Result<CountsDistribution, BackendError> {
    if shots == 0 {
        return Err(BackendError::InvalidShots);
    }
    if circuit.num_qubits > SIMULATOR_MAX_QUBITS {
        return Err(BackendError::CapacityExceeded {
            requested: circuit.num_qubits,
            max_qubits: SIMULATOR_MAX_QUBITS,
        });
    }
    circuit.validate()?;
    check_terminal_measurements(circuit)?;
    if !circuit.has_measurements() {
        return Err(BackendError::NoMeasurements);
    }
    let seed = seed.unwrap_or_else(|| uuid::Uuid::new_v4().as_u64_pair().0);
    match noise {
        Some(n) => {
            n.validate()?;
            if n.is_noiseless() {
                sample_ideal(circuit, shots, seed)
            } else {
                sample_noisy(circuit, shots, seed, n)
            }
        }
        None => sample_ideal(circuit, shots, seed),
    }
}

fn sample_ideal(circuit: &Circuit, shots: u64, seed: u64) -> Result<CountsDistribution, BackendError> {
    let outcomes = outcomes(circuit, SIMULATOR_MAX_QUBITS)?;
    let mut cdf = Vec::with_capacity(outcomes.weights.len());
    let mut acc = 0.0;
    for &(_, p) in &outcomes.weights {
        acc += p;
        cdf.push(acc);
    }
    let mut hits: BTreeMap<usize, u64> = BTreeMap::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..shots {
        let u = unit(&mut rng) * acc;
        let idx = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        *hits.entry(idx).or_insert(0) += 1;
    }
    let counts = hits
        .into_iter()
        .map(|(i, n)| (outcomes.key(outcomes.weights[i].0), n))
        .collect();
    Ok(CountsDistribution::new(circuit.num_clbits, counts).expect("keys come from the circuit"))
}

/// Qubits linked by multi-qubit gates, simulated on their own.
struct Block {
    width: usize,
    gates: Vec<Instruction>,
    measures: Vec<(usize, usize)>,
    ideal: StateVector,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn blocks(circuit: &Circuit) -> Vec<Block> {
    let n = circuit.num_qubits;
    let mut parent: Vec<usize> = (0..n).collect();
    for inst in &circuit.instructions {
        if inst.kind.is_unitary() {
            for w in inst.qubits.windows(2) {
                let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for q in 0..n {
        let root = find(&mut parent, q);
        members.entry(root).or_default().push(q);
    }
    let mut out = Vec::new();
    for qubits in members.into_values() {
        let local: HashMap<usize, usize> = qubits.iter().enumerate().map(|(i, &q)| (q, i)).collect();
        let mut gates = Vec::new();
        let mut measures = Vec::new();
        for inst in &circuit.instructions {
            if !local.contains_key(&inst.qubits[0]) {
                continue;
            }
            match inst.kind {
                GateKind::Measure => measures.push((local[&inst.qubits[0]], inst.clbit.expect("measure"))),
                GateKind::Barrier => {}
                _ => gates.push(Instruction {
                    kind: inst.kind,
                    qubits: inst.qubits.iter().map(|q| local[q]).collect(),
                    params: inst.params.clone(),
                    clbit: None,
                }),
            }
        }
        if measures.is_empty() {
            continue;
        }
        let mut ideal = StateVector::zero(qubits.len());
        for g in &gates {
            ideal.apply(g);
        }
        out.push(Block {
            width: qubits.len(),
            gates,
            measures,
            ideal,
        });
    }
    out
}

fn sample_basis(state: &StateVector, u: f64) -> usize {
    let amps = state.amplitudes();
    let total = state.norm_sqr();
    let target = u * total;
    let mut acc = 0.0;
    for (i, a) in amps.iter().enumerate() {
        acc += a.norm_sqr();
        if acc > target {
            return i;
        }
    }
    // rounding: fall back to the last state with weight
    amps.iter().rposition(|a| a.norm_sqr() > 0.0).unwrap_or(0)
}

const PAULIS: [GateKind; 3] = [GateKind::X, GateKind::Y, GateKind::Z];

fn sample_noisy(
    circuit: &Circuit,
    shots: u64,
    seed: u64,
    noise: &NoiseConfig,
) -> Result<CountsDistribution, BackendError> {
    let blocks = blocks(circuit);
    let mut hits: HashMap<Vec<u8>, u64> = HashMap::new();
    let mut errors: Vec<(usize, usize, GateKind)> = Vec::new();
    for shot in 0..shots {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(shot + 1);
        let mut key = vec![b'0'; circuit.num_clbits];
        for block in &blocks {
            errors.clear();
            if noise.depolarizing_prob > 0.0 {
                for (g, gate) in block.gates.iter().enumerate() {
                    for &q in &gate.qubits {
                        if unit(&mut rng) < noise.depolarizing_prob {
                            errors.push((g, q, PAULIS[(rng.next_u64() % 3) as usize]));
                        }
                    }
                }
            }
            let outcome = if errors.is_empty() {
                sample_basis(&block.ideal, unit(&mut rng))
            } else {
                let mut state = StateVector::zero(block.width);
                let mut pending = errors.iter().peekable();
                for (g, gate) in block.gates.iter().enumerate() {
                    state.apply(gate);
                    while let Some(&&(eg, q, pauli)) = pending.peek() {
                        if eg != g {
                            break;
                        }
                        state.apply(&Instruction::gate(pauli, [q]));
                        pending.next();
                    }
                }
                sample_basis(&state, unit(&mut rng))
            };
            for &(q, c) in &block.measures {
                let mut bit = (outcome >> q) & 1 == 1;
                if noise.readout_flip_prob > 0.0 && unit(&mut rng) < noise.readout_flip_prob {
                    bit = !bit;
                }
                key[c] = if bit { b'1' } else { b'0' };
            }
        }
        *hits.entry(key).or_insert(0) += 1;
    }
    let counts = hits
        .into_iter()
        .map(|(k, n)| (String::from_utf8(k).expect("ascii"), n))
        .collect();
    Ok(CountsDistribution::new(circuit.num_clbits, counts).expect("keys come from the circuit"))
}
