//! The [[4,2,2]] error-detecting code: encoding, logical CNOT, syndrome
//! extraction and logical readout.
//!
//! Physical basis labels are written with q0 leftmost. The two logical bits
//! `l1 l2` map to the codeword pairs
//!
//! | label | codewords     |
//! |-------|---------------|
//! | 00    | 0000, 1111    |
//! | 01    | 0011, 1100    |
//! | 10    | 0101, 1010    |
//! | 11    | 0110, 1001    |
//!
//! so `l1 = q0 ⊕ q1` and `l2 = q0 ⊕ q2` on codewords. Logical X on the first
//! logical qubit is `X q1 X q3`, on the second `X q2 X q3`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{BlockTag, CircuitBuilder, CircuitError, Gate, Stabiliser};
use crate::rotations::AncillaRegistry;
use crate::statevector::{QubitIndex, Register, Statevector};

/// Codeword mass below which a readout distribution cannot be decoded.
pub const MIN_CODEWORD_MASS: f64 = 1e-12;
/// Tolerance on the normalization of a 16-outcome readout table.
pub const READOUT_NORM_TOLERANCE: f64 = 1e-6;

/// The four physical qubits of one code block.
pub type CodeBlock = [QubitIndex; 4];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecodeError {
    #[error("readout table has {0} entries, expected 16")]
    WrongLength(usize),
    #[error("readout table sums to {0}, expected 1")]
    NotNormalized(f64),
    #[error("codeword mass {0:e} is too small to decode")]
    Undecodable(f64),
}

/// Logical basis label `l1 l2`, stored as `2·l1 + l2`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LogicalLabel(u8);

impl LogicalLabel {
    pub const ALL: [LogicalLabel; 4] = [LogicalLabel(0), LogicalLabel(1), LogicalLabel(2), LogicalLabel(3)];

    pub fn new(value: u8) -> Self {
        assert!(value < 4, "logical label out of range: {value}");
        LogicalLabel(value)
    }

    pub fn from_bits(l1: u8, l2: u8) -> Self {
        assert!(l1 < 2 && l2 < 2, "logical bits must be 0 or 1");
        LogicalLabel((l1 << 1) | l2)
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// Bit of logical qubit `k` (0 or 1).
    pub fn bit(self, k: usize) -> u8 {
        match k {
            0 => self.0 >> 1,
            1 => self.0 & 1,
            _ => panic!("logical qubit index {k} out of range"),
        }
    }

    /// The two physical codeword labels (q0 leftmost) encoding this label.
    pub fn codewords(self) -> [usize; 2] {
        CODEWORDS[self.0 as usize]
    }

    /// Logical label of a physical 4-bit basis label, if it is a codeword.
    pub fn decode(physical: usize) -> Option<Self> {
        debug_assert!(physical < 16);
        let q = |k: usize| (physical >> (3 - k)) & 1;
        // Codewords have even weight and q0⊕q3 = q1⊕q2.
        if !physical.count_ones().is_multiple_of(2) || (q(0) ^ q(3)) != (q(1) ^ q(2)) {
            return None;
        }
        Some(LogicalLabel::from_bits((q(0) ^ q(1)) as u8, (q(0) ^ q(2)) as u8))
    }

    pub fn codeword_state(self) -> Statevector {
        let mut amps = vec![num_complex::Complex64::new(0.0, 0.0); 16];
        for w in self.codewords() {
            amps[w] = num_complex::Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        }
        Statevector::from_label_amplitudes(&amps)
    }
}

impl fmt::Display for LogicalLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.bit(0), self.bit(1))
    }
}

impl std::str::FromStr for LogicalLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "00" => Ok(LogicalLabel(0)),
            "01" => Ok(LogicalLabel(1)),
            "10" => Ok(LogicalLabel(2)),
            "11" => Ok(LogicalLabel(3)),
            _ => Err(format!("invalid logical label `{s}`")),
        }
    }
}

const CODEWORDS: [[usize; 2]; 4] = [[0b0000, 0b1111], [0b0011, 0b1100], [0b0101, 0b1010], [0b0110, 0b1001]];

/// Allocates the four physical qubits of a code block.
pub fn allocate_block(builder: &mut CircuitBuilder) -> Result<CodeBlock, CircuitError> {
    Ok([
        builder.allocate(Register::Physical)?,
        builder.allocate(Register::Physical)?,
        builder.allocate(Register::Physical)?,
        builder.allocate(Register::Physical)?,
    ])
}

/// Prepares the codeword of `label` from `|0000⟩`: a GHZ state followed by
/// logical-X fix-ups.
pub fn encode_logical(builder: &mut CircuitBuilder, q: &CodeBlock, label: LogicalLabel) {
    builder.h(q[0]);
    for &t in &q[1..] {
        builder.cnot(q[0], t);
    }
    if label.bit(0) == 1 {
        builder.x(q[1]);
        builder.x(q[3]);
    }
    if label.bit(1) == 1 {
        builder.x(q[2]);
        builder.x(q[3]);
    }
}

/// Logical CNOT (first logical qubit controls the second): `SWAP(q0, q1)`
/// followed by CNOTs that keep every ancilla tracking the second logical
/// qubit equal to `l1 ⊕ l2`.
pub fn logical_cnot(builder: &mut CircuitBuilder, q: &CodeBlock, registry: &AncillaRegistry) {
    builder.swap(q[0], q[1]);
    for (control, target) in registry.cnot_fixups() {
        match control {
            Some(c) => builder.cnot(c, target),
            None => {
                // No ancilla tracks l1 at this layer: read it as q0 ⊕ q1.
                builder.cnot(q[0], target);
                builder.cnot(q[1], target);
            }
        }
    }
}

/// Appends one round of X⊗X⊗X⊗X and Z⊗Z⊗Z⊗Z extraction, each on a fresh
/// syndrome qubit.
pub fn syndrome_round(builder: &mut CircuitBuilder, q: &CodeBlock, round: usize) -> Result<(), CircuitError> {
    let previous = builder.block();
    builder.set_block(BlockTag::Syndrome);

    let sx = builder.allocate(Register::Syndrome)?;
    builder.h(sx);
    for &p in q {
        builder.cnot(sx, p);
    }
    builder.h(sx);
    builder.push(Gate::SyndromeMeasure { qubit: sx, round, stabiliser: Stabiliser::X });

    let sz = builder.allocate(Register::Syndrome)?;
    for &p in q {
        builder.cnot(p, sz);
    }
    builder.push(Gate::SyndromeMeasure { qubit: sz, round, stabiliser: Stabiliser::Z });

    builder.set_block(previous);
    Ok(())
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyndromeOutcome {
    pub round_index: usize,
    pub x_stabiliser_bit: u8,
    pub z_stabiliser_bit: u8,
}

impl SyndromeOutcome {
    pub fn is_trivial(&self) -> bool {
        self.x_stabiliser_bit == 0 && self.z_stabiliser_bit == 0
    }
}

/// A shot is accepted iff every round reports both bits 0.
pub fn accepted(outcomes: &[SyndromeOutcome]) -> bool {
    outcomes.iter().all(SyndromeOutcome::is_trivial)
}

/// Result of decoding a 16-outcome physical readout table.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct LogicalReadout {
    /// Probabilities of logical labels 00, 01, 10, 11 renormalized over the
    /// codeword mass.
    pub probabilities: [f64; 4],
    /// `⟨Z⟩` on the first logical qubit.
    pub z_expectation: f64,
    /// Fraction of the input mass that sat on codewords.
    pub codeword_mass: f64,
}

/// Decodes a 16-entry table (index = physical label, q0 most significant).
pub fn decode_logical_readout(probs16: &[f64]) -> Result<LogicalReadout, DecodeError> {
    if probs16.len() != 16 {
        return Err(DecodeError::WrongLength(probs16.len()));
    }
    let total: f64 = probs16.iter().sum();
    if (total - 1.0).abs() > READOUT_NORM_TOLERANCE {
        return Err(DecodeError::NotNormalized(total));
    }
    decode_unnormalized(probs16)
}

/// As [`decode_logical_readout`] for weights or counts of arbitrary total.
pub fn decode_unnormalized(weights: &[f64]) -> Result<LogicalReadout, DecodeError> {
    if weights.len() != 16 {
        return Err(DecodeError::WrongLength(weights.len()));
    }
    let total: f64 = weights.iter().sum();
    let mut logical = [0.0; 4];
    for (label, pair) in CODEWORDS.iter().enumerate() {
        logical[label] = weights[pair[0]] + weights[pair[1]];
    }
    let mass: f64 = logical.iter().sum();
    if mass < MIN_CODEWORD_MASS * total.max(1.0) || mass <= 0.0 {
        return Err(DecodeError::Undecodable(mass));
    }
    for p in &mut logical {
        *p /= mass;
    }
    let z = logical[0] + logical[1] - logical[2] - logical[3];
    Ok(LogicalReadout { probabilities: logical, z_expectation: z, codeword_mass: mass / total })
}

/// Amplitude threshold below which a basis term is treated as absent.
const MIRROR_AMPLITUDE_CUTOFF: f64 = 1e-12;

/// Checks that every basis term with non-negligible amplitude is a codeword
/// on `physical` and that each tracked ancilla equals the logical bit it
/// tracks. Qubit indices are positions in `state`.
pub fn mirror_invariant_holds(state: &Statevector, physical: &CodeBlock, registry: &AncillaRegistry) -> bool {
    let phys: Vec<usize> = physical.iter().map(|q| q.index).collect();
    let tracked: Vec<(usize, usize)> = registry.tracked().map(|t| (t.qubit.index, t.logical)).collect();
    mirror_invariant_at(state, &phys, &tracked)
}

/// Slot-level form of [`mirror_invariant_holds`]: `tracked` pairs a state
/// position with the logical qubit (0 or 1) it mirrors.
pub fn mirror_invariant_at(state: &Statevector, physical: &[usize], tracked: &[(usize, usize)]) -> bool {
    for (i, a) in state.amplitudes().iter().enumerate() {
        if a.norm() < MIRROR_AMPLITUDE_CUTOFF {
            continue;
        }
        let word = physical.iter().fold(0usize, |acc, &q| (acc << 1) | ((i >> q) & 1));
        let Some(label) = LogicalLabel::decode(word) else {
            return false;
        };
        for &(slot, logical) in tracked {
            if ((i >> slot) & 1) as u8 != label.bit(logical) {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::run_clean;
    use approx::assert_abs_diff_eq;

    fn encoded(label: LogicalLabel) -> (Statevector, CodeBlock) {
        let mut b = CircuitBuilder::new();
        let q = allocate_block(&mut b).unwrap();
        encode_logical(&mut b, &q, label);
        let program = b.finish().unwrap();
        (run_clean(&program).unwrap().state, q)
    }

    #[test]
    fn codeword_table_and_decode_agree() {
        for label in LogicalLabel::ALL {
            for w in label.codewords() {
                assert_eq!(LogicalLabel::decode(w), Some(label));
            }
        }
        let codeword_count = (0..16).filter(|&w| LogicalLabel::decode(w).is_some()).count();
        assert_eq!(codeword_count, 8);
    }

    #[test]
    fn encoding_prepares_codewords() {
        for label in LogicalLabel::ALL {
            let (state, _) = encoded(label);
            let overlap = state.inner_product(&label.codeword_state()).unwrap();
            assert_abs_diff_eq!(overlap.norm_sqr(), 1.0, epsilon = 1e-10);
        }
        let (s00, _) = encoded(LogicalLabel::new(0));
        assert_abs_diff_eq!(s00.amplitude(0b0000).re, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(s00.amplitude(0b1111).re, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        let (s11, _) = encoded(LogicalLabel::new(3));
        assert_abs_diff_eq!(s11.amplitude(0b0110).norm_sqr(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s11.amplitude(0b1001).norm_sqr(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn logical_cnot_without_ancillas() {
        let expect = [(0, 0), (1, 1), (2, 3), (3, 2)];
        for (from, to) in expect {
            let mut b = CircuitBuilder::new();
            let q = allocate_block(&mut b).unwrap();
            encode_logical(&mut b, &q, LogicalLabel::new(from));
            logical_cnot(&mut b, &q, &AncillaRegistry::new());
            let state = run_clean(&b.finish().unwrap()).unwrap().state;
            let overlap = state.inner_product(&LogicalLabel::new(to).codeword_state()).unwrap();
            assert_abs_diff_eq!(overlap.norm_sqr(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn decode_examples() {
        let mut p = [0.0; 16];
        p[0b0000] = 0.5;
        p[0b1111] = 0.5;
        let r = decode_logical_readout(&p).unwrap();
        assert_eq!(r.probabilities, [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(r.z_expectation, 1.0);

        let mut p = [0.0; 16];
        p[0b0101] = 0.5;
        p[0b1010] = 0.5;
        let r = decode_logical_readout(&p).unwrap();
        assert_eq!(r.probabilities, [0.0, 0.0, 1.0, 0.0]);
        assert_eq!(r.z_expectation, -1.0);

        let mut p = [0.0; 16];
        p[0b0001] = 1.0;
        assert!(matches!(decode_logical_readout(&p), Err(DecodeError::Undecodable(_))));
        assert!(matches!(decode_logical_readout(&[0.5; 16]), Err(DecodeError::NotNormalized(_))));
        assert!(matches!(decode_logical_readout(&[1.0]), Err(DecodeError::WrongLength(1))));
    }

    #[test]
    fn decode_renormalizes_leaked_mass() {
        let mut p = [0.0; 16];
        p[0b0000] = 0.3;
        p[0b0101] = 0.1;
        p[0b0001] = 0.6;
        let r = decode_logical_readout(&p).unwrap();
        assert_abs_diff_eq!(r.probabilities[0], 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(r.z_expectation, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(r.codeword_mass, 0.4, epsilon = 1e-12);
    }

    #[test]
    fn mirror_invariant_trivial_cases() {
        let (state, q) = encoded(LogicalLabel::new(2));
        assert!(mirror_invariant_holds(&state, &q, &AncillaRegistry::new()));
        let mut broken = state.clone();
        broken.apply_x(0).unwrap();
        assert!(!mirror_invariant_holds(&broken, &q, &AncillaRegistry::new()));
    }
}
