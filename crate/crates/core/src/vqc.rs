//! Bare and logically encoded single-parameter classifier circuits.
//!
//! Both apply `RX(θ)⊗RX(θ)`, `RZ(θ)⊗RZ(θ)`, a CNOT and `RY(θ)⊗RY(θ)` to a
//! basis-encoded two-bit input. Readout (q0 for the bare circuit, the four
//! physical qubits for the encoded one) is left to the caller.

use serde::{Deserialize, Serialize};

use crate::circuit::{BlockTag, CircuitBuilder, CircuitProgram, Gate};
use crate::code422::{allocate_block, encode_logical, logical_cnot, syndrome_round, CodeBlock, LogicalLabel};
use crate::rotations::{logical_rx_pair, logical_ry_pair, logical_rz_pair, AncillaRegistry};
use crate::statevector::{QubitIndex, Register};
use crate::{Error, Result};

pub const MAX_ROUNDS: usize = 5;

pub fn build_bare_vqc(input: (u8, u8), theta: f64) -> CircuitProgram {
    assert!(input.0 < 2 && input.1 < 2, "input bits must be 0 or 1");
    let mut b = CircuitBuilder::new();
    let q0 = b.allocate(Register::Physical).expect("two qubits fit any budget");
    let q1 = b.allocate(Register::Physical).expect("two qubits fit any budget");
    if input.0 == 1 {
        b.x(q0);
    }
    if input.1 == 1 {
        b.x(q1);
    }
    b.anchor(BlockTag::Prepare);
    b.set_block(BlockTag::Lrx);
    b.push(Gate::Rx(q0, theta));
    b.push(Gate::Rx(q1, theta));
    b.anchor(BlockTag::Lrx);
    b.set_block(BlockTag::Lrz);
    b.push(Gate::Rz(q0, theta));
    b.push(Gate::Rz(q1, theta));
    b.anchor(BlockTag::Lrz);
    b.set_block(BlockTag::Lcnot);
    b.cnot(q0, q1);
    b.anchor(BlockTag::Lcnot);
    b.set_block(BlockTag::Lry);
    b.push(Gate::Ry(q0, theta));
    b.push(Gate::Ry(q1, theta));
    b.anchor(BlockTag::Lry);
    b.finish().expect("bare circuit is well formed")
}

/// Where syndrome rounds are inserted: one round after the end of each
/// listed block, in circuit order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyndromePlacement {
    blocks: Vec<BlockTag>,
}

impl SyndromePlacement {
    /// `k` rounds at the ends of the last `k` logical blocks.
    pub fn rounds(k: usize) -> Self {
        let k = k.min(BlockTag::LOGICAL_BLOCKS.len());
        Self { blocks: BlockTag::LOGICAL_BLOCKS[BlockTag::LOGICAL_BLOCKS.len() - k..].to_vec() }
    }

    /// Explicit placement; a block may be listed more than once.
    pub fn at(blocks: Vec<BlockTag>) -> Result<Self> {
        for b in &blocks {
            if !BlockTag::LOGICAL_BLOCKS.contains(b) {
                return Err(Error::InvalidArgument(format!("no syndrome anchor at block `{}`", b.as_str())));
            }
        }
        let mut blocks = blocks;
        blocks.sort();
        Ok(Self { blocks })
    }

    pub fn num_rounds(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[BlockTag] {
        &self.blocks
    }

    fn count_at(&self, block: BlockTag) -> usize {
        self.blocks.iter().filter(|&&b| b == block).count()
    }
}

#[derive(Clone, Debug)]
pub struct LogicalVqc {
    pub program: CircuitProgram,
    pub block: CodeBlock,
    pub registry: AncillaRegistry,
}

impl LogicalVqc {
    pub fn rotation_ancillas(&self) -> Vec<QubitIndex> {
        self.registry.tracked().map(|t| t.qubit).collect()
    }
}

/// Encoded classifier for logical input `label`, with syndrome rounds per
/// `placement`.
pub fn build_logical_vqc(label: LogicalLabel, theta: f64, placement: &SyndromePlacement) -> Result<LogicalVqc> {
    build_logical_prefix(label, theta, placement, BlockTag::Lry)
}

/// The encoded classifier truncated after block `upto` (one of the five
/// logical blocks).
pub fn build_logical_prefix(
    label: LogicalLabel,
    theta: f64,
    placement: &SyndromePlacement,
    upto: BlockTag,
) -> Result<LogicalVqc> {
    let mut b = CircuitBuilder::new();
    let q = allocate_block(&mut b)?;
    let mut registry = AncillaRegistry::new();
    let mut round = 0;
    for block in BlockTag::LOGICAL_BLOCKS {
        if block > upto {
            break;
        }
        b.set_block(block);
        match block {
            BlockTag::Prepare => encode_logical(&mut b, &q, label),
            BlockTag::Lrx => {
                logical_rx_pair(&mut b, &q, &mut registry, theta, Some(label))?;
            }
            BlockTag::Lrz => {
                logical_rz_pair(&mut b, &q, &mut registry, theta)?;
            }
            BlockTag::Lcnot => logical_cnot(&mut b, &q, &registry),
            BlockTag::Lry => {
                logical_ry_pair(&mut b, &q, &mut registry, theta)?;
            }
            BlockTag::Syndrome => unreachable!(),
        }
        b.anchor(block);
        for _ in 0..placement.count_at(block) {
            syndrome_round(&mut b, &q, round)?;
            round += 1;
        }
    }
    Ok(LogicalVqc { program: b.finish()?, block: q, registry })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{count_gates, GateKind};
    use crate::exec::run_clean;

    #[test]
    fn bare_layout() {
        let p = build_bare_vqc((1, 0), 0.3);
        assert_eq!(p.ops[0].gate, Gate::X(p.qubit(0)));
        assert_eq!(count_gates(&p), 8);
        assert_eq!(count_gates(&build_bare_vqc((0, 0), 0.3)), 7);
    }

    #[test]
    fn bare_theta_zero_is_cnot() {
        for input in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let s = run_clean(&build_bare_vqc(input, 0.0)).unwrap().state;
            let expect = ((input.0 << 1) | (input.0 ^ input.1)) as usize;
            assert!((s.amplitude(expect).norm_sqr() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn placement_uses_last_anchors() {
        assert_eq!(SyndromePlacement::rounds(1).blocks(), &[BlockTag::Lry]);
        assert_eq!(SyndromePlacement::rounds(2).blocks(), &[BlockTag::Lcnot, BlockTag::Lry]);
        assert_eq!(SyndromePlacement::rounds(5).blocks(), &BlockTag::LOGICAL_BLOCKS);
        assert!(SyndromePlacement::at(vec![BlockTag::Syndrome]).is_err());
    }

    #[test]
    fn qubit_accounting() {
        for k in 0..=MAX_ROUNDS {
            let v = build_logical_vqc(LogicalLabel::new(2), 0.5, &SyndromePlacement::rounds(k)).unwrap();
            let p = &v.program;
            assert_eq!(p.qubits_in(Register::Physical).count(), 4);
            assert_eq!(p.qubits_in(Register::RotationAncilla).count(), 6);
            assert_eq!(p.qubits_in(Register::Syndrome).count(), 2 * k);
            assert_eq!(p.qubits.len(), 10 + 2 * k);
            let measures = p.ops.iter().filter(|o| o.gate.kind() == GateKind::SyndromeMeasure).count();
            assert_eq!(measures, 2 * k);
        }
    }
}
