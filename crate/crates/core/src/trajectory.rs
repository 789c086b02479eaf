//! Prepared circuits and single noisy trajectories.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{BlockTag, CircuitProgram};
use crate::code422::{decode_unnormalized, DecodeError, LogicalLabel};
use crate::exec::{execute, run_clean, Execution, MeasurePolicy};
use crate::noise::{sample_faults, NoiseConfig};
use crate::statevector::{QubitIndex, Register};
use crate::vqc::{build_bare_vqc, build_logical_vqc, SyndromePlacement, MAX_ROUNDS};
use crate::{Error, Result};

/// Which classifier circuit is simulated.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Architecture {
    Bare,
    Logical { placement: SyndromePlacement },
}

impl Architecture {
    pub fn logical(rounds: usize) -> Result<Self> {
        if rounds > MAX_ROUNDS {
            return Err(Error::InvalidArgument(format!("at most {MAX_ROUNDS} syndrome rounds, got {rounds}")));
        }
        Ok(Architecture::Logical { placement: SyndromePlacement::rounds(rounds) })
    }

    pub fn logical_at(blocks: Vec<BlockTag>) -> Result<Self> {
        Ok(Architecture::Logical { placement: SyndromePlacement::at(blocks)? })
    }

    pub fn is_encoded(&self) -> bool {
        matches!(self, Architecture::Logical { .. })
    }

    pub fn rounds(&self) -> usize {
        match self {
            Architecture::Bare => 0,
            Architecture::Logical { placement } => placement.num_rounds(),
        }
    }
}

/// A circuit for one input at one angle, with its noise-free reference run.
#[derive(Clone, Debug)]
pub struct PreparedCircuit {
    pub input: (u8, u8),
    pub theta: f64,
    pub encoded: bool,
    pub program: CircuitProgram,
    /// Wires read out at the end: q0 for the bare circuit, the code block
    /// otherwise.
    pub readout: Vec<QubitIndex>,
    pub physical: Vec<QubitIndex>,
    pub ancillas: Vec<QubitIndex>,
    pub ideal: Execution,
    /// Noise-free readout distribution over `readout`.
    pub ideal_readout: Vec<f64>,
}

impl PreparedCircuit {
    pub fn new(architecture: &Architecture, input: (u8, u8), theta: f64) -> Result<Self> {
        if input.0 > 1 || input.1 > 1 {
            return Err(Error::InvalidArgument(format!("input bits must be 0 or 1, got {input:?}")));
        }
        let (program, readout, encoded) = match architecture {
            Architecture::Bare => {
                let p = build_bare_vqc(input, theta);
                let q0 = p.qubit(0);
                (p, vec![q0], false)
            }
            Architecture::Logical { placement } => {
                let v = build_logical_vqc(LogicalLabel::from_bits(input.0, input.1), theta, placement)?;
                (v.program, v.block.to_vec(), true)
            }
        };
        let physical: Vec<QubitIndex> = program.qubits_in(Register::Physical).collect();
        let ancillas: Vec<QubitIndex> = program.qubits_in(Register::RotationAncilla).collect();
        let ideal = run_clean(&program)?;
        let ideal_readout = ideal.state.probabilities(&ideal.slots_of(&readout)?)?;
        Ok(Self { input, theta, encoded, program, readout, physical, ancillas, ideal, ideal_readout })
    }

    pub fn label(&self) -> LogicalLabel {
        LogicalLabel::from_bits(self.input.0, self.input.1)
    }

    /// Readout distribution of a completed execution of this program.
    pub fn readout_distribution(&self, exec: &Execution) -> Result<Vec<f64>> {
        Ok(exec.state.probabilities(&exec.slots_of(&self.readout)?)?)
    }

    /// `⟨Z⟩` on the classifier qubit from readout weights (probabilities or
    /// counts over `readout`).
    pub fn expectation(&self, weights: &[f64]) -> std::result::Result<f64, DecodeError> {
        if self.encoded {
            Ok(decode_unnormalized(weights)?.z_expectation)
        } else {
            let total = weights[0] + weights[1];
            if total <= 0.0 {
                return Err(DecodeError::Undecodable(total));
            }
            Ok((weights[0] - weights[1]) / total)
        }
    }
}

/// One sampled noise realization.
#[derive(Clone, Debug)]
pub struct Trajectory {
    /// `None` when no fault was drawn; the noise-free reference applies.
    pub execution: Option<Execution>,
    pub faults: usize,
    pub accepted: bool,
    /// Post-selection probability under `MeasurePolicy::PostSelect`, else 1.
    pub weight: f64,
}

impl Trajectory {
    pub fn execution<'a>(&'a self, prepared: &'a PreparedCircuit) -> &'a Execution {
        self.execution.as_ref().unwrap_or(&prepared.ideal)
    }

    pub fn readout_distribution(&self, prepared: &PreparedCircuit) -> Result<Vec<f64>> {
        match &self.execution {
            None => Ok(prepared.ideal_readout.clone()),
            Some(e) => prepared.readout_distribution(e),
        }
    }
}

/// Draws faults and executes them. Fault-free draws reuse the reference run:
/// codewords are exact +1 eigenstates of both stabilisers, so every syndrome
/// bit is 0 with probability 1.
pub fn run_trajectory<R: Rng + ?Sized>(
    prepared: &PreparedCircuit,
    noise: &NoiseConfig,
    policy: MeasurePolicy,
    rng: &mut R,
) -> Result<Trajectory> {
    let faults = sample_faults(&prepared.program, noise, rng)?;
    if faults.is_empty() {
        return Ok(Trajectory { execution: None, faults: 0, accepted: true, weight: 1.0 });
    }
    let e = execute(&prepared.program, &faults, policy, rng)?;
    Ok(Trajectory { accepted: e.accepted(), weight: e.weight, faults: faults.len(), execution: Some(e) })
}
