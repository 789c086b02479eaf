//! Op-by-op execution of a [`CircuitProgram`] on a [`Statevector`].
//!
//! Program qubits ("wires") are allocated in the statevector when execution
//! reaches their `allocated_at` position. A syndrome qubit is removed from the
//! state right after its final measurement, so the live state never carries
//! more than one syndrome qubit at a time.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circuit::{CircuitProgram, Gate, Pauli, Stabiliser};
use crate::code422::{mirror_invariant_at, CodeBlock, SyndromeOutcome};
use crate::noise::FaultRecord;
use crate::rotations::AncillaRegistry;
use crate::statevector::{QubitIndex, Register, Statevector, MIN_PROJECTION_PROBABILITY};
use crate::{Error, Result};

/// How syndrome measurements are resolved.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum MeasurePolicy {
    /// Born-rule sampling; execution always runs to completion.
    Sample,
    /// Born-rule sampling; stops at the first nonzero syndrome bit.
    SampleAbortOnFlag,
    /// Projects every syndrome qubit onto 0 and accumulates the probability
    /// of doing so in [`Execution::weight`].
    PostSelect,
}

#[derive(Clone, Debug)]
pub struct Execution {
    pub state: Statevector,
    /// Statevector position of each program wire, `None` once released (or
    /// if never reached).
    pub slots: Vec<Option<usize>>,
    pub syndromes: Vec<SyndromeOutcome>,
    /// Probability of the all-zero syndrome record under `PostSelect`; 1
    /// otherwise.
    pub weight: f64,
    /// True if any syndrome bit was 1 (or post-selection had zero weight).
    pub rejected: bool,
    /// False if execution stopped early.
    pub completed: bool,
}

impl Execution {
    pub fn slot(&self, q: QubitIndex) -> Result<usize> {
        self.slots.get(q.index).copied().flatten().ok_or(Error::QubitNotLive(q.index))
    }

    pub fn slots_of(&self, qs: &[QubitIndex]) -> Result<Vec<usize>> {
        qs.iter().map(|&q| self.slot(q)).collect()
    }

    pub fn accepted(&self) -> bool {
        !self.rejected
    }
}

/// Executes `program` with `faults` applied after the ops they name.
/// `faults` must be sorted by position.
pub fn execute<R: Rng + ?Sized>(
    program: &CircuitProgram,
    faults: &[FaultRecord],
    policy: MeasurePolicy,
    rng: &mut R,
) -> Result<Execution> {
    debug_assert!(faults.windows(2).all(|w| w[0].position <= w[1].position));
    let n_ops = program.ops.len();
    let mut order: Vec<usize> = (0..program.qubits.len()).collect();
    order.sort_by_key(|&w| (program.qubits[w].allocated_at, w));
    let mut next_alloc = 0;

    let mut last_use = vec![None; program.qubits.len()];
    for (pos, op) in program.ops.iter().enumerate() {
        for q in op.gate.qubits().as_slice() {
            last_use[q.index] = Some(pos);
        }
    }

    let mut state = Statevector::empty().with_max_qubits(usize::MAX);
    let mut slots: Vec<Option<usize>> = vec![None; program.qubits.len()];
    let mut measured: Vec<(usize, Stabiliser, u8)> = Vec::new();
    let mut weight = 1.0;
    let mut rejected = false;
    let mut fault_cursor = 0;

    let allocate_upto =
        |pos: usize, state: &mut Statevector, slots: &mut [Option<usize>], next: &mut usize| -> Result<()> {
            while *next < order.len() && program.qubits[order[*next]].allocated_at <= pos {
                let w = order[*next];
                let q = state.allocate_qubit(program.qubits[w].register, 0)?;
                slots[w] = Some(q.index);
                *next += 1;
            }
            Ok(())
        };

    for (pos, op) in program.ops.iter().enumerate() {
        allocate_upto(pos, &mut state, &mut slots, &mut next_alloc)?;
        let slot = |q: QubitIndex| slots[q.index].ok_or(Error::QubitNotLive(q.index));
        match op.gate {
            Gate::X(q) => state.apply_x(slot(q)?)?,
            Gate::H(q) => state.apply_h(slot(q)?)?,
            Gate::Rx(q, t) => state.apply_rx(slot(q)?, t)?,
            Gate::Ry(q, t) => state.apply_ry(slot(q)?, t)?,
            Gate::Rz(q, t) => state.apply_rz(slot(q)?, t)?,
            Gate::Cnot { control, target } => state.apply_cnot(slot(control)?, slot(target)?)?,
            Gate::Swap(a, b) => state.apply_swap(slot(a)?, slot(b)?)?,
            Gate::PauliError(q, p) => apply_pauli(&mut state, slot(q)?, p)?,
            Gate::SyndromeMeasure { qubit, round, stabiliser } => {
                let s = slot(qubit)?;
                let bit = match policy {
                    MeasurePolicy::Sample | MeasurePolicy::SampleAbortOnFlag => state.measure_and_collapse(s, rng)?,
                    MeasurePolicy::PostSelect => {
                        let p0 = 1.0 - state.probability_one(s)?;
                        if p0 < MIN_PROJECTION_PROBABILITY {
                            measured.push((round, stabiliser, 1));
                            return Ok(finish(state, slots, &measured, 0.0, true, false));
                        }
                        state.project(s, 0)?;
                        weight *= p0;
                        0
                    }
                };
                measured.push((round, stabiliser, bit));
                if bit == 1 {
                    rejected = true;
                    if policy == MeasurePolicy::SampleAbortOnFlag {
                        return Ok(finish(state, slots, &measured, weight, true, false));
                    }
                }
                if last_use[qubit.index] == Some(pos) {
                    state.remove_qubit(s, bit)?;
                    slots[qubit.index] = None;
                    for v in slots.iter_mut().flatten() {
                        if *v > s {
                            *v -= 1;
                        }
                    }
                }
            }
        }
        while fault_cursor < faults.len() && faults[fault_cursor].position == pos {
            let f = &faults[fault_cursor];
            apply_pauli(&mut state, slot_of(&slots, f.qubit)?, f.pauli)?;
            fault_cursor += 1;
        }
        if fault_cursor < faults.len() && faults[fault_cursor].position < pos {
            return Err(Error::InvalidArgument("fault list is not sorted by position".into()));
        }
    }
    allocate_upto(usize::MAX, &mut state, &mut slots, &mut next_alloc)?;
    if fault_cursor < faults.len() {
        return Err(Error::InvalidArgument(format!(
            "fault at position {} lies beyond the program ({n_ops} ops)",
            faults[fault_cursor].position
        )));
    }
    Ok(finish(state, slots, &measured, weight, rejected, true))
}

fn slot_of(slots: &[Option<usize>], q: QubitIndex) -> Result<usize> {
    slots.get(q.index).copied().flatten().ok_or(Error::QubitNotLive(q.index))
}

fn apply_pauli(state: &mut Statevector, q: usize, p: Pauli) -> Result<()> {
    match p {
        Pauli::X => state.apply_x(q)?,
        Pauli::Y => state.apply_y(q)?,
        Pauli::Z => state.apply_z(q)?,
    }
    Ok(())
}

fn finish(
    state: Statevector,
    slots: Vec<Option<usize>>,
    measured: &[(usize, Stabiliser, u8)],
    weight: f64,
    rejected: bool,
    completed: bool,
) -> Execution {
    let mut syndromes: Vec<SyndromeOutcome> = Vec::new();
    for &(round, stab, bit) in measured {
        let idx = match syndromes.iter().position(|s| s.round_index == round) {
            Some(i) => i,
            None => {
                syndromes.push(SyndromeOutcome { round_index: round, x_stabiliser_bit: 0, z_stabiliser_bit: 0 });
                syndromes.len() - 1
            }
        };
        match stab {
            Stabiliser::X => syndromes[idx].x_stabiliser_bit |= bit,
            Stabiliser::Z => syndromes[idx].z_stabiliser_bit |= bit,
        }
    }
    Execution { state, slots, syndromes, weight, rejected, completed }
}

/// Noise-free execution with all syndromes post-selected to 0.
pub fn run_clean(program: &CircuitProgram) -> Result<Execution> {
    // PostSelect never draws from the stream.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    execute(program, &[], MeasurePolicy::PostSelect, &mut rng)
}

/// Mirror-invariant check on an execution result, translating program wires
/// to statevector positions.
pub fn mirror_invariant_after(exec: &Execution, block: &CodeBlock, registry: &AncillaRegistry) -> Result<bool> {
    let physical = exec.slots_of(block)?;
    let tracked = registry.tracked().map(|t| Ok((exec.slot(t.qubit)?, t.logical))).collect::<Result<Vec<_>>>()?;
    Ok(mirror_invariant_at(&exec.state, &physical, &tracked))
}

/// Statevector positions of every live wire in `register`, in wire order.
pub fn register_slots(program: &CircuitProgram, exec: &Execution, register: Register) -> Vec<usize> {
    program.qubits_in(register).filter_map(|q| exec.slots[q.index]).collect()
}
