//! Ancilla-mediated logical rotations on a [[4,2,2]] block.
//!
//! Each rotation layer allocates fresh rotation ancillas that mirror the
//! logical bits, entangles them with the logical operator, rotates the
//! ancillas and disentangles again:
//!
//! 1. initialize the new ancillas to the logical label (classical X for the
//!    first layer, CNOT copies from the previous layer afterwards);
//! 2. CNOT from each new ancilla onto every older ancilla tracking the same
//!    logical qubit;
//! 3. CNOT from each new ancilla onto the physical support of its logical X;
//! 4. rotate the new ancillas;
//! 5. and 6. repeat steps 3 and 2.
//!
//! Conjugating the ancilla rotation by the CNOTs turns `X_a` (and `Y_a`) into
//! `X_a · X_L · X_older`, which acts on the mirrored subspace exactly as the
//! logical operator. Z rotations need only step 1, since `Z_a` already equals
//! `Z_L` on that subspace.

use thiserror::Error;

use crate::circuit::{CircuitBuilder, CircuitError, Gate};
use crate::code422::{CodeBlock, LogicalLabel};
use crate::statevector::{QubitIndex, Register};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RotationError {
    #[error("rotation needs at least {needed} ancilla pair(s), registry holds {found}")]
    TooFewPairs { needed: usize, found: usize },
    #[error("pair rotation on a registry holding an odd number ({0}) of ancillas")]
    OddAncillaCount(usize),
    #[error("logical qubit index {0} out of range")]
    BadLogical(usize),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// A rotation ancilla and the logical qubit (0 or 1) whose bit it mirrors.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Tracked {
    pub qubit: QubitIndex,
    pub logical: usize,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
enum Layer {
    Pair(QubitIndex, QubitIndex),
    Single(Tracked),
}

/// Rotation ancillas in creation order, grouped by the layer that made them.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AncillaRegistry {
    layers: Vec<Layer>,
}

impl AncillaRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Ancilla pairs `(tracks l1, tracks l2)`, oldest first.
    pub fn pairs(&self) -> Vec<(QubitIndex, QubitIndex)> {
        self.layers
            .iter()
            .filter_map(|l| match *l {
                Layer::Pair(a, b) => Some((a, b)),
                Layer::Single(_) => None,
            })
            .collect()
    }

    pub fn num_pairs(&self) -> usize {
        self.layers.iter().filter(|l| matches!(l, Layer::Pair(..))).count()
    }

    /// Total number of rotation ancillas.
    pub fn count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match l {
                Layer::Pair(..) => 2,
                Layer::Single(_) => 1,
            })
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn tracked(&self) -> impl Iterator<Item = Tracked> + '_ {
        self.layers.iter().flat_map(|l| {
            let (first, second) = match *l {
                Layer::Pair(a, b) => (Tracked { qubit: a, logical: 0 }, Some(Tracked { qubit: b, logical: 1 })),
                Layer::Single(t) => (t, None),
            };
            std::iter::once(first).chain(second)
        })
    }

    /// Ancillas mirroring logical qubit `logical`, oldest first.
    pub fn tracking(&self, logical: usize) -> Vec<QubitIndex> {
        self.tracked().filter(|t| t.logical == logical).map(|t| t.qubit).collect()
    }

    pub fn latest(&self, logical: usize) -> Option<QubitIndex> {
        self.tracking(logical).last().copied()
    }

    /// CNOTs that restore the mirror invariant after `SWAP(q0, q1)`: every
    /// ancilla tracking l2 must absorb l1. `None` as control means no ancilla
    /// of the same layer tracks l1 and it must be read from the physical
    /// qubits.
    pub fn cnot_fixups(&self) -> Vec<(Option<QubitIndex>, QubitIndex)> {
        self.layers
            .iter()
            .filter_map(|l| match *l {
                Layer::Pair(a, b) => Some((Some(a), b)),
                Layer::Single(t) if t.logical == 1 => Some((None, t.qubit)),
                Layer::Single(_) => None,
            })
            .collect()
    }
}

/// Physical targets of logical X on logical qubit `logical`.
fn logical_x_support(q: &CodeBlock, logical: usize) -> [QubitIndex; 2] {
    match logical {
        0 => [q[1], q[3]],
        _ => [q[2], q[3]],
    }
}

/// Step 1 for one fresh ancilla.
fn initialize(
    b: &mut CircuitBuilder,
    q: &CodeBlock,
    registry: &AncillaRegistry,
    ancilla: QubitIndex,
    logical: usize,
    hint: Option<LogicalLabel>,
) {
    if let Some(prev) = registry.latest(logical) {
        b.cnot(prev, ancilla);
    } else if let Some(label) = hint {
        if label.bit(logical) == 1 {
            b.x(ancilla);
        }
    } else {
        // Parity read-out of the logical bit: l1 = q0⊕q1, l2 = q0⊕q2.
        b.cnot(q[0], ancilla);
        b.cnot(q[logical + 1], ancilla);
    }
}

fn step_two(b: &mut CircuitBuilder, registry: &AncillaRegistry, fresh: &[Tracked]) {
    for t in fresh {
        for older in registry.tracking(t.logical) {
            b.cnot(t.qubit, older);
        }
    }
}

fn step_three(b: &mut CircuitBuilder, q: &CodeBlock, fresh: &[Tracked]) {
    for t in fresh {
        for target in logical_x_support(q, t.logical) {
            b.cnot(t.qubit, target);
        }
    }
}

fn rotate(b: &mut CircuitBuilder, axis: Axis, qubit: QubitIndex, theta: f64) {
    b.push(match axis {
        Axis::X => Gate::Rx(qubit, theta),
        Axis::Y => Gate::Ry(qubit, theta),
        Axis::Z => Gate::Rz(qubit, theta),
    });
}

fn rotation_layer(
    b: &mut CircuitBuilder,
    q: &CodeBlock,
    registry: &AncillaRegistry,
    axis: Axis,
    fresh: &[Tracked],
    theta: f64,
    hint: Option<LogicalLabel>,
) {
    for t in fresh {
        initialize(b, q, registry, t.qubit, t.logical, hint);
    }
    if axis == Axis::Z {
        for t in fresh {
            rotate(b, axis, t.qubit, theta);
        }
        return;
    }
    step_three(b, q, fresh);
    step_two(b, registry, fresh);
    for t in fresh {
        rotate(b, axis, t.qubit, theta);
    }
    step_three(b, q, fresh);
    step_two(b, registry, fresh);
}

fn pair_rotation(
    b: &mut CircuitBuilder,
    q: &CodeBlock,
    registry: &mut AncillaRegistry,
    axis: Axis,
    theta: f64,
    hint: Option<LogicalLabel>,
) -> Result<(QubitIndex, QubitIndex), RotationError> {
    let n = registry.count();
    if !n.is_multiple_of(2) {
        return Err(RotationError::OddAncillaCount(n));
    }
    let a = b.allocate(Register::RotationAncilla)?;
    let c = b.allocate(Register::RotationAncilla)?;
    let fresh = [Tracked { qubit: a, logical: 0 }, Tracked { qubit: c, logical: 1 }];
    rotation_layer(b, q, registry, axis, &fresh, theta, hint);
    registry.layers.push(Layer::Pair(a, c));
    Ok((a, c))
}

/// `RX(θ) ⊗ RX(θ)` on both logical qubits. With an empty registry the new
/// ancillas are set from `input_label_hint` (or read from the physical
/// qubits by parity CNOTs when no hint is given).
pub fn logical_rx_pair(
    b: &mut CircuitBuilder,
    q: &CodeBlock,
    registry: &mut AncillaRegistry,
    theta: f64,
    input_label_hint: Option<LogicalLabel>,
) -> Result<(QubitIndex, QubitIndex), RotationError> {
    pair_rotation(b, q, registry, Axis::X, theta, input_label_hint)
}

/// `RZ(θ) ⊗ RZ(θ)` on both logical qubits via ancilla copies.
pub fn logical_rz_pair(
    b: &mut CircuitBuilder,
    q: &CodeBlock,
    registry: &mut AncillaRegistry,
    theta: f64,
) -> Result<(QubitIndex, QubitIndex), RotationError> {
    if registry.num_pairs() < 1 {
        return Err(RotationError::TooFewPairs { needed: 1, found: 0 });
    }
    pair_rotation(b, q, registry, Axis::Z, theta, None)
}

/// `RY(θ) ⊗ RY(θ)` on both logical qubits.
pub fn logical_ry_pair(
    b: &mut CircuitBuilder,
    q: &CodeBlock,
    registry: &mut AncillaRegistry,
    theta: f64,
) -> Result<(QubitIndex, QubitIndex), RotationError> {
    let found = registry.num_pairs();
    if found < 2 {
        return Err(RotationError::TooFewPairs { needed: 2, found });
    }
    pair_rotation(b, q, registry, Axis::Y, theta, None)
}

/// Rotation of a single logical qubit through one fresh ancilla.
pub fn logical_rotation(
    b: &mut CircuitBuilder,
    q: &CodeBlock,
    registry: &mut AncillaRegistry,
    axis: Axis,
    logical: usize,
    theta: f64,
    input_label_hint: Option<LogicalLabel>,
) -> Result<QubitIndex, RotationError> {
    if logical > 1 {
        return Err(RotationError::BadLogical(logical));
    }
    let a = b.allocate(Register::RotationAncilla)?;
    let fresh = [Tracked { qubit: a, logical }];
    rotation_layer(b, q, registry, axis, &fresh, theta, input_label_hint);
    registry.layers.push(Layer::Single(fresh[0]));
    Ok(a)
}
