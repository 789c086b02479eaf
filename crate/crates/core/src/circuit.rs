//! Register-tagged gate programs.
//!
//! A [`CircuitProgram`] is the explicit intermediate form that noise weaving,
//! gate counting and syndrome-round placement operate on before execution.
//! Qubits are referred to by their position in the program's qubit table and
//! are allocated lazily: a qubit exists from its `allocated_at` op position
//! onwards.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::statevector::{QubitIndex, Register, DEFAULT_MAX_QUBITS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("qubit {0} is not in the qubit table")]
    UnknownQubit(usize),
    #[error("qubit {qubit} used at op {position} before its allocation at {allocated_at}")]
    UseBeforeAllocation { qubit: usize, position: usize, allocated_at: usize },
    #[error("qubit {qubit} is tagged {found:?} in the op but {expected:?} in the table")]
    RegisterMismatch { qubit: usize, expected: Register, found: Register },
    #[error("two-qubit gate on identical qubit {0}")]
    IdenticalOperands(usize),
    #[error("anchors must be strictly increasing and within the op list (anchor {0})")]
    BadAnchor(usize),
    #[error("qubit budget of {max} exceeded")]
    QubitBudget { max: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BlockTag {
    Prepare,
    Lrx,
    Lrz,
    Lcnot,
    Lry,
    Syndrome,
}

impl BlockTag {
    pub const LOGICAL_BLOCKS: [BlockTag; 5] =
        [BlockTag::Prepare, BlockTag::Lrx, BlockTag::Lrz, BlockTag::Lcnot, BlockTag::Lry];

    pub fn as_str(self) -> &'static str {
        match self {
            BlockTag::Prepare => "prepare",
            BlockTag::Lrx => "lrx",
            BlockTag::Lrz => "lrz",
            BlockTag::Lcnot => "lcnot",
            BlockTag::Lry => "lry",
            BlockTag::Syndrome => "syndrome",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "prepare" => BlockTag::Prepare,
            "lrx" => BlockTag::Lrx,
            "lrz" => BlockTag::Lrz,
            "lcnot" => BlockTag::Lcnot,
            "lry" => BlockTag::Lry,
            "syndrome" => BlockTag::Syndrome,
            _ => return None,
        })
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    pub fn as_char(self) -> char {
        match self {
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stabiliser {
    /// X⊗X⊗X⊗X
    X,
    /// Z⊗Z⊗Z⊗Z
    Z,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum GateKind {
    X,
    Rx,
    Ry,
    Rz,
    Cnot,
    Swap,
    H,
    SyndromeMeasure,
    PauliErrorX,
    PauliErrorY,
    PauliErrorZ,
}

impl GateKind {
    pub fn name(self) -> &'static str {
        match self {
            GateKind::X => "X",
            GateKind::Rx => "RX",
            GateKind::Ry => "RY",
            GateKind::Rz => "RZ",
            GateKind::Cnot => "CNOT",
            GateKind::Swap => "SWAP",
            GateKind::H => "H",
            GateKind::SyndromeMeasure => "MEASURE",
            GateKind::PauliErrorX => "ERR_X",
            GateKind::PauliErrorY => "ERR_Y",
            GateKind::PauliErrorZ => "ERR_Z",
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub enum Gate {
    X(QubitIndex),
    H(QubitIndex),
    Rx(QubitIndex, f64),
    Ry(QubitIndex, f64),
    Rz(QubitIndex, f64),
    Cnot { control: QubitIndex, target: QubitIndex },
    Swap(QubitIndex, QubitIndex),
    SyndromeMeasure { qubit: QubitIndex, round: usize, stabiliser: Stabiliser },
    PauliError(QubitIndex, Pauli),
}

impl Gate {
    pub fn kind(&self) -> GateKind {
        match self {
            Gate::X(_) => GateKind::X,
            Gate::H(_) => GateKind::H,
            Gate::Rx(..) => GateKind::Rx,
            Gate::Ry(..) => GateKind::Ry,
            Gate::Rz(..) => GateKind::Rz,
            Gate::Cnot { .. } => GateKind::Cnot,
            Gate::Swap(..) => GateKind::Swap,
            Gate::SyndromeMeasure { .. } => GateKind::SyndromeMeasure,
            Gate::PauliError(_, Pauli::X) => GateKind::PauliErrorX,
            Gate::PauliError(_, Pauli::Y) => GateKind::PauliErrorY,
            Gate::PauliError(_, Pauli::Z) => GateKind::PauliErrorZ,
        }
    }

    /// Operands in order (control before target for CNOT).
    pub fn qubits(&self) -> Qubits {
        match *self {
            Gate::X(q)
            | Gate::H(q)
            | Gate::Rx(q, _)
            | Gate::Ry(q, _)
            | Gate::Rz(q, _)
            | Gate::SyndromeMeasure { qubit: q, .. }
            | Gate::PauliError(q, _) => Qubits::One([q]),
            Gate::Cnot { control, target } => Qubits::Two([control, target]),
            Gate::Swap(a, b) => Qubits::Two([a, b]),
        }
    }

    pub fn angle(&self) -> Option<f64> {
        match *self {
            Gate::Rx(_, t) | Gate::Ry(_, t) | Gate::Rz(_, t) => Some(t),
            _ => None,
        }
    }

    /// True for ops that tick the gate clock: everything except inserted
    /// errors and measurements.
    pub fn is_counted(&self) -> bool {
        !matches!(self, Gate::SyndromeMeasure { .. } | Gate::PauliError(..))
    }

    pub fn is_rotation(&self) -> bool {
        self.angle().is_some()
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Qubits {
    One([QubitIndex; 1]),
    Two([QubitIndex; 2]),
}

impl Qubits {
    pub fn as_slice(&self) -> &[QubitIndex] {
        match self {
            Qubits::One(q) => q,
            Qubits::Two(q) => q,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct GateOp {
    pub gate: Gate,
    pub block: BlockTag,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QubitEntry {
    pub register: Register,
    /// Op position from which the qubit exists (in `|0⟩`).
    pub allocated_at: usize,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Anchor {
    pub block: BlockTag,
    /// Op position immediately after the block's last op.
    pub position: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CircuitProgram {
    pub ops: Vec<GateOp>,
    pub qubits: Vec<QubitEntry>,
    pub anchors: Vec<Anchor>,
}

impl CircuitProgram {
    pub fn qubit(&self, index: usize) -> QubitIndex {
        QubitIndex::new(index, self.qubits[index].register)
    }

    pub fn qubits_in(&self, register: Register) -> impl Iterator<Item = QubitIndex> + '_ {
        self.qubits
            .iter()
            .enumerate()
            .filter(move |(_, e)| e.register == register)
            .map(|(i, e)| QubitIndex::new(i, e.register))
    }

    pub fn anchor(&self, block: BlockTag) -> Option<usize> {
        self.anchors.iter().find(|a| a.block == block).map(|a| a.position)
    }

    pub fn validate(&self) -> Result<(), CircuitError> {
        for (pos, op) in self.ops.iter().enumerate() {
            let qs = op.gate.qubits();
            for q in qs.as_slice() {
                let entry = self.qubits.get(q.index).ok_or(CircuitError::UnknownQubit(q.index))?;
                if entry.register != q.register {
                    return Err(CircuitError::RegisterMismatch {
                        qubit: q.index,
                        expected: entry.register,
                        found: q.register,
                    });
                }
                if entry.allocated_at > pos {
                    return Err(CircuitError::UseBeforeAllocation {
                        qubit: q.index,
                        position: pos,
                        allocated_at: entry.allocated_at,
                    });
                }
            }
            if let Qubits::Two([a, b]) = qs {
                if a.index == b.index {
                    return Err(CircuitError::IdenticalOperands(a.index));
                }
            }
        }
        let mut last: Option<usize> = None;
        for (i, a) in self.anchors.iter().enumerate() {
            if a.position > self.ops.len() || last.is_some_and(|l| a.position <= l) {
                return Err(CircuitError::BadAnchor(i));
            }
            last = Some(a.position);
        }
        Ok(())
    }
}

/// Number of clock-ticking gates: every op except inserted errors and
/// measurements, with two-qubit gates counting once.
pub fn count_gates(program: &CircuitProgram) -> usize {
    program.ops.iter().filter(|op| op.gate.is_counted()).count()
}

/// Incremental program construction with lazy qubit allocation.
#[derive(Clone, Debug)]
pub struct CircuitBuilder {
    program: CircuitProgram,
    block: BlockTag,
    max_qubits: usize,
}

impl Default for CircuitBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl CircuitBuilder {
    pub fn new() -> Self {
        Self::with_max_qubits(DEFAULT_MAX_QUBITS)
    }

    pub fn with_max_qubits(max_qubits: usize) -> Self {
        Self { program: CircuitProgram::default(), block: BlockTag::Prepare, max_qubits }
    }

    pub fn allocate(&mut self, register: Register) -> Result<QubitIndex, CircuitError> {
        if self.program.qubits.len() >= self.max_qubits {
            return Err(CircuitError::QubitBudget { max: self.max_qubits });
        }
        let index = self.program.qubits.len();
        self.program.qubits.push(QubitEntry { register, allocated_at: self.program.ops.len() });
        Ok(QubitIndex::new(index, register))
    }

    pub fn block(&self) -> BlockTag {
        self.block
    }

    pub fn set_block(&mut self, block: BlockTag) {
        self.block = block;
    }

    pub fn push(&mut self, gate: Gate) {
        self.program.ops.push(GateOp { gate, block: self.block });
    }

    pub fn x(&mut self, q: QubitIndex) {
        self.push(Gate::X(q));
    }

    pub fn h(&mut self, q: QubitIndex) {
        self.push(Gate::H(q));
    }

    pub fn cnot(&mut self, control: QubitIndex, target: QubitIndex) {
        self.push(Gate::Cnot { control, target });
    }

    pub fn swap(&mut self, a: QubitIndex, b: QubitIndex) {
        self.push(Gate::Swap(a, b));
    }

    /// Records the end of `block` at the current position.
    pub fn anchor(&mut self, block: BlockTag) {
        self.program.anchors.push(Anchor { block, position: self.program.ops.len() });
    }

    pub fn len(&self) -> usize {
        self.program.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.program.ops.is_empty()
    }

    pub fn program(&self) -> &CircuitProgram {
        &self.program
    }

    pub fn finish(self) -> Result<CircuitProgram, CircuitError> {
        self.program.validate()?;
        Ok(self.program)
    }
}

const HEADER: &str = "# qvl-circuit v1";

impl fmt::Display for CircuitProgram {
    /// One line per qubit, op and anchor. Op lines read
    /// `op <KIND> <qubits..> <arg> <block>` where `arg` is the angle for
    /// rotations, `<round>:<stabiliser>` for measurements and `-` otherwise.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{HEADER}")?;
        for (i, q) in self.qubits.iter().enumerate() {
            writeln!(f, "qubit {i} {} {}", q.register.as_str(), q.allocated_at)?;
        }
        for op in &self.ops {
            write!(f, "op {}", op.gate.kind().name())?;
            for q in op.gate.qubits().as_slice() {
                write!(f, " {}", q.index)?;
            }
            match op.gate {
                Gate::Rx(_, t) | Gate::Ry(_, t) | Gate::Rz(_, t) => write!(f, " {t:?}")?,
                Gate::SyndromeMeasure { round, stabiliser, .. } => {
                    let s = match stabiliser {
                        Stabiliser::X => 'X',
                        Stabiliser::Z => 'Z',
                    };
                    write!(f, " {round}:{s}")?
                }
                _ => write!(f, " -")?,
            }
            writeln!(f, " {}", op.block.as_str())?;
        }
        for a in &self.anchors {
            writeln!(f, "anchor {} {}", a.block.as_str(), a.position)?;
        }
        Ok(())
    }
}

impl std::str::FromStr for CircuitProgram {
    type Err = CircuitError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut program = CircuitProgram::default();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let err = |message: String| CircuitError::Parse { line, message };
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            match fields[0] {
                "qubit" => {
                    if fields.len() != 4 {
                        return Err(err("expected `qubit <index> <register> <allocated_at>`".into()));
                    }
                    let index: usize = fields[1].parse().map_err(|_| err("bad qubit index".into()))?;
                    if index != program.qubits.len() {
                        return Err(err(format!("qubit {index} out of order")));
                    }
                    let register =
                        Register::parse(fields[2]).ok_or_else(|| err(format!("unknown register `{}`", fields[2])))?;
                    let allocated_at = fields[3].parse().map_err(|_| err("bad allocation position".into()))?;
                    program.qubits.push(QubitEntry { register, allocated_at });
                }
                "anchor" => {
                    if fields.len() != 3 {
                        return Err(err("expected `anchor <block> <position>`".into()));
                    }
                    let block =
                        BlockTag::parse(fields[1]).ok_or_else(|| err(format!("unknown block `{}`", fields[1])))?;
                    let position = fields[2].parse().map_err(|_| err("bad anchor position".into()))?;
                    program.anchors.push(Anchor { block, position });
                }
                "op" => {
                    let op = parse_op(&fields[1..], &program).map_err(err)?;
                    program.ops.push(op);
                }
                other => return Err(err(format!("unknown record `{other}`"))),
            }
        }
        program.validate()?;
        Ok(program)
    }
}

fn parse_op(fields: &[&str], program: &CircuitProgram) -> Result<GateOp, String> {
    let kind = *fields.first().ok_or("missing gate kind")?;
    let arity = match kind {
        "CNOT" | "SWAP" => 2,
        "X" | "H" | "RX" | "RY" | "RZ" | "MEASURE" | "ERR_X" | "ERR_Y" | "ERR_Z" => 1,
        other => return Err(format!("unknown gate `{other}`")),
    };
    if fields.len() != arity + 3 {
        return Err(format!("`{kind}` expects {arity} qubit(s), an argument and a block"));
    }
    let mut qs = Vec::with_capacity(arity);
    for f in &fields[1..=arity] {
        let i: usize = f.parse().map_err(|_| format!("bad qubit `{f}`"))?;
        let entry = program.qubits.get(i).ok_or_else(|| format!("qubit {i} not declared"))?;
        qs.push(QubitIndex::new(i, entry.register));
    }
    let arg = fields[arity + 1];
    let block = BlockTag::parse(fields[arity + 2]).ok_or_else(|| format!("unknown block `{}`", fields[arity + 2]))?;
    let angle = || arg.parse::<f64>().map_err(|_| format!("bad angle `{arg}`"));
    let gate = match kind {
        "X" => Gate::X(qs[0]),
        "H" => Gate::H(qs[0]),
        "RX" => Gate::Rx(qs[0], angle()?),
        "RY" => Gate::Ry(qs[0], angle()?),
        "RZ" => Gate::Rz(qs[0], angle()?),
        "CNOT" => Gate::Cnot { control: qs[0], target: qs[1] },
        "SWAP" => Gate::Swap(qs[0], qs[1]),
        "ERR_X" => Gate::PauliError(qs[0], Pauli::X),
        "ERR_Y" => Gate::PauliError(qs[0], Pauli::Y),
        "ERR_Z" => Gate::PauliError(qs[0], Pauli::Z),
        "MEASURE" => {
            let (round, stab) = arg.split_once(':').ok_or("measurement argument must be `<round>:<X|Z>`")?;
            let round = round.parse().map_err(|_| format!("bad round `{round}`"))?;
            let stabiliser = match stab {
                "X" => Stabiliser::X,
                "Z" => Stabiliser::Z,
                other => return Err(format!("unknown stabiliser `{other}`")),
            };
            Gate::SyndromeMeasure { qubit: qs[0], round, stabiliser }
        }
        _ => unreachable!(),
    };
    if gate.angle().is_none() && !matches!(gate, Gate::SyndromeMeasure { .. }) && arg != "-" {
        return Err(format!("`{kind}` takes no argument, found `{arg}`"));
    }
    Ok(GateOp { gate, block })
}
