//! Dense pure-state simulation.
//!
//! Amplitudes are stored in a flat vector indexed by the basis integer, with
//! qubit `k` mapped to bit `k` of the index. Everything that leaves this module
//! (basis labels, outcome tables, reduced density matrices) is ordered with the
//! first listed qubit as the most significant position, so qubit 0 reads
//! leftmost.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Norm tolerance checked after normalized operations.
pub const NORM_TOLERANCE: f64 = 1e-9;
/// Maximum deviation of `U U†` from the identity accepted by [`Statevector::apply_1q`].
pub const UNITARITY_TOLERANCE: f64 = 1e-12;
/// Projections with probability below this are treated as numerically degenerate.
pub const MIN_PROJECTION_PROBABILITY: f64 = 1e-15;
/// Default qubit budget.
pub const DEFAULT_MAX_QUBITS: usize = 22;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("qubit {index} out of range for a {num_qubits}-qubit state")]
    QubitOutOfRange { index: usize, num_qubits: usize },
    #[error("gate matrix is not unitary (deviation {deviation:e})")]
    NonUnitary { deviation: f64 },
    #[error("qubit {0} listed more than once")]
    DuplicateQubit(usize),
    #[error("qubit budget of {max} exceeded")]
    QubitBudget { max: usize },
    #[error("projection of qubit {qubit} onto |{outcome}> has probability {probability:e}")]
    DegenerateProjection { qubit: usize, outcome: u8, probability: f64 },
    #[error("dimension mismatch: {left} vs {right} qubits")]
    DimensionMismatch { left: usize, right: usize },
}

pub type StateResult<T> = Result<T, StateError>;

/// Which register a qubit belongs to.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Register {
    Physical,
    RotationAncilla,
    Syndrome,
}

impl Register {
    pub fn as_str(self) -> &'static str {
        match self {
            Register::Physical => "physical",
            Register::RotationAncilla => "ancilla",
            Register::Syndrome => "syndrome",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "physical" => Some(Register::Physical),
            "ancilla" => Some(Register::RotationAncilla),
            "syndrome" => Some(Register::Syndrome),
            _ => None,
        }
    }
}

/// A qubit position tagged with its register. The register is fixed at
/// allocation.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QubitIndex {
    pub index: usize,
    pub register: Register,
}

impl QubitIndex {
    pub const fn new(index: usize, register: Register) -> Self {
        Self { index, register }
    }

    pub const fn physical(index: usize) -> Self {
        Self::new(index, Register::Physical)
    }
}

/// A 2x2 complex matrix, row-major.
pub type Matrix2 = [[Complex64; 2]; 2];

pub mod gates {
    //! Single-qubit matrices. Rotations use the half-angle convention
    //! `R_P(θ) = exp(-iθP/2)`.
    use super::Matrix2;
    use num_complex::Complex64;

    const fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    pub fn identity() -> Matrix2 {
        [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]]
    }

    pub fn x() -> Matrix2 {
        [[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]]
    }

    pub fn y() -> Matrix2 {
        [[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]]
    }

    pub fn z() -> Matrix2 {
        [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]]
    }

    pub fn h() -> Matrix2 {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        [[c(r, 0.0), c(r, 0.0)], [c(r, 0.0), c(-r, 0.0)]]
    }

    pub fn rx(theta: f64) -> Matrix2 {
        let (s, co) = (theta / 2.0).sin_cos();
        [[c(co, 0.0), c(0.0, -s)], [c(0.0, -s), c(co, 0.0)]]
    }

    pub fn ry(theta: f64) -> Matrix2 {
        let (s, co) = (theta / 2.0).sin_cos();
        [[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]]
    }

    pub fn rz(theta: f64) -> Matrix2 {
        let (s, co) = (theta / 2.0).sin_cos();
        [[c(co, -s), c(0.0, 0.0)], [c(0.0, 0.0), c(co, s)]]
    }

    pub fn mul(a: &Matrix2, b: &Matrix2) -> Matrix2 {
        let mut out = [[c(0.0, 0.0); 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        out
    }
}

/// Largest entry-wise deviation of `m m†` from the identity.
pub fn unitarity_deviation(m: &Matrix2) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let v = m[i][0] * m[j][0].conj() + m[i][1] * m[j][1].conj();
            let target = if i == j { ONE } else { ZERO };
            worst = worst.max((v - target).norm());
        }
    }
    worst
}

/// Dense statevector over `num_qubits` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct Statevector {
    amplitudes: Vec<Complex64>,
    registers: Vec<Register>,
    max_qubits: usize,
}

impl Statevector {
    /// The empty (zero-qubit) state with amplitude 1.
    pub fn empty() -> Self {
        Self { amplitudes: vec![ONE], registers: Vec::new(), max_qubits: DEFAULT_MAX_QUBITS }
    }

    /// `|0...0⟩` over `n` physical qubits.
    pub fn zeros(n: usize) -> Self {
        Self::basis(n, 0)
    }

    /// Computational basis state. `label` is read with qubit 0 as the most
    /// significant bit, e.g. `basis(2, 0b10)` is `|10⟩` (qubit 0 set).
    pub fn basis(n: usize, label: usize) -> Self {
        let mut amplitudes = vec![ZERO; 1 << n];
        amplitudes[reverse_bits(label, n)] = ONE;
        Self { amplitudes, registers: vec![Register::Physical; n], max_qubits: DEFAULT_MAX_QUBITS.max(n) }
    }

    /// Builds a state from amplitudes listed in label order (qubit 0 most
    /// significant). The length must be a power of two.
    pub fn from_label_amplitudes(amps: &[Complex64]) -> Self {
        let n = amps.len().trailing_zeros() as usize;
        assert_eq!(1usize << n, amps.len(), "amplitude count must be a power of two");
        let mut amplitudes = vec![ZERO; amps.len()];
        for (label, a) in amps.iter().enumerate() {
            amplitudes[reverse_bits(label, n)] = *a;
        }
        Self { amplitudes, registers: vec![Register::Physical; n], max_qubits: DEFAULT_MAX_QUBITS.max(n) }
    }

    pub fn with_max_qubits(mut self, max: usize) -> Self {
        self.max_qubits = max;
        self
    }

    pub fn num_qubits(&self) -> usize {
        self.registers.len()
    }

    pub fn max_qubits(&self) -> usize {
        self.max_qubits
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    pub fn qubit(&self, index: usize) -> QubitIndex {
        QubitIndex::new(index, self.registers[index])
    }

    /// Raw amplitudes in storage order (qubit k is bit k).
    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// Amplitude of a basis state written with qubit 0 leftmost.
    pub fn amplitude(&self, label: usize) -> Complex64 {
        self.amplitudes[reverse_bits(label, self.num_qubits())]
    }

    /// Amplitudes in label order (qubit 0 most significant).
    pub fn label_amplitudes(&self) -> Vec<Complex64> {
        let n = self.num_qubits();
        (0..self.amplitudes.len()).map(|label| self.amplitudes[reverse_bits(label, n)]).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() < NORM_TOLERANCE
    }

    fn check(&self, q: usize) -> StateResult<()> {
        if q >= self.num_qubits() {
            Err(StateError::QubitOutOfRange { index: q, num_qubits: self.num_qubits() })
        } else {
            Ok(())
        }
    }

    fn check_distinct(&self, qubits: &[usize]) -> StateResult<()> {
        for (i, &q) in qubits.iter().enumerate() {
            self.check(q)?;
            if qubits[..i].contains(&q) {
                return Err(StateError::DuplicateQubit(q));
            }
        }
        Ok(())
    }

    /// Applies a single-qubit unitary.
    pub fn apply_1q(&mut self, q: usize, gate: &Matrix2) -> StateResult<()> {
        self.check(q)?;
        let deviation = unitarity_deviation(gate);
        if deviation > UNITARITY_TOLERANCE {
            return Err(StateError::NonUnitary { deviation });
        }
        self.apply_matrix(q, gate);
        Ok(())
    }

    fn apply_matrix(&mut self, q: usize, m: &Matrix2) {
        let mask = 1usize << q;
        let [[a, b], [c, d]] = *m;
        for base in (0..self.amplitudes.len()).step_by(mask << 1) {
            for i in base..base + mask {
                let lo = self.amplitudes[i];
                let hi = self.amplitudes[i | mask];
                self.amplitudes[i] = a * lo + b * hi;
                self.amplitudes[i | mask] = c * lo + d * hi;
            }
        }
    }

    fn apply_diagonal(&mut self, q: usize, d0: Complex64, d1: Complex64) {
        let mask = 1usize << q;
        for (i, amp) in self.amplitudes.iter_mut().enumerate() {
            *amp *= if i & mask == 0 { d0 } else { d1 };
        }
    }

    pub fn apply_x(&mut self, q: usize) -> StateResult<()> {
        self.check(q)?;
        let mask = 1usize << q;
        for base in (0..self.amplitudes.len()).step_by(mask << 1) {
            for i in base..base + mask {
                self.amplitudes.swap(i, i | mask);
            }
        }
        Ok(())
    }

    pub fn apply_y(&mut self, q: usize) -> StateResult<()> {
        self.check(q)?;
        let mask = 1usize << q;
        let i_unit = Complex64::new(0.0, 1.0);
        for base in (0..self.amplitudes.len()).step_by(mask << 1) {
            for i in base..base + mask {
                let lo = self.amplitudes[i];
                let hi = self.amplitudes[i | mask];
                self.amplitudes[i] = -i_unit * hi;
                self.amplitudes[i | mask] = i_unit * lo;
            }
        }
        Ok(())
    }

    pub fn apply_z(&mut self, q: usize) -> StateResult<()> {
        self.check(q)?;
        let mask = 1usize << q;
        for (i, amp) in self.amplitudes.iter_mut().enumerate() {
            if i & mask != 0 {
                *amp = -*amp;
            }
        }
        Ok(())
    }

    pub fn apply_h(&mut self, q: usize) -> StateResult<()> {
        self.check(q)?;
        self.apply_matrix(q, &gates::h());
        Ok(())
    }

    pub fn apply_rx(&mut self, q: usize, theta: f64) -> StateResult<()> {
        self.check(q)?;
        self.apply_matrix(q, &gates::rx(theta));
        Ok(())
    }

    pub fn apply_ry(&mut self, q: usize, theta: f64) -> StateResult<()> {
        self.check(q)?;
        self.apply_matrix(q, &gates::ry(theta));
        Ok(())
    }

    pub fn apply_rz(&mut self, q: usize, theta: f64) -> StateResult<()> {
        self.check(q)?;
        let (s, c) = (theta / 2.0).sin_cos();
        self.apply_diagonal(q, Complex64::new(c, -s), Complex64::new(c, s));
        Ok(())
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) -> StateResult<()> {
        self.check_distinct(&[control, target])?;
        let cmask = 1usize << control;
        let tmask = 1usize << target;
        for i in 0..self.amplitudes.len() {
            if i & cmask != 0 && i & tmask == 0 {
                self.amplitudes.swap(i, i | tmask);
            }
        }
        Ok(())
    }

    pub fn apply_swap(&mut self, a: usize, b: usize) -> StateResult<()> {
        self.check_distinct(&[a, b])?;
        let amask = 1usize << a;
        let bmask = 1usize << b;
        for i in 0..self.amplitudes.len() {
            if i & amask != 0 && i & bmask == 0 {
                self.amplitudes.swap(i, (i & !amask) | bmask);
            }
        }
        Ok(())
    }

    /// Appends a qubit in `|initial⟩` at the highest index.
    pub fn allocate_qubit(&mut self, register: Register, initial: u8) -> StateResult<QubitIndex> {
        let n = self.num_qubits();
        if n + 1 > self.max_qubits {
            return Err(StateError::QubitBudget { max: self.max_qubits });
        }
        let len = self.amplitudes.len();
        self.amplitudes.resize(len * 2, ZERO);
        if initial != 0 {
            let (lo, hi) = self.amplitudes.split_at_mut(len);
            hi.copy_from_slice(lo);
            lo.fill(ZERO);
        }
        self.registers.push(register);
        Ok(QubitIndex::new(n, register))
    }

    /// Removes a qubit that is in the definite state `|bit⟩`, relabelling the
    /// qubits above it down by one.
    pub fn remove_qubit(&mut self, q: usize, bit: u8) -> StateResult<()> {
        self.check(q)?;
        let mask = 1usize << q;
        let other: f64 = self
            .amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| ((i & mask) != 0) != (bit != 0))
            .map(|(_, a)| a.norm_sqr())
            .sum();
        if other > NORM_TOLERANCE {
            return Err(StateError::DegenerateProjection { qubit: q, outcome: bit, probability: 1.0 - other });
        }
        let low = mask - 1;
        let keep = if bit != 0 { mask } else { 0 };
        let mut out = vec![ZERO; self.amplitudes.len() / 2];
        for (j, slot) in out.iter_mut().enumerate() {
            let i = (j & low) | ((j & !low) << 1) | keep;
            *slot = self.amplitudes[i];
        }
        self.amplitudes = out;
        self.registers.remove(q);
        Ok(())
    }

    /// Probability that qubit `q` reads 1.
    pub fn probability_one(&self, q: usize) -> StateResult<f64> {
        self.check(q)?;
        let mask = 1usize << q;
        Ok(self.amplitudes.iter().enumerate().filter(|(i, _)| i & mask != 0).map(|(_, a)| a.norm_sqr()).sum())
    }

    /// Marginal outcome probabilities over `qubits`. Entry `k` corresponds to
    /// the bit string of `k` with `qubits[0]` most significant.
    pub fn probabilities(&self, qubits: &[usize]) -> StateResult<Vec<f64>> {
        self.check_distinct(qubits)?;
        let k = qubits.len();
        let mut out = vec![0.0; 1 << k];
        for (i, a) in self.amplitudes.iter().enumerate() {
            let p = a.norm_sqr();
            if p == 0.0 {
                continue;
            }
            out[gather(i, qubits)] += p;
        }
        Ok(out)
    }

    /// Projects qubit `q` onto `|outcome⟩` and renormalizes, returning the
    /// probability of that outcome before projection.
    pub fn project(&mut self, q: usize, outcome: u8) -> StateResult<f64> {
        let p1 = self.probability_one(q)?;
        let p = if outcome == 0 { 1.0 - p1 } else { p1 };
        if p < MIN_PROJECTION_PROBABILITY {
            return Err(StateError::DegenerateProjection { qubit: q, outcome, probability: p });
        }
        let mask = 1usize << q;
        let scale = 1.0 / p.sqrt();
        for (i, a) in self.amplitudes.iter_mut().enumerate() {
            if ((i & mask) != 0) == (outcome != 0) {
                *a *= scale;
            } else {
                *a = ZERO;
            }
        }
        Ok(p)
    }

    /// Samples a Born-rule outcome for qubit `q` and collapses onto it.
    pub fn measure_and_collapse<R: Rng + ?Sized>(&mut self, q: usize, rng: &mut R) -> StateResult<u8> {
        let p1 = self.probability_one(q)?;
        let u: f64 = rng.random();
        let outcome = u8::from(u < p1);
        self.project(q, outcome)?;
        Ok(outcome)
    }

    /// `⟨self|other⟩`.
    pub fn inner_product(&self, other: &Statevector) -> StateResult<Complex64> {
        if self.num_qubits() != other.num_qubits() {
            return Err(StateError::DimensionMismatch { left: self.num_qubits(), right: other.num_qubits() });
        }
        Ok(self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum())
    }

    /// Amplitudes arranged as a `2^|keep| × 2^(n−|keep|)` matrix, rows
    /// indexed by `keep` (first entry most significant) and columns by the
    /// remaining qubits in ascending order.
    pub fn bipartition(&self, keep: &[usize]) -> StateResult<DMatrix<Complex64>> {
        self.check_distinct(keep)?;
        let n = self.num_qubits();
        let traced: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
        let mut m = DMatrix::<Complex64>::zeros(1 << keep.len(), 1 << traced.len());
        for (i, a) in self.amplitudes.iter().enumerate() {
            if *a != ZERO {
                m[(gather(i, keep), gather(i, &traced))] = *a;
            }
        }
        Ok(m)
    }

    /// Reduced density matrix over `keep`, rows ordered with `keep[0]` most
    /// significant.
    pub fn reduced_density(&self, keep: &[usize]) -> StateResult<DMatrix<Complex64>> {
        let m = self.bipartition(keep)?;
        Ok(&m * m.adjoint())
    }
}

/// Packs the bits of `index` at positions `qubits` into an integer with
/// `qubits[0]` most significant.
fn gather(index: usize, qubits: &[usize]) -> usize {
    qubits.iter().fold(0usize, |acc, &q| (acc << 1) | ((index >> q) & 1))
}

/// Converts between label order (qubit 0 most significant) and storage order.
fn reverse_bits(label: usize, n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    label.reverse_bits() >> (usize::BITS as usize - n)
}

/// Formats a basis index (label order) as a bit string, qubit 0 leftmost.
pub fn format_label(label: usize, n: usize) -> String {
    (0..n).map(|k| if (label >> (n - 1 - k)) & 1 == 1 { '1' } else { '0' }).collect()
}
