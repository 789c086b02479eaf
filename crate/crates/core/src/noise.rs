//! Stochastic Pauli fault sampling and weaving.
//!
//! Two models are supported. Gate noise draws a fault after every gate, at
//! rate `r(q)` for single-qubit gates and `2·r(q)` per operand for two-qubit
//! gates. Environmental noise strikes every live qubit after every
//! `injection_period`-th gate. `r(q)` is `p_phys` on physical qubits and
//! `f_anc·p_phys` on rotation ancillas; syndrome qubits never fault.
//! Ops tagged `Prepare` neither fault nor advance the environmental clock
//! unless [`NoiseConfig::noisy_preparation`] is set. Syndrome-extraction
//! gates always advance the clock but draw gate-noise faults only with
//! [`NoiseConfig::noisy_extraction`].

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{BlockTag, CircuitProgram, Gate, GateOp, Pauli, Qubits};
use crate::statevector::{QubitIndex, Register};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("error rate {0} outside [0, 1]")]
    RateOutOfRange(f64),
    #[error("ancilla fraction {0} must be finite and non-negative")]
    BadAncillaFraction(f64),
    #[error("ancilla error rate f_anc·p = {0} exceeds 1")]
    AncillaRateTooLarge(f64),
    #[error("doubled two-qubit-gate rate {0} exceeds 1")]
    DoubledRateTooLarge(f64),
    #[error("injection period must be at least 1")]
    ZeroPeriod,
    #[error("operation requires the {expected:?} model, config selects {found:?}")]
    WrongModel { expected: NoiseModel, found: NoiseModel },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NoiseModel {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "gate")]
    GateNoise,
    #[serde(rename = "environmental")]
    EnvironmentalNoise,
}

impl NoiseModel {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseModel::None => "none",
            NoiseModel::GateNoise => "gate",
            NoiseModel::EnvironmentalNoise => "environmental",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(NoiseModel::None),
            "gate" => Some(NoiseModel::GateNoise),
            "environmental" => Some(NoiseModel::EnvironmentalNoise),
            _ => None,
        }
    }
}

pub const DEFAULT_INJECTION_PERIOD: usize = 4;

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub model: NoiseModel,
    pub p_phys: f64,
    pub f_anc: f64,
    pub injection_period: usize,
    pub seed: u64,
    /// Whether ops tagged `Prepare` (basis or codeword preparation) draw
    /// faults and advance the environmental clock.
    #[serde(default)]
    pub noisy_preparation: bool,
    /// Whether the physical operands of syndrome-extraction gates draw
    /// gate-noise faults. Extraction gates always advance the environmental
    /// clock.
    #[serde(default)]
    pub noisy_extraction: bool,
}

impl NoiseConfig {
    pub fn none() -> Self {
        Self {
            model: NoiseModel::None,
            p_phys: 0.0,
            f_anc: 0.0,
            injection_period: DEFAULT_INJECTION_PERIOD,
            seed: 0,
            noisy_preparation: false,
            noisy_extraction: false,
        }
    }

    pub fn gate(p_phys: f64, f_anc: f64) -> Self {
        Self { model: NoiseModel::GateNoise, p_phys, f_anc, ..Self::none() }
    }

    pub fn environmental(p_phys: f64, f_anc: f64) -> Self {
        Self { model: NoiseModel::EnvironmentalNoise, p_phys, f_anc, ..Self::none() }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_noisy_preparation(mut self, on: bool) -> Self {
        self.noisy_preparation = on;
        self
    }

    pub fn with_noisy_extraction(mut self, on: bool) -> Self {
        self.noisy_extraction = on;
        self
    }

    /// Whether gate noise can follow `op`.
    pub fn exposes(&self, op: &GateOp) -> bool {
        op.gate.is_counted()
            && match op.block {
                BlockTag::Prepare => self.noisy_preparation,
                BlockTag::Syndrome => self.noisy_extraction,
                _ => true,
            }
    }

    /// Whether `op` advances the environmental clock.
    pub fn ticks(&self, op: &GateOp) -> bool {
        op.gate.is_counted() && (op.block != BlockTag::Prepare || self.noisy_preparation)
    }

    pub fn p_anc(&self) -> f64 {
        self.f_anc * self.p_phys
    }

    /// Per-application rate for a qubit of `register`.
    pub fn rate(&self, register: Register) -> f64 {
        match register {
            Register::Physical => self.p_phys,
            Register::RotationAncilla => self.p_anc(),
            Register::Syndrome => 0.0,
        }
    }

    /// True if no fault can ever be drawn.
    pub fn is_silent(&self) -> bool {
        self.model == NoiseModel::None || (self.p_phys == 0.0)
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        if !(0.0..=1.0).contains(&self.p_phys) {
            return Err(NoiseError::RateOutOfRange(self.p_phys));
        }
        if !self.f_anc.is_finite() || self.f_anc < 0.0 {
            return Err(NoiseError::BadAncillaFraction(self.f_anc));
        }
        if self.p_anc() > 1.0 {
            return Err(NoiseError::AncillaRateTooLarge(self.p_anc()));
        }
        if self.injection_period == 0 {
            return Err(NoiseError::ZeroPeriod);
        }
        if self.model == NoiseModel::GateNoise {
            let worst = 2.0 * self.p_phys.max(self.p_anc());
            if worst > 1.0 {
                return Err(NoiseError::DoubledRateTooLarge(worst));
            }
        }
        Ok(())
    }
}

/// A sampled fault: `pauli` hits `qubit` right after op `position` of the
/// clean program.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultRecord {
    pub position: usize,
    pub qubit: QubitIndex,
    pub pauli: Pauli,
}

/// Draws I with probability `1 − rate`, otherwise X, Y or Z uniformly, from a
/// single uniform variate.
pub fn sample_pauli<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> Result<Option<Pauli>, NoiseError> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(NoiseError::RateOutOfRange(rate));
    }
    Ok(draw(rate, rng))
}

#[inline]
fn draw<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> Option<Pauli> {
    let u: f64 = rng.random();
    if u >= rate {
        return None;
    }
    let k = ((3.0 * u / rate) as usize).min(2);
    Some(Pauli::ALL[k])
}

/// Samples the faults `config` places on `program`, ordered by position.
pub fn sample_faults<R: Rng + ?Sized>(
    program: &CircuitProgram,
    config: &NoiseConfig,
    rng: &mut R,
) -> Result<Vec<FaultRecord>, NoiseError> {
    config.validate()?;
    let mut faults = Vec::new();
    if config.is_silent() {
        return Ok(faults);
    }
    match config.model {
        NoiseModel::None => {}
        NoiseModel::GateNoise => {
            for (position, op) in program.ops.iter().enumerate() {
                if !config.exposes(op) {
                    continue;
                }
                let scale = match op.gate.qubits() {
                    Qubits::One(_) => 1.0,
                    Qubits::Two(_) => 2.0,
                };
                for &qubit in op.gate.qubits().as_slice() {
                    let rate = scale * config.rate(qubit.register);
                    if rate == 0.0 {
                        continue;
                    }
                    if let Some(pauli) = draw(rate, rng) {
                        faults.push(FaultRecord { position, qubit, pauli });
                    }
                }
            }
        }
        NoiseModel::EnvironmentalNoise => {
            let mut clock = 0usize;
            for (position, op) in program.ops.iter().enumerate() {
                if !config.ticks(op) {
                    continue;
                }
                clock += 1;
                if !clock.is_multiple_of(config.injection_period) {
                    continue;
                }
                for (index, entry) in program.qubits.iter().enumerate() {
                    if entry.allocated_at > position {
                        continue;
                    }
                    let rate = config.rate(entry.register);
                    if rate == 0.0 {
                        continue;
                    }
                    if let Some(pauli) = draw(rate, rng) {
                        faults.push(FaultRecord { position, qubit: QubitIndex::new(index, entry.register), pauli });
                    }
                }
            }
        }
    }
    Ok(faults)
}

/// Inserts `faults` as Pauli-error ops into a copy of `program`, shifting
/// allocation positions and anchors accordingly.
pub fn splice(program: &CircuitProgram, faults: &[FaultRecord]) -> CircuitProgram {
    if faults.is_empty() {
        return program.clone();
    }
    let mut sorted = faults.to_vec();
    sorted.sort_by_key(|f| f.position);
    // Faults inserted strictly before op position `p` (those following ops < p).
    let shift = |p: usize| sorted.partition_point(|f| f.position < p);

    let mut ops = Vec::with_capacity(program.ops.len() + sorted.len());
    let mut cursor = 0;
    for (pos, op) in program.ops.iter().enumerate() {
        ops.push(*op);
        while cursor < sorted.len() && sorted[cursor].position == pos {
            let f = sorted[cursor];
            ops.push(GateOp { gate: Gate::PauliError(f.qubit, f.pauli), block: op.block });
            cursor += 1;
        }
    }
    let mut out = program.clone();
    out.ops = ops;
    for q in &mut out.qubits {
        q.allocated_at += shift(q.allocated_at);
    }
    for a in &mut out.anchors {
        a.position += shift(a.position);
    }
    out
}

fn require(config: &NoiseConfig, model: NoiseModel) -> Result<(), NoiseError> {
    if config.model != model {
        return Err(NoiseError::WrongModel { expected: model, found: config.model });
    }
    Ok(())
}

/// Gate-noise weaving: returns the program with sampled faults inserted.
pub fn weave_gate_noise<R: Rng + ?Sized>(
    program: &CircuitProgram,
    config: &NoiseConfig,
    rng: &mut R,
) -> Result<(CircuitProgram, Vec<FaultRecord>), NoiseError> {
    require(config, NoiseModel::GateNoise)?;
    let faults = sample_faults(program, config, rng)?;
    Ok((splice(program, &faults), faults))
}

/// Environmental-noise weaving: returns the program with sampled faults
/// inserted.
pub fn weave_environmental_noise<R: Rng + ?Sized>(
    program: &CircuitProgram,
    config: &NoiseConfig,
    rng: &mut R,
) -> Result<(CircuitProgram, Vec<FaultRecord>), NoiseError> {
    require(config, NoiseModel::EnvironmentalNoise)?;
    let faults = sample_faults(program, config, rng)?;
    Ok((splice(program, &faults), faults))
}

/// One fault per line: `<position> <qubit> <register> <pauli>`.
pub fn format_faults(faults: &[FaultRecord]) -> String {
    let mut s = String::new();
    for f in faults {
        let _ = writeln!(s, "{} {} {} {}", f.position, f.qubit.index, f.qubit.register.as_str(), f.pauli.as_char());
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::count_gates;
    use crate::vqc::build_bare_vqc;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pauli_edge_rates() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert_eq!(sample_pauli(0.0, &mut rng).unwrap(), None);
            assert!(sample_pauli(1.0, &mut rng).unwrap().is_some());
        }
        assert!(sample_pauli(1.5, &mut rng).is_err());
        assert!(sample_pauli(-0.1, &mut rng).is_err());
    }

    #[test]
    fn validation() {
        assert!(NoiseConfig::gate(0.6, 1.0).validate().is_err());
        assert!(NoiseConfig::environmental(0.6, 1.0).validate().is_ok());
        assert!(NoiseConfig::gate(0.1, 20.0).validate().is_err());
        assert!(NoiseConfig::gate(0.1, -1.0).validate().is_err());
        let mut c = NoiseConfig::environmental(0.1, 1.0);
        c.injection_period = 0;
        assert_eq!(c.validate(), Err(NoiseError::ZeroPeriod));
    }

    #[test]
    fn zero_rate_is_identity() {
        let p = build_bare_vqc((1, 1), 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (woven, faults) = weave_gate_noise(&p, &NoiseConfig::gate(0.0, 1.0), &mut rng).unwrap();
        assert!(faults.is_empty());
        assert_eq!(woven, p);
        assert!(weave_environmental_noise(&p, &NoiseConfig::gate(0.0, 1.0), &mut rng).is_err());
    }

    #[test]
    fn environmental_sites_follow_the_clock() {
        let p = build_bare_vqc((0, 0), 0.3);
        assert_eq!(count_gates(&p), 7);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut config = NoiseConfig::environmental(1.0, 1.0);
        config.injection_period = 2;
        let faults = sample_faults(&p, &config, &mut rng).unwrap();
        // 3 injection sites over 2 qubits, rate 1.
        assert_eq!(faults.len(), 6);
        let positions: Vec<usize> = faults.iter().map(|f| f.position).collect();
        assert_eq!(positions, vec![1, 1, 3, 3, 5, 5]);
    }

    #[test]
    fn splice_shifts_allocations_and_anchors() {
        let p = crate::vqc::build_logical_vqc(
            crate::code422::LogicalLabel::new(1),
            0.4,
            &crate::vqc::SyndromePlacement::rounds(2),
        )
        .unwrap()
        .program;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (woven, faults) = weave_gate_noise(&p, &NoiseConfig::gate(0.2, 1.0), &mut rng).unwrap();
        assert!(!faults.is_empty());
        woven.validate().unwrap();
        assert_eq!(count_gates(&woven), count_gates(&p));
        assert_eq!(woven.ops.len(), p.ops.len() + faults.len());
        for (a, b) in woven.anchors.iter().zip(&p.anchors) {
            let clean_before: usize =
                woven.ops[..a.position].iter().filter(|o| !matches!(o.gate, Gate::PauliError(..))).count();
            assert_eq!(clean_before, b.position);
        }
        assert!(format_faults(&faults).lines().count() == faults.len());
    }
}
