//! Pre-measurement state fidelities, their distributions, and threshold
//! estimation from training sweeps.
//!
//! The full-state fidelity is the pure-state overlap `|⟨ideal|noisy⟩|²`.
//! Register fidelities compare reduced states, which are mixed because the
//! registers are entangled, so they use the Uhlmann fidelity
//! `F(ρ, σ) = (Tr √(√σ ρ √σ))²`, equal to the overlap when both are pure.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::code422::LogicalLabel;
use crate::exec::{Execution, MeasurePolicy};
use crate::noise::NoiseConfig;
use crate::rng::{tag, StreamPath};
use crate::statevector::{QubitIndex, Statevector};
use crate::training::{mean_std, UNIQUE_POINTS};
use crate::trajectory::{run_trajectory, Architecture, PreparedCircuit};
use crate::{Error, Result};

pub const HISTOGRAM_BINS: usize = 50;
pub const BIN_WIDTH: f64 = 0.02;
/// Allowed overshoot of 1 from rounding.
pub const FIDELITY_SLACK: f64 = 1e-9;

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityRecord {
    pub input_label: LogicalLabel,
    pub f_full: f64,
    pub f_phys: f64,
    /// `None` for circuits without rotation ancillas.
    pub f_anc: Option<f64>,
    pub accepted: bool,
}

/// Square root of a Hermitian positive-semidefinite matrix.
pub fn psd_sqrt(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let eig = SymmetricEigen::new(m.clone());
    let roots = eig.eigenvalues.map(|l| Complex64::from(l.max(0.0).sqrt()));
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.adjoint()
}

/// Uhlmann fidelity between two density matrices.
pub fn mixed_fidelity(rho: &DMatrix<Complex64>, sigma: &DMatrix<Complex64>) -> f64 {
    let s = psd_sqrt(sigma);
    let m = &s * rho * &s;
    trace_sqrt_squared(&m)
}

fn trace_sqrt_squared(m: &DMatrix<Complex64>) -> f64 {
    let hermitian = (m + m.adjoint()) * Complex64::from(0.5);
    let eig = SymmetricEigen::new(hermitian);
    let t: f64 = eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum();
    (t * t).min(1.0 + FIDELITY_SLACK)
}

/// Register fidelity against a fixed reference, with `√σ` precomputed.
#[derive(Clone, Debug)]
pub struct RegisterReference {
    keep: Vec<usize>,
    sqrt_sigma: DMatrix<Complex64>,
}

impl RegisterReference {
    pub fn new(ideal: &Statevector, keep: &[usize]) -> Result<Self> {
        let sigma = ideal.reduced_density(keep)?;
        Ok(Self { keep: keep.to_vec(), sqrt_sigma: psd_sqrt(&sigma) })
    }

    /// `F(ρ_noisy, σ)`. With `ρ = A A†` for the bipartite amplitude matrix
    /// `A`, `√σ ρ √σ = B B†` with `B = √σ A`, whose nonzero spectrum equals
    /// that of the smaller Gram matrix.
    pub fn fidelity(&self, noisy: &Statevector) -> Result<f64> {
        let a = noisy.bipartition(&self.keep)?;
        let b = &self.sqrt_sigma * a;
        let gram = if b.nrows() <= b.ncols() { &b * b.adjoint() } else { b.adjoint() * &b };
        Ok(trace_sqrt_squared(&gram))
    }
}

/// Fidelities of a noisy pre-measurement state against the ideal one. Both
/// executions must come from the same program so their layouts agree.
pub fn record_fidelity(
    noisy: &Execution,
    ideal: &Execution,
    physical: &[QubitIndex],
    ancillas: &[QubitIndex],
    input_label: LogicalLabel,
) -> Result<FidelityRecord> {
    if noisy.slots != ideal.slots || noisy.state.num_qubits() != ideal.state.num_qubits() {
        return Err(Error::InvalidArgument("noisy and ideal states have different layouts".into()));
    }
    let f_full = ideal.state.inner_product(&noisy.state)?.norm_sqr().min(1.0 + FIDELITY_SLACK);
    let phys = ideal.slots_of(physical)?;
    let f_phys = RegisterReference::new(&ideal.state, &phys)?.fidelity(&noisy.state)?;
    let f_anc = if ancillas.is_empty() {
        None
    } else {
        let anc = ideal.slots_of(ancillas)?;
        Some(RegisterReference::new(&ideal.state, &anc)?.fidelity(&noisy.state)?)
    };
    Ok(FidelityRecord { input_label, f_full, f_phys, f_anc, accepted: noisy.accepted() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelitySummary {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub frac_below_002: f64,
    pub frac_above_098: f64,
    /// Counts in `[k·0.02, (k+1)·0.02)`, the last bin closed at 1.
    pub histogram: Vec<usize>,
}

pub fn histogram_bin(f: f64) -> usize {
    if f < BIN_WIDTH {
        return 0;
    }
    ((f / BIN_WIDTH) as usize).min(HISTOGRAM_BINS - 1)
}

pub fn summarize(values: &[f64]) -> FidelitySummary {
    let (mean, std) = mean_std(values);
    let n = values.len().max(1) as f64;
    let mut histogram = vec![0; HISTOGRAM_BINS];
    for &v in values {
        histogram[histogram_bin(v)] += 1;
    }
    FidelitySummary {
        count: values.len(),
        mean,
        std,
        frac_below_002: values.iter().filter(|&&v| v < 0.02).count() as f64 / n,
        frac_above_098: values.iter().filter(|&&v| v > 0.98).count() as f64 / n,
        histogram,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub architecture: Architecture,
    pub noise: NoiseConfig,
    pub theta: f64,
    pub shots_per_label: usize,
    pub max_reruns: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CampaignResult {
    pub records: Vec<FidelityRecord>,
    pub full: FidelitySummary,
    pub phys: FidelitySummary,
    pub anc: Option<FidelitySummary>,
    pub acceptance_rate: f64,
}

struct LabelReference {
    prepared: PreparedCircuit,
    phys: RegisterReference,
    anc: Option<RegisterReference>,
}

/// Collects `shots_per_label` accepted trajectories for each of the four
/// inputs and their fidelities at the pre-measurement point.
pub fn fidelity_campaign(config: &CampaignConfig, stream: &StreamPath) -> Result<CampaignResult> {
    config.noise.validate()?;
    if config.max_reruns == 0 {
        return Err(Error::InvalidArgument("max_reruns must be at least 1".into()));
    }
    let mut references = Vec::with_capacity(4);
    for &input in &UNIQUE_POINTS {
        let prepared = PreparedCircuit::new(&config.architecture, input, config.theta)?;
        let phys = RegisterReference::new(&prepared.ideal.state, &prepared.ideal.slots_of(&prepared.physical)?)?;
        let anc = if prepared.ancillas.is_empty() {
            None
        } else {
            Some(RegisterReference::new(&prepared.ideal.state, &prepared.ideal.slots_of(&prepared.ancillas)?)?)
        };
        references.push(LabelReference { prepared, phys, anc });
    }

    let jobs: Vec<(usize, usize)> = (0..4).flat_map(|l| (0..config.shots_per_label).map(move |s| (l, s))).collect();
    let shots: Vec<(FidelityRecord, usize)> = jobs
        .par_iter()
        .map(|&(l, s)| {
            let r = &references[l];
            let label = r.prepared.label();
            let mut rng = stream.rng_at(&[tag::FIDELITY, l as u64, s as u64]);
            for attempt in 0..config.max_reruns {
                let traj = run_trajectory(&r.prepared, &config.noise, MeasurePolicy::SampleAbortOnFlag, &mut rng)?;
                if !traj.accepted {
                    continue;
                }
                let record = match &traj.execution {
                    None => FidelityRecord {
                        input_label: label,
                        f_full: 1.0,
                        f_phys: 1.0,
                        f_anc: r.anc.as_ref().map(|_| 1.0),
                        accepted: true,
                    },
                    Some(e) => {
                        if e.slots != r.prepared.ideal.slots {
                            return Err(Error::InvalidArgument("trajectory layout differs from reference".into()));
                        }
                        FidelityRecord {
                            input_label: label,
                            f_full: r
                                .prepared
                                .ideal
                                .state
                                .inner_product(&e.state)?
                                .norm_sqr()
                                .min(1.0 + FIDELITY_SLACK),
                            f_phys: r.phys.fidelity(&e.state)?,
                            f_anc: r.anc.as_ref().map(|a| a.fidelity(&e.state)).transpose()?,
                            accepted: true,
                        }
                    }
                };
                return Ok((record, attempt + 1));
            }
            Err(Error::RerunsExhausted { attempts: config.max_reruns })
        })
        .collect::<Result<_>>()?;

    let attempts: usize = shots.iter().map(|(_, a)| a).sum();
    let records: Vec<FidelityRecord> = shots.into_iter().map(|(r, _)| r).collect();
    let full = summarize(&records.iter().map(|r| r.f_full).collect::<Vec<_>>());
    let phys = summarize(&records.iter().map(|r| r.f_phys).collect::<Vec<_>>());
    let anc_values: Vec<f64> = records.iter().filter_map(|r| r.f_anc).collect();
    let anc = (!anc_values.is_empty()).then(|| summarize(&anc_values));
    let acceptance_rate = if attempts == 0 { 1.0 } else { records.len() as f64 / attempts as f64 };
    Ok(CampaignResult { records, full, phys, anc, acceptance_rate })
}

/// One row of a training sweep.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p_anc: f64,
    pub rounds: usize,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
}

/// Mean ancilla-register fidelity measured at one `(p_anc, rounds)` point.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AncillaFidelityRow {
    pub p_anc: f64,
    pub rounds: usize,
    pub mean_f_anc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCriteria {
    pub min_accuracy: f64,
    pub max_std: f64,
    pub fidelity_rounds: Vec<usize>,
}

impl Default for ThresholdCriteria {
    fn default() -> Self {
        Self { min_accuracy: 0.90, max_std: 0.05, fidelity_rounds: vec![1, 2, 3, 5] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPoint {
    pub p_anc: f64,
    pub passes: bool,
    pub rows: Vec<SweepRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ThresholdOutcome {
    Found {
        p_anc: f64,
        /// Mean ancilla fidelity over the configured rounds, if measured.
        f_anc: Option<f64>,
    },
    Inconclusive {
        reason: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub outcome: ThresholdOutcome,
    /// Rounds value whose rows form the plateau.
    pub plateau_rounds: usize,
    pub points: Vec<ThresholdPoint>,
}

fn p_key(p: f64) -> i64 {
    (p * 1e9).round() as i64
}

/// Largest ancilla error rate below which training still plateaus at or
/// above `min_accuracy` with across-seed spread at most `max_std`.
///
/// The plateau is read at the largest `rounds` present in `sweep`. Points
/// are scanned in increasing `p_anc`; the threshold is the last point of the
/// initial passing run and must be followed by a failing point.
pub fn estimate_threshold(
    sweep: &[SweepRow],
    fidelities: &[AncillaFidelityRow],
    criteria: &ThresholdCriteria,
) -> ThresholdReport {
    let Some(plateau_rounds) = sweep.iter().map(|r| r.rounds).max() else {
        return ThresholdReport {
            outcome: ThresholdOutcome::Inconclusive { reason: "empty sweep".into() },
            plateau_rounds: 0,
            points: Vec::new(),
        };
    };
    let mut grouped: BTreeMap<i64, Vec<SweepRow>> = BTreeMap::new();
    for r in sweep.iter().filter(|r| r.rounds == plateau_rounds) {
        grouped.entry(p_key(r.p_anc)).or_default().push(*r);
    }
    let points: Vec<ThresholdPoint> = grouped
        .into_values()
        .map(|rows| ThresholdPoint {
            p_anc: rows[0].p_anc,
            passes: rows.iter().all(|r| r.mean_accuracy >= criteria.min_accuracy && r.std_accuracy <= criteria.max_std),
            rows,
        })
        .collect();

    let passing_run = points.iter().take_while(|p| p.passes).count();
    let outcome = if passing_run == 0 {
        ThresholdOutcome::Inconclusive { reason: "lowest p_anc in the sweep already fails".into() }
    } else if passing_run == points.len() {
        ThresholdOutcome::Inconclusive { reason: "no failing p_anc above the passing values".into() }
    } else {
        let p_anc = points[passing_run - 1].p_anc;
        let key = p_key(p_anc);
        let at: Vec<f64> = fidelities
            .iter()
            .filter(|f| p_key(f.p_anc) == key && criteria.fidelity_rounds.contains(&f.rounds))
            .map(|f| f.mean_f_anc)
            .collect();
        let f_anc = (!at.is_empty()).then(|| at.iter().sum::<f64>() / at.len() as f64);
        ThresholdOutcome::Found { p_anc, f_anc }
    };
    ThresholdReport { outcome, plateau_rounds, points }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vqc::build_logical_vqc;
    use crate::vqc::SyndromePlacement;
    use approx::assert_abs_diff_eq;

    fn plus() -> Statevector {
        let mut s = Statevector::zeros(1);
        s.apply_h(0).unwrap();
        s
    }

    #[test]
    fn uhlmann_reduces_to_overlap_for_pure_states() {
        let a = plus();
        let mut b = Statevector::zeros(1);
        b.apply_ry(0, 0.7).unwrap();
        let overlap = a.inner_product(&b).unwrap().norm_sqr();
        let f = mixed_fidelity(&a.reduced_density(&[0]).unwrap(), &b.reduced_density(&[0]).unwrap());
        assert_abs_diff_eq!(f, overlap, epsilon = 1e-10);
        let r = RegisterReference::new(&a, &[0]).unwrap().fidelity(&b).unwrap();
        assert_abs_diff_eq!(r, overlap, epsilon = 1e-10);
    }

    #[test]
    fn mixed_fidelity_of_maximally_mixed() {
        let mut bell = Statevector::zeros(2);
        bell.apply_h(0).unwrap();
        bell.apply_cnot(0, 1).unwrap();
        let rho = bell.reduced_density(&[0]).unwrap();
        let zero = Statevector::zeros(1).reduced_density(&[0]).unwrap();
        assert_abs_diff_eq!(mixed_fidelity(&rho, &zero), 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(mixed_fidelity(&rho, &rho), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn record_examples_on_codewords() {
        use crate::exec::run_clean;
        let v = build_logical_vqc(LogicalLabel::new(0), 0.0, &SyndromePlacement::rounds(0)).unwrap();
        let ideal = run_clean(&v.program).unwrap();
        let phys = v.block.to_vec();
        let anc = v.rotation_ancillas();
        let same = record_fidelity(&ideal, &ideal, &phys, &anc, LogicalLabel::new(0)).unwrap();
        assert_abs_diff_eq!(same.f_full, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(same.f_phys, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(same.f_anc.unwrap(), 1.0, epsilon = 1e-9);

        let mut all_x = ideal.clone();
        for s in all_x.slots_of(&phys).unwrap() {
            all_x.state.apply_x(s).unwrap();
        }
        let r = record_fidelity(&all_x, &ideal, &phys, &anc, LogicalLabel::new(0)).unwrap();
        assert_abs_diff_eq!(r.f_full, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(r.f_phys, 1.0, epsilon = 1e-9);

        let mut one_x = ideal.clone();
        one_x.state.apply_x(one_x.slot(phys[0]).unwrap()).unwrap();
        let r = record_fidelity(&one_x, &ideal, &phys, &anc, LogicalLabel::new(0)).unwrap();
        assert_abs_diff_eq!(r.f_full, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn summary_consistency() {
        let values = [0.0, 0.01, 0.019, 0.02, 0.5, 0.981, 1.0, 1.0 + 1e-10];
        let s = summarize(&values);
        assert_eq!(s.count, 8);
        assert_eq!(s.histogram.iter().sum::<usize>(), 8);
        assert_eq!(s.histogram[0] as f64 / 8.0, s.frac_below_002);
        assert_eq!(s.frac_below_002, 3.0 / 8.0);
        assert_eq!(s.frac_above_098, 3.0 / 8.0);
        assert_eq!(s.histogram[49], 3);
    }

    #[test]
    fn synthetic_threshold() {
        let ps = [0.001, 0.002, 0.003, 0.004, 0.005];
        let sweep: Vec<SweepRow> = ps
            .iter()
            .flat_map(|&p| {
                let acc = if p <= 0.003 + 1e-12 { 0.96 } else { 0.80 };
                [
                    SweepRow { p_anc: p, rounds: 5, mean_accuracy: acc, std_accuracy: 0.01 },
                    SweepRow { p_anc: p, rounds: 1, mean_accuracy: 0.5, std_accuracy: 0.2 },
                ]
            })
            .collect();
        let fids: Vec<AncillaFidelityRow> = [1, 2, 3, 5, 4]
            .iter()
            .map(|&r| AncillaFidelityRow {
                p_anc: 0.003,
                rounds: r,
                mean_f_anc: if r == 4 { 0.0 } else { 0.8 + r as f64 * 0.01 },
            })
            .collect();
        let report = estimate_threshold(&sweep, &fids, &ThresholdCriteria::default());
        assert_eq!(report.plateau_rounds, 5);
        match report.outcome {
            ThresholdOutcome::Found { p_anc, f_anc } => {
                assert_eq!(p_anc, 0.003);
                assert_abs_diff_eq!(f_anc.unwrap(), 0.8275, epsilon = 1e-12);
            }
            other => panic!("{other:?}"),
        }

        let all_pass: Vec<SweepRow> = sweep.iter().map(|r| SweepRow { mean_accuracy: 0.99, ..*r }).collect();
        assert!(matches!(
            estimate_threshold(&all_pass, &[], &ThresholdCriteria::default()).outcome,
            ThresholdOutcome::Inconclusive { .. }
        ));
        let noisy: Vec<SweepRow> = sweep.iter().map(|r| SweepRow { std_accuracy: 0.2, ..*r }).collect();
        assert!(matches!(
            estimate_threshold(&noisy, &[], &ThresholdCriteria::default()).outcome,
            ThresholdOutcome::Inconclusive { .. }
        ));
    }
}
