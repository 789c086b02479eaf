//! Parity-classifier training: dataset, shot-based expectation estimates,
//! loss and finite-difference gradient descent on the single angle.

use std::f64::consts::TAU;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::exec::MeasurePolicy;
use crate::noise::NoiseConfig;
use crate::rng::{tag, StreamPath};
use crate::trajectory::{run_trajectory, Architecture, PreparedCircuit};
use crate::{Error, Result};

pub const UNIQUE_POINTS: [(u8, u8); 4] = [(0, 0), (0, 1), (1, 0), (1, 1)];
pub const DATASET_COPIES: usize = 10;
pub const TRAIN_SIZE: usize = 24;
pub const TEST_SIZE: usize = 16;
/// Iterations whose accuracies enter the final-accuracy mean (1-based,
/// inclusive).
pub const FINAL_WINDOW: (usize, usize) = (61, 100);

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSample {
    pub x: (u8, u8),
    pub y: u8,
}

impl DataSample {
    pub fn new(x: (u8, u8)) -> Self {
        Self { x, y: x.0 ^ x.1 }
    }

    pub fn y_signed(&self) -> f64 {
        if self.y == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Position of `x` in [`UNIQUE_POINTS`].
    pub fn point(&self) -> usize {
        ((self.x.0 << 1) | self.x.1) as usize
    }
}

/// The four parity points ten times each, shuffled by `seed`, split 24/16.
pub fn build_dataset(seed: u64) -> (Vec<DataSample>, Vec<DataSample>) {
    let mut all: Vec<DataSample> =
        (0..DATASET_COPIES).flat_map(|_| UNIQUE_POINTS.iter().map(|&x| DataSample::new(x))).collect();
    all.shuffle(&mut StreamPath::root(seed).rng_at(&[tag::DATASET]));
    let test = all.split_off(TRAIN_SIZE);
    (all, test)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShotMode {
    /// Every shot is its own noisy trajectory; flagged shots are rerun.
    #[serde(rename = "per-shot")]
    PerShotSampling,
    /// `shots` trajectories, each projected onto trivial syndromes, with
    /// exact readout probabilities weighted by their acceptance probability.
    #[serde(rename = "exact")]
    ExactPostSelected,
    /// One noisy trajectory per estimate (rerun until accepted), read out
    /// with `shots` samples.
    #[serde(rename = "per-execution")]
    PerExecution,
}

impl ShotMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ShotMode::PerShotSampling => "per-shot",
            ShotMode::ExactPostSelected => "exact",
            ShotMode::PerExecution => "per-execution",
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotPolicy {
    pub shots: usize,
    pub mode: ShotMode,
    pub max_reruns: usize,
}

impl Default for ShotPolicy {
    fn default() -> Self {
        Self { shots: 1000, mode: ShotMode::PerExecution, max_reruns: 100_000 }
    }
}

impl ShotPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.shots == 0 {
            return Err(Error::InvalidArgument("shots must be at least 1".into()));
        }
        if self.max_reruns == 0 {
            return Err(Error::InvalidArgument("max_reruns must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub expectation: f64,
    /// Accepted over attempted trajectories (mean post-selection weight in
    /// exact mode).
    pub acceptance_rate: f64,
    pub attempts: usize,
    /// 1 if the readout carried no codeword support and `expectation` was
    /// set to 0.
    pub undecodable: usize,
}

/// Samples `shots` outcomes from `probs` into a count table.
fn sample_counts<R: Rng + ?Sized>(probs: &[f64], shots: usize, rng: &mut R) -> Vec<f64> {
    let mut cumulative = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in probs {
        acc += p;
        cumulative.push(acc);
    }
    let mut counts = vec![0.0; probs.len()];
    for _ in 0..shots {
        let u: f64 = rng.random::<f64>() * acc;
        let k = cumulative.partition_point(|&c| c <= u).min(probs.len() - 1);
        counts[k] += 1.0;
    }
    counts
}

fn finish(prepared: &PreparedCircuit, weights: &[f64], acceptance_rate: f64, attempts: usize) -> Estimate {
    match prepared.expectation(weights) {
        Ok(z) => Estimate { expectation: z.clamp(-1.0, 1.0), acceptance_rate, attempts, undecodable: 0 },
        Err(_) => Estimate { expectation: 0.0, acceptance_rate, attempts, undecodable: 1 },
    }
}

/// Estimates `⟨Z⟩` for a prepared circuit. All randomness descends from
/// `stream`, one child stream per trajectory.
pub fn estimate_prepared(
    prepared: &PreparedCircuit,
    noise: &NoiseConfig,
    policy: &ShotPolicy,
    stream: &StreamPath,
) -> Result<Estimate> {
    policy.validate()?;
    noise.validate()?;
    let silent = noise.is_silent();
    match policy.mode {
        ShotMode::ExactPostSelected => {
            if silent {
                return Ok(finish(prepared, &prepared.ideal_readout, 1.0, 1));
            }
            let parts: Vec<(f64, Vec<f64>)> = (0..policy.shots)
                .into_par_iter()
                .map(|t| {
                    let mut rng = stream.rng_at(&[tag::TRAJECTORY, t as u64]);
                    let traj = run_trajectory(prepared, noise, MeasurePolicy::PostSelect, &mut rng)?;
                    if traj.weight == 0.0 {
                        return Ok((0.0, Vec::new()));
                    }
                    Ok((traj.weight, traj.readout_distribution(prepared)?))
                })
                .collect::<Result<_>>()?;
            let mut total = vec![0.0; prepared.ideal_readout.len()];
            let mut weight = 0.0;
            for (w, probs) in &parts {
                weight += w;
                for (t, p) in total.iter_mut().zip(probs) {
                    *t += w * p;
                }
            }
            if weight == 0.0 {
                return Err(Error::RerunsExhausted { attempts: policy.shots });
            }
            Ok(finish(prepared, &total, weight / policy.shots as f64, policy.shots))
        }
        ShotMode::PerExecution => {
            let mut rng = stream.rng_at(&[tag::READOUT]);
            if silent {
                let counts = sample_counts(&prepared.ideal_readout, policy.shots, &mut rng);
                return Ok(finish(prepared, &counts, 1.0, 1));
            }
            for attempt in 0..policy.max_reruns {
                let mut trng = stream.rng_at(&[tag::TRAJECTORY, attempt as u64]);
                let traj = run_trajectory(prepared, noise, MeasurePolicy::SampleAbortOnFlag, &mut trng)?;
                if !traj.accepted {
                    continue;
                }
                let probs = traj.readout_distribution(prepared)?;
                let counts = sample_counts(&probs, policy.shots, &mut rng);
                return Ok(finish(prepared, &counts, 1.0 / (attempt + 1) as f64, attempt + 1));
            }
            Err(Error::RerunsExhausted { attempts: policy.max_reruns })
        }
        ShotMode::PerShotSampling => {
            let per_shot: Vec<(usize, usize)> = (0..policy.shots)
                .into_par_iter()
                .map(|shot| {
                    let base = stream.child(&[tag::TRAJECTORY, shot as u64]);
                    let mut rng = base.rng();
                    for attempt in 0..policy.max_reruns {
                        let traj = if silent {
                            None
                        } else {
                            Some(run_trajectory(prepared, noise, MeasurePolicy::SampleAbortOnFlag, &mut rng)?)
                        };
                        if traj.as_ref().is_some_and(|t| !t.accepted) {
                            continue;
                        }
                        let probs = match &traj {
                            Some(t) => t.readout_distribution(prepared)?,
                            None => prepared.ideal_readout.clone(),
                        };
                        let counts = sample_counts(&probs, 1, &mut rng);
                        let outcome = counts.iter().position(|&c| c > 0.0).unwrap_or(0);
                        return Ok((outcome, attempt + 1));
                    }
                    Err(Error::RerunsExhausted { attempts: policy.max_reruns })
                })
                .collect::<Result<_>>()?;
            let mut counts = vec![0.0; prepared.ideal_readout.len()];
            let mut attempts = 0;
            for &(outcome, a) in &per_shot {
                counts[outcome] += 1.0;
                attempts += a;
            }
            Ok(finish(prepared, &counts, policy.shots as f64 / attempts as f64, attempts))
        }
    }
}

/// Builds the circuit for `input` at `theta` and estimates its `⟨Z⟩`.
pub fn estimate_expectation(
    input: (u8, u8),
    theta: f64,
    architecture: &Architecture,
    noise: &NoiseConfig,
    policy: &ShotPolicy,
    stream: &StreamPath,
) -> Result<Estimate> {
    let prepared = PreparedCircuit::new(architecture, input, theta)?;
    estimate_prepared(&prepared, noise, policy, stream)
}

/// Mean squared error against the signed labels.
pub fn loss(expectations: &[f64], batch: &[DataSample]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("loss over an empty batch".into()));
    }
    if expectations.len() != batch.len() {
        return Err(Error::InvalidArgument(format!("{} expectations for {} samples", expectations.len(), batch.len())));
    }
    Ok(expectations.iter().zip(batch).map(|(e, s)| (e - s.y_signed()).powi(2)).sum::<f64>() / batch.len() as f64)
}

/// Fraction of samples with `sign(⟨Z⟩) = y_signed`; zero counts as wrong.
pub fn accuracy(expectations: &[f64], samples: &[DataSample]) -> f64 {
    let correct = expectations.iter().zip(samples).filter(|(e, s)| **e * s.y_signed() > 0.0).count();
    correct as f64 / samples.len() as f64
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value")]
pub enum ThetaInit {
    /// Uniform on `[0, 2π)` from the run's stream.
    #[serde(rename = "uniform")]
    Uniform,
    #[serde(rename = "fixed")]
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub architecture: Architecture,
    pub noise: NoiseConfig,
    pub policy: ShotPolicy,
    pub iterations: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub fd_step: f64,
    pub theta_init: ThetaInit,
}

impl TrainConfig {
    pub fn new(architecture: Architecture, noise: NoiseConfig, policy: ShotPolicy) -> Self {
        Self {
            architecture,
            noise,
            policy,
            iterations: 100,
            batch_size: 8,
            learning_rate: 0.5,
            fd_step: 0.1,
            theta_init: ThetaInit::Uniform,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        self.policy.validate()?;
        if self.batch_size == 0 || self.batch_size > TRAIN_SIZE {
            return Err(Error::InvalidArgument(format!("batch size must be in 1..={TRAIN_SIZE}")));
        }
        if !(self.learning_rate.is_finite() && self.fd_step.is_finite() && self.fd_step > 0.0) {
            return Err(Error::InvalidArgument("learning rate and finite-difference step must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Angle after this iteration's update.
    pub theta: f64,
    /// Training-set loss at `theta`.
    pub loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub acceptance_rate: f64,
    pub undecodable: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub theta: f64,
    pub iteration: usize,
    pub accuracy_history: Vec<f64>,
    pub loss_history: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub seed: u64,
    pub config: TrainConfig,
    pub initial_theta: f64,
    pub history: Vec<IterationRecord>,
}

impl ExperimentRecord {
    pub fn accuracies(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.train_accuracy).collect()
    }
}

fn prepare_all(architecture: &Architecture, theta: f64) -> Result<Vec<PreparedCircuit>> {
    UNIQUE_POINTS.iter().map(|&x| PreparedCircuit::new(architecture, x, theta)).collect()
}

fn estimate_samples(
    prepared: &[PreparedCircuit],
    samples: &[DataSample],
    config: &TrainConfig,
    stream: &StreamPath,
) -> Result<Vec<Estimate>> {
    samples
        .par_iter()
        .enumerate()
        .map(|(j, s)| {
            estimate_prepared(&prepared[s.point()], &config.noise, &config.policy, &stream.child(&[j as u64]))
        })
        .collect()
}

/// Mini-batch gradient descent on θ with a central finite-difference
/// gradient. Returns the final state and the full per-iteration record.
pub fn train(config: &TrainConfig, seed: u64) -> Result<(TrainState, ExperimentRecord)> {
    config.validate()?;
    let (train_set, test_set) = build_dataset(seed);
    let root = StreamPath::root(config.noise.seed).child(&[seed]);
    let initial_theta = match config.theta_init {
        ThetaInit::Uniform => root.rng_at(&[tag::THETA_INIT]).random_range(0.0..TAU),
        ThetaInit::Fixed(t) => t,
    };
    let mut theta = initial_theta;
    let mut history = Vec::with_capacity(config.iterations);
    for t in 1..=config.iterations as u64 {
        let mut batch_rng = root.rng_at(&[tag::BATCH, t]);
        let batch: Vec<DataSample> =
            index::sample(&mut batch_rng, TRAIN_SIZE, config.batch_size).into_iter().map(|i| train_set[i]).collect();
        let est = root.child(&[tag::ESTIMATE, t]);
        let plus = prepare_all(&config.architecture, theta + config.fd_step)?;
        let minus = prepare_all(&config.architecture, theta - config.fd_step)?;
        // Both sides share one stream: the program layout does not depend on
        // θ, so they see the same faults and the difference isolates θ.
        let e_plus = estimate_samples(&plus, &batch, config, &est.child(&[0]))?;
        let e_minus = estimate_samples(&minus, &batch, config, &est.child(&[0]))?;
        let z = |es: &[Estimate]| es.iter().map(|e| e.expectation).collect::<Vec<_>>();
        let gradient = (loss(&z(&e_plus), &batch)? - loss(&z(&e_minus), &batch)?) / (2.0 * config.fd_step);
        theta -= config.learning_rate * gradient;

        let here = prepare_all(&config.architecture, theta)?;
        let e_train = estimate_samples(&here, &train_set, config, &est.child(&[2]))?;
        let e_test = estimate_samples(&here, &test_set, config, &est.child(&[3]))?;
        let evaluated: Vec<&Estimate> = e_train.iter().chain(&e_test).collect();
        history.push(IterationRecord {
            iteration: t as usize,
            theta,
            loss: loss(&z(&e_train), &train_set)?,
            train_accuracy: accuracy(&z(&e_train), &train_set),
            test_accuracy: accuracy(&z(&e_test), &test_set),
            acceptance_rate: evaluated.iter().map(|e| e.acceptance_rate).sum::<f64>() / evaluated.len() as f64,
            undecodable: evaluated.iter().map(|e| e.undecodable).sum(),
        });
    }
    let state = TrainState {
        theta,
        iteration: history.len(),
        accuracy_history: history.iter().map(|r| r.train_accuracy).collect(),
        loss_history: history.iter().map(|r| r.loss).collect(),
    };
    Ok((state, ExperimentRecord { seed, config: config.clone(), initial_theta, history }))
}

/// Mean and population standard deviation of `values`.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per-record mean training accuracy over iterations 61–100, then mean and
/// population standard deviation across records.
pub fn mean_final_accuracy(histories: &[Vec<f64>]) -> Result<(f64, f64)> {
    if histories.is_empty() {
        return Err(Error::InvalidArgument("no records".into()));
    }
    let (lo, hi) = FINAL_WINDOW;
    let mut per_record = Vec::with_capacity(histories.len());
    for h in histories {
        if h.len() < hi {
            return Err(Error::InvalidArgument(format!("history of {} iterations, need at least {hi}", h.len())));
        }
        let window = &h[lo - 1..hi];
        per_record.push(window.iter().sum::<f64>() / window.len() as f64);
    }
    Ok(mean_std(&per_record))
}
