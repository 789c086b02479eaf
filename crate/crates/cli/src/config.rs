//! Experiment configuration: TOML with explicit physics grids.
//!
//! Physics parameters have no defaults. Only shot counts, the seed count,
//! threshold criteria and run plumbing (workers, output directory) do.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use qvl_core::fidelity::ThresholdCriteria;
use qvl_core::noise::NoiseModel;
use qvl_core::training::{ShotMode, ShotPolicy, ThetaInit};
use qvl_core::vqc::MAX_ROUNDS;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridSection,
    pub noise: NoiseSection,
    #[serde(default)]
    pub shots: ShotSection,
    pub train: TrainSection,
    pub fidelity: FidelitySection,
    #[serde(default)]
    pub threshold: ThresholdSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub models: Vec<NoiseModel>,
    pub p_phys: Vec<f64>,
    pub f_anc: Vec<f64>,
    /// Syndrome rounds of the encoded circuit.
    pub rounds: Vec<usize>,
    /// Also run the unencoded two-qubit circuit at each noise point.
    pub include_bare: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub seed: u64,
    pub injection_period: usize,
    pub noisy_preparation: bool,
    pub noisy_extraction: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShotSection {
    #[serde(default = "default_shots")]
    pub shots: usize,
    #[serde(default = "default_mode")]
    pub mode: ShotMode,
    #[serde(default = "default_max_reruns")]
    pub max_reruns: usize,
}

fn default_shots() -> usize {
    1000
}

fn default_mode() -> ShotMode {
    ShotMode::PerExecution
}

fn default_max_reruns() -> usize {
    100_000
}

impl Default for ShotSection {
    fn default() -> Self {
        Self { shots: default_shots(), mode: default_mode(), max_reruns: default_max_reruns() }
    }
}

impl ShotSection {
    pub fn policy(&self) -> ShotPolicy {
        ShotPolicy { shots: self.shots, mode: self.mode, max_reruns: self.max_reruns }
    }
}

/// `seeds = 10` means seeds 0..10; a list names them explicitly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    Count(u64),
    List(Vec<u64>),
}

impl Default for SeedSpec {
    fn default() -> Self {
        SeedSpec::Count(10)
    }
}

impl SeedSpec {
    pub fn seeds(&self, offset: u64) -> Vec<u64> {
        match self {
            SeedSpec::Count(n) => (0..*n).map(|s| s.wrapping_add(offset)).collect(),
            SeedSpec::List(v) => v.iter().map(|s| s.wrapping_add(offset)).collect(),
        }
    }
}

/// `"uniform"` or a fixed starting angle in radians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitSpec {
    Fixed(f64),
    Named(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default)]
    pub seeds: SeedSpec,
    pub iterations: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub fd_step: f64,
    pub theta_init: InitSpec,
}

impl TrainSection {
    pub fn theta_init(&self) -> Result<ThetaInit> {
        match &self.theta_init {
            InitSpec::Fixed(t) if t.is_finite() => Ok(ThetaInit::Fixed(*t)),
            InitSpec::Fixed(t) => bail!("train.theta_init: {t} is not finite"),
            InitSpec::Named(s) if s == "uniform" => Ok(ThetaInit::Uniform),
            InitSpec::Named(s) => bail!("train.theta_init: expected \"uniform\" or a number, got \"{s}\""),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FidelitySection {
    /// Angle at which states are compared.
    pub theta: f64,
    /// Accepted shots per grid point, split evenly over the four inputs.
    #[serde(default = "default_fidelity_shots")]
    pub shots: usize,
}

fn default_fidelity_shots() -> usize {
    4000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSection {
    #[serde(default = "default_min_accuracy")]
    pub min_accuracy: f64,
    #[serde(default = "default_max_std")]
    pub max_std: f64,
    #[serde(default = "default_fidelity_rounds")]
    pub fidelity_rounds: Vec<usize>,
}

fn default_min_accuracy() -> f64 {
    ThresholdCriteria::default().min_accuracy
}

fn default_max_std() -> f64 {
    ThresholdCriteria::default().max_std
}

fn default_fidelity_rounds() -> Vec<usize> {
    ThresholdCriteria::default().fidelity_rounds
}

impl Default for ThresholdSection {
    fn default() -> Self {
        Self {
            min_accuracy: default_min_accuracy(),
            max_std: default_max_std(),
            fidelity_rounds: default_fidelity_rounds(),
        }
    }
}

impl ThresholdSection {
    pub fn criteria(&self) -> ThresholdCriteria {
        ThresholdCriteria {
            min_accuracy: self.min_accuracy,
            max_std: self.max_std,
            fidelity_rounds: self.fidelity_rounds.clone(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

pub const DESK_PRESET: &str = include_str!("../presets/desk.toml");
pub const PAPER_PRESET: &str = include_str!("../presets/paper.toml");

impl ExperimentConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).with_context(|| format!("invalid config {origin}"))?;
        config.validate().with_context(|| format!("invalid config {origin}"))?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Self::parse(DESK_PRESET, "preset desk"),
            "paper" => Self::parse(PAPER_PRESET, "preset paper"),
            _ => bail!("unknown preset {name:?} (expected desk or paper)"),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if g.models.is_empty() {
            bail!("grid.models: at least one model is required");
        }
        if g.p_phys.is_empty() || g.f_anc.is_empty() {
            bail!("grid.p_phys and grid.f_anc must be non-empty");
        }
        if g.rounds.is_empty() && !g.include_bare {
            bail!("grid.rounds is empty and grid.include_bare is false: nothing to run");
        }
        for &p in &g.p_phys {
            if !(0.0..=1.0).contains(&p) {
                bail!("grid.p_phys: {p} outside [0, 1]");
            }
        }
        for &f in &g.f_anc {
            if !f.is_finite() || f < 0.0 {
                bail!("grid.f_anc: {f} must be a finite non-negative number");
            }
            for &p in &g.p_phys {
                if p * f > 1.0 {
                    bail!("grid: p_phys {p} × f_anc {f} exceeds 1");
                }
                // Two-qubit gates apply twice the rate to each operand.
                if g.models.contains(&NoiseModel::GateNoise) && 2.0 * p * f.max(1.0) > 1.0 {
                    bail!("grid: gate noise at p_phys {p}, f_anc {f} puts a two-qubit-gate rate above 1");
                }
            }
        }
        for &r in &g.rounds {
            if r > MAX_ROUNDS {
                bail!("grid.rounds: {r} exceeds the maximum of {MAX_ROUNDS}");
            }
        }
        distinct("grid.models", g.models.iter().map(|m| m.as_str().to_string()))?;
        distinct("grid.p_phys", g.p_phys.iter().map(|p| p.to_bits().to_string()))?;
        distinct("grid.f_anc", g.f_anc.iter().map(|f| f.to_bits().to_string()))?;
        distinct("grid.rounds", g.rounds.iter().map(|r| r.to_string()))?;
        if self.noise.injection_period == 0 {
            bail!("noise.injection_period must be at least 1");
        }
        if self.shots.shots == 0 || self.shots.max_reruns == 0 {
            bail!("shots.shots and shots.max_reruns must be at least 1");
        }
        let seeds = self.train.seeds.seeds(0);
        if seeds.is_empty() {
            bail!("train.seeds: at least one seed is required");
        }
        distinct("train.seeds", seeds.iter().map(|s| s.to_string()))?;
        let t = &self.train;
        if t.iterations == 0 {
            bail!("train.iterations must be at least 1");
        }
        if t.batch_size == 0 || t.batch_size > qvl_core::training::TRAIN_SIZE {
            bail!("train.batch_size must be in 1..={}", qvl_core::training::TRAIN_SIZE);
        }
        if !t.learning_rate.is_finite() || !t.fd_step.is_finite() || t.fd_step <= 0.0 {
            bail!("train.learning_rate must be finite and train.fd_step positive");
        }
        t.theta_init()?;
        if !self.fidelity.theta.is_finite() {
            bail!("fidelity.theta must be finite");
        }
        if self.fidelity.shots == 0 || !self.fidelity.shots.is_multiple_of(4) {
            bail!("fidelity.shots must be a positive multiple of 4 (one share per input)");
        }
        if self.run.workers == Some(0) {
            bail!("run.workers must be at least 1");
        }
        Ok(())
    }
}

fn distinct(field: &str, values: impl Iterator<Item = String>) -> Result<()> {
    let mut seen = BTreeSet::new();
    for v in values {
        if !seen.insert(v) {
            bail!("{field}: duplicate values");
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_round_trip() {
        for name in ["desk", "paper"] {
            let c = ExperimentConfig::preset(name).unwrap();
            let again = ExperimentConfig::parse(&c.to_toml(), "snapshot").unwrap();
            assert_eq!(c, again);
        }
        let desk = ExperimentConfig::preset("desk").unwrap();
        assert_eq!(desk.shots.shots, 200);
        assert_eq!(desk.train.seeds.seeds(0).len(), 3);
        assert_eq!(ExperimentConfig::preset("paper").unwrap().train.seeds.seeds(0).len(), 10);
    }

    fn desk_with(edit: impl Fn(&mut toml::Table)) -> Result<ExperimentConfig> {
        let mut t: toml::Table = toml::from_str(DESK_PRESET).unwrap();
        edit(&mut t);
        ExperimentConfig::parse(&toml::to_string(&t).unwrap(), "test")
    }

    fn section<'a>(t: &'a mut toml::Table, name: &str) -> &'a mut toml::Table {
        t.get_mut(name).unwrap().as_table_mut().unwrap()
    }

    fn err(r: Result<ExperimentConfig>) -> String {
        format!("{:#}", r.unwrap_err())
    }

    #[test]
    fn physics_parameters_are_required() {
        let e = err(desk_with(|t| {
            section(t, "noise").remove("injection_period");
        }));
        assert!(e.contains("injection_period"), "{e}");
        let e = err(desk_with(|t| {
            section(t, "grid").remove("p_phys");
        }));
        assert!(e.contains("p_phys"), "{e}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let e = err(desk_with(|t| {
            section(t, "train").insert("learnin_rate".into(), 0.1.into());
        }));
        assert!(e.contains("learnin_rate"), "{e}");
    }

    #[test]
    fn syntax_errors_carry_the_line() {
        let text = DESK_PRESET.replacen("p_phys = [", "p_phys = [[", 1);
        let e = err(ExperimentConfig::parse(&text, "broken.toml"));
        assert!(e.contains("broken.toml") && e.contains("line"), "{e}");
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        let cases: [(&str, &str, toml::Value); 7] = [
            ("grid", "p_phys", vec![toml::Value::from(1.5)].into()),
            ("grid", "p_phys", vec![toml::Value::from(0.6)].into()),
            ("grid", "rounds", vec![toml::Value::from(6)].into()),
            ("grid", "f_anc", vec![toml::Value::from(0.5), toml::Value::from(0.5)].into()),
            ("train", "seeds", vec![toml::Value::from(1), toml::Value::from(1)].into()),
            ("train", "theta_init", "gaussian".into()),
            ("fidelity", "shots", 1001.into()),
        ];
        for (s, k, v) in cases {
            assert!(desk_with(|t| {
                section(t, s).insert(k.into(), v.clone());
            })
            .is_err());
        }
    }

    #[test]
    fn seed_offset_shifts_every_seed() {
        assert_eq!(SeedSpec::Count(3).seeds(10), vec![10, 11, 12]);
        assert_eq!(SeedSpec::List(vec![4, 9]).seeds(1), vec![5, 10]);
    }
}
