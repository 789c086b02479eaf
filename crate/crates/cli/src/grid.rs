//! Expansion of a config into independent grid points.

use anyhow::Result;

use qvl_core::noise::{NoiseConfig, NoiseModel};
use qvl_core::trajectory::Architecture;

use crate::config::ExperimentConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct GridPoint {
    pub model: NoiseModel,
    pub p_phys: f64,
    pub f_anc: f64,
    /// `None` for the bare circuit.
    pub rounds: Option<usize>,
    pub noise: NoiseConfig,
}

impl GridPoint {
    pub fn p_anc(&self) -> f64 {
        self.p_phys * self.f_anc
    }

    pub fn architecture(&self) -> Result<Architecture> {
        Ok(match self.rounds {
            None => Architecture::Bare,
            Some(k) => Architecture::logical(k)?,
        })
    }

    pub fn architecture_name(&self) -> &'static str {
        if self.rounds.is_some() {
            "logical"
        } else {
            "bare"
        }
    }

    pub fn rounds_field(&self) -> String {
        self.rounds.map(|r| r.to_string()).unwrap_or_default()
    }

    /// File-name-safe identifier, unique within a grid.
    pub fn id(&self) -> String {
        let arch = match self.rounds {
            None => "bare".to_string(),
            Some(k) => format!("r{k}"),
        };
        format!("{}_p{}_f{}_{arch}", self.model.as_str(), self.p_phys, self.f_anc)
    }
}

/// Points in model, p_phys, f_anc, architecture order (bare first). The
/// noiseless model contributes one point per architecture.
pub fn expand(config: &ExperimentConfig, seed_offset: u64) -> Vec<GridPoint> {
    let mut archs: Vec<Option<usize>> = Vec::new();
    if config.grid.include_bare {
        archs.push(None);
    }
    archs.extend(config.grid.rounds.iter().map(|&r| Some(r)));
    let mut points = Vec::new();
    for &model in &config.grid.models {
        let pairs: Vec<(f64, f64)> = if model == NoiseModel::None {
            vec![(0.0, 0.0)]
        } else {
            config.grid.p_phys.iter().flat_map(|&p| config.grid.f_anc.iter().map(move |&f| (p, f))).collect()
        };
        for (p_phys, f_anc) in pairs {
            for &rounds in &archs {
                let noise = NoiseConfig {
                    model,
                    p_phys,
                    f_anc,
                    injection_period: config.noise.injection_period,
                    seed: config.noise.seed.wrapping_add(seed_offset),
                    noisy_preparation: config.noise.noisy_preparation,
                    noisy_extraction: config.noise.noisy_extraction,
                };
                points.push(GridPoint { model, p_phys, f_anc, rounds, noise });
            }
        }
    }
    points
}
