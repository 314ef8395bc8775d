//! Experiment configuration, read from TOML.

use std::path::{Path, PathBuf};

use qae_core::optics::DEFAULT_SCRAMBLER_RETARDANCE;
use qae_core::{build_mesh, Backend, DriftSchedule64, MeshLayout, PreparationFamily64, TrainerConfig64};
use serde::{Deserialize, Serialize};

use crate::seeds::{derive, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Fig3,
    Fig4,
    Fig5,
    Train,
    VerifyUnitaries,
    DecodeCheck,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Fig3 => "fig3",
            Experiment::Fig4 => "fig4",
            Experiment::Fig5 => "fig5",
            Experiment::Train => "train",
            Experiment::VerifyUnitaries => "verify-unitaries",
            Experiment::DecodeCheck => "decode-check",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenerationKind {
    #[default]
    Physical,
    Haar,
}

/// Which compressible family the training and test states come from.
/// Unset fields are derived from the master seed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FamilySpec {
    pub generation: GenerationKind,
    /// Degrees.
    pub scrambler_angle: Option<f64>,
    /// Radians.
    pub scrambler_retardance: Option<f64>,
    pub haar_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriftSpec {
    /// Degrees per drift event; fig5 runs both signs.
    pub step: f64,
    /// Cost evaluations per drift event.
    pub period: usize,
}

impl Default for DriftSpec {
    fn default() -> Self {
        Self { step: 4.0, period: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<Experiment>,
    pub seed: u64,
    pub d: usize,
    pub n: usize,
    pub backend: String,
    pub runs: usize,
    pub output: Option<PathBuf>,
    pub training_states: usize,
    /// Training preparations are redrawn until every pair of training
    /// states has `|<a|b>|^2` at or below this; 1 accepts any draw.
    pub max_training_overlap: f64,
    pub training_sizes: Vec<usize>,
    pub test_states: usize,
    /// A run counts as converged once it has measured a cost at or below this.
    pub convergence_threshold: f64,
    /// Fig. 3 stops a run at this cost if the trainer section sets none.
    pub fig3_early_stop: f64,
    pub drift_max_evals: usize,
    pub matrices: Option<PathBuf>,
    pub checks: usize,
    pub family: FamilySpec,
    pub trainer: TrainerConfig64,
    pub drift: DriftSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            seed: 0,
            d: 3,
            n: 2,
            backend: "exact".into(),
            runs: 20,
            output: None,
            training_states: 2,
            max_training_overlap: 0.5,
            training_sizes: vec![1, 2, 3],
            test_states: 20,
            convergence_threshold: 0.05,
            fig3_early_stop: 0.02,
            drift_max_evals: 600,
            matrices: None,
            checks: 1000,
            family: FamilySpec::default(),
            trainer: TrainerConfig64::default(),
            drift: DriftSpec::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config syntax: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("{0}")]
    Invalid(String),
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn backend(&self) -> Result<Backend, ConfigError> {
        self.backend
            .parse()
            .map_err(|e| ConfigError::Invalid(format!("backend: {e}")))
    }

    pub fn layout(&self) -> Result<MeshLayout, ConfigError> {
        build_mesh(self.d, self.n).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn drift_schedule(&self, sign: f64) -> DriftSchedule64 {
        DriftSchedule64::every(self.drift.period, sign * self.drift.step)
    }

    /// The family for this master seed.
    pub fn family(&self) -> Result<PreparationFamily64, ConfigError> {
        let family_seed = derive(self.seed, Stream::Family, 0);
        let drawn = PreparationFamily64::physical_from_seed(family_seed);
        let angle = self.family.scrambler_angle.unwrap_or(drawn.scrambler_angle);
        let retardance = self.family.scrambler_retardance.unwrap_or(DEFAULT_SCRAMBLER_RETARDANCE);
        match self.family.generation {
            GenerationKind::Physical => {
                if (self.d, self.n) != (3, 2) {
                    return Err(ConfigError::Invalid(format!(
                        "the physical family is a qutrit family compressible to a qubit; \
                         use generation = \"haar\" for d = {}, n = {}",
                        self.d, self.n
                    )));
                }
                Ok(PreparationFamily64::physical(angle, retardance))
            }
            GenerationKind::Haar => {
                let seed = self.family.haar_seed.unwrap_or(family_seed);
                PreparationFamily64::haar(self.d, self.n, seed, angle, retardance)
                    .map_err(|e| ConfigError::Invalid(e.to_string()))
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        self.layout()?;
        self.backend()?;
        if !matches!(
            self.experiment,
            Some(Experiment::VerifyUnitaries | Experiment::DecodeCheck)
        ) {
            self.family()?;
        }
        self.trainer
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("trainer: {e}")))?;
        self.drift_schedule(1.0)
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("drift: {e}")))?;
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if self.training_states == 0 || self.test_states == 0 {
            return bad("training_states and test_states must be at least 1".into());
        }
        if self.training_sizes.is_empty() || self.training_sizes.contains(&0) {
            return bad("training_sizes must be non-empty and positive".into());
        }
        if !(0.0..=1.0).contains(&self.convergence_threshold) || !(0.0..=1.0).contains(&self.fig3_early_stop) {
            return bad("thresholds must lie in [0, 1]".into());
        }
        if !(self.max_training_overlap > 0.0 && self.max_training_overlap <= 1.0) {
            return bad("max_training_overlap must lie in (0, 1]".into());
        }
        if self.drift_max_evals == 0 {
            return bad("drift_max_evals must be at least 1".into());
        }
        if self.checks == 0 {
            return bad("checks must be at least 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_valid_defaults() {
        let c = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        c.validate().unwrap();
        assert_eq!(c.trainer.s_coarse, 12.0);
        assert_eq!(c.trainer.max_evals, 200);
    }

    #[test]
    fn nested_sections() {
        let c = ExperimentConfig::from_toml(
            r#"
            experiment = "verify-unitaries"
            seed = 9
            backend = "sampled:10000"

            [family]
            scrambler_angle = 30.0

            [trainer]
            max_evals = 50
            early_stop = 0.01

            [drift]
            step = 2.5
            "#,
        )
        .unwrap();
        c.validate().unwrap();
        assert_eq!(c.experiment, Some(Experiment::VerifyUnitaries));
        assert_eq!(c.backend().unwrap(), Backend::Sampled { shots: 10_000 });
        assert_eq!(c.family().unwrap().scrambler_angle, 30.0);
        assert_eq!(c.trainer.early_stop, Some(0.01));
        assert_eq!(c.trainer.s_fine, 5.0);
        assert_eq!(c.drift, DriftSpec { step: 2.5, period: 5 });
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            "backend = \"nope\"",
            "d = 3\nn = 3",
            "d = 4\nn = 2",
            "runs = 0",
            "max_training_overlap = 0.0",
            "training_sizes = []",
            "[trainer]\nfine_threshold = 2.0",
            "[drift]\nperiod = 0",
        ] {
            let c = ExperimentConfig::from_toml(text).unwrap();
            assert!(c.validate().is_err(), "{text}");
        }
        assert!(ExperimentConfig::from_toml("unknown_key = 1").is_err());
        assert!(ExperimentConfig::from_toml("seed = \"x\"").is_err());
    }

    #[test]
    fn family_only_checked_where_used() {
        let mut c = ExperimentConfig::from_toml("d = 4\nn = 2").unwrap();
        assert!(c.validate().is_err());
        c.experiment = Some(Experiment::DecodeCheck);
        c.validate().unwrap();
    }

    #[test]
    fn haar_family_for_larger_dims() {
        let c = ExperimentConfig::from_toml("d = 5\nn = 2\n[family]\ngeneration = \"haar\"").unwrap();
        c.validate().unwrap();
        let f = c.family().unwrap();
        assert_eq!((f.dim, f.keep), (5, 2));
    }

    #[test]
    fn family_depends_only_on_master_seed() {
        let a = ExperimentConfig {
            seed: 4,
            ..Default::default()
        };
        let b = ExperimentConfig {
            seed: 4,
            runs: 3,
            ..Default::default()
        };
        assert_eq!(a.family().unwrap(), b.family().unwrap());
        let c = ExperimentConfig {
            seed: 5,
            ..Default::default()
        };
        assert_ne!(a.family().unwrap(), c.family().unwrap());
    }
}
