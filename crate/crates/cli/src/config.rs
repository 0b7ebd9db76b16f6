use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, ensure, Context, Result};
use repack_core::clique::CliqueEffort;
use repack_core::driver::{DriverConfig, SolverBackend, DEFAULT_BUFFER, DEFAULT_ISOLATED_SLACK};
use repack_core::instance::{load_instance, Instance, InstanceFormat, SyntheticParams};
use repack_core::montecarlo::{TrialBackend, DEFAULT_TRIALS};
use repack_core::participation::ModelSpec;
use repack_core::sat::{ExternalSolver, EXTERNAL_SOLVER_ENV};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const DEFAULT_TIMEOUT_SECS: u64 = 60;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SolverChoice {
    #[default]
    Embedded,
    /// Command line taken from the external solver environment variable.
    External,
}

/// One experiment, read from TOML. Command-line flags override fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// CSV directory or canonical JSON file.
    pub instance: Option<PathBuf>,
    pub targets: Vec<u32>,
    pub use_domain_constraints: bool,
    pub buffers: Vec<usize>,
    pub slack: f64,
    pub samples: usize,
    pub models: Vec<ModelSpec>,
    /// When non-empty, `simulate` sweeps every alpha model over these values.
    pub alphas: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub backend: SolverChoice,
    pub trial_backend: TrialBackend,
    /// Per-solve budget; 0 disables it.
    pub timeout_secs: u64,
    /// Worker threads; `None` uses the available parallelism.
    pub workers: Option<usize>,
    pub out: PathBuf,
    /// Clique catalog for `simulate`; built on the fly when absent.
    pub catalog: Option<PathBuf>,
    pub cliques: CliqueEffort,
    pub synthetic: SyntheticParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            instance: None,
            targets: vec![84],
            use_domain_constraints: true,
            buffers: vec![DEFAULT_BUFFER],
            slack: DEFAULT_ISOLATED_SLACK,
            samples: 100,
            models: vec![ModelSpec::RandomBroadcasters { alpha: 0.5 }],
            alphas: Vec::new(),
            trials: DEFAULT_TRIALS,
            seed: 0,
            backend: SolverChoice::Embedded,
            trial_backend: TrialBackend::Sat,
            timeout_secs: DEFAULT_TIMEOUT_SECS,
            workers: None,
            out: PathBuf::from("out"),
            catalog: None,
            cliques: CliqueEffort::default(),
            synthetic: SyntheticParams::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(!self.targets.is_empty(), "at least one target is required");
        for &t in &self.targets {
            ensure!(
                t > 0 && t % 6 == 0,
                "target {t} MHz is not a positive multiple of 6"
            );
        }
        ensure!(
            self.slack >= 0.0 && self.slack.is_finite(),
            "slack must be non-negative"
        );
        ensure!(self.workers != Some(0), "workers must be at least 1");
        for m in &self.models {
            m.validate()
                .with_context(|| format!("model {}", m.name()))?;
        }
        ensure!(
            self.alphas.windows(2).all(|w| w[0] < w[1]),
            "alphas must be strictly increasing"
        );
        for path in [&self.instance, &self.catalog].into_iter().flatten() {
            ensure!(path.exists(), "{} does not exist", path.display());
        }
        Ok(())
    }

    /// SHA-256 of the settings that determine results. The output directory
    /// and worker count are left out.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        c.workers = None;
        let json = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn budget(&self) -> Option<Duration> {
        (self.timeout_secs > 0).then(|| Duration::from_secs(self.timeout_secs))
    }

    pub fn driver(&self) -> Result<DriverConfig> {
        let backend = match self.backend {
            SolverChoice::Embedded => SolverBackend::Embedded,
            SolverChoice::External => match ExternalSolver::from_env() {
                Some(s) => SolverBackend::External(s?),
                None => {
                    bail!("backend `external` needs {EXTERNAL_SOLVER_ENV} set to a solver command")
                }
            },
        };
        Ok(DriverConfig {
            backend,
            budget: self.budget(),
            use_domain: self.use_domain_constraints,
        })
    }

    pub fn load_instance(&self) -> Result<Instance> {
        let Some(path) = &self.instance else {
            bail!("no instance given (use --instance or `instance` in the config)")
        };
        let format = if path.is_dir() {
            InstanceFormat::CsvDir
        } else {
            InstanceFormat::Json
        };
        load_instance(path, format).with_context(|| format!("loading instance {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_toml_fills_defaults() {
        let c: ExperimentConfig = toml::from_str(
            r#"
            targets = [84, 126]
            seed = 7
            [[models]]
            kind = "correlated_affiliates"
            alpha = 0.6
            [synthetic]
            stations = 12
            "#,
        )
        .unwrap();
        assert_eq!(c.targets, vec![84, 126]);
        assert_eq!(
            c.models,
            vec![ModelSpec::CorrelatedAffiliates {
                alpha: 0.6,
                top_prob: 0.9
            }]
        );
        assert_eq!(c.synthetic.stations, 12);
        assert_eq!(c.trials, DEFAULT_TRIALS);
        assert_eq!(c.timeout_secs, 60);
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_and_bad_targets_rejected() {
        assert!(toml::from_str::<ExperimentConfig>("tragets = [84]").is_err());
        let c = ExperimentConfig {
            targets: vec![80],
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn digest_ignores_output_location() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig {
            out: "elsewhere".into(),
            workers: Some(3),
            ..Default::default()
        };
        let c = ExperimentConfig {
            seed: 1,
            ..Default::default()
        };
        assert_eq!(a.digest(), b.digest());
        assert_ne!(a.digest(), c.digest());
    }
}
