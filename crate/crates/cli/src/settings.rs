//! Run configuration: a TOML file with one table per concern, overridden by
//! `--set section.key=value` and `--seed`. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use fedpan::fed::{Algorithm, FederationConfig, ShuffleInjection};
use fedpan::train::TrainConfig;
use fedpan::{PanConfig, PanMode};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Settings {
    pub seed: u64,
    pub data: DataSettings,
    pub model: ModelSettings,
    pub train: TrainSettings,
    pub federation: FedSettings,
    pub shuffle_test: ShuffleTestSettings,
    pub analysis: AnalysisSettings,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    #[default]
    Synthetic,
    Idx,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSettings {
    pub source: DataSource,
    /// Seed of the synthetic generator; the root seed when absent.
    pub seed: Option<u64>,
    pub train_samples: usize,
    pub test_samples: usize,
    pub dim: usize,
    pub classes: usize,
    pub separation: f64,
    pub train_images: Option<PathBuf>,
    pub train_labels: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
}

impl Default for DataSettings {
    fn default() -> Self {
        Self {
            source: DataSource::Synthetic,
            seed: None,
            train_samples: 5000,
            test_samples: 1000,
            dim: 20,
            classes: 10,
            separation: 4.0,
            train_images: None,
            train_labels: None,
            test_images: None,
            test_labels: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSettings {
    pub hidden: Vec<usize>,
    pub pan_mode: PanMode,
    pub amplitude: f64,
    pub period: f64,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            pan_mode: PanMode::Off,
            amplitude: 0.0,
            period: 1.0,
        }
    }
}

impl ModelSettings {
    pub fn pan(&self) -> PanConfig {
        PanConfig {
            mode: self.pan_mode,
            amplitude: self.amplitude,
            period: self.period,
        }
    }
}

/// Centralized training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub warmup_steps: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 32,
            lr: 0.05,
            momentum: 0.9,
            warmup_steps: 0,
        }
    }
}

impl TrainSettings {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            momentum: self.momentum,
            prox_mu: 0.0,
            warmup_steps: self.warmup_steps,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[allow(clippy::enum_variant_names)]
pub enum AlgorithmName {
    #[default]
    FedAvg,
    FedProx,
    FedOpt,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FedSettings {
    pub clients: usize,
    pub participation: f64,
    pub local_epochs: usize,
    pub rounds: usize,
    pub batch_size: usize,
    pub alpha: f64,
    /// When nonempty, one run per alpha replaces the single `alpha` run.
    pub alphas: Vec<f64>,
    pub local_lr: f64,
    pub momentum: f64,
    pub warmup_steps: usize,
    pub algorithm: AlgorithmName,
    pub prox_mu: f64,
    pub server_lr: f64,
    pub server_momentum: f64,
    pub weighted_average: bool,
    /// Expected injected shuffles per client run; 0 disables injection.
    pub shuffle_expected: f64,
    pub shuffle_p_sf: f64,
}

impl Default for FedSettings {
    fn default() -> Self {
        let d = FederationConfig::default();
        Self {
            clients: d.clients,
            participation: d.participation,
            local_epochs: d.local_epochs,
            rounds: d.rounds,
            batch_size: d.batch_size,
            alpha: d.alpha,
            alphas: Vec::new(),
            local_lr: d.local_lr,
            momentum: d.momentum,
            warmup_steps: d.warmup_steps,
            algorithm: AlgorithmName::FedAvg,
            prox_mu: 0.01,
            server_lr: 0.5,
            server_momentum: 0.9,
            weighted_average: d.weighted_average,
            shuffle_expected: 0.0,
            shuffle_p_sf: 0.1,
        }
    }
}

impl Settings {
    pub fn federation_config(&self, alpha: f64) -> FederationConfig {
        let f = &self.federation;
        FederationConfig {
            clients: f.clients,
            participation: f.participation,
            local_epochs: f.local_epochs,
            rounds: f.rounds,
            batch_size: f.batch_size,
            alpha,
            local_lr: f.local_lr,
            momentum: f.momentum,
            warmup_steps: f.warmup_steps,
            algorithm: match f.algorithm {
                AlgorithmName::FedAvg => Algorithm::FedAvg,
                AlgorithmName::FedProx => Algorithm::FedProx { mu: f.prox_mu },
                AlgorithmName::FedOpt => Algorithm::FedOpt {
                    server_lr: f.server_lr,
                    server_momentum: f.server_momentum,
                },
            },
            pan: self.model.pan(),
            hidden: self.model.hidden.clone(),
            shuffle: (f.shuffle_expected > 0.0).then_some(ShuffleInjection {
                expected_shuffles: f.shuffle_expected,
                p_sf: f.shuffle_p_sf,
            }),
            weighted_average: f.weighted_average,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShuffleTestSettings {
    pub checkpoint: Option<PathBuf>,
    pub p_sf: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub periods: Vec<f64>,
    pub modes: Vec<PanMode>,
    /// Rows of the N(0, 1) probe batch.
    pub samples: usize,
    /// Random plans drawn per `P_sf`.
    pub plans: usize,
}

impl Default for ShuffleTestSettings {
    fn default() -> Self {
        Self {
            checkpoint: None,
            p_sf: vec![0.0, 0.1, 0.5, 1.0],
            amplitudes: vec![0.0, 0.01, 0.05, 0.1, 0.25],
            periods: vec![1.0, 8.0],
            modes: vec![PanMode::Additive, PanMode::Multiplicative],
            samples: 100,
            plans: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSettings {
    pub checkpoints: Vec<PathBuf>,
    /// Layers to analyse; empty means every hidden layer.
    pub layers: Vec<usize>,
    /// Leading test rows used as the probe set.
    pub probe_samples: usize,
    pub fusion_points: usize,
    /// Also write the full distance / preference matrices.
    pub dump_matrices: bool,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        Self {
            checkpoints: Vec::new(),
            layers: Vec::new(),
            probe_samples: 500,
            fusion_points: 11,
            dump_matrices: false,
        }
    }
}

/// Reads `path` (if any), applies `overrides` (`section.key=value`, value in
/// TOML syntax or a bare string) and `seed`, and validates the result.
pub fn load(path: Option<&Path>, overrides: &[String], seed: Option<u64>) -> CliResult<Settings> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            text.parse::<Table>()
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None => Table::new(),
    };
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override `{item}` is not key=value")))?;
        set_dotted(&mut table, key.trim(), parse_value(raw.trim()))?;
    }
    if let Some(seed) = seed {
        let seed = i64::try_from(seed)
            .map_err(|_| CliError::Config(format!("seed {seed} exceeds {}", i64::MAX)))?;
        table.insert("seed".into(), Value::Integer(seed));
    }
    let settings: Settings =
        Settings::deserialize(table).map_err(|e| CliError::Config(e.to_string()))?;
    settings.validate()?;
    Ok(settings)
}

fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn set_dotted(table: &mut Table, key: &str, value: Value) -> CliResult<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|k| !k.is_empty());
    let last = last.ok_or_else(|| CliError::Config(format!("empty key in `{key}`")))?;
    let mut cur = table;
    for part in parts {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("`{part}` in `{key}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

impl Settings {
    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        let d = &self.data;
        match d.source {
            DataSource::Synthetic => {
                if d.train_samples < d.classes || d.test_samples == 0 || d.dim == 0 || d.classes < 2
                {
                    return bad("synthetic data needs train_samples >= classes >= 2, dim >= 1, test_samples >= 1".into());
                }
            }
            DataSource::Idx => {
                for (name, p) in [
                    ("train_images", &d.train_images),
                    ("train_labels", &d.train_labels),
                    ("test_images", &d.test_images),
                    ("test_labels", &d.test_labels),
                ] {
                    match p {
                        None => return bad(format!("data.{name} is required for idx data")),
                        Some(p) if !p.is_file() => {
                            return bad(format!("data.{name}: no such file {}", p.display()))
                        }
                        _ => {}
                    }
                }
            }
        }
        self.model.pan().validate().map_err(CliError::from)?;
        if self.model.hidden.contains(&0) {
            return bad("model.hidden widths must be >= 1".into());
        }
        if self.train.batch_size == 0 {
            return bad("train.batch_size must be >= 1".into());
        }
        if self
            .federation
            .alphas
            .iter()
            .any(|a| a.is_nan() || *a <= 0.0)
        {
            return bad("federation.alphas must be > 0".into());
        }
        self.federation_config(self.federation.alpha)
            .validate()
            .map_err(CliError::from)?;
        let s = &self.shuffle_test;
        if s.p_sf.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("shuffle_test.p_sf values must lie in [0, 1]".into());
        }
        if s.samples == 0 || s.plans == 0 {
            return bad("shuffle_test.samples and shuffle_test.plans must be >= 1".into());
        }
        if self.analysis.probe_samples == 0 {
            return bad("analysis.probe_samples must be >= 1".into());
        }
        Ok(())
    }

    /// The resolved configuration as TOML, headed by the command line that
    /// reproduces it.
    pub fn echo(&self, command: &str) -> CliResult<String> {
        let body = toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(format!(
            "# fedpan {command} --config config.toml\n# seed = {}\n{body}",
            self.seed
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_and_types() {
        let s = load(
            None,
            &[
                "federation.rounds=3".into(),
                "model.pan_mode=multiplicative".into(),
                "model.hidden=[8, 4]".into(),
                "federation.alphas=[0.1, 10.0]".into(),
            ],
            Some(9),
        )
        .unwrap();
        assert_eq!(s.federation.rounds, 3);
        assert_eq!(s.model.pan_mode, PanMode::Multiplicative);
        assert_eq!(s.model.hidden, vec![8, 4]);
        assert_eq!(s.federation.alphas, vec![0.1, 10.0]);
        assert_eq!(s.seed, 9);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(
            load(None, &["federation.round=3".into()], None),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            load(None, &["bogus=1".into()], None),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            load(None, &["noequals".into()], None),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn echo_round_trips() {
        let s = load(
            None,
            &["train.epochs=2".into(), "data.dim=5".into()],
            Some(4),
        )
        .unwrap();
        let text = s.echo("train-central").unwrap();
        let back: Settings = toml::from_str(&text).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn missing_idx_file_is_a_config_error() {
        let err = load(
            None,
            &[
                "data.source=idx".into(),
                "data.train_images=/nonexistent/a".into(),
                "data.train_labels=/nonexistent/b".into(),
                "data.test_images=/nonexistent/c".into(),
                "data.test_labels=/nonexistent/d".into(),
            ],
            None,
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
