use std::path::PathBuf;

use clap::ValueEnum;
use qhenn_core::data::{bundled_digits, load_csv, pca_angles, split, synth_blobs, Dataset};
use qhenn_core::fedtrain::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::failure::{Failure, Outcome};

pub const BUNDLED_TRAIN: &str = include_str!("../configs/train.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    /// Bundled 8x8 digits projected onto `n_qubits` principal axes, scaled to [0, π].
    DigitsPca,
    /// Bundled 8x8 digits, raw pixels.
    Digits,
    /// Two Gaussian clusters in [0, π]².
    Blobs,
    /// `label,f0,f1,...` file given by `path`.
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub source: DataSource,
    pub split_seed: u64,
    pub train_ratio: f64,
    pub path: Option<PathBuf>,
    pub n_per_class: usize,
    pub sigma: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            source: DataSource::DigitsPca,
            split_seed: 0,
            train_ratio: 0.8,
            path: None,
            n_per_class: 40,
            sigma: 0.3,
        }
    }
}

impl DataConfig {
    /// Train and test sets; `n_features` is the PCA target dimension.
    pub fn load(&self, n_features: usize) -> Outcome<(Dataset, Dataset)> {
        let full = match self.source {
            DataSource::DigitsPca | DataSource::Digits => bundled_digits(),
            DataSource::Blobs => synth_blobs(
                self.n_per_class,
                ([0.8, 0.8], [2.3, 2.3]),
                self.sigma,
                self.split_seed,
            )?,
            DataSource::Csv => {
                let path = self
                    .path
                    .as_ref()
                    .ok_or_else(|| Failure::Usage("data source csv needs a path".into()))?;
                load_csv(path)?
            }
        };
        let (train, test) = split(&full, self.train_ratio, self.split_seed)?;
        if self.source == DataSource::DigitsPca {
            return Ok(pca_angles(&train, &test, n_features)?);
        }
        Ok((train, test))
    }
}

/// Configuration of `qhenn train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed; the trainer's seed is always taken from here.
    pub seed: u64,
    pub n_qubits: usize,
    pub data: DataConfig,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            n_qubits: 2,
            data: DataConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Outcome<Self> {
        let table: toml::Table =
            toml::from_str(text).map_err(|e| Failure::Usage(format!("config: {e}")))?;
        if table
            .get("train")
            .and_then(|t| t.as_table())
            .is_some_and(|t| t.contains_key("seed"))
        {
            return Err(Failure::Usage(
                "config: set the seed at top level, not in [train]".into(),
            ));
        }
        let mut cfg: RunConfig = table
            .try_into()
            .map_err(|e| Failure::Usage(format!("config: {e}")))?;
        cfg.train.seed = cfg.seed;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_config_parses() {
        let c = RunConfig::from_toml(BUNDLED_TRAIN).unwrap();
        assert_eq!(c.n_qubits, 2);
        assert_eq!(c.train.iterations, 300);
        assert_eq!(c.train.shots, 1024);
        assert_eq!(c.data.source, DataSource::DigitsPca);
    }

    #[test]
    fn rejects_unknown_and_nested_seed() {
        assert!(RunConfig::from_toml("bogus = 1").is_err());
        assert!(RunConfig::from_toml("[train]\nitersations = 3").is_err());
        assert!(RunConfig::from_toml("[train]\nseed = 3").is_err());
        let c = RunConfig::from_toml("seed = 9").unwrap();
        assert_eq!(c.train.seed, 9);
    }

    #[test]
    fn pca_source_gives_angles() {
        let (tr, te) = DataConfig::default().load(2).unwrap();
        assert_eq!(tr.dim(), 2);
        assert_eq!(tr.len() + te.len(), 360);
        assert!(tr
            .features
            .iter()
            .flatten()
            .all(|v| (0.0..=std::f64::consts::PI).contains(v)));
    }
}
