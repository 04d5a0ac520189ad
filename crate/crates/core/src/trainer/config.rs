//! TOML run configuration. Relative paths are resolved against the
//! directory holding the config file.
//!
//! ```toml
//! [data]
//! pairs = "train.tsv"          # post<TAB>response
//! parses = "train.conllu"      # parses of the responses, same order
//! valid_pairs = "valid.tsv"    # optional; defaults to the training data
//! valid_parses = "valid.conllu"
//! vocab_size = 10000
//! max_post_len = 100
//!
//! [training]
//! batch_size = 128
//! max_epochs = 50
//! patience = 4
//! seed = 20170101
//! embed = 32
//! hidden = 64
//! init_scale = 0.01
//! threads = 0
//! optimizer = { kind = "adadelta", rho = 0.95, epsilon = 1e-6, learning_rate = 1.0 }
//!
//! [output]
//! dir = "run"                  # receives model.ckpt, vocab.txt, history.csv
//! ```

use super::TrainConfig;
use serde::Deserialize;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub pairs: PathBuf,
    pub parses: PathBuf,
    #[serde(default)]
    pub valid_pairs: Option<PathBuf>,
    #[serde(default)]
    pub valid_parses: Option<PathBuf>,
    #[serde(default = "default_vocab_size")]
    pub vocab_size: usize,
    #[serde(default = "default_post_len")]
    pub max_post_len: Option<usize>,
}

fn default_vocab_size() -> usize {
    10_000
}

fn default_post_len() -> Option<usize> {
    Some(100)
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl OutputConfig {
    pub fn checkpoint(&self) -> PathBuf {
        self.dir.join("model.ckpt")
    }

    pub fn vocabulary(&self) -> PathBuf {
        self.dir.join("vocab.txt")
    }

    pub fn history(&self) -> PathBuf {
        self.dir.join("history.csv")
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    #[serde(default)]
    pub training: TrainConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut config: RunConfig = toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: base.to_path_buf(),
            source,
        })?;
        config.resolve(base);
        config.check()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base).map_err(|e| match e {
            ConfigError::Parse { source, .. } => ConfigError::Parse {
                path: path.to_path_buf(),
                source,
            },
            other => other,
        })
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data.pairs);
        fix(&mut self.data.parses);
        self.data.valid_pairs.iter_mut().for_each(fix);
        self.data.valid_parses.iter_mut().for_each(fix);
        fix(&mut self.output.dir);
    }

    fn check(&self) -> Result<(), ConfigError> {
        if self.data.valid_pairs.is_some() != self.data.valid_parses.is_some() {
            return Err(ConfigError::Invalid(
                "valid_pairs and valid_parses must be given together".into(),
            ));
        }
        if self.data.vocab_size == 0 {
            return Err(ConfigError::Invalid("vocab_size must be positive".into()));
        }
        self.training
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::OptimizerConfig;

    #[test]
    fn minimal_config_gets_defaults() {
        let text = "[data]\npairs = \"a.tsv\"\nparses = \"a.conllu\"\n[output]\ndir = \"out\"\n";
        let c = RunConfig::from_toml(text, Path::new("/cfg")).unwrap();
        assert_eq!(c.data.pairs, Path::new("/cfg/a.tsv"));
        assert_eq!(c.output.checkpoint(), Path::new("/cfg/out/model.ckpt"));
        assert_eq!(c.training, TrainConfig::default());
        assert_eq!(c.data.max_post_len, Some(100));
    }

    #[test]
    fn full_config_and_unknown_keys() {
        let text = "[data]\npairs = \"/abs/a.tsv\"\nparses = \"a.conllu\"\nvocab_size = 50\n\
                    [training]\nbatch_size = 4\noptimizer = { kind = \"sgd\", learning_rate = 0.5 }\n\
                    [output]\ndir = \"out\"\n";
        let c = RunConfig::from_toml(text, Path::new("base")).unwrap();
        assert_eq!(c.data.pairs, Path::new("/abs/a.tsv"));
        assert_eq!(c.training.batch_size, 4);
        assert_eq!(
            c.training.optimizer,
            OptimizerConfig::Sgd { learning_rate: 0.5 }
        );

        let typo = text.replace("batch_size", "batchsize");
        assert!(matches!(
            RunConfig::from_toml(&typo, Path::new(".")),
            Err(ConfigError::Parse { .. })
        ));
        let zero = text.replace("batch_size = 4", "batch_size = 0");
        assert!(matches!(
            RunConfig::from_toml(&zero, Path::new(".")),
            Err(ConfigError::Invalid(_))
        ));
    }
}
