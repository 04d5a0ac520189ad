//! Mini-batch likelihood training with validation-perplexity early
//! stopping.

pub mod config;
mod optim;
mod run;

pub use config::{ConfigError, DataConfig, OutputConfig, RunConfig};
pub use optim::{Optimizer, OptimizerConfig};
pub use run::{run, RunError, RunReport};

use crate::corpus::TrainingInstance;
use crate::model::{predicted_nodes, Dims, ModelError, Params, TreeDecoderModel};
use crate::tree::random::seeded_rng;
use crate::tree::{FullTree, TreeError};
use crate::vocab::TokenId;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Deserialize;
use std::io::{self, Write};
use thiserror::Error;

/// Default seed for every randomized step.
pub const DEFAULT_SEED: u64 = 20_170_101;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("empty training set")]
    EmptyTraining,
    #[error("empty validation set")]
    EmptyValidation,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A post with its response as a full K-ary tree.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub post: Vec<TokenId>,
    pub tree: FullTree,
}

impl Example {
    pub fn from_instance(instance: &TrainingInstance) -> Result<Self, TreeError> {
        Ok(Self {
            post: instance.post.clone(),
            tree: FullTree::from_ternary(&instance.response)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop after this many consecutive epochs of rising validation
    /// perplexity.
    pub patience: usize,
    pub seed: u64,
    pub embed: usize,
    pub hidden: usize,
    /// Children per node; 3 for ternary response trees.
    pub arity: usize,
    /// Initial parameters are uniform in `[-init_scale, init_scale]`.
    pub init_scale: f64,
    /// Worker threads for per-instance gradients; 0 uses every core, 1 is
    /// strictly sequential.
    pub threads: usize,
    pub optimizer: OptimizerConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            max_epochs: 50,
            patience: 4,
            seed: DEFAULT_SEED,
            embed: 32,
            hidden: 64,
            arity: 3,
            init_scale: 0.01,
            threads: 0,
            optimizer: OptimizerConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.into()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        if self.embed == 0 || self.hidden == 0 || self.arity == 0 {
            return bad("embed, hidden and arity must be positive");
        }
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return bad("init_scale must be a non-negative number");
        }
        Ok(())
    }

    pub fn dims(&self, vocab: usize) -> Dims {
        Dims {
            vocab,
            embed: self.embed,
            hidden: self.hidden,
            arity: self.arity,
        }
    }
}

/// Every parameter uniform in `[-0.01, 0.01]`.
pub fn init_parameters(dims: Dims, seed: u64) -> TreeDecoderModel {
    TreeDecoderModel::init(dims, 0.01, seed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-example negative log-likelihood over the epoch's batches.
    pub train_nll: f64,
    pub valid_perplexity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxEpochs,
    Patience,
    /// The loss became NaN or infinite during this epoch.
    NonFiniteLoss {
        epoch: usize,
    },
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters with the lowest validation perplexity seen.
    pub model: TreeDecoderModel,
    pub best_epoch: Option<usize>,
    pub history: Vec<EpochRecord>,
    pub stop: StopReason,
}

/// Per-node perplexity: `exp(total NLL / predicted outcomes)`, where each
/// tree predicts its root and K children per word node, EOB included.
pub fn perplexity(examples: &[Example], model: &TreeDecoderModel) -> Result<f64, ModelError> {
    let scored: Vec<(f64, usize)> = examples
        .par_iter()
        .map(|ex| {
            let ll = model.tree_log_likelihood(&model.encode(&ex.post)?, &ex.tree)?;
            Ok((-ll, predicted_nodes(&ex.tree, model.arity())))
        })
        .collect::<Result<_, ModelError>>()?;
    let (nll, nodes) = scored
        .iter()
        .fold((0.0, 0usize), |(a, n), &(l, c)| (a + l, n + c));
    Ok((nll / nodes.max(1) as f64).exp())
}

/// Batches of similar word count: shuffle, group by size, shuffle batches.
fn batches(examples: &[Example], size: usize, rng: &mut impl rand::Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(rng);
    order.sort_by_key(|&i| examples[i].tree.word_count());
    let mut out: Vec<Vec<usize>> = order.chunks(size).map(<[usize]>::to_vec).collect();
    out.shuffle(rng);
    out
}

/// Summed loss and gradient over a batch, accumulated in index order.
fn batch_gradient(
    model: &TreeDecoderModel,
    examples: &[Example],
    batch: &[usize],
) -> Result<(f64, Params), ModelError> {
    let parts: Vec<(f64, Params)> = batch
        .par_iter()
        .map(|&i| model.gradients(&examples[i].post, &examples[i].tree))
        .collect::<Result<_, _>>()?;
    let mut total = model.params.zeros_like();
    let mut loss = 0.0;
    for (l, g) in &parts {
        loss += l;
        total.add_scaled(1.0, g);
    }
    Ok((loss, total))
}

pub fn train(
    examples: &[Example],
    validation: &[Example],
    vocab_size: usize,
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if examples.is_empty() {
        return Err(TrainError::EmptyTraining);
    }
    if validation.is_empty() {
        return Err(TrainError::EmptyValidation);
    }
    let run = || train_inner(examples, validation, vocab_size, config);
    if config.threads == 0 {
        run()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| TrainError::InvalidConfig(e.to_string()))?
            .install(run)
    }
}

fn train_inner(
    examples: &[Example],
    validation: &[Example],
    vocab_size: usize,
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    let dims = config.dims(vocab_size);
    let mut model = TreeDecoderModel::init(dims, config.init_scale, config.seed);
    let mut optimizer = Optimizer::new(config.optimizer, &model.params);
    let mut rng = seeded_rng(config.seed.wrapping_add(1));

    let mut history = Vec::new();
    let mut best: Option<(f64, usize, TreeDecoderModel)> = None;
    let mut rising = 0;
    let mut stop = StopReason::MaxEpochs;

    'epochs: for epoch in 1..=config.max_epochs {
        let mut epoch_loss = 0.0;
        for batch in batches(examples, config.batch_size, &mut rng) {
            let (loss, mut grad) = batch_gradient(&model, examples, &batch)?;
            if !loss.is_finite() {
                log::error!("non-finite loss in epoch {epoch}; keeping the last good parameters");
                stop = StopReason::NonFiniteLoss { epoch };
                break 'epochs;
            }
            epoch_loss += loss;
            grad.scale(1.0 / batch.len() as f64);
            let before = model.params.clone();
            optimizer.step(&mut model.params, &grad);
            if !model.params.is_finite() {
                model.params = before;
                stop = StopReason::NonFiniteLoss { epoch };
                break 'epochs;
            }
        }
        let record = EpochRecord {
            epoch,
            train_nll: epoch_loss / examples.len() as f64,
            valid_perplexity: perplexity(validation, &model)?,
        };
        log::info!(
            "epoch {epoch}: train NLL {:.4}, validation perplexity {:.4}",
            record.train_nll,
            record.valid_perplexity
        );
        if let Some(prev) = history.last().map(|r: &EpochRecord| r.valid_perplexity) {
            rising = if record.valid_perplexity > prev {
                rising + 1
            } else {
                0
            };
        }
        history.push(record);
        if best
            .as_ref()
            .is_none_or(|(p, _, _)| record.valid_perplexity < *p)
        {
            best = Some((record.valid_perplexity, epoch, model.clone()));
        }
        if rising >= config.patience {
            stop = StopReason::Patience;
            break;
        }
    }

    let (model, best_epoch) = match best {
        Some((_, epoch, m)) => (m, Some(epoch)),
        None => (model, None),
    };
    Ok(TrainOutcome {
        model,
        best_epoch,
        history,
        stop,
    })
}

pub fn write_history<W: Write>(history: &[EpochRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "epoch,train_nll,valid_perplexity")?;
    for r in history {
        writeln!(out, "{},{},{}", r.epoch, r.train_nll, r.valid_perplexity)?;
    }
    Ok(())
}
