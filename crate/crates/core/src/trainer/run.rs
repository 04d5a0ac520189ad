//! End-to-end training run driven by a [`RunConfig`]: load and join the
//! corpus, build the vocabulary, train, and write the checkpoint,
//! vocabulary and history into the output directory.

use super::{train, write_history, Example, RunConfig, StopReason, TrainError};
use crate::corpus::{
    build_vocabulary, load_pairs, make_instances, CorpusError, InstanceOptions, Pair, Rejection,
};
use crate::model::{write_checkpoint, ModelError};
use crate::vocab::Vocabulary;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Corpus { path: PathBuf, source: CorpusError },
    #[error("no usable training pairs in {0}")]
    NoPairs(PathBuf),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug)]
pub struct RunReport {
    pub pairs: usize,
    pub rejected: Vec<Rejection>,
    pub non_projective: usize,
    pub truncated_posts: usize,
    pub vocab_size: usize,
    pub epochs: usize,
    pub best_epoch: Option<usize>,
    pub stop: StopReason,
    pub checkpoint: PathBuf,
}

fn open(path: &Path) -> Result<BufReader<File>, RunError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| RunError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn load(pairs: &Path, parses: &Path) -> Result<(Vec<Pair>, Vec<Rejection>), RunError> {
    load_pairs(open(pairs)?, open(parses)?).map_err(|source| RunError::Corpus {
        path: pairs.to_path_buf(),
        source,
    })
}

fn examples(
    pairs: &[Pair],
    vocab: &Vocabulary,
    options: InstanceOptions,
) -> (Vec<Example>, usize, usize) {
    let set = make_instances(pairs, vocab, options);
    let examples = set
        .instances
        .iter()
        .map(|i| Example::from_instance(i).expect("padded instances are full trees"))
        .collect();
    (examples, set.non_projective.len(), set.truncated_posts)
}

fn create(path: &Path) -> Result<BufWriter<File>, RunError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| RunError::Io {
            path: path.to_path_buf(),
            source,
        })
}

pub fn run(config: &RunConfig) -> Result<RunReport, RunError> {
    let data = &config.data;
    let (pairs, mut rejected) = load(&data.pairs, &data.parses)?;
    if pairs.is_empty() {
        return Err(RunError::NoPairs(data.pairs.clone()));
    }
    let vocab = build_vocabulary(&pairs, data.vocab_size);
    let options = InstanceOptions {
        max_post_len: data.max_post_len,
    };
    let (train_set, non_projective, truncated_posts) = examples(&pairs, &vocab, options);
    if train_set.is_empty() {
        return Err(RunError::NoPairs(data.pairs.clone()));
    }
    let valid_set = match (&data.valid_pairs, &data.valid_parses) {
        (Some(p), Some(c)) => {
            let (valid, bad) = load(p, c)?;
            rejected.extend(bad);
            examples(&valid, &vocab, options).0
        }
        _ => train_set.clone(),
    };
    log::info!(
        "{} training examples, {} validation, vocabulary {}",
        train_set.len(),
        valid_set.len(),
        vocab.len()
    );
    let outcome = train(&train_set, &valid_set, vocab.len(), &config.training)?;

    let out = &config.output;
    fs::create_dir_all(&out.dir).map_err(|source| RunError::Io {
        path: out.dir.clone(),
        source,
    })?;
    let io_err = |path: PathBuf| move |source| RunError::Io { path, source };
    let mut w = create(&out.checkpoint())?;
    write_checkpoint(&outcome.model, vocab.fingerprint(), &mut w)?;
    w.flush().map_err(io_err(out.checkpoint()))?;
    let mut w = create(&out.vocabulary())?;
    vocab.write_to(&mut w).map_err(io_err(out.vocabulary()))?;
    w.flush().map_err(io_err(out.vocabulary()))?;
    let mut w = create(&out.history())?;
    write_history(&outcome.history, &mut w).map_err(io_err(out.history()))?;
    w.flush().map_err(io_err(out.history()))?;

    Ok(RunReport {
        pairs: pairs.len(),
        rejected,
        non_projective,
        truncated_posts,
        vocab_size: vocab.len(),
        epochs: outcome.history.len(),
        best_epoch: outcome.best_epoch,
        stop: outcome.stop,
        checkpoint: out.checkpoint(),
    })
}
