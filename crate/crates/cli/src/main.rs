//! `treedec` command-line tool.
//!
//! Exit status: 0 on success, 1 when a command fails or a check does not
//! hold, 2 on a usage error.

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use treedec::corpus::toy::toy_corpus;
use treedec::corpus::{read_conllu, write_conllu, write_pairs_tsv, SentenceResult};
use treedec::model::{read_checkpoint, TreeDecoderModel};
use treedec::search::{generate_response, SearchConfig};
use treedec::trainer::{run, RunConfig, DEFAULT_SEED};
use treedec::tree::text::{parse_ternary, write_sp, write_ternary};
use treedec::tree::{
    count_lcrs_trees, count_ordered_trees, count_sp_trees, depth_stats, MAX_ENUMERATION_SIZE,
};
use treedec::{
    canonicalize, decanonicalize, dep_to_sp, flatten_sp, flatten_ternary, pad_eob, sp_to_dep,
    strip_eob, DependencyTree, TernaryNode, TokenId, Vocabulary,
};

#[derive(Parser)]
#[command(
    name = "treedec",
    version,
    about = "Tree-structured response decoding toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert CoNLL-U parses into padded ternary trees, one per line.
    Canonicalize {
        input: PathBuf,
        /// Output tree file; standard output when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check that every tree survives canonicalization and its inverse.
    Roundtrip {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Auto)]
        format: Format,
    },
    /// Count SP, ordered and left-child right-sibling trees for n = 1..N.
    Enumerate {
        #[arg(default_value_t = 8)]
        n_max: usize,
    },
    /// Mean tree depth per sentence length against the chain baseline, as CSV.
    Stats {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Auto)]
        format: Format,
    },
    /// Train a model from a TOML run configuration.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the configured vocabulary size.
        #[arg(long)]
        vocab_size: Option<usize>,
        /// Overrides the configured epoch limit.
        #[arg(long)]
        max_epochs: Option<usize>,
    },
    /// Generate ranked responses to one post.
    Generate {
        checkpoint: PathBuf,
        /// Post text, whitespace-tokenized.
        #[arg(required = true)]
        post: Vec<String>,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Read posts from standard input and answer each with the best response.
    ChatDemo {
        checkpoint: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Write a synthetic corpus (pairs, parses) and a matching run config.
    ToyCorpus {
        out_dir: PathBuf,
        #[arg(long, default_value_t = 50)]
        pairs: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    /// `.conllu` files are parses, anything else a tree file.
    Auto,
    Conllu,
    Trees,
}

impl Format {
    fn resolve(self, path: &Path) -> Format {
        match self {
            Format::Auto if path.extension().is_some_and(|e| e == "conllu") => Format::Conllu,
            Format::Auto => Format::Trees,
            other => other,
        }
    }
}

#[derive(Args)]
struct ModelArgs {
    /// Vocabulary file; defaults to vocab.txt next to the checkpoint.
    #[arg(long)]
    vocab: Option<PathBuf>,
}

#[derive(Args)]
struct SearchArgs {
    /// Partial trees kept per round (G).
    #[arg(long, default_value_t = 6)]
    global_beam: usize,
    /// Child groups generated per leaf expansion (L).
    #[arg(long, default_value_t = 6)]
    local_beam: usize,
    /// Largest tree, EOB nodes included, the search may build.
    #[arg(long, default_value_t = 64)]
    node_cap: usize,
    /// Word nodes at this depth (root = 1) only get EOB children.
    #[arg(long)]
    max_depth: Option<usize>,
    /// Rank by score per word instead of raw log-probability.
    #[arg(long)]
    length_normalize: bool,
}

impl SearchArgs {
    fn config(&self) -> Result<SearchConfig> {
        ensure!(
            self.global_beam >= 1 && self.local_beam >= 1,
            "beam sizes must be at least 1"
        );
        ensure!(self.node_cap >= 1, "node cap must be at least 1");
        Ok(SearchConfig {
            global_beam: self.global_beam,
            local_beam: self.local_beam,
            node_cap: self.node_cap,
            max_depth: self.max_depth,
            length_normalize: self.length_normalize,
        })
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| {
        format!("cannot open {}", path.display())
    })?))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| {
        format!("cannot create {}", path.display())
    })?))
}

fn read_parses(path: &Path) -> Result<Vec<SentenceResult>> {
    read_conllu(open(path)?).with_context(|| format!("reading {}", path.display()))
}

fn encode(tree: &DependencyTree<String>, vocab: &mut Vocabulary) -> DependencyTree<TokenId> {
    tree.map_tokens(|w| vocab.intern(w))
}

fn cmd_canonicalize(input: &Path, output: Option<&Path>) -> Result<bool> {
    let parses = read_parses(input)?;
    let mut out: Box<dyn Write> = match output {
        Some(path) => Box::new(create(path)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    let mut vocab = Vocabulary::new();
    let (mut accepted, mut rejected) = (0, 0);
    for (i, parse) in parses.iter().enumerate() {
        let tree = match parse {
            Ok(tree) => tree,
            Err(rejection) => {
                rejected += 1;
                eprintln!("rejected: {rejection}");
                continue;
            }
        };
        match dep_to_sp(&encode(tree, &mut vocab)) {
            Ok(sp) => {
                let ternary = pad_eob(&canonicalize(&sp)?);
                writeln!(out, "{}", write_ternary(&ternary, &vocab))?;
                accepted += 1;
            }
            Err(e) => {
                rejected += 1;
                eprintln!("rejected: sentence {}: {e}", i + 1);
            }
        }
    }
    out.flush()?;
    eprintln!("accepted {accepted}, rejected {rejected}");
    Ok(true)
}

fn roundtrip_conllu(path: &Path) -> Result<(usize, usize)> {
    let mut vocab = Vocabulary::new();
    let mut failures = 0;
    let parses = read_parses(path)?;
    for (i, parse) in parses.iter().enumerate() {
        let dep = match parse {
            Ok(tree) => encode(tree, &mut vocab),
            Err(rejection) => {
                failures += 1;
                println!("sentence {}: not read: {rejection}", i + 1);
                continue;
            }
        };
        let sp = match dep_to_sp(&dep) {
            Ok(sp) => sp,
            Err(e) => {
                failures += 1;
                println!("sentence {}: {e}", i + 1);
                continue;
            }
        };
        let padded = pad_eob(&canonicalize(&sp)?);
        let back = strip_eob(&padded)
            .ok_or(treedec::TreeError::UnexpectedEob)
            .and_then(|t| decanonicalize(&t));
        match back {
            Ok(back) if back == sp && sp_to_dep(&back).as_ref() == Ok(&dep) => {
                if flatten_ternary(&padded) != dep.tokens() {
                    failures += 1;
                    println!("sentence {}: flattening changed the word order", i + 1);
                }
            }
            Ok(back) => {
                failures += 1;
                println!(
                    "sentence {}:\n  - {}\n  + {}",
                    i + 1,
                    write_sp(&sp, &vocab),
                    write_sp(&back, &vocab)
                );
            }
            Err(e) => {
                failures += 1;
                println!("sentence {}: {e}", i + 1);
            }
        }
    }
    Ok((parses.len(), failures))
}

fn roundtrip_one(tree: &TernaryNode) -> Result<TernaryNode, String> {
    let padded = tree.is_padded();
    let bare = if padded {
        strip_eob(tree).ok_or("empty tree")?
    } else {
        tree.clone()
    };
    let sp = decanonicalize(&bare).map_err(|e| e.to_string())?;
    let words = flatten_sp(&sp).map_err(|e| e.to_string())?;
    if words != flatten_ternary(tree) {
        return Err("flattening changed the word order".into());
    }
    let again = canonicalize(&sp).map_err(|e| e.to_string())?;
    Ok(if padded { pad_eob(&again) } else { again })
}

fn roundtrip_trees(path: &Path) -> Result<(usize, usize)> {
    let mut vocab = Vocabulary::new();
    let (mut total, mut failures) = (0, 0);
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        total += 1;
        let tree = match parse_ternary(&line, &mut vocab) {
            Ok(tree) => tree,
            Err(e) => {
                failures += 1;
                println!("line {}: {e}", i + 1);
                continue;
            }
        };
        match roundtrip_one(&tree) {
            Ok(again) if again == tree => {}
            Ok(again) => {
                failures += 1;
                println!(
                    "line {}:\n  - {}\n  + {}",
                    i + 1,
                    write_ternary(&tree, &vocab),
                    write_ternary(&again, &vocab)
                );
            }
            Err(e) => {
                failures += 1;
                println!("line {}: {e}", i + 1);
            }
        }
    }
    Ok((total, failures))
}

fn cmd_roundtrip(input: &Path, format: Format) -> Result<bool> {
    let (total, failures) = match format.resolve(input) {
        Format::Conllu => roundtrip_conllu(input)?,
        _ => roundtrip_trees(input)?,
    };
    println!("{} of {total} trees round-tripped", total - failures);
    Ok(failures == 0)
}

fn cmd_enumerate(n_max: usize) -> Result<bool> {
    ensure!(
        n_max <= MAX_ENUMERATION_SIZE,
        "n_max {n_max} exceeds the enumeration limit of {MAX_ENUMERATION_SIZE}"
    );
    let mut ok = true;
    println!("n,sp,ordered,lcrs");
    for n in 1..=n_max {
        let (s, o, l) = (
            count_sp_trees(n)?,
            count_ordered_trees(n)?,
            count_lcrs_trees(n)?,
        );
        println!("{n},{s},{o},{l}");
        if o != l || (n >= 2 && s <= o) {
            eprintln!("n={n}: expected sp > ordered = lcrs");
            ok = false;
        }
    }
    Ok(ok)
}

fn read_trees(path: &Path, format: Format) -> Result<Vec<TernaryNode>> {
    let mut vocab = Vocabulary::new();
    let mut trees = Vec::new();
    match format.resolve(path) {
        Format::Conllu => {
            for parse in read_parses(path)? {
                let Ok(tree) = parse else { continue };
                match dep_to_sp(&encode(&tree, &mut vocab)) {
                    Ok(sp) => trees.push(canonicalize(&sp)?),
                    Err(e) => log::warn!("skipping sentence: {e}"),
                }
            }
        }
        _ => {
            for (i, line) in open(path)?.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let tree = parse_ternary(&line, &mut vocab)
                    .with_context(|| format!("{}: line {}", path.display(), i + 1))?;
                trees.push(tree);
            }
        }
    }
    Ok(trees)
}

fn cmd_stats(input: &Path, format: Format) -> Result<bool> {
    let trees = read_trees(input, format)?;
    let mut out = io::stdout().lock();
    writeln!(out, "length,trees,mean_depth,chain_baseline")?;
    for row in depth_stats(&trees) {
        writeln!(
            out,
            "{},{},{},{}",
            row.length, row.trees, row.mean_depth, row.chain_baseline
        )?;
    }
    Ok(true)
}

fn cmd_train(
    config: &Path,
    seed: Option<u64>,
    vocab_size: Option<usize>,
    max_epochs: Option<usize>,
) -> Result<bool> {
    let mut config = RunConfig::load(config)?;
    if let Some(seed) = seed {
        config.training.seed = seed;
    }
    if let Some(size) = vocab_size {
        ensure!(size > 0, "vocabulary size must be positive");
        config.data.vocab_size = size;
    }
    if let Some(epochs) = max_epochs {
        config.training.max_epochs = epochs;
    }
    let report = run(&config)?;
    for rejection in &report.rejected {
        eprintln!("rejected: {rejection}");
    }
    eprintln!(
        "{} pairs ({} rejected, {} non-projective, {} posts truncated), vocabulary {}",
        report.pairs,
        report.rejected.len(),
        report.non_projective,
        report.truncated_posts,
        report.vocab_size
    );
    eprintln!(
        "{} epochs, best {:?}, stopped: {:?}; wrote {}",
        report.epochs,
        report.best_epoch,
        report.stop,
        report.checkpoint.display()
    );
    Ok(true)
}

struct Loaded {
    model: TreeDecoderModel,
    vocab: Vocabulary,
}

fn load_model(checkpoint: &Path, args: &ModelArgs) -> Result<Loaded> {
    let (model, fingerprint) = read_checkpoint(open(checkpoint)?)
        .with_context(|| format!("reading {}", checkpoint.display()))?;
    let vocab_path = args.vocab.clone().unwrap_or_else(|| {
        checkpoint
            .parent()
            .unwrap_or(Path::new("."))
            .join("vocab.txt")
    });
    let vocab = Vocabulary::read_from(open(&vocab_path)?)
        .with_context(|| format!("reading {}", vocab_path.display()))?;
    if vocab.fingerprint() != fingerprint || vocab.len() != model.dims().vocab {
        bail!(
            "{} does not match the vocabulary the checkpoint was trained with",
            vocab_path.display()
        );
    }
    Ok(Loaded { model, vocab })
}

fn respond(loaded: &Loaded, post: &str, config: &SearchConfig) -> Result<Vec<(f64, String)>> {
    let ids = loaded.vocab.encode(post.split_whitespace());
    ensure!(!ids.is_empty(), "empty post");
    let generation = generate_response(&loaded.model, &ids, config)?;
    if generation.truncated {
        log::warn!("node cap {} dropped some candidates", config.node_cap);
    }
    Ok(generation
        .responses
        .into_iter()
        .map(|r| (r.score, loaded.vocab.decode(&r.tokens).join(" ")))
        .collect())
}

fn cmd_generate(
    checkpoint: &Path,
    post: &[String],
    model: &ModelArgs,
    search: &SearchArgs,
) -> Result<bool> {
    let config = search.config()?;
    let loaded = load_model(checkpoint, model)?;
    let responses = respond(&loaded, &post.join(" "), &config)?;
    ensure!(
        !responses.is_empty(),
        "no complete response within the node cap"
    );
    for (rank, (score, text)) in responses.iter().enumerate() {
        println!("{}\t{score:.4}\t{text}", rank + 1);
    }
    Ok(true)
}

fn cmd_chat_demo(checkpoint: &Path, model: &ModelArgs, search: &SearchArgs) -> Result<bool> {
    let config = search.config()?;
    let loaded = load_model(checkpoint, model)?;
    let mut out = io::stdout().lock();
    for line in io::stdin().lock().lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match respond(&loaded, &line, &config)?.first() {
            Some((_, text)) => writeln!(out, "{text}")?,
            None => writeln!(out, "...")?,
        }
        out.flush()?;
    }
    Ok(true)
}

fn cmd_toy_corpus(dir: &Path, pairs: usize, seed: u64) -> Result<bool> {
    ensure!(pairs > 0, "need at least one pair");
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let corpus = toy_corpus(pairs, seed);
    let mut tsv = create(&dir.join("train.tsv"))?;
    write_pairs_tsv(&corpus, &mut tsv)?;
    tsv.flush()?;
    let parses: Vec<_> = corpus.iter().map(|p| p.response.clone()).collect();
    let mut conllu = create(&dir.join("train.conllu"))?;
    write_conllu(&parses, &mut conllu)?;
    conllu.flush()?;
    let config = format!(
        "[data]\npairs = \"train.tsv\"\nparses = \"train.conllu\"\n\n\
         [training]\nbatch_size = 5\nmax_epochs = 200\npatience = 4\nseed = {seed}\n\n\
         [output]\ndir = \"run\"\n"
    );
    std::fs::write(dir.join("config.toml"), config)?;
    eprintln!("wrote {} pairs to {}", corpus.len(), dir.display());
    Ok(true)
}

fn dispatch(command: Command) -> Result<bool> {
    match command {
        Command::Canonicalize { input, output } => cmd_canonicalize(&input, output.as_deref()),
        Command::Roundtrip { input, format } => cmd_roundtrip(&input, format),
        Command::Enumerate { n_max } => cmd_enumerate(n_max),
        Command::Stats { input, format } => cmd_stats(&input, format),
        Command::Train {
            config,
            seed,
            vocab_size,
            max_epochs,
        } => cmd_train(&config, seed, vocab_size, max_epochs),
        Command::Generate {
            checkpoint,
            post,
            model,
            search,
        } => cmd_generate(&checkpoint, &post, &model, &search),
        Command::ChatDemo {
            checkpoint,
            model,
            search,
        } => cmd_chat_demo(&checkpoint, &model, &search),
        Command::ToyCorpus {
            out_dir,
            pairs,
            seed,
        } => cmd_toy_corpus(&out_dir, pairs, seed),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
