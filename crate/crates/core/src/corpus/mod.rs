//! Post/response pairs, vocabulary construction and canonicalized training
//! instances.

mod conllu;
pub mod toy;

pub use conllu::{read_conllu, write_conllu, Rejection, SentenceResult};

use crate::tree::text::{parse_ternary, write_ternary, TextError};
use crate::tree::{canonicalize, dep_to_sp, pad_eob, DependencyTree, TernaryNode, TreeError};
use crate::vocab::{TokenId, Vocabulary};
use std::io::{self, BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("{pairs} post/response pairs but {parses} parsed responses")]
    CountMismatch { pairs: usize, parses: usize },
}

/// A post together with the dependency parse of its response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pair {
    pub post: Vec<String>,
    pub response: DependencyTree<String>,
}

impl Pair {
    pub fn response_words(&self) -> &[String] {
        self.response.tokens()
    }
}

/// Post and response tokens before the parse is attached.
pub type RawPair = (Vec<String>, Vec<String>);

/// One `post<TAB>response` line per pair, both sides space-tokenized.
pub fn read_pairs_tsv<R: BufRead>(input: R) -> Result<Vec<RawPair>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (post, response) = line.split_once('\t').ok_or_else(|| CorpusError::Format {
            line: i + 1,
            message: "expected post<TAB>response".into(),
        })?;
        let split = |s: &str| s.split_whitespace().map(str::to_owned).collect::<Vec<_>>();
        let (post, response) = (split(post), split(response));
        if post.is_empty() || response.is_empty() {
            return Err(CorpusError::Format {
                line: i + 1,
                message: "empty post or response".into(),
            });
        }
        out.push((post, response));
    }
    Ok(out)
}

pub fn write_pairs_tsv<W: Write>(pairs: &[Pair], mut out: W) -> io::Result<()> {
    for pair in pairs {
        writeln!(
            out,
            "{}\t{}",
            pair.post.join(" "),
            pair.response_words().join(" ")
        )?;
    }
    Ok(())
}

/// Joins raw pairs with their parses (the i-th sentence block parses the
/// i-th response). Pairs whose parse was rejected, or whose parse tokens
/// differ from the response text, are returned as rejections.
pub fn join_pairs(
    raw: Vec<RawPair>,
    parses: Vec<SentenceResult>,
) -> Result<(Vec<Pair>, Vec<Rejection>), CorpusError> {
    if raw.len() != parses.len() {
        return Err(CorpusError::CountMismatch {
            pairs: raw.len(),
            parses: parses.len(),
        });
    }
    let mut pairs = Vec::new();
    let mut rejected = Vec::new();
    for (i, ((post, words), parse)) in raw.into_iter().zip(parses).enumerate() {
        match parse {
            Err(r) => rejected.push(r),
            Ok(tree) if tree.tokens() != words.as_slice() => rejected.push(Rejection {
                sentence: i,
                line: 0,
                reason: format!(
                    "parse tokens {:?} differ from response {:?}",
                    tree.tokens(),
                    words
                ),
            }),
            Ok(response) => pairs.push(Pair { post, response }),
        }
    }
    Ok((pairs, rejected))
}

/// Reads the pairs file and the CoNLL-U parses of its responses.
pub fn load_pairs<P: BufRead, C: BufRead>(
    pairs: P,
    parses: C,
) -> Result<(Vec<Pair>, Vec<Rejection>), CorpusError> {
    join_pairs(read_pairs_tsv(pairs)?, read_conllu(parses)?)
}

/// Vocabulary over post and response tokens, in corpus order.
pub fn build_vocabulary(pairs: &[Pair], max_size: usize) -> Vocabulary {
    Vocabulary::build(
        pairs
            .iter()
            .flat_map(|p| p.post.iter().chain(p.response_words()).map(String::as_str)),
        max_size,
    )
}

pub fn vocabulary_coverage(pairs: &[Pair], vocab: &Vocabulary) -> f64 {
    vocab.coverage(
        pairs
            .iter()
            .flat_map(|p| p.post.iter().chain(p.response_words()).map(String::as_str)),
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingInstance {
    pub post: Vec<TokenId>,
    /// Canonicalized, EOB-padded response tree.
    pub response: TernaryNode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstanceOptions {
    /// Posts longer than this keep only their first `max_post_len` tokens.
    pub max_post_len: Option<usize>,
}

impl Default for InstanceOptions {
    fn default() -> Self {
        Self {
            max_post_len: Some(100),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct InstanceSet {
    pub instances: Vec<TrainingInstance>,
    /// Indices (into the input pairs) skipped because their parse was not
    /// projective.
    pub non_projective: Vec<usize>,
    pub truncated_posts: usize,
}

/// Encodes posts and turns every response parse into a padded ternary
/// tree: parse, SP tree, canonicalize, pad.
pub fn make_instances(pairs: &[Pair], vocab: &Vocabulary, options: InstanceOptions) -> InstanceSet {
    let mut set = InstanceSet::default();
    for (i, pair) in pairs.iter().enumerate() {
        let encoded = pair.response.map_tokens(|w| vocab.id(w));
        let sp = match dep_to_sp(&encoded) {
            Ok(sp) => sp,
            Err(TreeError::NonProjective) => {
                set.non_projective.push(i);
                continue;
            }
            Err(e) => unreachable!("validated dependency tree failed conversion: {e}"),
        };
        let tree = canonicalize(&sp).expect("dep_to_sp yields valid tags");
        let mut post = vocab.encode(pair.post.iter().map(String::as_str));
        if let Some(cap) = options.max_post_len {
            if post.len() > cap {
                post.truncate(cap);
                set.truncated_posts += 1;
            }
        }
        set.instances.push(TrainingInstance {
            post,
            response: pad_eob(&tree),
        });
    }
    set
}

/// `post ids<TAB>tree` per line; tree tokens spelled through `vocab`.
pub fn write_instances<W: Write>(
    instances: &[TrainingInstance],
    vocab: &Vocabulary,
    mut out: W,
) -> io::Result<()> {
    for inst in instances {
        let post: Vec<String> = inst.post.iter().map(usize::to_string).collect();
        writeln!(
            out,
            "{}\t{}",
            post.join(" "),
            write_ternary(&inst.response, vocab)
        )?;
    }
    Ok(())
}

pub fn read_instances<R: BufRead>(
    input: R,
    vocab: &Vocabulary,
) -> Result<Vec<TrainingInstance>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fail = |message: String| CorpusError::Format {
            line: i + 1,
            message,
        };
        let (post, tree) = line
            .split_once('\t')
            .ok_or_else(|| fail("expected post ids<TAB>tree".into()))?;
        let post = post
            .split(' ')
            .map(|id| match id.parse::<TokenId>() {
                Ok(id) if id < vocab.len() => Ok(id),
                _ => Err(fail(format!("bad token id {id:?}"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut scratch = vocab.clone();
        let response =
            parse_ternary(tree, &mut scratch).map_err(|e: TextError| fail(e.to_string()))?;
        if scratch.len() != vocab.len() {
            return Err(fail("tree uses tokens missing from the vocabulary".into()));
        }
        if !response.is_padded() {
            return Err(fail("instance tree is not padded".into()));
        }
        out.push(TrainingInstance { post, response });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{decanonicalize, flatten_ternary, strip_eob};
    use crate::vocab::UNK;

    fn pair(post: &str, words: &[&str], heads: &[Option<usize>]) -> Pair {
        Pair {
            post: post.split(' ').map(str::to_owned).collect(),
            response: DependencyTree::new(
                words.iter().map(|w| w.to_string()).collect(),
                heads.to_vec(),
            )
            .unwrap(),
        }
    }

    #[test]
    fn instance_tree_has_3n_plus_1_nodes() {
        let pairs = vec![pair(
            "how are you",
            &["i", "am", "fine"],
            &[Some(1), None, Some(1)],
        )];
        let vocab = build_vocabulary(&pairs, 100);
        let set = make_instances(&pairs, &vocab, InstanceOptions::default());
        let inst = &set.instances[0];
        assert_eq!(inst.response.node_count(), 10);
        assert_eq!(inst.response.eob_count(), 7);
        let words: Vec<TokenId> = ["i", "am", "fine"].iter().map(|w| vocab.id(w)).collect();
        assert_eq!(flatten_ternary(&inst.response), words);
        let stripped = strip_eob(&inst.response).unwrap();
        assert!(decanonicalize(&stripped).is_ok());
    }

    #[test]
    fn unknown_words_become_unk() {
        let pairs = vec![pair("x", &["a", "b"], &[None, Some(0)])];
        let vocab = Vocabulary::new();
        let set = make_instances(&pairs, &vocab, InstanceOptions::default());
        assert_eq!(set.instances[0].post, vec![UNK]);
        assert_eq!(flatten_ternary(&set.instances[0].response), vec![UNK, UNK]);
        assert!(set.instances[0].response.is_padded());
    }

    #[test]
    fn non_projective_skipped_and_counted() {
        let pairs = vec![
            pair(
                "p",
                &["a", "b", "c", "d"],
                &[Some(2), Some(3), None, Some(2)],
            ),
            pair("q", &["a"], &[None]),
        ];
        let vocab = build_vocabulary(&pairs, 10);
        let set = make_instances(&pairs, &vocab, InstanceOptions::default());
        assert_eq!(set.instances.len(), 1);
        assert_eq!(set.non_projective, vec![0]);
    }

    #[test]
    fn long_posts_truncated() {
        let pairs = vec![pair("a b c d e", &["z"], &[None])];
        let vocab = build_vocabulary(&pairs, 10);
        let set = make_instances(
            &pairs,
            &vocab,
            InstanceOptions {
                max_post_len: Some(3),
            },
        );
        assert_eq!(set.instances[0].post.len(), 3);
        assert_eq!(set.truncated_posts, 1);
    }

    #[test]
    fn instance_file_round_trip() {
        let pairs = vec![
            pair("hi there", &["hello", "friend"], &[None, Some(0)]),
            pair("bye", &["see", "you"], &[None, Some(0)]),
        ];
        let vocab = build_vocabulary(&pairs, 10);
        let set = make_instances(&pairs, &vocab, InstanceOptions::default());
        let mut buf = Vec::new();
        write_instances(&set.instances, &vocab, &mut buf).unwrap();
        let back = read_instances(&buf[..], &vocab).unwrap();
        assert_eq!(back, set.instances);

        let small = Vocabulary::new();
        assert!(read_instances(&buf[..], &small).is_err());
    }

    #[test]
    fn join_checks_counts_and_tokens() {
        let raw = vec![(
            vec!["p".to_string()],
            vec!["a".to_string(), "b".to_string()],
        )];
        let parses = read_conllu(
            "1\ta\t_\t_\t_\t_\t0\troot\t_\t_\n2\tc\t_\t_\t_\t_\t1\tdep\t_\t_\n".as_bytes(),
        )
        .unwrap();
        let (pairs, rejected) = join_pairs(raw.clone(), parses).unwrap();
        assert!(pairs.is_empty());
        assert_eq!(rejected.len(), 1);
        assert!(matches!(
            join_pairs(raw, Vec::new()),
            Err(CorpusError::CountMismatch { .. })
        ));
    }
}
