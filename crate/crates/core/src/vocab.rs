//! Token/index bijection with the two reserved entries every model needs.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};

/// Index of a token in a [`Vocabulary`].
pub type TokenId = usize;

/// End-of-branch marker. Every leaf of a padded tree carries this token.
pub const EOB: TokenId = 0;
/// Replacement for out-of-vocabulary words.
pub const UNK: TokenId = 1;

pub const EOB_SYMBOL: &str = "<eob>";
pub const UNK_SYMBOL: &str = "<unk>";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    /// A vocabulary holding only the reserved tokens.
    pub fn new() -> Self {
        let mut vocab = Self {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        vocab.push(EOB_SYMBOL);
        vocab.push(UNK_SYMBOL);
        vocab
    }

    fn push(&mut self, token: &str) -> TokenId {
        let id = self.tokens.len();
        self.tokens.push(token.to_owned());
        self.index.insert(token.to_owned(), id);
        id
    }

    /// Keeps the `max_size` most frequent tokens (reserved entries not
    /// counted). Ties go to the token seen first.
    pub fn build<'a, I>(tokens: I, max_size: usize) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut counts: Vec<(&'a str, usize)> = Vec::new();
        let mut seen: HashMap<&'a str, usize> = HashMap::new();
        for token in tokens {
            match seen.get(token) {
                Some(&slot) => counts[slot].1 += 1,
                None => {
                    seen.insert(token, counts.len());
                    counts.push((token, 1));
                }
            }
        }
        // stable sort keeps first-occurrence order among equal counts
        counts.sort_by_key(|&(_, c)| std::cmp::Reverse(c));

        let mut vocab = Self::new();
        for (token, _) in counts {
            if vocab.tokens.len() - 2 >= max_size {
                break;
            }
            if !vocab.index.contains_key(token) {
                vocab.push(token);
            }
        }
        vocab
    }

    /// Returns the id of `token`, adding it if absent.
    pub fn intern(&mut self, token: &str) -> TokenId {
        match self.index.get(token) {
            Some(&id) => id,
            None => self.push(token),
        }
    }

    /// Id of `token`, or [`UNK`] when it is not listed.
    pub fn id(&self, token: &str) -> TokenId {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn get(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode<'a, I>(&self, words: I) -> Vec<TokenId>
    where
        I: IntoIterator<Item = &'a str>,
    {
        words.into_iter().map(|w| self.id(w)).collect()
    }

    pub fn decode(&self, ids: &[TokenId]) -> Vec<&str> {
        ids.iter()
            .map(|&id| self.token(id).unwrap_or(UNK_SYMBOL))
            .collect()
    }

    /// Fraction of token occurrences that are covered without falling back
    /// to [`UNK`]. Returns 1.0 for an empty stream.
    pub fn coverage<'a, I>(&self, tokens: I) -> f64
    where
        I: IntoIterator<Item = &'a str>,
    {
        let (mut hit, mut total) = (0usize, 0usize);
        for token in tokens {
            total += 1;
            if self.index.contains_key(token) {
                hit += 1;
            }
        }
        if total == 0 {
            1.0
        } else {
            hit as f64 / total as f64
        }
    }

    /// 64-bit FNV-1a over the newline-joined token list. Checkpoints store
    /// it so a model is never paired with the wrong vocabulary.
    pub fn fingerprint(&self) -> u64 {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for token in &self.tokens {
            for &byte in token.as_bytes().iter().chain(std::iter::once(&b'\n')) {
                hash ^= u64::from(byte);
                hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        hash
    }

    /// One token per line, in index order.
    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        for token in &self.tokens {
            writeln!(out, "{token}")?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: R) -> io::Result<Self> {
        let mut vocab = Self {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        for line in input.lines() {
            let line = line?;
            if vocab.index.contains_key(&line) {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!("duplicate vocabulary entry {line:?}"),
                ));
            }
            vocab.push(&line);
        }
        if vocab.token(EOB) != Some(EOB_SYMBOL) || vocab.token(UNK) != Some(UNK_SYMBOL) {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                "vocabulary must start with <eob> and <unk>",
            ));
        }
        Ok(vocab)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reserved_tokens_are_distinct() {
        let vocab = Vocabulary::new();
        assert_eq!(vocab.id(EOB_SYMBOL), EOB);
        assert_eq!(vocab.id(UNK_SYMBOL), UNK);
        assert_ne!(EOB, UNK);
        assert_eq!(vocab.len(), 2);
    }

    #[test]
    fn most_frequent_kept() {
        let corpus = ["b", "a", "a", "a"];
        let vocab = Vocabulary::build(corpus.iter().copied(), 1);
        assert_eq!(vocab.len(), 3);
        assert_eq!(vocab.get("a"), Some(2));
        assert_eq!(vocab.id("b"), UNK);
    }

    #[test]
    fn ties_follow_first_occurrence() {
        let corpus = ["x", "y", "z", "y", "x", "z"];
        let vocab = Vocabulary::build(corpus.iter().copied(), 3);
        assert_eq!(&vocab.tokens()[2..], &["x", "y", "z"]);
        let again = Vocabulary::build(corpus.iter().copied(), 3);
        assert_eq!(vocab, again);
    }

    #[test]
    fn full_coverage_when_everything_fits() {
        let corpus = ["a", "b", "c", "a"];
        let vocab = Vocabulary::build(corpus.iter().copied(), 10);
        assert_eq!(vocab.coverage(corpus.iter().copied()), 1.0);
        let small = Vocabulary::build(corpus.iter().copied(), 1);
        assert_eq!(small.coverage(corpus.iter().copied()), 0.5);
    }

    #[test]
    fn file_round_trip() {
        let mut vocab = Vocabulary::new();
        vocab.intern("hello");
        vocab.intern("world");
        let mut buf = Vec::new();
        vocab.write_to(&mut buf).unwrap();
        let back = Vocabulary::read_from(&buf[..]).unwrap();
        assert_eq!(back, vocab);
        assert_eq!(back.fingerprint(), vocab.fingerprint());
    }

    #[test]
    fn fingerprint_sees_order() {
        let mut a = Vocabulary::new();
        a.intern("p");
        a.intern("q");
        let mut b = Vocabulary::new();
        b.intern("q");
        b.intern("p");
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}
