//! Parenthesized one-line tree serialization.
//!
//! ```text
//! tree   := node | "<eob>"
//! node   := "(" token " " tag (" " child)* ")"
//! tag    := decimal | "-"
//! child  := node | "<eob>" | "_"
//! ```
//!
//! SP trees list their children in order. Ternary trees list either no
//! children (all slots empty) or exactly three: left, middle, right, with
//! `_` marking an empty slot. A tag of `-` means "absent" and only appears
//! on ternary trees produced by the decoder.
//!
//! Inside a token, `\`, `(`, `)`, space and tab are escaped with a leading
//! backslash; a token spelled `_` is written `\_` so it cannot be confused
//! with an empty slot. Elements are separated by exactly one space and a
//! line carries exactly one tree. See `docs/formats.md`.

use super::{SpNode, TernaryNode};
use crate::vocab::{Vocabulary, EOB, EOB_SYMBOL};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("column {column}: {message}")]
pub struct TextError {
    pub column: usize,
    pub message: String,
}

fn err<T>(column: usize, message: impl Into<String>) -> Result<T, TextError> {
    Err(TextError {
        column,
        message: message.into(),
    })
}

fn escape(token: &str, out: &mut String) {
    if token == "_" {
        out.push_str("\\_");
        return;
    }
    for ch in token.chars() {
        if matches!(ch, '\\' | '(' | ')' | ' ' | '\t') {
            out.push('\\');
        }
        out.push(ch);
    }
}

fn symbol(vocab: &Vocabulary, id: usize) -> &str {
    vocab.token(id).unwrap_or(crate::vocab::UNK_SYMBOL)
}

fn write_tag(tag: Option<usize>, out: &mut String) {
    match tag {
        Some(t) => {
            let _ = write!(out, "{t}");
        }
        None => out.push('-'),
    }
}

pub fn write_sp(root: &SpNode, vocab: &Vocabulary) -> String {
    fn walk(node: &SpNode, vocab: &Vocabulary, out: &mut String) {
        out.push('(');
        escape(symbol(vocab, node.token), out);
        out.push(' ');
        write_tag(Some(node.tag), out);
        for child in &node.children {
            out.push(' ');
            walk(child, vocab, out);
        }
        out.push(')');
    }
    let mut out = String::new();
    walk(root, vocab, &mut out);
    out
}

pub fn write_ternary(root: &TernaryNode, vocab: &Vocabulary) -> String {
    fn walk(node: &TernaryNode, vocab: &Vocabulary, out: &mut String) {
        if node.is_eob() && node.is_leaf() {
            out.push_str(EOB_SYMBOL);
            return;
        }
        out.push('(');
        escape(symbol(vocab, node.token), out);
        out.push(' ');
        write_tag(node.tag, out);
        if !node.is_leaf() {
            for slot in node.slots() {
                out.push(' ');
                match slot {
                    Some(child) => walk(child, vocab, out),
                    None => out.push('_'),
                }
            }
        }
        out.push(')');
    }
    let mut out = String::new();
    walk(root, vocab, &mut out);
    out
}

#[derive(Debug)]
enum Sexp {
    /// `verbatim` is false when the atom contained an escape.
    Atom {
        text: String,
        verbatim: bool,
        column: usize,
    },
    List(Vec<Sexp>, usize),
}

struct Reader<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
}

impl<'a> Reader<'a> {
    fn column(&mut self, len: usize) -> usize {
        self.chars.peek().map(|&(i, _)| i).unwrap_or(len) + 1
    }

    fn parse(&mut self, len: usize) -> Result<Sexp, TextError> {
        let column = self.column(len);
        match self.chars.peek().copied() {
            None => err(column, "unexpected end of line"),
            Some((_, '(')) => {
                self.chars.next();
                let mut items = Vec::new();
                loop {
                    match self.chars.peek().copied() {
                        Some((_, ')')) => {
                            self.chars.next();
                            return Ok(Sexp::List(items, column));
                        }
                        Some((_, ' ')) if !items.is_empty() => {
                            self.chars.next();
                            items.push(self.parse(len)?);
                        }
                        _ if items.is_empty() => items.push(self.parse(len)?),
                        None => return err(self.column(len), "unclosed '('"),
                        Some((i, c)) => {
                            return err(i + 1, format!("expected ' ' or ')', found {c:?}"))
                        }
                    }
                }
            }
            Some((_, ')')) => err(column, "unexpected ')'"),
            Some((_, ' ')) => err(column, "unexpected space"),
            Some(_) => {
                let mut text = String::new();
                let mut verbatim = true;
                while let Some(&(i, c)) = self.chars.peek() {
                    match c {
                        '(' | ')' | ' ' => break,
                        '\\' => {
                            self.chars.next();
                            verbatim = false;
                            match self.chars.next() {
                                Some((_, escaped)) => text.push(escaped),
                                None => return err(i + 1, "dangling escape"),
                            }
                        }
                        _ => {
                            self.chars.next();
                            text.push(c);
                        }
                    }
                }
                Ok(Sexp::Atom {
                    text,
                    verbatim,
                    column,
                })
            }
        }
    }
}

fn read_line(line: &str) -> Result<Sexp, TextError> {
    let line = line.trim_end_matches(['\n', '\r']);
    let mut reader = Reader {
        chars: line.char_indices().peekable(),
    };
    let sexp = reader.parse(line.len())?;
    if let Some((i, _)) = reader.chars.next() {
        return err(i + 1, "trailing characters after tree");
    }
    Ok(sexp)
}

/// Splits a node list into (token, tag, children).
fn node_head(items: &[Sexp], column: usize) -> Result<(&str, Option<usize>, &[Sexp]), TextError> {
    let (token, tag) = match items {
        [Sexp::Atom { text, .. }, Sexp::Atom {
            text: tag,
            column: tag_col,
            ..
        }, ..] => {
            let tag = if tag == "-" {
                None
            } else {
                Some(
                    tag.parse::<usize>()
                        .or_else(|_| err(*tag_col, format!("bad tag {tag:?}")))?,
                )
            };
            (text.as_str(), tag)
        }
        _ => return err(column, "node must start with a token and a tag"),
    };
    Ok((token, tag, &items[2..]))
}

/// Parses an SP tree, interning unseen tokens into `vocab`.
pub fn parse_sp(line: &str, vocab: &mut Vocabulary) -> Result<SpNode, TextError> {
    fn build(sexp: &Sexp, vocab: &mut Vocabulary) -> Result<SpNode, TextError> {
        match sexp {
            Sexp::Atom { column, .. } => err(*column, "expected '(' in SP tree"),
            Sexp::List(items, column) => {
                let (token, tag, children) = node_head(items, *column)?;
                let tag = match tag {
                    Some(t) => t,
                    None => return err(*column, "SP nodes need a numeric tag"),
                };
                if tag > children.len() {
                    return err(
                        *column,
                        format!("tag {tag} exceeds {} children", children.len()),
                    );
                }
                let token = vocab.intern(token);
                let children = children
                    .iter()
                    .map(|c| build(c, vocab))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(SpNode::new(token, tag, children))
            }
        }
    }
    build(&read_line(line)?, vocab)
}

/// Parses a ternary tree, interning unseen tokens into `vocab`.
pub fn parse_ternary(line: &str, vocab: &mut Vocabulary) -> Result<TernaryNode, TextError> {
    fn slot(sexp: &Sexp, vocab: &mut Vocabulary) -> Result<Option<Box<TernaryNode>>, TextError> {
        match sexp {
            Sexp::Atom {
                text,
                verbatim: true,
                ..
            } if text == "_" => Ok(None),
            other => Ok(Some(Box::new(build(other, vocab)?))),
        }
    }
    fn build(sexp: &Sexp, vocab: &mut Vocabulary) -> Result<TernaryNode, TextError> {
        match sexp {
            Sexp::Atom {
                text,
                verbatim: true,
                ..
            } if text == EOB_SYMBOL => Ok(TernaryNode::eob()),
            Sexp::Atom { column, .. } => err(*column, "expected '(' or <eob>"),
            Sexp::List(items, column) => {
                let (token, tag, children) = node_head(items, *column)?;
                let mut node = TernaryNode::new(vocab.intern(token), tag);
                match children {
                    [] => {}
                    [l, m, r] => {
                        node.left = slot(l, vocab)?;
                        node.middle = slot(m, vocab)?;
                        node.right = slot(r, vocab)?;
                    }
                    _ => {
                        return err(
                            *column,
                            format!(
                                "ternary node needs 0 or 3 children, found {}",
                                children.len()
                            ),
                        )
                    }
                }
                if node.token == EOB && !node.is_leaf() {
                    return err(*column, "<eob> node with children");
                }
                Ok(node)
            }
        }
    }
    build(&read_line(line)?, vocab)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{canonicalize, pad_eob};

    #[test]
    fn sp_round_trip() {
        let mut vocab = Vocabulary::new();
        let line = "(says 1 (he 0) (that 0 (it 0) (works 0)))";
        let tree = parse_sp(line, &mut vocab).unwrap();
        assert_eq!(tree.children.len(), 2);
        assert_eq!(write_sp(&tree, &vocab), line);
    }

    #[test]
    fn ternary_round_trip_with_padding() {
        let mut vocab = Vocabulary::new();
        let sp = parse_sp("(b 1 (a 0) (c 0))", &mut vocab).unwrap();
        let padded = pad_eob(&canonicalize(&sp).unwrap());
        let line = write_ternary(&padded, &vocab);
        assert_eq!(
            line,
            "(b 1 (a 0 <eob> <eob> <eob>) (c 0 <eob> <eob> <eob>) <eob>)"
        );
        assert_eq!(parse_ternary(&line, &mut vocab).unwrap(), padded);
    }

    #[test]
    fn unpadded_slots_and_absent_tags() {
        let mut vocab = Vocabulary::new();
        let line = "(x - _ (y -) _)";
        let tree = parse_ternary(line, &mut vocab).unwrap();
        assert!(tree.left.is_none() && tree.right.is_none());
        assert_eq!(tree.tag, None);
        assert_eq!(write_ternary(&tree, &vocab), line);
    }

    #[test]
    fn escaped_tokens() {
        let mut vocab = Vocabulary::new();
        let sp = SpNode::new(
            vocab.intern("("),
            0,
            vec![
                SpNode::leaf(vocab.intern("_")),
                SpNode::leaf(vocab.intern("a b\\")),
            ],
        );
        let line = write_sp(&sp, &vocab);
        assert_eq!(line, "(\\( 0 (\\_ 0) (a\\ b\\\\ 0))");
        assert_eq!(parse_sp(&line, &mut vocab).unwrap(), sp);

        let tern = canonicalize(&sp).unwrap();
        let tline = write_ternary(&tern, &vocab);
        assert_eq!(parse_ternary(&tline, &mut vocab).unwrap(), tern);
    }

    #[test]
    fn errors_carry_columns() {
        let mut vocab = Vocabulary::new();
        assert!(parse_sp("(a 0", &mut vocab).is_err());
        assert!(parse_sp("(a 2 (b 0))", &mut vocab).is_err());
        assert!(parse_sp("(a x)", &mut vocab).is_err());
        assert!(parse_sp("(a 0) extra", &mut vocab).is_err());
        assert!(parse_ternary("(a 0 _ _)", &mut vocab).is_err());
        let e = parse_sp("(a  0)", &mut vocab).unwrap_err();
        assert_eq!(e.column, 4);
    }
}
