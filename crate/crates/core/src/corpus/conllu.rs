//! Minimal CoNLL-U reader: only ID, FORM and HEAD are used.

use crate::tree::{DependencyTree, TreeError};
use std::fmt;
use std::io::{self, BufRead, Write};

/// A sentence block that could not be turned into a dependency tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    /// Zero-based index of the sentence block in the file.
    pub sentence: usize,
    /// One-based line number of the offending line (block start for
    /// structural errors).
    pub line: usize,
    pub reason: String,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "sentence {} (line {}): {}",
            self.sentence + 1,
            self.line,
            self.reason
        )
    }
}

pub type SentenceResult = Result<DependencyTree<String>, Rejection>;

/// Reads every sentence block, in file order. Comment lines, multiword
/// token ranges (`3-4`) and empty nodes (`5.1`) are skipped.
pub fn read_conllu<R: BufRead>(input: R) -> io::Result<Vec<SentenceResult>> {
    let mut out = Vec::new();
    let mut block: Vec<(usize, String)> = Vec::new();
    let mut line_no = 0;
    for line in input.lines() {
        let line = line?;
        line_no += 1;
        if line.trim().is_empty() {
            if !block.is_empty() {
                out.push(parse_block(out.len(), &block));
                block.clear();
            }
            continue;
        }
        block.push((line_no, line));
    }
    if !block.is_empty() {
        out.push(parse_block(out.len(), &block));
    }
    Ok(out)
}

fn parse_block(sentence: usize, lines: &[(usize, String)]) -> SentenceResult {
    let reject = |line: usize, reason: String| Rejection {
        sentence,
        line,
        reason,
    };
    let start = lines[0].0;
    let mut forms = Vec::new();
    let mut heads = Vec::new();
    for (line_no, line) in lines {
        if line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 7 {
            return Err(reject(
                *line_no,
                format!(
                    "expected at least 7 tab-separated columns, found {}",
                    cols.len()
                ),
            ));
        }
        let id = cols[0];
        if id.contains('-') || id.contains('.') {
            continue;
        }
        let id: usize = id
            .parse()
            .map_err(|_| reject(*line_no, format!("bad token id {id:?}")))?;
        if id != forms.len() + 1 {
            return Err(reject(
                *line_no,
                format!(
                    "token id {id} out of sequence, expected {}",
                    forms.len() + 1
                ),
            ));
        }
        let head = cols[6];
        if head == "_" || head.is_empty() {
            return Err(reject(*line_no, format!("token {id} has no HEAD")));
        }
        let head: usize = head
            .parse()
            .map_err(|_| reject(*line_no, format!("bad HEAD {head:?}")))?;
        forms.push(cols[1].to_owned());
        heads.push(head);
    }
    if forms.is_empty() {
        return Err(reject(start, "block has no tokens".into()));
    }
    let n = forms.len();
    let mut zero_based = Vec::with_capacity(n);
    for (i, &head) in heads.iter().enumerate() {
        if head > n {
            return Err(reject(
                start,
                TreeError::HeadOutOfRange { token: i + 1, head }.to_string(),
            ));
        }
        zero_based.push(head.checked_sub(1));
    }
    DependencyTree::new(forms, zero_based).map_err(|e| reject(start, e.to_string()))
}

/// Writes sentences as CoNLL-U with placeholder columns (`_`) everywhere
/// except ID, FORM, HEAD and a `root`/`dep` relation.
pub fn write_conllu<W: Write>(trees: &[DependencyTree<String>], mut out: W) -> io::Result<()> {
    for tree in trees {
        for (i, (form, head)) in tree.tokens().iter().zip(tree.heads()).enumerate() {
            let (head, rel) = match head {
                Some(h) => (h + 1, "dep"),
                None => (0, "root"),
            };
            writeln!(out, "{}\t{form}\t_\t_\t_\t_\t{head}\t{rel}\t_\t_", i + 1)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str) -> Vec<SentenceResult> {
        read_conllu(text.as_bytes()).unwrap()
    }

    #[test]
    fn single_token() {
        let out = read("1\thello\t_\t_\t_\t_\t0\troot\t_\t_\n");
        assert_eq!(out.len(), 1);
        let tree = out[0].as_ref().unwrap();
        assert_eq!(tree.tokens(), &["hello".to_string()]);
        assert_eq!(tree.root(), 0);
    }

    #[test]
    fn skips_comments_and_ranges() {
        let text = "# sent_id = 1\n# text = don't go\n1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n1\tdo\t_\t_\t_\t_\t3\taux\t_\t_\n2\tn't\t_\t_\t_\t_\t3\tadvmod\t_\t_\n3\tgo\t_\t_\t_\t_\t0\troot\t_\t_\n\n";
        let out = read(text);
        let tree = out[0].as_ref().unwrap();
        assert_eq!(tree.len(), 3);
        assert_eq!(tree.heads(), &[Some(2), Some(2), None]);
    }

    #[test]
    fn cycle_rejected_with_line() {
        let text = "1\ta\t_\t_\t_\t_\t0\troot\t_\t_\n\n1\tb\t_\t_\t_\t_\t2\tdep\t_\t_\n2\tc\t_\t_\t_\t_\t1\tdep\t_\t_\n";
        let out = read(text);
        assert!(out[0].is_ok());
        let err = out[1].as_ref().unwrap_err();
        assert_eq!(err.sentence, 1);
        assert_eq!(err.line, 3);
    }

    #[test]
    fn missing_head_and_bad_ranges() {
        let text = "1\ta\t_\t_\t_\t_\t_\troot\t_\t_\n\n1\ta\t_\t_\t_\t_\t4\tdep\t_\t_\n2\tb\t_\t_\t_\t_\t0\troot\t_\t_\n\n1\ta\t_\t_\t_\t_\t0\troot\t_\t_\n2\tb\t_\t_\t_\t_\t0\troot\t_\t_\n\n1\ta\n";
        let out = read(text);
        assert_eq!(out.len(), 4);
        assert!(out[0].as_ref().unwrap_err().reason.contains("HEAD"));
        assert!(out[1].as_ref().unwrap_err().reason.contains("outside"));
        assert!(out[2].as_ref().unwrap_err().reason.contains("root"));
        assert_eq!(out[3].as_ref().unwrap_err().line, 9);
    }

    #[test]
    fn write_then_read() {
        let tree = DependencyTree::new(
            vec!["he".to_string(), "runs".to_string()],
            vec![Some(1), None],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_conllu(std::slice::from_ref(&tree), &mut buf).unwrap();
        let out = read(std::str::from_utf8(&buf).unwrap());
        assert_eq!(out[0].as_ref().unwrap(), &tree);
    }
}
