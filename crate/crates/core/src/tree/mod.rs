//! Tree algebra: sequence-preserved (SP) trees, their ternary canonical
//! form, and the conversions between them and dependency parses.
//!
//! An SP tree is an ordered tree whose nodes carry a tag `I(t)`: the first
//! `I(t)` children are read before the node, the rest after it. A ternary
//! node has `left`, `middle` and `right` slots. Canonicalization puts the
//! first child into `left` (when `I(t) >= 1`), child `I(t)+1` into
//! `middle`, and every other child into the `right` slot of its preceding
//! sibling. In-order traversal (left, node, middle, right) of the ternary
//! form reproduces the SP in-order sequence.

mod enumerate;
mod full;
pub mod random;
mod stats;
pub mod text;

pub use enumerate::{
    count_lcrs_trees, count_ordered_trees, count_sp_trees, ordered_to_lcrs, BinaryShape,
    MAX_ENUMERATION_SIZE,
};
pub use full::FullTree;
pub use stats::{depth_stats, word_depths, DepthRow};

use crate::vocab::{TokenId, EOB};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("empty sentence")]
    EmptySentence,
    #[error("{tokens} tokens but {heads} head entries")]
    LengthMismatch { tokens: usize, heads: usize },
    #[error("expected exactly one root, found {0}")]
    RootCount(usize),
    #[error("token {token} points at head {head}, outside the sentence")]
    HeadOutOfRange { token: usize, head: usize },
    #[error("head links starting at token {token} form a cycle")]
    Cycle { token: usize },
    #[error("non-projective tree: in-order traversal does not reproduce the surface order")]
    NonProjective,
    #[error("tag {tag} exceeds child count {children}")]
    TagOutOfRange { tag: usize, children: usize },
    #[error("ternary node has no tag")]
    MissingTag,
    #[error("right-child chain attached to the root")]
    DanglingRightChain,
    #[error("tag {tag} disagrees with left chain of length {left}")]
    TagChainMismatch { tag: usize, left: usize },
    #[error("unexpected <eob> node in an unpadded tree")]
    UnexpectedEob,
    #[error("<eob> node with children")]
    EobWithChildren,
    #[error("tree is not padded: word node with an empty slot")]
    NotPadded,
    #[error("word node has {found} children, expected {expected}")]
    WrongArity { expected: usize, found: usize },
    #[error("size {n} outside the enumerable range 1..={max}")]
    InvalidSize { n: usize, max: usize },
}

/// Node of a sequence-preserved tree.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpNode {
    pub token: TokenId,
    /// Number of children that precede this node in the sequence.
    pub tag: usize,
    pub children: Vec<SpNode>,
}

impl SpNode {
    pub fn leaf(token: TokenId) -> Self {
        Self {
            token,
            tag: 0,
            children: Vec::new(),
        }
    }

    pub fn new(token: TokenId, tag: usize, children: Vec<SpNode>) -> Self {
        Self {
            token,
            tag,
            children,
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(SpNode::node_count).sum::<usize>()
    }

    /// Checks `tag <= children.len()` on every node.
    pub fn validate(&self) -> Result<(), TreeError> {
        if self.tag > self.children.len() {
            return Err(TreeError::TagOutOfRange {
                tag: self.tag,
                children: self.children.len(),
            });
        }
        self.children.iter().try_for_each(SpNode::validate)
    }
}

/// Node of a ternary tree. EOB nodes have no children.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TernaryNode {
    pub token: TokenId,
    /// Copied from the SP node during canonicalization; `None` on trees
    /// produced by the decoder.
    pub tag: Option<usize>,
    pub left: Option<Box<TernaryNode>>,
    pub middle: Option<Box<TernaryNode>>,
    pub right: Option<Box<TernaryNode>>,
}

impl TernaryNode {
    pub fn new(token: TokenId, tag: Option<usize>) -> Self {
        Self {
            token,
            tag,
            left: None,
            middle: None,
            right: None,
        }
    }

    pub fn eob() -> Self {
        Self::new(EOB, None)
    }

    pub fn is_eob(&self) -> bool {
        self.token == EOB
    }

    pub fn slots(&self) -> [Option<&TernaryNode>; 3] {
        [
            self.left.as_deref(),
            self.middle.as_deref(),
            self.right.as_deref(),
        ]
    }

    pub fn is_leaf(&self) -> bool {
        self.slots().iter().all(Option::is_none)
    }

    pub fn node_count(&self) -> usize {
        1 + self
            .slots()
            .into_iter()
            .flatten()
            .map(TernaryNode::node_count)
            .sum::<usize>()
    }

    pub fn eob_count(&self) -> usize {
        usize::from(self.is_eob())
            + self
                .slots()
                .into_iter()
                .flatten()
                .map(TernaryNode::eob_count)
                .sum::<usize>()
    }

    pub fn word_count(&self) -> usize {
        self.node_count() - self.eob_count()
    }

    /// True when every word node fills all three slots and every EOB node
    /// is a leaf.
    pub fn is_padded(&self) -> bool {
        if self.is_eob() {
            return self.is_leaf();
        }
        self.slots()
            .into_iter()
            .all(|slot| slot.is_some_and(TernaryNode::is_padded))
    }
}

/// Dependency parse over a sentence. `heads[i]` is the head position of
/// token `i` (0-based) or `None` for the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyTree<T = String> {
    tokens: Vec<T>,
    heads: Vec<Option<usize>>,
    root: usize,
}

impl<T> DependencyTree<T> {
    pub fn new(tokens: Vec<T>, heads: Vec<Option<usize>>) -> Result<Self, TreeError> {
        if tokens.is_empty() {
            return Err(TreeError::EmptySentence);
        }
        if tokens.len() != heads.len() {
            return Err(TreeError::LengthMismatch {
                tokens: tokens.len(),
                heads: heads.len(),
            });
        }
        let n = heads.len();
        let roots: Vec<usize> = (0..n).filter(|&i| heads[i].is_none()).collect();
        if roots.len() != 1 {
            return Err(TreeError::RootCount(roots.len()));
        }
        for (token, head) in heads.iter().enumerate() {
            match *head {
                Some(head) if head == token => return Err(TreeError::Cycle { token }),
                Some(head) if head >= n => return Err(TreeError::HeadOutOfRange { token, head }),
                _ => {}
            }
        }
        // every token must reach the root within n steps
        for start in 0..n {
            let mut cur = start;
            let mut steps = 0;
            while let Some(head) = heads[cur] {
                cur = head;
                steps += 1;
                if steps > n {
                    return Err(TreeError::Cycle { token: start });
                }
            }
        }
        Ok(Self {
            tokens,
            heads,
            root: roots[0],
        })
    }

    pub fn tokens(&self) -> &[T] {
        &self.tokens
    }

    pub fn heads(&self) -> &[Option<usize>] {
        &self.heads
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn map_tokens<U, F: FnMut(&T) -> U>(&self, f: F) -> DependencyTree<U> {
        DependencyTree {
            tokens: self.tokens.iter().map(f).collect(),
            heads: self.heads.clone(),
            root: self.root,
        }
    }

    fn dependents(&self) -> Vec<Vec<usize>> {
        let mut deps = vec![Vec::new(); self.len()];
        for (i, head) in self.heads.iter().enumerate() {
            if let Some(h) = *head {
                deps[h].push(i);
            }
        }
        deps
    }
}

/// Converts a dependency parse into an SP tree whose node tags count the
/// dependents that precede their head in the sentence. Non-projective
/// parses are rejected.
pub fn dep_to_sp(tree: &DependencyTree<TokenId>) -> Result<SpNode, TreeError> {
    let deps = tree.dependents();
    let by_position = build_positional(tree.root, &deps);
    let order = flatten_sp(&by_position)?;
    if order.iter().copied().ne(0..tree.len()) {
        return Err(TreeError::NonProjective);
    }
    Ok(relabel(&by_position, tree.tokens()))
}

fn build_positional(position: usize, deps: &[Vec<usize>]) -> SpNode {
    let children = &deps[position];
    SpNode {
        token: position,
        tag: children.iter().filter(|&&c| c < position).count(),
        children: children
            .iter()
            .map(|&c| build_positional(c, deps))
            .collect(),
    }
}

fn relabel(node: &SpNode, tokens: &[TokenId]) -> SpNode {
    SpNode {
        token: tokens[node.token],
        tag: node.tag,
        children: node.children.iter().map(|c| relabel(c, tokens)).collect(),
    }
}

/// Inverse of [`dep_to_sp`]: heads are assigned by in-order position.
pub fn sp_to_dep(root: &SpNode) -> Result<DependencyTree<TokenId>, TreeError> {
    root.validate()?;
    let mut tokens = Vec::new();
    let mut positions = Vec::new();
    layout(root, &mut tokens, &mut positions);
    let mut heads = vec![None; tokens.len()];
    assign_heads(root, &positions, &mut 0, None, &mut heads);
    DependencyTree::new(tokens, heads)
}

impl SpNode {
    fn validate_local(&self) -> Result<(), TreeError> {
        if self.tag > self.children.len() {
            return Err(TreeError::TagOutOfRange {
                tag: self.tag,
                children: self.children.len(),
            });
        }
        Ok(())
    }
}

/// Appends tokens in in-order sequence; `positions` receives the surface
/// position of every node in preorder.
fn layout(node: &SpNode, tokens: &mut Vec<TokenId>, positions: &mut Vec<usize>) {
    let slot = positions.len();
    positions.push(0);
    for child in &node.children[..node.tag] {
        layout(child, tokens, positions);
    }
    positions[slot] = tokens.len();
    tokens.push(node.token);
    for child in &node.children[node.tag..] {
        layout(child, tokens, positions);
    }
}

fn assign_heads(
    node: &SpNode,
    positions: &[usize],
    next: &mut usize,
    parent: Option<usize>,
    heads: &mut [Option<usize>],
) {
    let me = positions[*next];
    *next += 1;
    heads[me] = parent;
    for child in &node.children {
        assign_heads(child, positions, next, Some(me), heads);
    }
}

/// In-order sequence of an SP tree: left part, node, right part.
pub fn flatten_sp(root: &SpNode) -> Result<Vec<TokenId>, TreeError> {
    fn walk(node: &SpNode, out: &mut Vec<TokenId>) -> Result<(), TreeError> {
        node.validate_local()?;
        let (before, after) = node.children.split_at(node.tag);
        for child in before {
            walk(child, out)?;
        }
        out.push(node.token);
        for child in after {
            walk(child, out)?;
        }
        Ok(())
    }
    let mut out = Vec::with_capacity(root.node_count());
    walk(root, &mut out)?;
    Ok(out)
}

/// Converts an SP tree into its ternary canonical form. Tags are copied
/// onto the ternary nodes so the conversion can be undone.
pub fn canonicalize(node: &SpNode) -> Result<TernaryNode, TreeError> {
    node.validate_local()?;
    let mut images = node
        .children
        .iter()
        .map(canonicalize)
        .collect::<Result<Vec<_>, _>>()?;
    let middle = images.split_off(node.tag);
    let mut out = TernaryNode::new(node.token, Some(node.tag));
    // c_1 heads the left chain when I(t) >= 1; c_{I(t)+1} heads the middle
    // chain; every other child hangs off its predecessor's right slot.
    out.left = right_chain(images);
    out.middle = right_chain(middle);
    Ok(out)
}

fn right_chain(nodes: Vec<TernaryNode>) -> Option<Box<TernaryNode>> {
    nodes.into_iter().rev().fold(None, |next, mut node| {
        node.right = next;
        Some(Box::new(node))
    })
}

/// Rebuilds the SP tree from a canonical ternary tree. The left chain of a
/// node supplies children `1..=I(t)`, the middle chain the remaining ones.
pub fn decanonicalize(root: &TernaryNode) -> Result<SpNode, TreeError> {
    match &root.right {
        Some(r) if r.is_eob() => Err(TreeError::UnexpectedEob),
        Some(_) => Err(TreeError::DanglingRightChain),
        None => rebuild(root),
    }
}

fn rebuild(node: &TernaryNode) -> Result<SpNode, TreeError> {
    if node.is_eob() {
        return Err(TreeError::UnexpectedEob);
    }
    let tag = node.tag.ok_or(TreeError::MissingTag)?;
    let left = chain_members(node.left.as_deref());
    if left.len() != tag {
        return Err(TreeError::TagChainMismatch {
            tag,
            left: left.len(),
        });
    }
    let middle = chain_members(node.middle.as_deref());
    let children = left
        .into_iter()
        .chain(middle)
        .map(rebuild)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SpNode {
        token: node.token,
        tag,
        children,
    })
}

fn chain_members(head: Option<&TernaryNode>) -> Vec<&TernaryNode> {
    let mut members = Vec::new();
    let mut cur = head;
    while let Some(node) = cur {
        members.push(node);
        cur = node.right.as_deref();
    }
    members
}

/// In-order traversal (left, node, middle, right), skipping EOB nodes.
pub fn flatten_ternary(root: &TernaryNode) -> Vec<TokenId> {
    fn walk(node: &TernaryNode, out: &mut Vec<TokenId>) {
        if let Some(left) = &node.left {
            walk(left, out);
        }
        if !node.is_eob() {
            out.push(node.token);
        }
        if let Some(middle) = &node.middle {
            walk(middle, out);
        }
        if let Some(right) = &node.right {
            walk(right, out);
        }
    }
    let mut out = Vec::new();
    walk(root, &mut out);
    out
}

/// Fills every empty slot of every word node with an EOB leaf. An n-word
/// tree becomes a full ternary tree of 3n+1 nodes.
pub fn pad_eob(root: &TernaryNode) -> TernaryNode {
    if root.is_eob() {
        return root.clone();
    }
    let pad = |slot: &Option<Box<TernaryNode>>| {
        Some(Box::new(match slot {
            Some(child) => pad_eob(child),
            None => TernaryNode::eob(),
        }))
    };
    TernaryNode {
        token: root.token,
        tag: root.tag,
        left: pad(&root.left),
        middle: pad(&root.middle),
        right: pad(&root.right),
    }
}

/// Removes EOB nodes. Returns `None` for a bare EOB.
pub fn strip_eob(root: &TernaryNode) -> Option<TernaryNode> {
    if root.is_eob() {
        return None;
    }
    let strip = |slot: &Option<Box<TernaryNode>>| slot.as_deref().and_then(strip_eob).map(Box::new);
    Some(TernaryNode {
        token: root.token,
        tag: root.tag,
        left: strip(&root.left),
        middle: strip(&root.middle),
        right: strip(&root.right),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: TokenId = 10;
    const B: TokenId = 11;
    const C: TokenId = 12;
    const D: TokenId = 13;

    fn abc(tag: usize) -> SpNode {
        SpNode::new(B, tag, vec![SpNode::leaf(A), SpNode::leaf(C)])
    }

    #[test]
    fn flatten_sp_by_tag() {
        assert_eq!(flatten_sp(&abc(1)).unwrap(), vec![A, B, C]);
        assert_eq!(flatten_sp(&abc(0)).unwrap(), vec![B, A, C]);
        assert_eq!(flatten_sp(&abc(2)).unwrap(), vec![A, C, B]);
    }

    #[test]
    fn flatten_sp_rejects_bad_tag() {
        let bad = SpNode::new(B, 3, vec![SpNode::leaf(A), SpNode::leaf(C)]);
        assert_eq!(
            flatten_sp(&bad),
            Err(TreeError::TagOutOfRange {
                tag: 3,
                children: 2
            })
        );
    }

    #[test]
    fn canonicalize_leaf() {
        let t = canonicalize(&SpNode::leaf(A)).unwrap();
        assert!(t.is_leaf());
        assert_eq!(t.tag, Some(0));
    }

    #[test]
    fn canonicalize_tag_one() {
        let sp = SpNode::new(
            D,
            1,
            vec![SpNode::leaf(A), SpNode::leaf(B), SpNode::leaf(C)],
        );
        let t = canonicalize(&sp).unwrap();
        assert_eq!(t.left.as_ref().unwrap().token, A);
        let middle = t.middle.as_ref().unwrap();
        assert_eq!(middle.token, B);
        assert_eq!(middle.right.as_ref().unwrap().token, C);
        assert!(t.right.is_none());
        assert!(t.left.as_ref().unwrap().right.is_none());
        assert_eq!(decanonicalize(&t).unwrap(), sp);
    }

    #[test]
    fn canonicalize_tag_zero_routes_first_child_to_middle() {
        let sp = SpNode::new(D, 0, vec![SpNode::leaf(A), SpNode::leaf(B)]);
        let t = canonicalize(&sp).unwrap();
        assert!(t.left.is_none());
        let middle = t.middle.as_ref().unwrap();
        assert_eq!(middle.token, A);
        assert_eq!(middle.right.as_ref().unwrap().token, B);
        assert_eq!(decanonicalize(&t).unwrap(), sp);
    }

    #[test]
    fn canonicalize_all_left() {
        let sp = SpNode::new(
            D,
            3,
            vec![SpNode::leaf(A), SpNode::leaf(B), SpNode::leaf(C)],
        );
        let t = canonicalize(&sp).unwrap();
        assert!(t.middle.is_none());
        assert_eq!(flatten_ternary(&t), vec![A, B, C, D]);
        assert_eq!(decanonicalize(&t).unwrap(), sp);
    }

    #[test]
    fn decanonicalize_single_node() {
        let t = TernaryNode::new(A, Some(0));
        assert_eq!(decanonicalize(&t).unwrap(), SpNode::leaf(A));
    }

    #[test]
    fn decanonicalize_rejects_malformed() {
        let mut t = TernaryNode::new(A, Some(0));
        t.right = Some(Box::new(TernaryNode::new(B, Some(0))));
        assert_eq!(decanonicalize(&t), Err(TreeError::DanglingRightChain));

        let untagged = TernaryNode::new(A, None);
        assert_eq!(decanonicalize(&untagged), Err(TreeError::MissingTag));

        let mut mismatch = TernaryNode::new(A, Some(2));
        mismatch.left = Some(Box::new(TernaryNode::new(B, Some(0))));
        assert_eq!(
            decanonicalize(&mismatch),
            Err(TreeError::TagChainMismatch { tag: 2, left: 1 })
        );

        let padded = pad_eob(&TernaryNode::new(A, Some(0)));
        assert_eq!(decanonicalize(&padded), Err(TreeError::UnexpectedEob));
    }

    #[test]
    fn eob_only_flattens_to_nothing() {
        assert!(flatten_ternary(&TernaryNode::eob()).is_empty());
    }

    #[test]
    fn pad_counts() {
        let one = pad_eob(&TernaryNode::new(A, Some(0)));
        assert_eq!(one.node_count(), 4);
        assert_eq!(one.eob_count(), 3);

        let sp = SpNode::new(B, 1, vec![SpNode::leaf(A)]);
        let two = pad_eob(&canonicalize(&sp).unwrap());
        assert_eq!(two.node_count(), 7);
        assert_eq!(two.eob_count(), 5);
        assert!(two.is_padded());
        assert_eq!(pad_eob(&two), two);
        assert_eq!(strip_eob(&two).unwrap(), canonicalize(&sp).unwrap());
    }

    #[test]
    fn dependency_validation() {
        let toks = vec![A, B];
        assert_eq!(
            DependencyTree::new(toks.clone(), vec![None, None]).unwrap_err(),
            TreeError::RootCount(2)
        );
        assert_eq!(
            DependencyTree::new(toks.clone(), vec![Some(1), Some(0)]).unwrap_err(),
            TreeError::RootCount(0)
        );
        assert_eq!(
            DependencyTree::new(toks.clone(), vec![None, Some(5)]).unwrap_err(),
            TreeError::HeadOutOfRange { token: 1, head: 5 }
        );
        assert!(matches!(
            DependencyTree::new(vec![A, B, C], vec![None, Some(2), Some(1)]).unwrap_err(),
            TreeError::Cycle { .. }
        ));
        assert_eq!(
            DependencyTree::<TokenId>::new(vec![], vec![]).unwrap_err(),
            TreeError::EmptySentence
        );
    }

    #[test]
    fn single_token_dependency() {
        let dep = DependencyTree::new(vec![A], vec![None]).unwrap();
        assert_eq!(dep_to_sp(&dep).unwrap(), SpNode::leaf(A));
    }

    #[test]
    fn left_dependent_gives_tag_one() {
        // "he says": he <- says
        let dep = DependencyTree::new(vec![A, B], vec![Some(1), None]).unwrap();
        let sp = dep_to_sp(&dep).unwrap();
        assert_eq!(sp.token, B);
        assert_eq!(sp.tag, 1);
        assert_eq!(flatten_sp(&sp).unwrap(), vec![A, B]);
        assert_eq!(sp_to_dep(&sp).unwrap(), dep);
    }

    #[test]
    fn non_projective_rejected() {
        // 0 -> 2, 1 -> 3, 3 -> 0 root: arcs (0,2) and (1,3) cross
        let dep =
            DependencyTree::new(vec![A, B, C, D], vec![Some(2), Some(3), None, Some(2)]).unwrap();
        assert_eq!(dep_to_sp(&dep), Err(TreeError::NonProjective));
    }
}
