use super::{TernaryNode, TreeError};
use crate::vocab::{TokenId, EOB};

/// Full K-ary tree: every word node has exactly K children and every leaf
/// is EOB. This is the shape the decoder scores and generates; a padded
/// ternary tree is the K = 3 case and a sequence ending in EOB is K = 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FullTree {
    pub token: TokenId,
    pub children: Vec<FullTree>,
}

impl FullTree {
    pub fn eob() -> Self {
        Self {
            token: EOB,
            children: Vec::new(),
        }
    }

    pub fn new(token: TokenId, children: Vec<FullTree>) -> Self {
        Self { token, children }
    }

    pub fn is_eob(&self) -> bool {
        self.token == EOB
    }

    /// Sequence `w_1 .. w_n` as a 1-ary chain terminated by EOB.
    pub fn chain(tokens: &[TokenId]) -> Self {
        tokens
            .iter()
            .rev()
            .fold(Self::eob(), |tail, &token| Self::new(token, vec![tail]))
    }

    pub fn from_ternary(node: &TernaryNode) -> Result<Self, TreeError> {
        if node.is_eob() {
            if !node.is_leaf() {
                return Err(TreeError::EobWithChildren);
            }
            return Ok(Self::eob());
        }
        let children = node
            .slots()
            .into_iter()
            .map(|slot| {
                slot.ok_or(TreeError::NotPadded)
                    .and_then(Self::from_ternary)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::new(node.token, children))
    }

    /// Maps child slots onto ternary positions so that ternary in-order
    /// flattening gives the sequence: K=3 uses (left, middle, right), K=1
    /// uses the middle slot, K=2 uses (middle, right).
    pub fn to_ternary(&self) -> TernaryNode {
        let mut node = TernaryNode::new(self.token, None);
        let mut kids = self.children.iter().map(|c| Some(Box::new(c.to_ternary())));
        match self.children.len() {
            0 => {}
            1 => node.middle = kids.next().flatten(),
            2 => {
                node.middle = kids.next().flatten();
                node.right = kids.next().flatten();
            }
            _ => {
                node.left = kids.next().flatten();
                node.middle = kids.next().flatten();
                node.right = kids.next().flatten();
            }
        }
        node
    }

    pub fn flatten(&self) -> Vec<TokenId> {
        super::flatten_ternary(&self.to_ternary())
    }

    pub fn validate(&self, arity: usize) -> Result<(), TreeError> {
        if self.is_eob() {
            if !self.children.is_empty() {
                return Err(TreeError::EobWithChildren);
            }
            return Ok(());
        }
        if self.children.len() != arity {
            return Err(TreeError::WrongArity {
                expected: arity,
                found: self.children.len(),
            });
        }
        self.children.iter().try_for_each(|c| c.validate(arity))
    }

    pub fn node_count(&self) -> usize {
        1 + self
            .children
            .iter()
            .map(FullTree::node_count)
            .sum::<usize>()
    }

    pub fn word_count(&self) -> usize {
        usize::from(!self.is_eob())
            + self
                .children
                .iter()
                .map(FullTree::word_count)
                .sum::<usize>()
    }

    /// Depth of the deepest word node (root = 1); 0 for a bare EOB.
    pub fn word_depth(&self) -> usize {
        if self.is_eob() {
            0
        } else {
            1 + self
                .children
                .iter()
                .map(FullTree::word_depth)
                .max()
                .unwrap_or(0)
        }
    }
}
