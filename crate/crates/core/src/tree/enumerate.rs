//! Exhaustive enumeration of tree shapes with `n` nodes. Labels are fixed,
//! so only the shapes (and, for SP trees, the tags) vary.
//!
//! Every count is obtained by materializing each structure, encoding it and
//! inserting the encoding into a set; no closed-form formula is used.

use super::{SpNode, TreeError};
use std::collections::HashSet;

pub const MAX_ENUMERATION_SIZE: usize = 10;

/// Binary tree shape, used for left-child right-sibling encodings.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryShape {
    pub left: Option<Box<BinaryShape>>,
    pub right: Option<Box<BinaryShape>>,
}

fn check_size(n: usize) -> Result<(), TreeError> {
    if n == 0 || n > MAX_ENUMERATION_SIZE {
        return Err(TreeError::InvalidSize {
            n,
            max: MAX_ENUMERATION_SIZE,
        });
    }
    Ok(())
}

/// All ordered forests holding exactly `n` nodes, children tagged 0.
fn forests(n: usize, memo: &mut Vec<Option<Vec<Vec<SpNode>>>>) -> Vec<Vec<SpNode>> {
    if let Some(done) = &memo[n] {
        return done.clone();
    }
    let mut out = Vec::new();
    if n == 0 {
        out.push(Vec::new());
    } else {
        for first in 1..=n {
            for head in ordered_shapes(first, memo) {
                for rest in forests(n - first, memo) {
                    let mut forest = Vec::with_capacity(rest.len() + 1);
                    forest.push(head.clone());
                    forest.extend(rest);
                    out.push(forest);
                }
            }
        }
    }
    memo[n] = Some(out.clone());
    out
}

fn ordered_shapes(n: usize, memo: &mut Vec<Option<Vec<Vec<SpNode>>>>) -> Vec<SpNode> {
    forests(n - 1, memo)
        .into_iter()
        .map(|children| SpNode::new(0, 0, children))
        .collect()
}

fn all_ordered(n: usize) -> Vec<SpNode> {
    let mut memo = vec![None; n + 1];
    ordered_shapes(n, &mut memo)
}

/// Preorder (child count, tag) pairs. Injective on trees with fixed labels.
fn encode(node: &SpNode, out: &mut Vec<u8>) {
    out.push(node.children.len() as u8);
    out.push(node.tag as u8);
    for child in &node.children {
        encode(child, out);
    }
}

fn key(node: &SpNode) -> Vec<u8> {
    let mut out = Vec::new();
    encode(node, &mut out);
    out
}

fn child_counts(node: &SpNode, out: &mut Vec<usize>) {
    out.push(node.children.len());
    node.children.iter().for_each(|c| child_counts(c, out));
}

fn apply_tags(node: &mut SpNode, tags: &[usize], next: &mut usize) {
    node.tag = tags[*next];
    *next += 1;
    for child in &mut node.children {
        apply_tags(child, tags, next);
    }
}

/// Calls `visit` once for every tag assignment of `shape`.
fn for_each_tagging(shape: &SpNode, visit: &mut dyn FnMut(&SpNode)) {
    let mut tree = shape.clone();
    let mut limits = Vec::new();
    child_counts(&tree, &mut limits);
    let mut tags = vec![0usize; limits.len()];
    loop {
        apply_tags(&mut tree, &tags, &mut 0);
        visit(&tree);
        // odometer: digit i runs over 0..=limits[i]
        let mut i = 0;
        loop {
            if i == tags.len() {
                return;
            }
            if tags[i] < limits[i] {
                tags[i] += 1;
                break;
            }
            tags[i] = 0;
            i += 1;
        }
    }
}

pub fn count_ordered_trees(n: usize) -> Result<u64, TreeError> {
    check_size(n)?;
    let set: HashSet<Vec<u8>> = all_ordered(n).iter().map(key).collect();
    Ok(set.len() as u64)
}

pub fn count_sp_trees(n: usize) -> Result<u64, TreeError> {
    check_size(n)?;
    let mut set: HashSet<Vec<u8>> = HashSet::new();
    for shape in all_ordered(n) {
        for_each_tagging(&shape, &mut |tree| {
            set.insert(key(tree));
        });
    }
    Ok(set.len() as u64)
}

fn binary_shapes(n: usize) -> Vec<Option<Box<BinaryShape>>> {
    if n == 0 {
        return vec![None];
    }
    let mut out = Vec::new();
    for left in 0..n {
        for l in binary_shapes(left) {
            for r in binary_shapes(n - 1 - left) {
                out.push(Some(Box::new(BinaryShape {
                    left: l.clone(),
                    right: r,
                })));
            }
        }
    }
    out
}

/// Counts binary trees with `n` nodes whose root has no right child, the
/// image set of LCRS encoding of single-rooted ordered trees.
pub fn count_lcrs_trees(n: usize) -> Result<u64, TreeError> {
    check_size(n)?;
    let set: HashSet<BinaryShape> = binary_shapes(n)
        .into_iter()
        .flatten()
        .filter(|root| root.right.is_none())
        .map(|b| *b)
        .collect();
    Ok(set.len() as u64)
}

/// Left-child right-sibling encoding of an ordered tree.
pub fn ordered_to_lcrs(root: &SpNode) -> BinaryShape {
    fn siblings(nodes: &[SpNode]) -> Option<Box<BinaryShape>> {
        let (first, rest) = nodes.split_first()?;
        Some(Box::new(BinaryShape {
            left: siblings(&first.children),
            right: siblings(rest),
        }))
    }
    BinaryShape {
        left: siblings(&root.children),
        right: None,
    }
}

#[cfg(test)]
pub(crate) fn ordered_trees_for_test(n: usize) -> Vec<SpNode> {
    all_ordered(n)
}
