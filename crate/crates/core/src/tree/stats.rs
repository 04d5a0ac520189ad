use super::TernaryNode;
use std::collections::BTreeMap;

/// Mean node depth for all trees of one sentence length, next to the mean
/// number of preceding tokens a chain decoder carries, `(T+1)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthRow {
    pub length: usize,
    pub trees: usize,
    pub mean_depth: f64,
    pub chain_baseline: f64,
}

/// Depth of every word node (root = 1), EOB nodes skipped.
pub fn word_depths(root: &TernaryNode) -> Vec<usize> {
    fn walk(node: &TernaryNode, depth: usize, out: &mut Vec<usize>) {
        if node.is_eob() {
            return;
        }
        out.push(depth);
        for child in node.slots().into_iter().flatten() {
            walk(child, depth + 1, out);
        }
    }
    let mut out = Vec::new();
    walk(root, 1, &mut out);
    out
}

/// Groups trees by word count and averages word-node depth in each group.
pub fn depth_stats<'a, I>(trees: I) -> Vec<DepthRow>
where
    I: IntoIterator<Item = &'a TernaryNode>,
{
    let mut groups: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for tree in trees {
        let depths = word_depths(tree);
        if depths.is_empty() {
            continue;
        }
        let entry = groups.entry(depths.len()).or_default();
        entry.0 += 1;
        entry.1 += depths.iter().sum::<usize>();
    }
    groups
        .into_iter()
        .map(|(length, (trees, total))| DepthRow {
            length,
            trees,
            mean_depth: total as f64 / (trees * length) as f64,
            chain_baseline: (length as f64 + 1.0) / 2.0,
        })
        .collect()
}
