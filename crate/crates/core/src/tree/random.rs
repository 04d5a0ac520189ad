//! Seedable random tree generators used by tests, benchmarks and the toy
//! corpus. All of them draw from a caller-supplied [`Rng`]; use
//! [`seeded_rng`] for reproducible streams.

use super::SpNode;
use crate::vocab::TokenId;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;

/// First id handed out to random tokens, past the reserved entries.
pub const FIRST_RANDOM_TOKEN: TokenId = 2;

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Breadth-first growth: each node draws a child count uniformly from
/// `0..=max_children` (clipped to the remaining node budget) and each tag
/// uniformly from `0..=child_count`. Tokens are uniform over `alphabet`
/// ids starting at [`FIRST_RANDOM_TOKEN`].
#[derive(Debug, Clone, Copy)]
pub struct SpTreeSampler {
    pub max_nodes: usize,
    pub max_children: usize,
    pub alphabet: usize,
}

impl Default for SpTreeSampler {
    fn default() -> Self {
        Self {
            max_nodes: 50,
            max_children: 4,
            alphabet: 20,
        }
    }
}

impl SpTreeSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SpNode {
        assert!(self.max_nodes >= 1 && self.alphabet >= 1);
        let mut kids: Vec<Vec<usize>> = vec![Vec::new()];
        let mut queue = VecDeque::from([0usize]);
        while let Some(node) = queue.pop_front() {
            let budget = self.max_nodes - kids.len();
            let count = rng.gen_range(0..=self.max_children).min(budget);
            for _ in 0..count {
                let id = kids.len();
                kids.push(Vec::new());
                kids[node].push(id);
                queue.push_back(id);
            }
        }
        self.assemble(0, &kids, rng)
    }

    fn assemble<R: Rng + ?Sized>(&self, id: usize, kids: &[Vec<usize>], rng: &mut R) -> SpNode {
        let token = FIRST_RANDOM_TOKEN + rng.gen_range(0..self.alphabet);
        let children: Vec<SpNode> = kids[id]
            .iter()
            .map(|&c| self.assemble(c, kids, rng))
            .collect();
        let tag = rng.gen_range(0..=children.len());
        SpNode::new(token, tag, children)
    }
}

/// Ordered tree with exactly `n` nodes, uniform over shapes, with uniform
/// tags and distinct tokens `FIRST_RANDOM_TOKEN..FIRST_RANDOM_TOKEN + n`
/// in preorder.
///
/// Shapes come from a uniformly shuffled word of `n - 1` up-steps and `n`
/// down-steps; by the cycle lemma exactly one rotation is a Dyck path
/// followed by a final down-step.
pub fn random_ordered_tree<R: Rng + ?Sized>(n: usize, rng: &mut R) -> SpNode {
    assert!(n >= 1);
    let mut steps: Vec<i32> = std::iter::repeat_n(1, n - 1)
        .chain(std::iter::repeat_n(-1, n))
        .collect();
    steps.shuffle(rng);

    // rotate to start just after the first minimum of the prefix sums
    let (mut sum, mut min, mut argmin) = (0, 0, 0);
    for (i, s) in steps.iter().enumerate() {
        sum += s;
        if sum < min {
            min = sum;
            argmin = i + 1;
        }
    }
    let len = steps.len();
    steps.rotate_left(argmin % len);
    debug_assert_eq!(steps.last(), Some(&-1));

    // walk the Dyck path: up = new child, down = return to parent
    let mut kids: Vec<Vec<usize>> = vec![Vec::new()];
    let mut stack = vec![0usize];
    for &step in &steps[..steps.len() - 1] {
        if step == 1 {
            let id = kids.len();
            kids.push(Vec::new());
            kids[*stack.last().unwrap()].push(id);
            stack.push(id);
        } else {
            stack.pop();
        }
    }

    fn build<R: Rng + ?Sized>(
        id: usize,
        kids: &[Vec<usize>],
        next: &mut TokenId,
        rng: &mut R,
    ) -> SpNode {
        let token = *next;
        *next += 1;
        let children: Vec<SpNode> = kids[id]
            .iter()
            .map(|&c| build(c, kids, next, rng))
            .collect();
        let tag = rng.gen_range(0..=children.len());
        SpNode::new(token, tag, children)
    }
    let mut next = FIRST_RANDOM_TOKEN;
    build(0, &kids, &mut next, rng)
}
