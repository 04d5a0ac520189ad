//! Oracles shared by the integration and acceptance tests. Each one is an
//! independent, deliberately naive reimplementation.

#![allow(dead_code)]

use ndarray::Array1;
use rand::Rng;
use std::path::PathBuf;
use treedec::model::{Dims, TreeDecoderModel};
use treedec::tree::random::{random_ordered_tree, seeded_rng};
use treedec::{canonicalize, pad_eob, FullTree, TokenId, EOB};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

/// Every full tree over `vocab` tokens whose word nodes sit at depth
/// `<= depth_cap` (root = 1), with a non-EOB root.
pub fn enumerate_capped_trees(vocab: usize, arity: usize, depth_cap: usize) -> Vec<FullTree> {
    fn subtrees(
        token: TokenId,
        vocab: usize,
        arity: usize,
        depth: usize,
        cap: usize,
    ) -> Vec<FullTree> {
        if token == EOB {
            return vec![FullTree::eob()];
        }
        // every option for one child slot
        let slot: Vec<FullTree> = (0..vocab)
            .filter(|&c| c == EOB || depth < cap)
            .flat_map(|c| subtrees(c, vocab, arity, depth + 1, cap))
            .collect();
        let mut groups: Vec<Vec<FullTree>> = vec![Vec::new()];
        for _ in 0..arity {
            groups = groups
                .into_iter()
                .flat_map(|g| {
                    slot.iter().map(move |c| {
                        let mut next = g.clone();
                        next.push(c.clone());
                        next
                    })
                })
                .collect();
        }
        groups
            .into_iter()
            .map(|g| FullTree::new(token, g))
            .collect()
    }
    (0..vocab)
        .filter(|&t| t != EOB)
        .flat_map(|t| subtrees(t, vocab, arity, 1, depth_cap))
        .collect()
}

/// Plain left-to-right beam search over a K=1 model, written against the
/// public distribution operations only. Hypotheses ending in EOB compete
/// in the beam for the round they finish in, then leave it.
pub fn reference_chain_beam(
    model: &TreeDecoderModel,
    latent: &Array1<f64>,
    beam: usize,
    width: usize,
    node_cap: usize,
) -> Vec<(Vec<TokenId>, f64)> {
    #[derive(Clone)]
    struct Hyp {
        tokens: Vec<TokenId>,
        score: f64,
        hidden: Array1<f64>,
    }
    let by_score = |a: &f64, b: &f64| b.total_cmp(a);
    let root = model.root_log_probs(latent).unwrap();
    let mut roots: Vec<(TokenId, f64)> = (0..root.len())
        .filter(|&t| t != EOB)
        .map(|t| (t, root[t]))
        .collect();
    roots.sort_by(|a, b| by_score(&a.1, &b.1));
    let mut open: Vec<Hyp> = roots
        .into_iter()
        .take(beam)
        .map(|(t, s)| Hyp {
            tokens: vec![t],
            score: s,
            hidden: Array1::zeros(model.dims().hidden),
        })
        .collect();
    let mut done: Vec<(Vec<TokenId>, f64)> = Vec::new();
    while done.len() < beam && !open.is_empty() {
        let mut cands: Vec<(Hyp, bool)> = Vec::new();
        for hyp in &open {
            let last = *hyp.tokens.last().unwrap();
            let h1 = model
                .child_states(last, &hyp.hidden, latent)
                .unwrap()
                .remove(0);
            let lp = model.child_log_probs(1, latent, last, &h1, &[]).unwrap();
            let mut next: Vec<(TokenId, f64)> = lp.iter().copied().enumerate().collect();
            next.sort_by(|a, b| by_score(&a.1, &b.1));
            for (v, l) in next.into_iter().take(width) {
                // nodes = words plus the closing EOB
                if hyp.tokens.len() + 1 > node_cap {
                    continue;
                }
                let mut tokens = hyp.tokens.clone();
                if v != EOB {
                    tokens.push(v);
                }
                cands.push((
                    Hyp {
                        tokens,
                        score: hyp.score + l,
                        hidden: h1.clone(),
                    },
                    v == EOB,
                ));
            }
        }
        cands.sort_by(|a, b| by_score(&a.0.score, &b.0.score));
        cands.truncate(beam);
        open.clear();
        for (hyp, finished) in cands {
            if finished {
                done.push((hyp.tokens, hyp.score));
            } else {
                open.push(hyp);
            }
        }
    }
    done.sort_by(|a, b| by_score(&a.1, &b.1));
    done.truncate(beam);
    done
}

/// Random padded ternary tree with `words` word nodes over tokens `2..vocab`.
pub fn random_padded_tree<R: Rng>(rng: &mut R, vocab: usize, words: usize) -> FullTree {
    let sp = random_ordered_tree(words, rng);
    let mut tern = pad_eob(&canonicalize(&sp).unwrap());
    fn retoken<R: Rng>(node: &mut treedec::TernaryNode, vocab: usize, rng: &mut R) {
        if !node.is_eob() {
            node.token = rng.gen_range(2..vocab);
        }
        for child in [&mut node.left, &mut node.middle, &mut node.right]
            .into_iter()
            .flatten()
        {
            retoken(child, vocab, rng);
        }
    }
    retoken(&mut tern, vocab, rng);
    FullTree::from_ternary(&tern).unwrap()
}

pub fn random_post<R: Rng>(rng: &mut R, vocab: usize, max_len: usize) -> Vec<TokenId> {
    let len = rng.gen_range(1..=max_len);
    (0..len).map(|_| rng.gen_range(0..vocab)).collect()
}

/// Worst relative error between analytic gradients and central
/// differences with step `h`. The denominator is floored at `floor` so
/// parameters with (near) zero gradient are compared absolutely.
pub fn gradient_check(
    model: &TreeDecoderModel,
    post: &[TokenId],
    tree: &FullTree,
    h: f64,
    floor: f64,
) -> (f64, usize) {
    let (_, grad) = model.gradients(post, tree).unwrap();
    let analytic: Vec<Vec<f64>> = grad.blocks().into_iter().map(|(_, b)| b.to_vec()).collect();
    let nll = |m: &TreeDecoderModel| {
        -m.tree_log_likelihood(&m.encode(post).unwrap(), tree)
            .unwrap()
    };
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (b, block) in analytic.iter().enumerate() {
        for (i, &a) in block.iter().enumerate() {
            let orig = probe.params.blocks()[b].1[i];
            probe.params.blocks_mut()[b].1[i] = orig + h;
            let up = nll(&probe);
            probe.params.blocks_mut()[b].1[i] = orig - h;
            let down = nll(&probe);
            probe.params.blocks_mut()[b].1[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            worst = worst.max(err);
            checked += 1;
        }
    }
    (worst, checked)
}

pub fn tiny_model(vocab: usize, arity: usize, scale: f64, seed: u64) -> TreeDecoderModel {
    TreeDecoderModel::init(
        Dims {
            vocab,
            embed: 3,
            hidden: 4,
            arity,
        },
        scale,
        seed,
    )
}

pub fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    seeded_rng(seed)
}
