//! Generalized beam search over full K-ary trees.
//!
//! The working set starts from the `G` most probable roots. Every round,
//! each partial tree spawns, for every open leaf (a word node without
//! children), `L` successors that differ from it in that one leaf's child
//! group. Child groups come from a width-`L` chain beam search over the K
//! child positions. The pooled successors are pruned to the best `G`, and
//! those whose leaves are all EOB are collected as results. The loop stops
//! once `G` distinct trees are collected or the working set runs dry.
//!
//! With a depth cap, leaves at the cap are closed with EOB children the
//! moment they are created.

use crate::model::{ModelError, TreeDecoderModel};
use crate::tree::FullTree;
use crate::vocab::{TokenId, EOB};
use ndarray::Array1;
use rayon::prelude::*;
use std::collections::HashSet;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    /// Partial trees kept per round (`G`).
    pub global_beam: usize,
    /// Child groups generated per open leaf (`L`).
    pub local_beam: usize,
    /// Successors with more nodes than this (EOB included) are dropped.
    pub node_cap: usize,
    /// Word nodes at this depth (root = 1) only get EOB children.
    pub max_depth: Option<usize>,
    /// Rank by score per word instead of raw log-probability.
    pub length_normalize: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            global_beam: 6,
            local_beam: 6,
            node_cap: 64,
            max_depth: None,
            length_normalize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChildGroup {
    pub tokens: Vec<TokenId>,
    /// `log p(c_1..c_K | x, t, h)`
    pub score: f64,
}

/// Up to `width` child groups for one word node, best first. `states` are
/// the per-position hidden states `h_1..h_K` shared by every group.
#[derive(Debug, Clone)]
pub struct LocalExpansion {
    pub states: Vec<Array1<f64>>,
    pub groups: Vec<ChildGroup>,
}

fn sort_desc<T>(items: &mut [T], key: impl Fn(&T) -> f64) {
    // stable: equal keys keep generation order
    items.sort_by(|a, b| key(b).total_cmp(&key(a)));
}

/// Chain beam search over the K child positions of `parent`.
pub fn local_child_search(
    model: &TreeDecoderModel,
    latent: &Array1<f64>,
    parent: TokenId,
    hidden: &Array1<f64>,
    width: usize,
) -> Result<LocalExpansion, ModelError> {
    let states = model.child_states(parent, hidden, latent)?;
    let mut beams = vec![ChildGroup {
        tokens: Vec::new(),
        score: 0.0,
    }];
    for (k, h_k) in states.iter().enumerate() {
        let mut next = Vec::with_capacity(beams.len() * model.dims().vocab);
        for beam in &beams {
            let lp = model.child_log_probs(k + 1, latent, parent, h_k, &beam.tokens)?;
            for (token, &l) in lp.iter().enumerate() {
                let mut tokens = beam.tokens.clone();
                tokens.push(token);
                next.push(ChildGroup {
                    tokens,
                    score: beam.score + l,
                });
            }
        }
        sort_desc(&mut next, |g| g.score);
        next.truncate(width.max(1));
        beams = next;
    }
    Ok(LocalExpansion {
        states,
        groups: beams,
    })
}

/// The all-EOB group, used at the depth cap.
fn eob_group(
    model: &TreeDecoderModel,
    latent: &Array1<f64>,
    parent: TokenId,
    hidden: &Array1<f64>,
) -> Result<LocalExpansion, ModelError> {
    let states = model.child_states(parent, hidden, latent)?;
    let mut tokens = Vec::new();
    let mut score = 0.0;
    for (k, h_k) in states.iter().enumerate() {
        score += model.child_log_probs(k + 1, latent, parent, h_k, &tokens)?[EOB];
        tokens.push(EOB);
    }
    Ok(LocalExpansion {
        states,
        groups: vec![ChildGroup { tokens, score }],
    })
}

#[derive(Debug, Clone)]
struct SearchNode {
    token: TokenId,
    hidden: Arc<Array1<f64>>,
    depth: usize,
    children: Vec<usize>,
}

/// A partial tree in the working set.
#[derive(Debug, Clone)]
pub struct BeamState {
    nodes: Vec<SearchNode>,
    score: f64,
    /// Open leaves in creation order.
    frontier: Vec<usize>,
}

impl BeamState {
    fn root(token: TokenId, score: f64, hidden: usize) -> Self {
        Self {
            nodes: vec![SearchNode {
                token,
                hidden: Arc::new(Array1::zeros(hidden)),
                depth: 1,
                children: Vec::new(),
            }],
            score,
            frontier: if token == EOB { Vec::new() } else { vec![0] },
        }
    }

    pub fn score(&self) -> f64 {
        self.score
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn word_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.token != EOB).count()
    }

    /// Complete when every leaf is EOB. A bare root is never complete.
    pub fn is_complete(&self) -> bool {
        self.frontier.is_empty()
    }

    /// Snapshot of the tree; unexpanded word leaves have no children.
    pub fn tree(&self) -> FullTree {
        fn build(nodes: &[SearchNode], id: usize) -> FullTree {
            FullTree::new(
                nodes[id].token,
                nodes[id]
                    .children
                    .iter()
                    .map(|&c| build(nodes, c))
                    .collect(),
            )
        }
        build(&self.nodes, 0)
    }

    fn expand(&self, at: usize, expansion: &LocalExpansion, group: &ChildGroup) -> Self {
        let mut next = self.clone();
        let depth = self.nodes[self.frontier[at]].depth + 1;
        let leaf = next.frontier.remove(at);
        for (&token, h_k) in group.tokens.iter().zip(&expansion.states) {
            let id = next.nodes.len();
            next.nodes.push(SearchNode {
                token,
                hidden: Arc::new(h_k.clone()),
                depth,
                children: Vec::new(),
            });
            next.nodes[leaf].children.push(id);
            if token != EOB {
                next.frontier.push(id);
            }
        }
        next.score += group.score;
        next
    }

    fn rank_key(&self, normalize: bool) -> f64 {
        if normalize {
            self.score / self.word_count().max(1) as f64
        } else {
            self.score
        }
    }
}

/// Log-probability of the generated part of a partial tree, recomputed
/// from the model: the root plus every expanded node's child group.
pub fn partial_log_likelihood(
    model: &TreeDecoderModel,
    latent: &Array1<f64>,
    tree: &FullTree,
) -> Result<f64, ModelError> {
    fn walk(
        model: &TreeDecoderModel,
        latent: &Array1<f64>,
        node: &FullTree,
        hidden: &Array1<f64>,
    ) -> Result<f64, ModelError> {
        if node.children.is_empty() {
            return Ok(0.0);
        }
        let states = model.child_states(node.token, hidden, latent)?;
        let tokens: Vec<TokenId> = node.children.iter().map(|c| c.token).collect();
        let mut total = 0.0;
        for (k, (child, h_k)) in node.children.iter().zip(&states).enumerate() {
            total +=
                model.child_log_probs(k + 1, latent, node.token, h_k, &tokens[..k])?[child.token];
            total += walk(model, latent, child, h_k)?;
        }
        Ok(total)
    }
    let root = model.root_log_probs(latent)?[tree.token];
    Ok(root + walk(model, latent, tree, &Array1::zeros(model.dims().hidden))?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredTree {
    pub tree: FullTree,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    /// Completed trees, best first.
    pub trees: Vec<ScoredTree>,
    /// Set when successors were dropped by the node cap.
    pub truncated: bool,
    pub rounds: usize,
}

fn successors(
    model: &TreeDecoderModel,
    latent: &Array1<f64>,
    state: &BeamState,
    config: &SearchConfig,
) -> Result<(Vec<BeamState>, bool), ModelError> {
    let mut out = Vec::new();
    let mut dropped = false;
    for at in 0..state.frontier.len() {
        let node = &state.nodes[state.frontier[at]];
        let expansion =
            local_child_search(model, latent, node.token, &node.hidden, config.local_beam)?;
        for group in &expansion.groups {
            if state.nodes.len() + group.tokens.len() > config.node_cap {
                dropped = true;
                continue;
            }
            let next = close_capped(model, latent, state.expand(at, &expansion, group), config)?;
            if next.nodes.len() > config.node_cap {
                dropped = true;
                continue;
            }
            #[cfg(debug_assertions)]
            {
                let recomputed = partial_log_likelihood(model, latent, &next.tree())?;
                debug_assert!(
                    (recomputed - next.score).abs() <= 1e-9 * (1.0 + recomputed.abs()),
                    "beam score {} drifted from {recomputed}",
                    next.score
                );
            }
            out.push(next);
        }
    }
    Ok((out, dropped))
}

/// Leaves at the depth cap have exactly one continuation, so they are
/// closed as soon as they appear. Their EOB cost then counts at pruning
/// time instead of a round later.
fn close_capped(
    model: &TreeDecoderModel,
    latent: &Array1<f64>,
    mut state: BeamState,
    config: &SearchConfig,
) -> Result<BeamState, ModelError> {
    let Some(cap) = config.max_depth else {
        return Ok(state);
    };
    while let Some(at) = state
        .frontier
        .iter()
        .position(|&id| state.nodes[id].depth >= cap)
    {
        let node = &state.nodes[state.frontier[at]];
        let expansion = eob_group(model, latent, node.token, &node.hidden)?;
        state = state.expand(at, &expansion, &expansion.groups[0]);
    }
    Ok(state)
}

/// Runs the search from an encoded post.
pub fn generalized_beam_search(
    model: &TreeDecoderModel,
    latent: &Array1<f64>,
    config: &SearchConfig,
) -> Result<SearchOutcome, ModelError> {
    assert!(config.global_beam >= 1 && config.local_beam >= 1);
    let g = config.global_beam;
    let root = model.root_log_probs(latent)?;
    let mut seeds: Vec<BeamState> = root
        .iter()
        .enumerate()
        .filter(|&(t, _)| t != EOB)
        .map(|(t, &lp)| {
            close_capped(
                model,
                latent,
                BeamState::root(t, lp, model.dims().hidden),
                config,
            )
        })
        .collect::<Result<_, _>>()?;
    sort_desc(&mut seeds, |s| s.score);
    seeds.truncate(g);

    let mut results: Vec<ScoredTree> = Vec::new();
    let mut seen: HashSet<FullTree> = HashSet::new();
    // only a depth cap of 1 closes a seed outright
    let (closed, mut working): (Vec<_>, Vec<_>) = seeds.into_iter().partition(|s| s.is_complete());
    for state in closed {
        let tree = state.tree();
        seen.insert(tree.clone());
        results.push(ScoredTree {
            tree,
            score: state.score,
        });
    }
    let mut truncated = false;
    let mut rounds = 0;
    while results.len() < g && !working.is_empty() {
        rounds += 1;
        let expanded: Vec<(Vec<BeamState>, bool)> = working
            .par_iter()
            .map(|state| successors(model, latent, state, config))
            .collect::<Result<_, _>>()?;
        let mut pool = Vec::new();
        let mut pool_keys = HashSet::new();
        for (states, dropped) in expanded {
            truncated |= dropped;
            for state in states {
                if pool_keys.insert(state.tree()) {
                    pool.push(state);
                }
            }
        }
        sort_desc(&mut pool, |s| s.rank_key(config.length_normalize));
        pool.truncate(g);
        for state in &pool {
            if state.is_complete() {
                let tree = state.tree();
                if seen.insert(tree.clone()) {
                    results.push(ScoredTree {
                        tree,
                        score: state.score,
                    });
                }
            }
        }
        working = pool;
    }
    if config.length_normalize {
        sort_desc(&mut results, |t| {
            t.score / t.tree.word_count().max(1) as f64
        });
    } else {
        sort_desc(&mut results, |t| t.score);
    }
    results.truncate(g);
    Ok(SearchOutcome {
        trees: results,
        truncated,
        rounds,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub tokens: Vec<TokenId>,
    pub score: f64,
    pub tree: FullTree,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub responses: Vec<Response>,
    pub truncated: bool,
}

/// Encodes the post, searches, and flattens every result tree. Distinct
/// trees with the same sentence stay separate entries.
pub fn generate_response(
    model: &TreeDecoderModel,
    post: &[TokenId],
    config: &SearchConfig,
) -> Result<Generation, ModelError> {
    let latent = model.encode(post)?;
    let outcome = generalized_beam_search(model, &latent, config)?;
    if outcome.trees.is_empty() {
        log::warn!(
            "search produced no complete tree (node cap {}, truncated: {})",
            config.node_cap,
            outcome.truncated
        );
    }
    Ok(Generation {
        responses: outcome
            .trees
            .into_iter()
            .map(|t| Response {
                tokens: t.tree.flatten(),
                score: t.score,
                tree: t.tree,
            })
            .collect(),
        truncated: outcome.truncated,
    })
}
