//! Factorized parent-to-children tree decoder.
//!
//! A post is encoded by a GRU into a latent vector `x`. The root token is
//! drawn from `softmax g_r(x)`. A word node `t` with hidden state `h`
//! (zero for the root) gets one hidden state per child position,
//! `h_k = f_k([e(t); x], h)`, and its children are drawn left to right:
//!
//! ```text
//! p(c_k | ...) = softmax g_k([x; e(t); h_k; e(c_1); ..; e(c_{k-1}); 0..])
//! ```
//!
//! Sibling embeddings are zero-padded to `(K-1)·E` so every `g_k` has the
//! same input width. Child `c_k` is expanded with hidden state `h_k`.

mod checkpoint;
pub mod layers;
mod params;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use params::Params;

use crate::tree::{FullTree, TernaryNode, TreeError};
use crate::vocab::TokenId;
use layers::HeadCache;
use ndarray::{s, Array1};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("token {token} is outside the vocabulary of size {vocab}")]
    TokenOutOfRange { token: TokenId, vocab: usize },
    #[error("empty post")]
    EmptyPost,
    #[error("child position {k} outside 1..={arity}")]
    ChildIndex { k: usize, arity: usize },
    #[error("expected a vector of length {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{found} previous children given for child position {k}")]
    SiblingCount { k: usize, found: usize },
    #[error("parameter shapes do not match the dimensions")]
    ShapeMismatch,
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// Model sizes. The hidden layer of every softmax head is `hidden` wide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub vocab: usize,
    pub embed: usize,
    pub hidden: usize,
    /// Children per word node (3 for ternary trees, 1 for sequences).
    pub arity: usize,
}

impl Dims {
    pub fn cell_input(&self) -> usize {
        self.embed + self.hidden
    }

    /// `[x; e(t); h_k; c̃]`
    pub fn child_head_input(&self) -> usize {
        2 * self.hidden + self.embed + (self.arity - 1) * self.embed
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeDecoderModel {
    dims: Dims,
    pub params: Params,
}

fn concat(parts: &[&Array1<f64>], width: usize) -> Array1<f64> {
    let mut out = Array1::zeros(width);
    let mut at = 0;
    for part in parts {
        out.slice_mut(s![at..at + part.len()]).assign(*part);
        at += part.len();
    }
    out
}

impl TreeDecoderModel {
    pub fn new(dims: Dims, params: Params) -> Result<Self, ModelError> {
        let expected = Params::zeros(dims);
        let same = expected.child_cells.len() == params.child_cells.len()
            && expected.child_heads.len() == params.child_heads.len()
            && expected
                .blocks()
                .iter()
                .zip(params.blocks())
                .all(|((_, a), (_, b))| a.len() == b.len())
            && expected.encoder_embedding.dim() == params.encoder_embedding.dim()
            && expected.root_head.out_w.dim() == params.root_head.out_w.dim();
        if !same || dims.arity == 0 {
            return Err(ModelError::ShapeMismatch);
        }
        Ok(Self { dims, params })
    }

    /// Parameters drawn uniformly from `[-scale, scale]`.
    pub fn init(dims: Dims, scale: f64, seed: u64) -> Self {
        assert!(dims.arity >= 1 && dims.vocab >= 1);
        Self {
            dims,
            params: Params::uniform(dims, scale, seed),
        }
    }

    pub fn zeros(dims: Dims) -> Self {
        Self {
            dims,
            params: Params::zeros(dims),
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn arity(&self) -> usize {
        self.dims.arity
    }

    fn check_token(&self, token: TokenId) -> Result<(), ModelError> {
        if token < self.dims.vocab {
            Ok(())
        } else {
            Err(ModelError::TokenOutOfRange {
                token,
                vocab: self.dims.vocab,
            })
        }
    }

    fn check_len(&self, v: &Array1<f64>, expected: usize) -> Result<(), ModelError> {
        if v.len() == expected {
            Ok(())
        } else {
            Err(ModelError::DimensionMismatch {
                expected,
                found: v.len(),
            })
        }
    }

    fn check_tree(&self, tree: &FullTree) -> Result<(), ModelError> {
        tree.validate(self.dims.arity)?;
        fn tokens(t: &FullTree, out: &mut Vec<TokenId>) {
            out.push(t.token);
            t.children.iter().for_each(|c| tokens(c, out));
        }
        let mut all = Vec::new();
        tokens(tree, &mut all);
        all.into_iter().try_for_each(|t| self.check_token(t))
    }

    fn dec_emb(&self, token: TokenId) -> Array1<f64> {
        self.params.decoder_embedding.row(token).to_owned()
    }

    /// Last hidden state of the encoder GRU run over the post.
    pub fn encode(&self, post: &[TokenId]) -> Result<Array1<f64>, ModelError> {
        if post.is_empty() {
            return Err(ModelError::EmptyPost);
        }
        post.iter().try_for_each(|&t| self.check_token(t))?;
        let enc = &self.params.encoder;
        Ok(post.iter().fold(Array1::zeros(self.dims.hidden), |h, &t| {
            enc.step(&self.params.encoder_embedding.row(t).to_owned(), &h)
        }))
    }

    pub fn root_log_probs(&self, latent: &Array1<f64>) -> Result<Array1<f64>, ModelError> {
        self.check_len(latent, self.dims.hidden)?;
        Ok(self
            .params
            .root_head
            .forward(latent.clone())
            .log_probs()
            .clone())
    }

    pub fn root_distribution(&self, latent: &Array1<f64>) -> Result<Array1<f64>, ModelError> {
        Ok(self.root_log_probs(latent)?.mapv(f64::exp))
    }

    /// `h_k = f_k([e(t); x], h)` for every child position.
    pub fn child_states(
        &self,
        parent: TokenId,
        parent_hidden: &Array1<f64>,
        latent: &Array1<f64>,
    ) -> Result<Vec<Array1<f64>>, ModelError> {
        self.check_token(parent)?;
        self.check_len(parent_hidden, self.dims.hidden)?;
        self.check_len(latent, self.dims.hidden)?;
        let input = concat(&[&self.dec_emb(parent), latent], self.dims.cell_input());
        Ok(self
            .params
            .child_cells
            .iter()
            .map(|cell| cell.step(&input, parent_hidden))
            .collect())
    }

    fn child_head_input(
        &self,
        latent: &Array1<f64>,
        emb_parent: &Array1<f64>,
        hidden: &Array1<f64>,
        previous: &[TokenId],
    ) -> Array1<f64> {
        let siblings: Vec<Array1<f64>> = previous.iter().map(|&c| self.dec_emb(c)).collect();
        let mut parts = vec![latent, emb_parent, hidden];
        parts.extend(siblings.iter());
        concat(&parts, self.dims.child_head_input())
    }

    /// Log-distribution of child `k` (1-based) given its earlier siblings.
    pub fn child_log_probs(
        &self,
        k: usize,
        latent: &Array1<f64>,
        parent: TokenId,
        hidden: &Array1<f64>,
        previous: &[TokenId],
    ) -> Result<Array1<f64>, ModelError> {
        if k == 0 || k > self.dims.arity {
            return Err(ModelError::ChildIndex {
                k,
                arity: self.dims.arity,
            });
        }
        if previous.len() != k - 1 {
            return Err(ModelError::SiblingCount {
                k,
                found: previous.len(),
            });
        }
        self.check_token(parent)?;
        previous.iter().try_for_each(|&c| self.check_token(c))?;
        self.check_len(latent, self.dims.hidden)?;
        self.check_len(hidden, self.dims.hidden)?;
        let input = self.child_head_input(latent, &self.dec_emb(parent), hidden, previous);
        Ok(self.params.child_heads[k - 1]
            .forward(input)
            .log_probs()
            .clone())
    }

    pub fn child_distribution(
        &self,
        k: usize,
        latent: &Array1<f64>,
        parent: TokenId,
        hidden: &Array1<f64>,
        previous: &[TokenId],
    ) -> Result<Array1<f64>, ModelError> {
        Ok(self
            .child_log_probs(k, latent, parent, hidden, previous)?
            .mapv(f64::exp))
    }

    /// `log p(T | x)` for a full K-ary tree. A bare EOB tree scores the
    /// root prediction alone.
    pub fn tree_log_likelihood(
        &self,
        latent: &Array1<f64>,
        tree: &FullTree,
    ) -> Result<f64, ModelError> {
        self.check_tree(tree)?;
        let root = self.root_log_probs(latent)?[tree.token];
        if tree.is_eob() {
            return Ok(root);
        }
        Ok(root + self.node_log_likelihood(tree, &Array1::zeros(self.dims.hidden), latent))
    }

    fn node_log_likelihood(
        &self,
        node: &FullTree,
        hidden: &Array1<f64>,
        latent: &Array1<f64>,
    ) -> f64 {
        let emb = self.dec_emb(node.token);
        let states = self
            .child_states(node.token, hidden, latent)
            .expect("validated inputs");
        let tokens: Vec<TokenId> = node.children.iter().map(|c| c.token).collect();
        let mut total = 0.0;
        for (k, (child, h_k)) in node.children.iter().zip(&states).enumerate() {
            let input = self.child_head_input(latent, &emb, h_k, &tokens[..k]);
            total += self.params.child_heads[k].forward(input).log_probs()[child.token];
            if !child.is_eob() {
                total += self.node_log_likelihood(child, h_k, latent);
            }
        }
        total
    }

    /// Encodes the post and scores a padded ternary response tree.
    pub fn instance_log_likelihood(
        &self,
        post: &[TokenId],
        response: &TernaryNode,
    ) -> Result<f64, ModelError> {
        let tree = FullTree::from_ternary(response)?;
        self.tree_log_likelihood(&self.encode(post)?, &tree)
    }

    /// Negative log-likelihood of `tree` given `post` and its gradient with
    /// respect to every parameter.
    pub fn gradients(
        &self,
        post: &[TokenId],
        tree: &FullTree,
    ) -> Result<(f64, Params), ModelError> {
        self.check_tree(tree)?;
        if post.is_empty() {
            return Err(ModelError::EmptyPost);
        }
        post.iter().try_for_each(|&t| self.check_token(t))?;
        let p = &self.params;
        let mut grad = p.zeros_like();

        let mut h = Array1::zeros(self.dims.hidden);
        let mut caches = Vec::with_capacity(post.len());
        for &t in post {
            let (next, cache) = p
                .encoder
                .forward(&p.encoder_embedding.row(t).to_owned(), &h);
            caches.push(cache);
            h = next;
        }
        let latent = h;

        let mut dlatent = Array1::zeros(self.dims.hidden);
        let root_cache = p.root_head.forward(latent.clone());
        let mut log_lik = root_cache.log_probs()[tree.token];
        dlatent += &p
            .root_head
            .backward(&root_cache, tree.token, &mut grad.root_head);
        if !tree.is_eob() {
            let zero = Array1::zeros(self.dims.hidden);
            let (lp, _) = self.node_backward(tree, &zero, &latent, &mut grad, &mut dlatent);
            log_lik += lp;
        }

        let mut dh = dlatent;
        for (cache, &t) in caches.iter().zip(post).rev() {
            let (dx, dprev) = p.encoder.backward(cache, &dh, &mut grad.encoder);
            grad.encoder_embedding.row_mut(t).scaled_add(1.0, &dx);
            dh = dprev;
        }
        Ok((-log_lik, grad))
    }

    /// Forward and backward through one word node and its subtree. Returns
    /// the subtree log-likelihood and the gradient with respect to the
    /// incoming hidden state.
    fn node_backward(
        &self,
        node: &FullTree,
        hidden: &Array1<f64>,
        latent: &Array1<f64>,
        grad: &mut Params,
        dlatent: &mut Array1<f64>,
    ) -> (f64, Array1<f64>) {
        let p = &self.params;
        let (e, hd) = (self.dims.embed, self.dims.hidden);
        let emb = self.dec_emb(node.token);
        let cell_input = concat(&[&emb, latent], self.dims.cell_input());
        let cells: Vec<_> = p
            .child_cells
            .iter()
            .map(|cell| cell.forward(&cell_input, hidden))
            .collect();
        let tokens: Vec<TokenId> = node.children.iter().map(|c| c.token).collect();

        let mut log_lik = 0.0;
        let mut demb = Array1::zeros(e);
        let mut dstates: Vec<Array1<f64>> = vec![Array1::zeros(hd); self.dims.arity];
        for (k, child) in node.children.iter().enumerate() {
            let h_k = &cells[k].0;
            let cache: HeadCache =
                p.child_heads[k].forward(self.child_head_input(latent, &emb, h_k, &tokens[..k]));
            log_lik += cache.log_probs()[child.token];
            let din = p.child_heads[k].backward(&cache, child.token, &mut grad.child_heads[k]);
            *dlatent += &din.slice(s![..hd]);
            demb += &din.slice(s![hd..hd + e]);
            dstates[k] += &din.slice(s![hd + e..2 * hd + e]);
            for (j, &sib) in tokens[..k].iter().enumerate() {
                let at = 2 * hd + e + j * e;
                grad.decoder_embedding
                    .row_mut(sib)
                    .scaled_add(1.0, &din.slice(s![at..at + e]));
            }
            if !child.is_eob() {
                let (lp, dh) = self.node_backward(child, h_k, latent, grad, dlatent);
                log_lik += lp;
                dstates[k] += &dh;
            }
        }

        let mut dhidden = Array1::zeros(hd);
        for (k, (_, cache)) in cells.iter().enumerate() {
            let (dinput, dprev) =
                p.child_cells[k].backward(cache, &dstates[k], &mut grad.child_cells[k]);
            demb += &dinput.slice(s![..e]);
            *dlatent += &dinput.slice(s![e..]);
            dhidden += &dprev;
        }
        grad.decoder_embedding
            .row_mut(node.token)
            .scaled_add(1.0, &demb);
        (log_lik, dhidden)
    }
}

/// Outcomes a tree contributes to perplexity: the root plus K children of
/// every word node, EOB outcomes included.
pub fn predicted_nodes(tree: &FullTree, arity: usize) -> usize {
    1 + arity * tree.word_count()
}
