use super::layers::{Gru, Head};
use super::Dims;
use crate::tree::random::seeded_rng;
use ndarray::Array2;
use rand::Rng;

/// Every trainable array of the decoder. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    /// `V × E`, post side.
    pub encoder_embedding: Array2<f64>,
    /// `V × E`, response side.
    pub decoder_embedding: Array2<f64>,
    pub encoder: Gru,
    /// One cell per child position.
    pub child_cells: Vec<Gru>,
    pub root_head: Head,
    /// One head per child position.
    pub child_heads: Vec<Head>,
}

fn gru_blocks<'a>(prefix: &str, gru: &'a Gru, out: &mut Vec<(String, &'a [f64])>) {
    out.push((format!("{prefix}.w"), gru.w.as_slice().unwrap()));
    out.push((format!("{prefix}.u"), gru.u.as_slice().unwrap()));
    out.push((format!("{prefix}.b"), gru.b.as_slice().unwrap()));
}

fn gru_blocks_mut<'a>(prefix: &str, gru: &'a mut Gru, out: &mut Vec<(String, &'a mut [f64])>) {
    out.push((format!("{prefix}.w"), gru.w.as_slice_mut().unwrap()));
    out.push((format!("{prefix}.u"), gru.u.as_slice_mut().unwrap()));
    out.push((format!("{prefix}.b"), gru.b.as_slice_mut().unwrap()));
}

fn head_blocks<'a>(prefix: &str, head: &'a Head, out: &mut Vec<(String, &'a [f64])>) {
    out.push((
        format!("{prefix}.hidden_w"),
        head.hidden_w.as_slice().unwrap(),
    ));
    out.push((
        format!("{prefix}.hidden_b"),
        head.hidden_b.as_slice().unwrap(),
    ));
    out.push((format!("{prefix}.out_w"), head.out_w.as_slice().unwrap()));
    out.push((format!("{prefix}.out_b"), head.out_b.as_slice().unwrap()));
}

fn head_blocks_mut<'a>(prefix: &str, head: &'a mut Head, out: &mut Vec<(String, &'a mut [f64])>) {
    out.push((
        format!("{prefix}.hidden_w"),
        head.hidden_w.as_slice_mut().unwrap(),
    ));
    out.push((
        format!("{prefix}.hidden_b"),
        head.hidden_b.as_slice_mut().unwrap(),
    ));
    out.push((
        format!("{prefix}.out_w"),
        head.out_w.as_slice_mut().unwrap(),
    ));
    out.push((
        format!("{prefix}.out_b"),
        head.out_b.as_slice_mut().unwrap(),
    ));
}

impl Params {
    pub fn zeros(dims: Dims) -> Self {
        let Dims {
            vocab,
            embed,
            hidden,
            arity,
        } = dims;
        Self {
            encoder_embedding: Array2::zeros((vocab, embed)),
            decoder_embedding: Array2::zeros((vocab, embed)),
            encoder: Gru::zeros(embed, hidden),
            child_cells: (0..arity)
                .map(|_| Gru::zeros(embed + hidden, hidden))
                .collect(),
            root_head: Head::zeros(hidden, hidden, vocab),
            child_heads: (0..arity)
                .map(|_| Head::zeros(dims.child_head_input(), hidden, vocab))
                .collect(),
        }
    }

    /// Every entry uniform in `[-scale, scale]`.
    pub fn uniform(dims: Dims, scale: f64, seed: u64) -> Self {
        let mut params = Self::zeros(dims);
        let mut rng = seeded_rng(seed);
        for (_, block) in params.blocks_mut() {
            for v in block {
                *v = rng.gen_range(-scale..=scale);
            }
        }
        params
    }

    /// Named parameter blocks in the fixed order used by checkpoints and
    /// optimizers.
    pub fn blocks(&self) -> Vec<(String, &[f64])> {
        let mut out = vec![
            (
                "encoder_embedding".to_string(),
                self.encoder_embedding.as_slice().unwrap(),
            ),
            (
                "decoder_embedding".to_string(),
                self.decoder_embedding.as_slice().unwrap(),
            ),
        ];
        gru_blocks("encoder", &self.encoder, &mut out);
        for (k, cell) in self.child_cells.iter().enumerate() {
            gru_blocks(&format!("cell{}", k + 1), cell, &mut out);
        }
        head_blocks("root_head", &self.root_head, &mut out);
        for (k, head) in self.child_heads.iter().enumerate() {
            head_blocks(&format!("child_head{}", k + 1), head, &mut out);
        }
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out = vec![
            (
                "encoder_embedding".to_string(),
                self.encoder_embedding.as_slice_mut().unwrap(),
            ),
            (
                "decoder_embedding".to_string(),
                self.decoder_embedding.as_slice_mut().unwrap(),
            ),
        ];
        gru_blocks_mut("encoder", &mut self.encoder, &mut out);
        for (k, cell) in self.child_cells.iter_mut().enumerate() {
            gru_blocks_mut(&format!("cell{}", k + 1), cell, &mut out);
        }
        head_blocks_mut("root_head", &mut self.root_head, &mut out);
        for (k, head) in self.child_heads.iter_mut().enumerate() {
            head_blocks_mut(&format!("child_head{}", k + 1), head, &mut out);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.blocks().iter().map(|(_, b)| b.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_finite(&self) -> bool {
        self.blocks()
            .iter()
            .all(|(_, b)| b.iter().all(|v| v.is_finite()))
    }

    /// `self += scale * other`, block by block.
    pub fn add_scaled(&mut self, scale: f64, other: &Params) {
        for ((_, dst), (_, src)) in self.blocks_mut().into_iter().zip(other.blocks()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, block) in self.blocks_mut() {
            block.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        for (_, block) in out.blocks_mut() {
            block.fill(0.0);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims() -> Dims {
        Dims {
            vocab: 7,
            embed: 3,
            hidden: 4,
            arity: 3,
        }
    }

    #[test]
    fn uniform_init_is_bounded_and_seeded() {
        let a = Params::uniform(dims(), 0.01, 42);
        let b = Params::uniform(dims(), 0.01, 42);
        let c = Params::uniform(dims(), 0.01, 43);
        assert_eq!(a, b);
        assert_ne!(a, c);
        for (_, block) in a.blocks() {
            assert!(block.iter().all(|v| v.abs() <= 0.01));
        }
    }

    #[test]
    fn block_order_is_fixed() {
        let p = Params::zeros(dims());
        let names: Vec<String> = p.blocks().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names[0], "encoder_embedding");
        assert_eq!(names[2], "encoder.w");
        assert_eq!(names[5], "cell1.w");
        assert_eq!(names.last().unwrap(), "child_head3.out_b");
        assert_eq!(names.len(), 2 + 3 + 3 * 3 + 4 + 3 * 4);
    }

    #[test]
    fn add_scaled_accumulates() {
        let mut a = Params::uniform(dims(), 1.0, 1);
        let b = a.clone();
        a.add_scaled(-1.0, &b);
        assert!(a
            .blocks()
            .iter()
            .all(|(_, blk)| blk.iter().all(|&v| v == 0.0)));
    }
}
