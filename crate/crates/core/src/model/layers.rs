//! GRU cell and softmax head with explicit forward caches and backward
//! passes.

use ndarray::{s, Array1, Array2, ArrayView1, Zip};

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// `dst += a ⊗ b`
fn add_outer(dst: &mut Array2<f64>, a: ArrayView1<f64>, b: ArrayView1<f64>) {
    for (mut row, &ai) in dst.rows_mut().into_iter().zip(a.iter()) {
        if ai != 0.0 {
            row.scaled_add(ai, &b);
        }
    }
}

/// Log-softmax with max subtraction.
pub fn log_softmax(logits: &Array1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let lse = max + logits.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
    logits.mapv(|v| v - lse)
}

/// Gated recurrent cell, gates stacked as `[reset; update; candidate]`:
///
/// ```text
/// r  = σ(W_r x + U_r h + b_r)
/// z  = σ(W_z x + U_z h + b_z)
/// n  = tanh(W_n x + U_n (r ⊙ h) + b_n)
/// h' = (1 - z) ⊙ n + z ⊙ h
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct Gru {
    /// `3H × I`
    pub w: Array2<f64>,
    /// `3H × H`
    pub u: Array2<f64>,
    /// `3H`
    pub b: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct GruCache {
    x: Array1<f64>,
    h: Array1<f64>,
    r: Array1<f64>,
    z: Array1<f64>,
    n: Array1<f64>,
    rh: Array1<f64>,
}

impl Gru {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w: Array2::zeros((3 * hidden, input)),
            u: Array2::zeros((3 * hidden, hidden)),
            b: Array1::zeros(3 * hidden),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.u.ncols()
    }

    pub fn forward(&self, x: &Array1<f64>, h: &Array1<f64>) -> (Array1<f64>, GruCache) {
        let hd = self.hidden_dim();
        let wx = self.w.dot(x) + &self.b;
        let urz = self.u.slice(s![..2 * hd, ..]).dot(h);
        let r = Zip::from(wx.slice(s![..hd]))
            .and(urz.slice(s![..hd]))
            .map_collect(|&a, &b| sigmoid(a + b));
        let z = Zip::from(wx.slice(s![hd..2 * hd]))
            .and(urz.slice(s![hd..]))
            .map_collect(|&a, &b| sigmoid(a + b));
        let rh = &r * h;
        let un = self.u.slice(s![2 * hd.., ..]).dot(&rh);
        let n = Zip::from(wx.slice(s![2 * hd..]))
            .and(&un)
            .map_collect(|&a, &b| (a + b).tanh());
        let out = Zip::from(&z)
            .and(&n)
            .and(h)
            .map_collect(|&z, &n, &h| (1.0 - z) * n + z * h);
        let cache = GruCache {
            x: x.clone(),
            h: h.clone(),
            r,
            z,
            n,
            rh,
        };
        (out, cache)
    }

    pub fn step(&self, x: &Array1<f64>, h: &Array1<f64>) -> Array1<f64> {
        self.forward(x, h).0
    }

    /// Accumulates parameter gradients into `grad`; returns `(dx, dh)`.
    pub fn backward(
        &self,
        cache: &GruCache,
        dout: &Array1<f64>,
        grad: &mut Gru,
    ) -> (Array1<f64>, Array1<f64>) {
        let hd = self.hidden_dim();
        let GruCache { x, h, r, z, n, rh } = cache;
        let mut da = Array1::zeros(3 * hd);
        let mut dh = Array1::zeros(hd);
        for i in 0..hd {
            let dn = dout[i] * (1.0 - z[i]);
            let dz = dout[i] * (h[i] - n[i]);
            dh[i] = dout[i] * z[i];
            da[hd + i] = dz * z[i] * (1.0 - z[i]);
            da[2 * hd + i] = dn * (1.0 - n[i] * n[i]);
        }
        let da_n = da.slice(s![2 * hd..]).to_owned();
        let drh = self.u.slice(s![2 * hd.., ..]).t().dot(&da_n);
        for i in 0..hd {
            let dr = drh[i] * h[i];
            dh[i] += drh[i] * r[i];
            da[i] = dr * r[i] * (1.0 - r[i]);
        }
        let da_rz = da.slice(s![..2 * hd]);
        dh += &self.u.slice(s![..2 * hd, ..]).t().dot(&da_rz);

        add_outer(&mut grad.w, da.view(), x.view());
        {
            let mut u_rz = grad.u.slice_mut(s![..2 * hd, ..]);
            for (mut row, &a) in u_rz.rows_mut().into_iter().zip(da_rz.iter()) {
                row.scaled_add(a, h);
            }
            let mut u_n = grad.u.slice_mut(s![2 * hd.., ..]);
            for (mut row, &a) in u_n.rows_mut().into_iter().zip(da_n.iter()) {
                row.scaled_add(a, rh);
            }
        }
        grad.b += &da;
        let dx = self.w.t().dot(&da);
        (dx, dh)
    }
}

/// `log_softmax(O · tanh(A z + a) + o)`
#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    /// `M × I`
    pub hidden_w: Array2<f64>,
    pub hidden_b: Array1<f64>,
    /// `V × M`
    pub out_w: Array2<f64>,
    pub out_b: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct HeadCache {
    input: Array1<f64>,
    act: Array1<f64>,
    log_probs: Array1<f64>,
}

impl HeadCache {
    pub fn log_probs(&self) -> &Array1<f64> {
        &self.log_probs
    }
}

impl Head {
    pub fn zeros(input: usize, hidden: usize, vocab: usize) -> Self {
        Self {
            hidden_w: Array2::zeros((hidden, input)),
            hidden_b: Array1::zeros(hidden),
            out_w: Array2::zeros((vocab, hidden)),
            out_b: Array1::zeros(vocab),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.hidden_w.ncols()
    }

    pub fn forward(&self, input: Array1<f64>) -> HeadCache {
        let act = (self.hidden_w.dot(&input) + &self.hidden_b).mapv(f64::tanh);
        let logits = self.out_w.dot(&act) + &self.out_b;
        HeadCache {
            input,
            act,
            log_probs: log_softmax(&logits),
        }
    }

    /// Backward pass of `-log p(target)`; returns the gradient with respect
    /// to the head input.
    pub fn backward(&self, cache: &HeadCache, target: usize, grad: &mut Head) -> Array1<f64> {
        let mut dlogits = cache.log_probs.mapv(f64::exp);
        dlogits[target] -= 1.0;
        add_outer(&mut grad.out_w, dlogits.view(), cache.act.view());
        grad.out_b += &dlogits;
        let dact = self.out_w.t().dot(&dlogits);
        let dpre = Zip::from(&dact)
            .and(&cache.act)
            .map_collect(|&d, &a| d * (1.0 - a * a));
        add_outer(&mut grad.hidden_w, dpre.view(), cache.input.view());
        grad.hidden_b += &dpre;
        self.hidden_w.t().dot(&dpre)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn log_softmax_normalizes_large_logits() {
        let lp = log_softmax(&array![1000.0, 1000.0, 0.0]);
        let total: f64 = lp.iter().map(|v| v.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((lp[0] - 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn zero_gru_halves_previous_state() {
        // all gates at σ(0) = 1/2, candidate tanh(0) = 0
        let gru = Gru::zeros(2, 2);
        let h = array![0.8, -0.4];
        let out = gru.step(&array![1.0, 2.0], &h);
        assert_eq!(out, array![0.4, -0.2]);
    }

    #[test]
    fn gru_matches_scalar_hand_computation() {
        let mut gru = Gru::zeros(1, 1);
        gru.w = array![[0.5], [-0.3], [0.2]];
        gru.u = array![[0.1], [0.4], [-0.6]];
        gru.b = array![0.05, -0.05, 0.1];
        let (x, h) = (0.7, 0.3);
        let r = 1.0 / (1.0 + (-(0.5 * x + 0.1 * h + 0.05f64)).exp());
        let z = 1.0 / (1.0 + (-(-0.3 * x + 0.4 * h - 0.05f64)).exp());
        let n = (0.2 * x - 0.6 * (r * h) + 0.1f64).tanh();
        let expected = (1.0 - z) * n + z * h;
        let out = gru.step(&array![x], &array![h]);
        assert!((out[0] - expected).abs() < 1e-15);
    }
}
