//! One step of a standard LSTM cell.
//!
//! Weights are a single `[input + hidden, 4 * hidden]` matrix acting on
//! `[x ; h]`, with gate column blocks ordered input, forget, output,
//! candidate. The bias is `[4 * hidden]`.

use crate::error::{Error, Result};
use crate::numerics::kernels::{mat_vec_t_acc, outer_acc, sigmoid, vec_mat_acc};
use crate::numerics::{ParamStore, Tensor};

/// Borrowed view of the two LSTM parameter tensors.
#[derive(Clone, Copy, Debug)]
pub struct LstmWeights<'a> {
    pub w: &'a Tensor,
    pub b: &'a Tensor,
}

impl<'a> LstmWeights<'a> {
    /// Looks up `<prefix>.w` and `<prefix>.b`.
    pub fn from_store(store: &'a ParamStore, prefix: &str) -> Result<Self> {
        Ok(LstmWeights {
            w: store.get(&format!("{prefix}.w"))?,
            b: store.get(&format!("{prefix}.b"))?,
        })
    }

    pub fn hidden(&self) -> usize {
        self.b.len() / 4
    }

    pub fn input(&self) -> usize {
        self.w.rows() - self.hidden()
    }
}

/// Everything the backward pass needs from one forward step.
#[derive(Clone, Debug)]
pub struct LstmCache {
    xh: Vec<f64>,
    c_prev: Vec<f64>,
    /// Post-activation gates, laid out `[i | f | o | g]`.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

pub fn lstm_step(
    x: &[f64],
    h: &[f64],
    c: &[f64],
    weights: LstmWeights<'_>,
) -> Result<(Vec<f64>, Vec<f64>, LstmCache)> {
    let hid = weights.b.len() / 4;
    if weights.b.len() != 4 * hid
        || weights.w.rank() != 2
        || weights.w.cols() != 4 * hid
        || weights.w.rows() != x.len() + hid
        || h.len() != hid
        || c.len() != hid
    {
        return Err(Error::Dimension {
            op: "lstm_step",
            lhs: vec![x.len(), h.len(), c.len()],
            rhs: weights.w.shape().to_vec(),
        });
    }

    let mut xh = Vec::with_capacity(x.len() + hid);
    xh.extend_from_slice(x);
    xh.extend_from_slice(h);

    let mut gates = weights.b.data().to_vec();
    vec_mat_acc(&xh, weights.w.data(), 4 * hid, &mut gates);
    for v in &mut gates[..3 * hid] {
        *v = sigmoid(*v);
    }
    for v in &mut gates[3 * hid..] {
        *v = v.tanh();
    }

    let mut c2 = vec![0.0; hid];
    let mut h2 = vec![0.0; hid];
    let mut tanh_c = vec![0.0; hid];
    for k in 0..hid {
        let (i, f, o, g) = (gates[k], gates[hid + k], gates[2 * hid + k], gates[3 * hid + k]);
        c2[k] = f * c[k] + i * g;
        tanh_c[k] = c2[k].tanh();
        h2[k] = o * tanh_c[k];
    }

    let cache = LstmCache {
        xh,
        c_prev: c.to_vec(),
        gates,
        tanh_c,
    };
    Ok((h2, c2, cache))
}

/// Backward through one step. Accumulates into `dw`/`db` and returns
/// `(dx, dh_prev, dc_prev)`.
pub fn lstm_step_backward(
    cache: &LstmCache,
    weights: LstmWeights<'_>,
    dh: &[f64],
    dc: &[f64],
    dw: &mut Tensor,
    db: &mut Tensor,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let hid = dh.len();
    let gates = &cache.gates;
    let mut dpre = vec![0.0; 4 * hid];
    let mut dc_prev = vec![0.0; hid];
    for k in 0..hid {
        let (i, f, o, g) = (gates[k], gates[hid + k], gates[2 * hid + k], gates[3 * hid + k]);
        let tc = cache.tanh_c[k];
        let dct = dc[k] + dh[k] * o * (1.0 - tc * tc);
        let d_o = dh[k] * tc;
        let d_i = dct * g;
        let d_f = dct * cache.c_prev[k];
        let d_g = dct * i;
        dc_prev[k] = dct * f;
        dpre[k] = d_i * i * (1.0 - i);
        dpre[hid + k] = d_f * f * (1.0 - f);
        dpre[2 * hid + k] = d_o * o * (1.0 - o);
        dpre[3 * hid + k] = d_g * (1.0 - g * g);
    }
    outer_acc(&cache.xh, &dpre, dw.data_mut());
    for (d, v) in db.data_mut().iter_mut().zip(&dpre) {
        *d += v;
    }
    let mut dxh = vec![0.0; cache.xh.len()];
    mat_vec_t_acc(weights.w.data(), &dpre, &mut dxh);
    let dh_prev = dxh.split_off(cache.xh.len() - hid);
    (dxh, dh_prev, dc_prev)
}
