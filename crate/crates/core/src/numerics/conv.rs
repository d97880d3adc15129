//! Same-padded 1-D convolution over token embeddings and the three-segment
//! max pooling keyed to the entity positions.

use crate::error::{Error, Result};
use crate::numerics::kernels::{mat_vec_t_acc, outer_acc, vec_mat_acc};
use crate::numerics::Tensor;

/// Left zero-padding for a window; right padding is `window - 1 - left`.
pub fn left_pad(window: usize) -> usize {
    (window - 1) / 2
}

fn window_input(x: &Tensor, pos: usize, window: usize, buf: &mut [f64]) {
    let (len, dim) = (x.rows(), x.cols());
    let left = left_pad(window);
    for k in 0..window {
        let slot = &mut buf[k * dim..(k + 1) * dim];
        let src = (pos + k).checked_sub(left).filter(|&s| s < len);
        match src {
            Some(s) => slot.copy_from_slice(x.row(s)),
            None => slot.fill(0.0),
        }
    }
}

fn check_conv(x: &Tensor, filters: &Tensor, bias: &Tensor, window: usize) -> Result<()> {
    let len = x.rows();
    // same-padding adds `window - 1` zero rows in total
    if window == 0 || window > len + window - 1 {
        return Err(Error::Contract(format!(
            "window {window} larger than padded sequence of length {len}"
        )));
    }
    if x.rank() != 2 || filters.rank() != 2 || filters.rows() != window * x.cols() {
        return Err(Error::Dimension {
            op: "conv1d",
            lhs: x.shape().to_vec(),
            rhs: filters.shape().to_vec(),
        });
    }
    if bias.len() != filters.cols() {
        return Err(Error::Dimension {
            op: "conv1d bias",
            lhs: filters.shape().to_vec(),
            rhs: bias.shape().to_vec(),
        });
    }
    Ok(())
}

/// `x: [len, dim]`, `filters: [window * dim, n_filters]`, `bias: [n_filters]`
/// → `[len, n_filters]`. Row `k * dim + e` of `filters` weights embedding
/// component `e` at window offset `k`.
pub fn conv1d(x: &Tensor, filters: &Tensor, bias: &Tensor, window: usize) -> Result<Tensor> {
    check_conv(x, filters, bias, window)?;
    let (len, dim, nf) = (x.rows(), x.cols(), filters.cols());
    let mut out = Vec::with_capacity(len * nf);
    let mut buf = vec![0.0; window * dim];
    for p in 0..len {
        window_input(x, p, window, &mut buf);
        let mut y = bias.data().to_vec();
        vec_mat_acc(&buf, filters.data(), nf, &mut y);
        out.extend_from_slice(&y);
    }
    Tensor::new(vec![len, nf], out)
}

/// Returns `(dx, dfilters, dbias)` for upstream `dy: [len, n_filters]`.
pub fn conv1d_backward(
    x: &Tensor,
    filters: &Tensor,
    window: usize,
    dy: &Tensor,
) -> (Tensor, Tensor, Tensor) {
    let (len, dim, nf) = (x.rows(), x.cols(), filters.cols());
    let left = left_pad(window);
    let mut dx = Tensor::zeros(x.shape());
    let mut dw = Tensor::zeros(filters.shape());
    let mut db = Tensor::zeros(&[nf]);
    let mut buf = vec![0.0; window * dim];
    let mut dbuf = vec![0.0; window * dim];
    for p in 0..len {
        let g = dy.row(p);
        if g.iter().all(|&v| v == 0.0) {
            continue;
        }
        window_input(x, p, window, &mut buf);
        outer_acc(&buf, g, dw.data_mut());
        for (d, v) in db.data_mut().iter_mut().zip(g) {
            *d += v;
        }
        dbuf.fill(0.0);
        mat_vec_t_acc(filters.data(), g, &mut dbuf);
        for k in 0..window {
            if let Some(s) = (p + k).checked_sub(left).filter(|&s| s < len) {
                for (d, v) in dx.row_mut(s).iter_mut().zip(&dbuf[k * dim..(k + 1) * dim]) {
                    *d += v;
                }
            }
        }
    }
    (dx, dw, db)
}

/// Result of [`piecewise_max_pool`]: values laid out segment-major
/// (`segment * n_filters + filter`) plus the winning row of each slot.
#[derive(Clone, Debug, PartialEq)]
pub struct Pooled {
    pub values: Vec<f64>,
    pub argmax: Vec<Option<usize>>,
}

/// Segment bounds `[0, e1p]`, `[e1p+1, e2p]`, `[e2p+1, len-1]` as half-open ranges.
pub fn segments(e1p: usize, e2p: usize, len: usize) -> [std::ops::Range<usize>; 3] {
    [0..e1p + 1, e1p + 1..e2p + 1, e2p + 1..len]
}

/// Max over each of the three entity-delimited segments, per filter.
/// Empty segments pool to 0. Ties go to the earliest row.
pub fn piecewise_max_pool(features: &Tensor, e1p: usize, e2p: usize) -> Result<Pooled> {
    let (len, nf) = (features.rows(), features.cols());
    if features.rank() != 2 || e1p >= e2p || e2p >= len {
        return Err(Error::Positions { e1p, e2p, len });
    }
    let mut values = vec![0.0; 3 * nf];
    let mut argmax = vec![None; 3 * nf];
    for (s, range) in segments(e1p, e2p, len).into_iter().enumerate() {
        for f in 0..nf {
            let mut best: Option<(usize, f64)> = None;
            for r in range.clone() {
                let v = features.data()[r * nf + f];
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((r, v));
                }
            }
            if let Some((r, v)) = best {
                values[s * nf + f] = v;
                argmax[s * nf + f] = Some(r);
            }
        }
    }
    Ok(Pooled { values, argmax })
}

/// Routes each pooled gradient to its argmax entry.
pub fn piecewise_max_pool_backward(pooled: &Pooled, dpool: &[f64], len: usize, nf: usize) -> Tensor {
    let mut d = Tensor::zeros(&[len, nf]);
    for (slot, (arg, g)) in pooled.argmax.iter().zip(dpool).enumerate() {
        if let Some(r) = arg {
            d.data_mut()[r * nf + slot % nf] += g;
        }
    }
    d
}
