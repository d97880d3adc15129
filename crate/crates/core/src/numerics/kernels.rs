//! Dense kernels with hand-written backward passes.
//!
//! Activations travel as plain slices; weights are [`Tensor`]s with shape
//! `[in, out]` so that `y = x W + b`.

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// `y += x W` for a single row `x` of width `n_in` and `W: [n_in, n_out]`.
#[inline]
pub(crate) fn vec_mat_acc(x: &[f64], w: &[f64], n_out: usize, y: &mut [f64]) {
    debug_assert_eq!(w.len(), x.len() * n_out);
    debug_assert_eq!(y.len(), n_out);
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        let row = &w[i * n_out..(i + 1) * n_out];
        for (yj, &wij) in y.iter_mut().zip(row) {
            *yj += xi * wij;
        }
    }
}

/// `dx += W dy` (the transpose product used by backward passes).
#[inline]
pub(crate) fn mat_vec_t_acc(w: &[f64], dy: &[f64], dx: &mut [f64]) {
    let n_out = dy.len();
    for (i, dxi) in dx.iter_mut().enumerate() {
        let row = &w[i * n_out..(i + 1) * n_out];
        let mut acc = 0.0;
        for (&wij, &g) in row.iter().zip(dy) {
            acc += wij * g;
        }
        *dxi += acc;
    }
}

/// `dW += x^T dy` (outer product accumulation).
#[inline]
pub(crate) fn outer_acc(x: &[f64], dy: &[f64], dw: &mut [f64]) {
    let n_out = dy.len();
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        let row = &mut dw[i * n_out..(i + 1) * n_out];
        for (d, &g) in row.iter_mut().zip(dy) {
            *d += xi * g;
        }
    }
}

fn check_affine(x_cols: usize, x_shape: &[usize], w: &Tensor, b: &Tensor) -> Result<()> {
    if w.rank() != 2 || w.shape()[0] != x_cols {
        return Err(Error::Dimension {
            op: "affine",
            lhs: x_shape.to_vec(),
            rhs: w.shape().to_vec(),
        });
    }
    if b.len() != w.shape()[1] {
        return Err(Error::Dimension {
            op: "affine bias",
            lhs: w.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    Ok(())
}

/// Single-row affine map `x W + b`.
pub fn affine_row(x: &[f64], w: &Tensor, b: &Tensor) -> Result<Vec<f64>> {
    check_affine(x.len(), &[x.len()], w, b)?;
    let mut y = b.data().to_vec();
    vec_mat_acc(x, w.data(), b.len(), &mut y);
    Ok(y)
}

/// Batched affine map: `x: [n, in]` (or a vector treated as `[1, in]`),
/// `W: [in, out]`, `b: [out]` broadcast over rows.
pub fn affine(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    check_affine(x.cols(), x.shape(), w, b)?;
    let (n, n_out) = (x.rows(), b.len());
    let mut out = Vec::with_capacity(n * n_out);
    for r in 0..n {
        let mut y = b.data().to_vec();
        vec_mat_acc(x.row(r), w.data(), n_out, &mut y);
        out.extend_from_slice(&y);
    }
    let shape = if x.rank() <= 1 { vec![n_out] } else { vec![n, n_out] };
    Tensor::new(shape, out)
}

/// Gradients of [`affine`] given upstream `dy` with the output's shape.
pub fn affine_backward(x: &Tensor, w: &Tensor, dy: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
    let n_out = w.cols();
    if dy.cols() != n_out || dy.rows() != x.rows() {
        return Err(Error::Dimension {
            op: "affine backward",
            lhs: x.shape().to_vec(),
            rhs: dy.shape().to_vec(),
        });
    }
    let mut dx = Tensor::zeros(x.shape());
    let mut dw = Tensor::zeros(w.shape());
    let mut db = Tensor::zeros(&[n_out]);
    for r in 0..x.rows() {
        let g = dy.row(r);
        mat_vec_t_acc(w.data(), g, dx.row_mut(r));
        outer_acc(x.row(r), g, dw.data_mut());
        for (d, v) in db.data_mut().iter_mut().zip(g) {
            *d += v;
        }
    }
    Ok((dx, dw, db))
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|&l| (l - max).exp()).sum();
    max + sum.ln()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let z: f64 = p.iter().sum();
    for v in &mut p {
        *v /= z;
    }
    p
}

/// Cross-entropy of `softmax(logits)` against `target`.
///
/// Returns the loss and the probabilities; the gradient w.r.t. the logits is
/// `probs - onehot(target)`.
pub fn softmax_cross_entropy(logits: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
    if target >= logits.len() {
        return Err(Error::OutOfRange {
            what: "class",
            index: target,
            len: logits.len(),
        });
    }
    let loss = log_sum_exp(logits) - logits[target];
    if !loss.is_finite() {
        return Err(Error::NonFinite("softmax_cross_entropy".into()));
    }
    Ok((loss, softmax(logits)))
}

/// In-place `probs - onehot(target)`, scaled.
pub fn cross_entropy_grad(probs: &[f64], target: usize, scale: f64) -> Vec<f64> {
    let mut g: Vec<f64> = probs.iter().map(|p| p * scale).collect();
    g[target] -= scale;
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{check_gradients, GradMap, ParamStore};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn affine_identity() {
        let x = Tensor::vector(vec![1.0, 2.0]);
        let y = affine(&x, &Tensor::identity(2), &Tensor::zeros(&[2])).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0]);
    }

    #[test]
    fn affine_zero_weights_gives_bias() {
        let x = Tensor::vector(vec![5.0, 7.0]);
        let b = Tensor::vector(vec![1.0, 2.0, 3.0]);
        let y = affine(&x, &Tensor::zeros(&[2, 3]), &b).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn affine_matches_scalar_dot_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Tensor::uniform(&[2, 3], 1.0, &mut rng);
        let w = Tensor::uniform(&[3, 2], 1.0, &mut rng);
        let b = Tensor::uniform(&[2], 1.0, &mut rng);
        let y = affine(&x, &w, &b).unwrap();
        assert_eq!(y.shape(), &[2, 2]);
        for r in 0..2 {
            for c in 0..2 {
                let mut dot = b.data()[c];
                for k in 0..3 {
                    dot += x.data()[r * 3 + k] * w.data()[k * 2 + c];
                }
                assert!((y.data()[r * 2 + c] - dot).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn affine_shape_error_names_both_shapes() {
        let err = affine(
            &Tensor::zeros(&[2, 3]),
            &Tensor::zeros(&[4, 2]),
            &Tensor::zeros(&[2]),
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("[4, 2]"), "{msg}");
    }

    #[test]
    fn affine_gradients() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut store = ParamStore::new();
            store.insert("x", Tensor::uniform(&[2, 3], 1.0, &mut rng)).unwrap();
            store.insert("w", Tensor::uniform(&[3, 4], 1.0, &mut rng)).unwrap();
            store.insert("b", Tensor::uniform(&[4], 1.0, &mut rng)).unwrap();
            let coef = Tensor::uniform(&[2, 4], 1.0, &mut rng);
            let err = check_gradients(&store, 1e-5, |s| {
                let (x, w, b) = (s.get("x")?, s.get("w")?, s.get("b")?);
                let y = affine(x, w, b)?;
                let loss = y.data().iter().zip(coef.data()).map(|(a, c)| a * c).sum();
                let (dx, dw, db) = affine_backward(x, w, &coef)?;
                let mut g = GradMap::new();
                g.insert("x", dx);
                g.insert("w", dw);
                g.insert("b", db);
                Ok((loss, g))
            })
            .unwrap();
            assert!(err < 1e-5, "seed {seed}: {err}");
        }
    }

    #[test]
    fn cross_entropy_uniform() {
        let (loss, probs) = softmax_cross_entropy(&[0.0; 4], 1).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-12);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_saturated() {
        let (loss, _) = softmax_cross_entropy(&[100.0, 0.0], 0).unwrap();
        assert!(loss < 1e-6);
    }

    #[test]
    fn cross_entropy_direct_summation() {
        let (loss, _) = softmax_cross_entropy(&[1.0, 2.0, 3.0], 2).unwrap();
        let expected = (1f64.exp() + 2f64.exp() + 3f64.exp()).ln() - 3.0;
        assert!((loss - expected).abs() < 1e-14);
    }

    #[test]
    fn cross_entropy_target_out_of_range() {
        assert!(matches!(
            softmax_cross_entropy(&[0.0, 1.0], 2),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn cross_entropy_gradients() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let mut store = ParamStore::new();
            store.insert("logits", Tensor::uniform(&[5], 3.0, &mut rng)).unwrap();
            let target = (seed % 5) as usize;
            let err = check_gradients(&store, 1e-5, |s| {
                let (loss, probs) = softmax_cross_entropy(s.get("logits")?.data(), target)?;
                let mut g = GradMap::new();
                g.insert("logits", Tensor::vector(cross_entropy_grad(&probs, target, 1.0)));
                Ok((loss, g))
            })
            .unwrap();
            assert!(err < 1e-6, "seed {seed}: {err}");
        }
    }

    #[test]
    fn softplus_is_stable() {
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
    }

    proptest::proptest! {
        #[test]
        fn softmax_sums_to_one(logits in proptest::collection::vec(-50.0f64..50.0, 1..40)) {
            let p = softmax(&logits);
            proptest::prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
