use crate::error::{Error, Result};
use crate::generator::{GeneratedSample, Generator, SeqGrads};
use crate::numerics::{adam_step, clip_gradients, GradMap};

/// Gradient of `q * ln softmax(logits)[action]` w.r.t. the logits:
/// `q * (onehot(action) - probs)`.
pub fn score_function_grad(probs: &[f64], action: usize, q: f64) -> Vec<f64> {
    let mut g: Vec<f64> = probs.iter().map(|p| -q * p).collect();
    g[action] += q;
    g
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolicyOptions {
    pub lr: f64,
    pub clip: f64,
}

impl Default for PolicyOptions {
    fn default() -> Self {
        PolicyOptions { lr: 1e-3, clip: 5.0 }
    }
}

/// Surrogate loss `-(1/B) sum_i sum_t Q_it ln G(y_it | prefix)` and its
/// gradient. Its negated gradient is the sampled policy gradient.
pub fn policy_gradient_loss(gen: &Generator, samples: &[GeneratedSample], rewards: &[Vec<f64>]) -> Result<(f64, GradMap)> {
    if samples.len() != rewards.len() {
        return Err(Error::Contract(format!(
            "{} samples but {} reward rows",
            samples.len(),
            rewards.len()
        )));
    }
    if samples.is_empty() {
        return Err(Error::Empty("policy-gradient batch"));
    }
    let scale = 1.0 / samples.len() as f64;
    let mut grads = SeqGrads::zeros(gen);
    let mut loss = 0.0;
    for (s, q) in samples.iter().zip(rewards) {
        if q.len() != s.ids.len() {
            return Err(Error::Contract(format!(
                "reward row of length {} for {} tokens",
                q.len(),
                s.ids.len()
            )));
        }
        let trace = gen.forward_trace(s.relation, &s.noise, s.ids.len(), |t, _| s.ids[t - 1])?;
        let mut dlogits = Vec::with_capacity(s.ids.len());
        for (t, step) in trace.steps.iter().enumerate() {
            let y = s.ids[t];
            loss -= scale * q[t] * step.probs[y].max(f64::MIN_POSITIVE).ln();
            // descent direction is the negated ascent gradient
            dlogits.push(score_function_grad(&step.probs, y, -scale * q[t]));
        }
        gen.backward_trace(&trace, &dlogits, [0.0, 0.0], &mut grads);
    }
    Ok((loss, grads.into_grad_map(gen)))
}

/// One REINFORCE update: surrogate gradient, clipping, Adam.
pub fn policy_gradient_step(
    gen: &mut Generator,
    samples: &[GeneratedSample],
    rewards: &[Vec<f64>],
    opts: &PolicyOptions,
) -> Result<f64> {
    let (loss, mut grads) = policy_gradient_loss(gen, samples, rewards)?;
    clip_gradients(&mut grads, opts.clip);
    adam_step(&mut gen.params, &grads, opts.lr)?;
    Ok(loss)
}
