use rand::RngCore;

use crate::corpus::EncodedSentence;
use crate::discriminator::model::output_of;
use crate::discriminator::Discriminator;
use crate::error::{Error, Result};
use crate::numerics::kernels::{cross_entropy_grad, log_sum_exp, sigmoid, softplus};
use crate::numerics::GradMap;

/// Source loss, relation loss and their sum for one batch.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DiscLosses {
    pub source: f64,
    pub relation: f64,
    pub total: f64,
}

/// Shared forward/backward over a batch. Both loss values are always
/// computed; gradients are weighted by `w_src` and `w_rel`.
fn batch_losses(
    disc: &Discriminator,
    real: &[EncodedSentence],
    fake: &[EncodedSentence],
    w_src: f64,
    w_rel: f64,
    mut dropout: Option<&mut dyn RngCore>,
) -> Result<(DiscLosses, GradMap)> {
    let k = disc.cfg.relations;
    for s in real.iter().chain(fake) {
        if s.relation >= k {
            return Err(Error::OutOfRange {
                what: "relation label",
                index: s.relation,
                len: k,
            });
        }
    }
    let n_all = real.len() + fake.len();
    if n_all == 0 {
        return Err(Error::Empty("discriminator batch"));
    }
    let mut grads = GradMap::zeros_like(&disc.params);
    let (mut source, mut relation) = (0.0, 0.0);
    let rel_scale = 1.0 / n_all as f64;
    for (batch, is_real) in [(real, true), (fake, false)] {
        if batch.is_empty() {
            continue;
        }
        let src_scale = 1.0 / batch.len() as f64;
        for s in batch {
            let rng: Option<&mut dyn RngCore> = match dropout {
                Some(ref mut r) => Some(&mut **r),
                None => None,
            };
            let tr = disc.forward_trace(s, rng)?;
            let z = tr.source_logit;
            // -log sigmoid(z) = softplus(-z), -log(1 - sigmoid(z)) = softplus(z)
            let (term, dz) = if is_real {
                (softplus(-z), sigmoid(z) - 1.0)
            } else {
                (softplus(z), sigmoid(z))
            };
            source += term * src_scale;
            relation += (log_sum_exp(&tr.relation_logits) - tr.relation_logits[s.relation]) * rel_scale;
            let probs = output_of(&tr).relation_dist;
            let drel = cross_entropy_grad(&probs, s.relation, w_rel * rel_scale);
            disc.backward_trace(&tr, w_src * dz * src_scale, &drel, &mut grads)?;
        }
    }
    let losses = DiscLosses {
        source,
        relation,
        total: source + relation,
    };
    if !losses.total.is_finite() {
        return Err(Error::NonFinite("discriminator loss".into()));
    }
    Ok((losses, grads))
}

fn require_both(real: &[EncodedSentence], fake: &[EncodedSentence]) -> Result<()> {
    if real.is_empty() {
        return Err(Error::Empty("real batch"));
    }
    if fake.is_empty() {
        return Err(Error::Empty("fake batch"));
    }
    Ok(())
}

/// `-mean_real log p_real - mean_fake log(1 - p_real)`.
pub fn loss_source(
    disc: &Discriminator,
    real: &[EncodedSentence],
    fake: &[EncodedSentence],
    dropout: Option<&mut dyn RngCore>,
) -> Result<(f64, GradMap)> {
    require_both(real, fake)?;
    let (l, g) = batch_losses(disc, real, fake, 1.0, 0.0, dropout)?;
    Ok((l.source, g))
}

/// Mean relation cross-entropy over real and fake sentences together; fakes
/// are scored against their conditioning label. Either side may be empty.
pub fn loss_relation(
    disc: &Discriminator,
    real: &[EncodedSentence],
    fake: &[EncodedSentence],
    dropout: Option<&mut dyn RngCore>,
) -> Result<(f64, GradMap)> {
    let (l, g) = batch_losses(disc, real, fake, 0.0, 1.0, dropout)?;
    Ok((l.relation, g))
}

/// Both losses and the gradient of their sum from a single pass.
pub fn loss_total(
    disc: &Discriminator,
    real: &[EncodedSentence],
    fake: &[EncodedSentence],
    dropout: Option<&mut dyn RngCore>,
) -> Result<(DiscLosses, GradMap)> {
    require_both(real, fake)?;
    batch_losses(disc, real, fake, 1.0, 1.0, dropout)
}
