//! Central finite-difference gradient checking.
//!
//! Uses the five-point stencil, whose truncation error is O(h^4), so a
//! step near 1e-3 keeps both truncation and rounding error small.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{GradMap, ParamStore};

/// Entries checked when a store is too large to check exhaustively.
pub const DEFAULT_SAMPLE: usize = 400;

/// Smallest denominator of the relative error in [`check_gradients`].
pub const DEFAULT_FLOOR: f64 = 1e-8;

/// Max relative error `|a - n| / max(1e-8, |a| + |n|)` between the analytic
/// gradient returned by `loss_fn` and central differences with step `eps`,
/// over every entry (or [`DEFAULT_SAMPLE`] random entries when the store is
/// larger).
pub fn check_gradients<F>(store: &ParamStore, eps: f64, loss_fn: F) -> Result<f64>
where
    F: FnMut(&ParamStore) -> Result<(f64, GradMap)>,
{
    check_gradients_sampled(store, eps, DEFAULT_SAMPLE, 0, DEFAULT_FLOOR, loss_fn)
}

/// Like [`check_gradients`] with an explicit entry budget, sampling seed and
/// denominator floor. A larger floor ignores entries whose true gradient is
/// smaller than the rounding noise of the differences, roughly
/// `|loss| * 1e-16 / eps`.
pub fn check_gradients_sampled<F>(
    store: &ParamStore,
    eps: f64,
    max_entries: usize,
    seed: u64,
    floor: f64,
    mut loss_fn: F,
) -> Result<f64>
where
    F: FnMut(&ParamStore) -> Result<(f64, GradMap)>,
{
    let (loss, analytic) = loss_fn(store)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }

    let entries: Vec<(String, usize)> = store
        .iter()
        .flat_map(|(name, t)| (0..t.len()).map(move |i| (name.to_string(), i)))
        .collect();
    let chosen: Vec<&(String, usize)> = if entries.len() <= max_entries {
        entries.iter().collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = sample(&mut rng, entries.len(), max_entries).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| &entries[i]).collect()
    };

    let mut probe = store.clone();
    let mut worst = 0.0f64;
    for (name, i) in chosen {
        let a = analytic
            .get(name)
            .ok_or_else(|| Error::MissingGradient(name.clone()))?
            .data()[*i];
        let orig = store.get(name)?.data()[*i];
        // fourth-order central stencil: f(x+2h), f(x+h), f(x-h), f(x-2h)
        let mut at = |offset: f64| -> Result<f64> {
            probe.get_mut(name)?.data_mut()[*i] = orig + offset;
            let (l, _) = loss_fn(&probe)?;
            if !l.is_finite() {
                return Err(Error::NonFinite(format!("loss perturbing {name}[{i}]")));
            }
            Ok(l)
        };
        let (p1, m1, p2, m2) = (at(eps)?, at(-eps)?, at(2.0 * eps)?, at(-2.0 * eps)?);
        probe.get_mut(name)?.data_mut()[*i] = orig;
        let numeric = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * eps);
        let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(floor);
        worst = worst.max(rel);
    }
    Ok(worst)
}
