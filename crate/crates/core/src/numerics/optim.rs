//! Named parameter storage, gradient maps, Adam and global-norm clipping.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Named parameters with their Adam moment estimates.
///
/// Iteration order is the lexicographic order of names, which keeps every
/// reduction over parameters deterministic.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    params: BTreeMap<String, Tensor>,
    m1: BTreeMap<String, Tensor>,
    m2: BTreeMap<String, Tensor>,
    t: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Result<()> {
        let name = name.into();
        if self.params.contains_key(&name) {
            return Err(Error::DuplicateParameter(name));
        }
        self.m1.insert(name.clone(), Tensor::zeros(value.shape()));
        self.m2.insert(name.clone(), Tensor::zeros(value.shape()));
        self.params.insert(name, value);
        Ok(())
    }

    /// Inserts a parameter initialised from `U[-bound, bound]`.
    pub fn insert_uniform<R: Rng + ?Sized>(
        &mut self,
        name: &str,
        shape: &[usize],
        bound: f64,
        rng: &mut R,
    ) -> Result<()> {
        self.insert(name, Tensor::uniform(shape, bound, rng))
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.params
            .get(name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        self.params
            .get_mut(name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn num_entries(&self) -> usize {
        self.params.values().map(Tensor::len).sum()
    }

    /// Adam step counter.
    pub fn step(&self) -> u64 {
        self.t
    }

    pub fn moments(&self, name: &str) -> Result<(&Tensor, &Tensor)> {
        match (self.m1.get(name), self.m2.get(name)) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(Error::UnknownParameter(name.to_string())),
        }
    }

    pub(crate) fn from_parts(
        params: BTreeMap<String, Tensor>,
        m1: BTreeMap<String, Tensor>,
        m2: BTreeMap<String, Tensor>,
        t: u64,
    ) -> Result<Self> {
        for (name, p) in &params {
            for (tag, m) in [("m1", &m1), ("m2", &m2)] {
                match m.get(name) {
                    Some(v) if v.shape() == p.shape() => {}
                    _ => {
                        return Err(Error::Checkpoint(format!(
                            "moment {tag} for `{name}` missing or misshaped"
                        )))
                    }
                }
            }
        }
        if m1.len() != params.len() || m2.len() != params.len() {
            return Err(Error::Checkpoint("orphan moment tensors".into()));
        }
        Ok(ParamStore { params, m1, m2, t })
    }

    pub(crate) fn parts(
        &self,
    ) -> (
        &BTreeMap<String, Tensor>,
        &BTreeMap<String, Tensor>,
        &BTreeMap<String, Tensor>,
        u64,
    ) {
        (&self.params, &self.m1, &self.m2, self.t)
    }
}

/// Gradients keyed by parameter name.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradMap {
    grads: BTreeMap<String, Tensor>,
}

impl GradMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// A zero gradient for every parameter in `store`.
    pub fn zeros_like(store: &ParamStore) -> Self {
        GradMap {
            grads: store
                .iter()
                .map(|(k, v)| (k.to_string(), Tensor::zeros(v.shape())))
                .collect(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, grad: Tensor) {
        self.grads.insert(name.into(), grad);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.grads.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        self.grads
            .get_mut(name)
            .ok_or_else(|| Error::MissingGradient(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.grads.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    /// Elementwise `self += other`; names absent from `self` are added.
    pub fn add_assign(&mut self, other: &GradMap) -> Result<()> {
        for (name, g) in &other.grads {
            match self.grads.get_mut(name) {
                Some(mine) => mine.add_assign(g)?,
                None => {
                    self.grads.insert(name.clone(), g.clone());
                }
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.grads.values_mut() {
            g.scale(factor);
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.grads.values().map(Tensor::sum_squares).sum::<f64>().sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam update with the default `(0.9, 0.999, 1e-8)`.
pub fn adam_step(store: &mut ParamStore, grads: &GradMap, lr: f64) -> Result<()> {
    adam_step_with(store, grads, lr, AdamConfig::default())
}

pub fn adam_step_with(
    store: &mut ParamStore,
    grads: &GradMap,
    lr: f64,
    cfg: AdamConfig,
) -> Result<()> {
    for (name, p) in &store.params {
        match grads.grads.get(name) {
            None => return Err(Error::MissingGradient(name.clone())),
            Some(g) if g.shape() != p.shape() => {
                return Err(Error::Dimension {
                    op: "adam_step",
                    lhs: p.shape().to_vec(),
                    rhs: g.shape().to_vec(),
                })
            }
            Some(g) => g.check_finite(name)?,
        }
    }
    if let Some(extra) = grads.grads.keys().find(|k| !store.params.contains_key(*k)) {
        return Err(Error::UnknownParameter(extra.clone()));
    }

    store.t += 1;
    let t = store.t as f64;
    let bc1 = 1.0 - cfg.beta1.powf(t);
    let bc2 = 1.0 - cfg.beta2.powf(t);
    for (name, p) in store.params.iter_mut() {
        let g = grads.grads[name].data();
        let m = store.m1.get_mut(name).expect("moment").data_mut();
        let v = store.m2.get_mut(name).expect("moment").data_mut();
        for (((pi, &gi), mi), vi) in p.data_mut().iter_mut().zip(g).zip(m).zip(v) {
            *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * gi;
            *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * gi * gi;
            let m_hat = *mi / bc1;
            let v_hat = *vi / bc2;
            *pi -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
        p.check_finite(name)?;
    }
    Ok(())
}

/// Rescales all gradients by `threshold / N` when their global L2 norm `N`
/// exceeds `threshold`. The result always has norm `<= threshold`, so
/// clipping twice is the same as clipping once.
pub fn clip_gradients(grads: &mut GradMap, threshold: f64) -> f64 {
    let norm = grads.global_norm();
    if norm <= threshold || norm == 0.0 {
        return norm;
    }
    let original = grads.clone();
    let mut factor = threshold / norm;
    loop {
        grads.clone_from(&original);
        grads.scale(factor);
        if grads.global_norm() <= threshold {
            break;
        }
        factor *= 1.0 - f64::EPSILON;
    }
    norm
}
