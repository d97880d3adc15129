use rand::{Rng, RngCore, SeedableRng};

use crate::corpus::{position_row, EncodedSentence, MAX_REL_POS, REL_POS_ROWS};
use crate::error::{Error, Result};
use crate::numerics::kernels::{mat_vec_t_acc, outer_acc, sigmoid, softmax, vec_mat_acc};
use crate::numerics::{
    conv1d, conv1d_backward, piecewise_max_pool, piecewise_max_pool_backward, GradMap, ParamStore, Pooled, Tensor,
    INIT_BOUND,
};

#[derive(Clone, Debug, PartialEq)]
pub struct DiscriminatorConfig {
    pub vocab_size: usize,
    pub relations: usize,
    pub word_dim: usize,
    pub position_dim: usize,
    pub filters: usize,
    pub window: usize,
    pub keep_prob: f64,
}

impl DiscriminatorConfig {
    pub fn new(vocab_size: usize, relations: usize) -> Self {
        DiscriminatorConfig {
            vocab_size,
            relations,
            word_dim: 50,
            position_dim: 5,
            filters: 128,
            window: 3,
            keep_prob: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.vocab_size,
            self.relations,
            self.word_dim,
            self.position_dim,
            self.filters,
            self.window,
        ];
        if dims.contains(&0) {
            return Err(Error::Config(format!("invalid discriminator dimensions {self:?}")));
        }
        if !(self.keep_prob > 0.0 && self.keep_prob <= 1.0) {
            return Err(Error::Config(format!("keep probability {} not in (0, 1]", self.keep_prob)));
        }
        Ok(())
    }

    /// Per-token feature width: word plus both position embeddings.
    pub fn input_dim(&self) -> usize {
        self.word_dim + 2 * self.position_dim
    }

    /// Width of the pooled sentence vector.
    pub fn pooled_dim(&self) -> usize {
        3 * self.filters
    }
}

/// Source probability and relation distribution for one sentence.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscOutput {
    /// Clamped into the open unit interval.
    pub p_real: f64,
    pub relation_dist: Vec<f64>,
}

impl DiscOutput {
    /// Index of the most probable relation among `candidates` and its probability.
    pub fn best_among(&self, candidates: &[usize]) -> Option<(usize, f64)> {
        candidates
            .iter()
            .map(|&r| (r, self.relation_dist[r]))
            .fold(None, |best, (r, p)| match best {
                Some((_, bp)) if bp >= p => best,
                _ => Some((r, p)),
            })
    }
}

pub(crate) const WORD_EMB: &str = "dis.word_emb";
pub(crate) const POS_EMB: [&str; 2] = ["dis.pos1_emb", "dis.pos2_emb"];
pub(crate) const CONV_W: &str = "dis.conv.w";
pub(crate) const CONV_B: &str = "dis.conv.b";
pub(crate) const SRC_W: &str = "dis.src.w";
pub(crate) const SRC_B: &str = "dis.src.b";
pub(crate) const REL_W: &str = "dis.rel.w";
pub(crate) const REL_B: &str = "dis.rel.b";

/// Piecewise-pooled CNN with a real/fake head and a relation head.
#[derive(Clone, Debug)]
pub struct Discriminator {
    pub cfg: DiscriminatorConfig,
    pub params: ParamStore,
}

/// Everything the backward pass needs from one forward pass.
pub(crate) struct DiscTrace {
    pub ids: Vec<usize>,
    pub pos_rows: [Vec<usize>; 2],
    pub x: Tensor,
    pub activations: Tensor,
    pub pooled: Pooled,
    /// Pooled features after dropout.
    pub features: Vec<f64>,
    /// Dropout multipliers; `None` in eval mode.
    pub mask: Option<Vec<f64>>,
    pub source_logit: f64,
    pub relation_logits: Vec<f64>,
}

impl Discriminator {
    pub fn new<R: Rng + ?Sized>(cfg: DiscriminatorConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let b = INIT_BOUND;
        let mut p = ParamStore::new();
        p.insert_uniform(WORD_EMB, &[cfg.vocab_size, cfg.word_dim], b, rng)?;
        for name in POS_EMB {
            p.insert_uniform(name, &[REL_POS_ROWS, cfg.position_dim], b, rng)?;
        }
        p.insert_uniform(CONV_W, &[cfg.window * cfg.input_dim(), cfg.filters], b, rng)?;
        p.insert_uniform(CONV_B, &[cfg.filters], b, rng)?;
        p.insert_uniform(SRC_W, &[cfg.pooled_dim(), 1], b, rng)?;
        p.insert_uniform(SRC_B, &[1], b, rng)?;
        p.insert_uniform(REL_W, &[cfg.pooled_dim(), cfg.relations], b, rng)?;
        p.insert_uniform(REL_B, &[cfg.relations], b, rng)?;
        Ok(Discriminator { cfg, params: p })
    }

    pub fn from_params(cfg: DiscriminatorConfig, params: ParamStore) -> Result<Self> {
        let template = Discriminator::new(cfg.clone(), &mut rand_chacha::ChaCha8Rng::seed_from_u64(0))?;
        if params.len() != template.params.len() {
            return Err(Error::Checkpoint("unexpected discriminator parameters".into()));
        }
        for (name, t) in template.params.iter() {
            let got = params.get(name)?;
            if got.shape() != t.shape() {
                return Err(Error::Dimension {
                    op: "discriminator checkpoint",
                    lhs: t.shape().to_vec(),
                    rhs: got.shape().to_vec(),
                });
            }
        }
        Ok(Discriminator { cfg, params })
    }

    fn p(&self, name: &str) -> &Tensor {
        self.params.get(name).expect("discriminator parameter present")
    }

    fn check_input(&self, enc: &EncodedSentence) -> Result<()> {
        let len = enc.len();
        if len < 2 || enc.e1p >= enc.e2p || enc.e2p >= len {
            return Err(Error::Positions {
                e1p: enc.e1p,
                e2p: enc.e2p,
                len,
            });
        }
        if enc.rel_pos1.len() != len || enc.rel_pos2.len() != len {
            return Err(Error::Contract("position features do not match sentence length".into()));
        }
        if let Some(&bad) = enc.ids.iter().find(|&&i| i >= self.cfg.vocab_size) {
            return Err(Error::OutOfRange {
                what: "token",
                index: bad,
                len: self.cfg.vocab_size,
            });
        }
        if let Some(&bad) = enc.rel_pos1.iter().chain(&enc.rel_pos2).find(|&&r| r.abs() > MAX_REL_POS) {
            return Err(Error::OutOfRange {
                what: "relative position",
                index: bad.unsigned_abs() as usize,
                len: REL_POS_ROWS,
            });
        }
        Ok(())
    }

    /// Forward pass. Dropout on the pooled vector is applied only when an
    /// RNG is supplied.
    pub(crate) fn forward_trace(&self, enc: &EncodedSentence, dropout: Option<&mut dyn RngCore>) -> Result<DiscTrace> {
        self.check_input(enc)?;
        let len = enc.len();
        let (wd, pd) = (self.cfg.word_dim, self.cfg.position_dim);
        let pos_rows = [
            enc.rel_pos1.iter().map(|&r| position_row(r)).collect::<Vec<_>>(),
            enc.rel_pos2.iter().map(|&r| position_row(r)).collect::<Vec<_>>(),
        ];
        let mut x = Vec::with_capacity(len * self.cfg.input_dim());
        let (words, pe1, pe2) = (self.p(WORD_EMB), self.p(POS_EMB[0]), self.p(POS_EMB[1]));
        for i in 0..len {
            x.extend_from_slice(&words.row(enc.ids[i])[..wd]);
            x.extend_from_slice(&pe1.row(pos_rows[0][i])[..pd]);
            x.extend_from_slice(&pe2.row(pos_rows[1][i])[..pd]);
        }
        let x = Tensor::new(vec![len, self.cfg.input_dim()], x)?;
        let mut activations = conv1d(&x, self.p(CONV_W), self.p(CONV_B), self.cfg.window)?;
        for v in activations.data_mut() {
            *v = v.tanh();
        }
        let pooled = piecewise_max_pool(&activations, enc.e1p, enc.e2p)?;

        let (features, mask) = match dropout {
            Some(rng) if self.cfg.keep_prob < 1.0 => {
                let keep = self.cfg.keep_prob;
                let mask: Vec<f64> = (0..pooled.values.len())
                    .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                    .collect();
                let f = pooled.values.iter().zip(&mask).map(|(v, m)| v * m).collect();
                (f, Some(mask))
            }
            _ => (pooled.values.clone(), None),
        };

        let mut s = self.p(SRC_B).data().to_vec();
        vec_mat_acc(&features, self.p(SRC_W).data(), 1, &mut s);
        let mut relation_logits = self.p(REL_B).data().to_vec();
        vec_mat_acc(&features, self.p(REL_W).data(), self.cfg.relations, &mut relation_logits);
        if !s[0].is_finite() || relation_logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("discriminator logits".into()));
        }
        Ok(DiscTrace {
            ids: enc.ids.clone(),
            pos_rows,
            x,
            activations,
            pooled,
            features,
            mask,
            source_logit: s[0],
            relation_logits,
        })
    }

    /// Accumulates into `g` the gradient of a loss whose derivatives w.r.t.
    /// the source logit and the relation logits are `ds` and `drel`.
    pub(crate) fn backward_trace(&self, tr: &DiscTrace, ds: f64, drel: &[f64], g: &mut GradMap) -> Result<()> {
        let nfeat = self.cfg.pooled_dim();
        let mut dfeat = vec![0.0; nfeat];
        if ds != 0.0 {
            mat_vec_t_acc(self.p(SRC_W).data(), &[ds], &mut dfeat);
            outer_acc(&tr.features, &[ds], g.get_mut(SRC_W)?.data_mut());
            g.get_mut(SRC_B)?.data_mut()[0] += ds;
        }
        if drel.iter().any(|&v| v != 0.0) {
            mat_vec_t_acc(self.p(REL_W).data(), drel, &mut dfeat);
            outer_acc(&tr.features, drel, g.get_mut(REL_W)?.data_mut());
            for (b, d) in g.get_mut(REL_B)?.data_mut().iter_mut().zip(drel) {
                *b += d;
            }
        }
        if let Some(mask) = &tr.mask {
            for (d, m) in dfeat.iter_mut().zip(mask) {
                *d *= m;
            }
        }
        let len = tr.ids.len();
        let mut dact = piecewise_max_pool_backward(&tr.pooled, &dfeat, len, self.cfg.filters);
        for (d, a) in dact.data_mut().iter_mut().zip(tr.activations.data()) {
            *d *= 1.0 - a * a;
        }
        let (dx, dw, db) = conv1d_backward(&tr.x, self.p(CONV_W), self.cfg.window, &dact);
        g.get_mut(CONV_W)?.add_assign(&dw)?;
        g.get_mut(CONV_B)?.add_assign(&db)?;

        let (wd, pd) = (self.cfg.word_dim, self.cfg.position_dim);
        for i in 0..len {
            let row = dx.row(i);
            for (e, d) in g.get_mut(WORD_EMB)?.row_mut(tr.ids[i]).iter_mut().zip(&row[..wd]) {
                *e += d;
            }
            for k in 0..2 {
                let part = &row[wd + k * pd..wd + (k + 1) * pd];
                for (e, d) in g.get_mut(POS_EMB[k])?.row_mut(tr.pos_rows[k][i]).iter_mut().zip(part) {
                    *e += d;
                }
            }
        }
        Ok(())
    }

    /// Source probability and relation distribution; eval mode unless a
    /// dropout RNG is given.
    pub fn forward(&self, enc: &EncodedSentence, dropout: Option<&mut dyn RngCore>) -> Result<DiscOutput> {
        let tr = self.forward_trace(enc, dropout)?;
        Ok(output_of(&tr))
    }

    /// Eval-mode forward pass.
    pub fn classify(&self, enc: &EncodedSentence) -> Result<DiscOutput> {
        self.forward(enc, None)
    }

    pub fn classify_all(&self, corpus: &[EncodedSentence]) -> Result<Vec<DiscOutput>> {
        corpus.iter().map(|e| self.classify(e)).collect()
    }
}

pub(crate) fn output_of(tr: &DiscTrace) -> DiscOutput {
    DiscOutput {
        p_real: sigmoid(tr.source_logit).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON),
        relation_dist: softmax(&tr.relation_logits),
    }
}
