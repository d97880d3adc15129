use rand::{Rng, SeedableRng};

use crate::corpus::{BOS, EOS, PAD};
use crate::error::{Error, Result};
use crate::numerics::kernels::{mat_vec_t_acc, outer_acc, sigmoid, softmax, vec_mat_acc};
use crate::numerics::{lstm_step, lstm_step_backward, GradMap, LstmCache, LstmWeights, ParamStore, Tensor, INIT_BOUND};

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorConfig {
    pub vocab_size: usize,
    pub relations: usize,
    pub word_dim: usize,
    pub relation_dim: usize,
    pub noise_dim: usize,
    pub hidden: usize,
    /// Width of the hidden layer in each position MLP.
    pub position_hidden: usize,
    /// Maximum number of words per sentence (BOS/EOS excluded).
    pub max_len: usize,
    pub ss_threshold: f64,
}

impl GeneratorConfig {
    pub fn new(vocab_size: usize, relations: usize) -> Self {
        GeneratorConfig {
            vocab_size,
            relations,
            word_dim: 50,
            relation_dim: 50,
            noise_dim: 50,
            hidden: 120,
            position_hidden: 60,
            max_len: 100,
            ss_threshold: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.vocab_size,
            self.relations,
            self.word_dim,
            self.relation_dim,
            self.noise_dim,
            self.hidden,
            self.position_hidden,
        ];
        if dims.contains(&0) || self.max_len < 2 {
            return Err(Error::Config(format!("invalid generator dimensions {self:?}")));
        }
        if self.vocab_size <= EOS {
            return Err(Error::Config("vocabulary lacks reserved symbols".into()));
        }
        Ok(())
    }
}

/// Recurrent state between steps.
#[derive(Clone, Debug, PartialEq)]
pub struct GenState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    /// Tokens so far, starting with BOS.
    pub emitted: Vec<usize>,
    /// Number of steps taken.
    pub t: usize,
}

impl GenState {
    pub fn finished(&self) -> bool {
        self.emitted.len() > 1 && self.emitted.last() == Some(&EOS)
    }

    pub fn push(&mut self, token: usize) {
        self.emitted.push(token);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenOutput {
    pub logits: Vec<f64>,
    pub p1_raw: f64,
    pub p2_raw: f64,
}

/// Ids the generator never emits.
pub(crate) const UNSAMPLED: [usize; 2] = [PAD, BOS];

/// Next-token distribution: the softmax of `logits` with PAD and BOS
/// excluded.
pub fn token_distribution(logits: &[f64]) -> Vec<f64> {
    let mut masked = logits.to_vec();
    for i in UNSAMPLED {
        masked[i] = f64::NEG_INFINITY;
    }
    softmax(&masked)
}

#[derive(Clone, Debug)]
pub struct Generator {
    pub cfg: GeneratorConfig,
    pub params: ParamStore,
}

pub(crate) const TOK_EMB: &str = "gen.tok_emb";
pub(crate) const REL_EMB: &str = "gen.rel_emb";
pub(crate) const INIT_W: &str = "gen.init.w";
pub(crate) const INIT_B: &str = "gen.init.b";
pub(crate) const LSTM: &str = "gen.lstm";
pub(crate) const OUT_W: &str = "gen.out.w";
pub(crate) const OUT_B: &str = "gen.out.b";
pub(crate) const POS_HEADS: [&str; 2] = ["gen.pos1", "gen.pos2"];

impl Generator {
    pub fn new<R: Rng + ?Sized>(cfg: GeneratorConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let mut p = ParamStore::new();
        let b = INIT_BOUND;
        let cond = cfg.relation_dim + cfg.noise_dim;
        p.insert_uniform(TOK_EMB, &[cfg.vocab_size, cfg.word_dim], b, rng)?;
        p.insert_uniform(REL_EMB, &[cfg.relations, cfg.relation_dim], b, rng)?;
        p.insert_uniform(INIT_W, &[cond, cfg.hidden], b, rng)?;
        p.insert_uniform(INIT_B, &[cfg.hidden], b, rng)?;
        p.insert_uniform(&format!("{LSTM}.w"), &[cfg.word_dim + cfg.hidden, 4 * cfg.hidden], b, rng)?;
        p.insert_uniform(&format!("{LSTM}.b"), &[4 * cfg.hidden], b, rng)?;
        p.insert_uniform(OUT_W, &[cfg.hidden, cfg.vocab_size], b, rng)?;
        p.insert_uniform(OUT_B, &[cfg.vocab_size], b, rng)?;
        for head in POS_HEADS {
            p.insert_uniform(&format!("{head}.w1"), &[cfg.hidden, cfg.position_hidden], b, rng)?;
            p.insert_uniform(&format!("{head}.b1"), &[cfg.position_hidden], b, rng)?;
            p.insert_uniform(&format!("{head}.w2"), &[cfg.position_hidden, 1], b, rng)?;
            p.insert_uniform(&format!("{head}.b2"), &[1], b, rng)?;
        }
        Ok(Generator { cfg, params: p })
    }

    /// Wraps an existing parameter store after checking every shape.
    pub fn from_params(cfg: GeneratorConfig, params: ParamStore) -> Result<Self> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let template = Generator::new(cfg.clone(), &mut rng)?;
        for (name, t) in template.params.iter() {
            let got = params.get(name)?;
            if got.shape() != t.shape() {
                return Err(Error::Dimension {
                    op: "generator checkpoint",
                    lhs: t.shape().to_vec(),
                    rhs: got.shape().to_vec(),
                });
            }
        }
        if params.len() != template.params.len() {
            return Err(Error::Checkpoint("unexpected generator parameters".into()));
        }
        Ok(Generator { cfg, params })
    }

    fn p(&self, name: &str) -> &Tensor {
        self.params.get(name).expect("generator parameter present")
    }

    fn lstm(&self) -> LstmWeights<'_> {
        LstmWeights::from_store(&self.params, LSTM).expect("generator lstm present")
    }

    fn conditioning(&self, relation: usize, noise: &[f64]) -> Result<Vec<f64>> {
        if relation >= self.cfg.relations {
            return Err(Error::OutOfRange {
                what: "relation",
                index: relation,
                len: self.cfg.relations,
            });
        }
        if noise.len() != self.cfg.noise_dim {
            return Err(Error::Dimension {
                op: "generator noise",
                lhs: vec![self.cfg.noise_dim],
                rhs: vec![noise.len()],
            });
        }
        let mut input = self.p(REL_EMB).row(relation).to_vec();
        input.extend_from_slice(noise);
        Ok(input)
    }

    /// `h0 = tanh([rel_emb[r] ; z] W + b)`, `c0 = 0`, emitted = `[BOS]`.
    pub fn init_state(&self, relation: usize, noise: &[f64]) -> Result<GenState> {
        let input = self.conditioning(relation, noise)?;
        let mut h = self.p(INIT_B).data().to_vec();
        vec_mat_acc(&input, self.p(INIT_W).data(), self.cfg.hidden, &mut h);
        for v in &mut h {
            *v = v.tanh();
        }
        Ok(GenState {
            c: vec![0.0; self.cfg.hidden],
            h,
            emitted: vec![BOS],
            t: 0,
        })
    }

    /// Sigmoid output of one position MLP plus its hidden activations.
    fn position_head(&self, head: &str, h: &[f64]) -> (f64, Vec<f64>) {
        let mut a = self.p(&format!("{head}.b1")).data().to_vec();
        vec_mat_acc(h, self.p(&format!("{head}.w1")).data(), a.len(), &mut a);
        for v in &mut a {
            *v = v.tanh();
        }
        let w2 = self.p(&format!("{head}.w2")).data();
        let z = self.p(&format!("{head}.b2")).data()[0] + a.iter().zip(w2).map(|(x, w)| x * w).sum::<f64>();
        (sigmoid(z), a)
    }

    /// Both position heads for a hidden state.
    pub fn positions(&self, h: &[f64]) -> (f64, f64) {
        (self.position_head(POS_HEADS[0], h).0, self.position_head(POS_HEADS[1], h).0)
    }

    pub(crate) fn token_logits(&self, h: &[f64]) -> Vec<f64> {
        let mut logits = self.p(OUT_B).data().to_vec();
        vec_mat_acc(h, self.p(OUT_W).data(), self.cfg.vocab_size, &mut logits);
        logits
    }

    fn advance(&self, state: &GenState, prev_token: usize) -> Result<(Vec<f64>, Vec<f64>, LstmCache)> {
        if state.finished() {
            return Err(Error::Contract("step after EOS was emitted".into()));
        }
        if state.t > self.cfg.max_len {
            return Err(Error::Contract(format!(
                "step beyond max_len {} (+EOS)",
                self.cfg.max_len
            )));
        }
        if prev_token >= self.cfg.vocab_size {
            return Err(Error::OutOfRange {
                what: "token",
                index: prev_token,
                len: self.cfg.vocab_size,
            });
        }
        lstm_step(self.p(TOK_EMB).row(prev_token), &state.h, &state.c, self.lstm())
    }

    /// One recurrent step on `prev_token`. The returned state has `t + 1`;
    /// the caller records the chosen token with [`GenState::push`].
    pub fn step(&self, state: &GenState, prev_token: usize) -> Result<(GenOutput, GenState)> {
        let (h, c, _) = self.advance(state, prev_token)?;
        let logits = self.token_logits(&h);
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("generator logits".into()));
        }
        let (p1_raw, p2_raw) = self.positions(&h);
        let out = GenOutput {
            logits,
            p1_raw,
            p2_raw,
        };
        let next = GenState {
            h,
            c,
            emitted: state.emitted.clone(),
            t: state.t + 1,
        };
        Ok((out, next))
    }

    /// Logits-only step used on hot paths (sampling, rollouts).
    pub(crate) fn step_logits(&self, state: &mut GenState, prev_token: usize) -> Result<Vec<f64>> {
        let (h, c, _) = self.advance(state, prev_token)?;
        state.h = h;
        state.c = c;
        state.t += 1;
        Ok(self.token_logits(&state.h))
    }

    /// Forward pass recording everything needed for backpropagation.
    ///
    /// Step 0 consumes BOS; step `t > 0` consumes `next_input(t, probs_{t-1})`.
    pub(crate) fn forward_trace<F>(
        &self,
        relation: usize,
        noise: &[f64],
        steps: usize,
        mut next_input: F,
    ) -> Result<Trace>
    where
        F: FnMut(usize, &[f64]) -> usize,
    {
        let cond = self.conditioning(relation, noise)?;
        let state = self.init_state(relation, noise)?;
        let h0 = state.h.clone();
        let (mut h, mut c) = (state.h, state.c);
        let mut trace_steps: Vec<StepTrace> = Vec::with_capacity(steps);
        for t in 0..steps {
            let input = if t == 0 {
                BOS
            } else {
                next_input(t, &trace_steps[t - 1].probs)
            };
            if input >= self.cfg.vocab_size {
                return Err(Error::OutOfRange {
                    what: "token",
                    index: input,
                    len: self.cfg.vocab_size,
                });
            }
            let (h2, c2, cache) = lstm_step(self.p(TOK_EMB).row(input), &h, &c, self.lstm())?;
            let probs = token_distribution(&self.token_logits(&h2));
            h = h2.clone();
            c = c2;
            trace_steps.push(StepTrace {
                input,
                cache,
                h: h2,
                probs,
            });
        }
        let heads = POS_HEADS.map(|head| self.position_head(head, &h));
        Ok(Trace {
            relation,
            cond,
            h0,
            steps: trace_steps,
            positions: [heads[0].0, heads[1].0],
            pos_hidden: [heads[0].1.clone(), heads[1].1.clone()],
        })
    }

    /// Backpropagates per-step logit gradients and position-output
    /// gradients (w.r.t. the sigmoid outputs) through a trace.
    pub(crate) fn backward_trace(&self, trace: &Trace, dlogits: &[Vec<f64>], dpos: [f64; 2], g: &mut SeqGrads) {
        let hid = self.cfg.hidden;
        let wd = self.cfg.word_dim;
        let lstm = self.lstm();
        let out_w = self.p(OUT_W).data();
        let n = trace.steps.len();

        let mut dh_next = vec![0.0; hid];
        let mut dc_next = vec![0.0; hid];

        for (k, head) in POS_HEADS.iter().enumerate() {
            if dpos[k] == 0.0 || n == 0 {
                continue;
            }
            let p = trace.positions[k];
            let dz = dpos[k] * p * (1.0 - p);
            let a = &trace.pos_hidden[k];
            let w2 = self.p(&format!("{head}.w2")).data();
            let w1 = self.p(&format!("{head}.w1")).data();
            g.pos[k].b2 += dz;
            let mut da = vec![0.0; a.len()];
            for j in 0..a.len() {
                g.pos[k].w2[j] += a[j] * dz;
                da[j] = w2[j] * dz * (1.0 - a[j] * a[j]);
            }
            outer_acc(&trace.steps[n - 1].h, &da, &mut g.pos[k].w1);
            for (b, d) in g.pos[k].b1.iter_mut().zip(&da) {
                *b += d;
            }
            mat_vec_t_acc(w1, &da, &mut dh_next);
        }

        for t in (0..n).rev() {
            let st = &trace.steps[t];
            let dl = &dlogits[t];
            let mut dh = dh_next;
            if dl.iter().any(|&v| v != 0.0) {
                mat_vec_t_acc(out_w, dl, &mut dh);
                outer_acc(&st.h, dl, g.out_w.data_mut());
                for (b, d) in g.out_b.data_mut().iter_mut().zip(dl) {
                    *b += d;
                }
            }
            let (dx, dh_prev, dc_prev) = lstm_step_backward(&st.cache, lstm, &dh, &dc_next, &mut g.lstm_w, &mut g.lstm_b);
            for (e, d) in g.tok_emb.row_mut(st.input).iter_mut().zip(&dx[..wd]) {
                *e += d;
            }
            dh_next = dh_prev;
            dc_next = dc_prev;
        }

        // h0 = tanh(cond W + b)
        let dpre: Vec<f64> = dh_next
            .iter()
            .zip(&trace.h0)
            .map(|(d, h)| d * (1.0 - h * h))
            .collect();
        outer_acc(&trace.cond, &dpre, g.init_w.data_mut());
        for (b, d) in g.init_b.data_mut().iter_mut().zip(&dpre) {
            *b += d;
        }
        let mut dcond = vec![0.0; trace.cond.len()];
        mat_vec_t_acc(self.p(INIT_W).data(), &dpre, &mut dcond);
        for (e, d) in g.rel_emb.row_mut(trace.relation).iter_mut().zip(&dcond[..self.cfg.relation_dim]) {
            *e += d;
        }
    }
}

pub(crate) struct StepTrace {
    pub input: usize,
    pub cache: LstmCache,
    pub h: Vec<f64>,
    pub probs: Vec<f64>,
}

pub(crate) struct Trace {
    pub relation: usize,
    pub cond: Vec<f64>,
    pub h0: Vec<f64>,
    pub steps: Vec<StepTrace>,
    pub positions: [f64; 2],
    pub pos_hidden: [Vec<f64>; 2],
}

pub(crate) struct HeadGrads {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

/// Gradient accumulators laid out for direct indexing during BPTT.
pub(crate) struct SeqGrads {
    pub tok_emb: Tensor,
    pub rel_emb: Tensor,
    pub init_w: Tensor,
    pub init_b: Tensor,
    pub lstm_w: Tensor,
    pub lstm_b: Tensor,
    pub out_w: Tensor,
    pub out_b: Tensor,
    pub pos: [HeadGrads; 2],
}

impl SeqGrads {
    pub fn zeros(gen: &Generator) -> Self {
        let z = |n: &str| Tensor::zeros(gen.p(n).shape());
        let head = |h: &str| HeadGrads {
            w1: vec![0.0; gen.p(&format!("{h}.w1")).len()],
            b1: vec![0.0; gen.cfg.position_hidden],
            w2: vec![0.0; gen.cfg.position_hidden],
            b2: 0.0,
        };
        SeqGrads {
            tok_emb: z(TOK_EMB),
            rel_emb: z(REL_EMB),
            init_w: z(INIT_W),
            init_b: z(INIT_B),
            lstm_w: z(&format!("{LSTM}.w")),
            lstm_b: z(&format!("{LSTM}.b")),
            out_w: z(OUT_W),
            out_b: z(OUT_B),
            pos: [head(POS_HEADS[0]), head(POS_HEADS[1])],
        }
    }

    pub fn into_grad_map(self, gen: &Generator) -> GradMap {
        let mut g = GradMap::new();
        g.insert(TOK_EMB, self.tok_emb);
        g.insert(REL_EMB, self.rel_emb);
        g.insert(INIT_W, self.init_w);
        g.insert(INIT_B, self.init_b);
        g.insert(format!("{LSTM}.w"), self.lstm_w);
        g.insert(format!("{LSTM}.b"), self.lstm_b);
        g.insert(OUT_W, self.out_w);
        g.insert(OUT_B, self.out_b);
        let [h1, h2] = self.pos;
        for (name, h) in POS_HEADS.iter().zip([h1, h2]) {
            let shape_w1 = gen.p(&format!("{name}.w1")).shape().to_vec();
            g.insert(format!("{name}.w1"), Tensor::new(shape_w1, h.w1).expect("shape"));
            g.insert(format!("{name}.b1"), Tensor::vector(h.b1));
            g.insert(
                format!("{name}.w2"),
                Tensor::new(vec![gen.cfg.position_hidden, 1], h.w2).expect("shape"),
            );
            g.insert(format!("{name}.b2"), Tensor::vector(vec![h.b2]));
        }
        g
    }
}
