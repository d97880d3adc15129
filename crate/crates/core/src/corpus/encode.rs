use crate::corpus::{RelationalSentence, Vocab};
use crate::error::{Error, Result};

/// Relative positions are clamped to `[-MAX_REL_POS, MAX_REL_POS]`.
pub const MAX_REL_POS: i32 = 30;
/// Rows of each position-embedding table.
pub const REL_POS_ROWS: usize = 2 * MAX_REL_POS as usize + 1;

/// Token ids plus clamped distances to each entity head.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EncodedSentence {
    pub ids: Vec<usize>,
    pub rel_pos1: Vec<i32>,
    pub rel_pos2: Vec<i32>,
    pub relation: usize,
    pub e1p: usize,
    pub e2p: usize,
}

pub fn relative_position(i: usize, entity: usize) -> i32 {
    let d = i as i64 - entity as i64;
    d.clamp(-(MAX_REL_POS as i64), MAX_REL_POS as i64) as i32
}

/// Row of the position-embedding table for a clamped distance.
pub fn position_row(rel: i32) -> usize {
    (rel + MAX_REL_POS) as usize
}

impl EncodedSentence {
    pub fn from_ids(ids: Vec<usize>, e1p: usize, e2p: usize, relation: usize) -> Result<Self> {
        let len = ids.len();
        if len < 2 || e1p >= e2p || e2p >= len {
            return Err(Error::Positions { e1p, e2p, len });
        }
        Ok(EncodedSentence {
            rel_pos1: (0..len).map(|i| relative_position(i, e1p)).collect(),
            rel_pos2: (0..len).map(|i| relative_position(i, e2p)).collect(),
            ids,
            relation,
            e1p,
            e2p,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Maps tokens to ids (out-of-vocabulary → UNK) and computes the
/// relative-position features.
pub fn encode(sentence: &RelationalSentence, vocab: &Vocab, max_len: usize) -> Result<EncodedSentence> {
    if sentence.len() > max_len {
        return Err(Error::Contract(format!(
            "sentence of {} tokens exceeds max_len {max_len}",
            sentence.len()
        )));
    }
    sentence.validate()?;
    let ids = sentence.tokens.iter().map(|t| vocab.id(t)).collect();
    EncodedSentence::from_ids(ids, sentence.e1p, sentence.e2p, sentence.relation)
}

pub fn encode_all(
    corpus: &[RelationalSentence],
    vocab: &Vocab,
    max_len: usize,
) -> Result<Vec<EncodedSentence>> {
    corpus.iter().map(|s| encode(s, vocab, max_len)).collect()
}
