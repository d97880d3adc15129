use std::collections::HashMap;

use crate::corpus::RelationalSentence;
use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const BOS: usize = 2;
pub const EOS: usize = 3;
pub const RESERVED: [&str; 4] = ["<pad>", "<unk>", "<s>", "</s>"];

/// Token ↔ id mapping. Ids 0..4 are the reserved PAD/UNK/BOS/EOS symbols.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("duplicate vocabulary entry `{t}`"),
                });
            }
        }
        Ok(Vocab { tokens, index })
    }

    /// Only the reserved symbols.
    pub fn reserved_only() -> Self {
        Self::from_tokens(RESERVED.iter().map(|s| s.to_string()).collect()).expect("distinct")
    }

    /// Tokens seen at least `min_freq` times, most frequent first, ties by
    /// token text. Reserved strings occurring in the corpus are ignored.
    pub fn build(corpus: &[RelationalSentence], min_freq: usize) -> Self {
        let min_freq = min_freq.max(1);
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for s in corpus {
            for t in &s.tokens {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
        let mut kept: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|&(t, c)| c >= min_freq && !RESERVED.contains(&t))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        tokens.extend(kept.into_iter().map(|(t, _)| t.to_string()));
        Self::from_tokens(tokens).expect("distinct")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Id of `token`, or [`UNK`].
    pub fn id(&self, token: &str) -> usize {
        match self.index.get(token) {
            Some(&i) if i >= RESERVED.len() => i,
            _ => UNK,
        }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.id(token) != UNK
    }

    pub fn token(&self, id: usize) -> &str {
        self.tokens.get(id).map_or(RESERVED[UNK], String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// One token per line, in id order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for t in &self.tokens {
            s.push_str(t);
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let tokens: Vec<String> = text.lines().map(String::from).collect();
        if tokens.len() < RESERVED.len() || tokens[..RESERVED.len()] != RESERVED {
            return Err(Error::Parse {
                line: 1,
                msg: "vocabulary must start with the reserved symbols".into(),
            });
        }
        Self::from_tokens(tokens)
    }
}
