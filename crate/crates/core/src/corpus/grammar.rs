//! Template grammar for synthetic relational sentences.

use std::fs;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{RelationSchema, RelationalSentence, Source};
use crate::error::{Error, Result};

const E1_SLOT: &str = "{E1}";
const E2_SLOT: &str = "{E2}";

static BUNDLED: &str = include_str!("../../data/synthetic_grammar.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrammarRelation {
    pub name: String,
    pub templates: Vec<String>,
    pub e1_lexicon: Vec<String>,
    pub e2_lexicon: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grammar {
    pub relations: Vec<GrammarRelation>,
}

impl Grammar {
    /// Five relations plus an NA class, with disjoint trigger words.
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED).expect("bundled grammar is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let g: Grammar = serde_json::from_str(text)?;
        g.validate()?;
        Ok(g)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.relations.is_empty() {
            return Err(Error::Grammar("no relations".into()));
        }
        for rel in &self.relations {
            if rel.templates.is_empty() || rel.e1_lexicon.is_empty() || rel.e2_lexicon.is_empty() {
                return Err(Error::Grammar(format!(
                    "relation `{}` needs templates and both lexicons",
                    rel.name
                )));
            }
            for t in &rel.templates {
                slot_positions(t).map_err(|e| Error::Grammar(format!("`{}`: {e}", rel.name)))?;
            }
            for entry in rel.e1_lexicon.iter().chain(&rel.e2_lexicon) {
                if entry.split_whitespace().next().is_none() {
                    return Err(Error::Grammar(format!("empty lexicon entry in `{}`", rel.name)));
                }
            }
        }
        Ok(())
    }

    /// NA at index 0, then the grammar's other relations in file order.
    pub fn schema(&self) -> Result<RelationSchema> {
        RelationSchema::with_na(self.relations.iter().map(|r| r.name.clone()))
    }
}

/// Token indices of the `{E1}` and `{E2}` slots; each must occur exactly once.
fn slot_positions(template: &str) -> std::result::Result<(usize, usize), String> {
    let toks: Vec<&str> = template.split_whitespace().collect();
    let find = |slot: &str| {
        let hits: Vec<usize> = toks
            .iter()
            .enumerate()
            .filter(|(_, t)| **t == slot)
            .map(|(i, _)| i)
            .collect();
        match hits.as_slice() {
            [i] => Ok(*i),
            _ => Err(format!("template `{template}` must contain exactly one {slot} slot")),
        }
    };
    Ok((find(E1_SLOT)?, find(E2_SLOT)?))
}

/// Samples `n` sentences: relation uniform over the grammar, then template,
/// then one entry from each lexicon. Entity positions are the first token of
/// each filled slot.
pub fn synth_corpus(
    grammar: &Grammar,
    schema: &RelationSchema,
    n: usize,
    seed: u64,
) -> Result<Vec<RelationalSentence>> {
    grammar.validate()?;
    let labels: Vec<usize> = grammar
        .relations
        .iter()
        .map(|r| {
            schema
                .index_of(&r.name)
                .ok_or_else(|| Error::UnknownRelation(r.name.clone()))
        })
        .collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let k = rand::Rng::random_range(&mut rng, 0..grammar.relations.len());
        let rel = &grammar.relations[k];
        let template = rel.templates.choose(&mut rng).expect("nonempty");
        let e1 = rel.e1_lexicon.choose(&mut rng).expect("nonempty");
        let e2 = rel.e2_lexicon.choose(&mut rng).expect("nonempty");

        let mut tokens = Vec::new();
        let (mut p1, mut p2) = (0, 0);
        for tok in template.split_whitespace() {
            match tok {
                E1_SLOT => {
                    p1 = tokens.len();
                    tokens.extend(e1.split_whitespace().map(String::from));
                }
                E2_SLOT => {
                    p2 = tokens.len();
                    tokens.extend(e2.split_whitespace().map(String::from));
                }
                _ => tokens.push(tok.to_string()),
            }
        }
        out.push(RelationalSentence::new(tokens, p1, p2, labels[k], Source::Real)?);
    }
    Ok(out)
}
