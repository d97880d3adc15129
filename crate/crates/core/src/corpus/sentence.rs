use crate::error::{Error, Result};

/// Ordered relation names with a distinguished "no relation" class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationSchema {
    relations: Vec<String>,
    na_index: usize,
}

pub const NA: &str = "NA";

impl RelationSchema {
    pub fn new(relations: Vec<String>, na_index: usize) -> Result<Self> {
        if relations.len() < 2 {
            return Err(Error::Schema(format!(
                "need at least 2 relations, got {}",
                relations.len()
            )));
        }
        if na_index >= relations.len() {
            return Err(Error::Schema(format!("NA index {na_index} out of range")));
        }
        let mut seen = std::collections::HashSet::new();
        for r in &relations {
            if !seen.insert(r.as_str()) {
                return Err(Error::Schema(format!("duplicate relation `{r}`")));
            }
        }
        Ok(RelationSchema {
            relations,
            na_index,
        })
    }

    /// `NA` first, followed by `names` in order (any `NA` among them is skipped).
    pub fn with_na<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut relations = vec![NA.to_string()];
        relations.extend(names.into_iter().map(Into::into).filter(|n| n != NA));
        Self::new(relations, 0)
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    pub fn na_index(&self) -> usize {
        self.na_index
    }

    pub fn names(&self) -> &[String] {
        &self.relations
    }

    pub fn name(&self, index: usize) -> &str {
        &self.relations[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.relations.iter().position(|r| r == name)
    }

    /// Relation indices other than NA, in schema order.
    pub fn non_na(&self) -> Vec<usize> {
        (0..self.relations.len())
            .filter(|&i| i != self.na_index)
            .collect()
    }

    /// One relation per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for r in &self.relations {
            s.push_str(r);
            s.push('\n');
        }
        s
    }

    /// Parses [`to_text`](Self::to_text) output; the NA relation must be present.
    pub fn from_text(text: &str) -> Result<Self> {
        let relations: Vec<String> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect();
        let na = relations
            .iter()
            .position(|r| r == NA)
            .ok_or_else(|| Error::Schema("missing NA relation".into()))?;
        Self::new(relations, na)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Source {
    Real,
    Generated,
}

/// A tokenized sentence with its two entity heads and relation label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationalSentence {
    pub tokens: Vec<String>,
    pub e1p: usize,
    pub e2p: usize,
    pub relation: usize,
    pub source: Source,
    /// Set when the input listed the entities in reverse order.
    pub swapped: bool,
}

impl RelationalSentence {
    /// Builds a sentence, ordering the entity positions so that `e1p < e2p`.
    pub fn new(
        tokens: Vec<String>,
        e1p: usize,
        e2p: usize,
        relation: usize,
        source: Source,
    ) -> Result<Self> {
        let swapped = e1p > e2p;
        let (e1p, e2p) = if swapped { (e2p, e1p) } else { (e1p, e2p) };
        let s = RelationalSentence {
            tokens,
            e1p,
            e2p,
            relation,
            source,
            swapped,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.tokens.len() < 2 || self.e1p >= self.e2p || self.e2p >= self.tokens.len() {
            return Err(Error::Positions {
                e1p: self.e1p,
                e2p: self.e2p,
                len: self.tokens.len(),
            });
        }
        Ok(())
    }

    pub fn validate_in(&self, schema: &RelationSchema) -> Result<()> {
        self.validate()?;
        if self.relation >= schema.len() {
            return Err(Error::OutOfRange {
                what: "relation",
                index: self.relation,
                len: schema.len(),
            });
        }
        Ok(())
    }

    /// Tokens joined by spaces with the entity heads bracketed,
    /// e.g. `[E1 Obama] was born in [E2 Honolulu]`.
    pub fn bracketed(&self) -> String {
        self.tokens
            .iter()
            .enumerate()
            .map(|(i, t)| {
                if i == self.e1p {
                    format!("[E1 {t}]")
                } else if i == self.e2p {
                    format!("[E2 {t}]")
                } else {
                    t.clone()
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}
