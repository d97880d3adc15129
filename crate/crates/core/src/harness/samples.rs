use std::fs;
use std::path::Path;

use rand::Rng;

use crate::corpus::{RelationSchema, Vocab};
use crate::error::{Error, Result};
use crate::generator::{draw_noise, Generator};

/// Noise draws tried per dumped sentence before giving up.
const MAX_ATTEMPTS: usize = 100;

/// `per_relation` generated sentences for every non-NA relation, each group
/// under a `## relation` header, entity heads bracketed. A draw shorter than
/// two words is replaced with one from fresh noise.
pub fn dump_samples<R: Rng>(
    gen: &Generator,
    vocab: &Vocab,
    schema: &RelationSchema,
    per_relation: usize,
    temperature: f64,
    rng: &mut R,
) -> Result<String> {
    if per_relation == 0 {
        return Err(Error::Config("per_relation must be at least 1".into()));
    }
    if !(temperature > 0.0) {
        return Err(Error::Contract(format!("temperature must be > 0, got {temperature}")));
    }
    let mut out = String::new();
    for r in schema.non_na() {
        out.push_str("## ");
        out.push_str(schema.name(r));
        out.push('\n');
        for _ in 0..per_relation {
            let sentence = (0..MAX_ATTEMPTS)
                .find_map(|_| {
                    let noise = draw_noise(gen.cfg.noise_dim, rng);
                    let s = gen.sample_ids(r, &noise, temperature, rng);
                    s.map(|s| s.to_sentence(vocab)).transpose()
                })
                .transpose()?
                .ok_or_else(|| {
                    Error::Contract(format!(
                        "no sentence of two or more words for {} in {MAX_ATTEMPTS} draws",
                        schema.name(r)
                    ))
                })?;
            out.push_str(&sentence.bracketed());
            out.push('\n');
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_samples<R: Rng>(
    path: impl AsRef<Path>,
    gen: &Generator,
    vocab: &Vocab,
    schema: &RelationSchema,
    per_relation: usize,
    temperature: f64,
    rng: &mut R,
) -> Result<()> {
    let text = dump_samples(gen, vocab, schema, per_relation, temperature, rng)?;
    fs::write(path, text)?;
    Ok(())
}
