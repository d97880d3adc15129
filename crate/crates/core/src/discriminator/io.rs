use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Vocab;
use crate::discriminator::model::WORD_EMB;
use crate::discriminator::{DiscOutput, Discriminator};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct ClassificationLine {
    relation_dist: Vec<f64>,
    p_real: f64,
}

/// One JSON object per output, in input order.
pub fn write_classifications<W: Write>(mut w: W, outputs: &[DiscOutput]) -> Result<()> {
    for o in outputs {
        let line = ClassificationLine {
            relation_dist: o.relation_dist.clone(),
            p_real: o.p_real,
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_classifications(path: impl AsRef<Path>, outputs: &[DiscOutput]) -> Result<()> {
    write_classifications(BufWriter::new(File::create(path)?), outputs)
}

pub fn read_classifications<R: BufRead>(r: R) -> Result<Vec<DiscOutput>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let c: ClassificationLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        out.push(DiscOutput {
            p_real: c.p_real,
            relation_dist: c.relation_dist,
        });
    }
    Ok(out)
}

/// Overwrites word-embedding rows from a whitespace-separated text file
/// (`word v1 v2 ...`, one word per line). Words missing from the vocabulary
/// are skipped. Returns the number of rows set.
pub fn load_word_embeddings(disc: &mut Discriminator, vocab: &Vocab, path: impl AsRef<Path>) -> Result<usize> {
    let dim = disc.cfg.word_dim;
    let table = disc.params.get_mut(WORD_EMB)?;
    let mut set = 0;
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        let mut parts = line.split_whitespace();
        let Some(word) = parts.next() else { continue };
        let values: Vec<f64> = parts
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
        if values.len() != dim {
            // word2vec-style header line "count dim"
            if i == 0 && values.len() == 1 {
                continue;
            }
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected {dim} values, found {}", values.len()),
            });
        }
        if !vocab.contains(word) {
            continue;
        }
        table.row_mut(vocab.id(word)).copy_from_slice(&values);
        set += 1;
    }
    Ok(set)
}
