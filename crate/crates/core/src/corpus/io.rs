//! JSON-lines corpus files, filtering and summary statistics.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{RelationSchema, RelationalSentence, Source};
use crate::error::{Error, Result};

/// On-disk record. Field order here is the serialized field order.
/// Entity positions keep the order they were given in, so `e1p > e2p`
/// marks a swapped pair.
#[derive(Serialize, Deserialize)]
struct Record {
    tokens: Vec<String>,
    e1p: usize,
    e2p: usize,
    relation: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    generated: bool,
}

pub fn read_jsonl<R: Read>(reader: R, schema: &RelationSchema) -> Result<Vec<RelationalSentence>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        let relation = schema
            .index_of(&rec.relation)
            .ok_or_else(|| Error::UnknownRelation(format!("{} (line {lineno})", rec.relation)))?;
        let source = if rec.generated { Source::Generated } else { Source::Real };
        let s = RelationalSentence::new(rec.tokens, rec.e1p, rec.e2p, relation, source)
            .map_err(|e| Error::Parse {
                line: lineno,
                msg: e.to_string(),
            })?;
        out.push(s);
    }
    Ok(out)
}

pub fn load_jsonl(path: impl AsRef<Path>, schema: &RelationSchema) -> Result<Vec<RelationalSentence>> {
    read_jsonl(fs::File::open(path)?, schema)
}

pub fn write_jsonl<W: Write>(
    mut writer: W,
    corpus: &[RelationalSentence],
    schema: &RelationSchema,
) -> Result<()> {
    for s in corpus {
        let (e1p, e2p) = if s.swapped { (s.e2p, s.e1p) } else { (s.e1p, s.e2p) };
        let rec = Record {
            tokens: s.tokens.clone(),
            e1p,
            e2p,
            relation: schema.name(s.relation).to_string(),
            generated: s.source == Source::Generated,
        };
        serde_json::to_writer(&mut writer, &rec)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_jsonl(
    path: impl AsRef<Path>,
    corpus: &[RelationalSentence],
    schema: &RelationSchema,
) -> Result<()> {
    let mut buf = Vec::new();
    write_jsonl(&mut buf, corpus, schema)?;
    fs::write(path, buf)?;
    Ok(())
}

/// Keeps sentences of at most `max_len` tokens and, with `drop_na`, only
/// those with a relation other than NA. Order is preserved.
pub fn filter_training(
    corpus: &[RelationalSentence],
    schema: &RelationSchema,
    max_len: usize,
    drop_na: bool,
) -> Vec<RelationalSentence> {
    corpus
        .iter()
        .filter(|s| s.len() <= max_len && !(drop_na && s.relation == schema.na_index()))
        .cloned()
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorpusStats {
    pub sentences: usize,
    pub histogram: Vec<usize>,
    pub max_len: usize,
    pub mean_len: f64,
    pub na_fraction: f64,
}

pub fn stats(corpus: &[RelationalSentence], schema: &RelationSchema) -> CorpusStats {
    let mut histogram = vec![0; schema.len()];
    for s in corpus {
        histogram[s.relation] += 1;
    }
    let n = corpus.len();
    let total: usize = corpus.iter().map(RelationalSentence::len).sum();
    let (mean_len, na_fraction) = if n == 0 {
        (0.0, 0.0)
    } else {
        (
            total as f64 / n as f64,
            histogram[schema.na_index()] as f64 / n as f64,
        )
    };
    CorpusStats {
        sentences: n,
        histogram,
        max_len: corpus.iter().map(RelationalSentence::len).max().unwrap_or(0),
        mean_len,
        na_fraction,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> RelationSchema {
        RelationSchema::with_na(["born_in", "works_for"]).unwrap()
    }

    const FIXTURE: &str = concat!(
        r#"{"tokens":["Ada","was","born","in","London"],"e1p":0,"e2p":4,"relation":"born_in"}"#,
        "\n",
        r#"{"tokens":["Bob","met","Carol","\"today\""],"e1p":0,"e2p":2,"relation":"NA"}"#,
        "\n",
    );

    #[test]
    fn empty_input() {
        assert!(read_jsonl(&b""[..], &schema()).unwrap().is_empty());
    }

    #[test]
    fn fixture_roundtrips_bytewise() {
        let corpus = read_jsonl(FIXTURE.as_bytes(), &schema()).unwrap();
        assert_eq!(corpus.len(), 2);
        let mut out = Vec::new();
        write_jsonl(&mut out, &corpus, &schema()).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), FIXTURE);
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        fs::write(&p, FIXTURE).unwrap();
        let corpus = load_jsonl(&p, &schema()).unwrap();
        let q = dir.path().join("d.jsonl");
        save_jsonl(&q, &corpus, &schema()).unwrap();
        assert_eq!(fs::read(&p).unwrap(), fs::read(&q).unwrap());
    }

    #[test]
    fn equal_positions_name_the_line() {
        let text = format!(
            "{}\n{}\n",
            r#"{"tokens":["a","b"],"e1p":0,"e2p":1,"relation":"NA"}"#,
            r#"{"tokens":["a","b"],"e1p":1,"e2p":1,"relation":"NA"}"#
        );
        let err = read_jsonl(text.as_bytes(), &schema()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn malformed_line_number() {
        let text = "{\"tokens\":[\"a\",\"b\"],\"e1p\":0,\"e2p\":1,\"relation\":\"NA\"}\nnot json\n";
        assert!(matches!(
            read_jsonl(text.as_bytes(), &schema()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn unknown_relation_is_named() {
        let text = r#"{"tokens":["a","b"],"e1p":0,"e2p":1,"relation":"married_to"}"#;
        let err = read_jsonl(text.as_bytes(), &schema()).unwrap_err();
        assert!(err.to_string().contains("married_to"));
    }

    #[test]
    fn reversed_entities_are_normalised() {
        let text = r#"{"tokens":["a","b","c"],"e1p":2,"e2p":0,"relation":"NA"}"#;
        let s = &read_jsonl(text.as_bytes(), &schema()).unwrap()[0];
        assert_eq!((s.e1p, s.e2p, s.swapped), (0, 2, true));
    }

    #[test]
    fn swapped_and_generated_survive_a_round_trip() {
        let toks = |n: usize| (0..n).map(|i| format!("w{i}")).collect::<Vec<_>>();
        let corpus = vec![
            RelationalSentence::new(toks(4), 3, 1, 1, Source::Real).unwrap(),
            RelationalSentence::new(toks(3), 0, 2, 2, Source::Generated).unwrap(),
        ];
        let mut out = Vec::new();
        write_jsonl(&mut out, &corpus, &schema()).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains(r#""e1p":3,"e2p":1"#) && text.contains(r#""generated":true"#));
        assert_eq!(read_jsonl(text.as_bytes(), &schema()).unwrap(), corpus);
    }

    fn sentence(len: usize, relation: usize) -> RelationalSentence {
        RelationalSentence::new(vec!["w".to_string(); len], 0, 1, relation, Source::Real).unwrap()
    }

    #[test]
    fn filter_drops_long_and_na() {
        let s = schema();
        let corpus = vec![sentence(120, 1), sentence(10, 0), sentence(100, 2), sentence(5, 1)];
        let kept = filter_training(&corpus, &s, 100, true);
        assert_eq!(kept, vec![corpus[2].clone(), corpus[3].clone()]);
        let kept_na = filter_training(&corpus, &s, 100, false);
        assert_eq!(kept_na.len(), 3);
        assert!(filter_training(&[], &s, 100, true).is_empty());
    }

    #[test]
    fn stats_counts() {
        let s = schema();
        let empty = stats(&[], &s);
        assert_eq!(empty.sentences, 0);
        assert_eq!(empty.histogram, vec![0, 0, 0]);
        let corpus = vec![sentence(4, 0), sentence(6, 1), sentence(2, 1)];
        let st = stats(&corpus, &s);
        assert_eq!(st.histogram, vec![1, 2, 0]);
        assert_eq!(st.max_len, 6);
        assert!((st.mean_len - 4.0).abs() < 1e-12);
        assert!((st.na_fraction - 1.0 / 3.0).abs() < 1e-12);
    }
}
