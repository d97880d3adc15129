//! Relational-sentence data model, JSON-lines I/O, vocabulary, encoding and
//! the synthetic template grammar.

mod encode;
mod grammar;
mod io;
mod sentence;
mod vocab;

pub use encode::{
    encode, encode_all, position_row, relative_position, EncodedSentence, MAX_REL_POS,
    REL_POS_ROWS,
};
pub use grammar::{synth_corpus, Grammar, GrammarRelation};
pub use io::{filter_training, load_jsonl, read_jsonl, save_jsonl, stats, write_jsonl, CorpusStats};
pub use sentence::{RelationSchema, RelationalSentence, Source, NA};
pub use vocab::{Vocab, BOS, EOS, PAD, RESERVED, UNK};
