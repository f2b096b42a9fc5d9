//! Lexing, vocabulary, pair encoding and def-use extraction.

mod dataflow;
mod encode;
mod lexer;
mod vocab;

pub use dataflow::{extract_dataflow, DataFlowEdge};
pub use encode::{encode_pair, truncated_lengths, EncodedPair};
pub use lexer::{is_keyword, lex, Token, TokenKind, TokenSequence};
pub use vocab::{Vocabulary, CLS, NUM_SPECIALS, PAD, SEP, UNK};

use crate::corpus::CorpusManifest;
use crate::error::{Error, Result};

/// Lexes every fragment of the manifest, naming the offending file on failure.
pub fn lex_manifest(manifest: &CorpusManifest) -> Result<Vec<TokenSequence>> {
    manifest
        .fragments
        .iter()
        .map(|f| {
            lex(&f.source).map_err(|e| Error::LexFile {
                file: f.path.display().to_string(),
                source: Box::new(e),
            })
        })
        .collect()
}

pub fn build_vocab(manifest: &CorpusManifest, max_size: usize) -> Result<Vocabulary> {
    let streams = lex_manifest(manifest)?;
    Vocabulary::build(&streams, max_size)
}
