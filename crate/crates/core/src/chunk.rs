//! Token-bounded document chunking. A token is a whitespace-delimited word.
//! Chunking is line-aligned: lines are packed greedily and never split, so a
//! CKM fact always lands in exactly one chunk.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub index: usize,
    pub text: String,
    pub token_count: usize,
}

pub fn count_tokens(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Greedy line-aligned packing: lines are appended to the current chunk until
/// adding the next line would exceed `chunk_size` tokens. Joining chunk texts
/// with single newlines reproduces the source document exactly.
pub fn chunk_document(doc: &str, chunk_size: usize) -> Result<Vec<Chunk>> {
    if doc.is_empty() {
        return Ok(Vec::new());
    }
    let mut chunks = Vec::new();
    let mut current_lines: Vec<&str> = Vec::new();
    let mut current_tokens = 0usize;

    for (i, line) in doc.split('\n').enumerate() {
        let tokens = count_tokens(line);
        if tokens > chunk_size {
            return Err(Error::LineTooLong {
                line: i + 1,
                tokens,
                chunk_size,
                text: line.to_string(),
            });
        }
        if !current_lines.is_empty() && current_tokens + tokens > chunk_size {
            chunks.push((current_lines.join("\n"), current_tokens));
            current_lines.clear();
            current_tokens = 0;
        }
        current_lines.push(line);
        current_tokens += tokens;
    }
    chunks.push((current_lines.join("\n"), current_tokens));

    Ok(chunks
        .into_iter()
        .enumerate()
        .map(|(index, (text, token_count))| Chunk {
            index,
            text,
            token_count,
        })
        .collect())
}
