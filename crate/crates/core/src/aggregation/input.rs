//! Per-worker vector files.
//!
//! - `csv`: decimal literals, one per record (extra fields on a line are
//!   read in order). Literals round to nearest-even in the session format.
//! - `binary`: raw host words, little-endian, `total_bits/8` bytes each.

use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::formats::{FormatError, FpFormat};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    Csv,
    Binary,
}

impl FromStr for InputKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(InputKind::Csv),
            "binary" | "bin" => Ok(InputKind::Binary),
            _ => Err(format!("unknown input kind {s:?} (expected csv or binary)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum InputError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path} line {line}: {source}")]
    Literal { path: String, line: u64, source: FormatError },
    #[error("{path}: {len} bytes is not a whole number of {word}-byte words")]
    Ragged { path: String, len: usize, word: usize },
}

pub fn parse_csv_words(text: &str, fmt: FpFormat, path: &str) -> Result<Vec<u32>, InputError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut words = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|source| InputError::Csv { path: path.to_string(), source })?;
        let line = record.position().map_or(0, |p| p.line());
        for field in record.iter().filter(|f| !f.is_empty()) {
            let w = fmt
                .parse_literal(field)
                .map_err(|source| InputError::Literal { path: path.to_string(), line, source })?;
            words.push(w);
        }
    }
    Ok(words)
}

pub fn parse_binary_words(bytes: &[u8], fmt: FpFormat, path: &str) -> Result<Vec<u32>, InputError> {
    let wb = fmt.word_bytes();
    if !bytes.len().is_multiple_of(wb) {
        return Err(InputError::Ragged { path: path.to_string(), len: bytes.len(), word: wb });
    }
    Ok(bytes
        .chunks_exact(wb)
        .map(|c| c.iter().rev().fold(0u32, |acc, &b| (acc << 8) | b as u32))
        .collect())
}

pub fn encode_binary_words(words: &[u32], fmt: FpFormat) -> Vec<u8> {
    let wb = fmt.word_bytes();
    words.iter().flat_map(|w| w.to_le_bytes().into_iter().take(wb)).collect()
}

pub fn read_worker_file(path: &Path, kind: InputKind, fmt: FpFormat) -> Result<Vec<u32>, InputError> {
    let name = path.display().to_string();
    let bytes = std::fs::read(path).map_err(|source| InputError::Io { path: name.clone(), source })?;
    match kind {
        InputKind::Binary => parse_binary_words(&bytes, fmt, &name),
        InputKind::Csv => {
            let text = String::from_utf8_lossy(&bytes);
            parse_csv_words(&text, fmt, &name)
        }
    }
}
