//! The bitset data model: a flat run of 64-bit words where bit `i` of word
//! `j` marks membership of the integer `64 * j + i`.

use std::fs;
use std::ops::Deref;
use std::path::Path;

use crate::error::Result;

/// Number of one-bits. Held in 64 bits, so overflow needs at least 2^58
/// input words.
pub type PopCount = u64;

/// Immutable bitset over `{0, ..., 64 * len - 1}`.
///
/// Kernels borrow the words as `&[u64]`; `WordBlock` is the owning form used
/// by file ingestion and the CLI.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct WordBlock {
    words: Vec<u64>,
}

impl WordBlock {
    pub fn new(words: Vec<u64>) -> Self {
        Self { words }
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn byte_len(&self) -> usize {
        self.words.len() * 8
    }

    pub fn into_words(self) -> Vec<u64> {
        self.words
    }

    /// Reads a raw bitset file (headerless little-endian byte stream).
    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        Ok(load_words(&fs::read(path)?))
    }
}

impl Deref for WordBlock {
    type Target = [u64];

    fn deref(&self) -> &[u64] {
        &self.words
    }
}

impl AsRef<[u64]> for WordBlock {
    fn as_ref(&self) -> &[u64] {
        &self.words
    }
}

impl From<Vec<u64>> for WordBlock {
    fn from(words: Vec<u64>) -> Self {
        Self::new(words)
    }
}

impl FromIterator<u64> for WordBlock {
    fn from_iter<I: IntoIterator<Item = u64>>(iter: I) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

/// Assembles little-endian 64-bit words from raw bytes. A trailing partial
/// word is zero-padded in its high-order bytes, which leaves the population
/// count unchanged.
pub fn load_words(bytes: &[u8]) -> WordBlock {
    let mut chunks = bytes.chunks_exact(8);
    let mut words: Vec<u64> = chunks
        .by_ref()
        .map(|c| u64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let rest = chunks.remainder();
    if !rest.is_empty() {
        let mut buf = [0u8; 8];
        buf[..rest.len()].copy_from_slice(rest);
        words.push(u64::from_le_bytes(buf));
    }
    WordBlock::new(words)
}

/// Serializes words back to the raw little-endian file layout.
pub fn store_words(words: &[u64]) -> Vec<u8> {
    words.iter().flat_map(|w| w.to_le_bytes()).collect()
}
