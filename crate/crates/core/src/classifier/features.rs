//! Hashed n-gram and argument-position features over masked text.

use std::hash::Hasher;

use fnv::FnvHasher;

use crate::{ARG1_TOKEN, ARG2_TOKEN};

pub const DEFAULT_HASH_BITS: u32 = 20;
pub const DEFAULT_HASH_SEED: u64 = 0x5d1_2019;

/// Tokens of a masked sentence: argument placeholders, lowercase
/// alphanumeric runs, and single punctuation characters.
pub fn tokenize(masked: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut rest = masked;
    while !rest.is_empty() {
        if let Some(tail) = rest.strip_prefix(ARG1_TOKEN) {
            tokens.push(ARG1_TOKEN.to_string());
            rest = tail;
            continue;
        }
        if let Some(tail) = rest.strip_prefix(ARG2_TOKEN) {
            tokens.push(ARG2_TOKEN.to_string());
            rest = tail;
            continue;
        }
        let c = rest.chars().next().expect("non-empty");
        if c.is_alphanumeric() {
            let end = rest.char_indices().find(|&(_, ch)| !ch.is_alphanumeric()).map_or(rest.len(), |(i, _)| i);
            tokens.push(rest[..end].to_lowercase());
            rest = &rest[end..];
        } else {
            if !c.is_whitespace() {
                tokens.push(c.to_string());
            }
            rest = &rest[c.len_utf8()..];
        }
    }
    tokens
}

fn bucket(n: usize) -> usize {
    if n <= 8 {
        n
    } else {
        8 + (usize::BITS - n.leading_zeros()) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureHasher {
    bits: u32,
    seed: u64,
}

impl Default for FeatureHasher {
    fn default() -> Self {
        Self::new(DEFAULT_HASH_BITS, DEFAULT_HASH_SEED)
    }
}

impl FeatureHasher {
    pub fn new(bits: u32, seed: u64) -> Self {
        assert!((1..=30).contains(&bits), "hash bits out of range");
        Self { bits, seed }
    }

    pub fn dim(&self) -> usize {
        1 << self.bits
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn index(&self, feature: &str) -> u32 {
        let mut h = FnvHasher::with_key(self.seed);
        h.write(feature.as_bytes());
        (h.finish() & ((1u64 << self.bits) - 1)) as u32
    }

    /// Sorted, deduplicated active feature indices.
    pub fn features(&self, masked: &str) -> Vec<u32> {
        let tokens = tokenize(masked);
        let mut out = Vec::with_capacity(tokens.len() * 2 + 4);
        for tok in &tokens {
            out.push(self.index(&format!("u:{tok}")));
        }
        let mut prev = "<s>";
        for tok in tokens.iter().map(String::as_str).chain(std::iter::once("</s>")) {
            out.push(self.index(&format!("b:{prev} {tok}")));
            prev = tok;
        }
        let p1 = tokens.iter().position(|t| t == ARG1_TOKEN);
        let p2 = tokens.iter().position(|t| t == ARG2_TOKEN);
        if let (Some(p1), Some(p2)) = (p1, p2) {
            let dist = p1.abs_diff(p2);
            out.push(self.index(&format!("d:{}", bucket(dist))));
            out.push(self.index(&format!("g:{}", bucket(dist.saturating_sub(1)))));
        }
        out.push(self.index(&format!("n:{}", bucket(tokens.len()))));
        out.sort_unstable();
        out.dedup();
        out
    }
}
