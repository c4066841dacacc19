//! Normalized edit-distance name similarity.

use super::CatalogError;

/// Minimum similarity for a fuzzy name match to be accepted.
pub const FUZZY_THRESHOLD: f64 = 0.8;

/// Lowercases and collapses runs of whitespace to single spaces.
pub fn normalize_name(name: &str) -> String {
    name.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>().join(" ")
}

/// `1 - levenshtein / max(len)` over normalized strings, in `[0, 1]`.
pub fn name_similarity(a: &str, b: &str) -> f64 {
    strsim::normalized_levenshtein(&normalize_name(a), &normalize_name(b))
}

/// Cheap upper bound on similarity from lengths (in chars) alone.
pub(crate) fn similarity_bound(len_a: usize, len_b: usize) -> f64 {
    let max = len_a.max(len_b);
    if max == 0 {
        return 1.0;
    }
    1.0 - (len_a.abs_diff(len_b) as f64 / max as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyMatch<'a> {
    pub candidate: &'a str,
    pub score: f64,
    /// Whether `score` clears [`FUZZY_THRESHOLD`].
    pub accepted: bool,
}

/// Returns the most similar candidate. Ties go to the lexicographically
/// smallest candidate.
pub fn fuzzy_match_name<'a, S: AsRef<str>>(query: &str, candidates: &'a [S]) -> Result<FuzzyMatch<'a>, CatalogError> {
    let mut best: Option<(&'a str, f64)> = None;
    for cand in candidates {
        let cand = cand.as_ref();
        let score = name_similarity(query, cand);
        best = match best {
            None => Some((cand, score)),
            Some((b, bs)) if score > bs || (score == bs && cand < b) => Some((cand, score)),
            keep => keep,
        };
    }
    let (candidate, score) = best.ok_or(CatalogError::EmptyCandidates)?;
    Ok(FuzzyMatch { candidate, score, accepted: score >= FUZZY_THRESHOLD })
}
