//! Candidate pair generation and argument masking.

use super::{CandidatePair, Mention, PipelineError, Sentence};
use crate::catalog::{AgentKind, Catalog};
use crate::{ARG1_TOKEN, ARG2_TOKEN};

/// Sentences with more pairwise mention combinations than this are skipped.
pub const MAX_PAIRWISE_COMBINATIONS: usize = 100;

pub fn pairwise_combinations(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

fn byte_index(text: &str, char_idx: usize) -> Option<usize> {
    if char_idx == 0 {
        return Some(0);
    }
    text.char_indices().map(|(b, _)| b).chain(std::iter::once(text.len())).nth(char_idx)
}

/// Replaces the earlier span with `[Arg1]` and the later with `[Arg2]`.
///
/// Spans are `(start, end)` char offsets, end exclusive. Everything outside
/// the spans is copied unchanged.
pub fn mask_pair(text: &str, a: (usize, usize), b: (usize, usize)) -> Result<String, PipelineError> {
    let (first, second) = if a.0 <= b.0 { (a, b) } else { (b, a) };
    let len = text.chars().count();
    for span in [first, second] {
        if span.0 >= span.1 || span.1 > len {
            return Err(PipelineError::SpanOutOfRange { start: span.0, end: span.1, len });
        }
    }
    if first.1 > second.0 {
        return Err(PipelineError::OverlappingSpans { first, second });
    }
    if text.contains(ARG1_TOKEN) || text.contains(ARG2_TOKEN) {
        return Err(PipelineError::MaskTokenInText);
    }
    let idx = |c| byte_index(text, c).expect("span checked against length");
    let (s1, e1, s2, e2) = (idx(first.0), idx(first.1), idx(second.0), idx(second.1));
    let mut out = String::with_capacity(text.len() + 12);
    out.push_str(&text[..s1]);
    out.push_str(ARG1_TOKEN);
    out.push_str(&text[e1..s2]);
    out.push_str(ARG2_TOKEN);
    out.push_str(&text[e2..]);
    Ok(out)
}

/// Checks that `masked` holds exactly one of each placeholder, `[Arg1]` first.
pub fn validate_masked(masked: &str) -> Result<(), PipelineError> {
    let a1 = masked.matches(ARG1_TOKEN).count();
    let a2 = masked.matches(ARG2_TOKEN).count();
    if a1 != 1 || a2 != 1 {
        return Err(PipelineError::MaskCount { arg1: a1, arg2: a2 });
    }
    Ok(())
}

/// Inverse of [`mask_pair`]: puts the two surfaces back.
pub fn unmask(masked: &str, arg1_surface: &str, arg2_surface: &str) -> Result<String, PipelineError> {
    validate_masked(masked)?;
    let p1 = masked.find(ARG1_TOKEN).expect("validated");
    let p2 = masked.find(ARG2_TOKEN).expect("validated");
    let mut out = String::with_capacity(masked.len() + arg1_surface.len() + arg2_surface.len());
    if p1 < p2 {
        out.push_str(&masked[..p1]);
        out.push_str(arg1_surface);
        out.push_str(&masked[p1 + ARG1_TOKEN.len()..p2]);
        out.push_str(arg2_surface);
        out.push_str(&masked[p2 + ARG2_TOKEN.len()..]);
    } else {
        out.push_str(&masked[..p2]);
        out.push_str(arg2_surface);
        out.push_str(&masked[p2 + ARG2_TOKEN.len()..p1]);
        out.push_str(arg1_surface);
        out.push_str(&masked[p1 + ARG1_TOKEN.len()..]);
    }
    Ok(out)
}

/// All supplement-bearing pairs of distinct canonical entities in a sentence.
///
/// Returns nothing when the sentence has more than
/// [`MAX_PAIRWISE_COMBINATIONS`] mention pairs in total.
pub fn generate_candidate_pairs(sentence: &Sentence, mentions: &[Mention], catalog: &Catalog) -> Vec<CandidatePair> {
    if pairwise_combinations(mentions.len()) > MAX_PAIRWISE_COMBINATIONS {
        return Vec::new();
    }
    let mut ordered: Vec<&Mention> = mentions.iter().collect();
    ordered.sort_by_key(|m| (m.start, m.end));
    let canonical: Vec<&str> =
        ordered.iter().map(|m| catalog.canonical_cui(m.cui.as_str()).map_or(m.cui.as_str(), |c| c.as_str())).collect();

    let mut out = Vec::new();
    for i in 0..ordered.len() {
        for j in i + 1..ordered.len() {
            let (a, b) = (ordered[i], ordered[j]);
            if a.kind != AgentKind::Supplement && b.kind != AgentKind::Supplement {
                continue;
            }
            if canonical[i] == canonical[j] {
                continue;
            }
            let Ok(masked_text) = mask_pair(&sentence.text, (a.start, a.end), (b.start, b.end)) else {
                continue;
            };
            out.push(CandidatePair {
                paper_id: sentence.paper_id.clone(),
                sentence_index: sentence.sentence_index,
                text: sentence.text.clone(),
                arg1: a.clone(),
                arg2: b.clone(),
                masked_text,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::tests::fixture_catalog;
    use crate::catalog::Cui;

    #[test]
    fn masks_a_sentence() {
        let text = "Taken together, oral contraceptives can lower serum levels of acetaminophen.";
        let a = text.find("oral").unwrap();
        let b = text.find("acetaminophen").unwrap();
        let masked = mask_pair(text, (a, a + "oral contraceptives".len()), (b, b + "acetaminophen".len())).unwrap();
        assert_eq!(masked, "Taken together, [Arg1] can lower serum levels of [Arg2].");
        // argument order follows position, not call order
        let swapped = mask_pair(text, (b, b + 13), (a, a + 19)).unwrap();
        assert_eq!(swapped, masked);
    }

    #[test]
    fn mask_at_start() {
        let masked = mask_pair("ginkgo with warfarin", (0, 6), (12, 20)).unwrap();
        assert!(masked.starts_with("[Arg1]"));
        assert_eq!(masked, "[Arg1] with [Arg2]");
        assert_eq!(unmask(&masked, "ginkgo", "warfarin").unwrap(), "ginkgo with warfarin");
    }

    #[test]
    fn mask_errors() {
        assert!(matches!(mask_pair("abcdef", (0, 3), (2, 5)), Err(PipelineError::OverlappingSpans { .. })));
        assert!(matches!(mask_pair("abc", (0, 1), (2, 9)), Err(PipelineError::SpanOutOfRange { .. })));
        assert!(matches!(mask_pair("abc", (1, 1), (2, 3)), Err(PipelineError::SpanOutOfRange { .. })));
        assert!(matches!(mask_pair("a [Arg1] b", (0, 1), (9, 10)), Err(PipelineError::MaskTokenInText)));
        assert!(matches!(validate_masked("[Arg1] only"), Err(PipelineError::MaskCount { arg1: 1, arg2: 0 })));
    }

    #[test]
    fn multibyte_spans() {
        let text = "Ünïcode ginkgo → warfarin";
        let masked = mask_pair(text, (8, 14), (17, 25)).unwrap();
        assert_eq!(masked, "Ünïcode [Arg1] → [Arg2]");
    }

    fn mention(start: usize, end: usize, cui: &str, kind: AgentKind) -> Mention {
        Mention { start, end, surface: "x".repeat(end - start), cui: Cui::new(cui).unwrap(), kind }
    }

    fn sentence(len: usize) -> Sentence {
        Sentence { paper_id: "p".into(), sentence_index: 0, text: "x".repeat(len), char_offset: 0 }
    }

    #[test]
    fn pair_rules() {
        let cat = fixture_catalog();
        let s = sentence(40);
        let sup = mention(0, 2, "C0330205", AgentKind::Supplement);
        let drug = mention(5, 7, "C0043031", AgentKind::Drug);
        let drug2 = mention(10, 12, "C0016365", AgentKind::Drug);
        assert_eq!(generate_candidate_pairs(&s, &[sup.clone(), drug.clone()], &cat).len(), 1);
        assert!(generate_candidate_pairs(&s, &[drug.clone(), drug2.clone()], &cat).is_empty());
        // calcium variants collapse to one canonical entity
        let ca1 = mention(15, 17, "C0006675", AgentKind::Supplement);
        let ca2 = mention(20, 22, "C0596235", AgentKind::Supplement);
        assert!(generate_candidate_pairs(&s, &[ca1, ca2], &cat).is_empty());
    }

    #[test]
    fn pair_cap_at_fifteen_mentions() {
        assert_eq!(pairwise_combinations(14), 91);
        assert_eq!(pairwise_combinations(15), 105);
        let cat = fixture_catalog();
        let cuis = ["C0330205", "C0017102"];
        let make = |n: usize| -> Vec<Mention> {
            (0..n).map(|i| mention(i * 3, i * 3 + 2, cuis[i % 2], AgentKind::Supplement)).collect()
        };
        let s = sentence(60);
        assert!(!generate_candidate_pairs(&s, &make(14), &cat).is_empty());
        assert!(generate_candidate_pairs(&s, &make(15), &cat).is_empty());
    }
}
