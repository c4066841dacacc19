use std::cmp::Ordering;

use super::EvidenceItem;

/// Evidence order: non-retracted first, then clinical trials, human
/// studies, newer years (unknown last), paper id, sentence index, and
/// finally the span positions and remaining fields so that distinct items
/// never compare equal.
pub fn compare_evidence(a: &EvidenceItem, b: &EvidenceItem) -> Ordering {
    let fa = &a.paper.flags;
    let fb = &b.paper.flags;
    fa.retracted
        .cmp(&fb.retracted)
        .then_with(|| fb.clinical_trial.cmp(&fa.clinical_trial))
        .then_with(|| fb.human.cmp(&fa.human))
        .then_with(|| match (a.paper.year, b.paper.year) {
            (Some(x), Some(y)) => y.cmp(&x),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        })
        .then_with(|| a.evidence.paper_id.cmp(&b.evidence.paper_id))
        .then_with(|| a.evidence.sentence_index.cmp(&b.evidence.sentence_index))
        .then_with(|| a.evidence.interaction_id.cmp(&b.evidence.interaction_id))
        .then_with(|| a.evidence.arg1.sort_key().cmp(&b.evidence.arg1.sort_key()))
        .then_with(|| a.evidence.arg2.sort_key().cmp(&b.evidence.arg2.sort_key()))
        .then_with(|| b.evidence.score.total_cmp(&a.evidence.score))
        .then_with(|| a.evidence.text.cmp(&b.evidence.text))
}

pub fn rank_evidence(mut items: Vec<EvidenceItem>) -> Vec<EvidenceItem> {
    items.sort_by(compare_evidence);
    items
}
