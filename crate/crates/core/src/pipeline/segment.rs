//! Rule-based sentence segmentation.
//!
//! A boundary follows `.`, `!` or `?` (plus any closing brackets or quotes)
//! when whitespace and then an uppercase letter or digit come next. A period
//! ending a known abbreviation never splits, nor does a period between digits.

use super::Sentence;

const ABBREVIATIONS: &[&str] = &[
    "e.g.", "i.e.", "vs.", "dr.", "fig.", "figs.", "al.", "approx.", "ca.", "cf.", "no.", "nos.", "mr.", "mrs.", "ms.",
    "prof.", "st.", "resp.", "ref.", "refs.", "eq.", "vol.", "inc.", "ltd.", "jr.", "sr.", "sp.", "spp.", "var.",
    "subsp.", "ph.", "viz.",
];

const CLOSERS: &[char] = &[')', ']', '"', '\'', '\u{201d}', '\u{2019}'];

fn ends_with_abbreviation(chars: &[char], dot: usize) -> bool {
    let start = chars[..dot].iter().rposition(|c| c.is_whitespace() || *c == '(').map_or(0, |p| p + 1);
    let token: String = chars[start..=dot].iter().collect::<String>().to_lowercase();
    ABBREVIATIONS.contains(&token.as_str())
}

/// Splits an abstract into non-empty sentences with char offsets.
pub fn segment_sentences(text: &str, paper_id: &str) -> Vec<Sentence> {
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    let mut spans: Vec<(usize, usize)> = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < n {
        let c = chars[i];
        if matches!(c, '.' | '!' | '?') {
            let mut end = i + 1;
            while end < n && CLOSERS.contains(&chars[end]) {
                end += 1;
            }
            let mut next = end;
            while next < n && chars[next].is_whitespace() {
                next += 1;
            }
            let digit_gap =
                c == '.' && i > 0 && chars[i - 1].is_ascii_digit() && end < n && chars[end].is_ascii_digit();
            let boundary = next > end
                && next < n
                && (chars[next].is_uppercase() || chars[next].is_ascii_digit())
                && !digit_gap
                && !(c == '.' && ends_with_abbreviation(&chars, i));
            if boundary {
                spans.push((start, end));
                start = next;
                i = next;
                continue;
            }
        }
        i += 1;
    }
    spans.push((start, n));

    spans
        .into_iter()
        .filter_map(|(s, e)| {
            let s = s + chars[s..e].iter().take_while(|c| c.is_whitespace()).count();
            let e = e - chars[s..e].iter().rev().take_while(|c| c.is_whitespace()).count();
            (s < e).then_some((s, e))
        })
        .enumerate()
        .map(|(idx, (s, e))| Sentence {
            paper_id: paper_id.to_string(),
            sentence_index: idx,
            text: chars[s..e].iter().collect(),
            char_offset: s,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(s: &str) -> Vec<String> {
        segment_sentences(s, "p").into_iter().map(|s| s.text).collect()
    }

    #[test]
    fn simple_boundaries() {
        assert_eq!(texts("A b. C d."), vec!["A b.", "C d."]);
        assert!(texts("").is_empty());
        assert!(texts("   \n ").is_empty());
    }

    #[test]
    fn decimals_and_abbreviations() {
        assert_eq!(texts("Dose was 1.5 mg daily. It worked."), vec!["Dose was 1.5 mg daily.", "It worked."]);
        assert_eq!(
            texts("Herbs, e.g. Ginkgo, were used. St. John's wort vs. Placebo was tested."),
            vec!["Herbs, e.g. Ginkgo, were used.", "St. John's wort vs. Placebo was tested."]
        );
        assert_eq!(texts("See Fig. 2 for details. Done."), vec!["See Fig. 2 for details.", "Done."]);
        assert_eq!(texts("Smith et al. Reported it."), vec!["Smith et al. Reported it."]);
    }

    #[test]
    fn lowercase_continuation_does_not_split() {
        assert_eq!(texts("Levels fell. then rose."), vec!["Levels fell. then rose."]);
    }

    #[test]
    fn question_exclamation_and_closers() {
        assert_eq!(texts("Is it safe? Yes! (Maybe.) 3 cases."), vec!["Is it safe?", "Yes! (Maybe.)", "3 cases."]);
    }

    #[test]
    fn offsets_slice_the_abstract() {
        let text = "  Café use rose. Über alles fell.  ";
        let chars: Vec<char> = text.chars().collect();
        for s in segment_sentences(text, "p") {
            let n = s.text.chars().count();
            let slice: String = chars[s.char_offset..s.char_offset + n].iter().collect();
            assert_eq!(slice, s.text);
        }
    }

    proptest::proptest! {
        #[test]
        fn segments_reproduce_input(text in "[A-Za-z0-9 .!?,()\n]{0,80}") {
            let chars: Vec<char> = text.chars().collect();
            let sents = segment_sentences(&text, "p");
            let mut cursor = 0usize;
            for s in &sents {
                proptest::prop_assert!(!s.text.is_empty());
                proptest::prop_assert!(s.char_offset >= cursor);
                proptest::prop_assert!(chars[cursor..s.char_offset].iter().all(|c| c.is_whitespace()));
                let n = s.text.chars().count();
                let slice: String = chars[s.char_offset..s.char_offset + n].iter().collect();
                proptest::prop_assert_eq!(&slice, &s.text);
                cursor = s.char_offset + n;
            }
            proptest::prop_assert!(chars[cursor..].iter().all(|c| c.is_whitespace()));
        }
    }
}
