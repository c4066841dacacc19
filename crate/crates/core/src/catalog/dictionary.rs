//! Surface-form dictionary and the case-insensitive, token-aligned matcher
//! used for mention detection.

use std::collections::BTreeMap;

use aho_corasick::{AhoCorasick, MatchKind as AcMatchKind};

use super::{AgentKind, Catalog, Cui};

/// Lowercased surface form to candidate cuis.
///
/// Each surface keeps every cui it names, ordered by preference:
/// supplements first, then lexicographically smallest cui.
#[derive(Debug, Clone)]
pub struct MentionDictionary {
    surfaces: Vec<String>,
    cuis: Vec<Vec<Cui>>,
    kinds: Vec<AgentKind>,
    automaton: Option<AhoCorasick>,
}

/// A dictionary hit inside a text, in char offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SurfaceMatch {
    pub start: usize,
    pub end: usize,
    pub surface_id: usize,
}

/// Whether a surface form may enter the dictionary.
pub(crate) fn admissible_surface(surface: &str) -> bool {
    surface.chars().count() > 1 && surface.chars().any(char::is_alphabetic)
}

pub fn build_mention_dictionary(catalog: &Catalog) -> MentionDictionary {
    let mut by_surface: BTreeMap<String, Vec<Cui>> = BTreeMap::new();
    for agent in catalog.agents() {
        let forms = std::iter::once(&agent.name).chain(&agent.synonyms).chain(&agent.trade_names);
        for form in forms {
            let surface = form.trim().to_lowercase();
            if !admissible_surface(&surface) {
                continue;
            }
            let entry = by_surface.entry(surface).or_default();
            if !entry.contains(&agent.cui) {
                entry.push(agent.cui.clone());
            }
        }
    }
    let (surfaces, mut cuis): (Vec<_>, Vec<_>) = by_surface.into_iter().unzip();
    for list in &mut cuis {
        list.sort_by(|a: &Cui, b: &Cui| {
            let rank = |c: &Cui| u8::from(catalog.classify_agent(c.as_str()) != Some(AgentKind::Supplement));
            rank(a).cmp(&rank(b)).then_with(|| a.cmp(b))
        });
    }
    let kinds = cuis
        .iter()
        .map(|list| catalog.classify_agent(list[0].as_str()).expect("dictionary cuis come from the catalog"))
        .collect();
    let automaton = if surfaces.is_empty() {
        None
    } else {
        Some(AhoCorasick::builder().match_kind(AcMatchKind::Standard).build(&surfaces).expect("dictionary automaton"))
    };
    MentionDictionary { surfaces, cuis, kinds, automaton }
}

fn is_token_boundary(chars: &[char], pos: usize) -> bool {
    if pos == 0 || pos == chars.len() {
        return true;
    }
    chars[pos - 1].is_alphanumeric() != chars[pos].is_alphanumeric()
}

impl MentionDictionary {
    pub(crate) fn empty() -> Self {
        Self { surfaces: Vec::new(), cuis: Vec::new(), kinds: Vec::new(), automaton: None }
    }

    pub fn len(&self) -> usize {
        self.surfaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surfaces.is_empty()
    }

    pub fn surface(&self, id: usize) -> &str {
        &self.surfaces[id]
    }

    /// Candidate cuis for a surface id, preferred first.
    pub fn cuis(&self, id: usize) -> &[Cui] {
        &self.cuis[id]
    }

    /// The tie-broken cui for a surface id and its kind.
    pub fn preferred(&self, id: usize) -> (&Cui, AgentKind) {
        (&self.cuis[id][0], self.kinds[id])
    }

    pub fn lookup(&self, surface: &str) -> Option<&[Cui]> {
        let key = surface.trim().to_lowercase();
        self.surfaces.binary_search(&key).ok().map(|id| self.cuis[id].as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[Cui])> {
        self.surfaces.iter().map(String::as_str).zip(self.cuis.iter().map(Vec::as_slice))
    }

    /// Non-overlapping, token-aligned, leftmost-longest matches over `text`.
    pub fn find(&self, text: &str) -> Vec<SurfaceMatch> {
        let Some(automaton) = &self.automaton else {
            return Vec::new();
        };
        let chars: Vec<char> = text.chars().collect();
        // Lowercasing may change byte lengths, so keep a map from each
        // lowercase byte offset that starts an original char to that char's index.
        let mut lower = String::with_capacity(text.len());
        let mut char_at: Vec<u32> = Vec::with_capacity(text.len() + 1);
        for (idx, c) in chars.iter().enumerate() {
            let before = lower.len();
            lower.extend(c.to_lowercase());
            char_at.push(idx as u32);
            char_at.resize(lower.len(), u32::MAX);
            debug_assert!(lower.len() > before);
        }
        char_at.push(chars.len() as u32);

        let mut hits: Vec<SurfaceMatch> = automaton
            .find_overlapping_iter(&lower)
            .filter_map(|m| {
                let start = char_at[m.start()];
                let end = char_at[m.end()];
                if start == u32::MAX || end == u32::MAX {
                    return None;
                }
                let (start, end) = (start as usize, end as usize);
                (is_token_boundary(&chars, start) && is_token_boundary(&chars, end)).then_some(SurfaceMatch {
                    start,
                    end,
                    surface_id: m.pattern().as_usize(),
                })
            })
            .collect();
        hits.sort_by(|a, b| a.start.cmp(&b.start).then(b.end.cmp(&a.end)));

        let mut out: Vec<SurfaceMatch> = Vec::new();
        for hit in hits {
            if out.last().is_none_or(|prev| hit.start >= prev.end) {
                out.push(hit);
            }
        }
        out
    }
}
