//! The curated supplement/drug catalog.
//!
//! A catalog is loaded once from an agents file (one entity per line) and an
//! optional clusters file (member cui to canonical cui), validated, and then
//! treated as immutable. It answers classification, canonicalization and
//! name lookups, and owns the mention dictionary used by the pipeline.

mod dictionary;
mod fuzzy;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use dictionary::{build_mention_dictionary, MentionDictionary, SurfaceMatch};
pub use fuzzy::{fuzzy_match_name, name_similarity, normalize_name, FuzzyMatch, FUZZY_THRESHOLD};

use crate::jsonl::{self, JsonlError};

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid cui {0:?}: expected C followed by digits")]
    InvalidCui(String),
    #[error("duplicate cui {0} in agents file")]
    DuplicateCui(Cui),
    #[error("clusters line {line}: {reason}")]
    ClusterLine { line: usize, reason: String },
    #[error("cluster references cui {0} absent from the agents file")]
    UnknownClusterCui(Cui),
    #[error("cui {member} is assigned to both {first} and {second}")]
    ConflictingCluster { member: Cui, first: Cui, second: Cui },
    #[error("cluster chain: {member} -> {canonical} -> {next}")]
    ClusterChain { member: Cui, canonical: Cui, next: Cui },
    #[error("cluster cycle through {0}")]
    ClusterCycle(Cui),
    #[error("unknown cui {0}")]
    UnknownCui(String),
    #[error("fuzzy matching needs at least one candidate")]
    EmptyCandidates,
}

/// A UMLS-style concept identifier: `C` followed by one or more digits.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Cui(String);

impl Cui {
    pub fn new(raw: impl Into<String>) -> Result<Self, CatalogError> {
        let raw = raw.into();
        let valid = raw.len() > 1 && raw.starts_with('C') && raw[1..].bytes().all(|b| b.is_ascii_digit());
        if valid {
            Ok(Self(raw))
        } else {
            Err(CatalogError::InvalidCui(raw))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Cui {
    type Error = CatalogError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Cui::new(value)
    }
}

impl From<Cui> for String {
    fn from(value: Cui) -> Self {
        value.0
    }
}

impl fmt::Display for Cui {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::str::FromStr for Cui {
    type Err = CatalogError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Cui::new(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Supplement,
    Drug,
}

/// How a query string reached an entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchKind {
    Name,
    Synonym,
    TradeName,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentEntity {
    pub cui: Cui,
    pub name: String,
    #[serde(default)]
    pub synonyms: Vec<String>,
    #[serde(default)]
    pub trade_names: Vec<String>,
    pub kind: AgentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub definition: Option<String>,
}

/// Member cui to canonical cui. Canonical cuis map to themselves.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClusterMap {
    member_to_canonical: HashMap<Cui, Cui>,
}

impl ClusterMap {
    /// Validates raw `(member, canonical)` pairs against the known cuis.
    pub fn from_pairs<F>(pairs: &[(Cui, Cui)], known: F) -> Result<Self, CatalogError>
    where
        F: Fn(&Cui) -> bool,
    {
        let mut map: HashMap<Cui, Cui> = HashMap::new();
        for (member, canonical) in pairs {
            for cui in [member, canonical] {
                if !known(cui) {
                    return Err(CatalogError::UnknownClusterCui(cui.clone()));
                }
            }
            if let Some(prev) = map.get(member) {
                if prev != canonical {
                    return Err(CatalogError::ConflictingCluster {
                        member: member.clone(),
                        first: prev.clone(),
                        second: canonical.clone(),
                    });
                }
            }
            map.insert(member.clone(), canonical.clone());
        }
        let mut members: Vec<&Cui> = map.keys().collect();
        members.sort();
        for member in members {
            let canonical = &map[member];
            if canonical == member {
                continue;
            }
            if let Some(next) = map.get(canonical) {
                if next == canonical {
                    continue;
                }
                // Walk to tell a cycle from a plain chain.
                let mut cur = next;
                for _ in 0..map.len() {
                    if cur == member {
                        return Err(CatalogError::ClusterCycle(member.clone()));
                    }
                    match map.get(cur) {
                        Some(n) if n != cur => cur = n,
                        _ => break,
                    }
                }
                return Err(CatalogError::ClusterChain {
                    member: member.clone(),
                    canonical: canonical.clone(),
                    next: next.clone(),
                });
            }
        }
        let canonicals: Vec<Cui> = map.values().cloned().collect();
        for c in canonicals {
            map.entry(c.clone()).or_insert(c);
        }
        Ok(Self { member_to_canonical: map })
    }

    pub fn canonical<'a>(&'a self, cui: &'a Cui) -> &'a Cui {
        self.member_to_canonical.get(cui).unwrap_or(cui)
    }

    /// Non-identity `(member, canonical)` pairs, sorted by member.
    pub fn pairs(&self) -> Vec<(Cui, Cui)> {
        let mut pairs: Vec<_> =
            self.member_to_canonical.iter().filter(|(m, c)| m != c).map(|(m, c)| (m.clone(), c.clone())).collect();
        pairs.sort();
        pairs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NameMatch {
    pub cui: Cui,
    pub kind: MatchKind,
    pub similarity: f64,
    pub exact: bool,
}

/// A validated, immutable catalog.
#[derive(Debug, Clone)]
pub struct Catalog {
    agents: BTreeMap<Cui, AgentEntity>,
    clusters: ClusterMap,
    exact: HashMap<String, Vec<(Cui, MatchKind)>>,
    names: Vec<(String, usize, Cui, MatchKind)>,
    dictionary: MentionDictionary,
}

impl PartialEq for Catalog {
    fn eq(&self, other: &Self) -> bool {
        self.agents == other.agents && self.clusters == other.clusters
    }
}

fn merge_unique(into: &mut Vec<String>, from: Vec<String>) {
    for item in from {
        if !into.contains(&item) {
            into.push(item);
        }
    }
}

impl Catalog {
    /// Builds a catalog from agent lines and cluster pairs.
    ///
    /// A cui given once as supplement and once as drug is merged into one
    /// supplement entity; any other repeated cui is rejected.
    pub fn from_parts(agent_lines: Vec<AgentEntity>, cluster_pairs: &[(Cui, Cui)]) -> Result<Self, CatalogError> {
        let mut agents: BTreeMap<Cui, AgentEntity> = BTreeMap::new();
        for agent in agent_lines {
            match agents.get_mut(&agent.cui) {
                None => {
                    agents.insert(agent.cui.clone(), agent);
                }
                Some(existing) if existing.kind != agent.kind => {
                    let (mut keep, other) = if existing.kind == AgentKind::Supplement {
                        (existing.clone(), agent)
                    } else {
                        (agent, existing.clone())
                    };
                    merge_unique(&mut keep.synonyms, other.synonyms);
                    if other.name != keep.name {
                        merge_unique(&mut keep.synonyms, vec![other.name]);
                    }
                    merge_unique(&mut keep.trade_names, other.trade_names);
                    keep.definition = keep.definition.or(other.definition);
                    *existing = keep;
                }
                Some(_) => return Err(CatalogError::DuplicateCui(agent.cui)),
            }
        }
        let clusters = ClusterMap::from_pairs(cluster_pairs, |c| agents.contains_key(c))?;

        let mut exact: HashMap<String, Vec<(Cui, MatchKind)>> = HashMap::new();
        let mut names = Vec::new();
        for agent in agents.values() {
            let forms = std::iter::once((&agent.name, MatchKind::Name))
                .chain(agent.synonyms.iter().map(|s| (s, MatchKind::Synonym)))
                .chain(agent.trade_names.iter().map(|s| (s, MatchKind::TradeName)));
            for (form, kind) in forms {
                let norm = normalize_name(form);
                if norm.is_empty() {
                    continue;
                }
                let entry = exact.entry(norm.clone()).or_default();
                if !entry.iter().any(|(c, _)| c == &agent.cui) {
                    entry.push((agent.cui.clone(), kind));
                }
                names.push((norm.clone(), norm.chars().count(), agent.cui.clone(), kind));
            }
        }
        let mut catalog = Self { agents, clusters, exact, names, dictionary: MentionDictionary::empty() };
        catalog.dictionary = build_mention_dictionary(&catalog);
        Ok(catalog)
    }

    pub fn agents(&self) -> impl Iterator<Item = &AgentEntity> {
        self.agents.values()
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn get(&self, cui: &str) -> Option<&AgentEntity> {
        let cui = Cui::new(cui).ok()?;
        self.agents.get(&cui)
    }

    pub fn clusters(&self) -> &ClusterMap {
        &self.clusters
    }

    pub fn dictionary(&self) -> &MentionDictionary {
        &self.dictionary
    }

    /// Supplement, drug, or `None` for cuis outside both curated lists.
    pub fn classify_agent(&self, cui: &str) -> Option<AgentKind> {
        self.get(cui).map(|a| a.kind)
    }

    pub fn canonical_cui(&self, cui: &str) -> Result<&Cui, CatalogError> {
        let parsed = Cui::new(cui).map_err(|_| CatalogError::UnknownCui(cui.to_string()))?;
        let (key, _) = self.agents.get_key_value(&parsed).ok_or_else(|| CatalogError::UnknownCui(cui.to_string()))?;
        Ok(self.clusters.canonical(key))
    }

    pub fn canonical_entity(&self, cui: &str) -> Result<&AgentEntity, CatalogError> {
        let canonical = self.canonical_cui(cui)?;
        Ok(&self.agents[canonical])
    }

    /// Resolves a free-text query to entities.
    ///
    /// Exact (case- and whitespace-insensitive) hits on names, synonyms and
    /// trade names come first, then fuzzy hits scoring at least
    /// [`FUZZY_THRESHOLD`]. Trade names live on their ingredient entity, so a
    /// trade-name hit already points at the ingredient. Never fails.
    pub fn resolve_query_name(&self, name: &str) -> Vec<NameMatch> {
        let query = normalize_name(name);
        if query.is_empty() {
            return Vec::new();
        }
        let mut out: Vec<NameMatch> = Vec::new();
        if let Some(hits) = self.exact.get(&query) {
            let mut hits = hits.clone();
            hits.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
            out.extend(hits.into_iter().map(|(cui, kind)| NameMatch { cui, kind, similarity: 1.0, exact: true }));
        }

        let qlen = query.chars().count();
        let mut fuzzy: HashMap<&Cui, (f64, MatchKind)> = HashMap::new();
        for (form, len, cui, kind) in &self.names {
            if out.iter().any(|m| &m.cui == cui) {
                continue;
            }
            if fuzzy::similarity_bound(qlen, *len) < FUZZY_THRESHOLD {
                continue;
            }
            let score = strsim::normalized_levenshtein(&query, form);
            if score < FUZZY_THRESHOLD {
                continue;
            }
            let slot = fuzzy.entry(cui).or_insert((score, *kind));
            if score > slot.0 || (score == slot.0 && *kind < slot.1) {
                *slot = (score, *kind);
            }
        }
        let mut fuzzy: Vec<NameMatch> = fuzzy
            .into_iter()
            .map(|(cui, (similarity, kind))| NameMatch { cui: cui.clone(), kind, similarity, exact: false })
            .collect();
        fuzzy.sort_by(|a, b| b.similarity.total_cmp(&a.similarity).then_with(|| a.cui.cmp(&b.cui)));
        out.extend(fuzzy);
        out
    }
}

/// Parses a two-column `member<TAB>canonical` clusters file. Blank lines and
/// lines starting with `#` are ignored.
pub fn parse_clusters(text: &str) -> Result<Vec<(Cui, Cui)>, CatalogError> {
    let mut pairs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |reason: String| CatalogError::ClusterLine { line: idx + 1, reason };
        let mut cols = line.split('\t');
        let (Some(member), Some(canonical), None) = (cols.next(), cols.next(), cols.next()) else {
            return Err(bad("expected two tab-separated columns".into()));
        };
        let member = Cui::new(member.trim()).map_err(|e| bad(e.to_string()))?;
        let canonical = Cui::new(canonical.trim()).map_err(|e| bad(e.to_string()))?;
        pairs.push((member, canonical));
    }
    Ok(pairs)
}

pub fn load_catalog(agents_path: &Path, clusters_path: Option<&Path>) -> Result<Catalog, CatalogError> {
    let agents: Vec<AgentEntity> = jsonl::read_all(agents_path)?;
    let pairs = match clusters_path {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|source| CatalogError::Io { path: path.display().to_string(), source })?;
            parse_clusters(&text)?
        }
        None => Vec::new(),
    };
    Catalog::from_parts(agents, &pairs)
}
