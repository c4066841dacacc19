//! Read-only queries over a frozen evidence store.

mod http;

use std::collections::HashMap;
use std::sync::Arc;

use serde::Serialize;

pub use http::router;

use crate::catalog::{AgentKind, Cui, MatchKind};
use crate::evidence::{EvidenceError, EvidenceItem, EvidenceStore, InteractionId, Manifest};

pub const API_VERSION: u32 = 1;
pub const DEFAULT_PER_PAGE: usize = 10;
pub const MAX_PER_PAGE: usize = 100;
pub const DEFAULT_SEARCH_LIMIT: usize = 10;
pub const MAX_SEARCH_LIMIT: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ServiceError {
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    NotFound(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentSearchResult {
    pub cui: Cui,
    pub name: String,
    pub kind: AgentKind,
    pub matched_via: MatchKind,
    pub exact: bool,
    pub interactions_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AgentSummary {
    pub cui: Cui,
    pub name: String,
    pub kind: AgentKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InteractionSummary {
    pub interaction_id: InteractionId,
    pub partner: AgentSummary,
    pub evidence_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AgentDetail {
    pub cui: Cui,
    pub name: String,
    pub kind: AgentKind,
    pub synonyms: Vec<String>,
    pub trade_names: Vec<String>,
    pub definition: Option<String>,
    /// Cluster members folded into this entity.
    pub members: Vec<Cui>,
    /// The requested cui when it was a cluster member.
    pub redirected_from: Option<Cui>,
    pub interactions_count: usize,
    pub interactions: Vec<InteractionSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Page<T> {
    pub page: usize,
    pub per_page: usize,
    pub total: usize,
    pub items: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvidencePage {
    pub interaction_id: InteractionId,
    pub agent_a: AgentSummary,
    pub agent_b: AgentSummary,
    pub page: usize,
    pub per_page: usize,
    pub total: usize,
    pub items: Vec<EvidenceItem>,
}

/// Validated pagination window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pagination {
    pub page: usize,
    pub per_page: usize,
}

impl Default for Pagination {
    fn default() -> Self {
        Self { page: 1, per_page: DEFAULT_PER_PAGE }
    }
}

impl Pagination {
    pub fn new(page: usize, per_page: usize) -> Result<Self, ServiceError> {
        if page == 0 {
            return Err(ServiceError::BadRequest("page starts at 1".into()));
        }
        if per_page == 0 || per_page > MAX_PER_PAGE {
            return Err(ServiceError::BadRequest(format!("per_page must be between 1 and {MAX_PER_PAGE}")));
        }
        Ok(Self { page, per_page })
    }

    fn slice<'a, T>(&self, items: &'a [T]) -> &'a [T] {
        let start = (self.page - 1).saturating_mul(self.per_page);
        if start >= items.len() {
            return &[];
        }
        &items[start..(start + self.per_page).min(items.len())]
    }
}

#[derive(Debug, Clone)]
pub struct SearchService {
    store: Arc<EvidenceStore>,
    manifest: Option<Manifest>,
    members: HashMap<Cui, Vec<Cui>>,
}

impl SearchService {
    pub fn new(store: EvidenceStore, manifest: Option<Manifest>) -> Self {
        let mut members: HashMap<Cui, Vec<Cui>> = HashMap::new();
        for (member, canonical) in store.catalog().clusters().pairs() {
            if member != canonical {
                members.entry(canonical).or_default().push(member);
            }
        }
        for list in members.values_mut() {
            list.sort();
        }
        Self { store: Arc::new(store), manifest, members }
    }

    pub fn store(&self) -> &EvidenceStore {
        &self.store
    }

    pub fn manifest(&self) -> Option<&Manifest> {
        self.manifest.as_ref()
    }

    fn summary(&self, cui: &Cui) -> AgentSummary {
        match self.store.catalog().get(cui.as_str()) {
            Some(a) => AgentSummary { cui: a.cui.clone(), name: a.name.clone(), kind: a.kind },
            None => AgentSummary { cui: cui.clone(), name: cui.to_string(), kind: AgentKind::Drug },
        }
    }

    /// Resolves a query to canonical entities: exact hits first, then by
    /// interaction count (descending) and name.
    pub fn search_agents(&self, q: &str, limit: usize) -> Vec<AgentSearchResult> {
        let catalog = self.store.catalog();
        let mut best: HashMap<Cui, (bool, MatchKind)> = HashMap::new();
        for m in catalog.resolve_query_name(q) {
            let Ok(canonical) = catalog.canonical_cui(m.cui.as_str()) else { continue };
            let cand = (m.exact, m.kind);
            best.entry(canonical.clone())
                .and_modify(|cur| {
                    if (!cand.0, cand.1) < (!cur.0, cur.1) {
                        *cur = cand;
                    }
                })
                .or_insert(cand);
        }
        let mut out: Vec<AgentSearchResult> = best
            .into_iter()
            .filter_map(|(cui, (exact, via))| {
                let a = catalog.get(cui.as_str())?;
                Some(AgentSearchResult {
                    interactions_count: self.store.interactions_count(&cui),
                    name: a.name.clone(),
                    kind: a.kind,
                    matched_via: via,
                    exact,
                    cui,
                })
            })
            .collect();
        out.sort_by(|a, b| {
            b.exact
                .cmp(&a.exact)
                .then_with(|| b.interactions_count.cmp(&a.interactions_count))
                .then_with(|| a.name.to_lowercase().cmp(&b.name.to_lowercase()))
                .then_with(|| a.cui.cmp(&b.cui))
        });
        out.truncate(limit);
        out
    }

    fn resolve(&self, raw: &str) -> Result<(Cui, Option<Cui>), ServiceError> {
        let cui = Cui::new(raw).map_err(|_| ServiceError::BadRequest(format!("malformed cui {raw:?}")))?;
        let canonical = self
            .store
            .catalog()
            .canonical_cui(raw)
            .map_err(|_| ServiceError::NotFound(format!("unknown cui {raw}")))?
            .clone();
        let redirected = (canonical != cui).then_some(cui);
        Ok((canonical, redirected))
    }

    fn interaction_summaries(&self, cui: &Cui) -> Vec<InteractionSummary> {
        self.store
            .interactions_of(cui)
            .iter()
            .map(|i| InteractionSummary {
                interaction_id: i.interaction_id.clone(),
                partner: self.summary(&i.partner),
                evidence_count: i.evidence_count,
            })
            .collect()
    }

    /// Entity detail for a raw or member cui, served as its canonical entity.
    pub fn get_agent(&self, raw: &str) -> Result<AgentDetail, ServiceError> {
        let (cui, redirected_from) = self.resolve(raw)?;
        let agent = self.store.catalog().get(cui.as_str()).expect("canonical cui is in the catalog");
        let interactions = self.interaction_summaries(&cui);
        Ok(AgentDetail {
            name: agent.name.clone(),
            kind: agent.kind,
            synonyms: agent.synonyms.clone(),
            trade_names: agent.trade_names.clone(),
            definition: agent.definition.clone(),
            members: self.members.get(&cui).cloned().unwrap_or_default(),
            redirected_from,
            interactions_count: interactions.len(),
            interactions,
            cui,
        })
    }

    pub fn agent_interactions(&self, raw: &str, page: Pagination) -> Result<Page<InteractionSummary>, ServiceError> {
        let (cui, _) = self.resolve(raw)?;
        let all = self.interaction_summaries(&cui);
        Ok(Page { page: page.page, per_page: page.per_page, total: all.len(), items: page.slice(&all).to_vec() })
    }

    pub fn get_interaction(&self, raw_id: &str, page: Pagination) -> Result<EvidencePage, ServiceError> {
        let id = InteractionId::parse(raw_id).map_err(|e| match e {
            EvidenceError::UnorderedId { expected, .. } => {
                ServiceError::BadRequest(format!("interaction ids are ordered; use {expected}"))
            }
            other => ServiceError::BadRequest(other.to_string()),
        })?;
        let record =
            self.store.record(&id).ok_or_else(|| ServiceError::NotFound(format!("unknown interaction {id}")))?;
        Ok(EvidencePage {
            agent_a: self.summary(&record.cui_a),
            agent_b: self.summary(&record.cui_b),
            interaction_id: id,
            page: page.page,
            per_page: page.per_page,
            total: record.evidence_count,
            items: page.slice(&record.evidence).to_vec(),
        })
    }
}

#[cfg(test)]
mod tests;
