use std::collections::HashSet;
use std::fs;
use std::path::Path;

use super::EvidenceError;
use crate::catalog::Cui;

/// Default entries shipped with the engine.
pub const BUILTIN_BLOCKLIST: &str = include_str!("../../data/blocklist.tsv");

/// Suppressed `(surface, cui)` links. Surfaces compare case-insensitively.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SpanBlocklist {
    entries: HashSet<(String, Cui)>,
}

fn fold(surface: &str) -> String {
    surface.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

impl SpanBlocklist {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn builtin() -> Self {
        Self::parse(BUILTIN_BLOCKLIST).expect("builtin blocklist parses")
    }

    /// Parses `surface<TAB>cui` lines; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self, EvidenceError> {
        let mut entries = HashSet::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let bad = |reason: String| EvidenceError::Blocklist { line: idx + 1, reason };
            let (surface, cui) = line.split_once('\t').ok_or_else(|| bad("expected surface<TAB>cui".into()))?;
            let cui = Cui::new(cui.trim()).map_err(|e| bad(e.to_string()))?;
            let surface = fold(surface);
            if surface.is_empty() {
                return Err(bad("empty surface".into()));
            }
            entries.insert((surface, cui));
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, EvidenceError> {
        let text = fs::read_to_string(path).map_err(|e| EvidenceError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn insert(&mut self, surface: &str, cui: Cui) {
        self.entries.insert((fold(surface), cui));
    }

    pub fn contains(&self, surface: &str, cui: &Cui) -> bool {
        !self.entries.is_empty() && self.entries.contains(&(fold(surface), cui.clone()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
