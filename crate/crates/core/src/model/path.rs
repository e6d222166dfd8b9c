use std::fmt;

use serde::{Deserialize, Serialize};

/// Name of the reserved taxon that receives newly loaded and orphaned images.
pub const UNGROUPED: &str = "ungrouped";

/// Identity of a taxon: the names on the way from (but excluding) the root.
///
/// The empty path denotes the root itself. Ordering is lexicographic by
/// segment, which is what every tie-breaking rule in the crate relies on.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaxonPath(Vec<String>);

impl TaxonPath {
    pub fn root() -> Self {
        Self(Vec::new())
    }

    pub fn new<I, S>(segments: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self(segments.into_iter().map(Into::into).collect())
    }

    /// Parses a `/`-joined path. The empty string is the root.
    pub fn parse(joined: &str) -> Self {
        if joined.is_empty() {
            return Self::root();
        }
        Self(joined.split('/').map(str::to_owned).collect())
    }

    pub fn segments(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn name(&self) -> Option<&str> {
        self.0.last().map(String::as_str)
    }

    pub fn parent(&self) -> Option<TaxonPath> {
        if self.0.is_empty() {
            None
        } else {
            Some(Self(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn child(&self, name: impl Into<String>) -> TaxonPath {
        let mut segments = self.0.clone();
        segments.push(name.into());
        Self(segments)
    }

    /// True when `self` is `other` or one of its ancestors.
    pub fn is_prefix_of(&self, other: &TaxonPath) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }

    pub fn is_proper_prefix_of(&self, other: &TaxonPath) -> bool {
        other.0.len() > self.0.len() && self.is_prefix_of(other)
    }

    /// Replaces the prefix `from` with `to`. Returns `None` when `from` is not a prefix.
    pub fn rebase(&self, from: &TaxonPath, to: &TaxonPath) -> Option<TaxonPath> {
        if !from.is_prefix_of(self) {
            return None;
        }
        let mut segments = to.0.clone();
        segments.extend_from_slice(&self.0[from.0.len()..]);
        Some(Self(segments))
    }

    /// The first `depth` segments.
    pub fn truncate(&self, depth: usize) -> TaxonPath {
        Self(self.0.iter().take(depth).cloned().collect())
    }

    /// All non-root prefixes, shortest first, ending with the path itself.
    pub fn prefixes(&self) -> impl Iterator<Item = TaxonPath> + '_ {
        (1..=self.0.len()).map(move |n| Self(self.0[..n].to_vec()))
    }

    /// True for `ungrouped`, `ungrouped/ungrouped`, ... (the parking chain).
    pub fn is_parking(&self) -> bool {
        !self.0.is_empty() && self.0.iter().all(|s| s == UNGROUPED)
    }

    pub fn joined(&self) -> String {
        self.0.join("/")
    }
}

impl fmt::Display for TaxonPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            f.write_str("root")
        } else {
            f.write_str(&self.0.join("/"))
        }
    }
}

impl<S: Into<String>> FromIterator<S> for TaxonPath {
    fn from_iter<T: IntoIterator<Item = S>>(iter: T) -> Self {
        Self::new(iter)
    }
}

/// Rejects names that would break path identity or the `/`-joined file encoding.
pub fn validate_name(name: &str) -> bool {
    !name.is_empty() && !name.contains('/')
}
