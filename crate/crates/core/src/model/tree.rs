use serde::{Deserialize, Serialize};

use super::path::TaxonPath;

pub const ROOT_NAME: &str = "root";

/// Whether a node was made by hand or produced by clustering assistance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    #[default]
    Manual,
    MachineCluster,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaxonNode {
    pub name: String,
    #[serde(default)]
    pub children: Vec<TaxonNode>,
    #[serde(default)]
    pub origin: Origin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl TaxonNode {
    pub fn new(name: impl Into<String>) -> Self {
        Self::with_origin(name, Origin::Manual)
    }

    pub fn with_origin(name: impl Into<String>, origin: Origin) -> Self {
        Self {
            name: name.into(),
            children: Vec::new(),
            origin,
            note: None,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn child(&self, name: &str) -> Option<&TaxonNode> {
        self.children.iter().find(|c| c.name == name)
    }

    pub fn child_index(&self, name: &str) -> Option<usize> {
        self.children.iter().position(|c| c.name == name)
    }

    /// Number of nodes in this subtree, including `self`.
    pub fn size(&self) -> usize {
        1 + self.children.iter().map(TaxonNode::size).sum::<usize>()
    }
}

/// A rooted taxonomy. The root is named `root` and never appears in paths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaxonomyTree {
    root: TaxonNode,
}

impl Default for TaxonomyTree {
    fn default() -> Self {
        Self::new()
    }
}

impl TaxonomyTree {
    pub fn new() -> Self {
        Self {
            root: TaxonNode::new(ROOT_NAME),
        }
    }

    pub fn from_root(root: TaxonNode) -> Self {
        Self { root }
    }

    pub fn root(&self) -> &TaxonNode {
        &self.root
    }

    pub fn get(&self, path: &TaxonPath) -> Option<&TaxonNode> {
        let mut node = &self.root;
        for seg in path.segments() {
            node = node.child(seg)?;
        }
        Some(node)
    }

    pub fn get_mut(&mut self, path: &TaxonPath) -> Option<&mut TaxonNode> {
        let mut node = &mut self.root;
        for seg in path.segments() {
            node = node.children.iter_mut().find(|c| &c.name == seg)?;
        }
        Some(node)
    }

    pub fn contains(&self, path: &TaxonPath) -> bool {
        self.get(path).is_some()
    }

    /// True when `path` names an existing non-root node without children.
    pub fn is_leaf(&self, path: &TaxonPath) -> bool {
        !path.is_root() && self.get(path).is_some_and(TaxonNode::is_leaf)
    }

    /// Every non-root path in pre-order (parents before children, siblings in order).
    pub fn paths(&self) -> Vec<TaxonPath> {
        let mut out = Vec::new();
        fn walk(node: &TaxonNode, prefix: &TaxonPath, out: &mut Vec<TaxonPath>) {
            for child in &node.children {
                let p = prefix.child(child.name.clone());
                out.push(p.clone());
                walk(child, &p, out);
            }
        }
        walk(&self.root, &TaxonPath::root(), &mut out);
        out
    }

    pub fn leaves(&self) -> Vec<TaxonPath> {
        self.paths()
            .into_iter()
            .filter(|p| self.is_leaf(p))
            .collect()
    }

    /// Number of non-root nodes.
    pub fn len(&self) -> usize {
        self.root.size() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.root.children.is_empty()
    }

    /// Detaches the node at `path`. The root cannot be detached.
    pub(crate) fn detach(&mut self, path: &TaxonPath) -> Option<TaxonNode> {
        let parent = self.get_mut(&path.parent()?)?;
        let idx = parent.child_index(path.name()?)?;
        Some(parent.children.remove(idx))
    }

    /// First structural problem found, if any: a duplicate sibling name or an invalid name.
    pub fn structural_error(&self) -> Option<String> {
        fn check(node: &TaxonNode, prefix: &TaxonPath) -> Option<String> {
            let mut seen = std::collections::HashSet::new();
            for child in &node.children {
                if !super::path::validate_name(&child.name) {
                    return Some(format!("invalid taxon name {:?} under {prefix}", child.name));
                }
                if !seen.insert(child.name.as_str()) {
                    return Some(format!("duplicate sibling {:?} under {prefix}", child.name));
                }
                if let Some(e) = check(child, &prefix.child(child.name.clone())) {
                    return Some(e);
                }
            }
            None
        }
        check(&self.root, &TaxonPath::root())
    }
}
