use std::collections::{BTreeSet, HashSet};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::error::ModelError;
use super::image::Catalog;
use super::ops::{LogEntry, Op, PartSpec};
use super::path::{validate_name, TaxonPath, UNGROUPED};
use super::tree::{Origin, TaxonNode, TaxonomyTree};

/// The labels one coder gave one image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelAssignment {
    pub uuid: String,
    pub paths: BTreeSet<TaxonPath>,
    pub unsure: bool,
}

/// Tree, labels and memos: everything the operation log acts on.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SessionState {
    pub tree: TaxonomyTree,
    /// Keyed by uuid, in load order.
    pub labels: IndexMap<String, LabelAssignment>,
    pub memos: Vec<String>,
}

/// Filter for [`CoderSession::query_images`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ImageFilter {
    /// Images with a label at or below the taxon. The root matches every image.
    Taxon(TaxonPath),
    /// Case-insensitive substring of the display name.
    Keyword(String),
    Uuid(String),
}

/// One coder's tree, labels and operation history.
///
/// `base` is the state the log replays from; it is `None` for sessions built
/// from scratch and holds the imported snapshot for sessions loaded without a log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoderSession {
    session_id: String,
    coder_id: String,
    base: Option<SessionState>,
    state: SessionState,
    log: Vec<LogEntry>,
}

impl CoderSession {
    pub fn new(coder_id: &str) -> Result<Self, ModelError> {
        Self::with_id(coder_id, coder_id)
    }

    pub fn with_id(session_id: &str, coder_id: &str) -> Result<Self, ModelError> {
        if coder_id.is_empty() {
            return Err(ModelError::EmptyCoderId);
        }
        Ok(Self {
            session_id: session_id.to_owned(),
            coder_id: coder_id.to_owned(),
            base: None,
            state: SessionState::default(),
            log: Vec::new(),
        })
    }

    /// A session whose history starts at an imported snapshot.
    pub fn from_snapshot(session_id: &str, coder_id: &str, snapshot: SessionState) -> Result<Self, ModelError> {
        let mut s = Self::with_id(session_id, coder_id)?;
        s.base = Some(snapshot.clone());
        s.state = snapshot;
        Ok(s)
    }

    /// Rebuilds a session by applying `log` to `base` (or to the empty state).
    pub fn replay(
        session_id: &str,
        coder_id: &str,
        base: Option<SessionState>,
        log: &[LogEntry],
    ) -> Result<Self, ModelError> {
        let mut s = match base {
            Some(b) => Self::from_snapshot(session_id, coder_id, b)?,
            None => Self::with_id(session_id, coder_id)?,
        };
        for (i, entry) in log.iter().enumerate() {
            let expected = i as u64 + 1;
            if entry.version != expected {
                return Err(ModelError::CorruptLog(format!(
                    "entry {i} has version {}, expected {expected}",
                    entry.version
                )));
            }
            s.apply(entry.op.clone()).map_err(|e| {
                ModelError::CorruptLog(format!("version {expected} ({}) failed: {e}", entry.op.kind()))
            })?;
        }
        Ok(s)
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn coder_id(&self) -> &str {
        &self.coder_id
    }

    pub fn version(&self) -> u64 {
        self.log.len() as u64
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn base(&self) -> Option<&SessionState> {
        self.base.as_ref()
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn tree(&self) -> &TaxonomyTree {
        &self.state.tree
    }

    pub fn labels(&self) -> &IndexMap<String, LabelAssignment> {
        &self.state.labels
    }

    pub fn memos(&self) -> &[String] {
        &self.state.memos
    }

    pub fn image_count(&self) -> usize {
        self.state.labels.len()
    }

    pub fn paths_of(&self, uuid: &str) -> Option<&BTreeSet<TaxonPath>> {
        self.state.labels.get(uuid).map(|a| &a.paths)
    }

    pub fn is_unsure(&self, uuid: &str) -> Option<bool> {
        self.state.labels.get(uuid).map(|a| a.unsure)
    }

    /// Per-image path sets in load order.
    pub fn labeling(&self) -> super::Labeling {
        self.state
            .labels
            .iter()
            .map(|(u, a)| (u.clone(), a.paths.clone()))
            .collect()
    }

    /// Applies `op` atomically: on error the session is unchanged.
    /// Returns the new version.
    pub fn apply(&mut self, op: Op) -> Result<u64, ModelError> {
        self.state.apply(&op)?;
        let version = self.version() + 1;
        self.log.push(LogEntry { version, op });
        Ok(version)
    }

    pub fn load_batch<I, S>(&mut self, uuids: I) -> Result<u64, ModelError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.apply(Op::LoadBatch {
            uuids: uuids.into_iter().map(Into::into).collect(),
        })
    }

    pub fn create_taxon(&mut self, parent: &TaxonPath, name: &str) -> Result<u64, ModelError> {
        self.apply(Op::CreateTaxon {
            parent: parent.clone(),
            name: name.to_owned(),
        })
    }

    pub fn apply_partition(&mut self, path: &TaxonPath, parts: Vec<PartSpec>, origin: Origin) -> Result<u64, ModelError> {
        self.apply(Op::ApplyPartition {
            path: path.clone(),
            parts,
            origin,
        })
    }

    pub fn flatten_taxon(&mut self, path: &TaxonPath) -> Result<u64, ModelError> {
        self.apply(Op::FlattenTaxon { path: path.clone() })
    }

    pub fn merge_taxa(&mut self, source: &TaxonPath, target: &TaxonPath) -> Result<u64, ModelError> {
        self.apply(Op::MergeTaxa {
            source: source.clone(),
            target: target.clone(),
        })
    }

    pub fn move_taxon(&mut self, path: &TaxonPath, new_parent: &TaxonPath) -> Result<u64, ModelError> {
        self.apply(Op::MoveTaxon {
            path: path.clone(),
            new_parent: new_parent.clone(),
        })
    }

    pub fn rename_taxon(&mut self, path: &TaxonPath, new_name: &str) -> Result<u64, ModelError> {
        self.apply(Op::RenameTaxon {
            path: path.clone(),
            new_name: new_name.to_owned(),
        })
    }

    pub fn remove_taxon(&mut self, path: &TaxonPath) -> Result<u64, ModelError> {
        self.apply(Op::RemoveTaxon { path: path.clone() })
    }

    pub fn label_image(&mut self, uuid: &str, leaf: &TaxonPath) -> Result<u64, ModelError> {
        self.apply(Op::LabelImage {
            uuid: uuid.to_owned(),
            leaf: leaf.clone(),
        })
    }

    pub fn unlabel_image(&mut self, uuid: &str, leaf: &TaxonPath) -> Result<u64, ModelError> {
        self.apply(Op::UnlabelImage {
            uuid: uuid.to_owned(),
            leaf: leaf.clone(),
        })
    }

    pub fn set_unsure(&mut self, uuid: &str, unsure: bool) -> Result<u64, ModelError> {
        self.apply(Op::SetUnsure {
            uuid: uuid.to_owned(),
            unsure,
        })
    }

    pub fn set_note(&mut self, path: &TaxonPath, note: Option<String>) -> Result<u64, ModelError> {
        self.apply(Op::SetNote { path: path.clone(), note })
    }

    pub fn add_memo(&mut self, text: &str) -> Result<u64, ModelError> {
        self.apply(Op::AddMemo { text: text.to_owned() })
    }

    /// Matching uuids in load order. A `Keyword` filter needs the catalog for display names.
    pub fn query_images(&self, filter: &ImageFilter, catalog: &Catalog) -> Vec<String> {
        let labels = &self.state.labels;
        match filter {
            ImageFilter::Taxon(taxon) => labels
                .values()
                .filter(|a| a.paths.iter().any(|p| taxon.is_prefix_of(p)))
                .map(|a| a.uuid.clone())
                .collect(),
            ImageFilter::Keyword(keyword) => {
                let needle = keyword.to_lowercase();
                labels
                    .keys()
                    .filter(|u| {
                        catalog
                            .get(u)
                            .and_then(|r| r.display_name.as_deref())
                            .is_some_and(|name| name.to_lowercase().contains(&needle))
                    })
                    .cloned()
                    .collect()
            }
            ImageFilter::Uuid(uuid) => labels.keys().filter(|u| *u == uuid).cloned().collect(),
        }
    }

    /// Checks every structural invariant of the session.
    pub fn validate(&self) -> Result<(), String> {
        self.state.validate()?;
        for (i, e) in self.log.iter().enumerate() {
            if e.version != i as u64 + 1 {
                return Err(format!("log entry {i} has version {}", e.version));
            }
        }
        Ok(())
    }
}

impl SessionState {
    /// Images whose path set contains exactly `path`.
    pub fn holders(&self, path: &TaxonPath) -> BTreeSet<String> {
        self.labels
            .values()
            .filter(|a| a.paths.contains(path))
            .map(|a| a.uuid.clone())
            .collect()
    }

    fn holds_under(&self, path: &TaxonPath) -> bool {
        self.labels.values().any(|a| a.paths.iter().any(|p| path.is_prefix_of(p)))
    }

    pub fn validate(&self) -> Result<(), String> {
        if let Some(e) = self.tree.structural_error() {
            return Err(e);
        }
        for (uuid, a) in &self.labels {
            if uuid != &a.uuid {
                return Err(format!("label key {uuid} does not match record {}", a.uuid));
            }
            if a.paths.is_empty() {
                return Err(format!("image {uuid} has no label"));
            }
            if let Some(p) = a.paths.iter().find(|p| !self.tree.is_leaf(p)) {
                return Err(format!("image {uuid} is labeled {p}, which is not a leaf"));
            }
        }
        Ok(())
    }

    /// Rewrites every label path through `f`; `None` drops the path.
    /// Images left without any path are parked.
    fn rewrite_labels(&mut self, mut f: impl FnMut(&TaxonPath) -> Option<TaxonPath>) {
        let mut orphans = Vec::new();
        for a in self.labels.values_mut() {
            let paths: BTreeSet<TaxonPath> = a.paths.iter().filter_map(&mut f).collect();
            if paths.is_empty() {
                orphans.push(a.uuid.clone());
            }
            a.paths = paths;
        }
        if !orphans.is_empty() {
            let park = self.parking_leaf();
            for u in orphans {
                self.labels[&u].paths.insert(park.clone());
            }
        }
    }

    /// The leaf receiving unassigned images: root-level `ungrouped`, following
    /// `ungrouped/ungrouped/...` while that node has children. Created if missing.
    fn parking_leaf(&mut self) -> TaxonPath {
        let mut path = TaxonPath::root();
        loop {
            let node = self.tree.get_mut(&path).expect("parking chain exists");
            path = path.child(UNGROUPED);
            match node.children.iter().find(|c| c.name == UNGROUPED) {
                Some(c) if !c.is_leaf() => continue,
                Some(_) => return path,
                None => {
                    node.children.push(TaxonNode::new(UNGROUPED));
                    return path;
                }
            }
        }
    }

    fn existing(&self, path: &TaxonPath) -> Result<&TaxonNode, ModelError> {
        self.tree.get(path).ok_or_else(|| ModelError::NoSuchTaxon(path.clone()))
    }

    fn existing_taxon(&self, path: &TaxonPath) -> Result<&TaxonNode, ModelError> {
        if path.is_root() {
            return Err(ModelError::RootNotAllowed);
        }
        self.existing(path)
    }

    fn check_name(name: &str) -> Result<(), ModelError> {
        if validate_name(name) {
            Ok(())
        } else {
            Err(ModelError::InvalidName(name.to_owned()))
        }
    }

    fn loaded(&self, uuid: &str) -> Result<(), ModelError> {
        if self.labels.contains_key(uuid) {
            Ok(())
        } else {
            Err(ModelError::NoSuchImage(uuid.to_owned()))
        }
    }

    /// Appends `child` under `parent`. When `parent` was a leaf, its images move to a new
    /// `ungrouped` sibling (or into `child` itself when that is the `ungrouped` node) so
    /// labels stay on leaves. Preconditions are checked by the caller.
    fn attach(&mut self, parent: &TaxonPath, child: TaxonNode) {
        let child_name = child.name.clone();
        let node = self.tree.get_mut(parent).expect("parent checked");
        let was_leaf = node.children.is_empty();
        node.children.push(child);
        if !was_leaf || parent.is_root() && child_name == UNGROUPED {
            return;
        }
        if child_name != UNGROUPED {
            node.children.push(TaxonNode::new(UNGROUPED));
        }
        if !parent.is_root() {
            let target = parent.child(UNGROUPED);
            self.rewrite_labels(|p| Some(if p == parent { target.clone() } else { p.clone() }));
        }
    }

    pub(crate) fn apply(&mut self, op: &Op) -> Result<(), ModelError> {
        match op {
            Op::LoadBatch { uuids } => self.load_batch(uuids),
            Op::CreateTaxon { parent, name } => self.create_taxon(parent, name),
            Op::ApplyPartition { path, parts, origin } => self.apply_partition(path, parts, *origin),
            Op::FlattenTaxon { path } => self.flatten_taxon(path),
            Op::MergeTaxa { source, target } => self.merge_taxa(source, target),
            Op::MoveTaxon { path, new_parent } => self.move_taxon(path, new_parent),
            Op::RenameTaxon { path, new_name } => self.rename_taxon(path, new_name),
            Op::RemoveTaxon { path } => self.remove_taxon(path),
            Op::LabelImage { uuid, leaf } => self.label_image(uuid, leaf),
            Op::UnlabelImage { uuid, leaf } => self.unlabel_image(uuid, leaf),
            Op::SetUnsure { uuid, unsure } => {
                self.loaded(uuid)?;
                self.labels[uuid].unsure = *unsure;
                Ok(())
            }
            Op::SetNote { path, note } => {
                self.existing(path)?;
                self.tree.get_mut(path).expect("checked").note = note.clone();
                Ok(())
            }
            Op::AddMemo { text } => {
                self.memos.push(text.clone());
                Ok(())
            }
        }
    }

    fn load_batch(&mut self, uuids: &[String]) -> Result<(), ModelError> {
        let mut seen = HashSet::new();
        for u in uuids {
            if self.labels.contains_key(u) || !seen.insert(u.as_str()) {
                return Err(ModelError::DuplicateImage(u.clone()));
            }
        }
        let park = self.parking_leaf();
        for u in uuids {
            self.labels.insert(
                u.clone(),
                LabelAssignment {
                    uuid: u.clone(),
                    paths: BTreeSet::from([park.clone()]),
                    unsure: false,
                },
            );
        }
        Ok(())
    }

    fn create_taxon(&mut self, parent: &TaxonPath, name: &str) -> Result<(), ModelError> {
        Self::check_name(name)?;
        if self.existing(parent)?.child(name).is_some() {
            return Err(ModelError::DuplicateSibling {
                parent: parent.clone(),
                name: name.to_owned(),
            });
        }
        self.attach(parent, TaxonNode::new(name));
        Ok(())
    }

    fn apply_partition(&mut self, path: &TaxonPath, parts: &[PartSpec], origin: Origin) -> Result<(), ModelError> {
        if !self.existing_taxon(path)?.is_leaf() {
            return Err(ModelError::NotALeaf(path.clone()));
        }
        if parts.is_empty() {
            return Err(ModelError::InvalidPartition("no parts given".into()));
        }
        let mut names = HashSet::new();
        let mut covered = BTreeSet::new();
        for part in parts {
            Self::check_name(&part.name)?;
            if !names.insert(part.name.as_str()) {
                return Err(ModelError::InvalidPartition(format!("part name {:?} repeated", part.name)));
            }
            for m in &part.members {
                if !covered.insert(m.clone()) {
                    return Err(ModelError::InvalidPartition(format!("image {m} is in more than one part")));
                }
            }
        }
        let holders = self.holders(path);
        if covered != holders {
            let missing: Vec<_> = holders.difference(&covered).cloned().collect();
            let extra: Vec<_> = covered.difference(&holders).cloned().collect();
            return Err(ModelError::InvalidPartition(format!(
                "parts must cover exactly the images at {path}; missing {missing:?}, not held {extra:?}"
            )));
        }

        let node = self.tree.get_mut(path).expect("checked");
        node.children = parts
            .iter()
            .map(|p| TaxonNode::with_origin(p.name.clone(), origin))
            .collect();
        for part in parts {
            let target = path.child(part.name.clone());
            for m in &part.members {
                let paths = &mut self.labels[m].paths;
                paths.remove(path);
                paths.insert(target.clone());
            }
        }
        Ok(())
    }

    fn flatten_taxon(&mut self, path: &TaxonPath) -> Result<(), ModelError> {
        if self.existing_taxon(path)?.is_leaf() {
            return Err(ModelError::NothingToFlatten(path.clone()));
        }
        self.tree.get_mut(path).expect("checked").children.clear();
        self.rewrite_labels(|p| Some(if path.is_prefix_of(p) { path.clone() } else { p.clone() }));
        Ok(())
    }

    fn merge_taxa(&mut self, source: &TaxonPath, target: &TaxonPath) -> Result<(), ModelError> {
        let s = self.existing_taxon(source)?;
        let t = self.existing_taxon(target)?;
        if source == target {
            return Err(ModelError::SelfMerge(source.clone()));
        }
        if !s.is_leaf() {
            return Err(ModelError::NonLeafMerge(source.clone()));
        }
        if !t.is_leaf() {
            return Err(ModelError::NonLeafMerge(target.clone()));
        }
        self.tree.detach(source);
        self.rewrite_labels(|p| Some(if p == source { target.clone() } else { p.clone() }));
        Ok(())
    }

    fn move_taxon(&mut self, path: &TaxonPath, new_parent: &TaxonPath) -> Result<(), ModelError> {
        let moved = self.existing_taxon(path)?;
        let moved_is_leaf = moved.is_leaf();
        let target = self.existing(new_parent)?;
        if path.is_prefix_of(new_parent) {
            return Err(ModelError::CyclicMove {
                path: path.clone(),
                new_parent: new_parent.clone(),
            });
        }
        let name = path.name().expect("non-root").to_owned();
        let same_parent = path.parent().as_ref() == Some(new_parent);
        if !same_parent {
            if target.child(&name).is_some() {
                return Err(ModelError::DuplicateSibling {
                    parent: new_parent.clone(),
                    name,
                });
            }
            let receives_images = target.is_leaf() && !new_parent.is_root() && !self.holders(new_parent).is_empty();
            if receives_images && name == UNGROUPED && !moved_is_leaf {
                return Err(ModelError::ParentHoldsImages {
                    path: path.clone(),
                    new_parent: new_parent.clone(),
                });
            }
        }

        let node = self.tree.detach(path).expect("checked");
        let dest = new_parent.child(name);
        self.rewrite_labels(|p| Some(p.rebase(path, &dest).unwrap_or_else(|| p.clone())));
        if same_parent {
            self.tree.get_mut(new_parent).expect("checked").children.push(node);
        } else {
            self.attach(new_parent, node);
        }
        Ok(())
    }

    fn rename_taxon(&mut self, path: &TaxonPath, new_name: &str) -> Result<(), ModelError> {
        self.existing_taxon(path)?;
        Self::check_name(new_name)?;
        let parent = path.parent().expect("non-root");
        if path.name() != Some(new_name) && self.existing(&parent)?.child(new_name).is_some() {
            return Err(ModelError::DuplicateSibling {
                parent,
                name: new_name.to_owned(),
            });
        }
        self.tree.get_mut(path).expect("checked").name = new_name.to_owned();
        let renamed = parent.child(new_name);
        self.rewrite_labels(|p| Some(p.rebase(path, &renamed).unwrap_or_else(|| p.clone())));
        Ok(())
    }

    fn remove_taxon(&mut self, path: &TaxonPath) -> Result<(), ModelError> {
        if path.is_root() {
            return Err(ModelError::CannotRemoveRoot);
        }
        self.existing(path)?;
        if path.is_parking() && self.holds_under(path) {
            return Err(ModelError::UngroupedNotEmpty(path.clone()));
        }
        self.tree.detach(path);
        self.rewrite_labels(|p| if path.is_prefix_of(p) { None } else { Some(p.clone()) });
        Ok(())
    }

    fn label_image(&mut self, uuid: &str, leaf: &TaxonPath) -> Result<(), ModelError> {
        self.loaded(uuid)?;
        if !self.existing_taxon(leaf)?.is_leaf() {
            return Err(ModelError::NonLeafLabel(leaf.clone()));
        }
        let paths = &mut self.labels[uuid].paths;
        if paths.len() == 1 && paths.iter().all(|p| p.is_parking() && p != leaf) {
            paths.clear();
        }
        paths.insert(leaf.clone());
        Ok(())
    }

    fn unlabel_image(&mut self, uuid: &str, leaf: &TaxonPath) -> Result<(), ModelError> {
        self.loaded(uuid)?;
        if !self.labels[uuid].paths.contains(leaf) {
            return Err(ModelError::NoSuchAssignment {
                uuid: uuid.to_owned(),
                path: leaf.clone(),
            });
        }
        self.labels[uuid].paths.remove(leaf);
        if self.labels[uuid].paths.is_empty() {
            let park = self.parking_leaf();
            self.labels[uuid].paths.insert(park);
        }
        Ok(())
    }
}
