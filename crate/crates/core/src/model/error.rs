use thiserror::Error;

use super::path::TaxonPath;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("coder id must not be empty")]
    EmptyCoderId,
    #[error("image {0} is already loaded")]
    DuplicateImage(String),
    #[error("no image {0} in this session")]
    NoSuchImage(String),
    #[error("no taxon {0}")]
    NoSuchTaxon(TaxonPath),
    #[error("{parent} already has a child named {name:?}")]
    DuplicateSibling { parent: TaxonPath, name: String },
    #[error("invalid taxon name {0:?}: names must be non-empty and must not contain '/'")]
    InvalidName(String),
    #[error("operation is not defined on the root")]
    RootNotAllowed,
    #[error("{0} is not a leaf")]
    NotALeaf(TaxonPath),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("{0} has no children to flatten")]
    NothingToFlatten(TaxonPath),
    #[error("merge operand {0} is not a leaf")]
    NonLeafMerge(TaxonPath),
    #[error("cannot merge {0} into itself")]
    SelfMerge(TaxonPath),
    #[error("cannot move {path} under {new_parent}: it is the node or one of its descendants")]
    CyclicMove { path: TaxonPath, new_parent: TaxonPath },
    #[error("cannot move {path} under {new_parent}: the target holds images and the moved node is an internal ungrouped taxon")]
    ParentHoldsImages { path: TaxonPath, new_parent: TaxonPath },
    #[error("the root cannot be removed")]
    CannotRemoveRoot,
    #[error("{0} still holds images and cannot be removed")]
    UngroupedNotEmpty(TaxonPath),
    #[error("images can only be labeled on leaves; {0} has children")]
    NonLeafLabel(TaxonPath),
    #[error("image {uuid} is not labeled {path}")]
    NoSuchAssignment { uuid: String, path: TaxonPath },
    #[error("corrupt operation log: {0}")]
    CorruptLog(String),
}

impl ModelError {
    /// Stable machine-readable identifier.
    pub fn code(&self) -> &'static str {
        match self {
            Self::EmptyCoderId => "EmptyCoderId",
            Self::DuplicateImage(_) => "DuplicateImage",
            Self::NoSuchImage(_) => "NoSuchImage",
            Self::NoSuchTaxon(_) => "NoSuchTaxon",
            Self::DuplicateSibling { .. } => "DuplicateSibling",
            Self::InvalidName(_) => "InvalidName",
            Self::RootNotAllowed => "RootNotAllowed",
            Self::NotALeaf(_) => "NotALeaf",
            Self::InvalidPartition(_) => "InvalidPartition",
            Self::NothingToFlatten(_) => "NothingToFlatten",
            Self::NonLeafMerge(_) => "NonLeafMerge",
            Self::SelfMerge(_) => "SelfMerge",
            Self::CyclicMove { .. } => "CyclicMove",
            Self::ParentHoldsImages { .. } => "ParentHoldsImages",
            Self::CannotRemoveRoot => "CannotRemoveRoot",
            Self::UngroupedNotEmpty(_) => "UngroupedNotEmpty",
            Self::NonLeafLabel(_) => "NonLeafLabel",
            Self::NoSuchAssignment { .. } => "NoSuchAssignment",
            Self::CorruptLog(_) => "CorruptLog",
        }
    }

    /// The taxon path the error is about, when there is one.
    pub fn path(&self) -> Option<&TaxonPath> {
        match self {
            Self::NoSuchTaxon(p)
            | Self::NotALeaf(p)
            | Self::NothingToFlatten(p)
            | Self::NonLeafMerge(p)
            | Self::SelfMerge(p)
            | Self::UngroupedNotEmpty(p)
            | Self::NonLeafLabel(p) => Some(p),
            Self::CyclicMove { path, .. }
            | Self::ParentHoldsImages { path, .. }
            | Self::NoSuchAssignment { path, .. } => Some(path),
            Self::DuplicateSibling { parent, .. } => Some(parent),
            _ => None,
        }
    }
}
