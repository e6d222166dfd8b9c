use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::path::TaxonPath;
use super::tree::Origin;

/// One named group of images handed to [`Op::ApplyPartition`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartSpec {
    pub name: String,
    pub members: BTreeSet<String>,
}

/// The closed set of session mutations. Every accepted op is appended to the log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Op {
    LoadBatch {
        uuids: Vec<String>,
    },
    CreateTaxon {
        parent: TaxonPath,
        name: String,
    },
    ApplyPartition {
        path: TaxonPath,
        parts: Vec<PartSpec>,
        #[serde(default)]
        origin: Origin,
    },
    FlattenTaxon {
        path: TaxonPath,
    },
    MergeTaxa {
        source: TaxonPath,
        target: TaxonPath,
    },
    MoveTaxon {
        path: TaxonPath,
        new_parent: TaxonPath,
    },
    RenameTaxon {
        path: TaxonPath,
        new_name: String,
    },
    RemoveTaxon {
        path: TaxonPath,
    },
    LabelImage {
        uuid: String,
        leaf: TaxonPath,
    },
    UnlabelImage {
        uuid: String,
        leaf: TaxonPath,
    },
    SetUnsure {
        uuid: String,
        unsure: bool,
    },
    SetNote {
        path: TaxonPath,
        note: Option<String>,
    },
    AddMemo {
        text: String,
    },
}

impl Op {
    pub fn kind(&self) -> &'static str {
        match self {
            Op::LoadBatch { .. } => "load_batch",
            Op::CreateTaxon { .. } => "create_taxon",
            Op::ApplyPartition { .. } => "apply_partition",
            Op::FlattenTaxon { .. } => "flatten_taxon",
            Op::MergeTaxa { .. } => "merge_taxa",
            Op::MoveTaxon { .. } => "move_taxon",
            Op::RenameTaxon { .. } => "rename_taxon",
            Op::RemoveTaxon { .. } => "remove_taxon",
            Op::LabelImage { .. } => "label_image",
            Op::UnlabelImage { .. } => "unlabel_image",
            Op::SetUnsure { .. } => "set_unsure",
            Op::SetNote { .. } => "set_note",
            Op::AddMemo { .. } => "add_memo",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub version: u64,
    #[serde(flatten)]
    pub op: Op,
}
