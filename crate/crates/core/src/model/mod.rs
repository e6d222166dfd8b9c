//! Taxonomy trees, per-coder sessions and the editing operators.

mod error;
mod image;
mod ops;
mod path;
mod session;
mod tree;

pub use error::ModelError;
pub use image::{Catalog, ImageLocation, ImageRecord};
pub use ops::{LogEntry, Op, PartSpec};
pub use path::{validate_name, TaxonPath, UNGROUPED};
pub use session::{CoderSession, ImageFilter, LabelAssignment, SessionState};
pub use tree::{Origin, TaxonNode, TaxonomyTree, ROOT_NAME};

/// Per-image path sets keyed by uuid, in image order.
pub type Labeling = indexmap::IndexMap<String, std::collections::BTreeSet<TaxonPath>>;
