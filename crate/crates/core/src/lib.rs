//! Engine for collaborative image-taxonomy development.
//!
//! Coders each build a [`model::CoderSession`]: a taxonomy tree plus per-image
//! leaf labels, edited through a closed set of logged operators. Sessions are
//! compared and merged by path identity in [`compare`], machine assistance
//! (embeddings, k-means, caption cleanup) lives in [`assist`], label
//! prediction and its evaluation in [`predict`], and file formats in
//! [`persist`].

pub mod exec;
pub mod model;

pub use exec::Exec;
pub mod assist;
pub mod compare;
pub mod persist;
pub mod predict;
pub mod score;

pub use score::Score;
