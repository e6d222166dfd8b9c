use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{load_session, to_canonical_json, PersistError, SESSION_FORMAT};
use crate::compare::{AnnotatedMergedTree, MajorityMerge};
use crate::model::{Labeling, TaxonNode, TaxonPath, TaxonomyTree};

pub const LABELING_FORMAT: &str = "taxa-labeling/1";
pub const MERGE_FORMAT: &str = "taxa-merge/1";
pub const UNION_FORMAT: &str = "taxa-union/1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelRow {
    uuid: String,
    paths: BTreeSet<TaxonPath>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelingDoc {
    format: String,
    labels: Vec<LabelRow>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MergeDoc {
    format: String,
    strategy: String,
    tree: TaxonNode,
    labels: Vec<LabelRow>,
}

#[derive(Serialize)]
struct UnionDoc<'a> {
    format: &'static str,
    strategy: &'static str,
    #[serde(flatten)]
    merged: &'a AnnotatedMergedTree,
}

fn rows(labels: &Labeling) -> Vec<LabelRow> {
    labels
        .iter()
        .map(|(u, p)| LabelRow {
            uuid: u.clone(),
            paths: p.clone(),
        })
        .collect()
}

fn from_rows(rows: Vec<LabelRow>) -> Result<Labeling, PersistError> {
    let mut out = Labeling::new();
    for r in rows {
        if out.contains_key(&r.uuid) {
            return Err(PersistError::DuplicateImage(r.uuid));
        }
        out.insert(r.uuid, r.paths);
    }
    Ok(out)
}

/// A bare labeling: per image, its set of label paths.
pub fn encode_labeling(labels: &Labeling) -> String {
    to_canonical_json(&LabelingDoc {
        format: LABELING_FORMAT.to_owned(),
        labels: rows(labels),
    })
}

pub fn encode_majority(merge: &MajorityMerge) -> String {
    to_canonical_json(&MergeDoc {
        format: MERGE_FORMAT.to_owned(),
        strategy: "majority".to_owned(),
        tree: merge.tree.root().clone(),
        labels: rows(&merge.labels),
    })
}

pub fn encode_union(merged: &AnnotatedMergedTree) -> String {
    to_canonical_json(&UnionDoc {
        format: UNION_FORMAT,
        strategy: "union",
        merged,
    })
}

/// Reads the labels out of a session, labeling, or majority-merge document.
///
/// Label sets in session documents are returned as stored, so an image in a
/// parking node carries that path.
pub fn read_labeling(bytes: &[u8]) -> Result<Labeling, PersistError> {
    let value: Value = serde_json::from_slice(bytes).map_err(PersistError::format)?;
    let format = value.get("format").and_then(Value::as_str).unwrap_or_default().to_owned();
    match format.as_str() {
        SESSION_FORMAT => Ok(load_session(bytes)?.labeling()),
        LABELING_FORMAT => {
            let doc: LabelingDoc = serde_json::from_value(value).map_err(PersistError::format)?;
            from_rows(doc.labels)
        }
        MERGE_FORMAT => {
            let doc: MergeDoc = serde_json::from_value(value).map_err(PersistError::format)?;
            let tree = TaxonomyTree::from_root(doc.tree);
            if let Some(e) = tree.structural_error() {
                return Err(PersistError::format(e));
            }
            from_rows(doc.labels)
        }
        "" => Err(PersistError::format("missing format tag")),
        other => Err(PersistError::format(format!("no labels in a {other:?} document"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compare::{majority_merge, union_merge};
    use crate::model::CoderSession;
    use crate::persist::save_session;

    fn coder(id: &str, leaf: &str) -> CoderSession {
        let mut s = CoderSession::new(id).unwrap();
        s.load_batch(["a", "b"]).unwrap();
        s.create_taxon(&TaxonPath::root(), leaf).unwrap();
        s.label_image("a", &TaxonPath::new([leaf])).unwrap();
        s
    }

    #[test]
    fn labeling_round_trip() {
        let mut l = Labeling::new();
        l.insert("z".into(), BTreeSet::from([TaxonPath::new(["map", "city"])]));
        l.insert("a".into(), BTreeSet::new());
        let text = encode_labeling(&l);
        assert_eq!(read_labeling(text.as_bytes()).unwrap(), l);
    }

    #[test]
    fn reads_sessions_and_merges() {
        let sessions = [coder("C1", "map"), coder("C2", "map"), coder("C3", "chart")];
        let s_text = save_session(&sessions[0]);
        assert_eq!(read_labeling(s_text.as_bytes()).unwrap(), sessions[0].labeling());

        let m = majority_merge(&sessions).unwrap();
        let m_text = encode_majority(&m);
        assert_eq!(read_labeling(m_text.as_bytes()).unwrap(), m.labels);

        let u = union_merge(&sessions).unwrap();
        let u_text = encode_union(&u);
        assert!(u_text.contains("\"format\": \"taxa-union/1\""));
        assert!(matches!(read_labeling(u_text.as_bytes()), Err(PersistError::Format(_))));
    }

    #[test]
    fn duplicate_rows_are_rejected() {
        let doc = r#"{"format":"taxa-labeling/1","labels":[{"uuid":"a","paths":[]},{"uuid":"a","paths":[]}]}"#;
        assert!(matches!(read_labeling(doc.as_bytes()), Err(PersistError::DuplicateImage(_))));
    }
}
