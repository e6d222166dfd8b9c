use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{to_canonical_json, PersistError};
use crate::model::{CoderSession, LabelAssignment, LogEntry, SessionState, TaxonNode, TaxonomyTree, ROOT_NAME};

pub const SESSION_FORMAT: &str = "taxa-session/1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateDoc {
    labels: Vec<LabelAssignment>,
    #[serde(default)]
    memos: Vec<String>,
    tree: TaxonNode,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SessionDoc {
    format: String,
    session_id: String,
    coder_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    base: Option<StateDoc>,
    labels: Vec<LabelAssignment>,
    #[serde(default)]
    memos: Vec<String>,
    tree: TaxonNode,
    #[serde(default)]
    log: Vec<LogEntry>,
}

impl StateDoc {
    fn from_state(s: &SessionState) -> Self {
        Self {
            labels: s.labels.values().cloned().collect(),
            memos: s.memos.clone(),
            tree: s.tree.root().clone(),
        }
    }

    fn into_state(self) -> Result<SessionState, PersistError> {
        if self.tree.name != ROOT_NAME {
            return Err(PersistError::format(format!("tree root must be named {ROOT_NAME:?}")));
        }
        let mut labels = IndexMap::new();
        for a in self.labels {
            if labels.contains_key(&a.uuid) {
                return Err(PersistError::DuplicateImage(a.uuid));
            }
            labels.insert(a.uuid.clone(), a);
        }
        let state = SessionState {
            tree: TaxonomyTree::from_root(self.tree),
            labels,
            memos: self.memos,
        };
        state.validate().map_err(PersistError::Format)?;
        Ok(state)
    }
}

/// Canonical encoding of a session.
pub fn save_session(session: &CoderSession) -> String {
    let state = StateDoc::from_state(session.state());
    to_canonical_json(&SessionDoc {
        format: SESSION_FORMAT.to_owned(),
        session_id: session.session_id().to_owned(),
        coder_id: session.coder_id().to_owned(),
        base: session.base().map(StateDoc::from_state),
        labels: state.labels,
        memos: state.memos,
        tree: state.tree,
        log: session.log().to_vec(),
    })
}

/// Decodes and validates a session document.
///
/// The stored state must be exactly what the log produces from the base (or
/// from the empty session). A document without a log whose state is not
/// empty is taken as an imported snapshot.
pub fn load_session(bytes: &[u8]) -> Result<CoderSession, PersistError> {
    let value: serde_json::Value = serde_json::from_slice(bytes).map_err(PersistError::format)?;
    match value.get("format").and_then(|f| f.as_str()) {
        Some(SESSION_FORMAT) => {}
        Some(other) => return Err(PersistError::format(format!("unsupported session format {other:?}"))),
        None => return Err(PersistError::format("missing format tag")),
    }
    let doc: SessionDoc = serde_json::from_value(value).map_err(PersistError::format)?;
    let state = StateDoc {
        labels: doc.labels,
        memos: doc.memos,
        tree: doc.tree,
    }
    .into_state()?;
    let base = doc.base.map(StateDoc::into_state).transpose()?;

    if base.is_none() && doc.log.is_empty() && state != SessionState::default() {
        return CoderSession::from_snapshot(&doc.session_id, &doc.coder_id, state).map_err(PersistError::format);
    }
    let session =
        CoderSession::replay(&doc.session_id, &doc.coder_id, base, &doc.log).map_err(PersistError::format)?;
    if session.state() != &state {
        return Err(PersistError::format("stored state differs from the state the log produces"));
    }
    Ok(session)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TaxonPath;

    fn sample() -> CoderSession {
        let mut s = CoderSession::with_id("s-1", "C1").unwrap();
        s.load_batch(["u1", "u2"]).unwrap();
        s.create_taxon(&TaxonPath::root(), "map").unwrap();
        s.label_image("u1", &TaxonPath::new(["map"])).unwrap();
        s.set_unsure("u2", true).unwrap();
        s.set_note(&TaxonPath::new(["map"]), Some("geo".into())).unwrap();
        s.add_memo("first pass").unwrap();
        s
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let s = sample();
        let text = save_session(&s);
        let back = load_session(text.as_bytes()).unwrap();
        assert_eq!(back, s);
        assert_eq!(save_session(&back), text);
    }

    #[test]
    fn empty_session_document() {
        let s = CoderSession::new("C2").unwrap();
        let text = save_session(&s);
        assert_eq!(
            text,
            "{\n  \"coder_id\": \"C2\",\n  \"format\": \"taxa-session/1\",\n  \"labels\": [],\n  \"log\": [],\n  \"memos\": [],\n  \"session_id\": \"C2\",\n  \"tree\": {\n    \"children\": [],\n    \"name\": \"root\",\n    \"origin\": \"manual\"\n  }\n}\n"
        );
        assert_eq!(load_session(text.as_bytes()).unwrap(), s);
    }

    #[test]
    fn truncated_or_foreign_documents_fail() {
        let text = save_session(&sample());
        let cut = &text.as_bytes()[..text.len() / 2];
        assert!(matches!(load_session(cut), Err(PersistError::Format(_))));
        let other = text.replace(SESSION_FORMAT, "taxa-session/99");
        assert!(matches!(load_session(other.as_bytes()), Err(PersistError::Format(_))));
    }

    #[test]
    fn tampered_state_is_rejected() {
        let text = save_session(&sample());
        let tampered = text.replacen("\"unsure\": true", "\"unsure\": false", 1);
        assert_ne!(tampered, text);
        assert!(matches!(load_session(tampered.as_bytes()), Err(PersistError::Format(_))));
    }

    #[test]
    fn logless_snapshot_becomes_base() {
        let s = sample();
        let mut doc: serde_json::Value = serde_json::from_str(&save_session(&s)).unwrap();
        doc["log"] = serde_json::json!([]);
        let imported = load_session(doc.to_string().as_bytes()).unwrap();
        assert_eq!(imported.state(), s.state());
        assert_eq!(imported.version(), 0);
        let mut edited = imported.clone();
        edited.label_image("u2", &TaxonPath::new(["map"])).unwrap();
        let text = save_session(&edited);
        assert_eq!(load_session(text.as_bytes()).unwrap(), edited);
    }

    #[test]
    fn labels_off_leaves_are_rejected() {
        let mut doc: serde_json::Value = serde_json::from_str(&save_session(&sample())).unwrap();
        doc["log"] = serde_json::json!([]);
        doc["labels"][0]["paths"] = serde_json::json!([["nowhere"]]);
        assert!(matches!(load_session(doc.to_string().as_bytes()), Err(PersistError::Format(_))));
    }
}
