use std::collections::{BTreeMap, HashSet};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::PersistError;
use crate::assist::{AssistError, CaptionTable, EmbeddingTable};
use crate::model::TaxonPath;
use crate::predict::ProbabilityRow;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbeddingLine {
    uuid: String,
    vector: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaptionLine {
    uuid: String,
    caption: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProbabilityLine {
    uuid: String,
    probs: BTreeMap<String, f64>,
}

/// Non-blank lines parsed as `T`, with 1-based line numbers.
fn lines<T: DeserializeOwned>(bytes: &[u8]) -> Result<Vec<(usize, T)>, PersistError> {
    let text = std::str::from_utf8(bytes).map_err(PersistError::format)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map(|v| (i + 1, v))
                .map_err(|e| PersistError::format(format!("line {}: {e}", i + 1)))
        })
        .collect()
}

fn check_unique<'a>(seen: &mut HashSet<&'a str>, uuid: &'a str) -> Result<(), PersistError> {
    if seen.insert(uuid) {
        Ok(())
    } else {
        Err(PersistError::DuplicateImage(uuid.to_owned()))
    }
}

/// `{"uuid": .., "vector": [..]}` per line; every vector must share the first line's dimension.
pub fn load_embeddings(bytes: &[u8]) -> Result<EmbeddingTable, PersistError> {
    let rows: Vec<(usize, EmbeddingLine)> = lines(bytes)?;
    let dim = rows.first().map_or(1, |(_, r)| r.vector.len());
    let mut table = EmbeddingTable::new(dim).map_err(|_| PersistError::format("line 1: empty vector"))?;
    for (line, row) in rows {
        table.insert(row.uuid, row.vector).map_err(|e| match e {
            AssistError::DimMismatch { expected, got } => PersistError::DimMismatch { line, expected, got },
            AssistError::DuplicateImage(u) => PersistError::DuplicateImage(u),
            other => PersistError::format(format!("line {line}: {other}")),
        })?;
    }
    Ok(table)
}

/// `{"uuid": .., "caption": ..}` per line. Captions are stored verbatim.
pub fn load_captions(bytes: &[u8]) -> Result<CaptionTable, PersistError> {
    let rows: Vec<(usize, CaptionLine)> = lines(bytes)?;
    let mut seen = HashSet::new();
    for (_, r) in &rows {
        check_unique(&mut seen, &r.uuid)?;
    }
    Ok(rows.into_iter().map(|(_, r)| (r.uuid, r.caption)).collect())
}

/// `{"uuid": .., "probs": {"a/b": p, ..}}` per line, with every `p` in `[0, 1]`.
pub fn load_probabilities(bytes: &[u8]) -> Result<Vec<ProbabilityRow>, PersistError> {
    let rows: Vec<(usize, ProbabilityLine)> = lines(bytes)?;
    let mut seen = HashSet::new();
    for (line, r) in &rows {
        check_unique(&mut seen, &r.uuid)?;
        for (path, &p) in &r.probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(PersistError::format(format!(
                    "line {line}: probability {p} for {path:?} is outside [0, 1]"
                )));
            }
            if path.is_empty() || path.split('/').any(str::is_empty) {
                return Err(PersistError::format(format!("line {line}: bad leaf path {path:?}")));
            }
        }
    }
    Ok(rows
        .into_iter()
        .map(|(_, r)| ProbabilityRow {
            uuid: r.uuid,
            probs: r.probs.into_iter().map(|(k, v)| (TaxonPath::parse(&k), v)).collect(),
        })
        .collect())
}

fn jsonl<T: Serialize>(rows: impl Iterator<Item = T>) -> String {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(&r).expect("rows serialize"));
        out.push('\n');
    }
    out
}

pub fn encode_embeddings(table: &EmbeddingTable) -> String {
    jsonl(table.iter().map(|(u, v)| EmbeddingLine {
        uuid: u.to_owned(),
        vector: v.to_vec(),
    }))
}

pub fn encode_captions(table: &CaptionTable) -> String {
    jsonl(table.iter().map(|(u, c)| CaptionLine {
        uuid: u.clone(),
        caption: c.clone(),
    }))
}

pub fn encode_probabilities(rows: &[ProbabilityRow]) -> String {
    jsonl(rows.iter().map(|r| ProbabilityLine {
        uuid: r.uuid.clone(),
        probs: r.probs.iter().map(|(k, v)| (k.joined(), *v)).collect(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embeddings_check_dimensions() {
        let ok = b"{\"uuid\":\"a\",\"vector\":[1,2,3,4]}\n\n{\"uuid\":\"b\",\"vector\":[0.5,0,0,1]}\n";
        let t = load_embeddings(ok).unwrap();
        assert_eq!((t.dim(), t.len()), (4, 2));
        assert_eq!(load_embeddings(encode_embeddings(&t).as_bytes()).unwrap(), t);

        let bad = b"{\"uuid\":\"a\",\"vector\":[1,2,3,4]}\n{\"uuid\":\"b\",\"vector\":[1,2,3,4,5]}\n";
        assert!(matches!(
            load_embeddings(bad),
            Err(PersistError::DimMismatch { line: 2, expected: 4, got: 5 })
        ));
        let dup = b"{\"uuid\":\"a\",\"vector\":[1]}\n{\"uuid\":\"a\",\"vector\":[2]}\n";
        assert!(matches!(load_embeddings(dup), Err(PersistError::DuplicateImage(_))));
    }

    #[test]
    fn captions_keep_empty_strings() {
        let t = load_captions(b"{\"uuid\":\"a\",\"caption\":\"\"}\n{\"uuid\":\"b\",\"caption\":\"it is a map\"}\n").unwrap();
        assert_eq!(t["a"], "");
        assert_eq!(t["b"], "it is a map");
        assert!(matches!(
            load_captions(b"{\"uuid\":\"a\",\"caption\":\"x\"}\n{\"uuid\":\"a\",\"caption\":\"y\"}\n"),
            Err(PersistError::DuplicateImage(_))
        ));
    }

    #[test]
    fn probabilities_are_bounded() {
        let rows = load_probabilities(b"{\"uuid\":\"a\",\"probs\":{\"map/cartogram\":0.7,\"table\":0.3}}\n").unwrap();
        assert_eq!(rows[0].probs[&TaxonPath::new(["map", "cartogram"])], 0.7);
        assert_eq!(load_probabilities(encode_probabilities(&rows).as_bytes()).unwrap(), rows);
        assert!(matches!(
            load_probabilities(b"{\"uuid\":\"a\",\"probs\":{\"map\":1.2}}\n"),
            Err(PersistError::Format(_))
        ));
    }

    #[test]
    fn malformed_line_reports_position() {
        let err = load_captions(b"{\"uuid\":\"a\",\"caption\":\"x\"}\n{oops\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
