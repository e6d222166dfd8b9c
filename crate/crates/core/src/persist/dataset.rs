use std::collections::HashSet;

use serde_json::Value;

use super::PersistError;
use crate::model::ImageRecord;

const NAME_KEYS: [&str; 2] = ["displayName", "display_name"];
const DATE_KEYS: [&str; 5] = ["publishDate", "publish_date", "publishYear", "publish_year", "year"];

/// Year from the leading four digits of a date-like value.
pub fn parse_year(value: &Value) -> Option<i32> {
    match value {
        Value::Number(n) => n.as_i64().and_then(|y| i32::try_from(y).ok()),
        Value::String(s) => {
            let head = s.trim().get(..4)?;
            head.bytes().all(|b| b.is_ascii_digit()).then(|| head.parse().ok())?
        }
        _ => None,
    }
}

/// Parses a dataset metadata file: a JSON array of objects, each with a string `uuid`.
///
/// All other fields are kept in `source_fields`.
pub fn load_dataset(bytes: &[u8]) -> Result<Vec<ImageRecord>, PersistError> {
    let value: Value = serde_json::from_slice(bytes).map_err(PersistError::format)?;
    let Value::Array(items) = value else {
        return Err(PersistError::format("dataset must be a JSON array of records"));
    };
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(items.len());
    for (i, item) in items.into_iter().enumerate() {
        let Value::Object(mut fields) = item else {
            return Err(PersistError::format(format!("record {i} is not an object")));
        };
        let uuid = match fields.shift_remove("uuid") {
            Some(Value::String(u)) if !u.is_empty() => u,
            _ => return Err(PersistError::format(format!("record {i} has no string uuid"))),
        };
        if !seen.insert(uuid.clone()) {
            return Err(PersistError::DuplicateImage(uuid));
        }
        let display_name = NAME_KEYS
            .iter()
            .find_map(|k| fields.get(*k).and_then(Value::as_str))
            .map(str::to_owned);
        let publish_year = DATE_KEYS.iter().find_map(|k| fields.get(*k).and_then(parse_year));
        out.push(ImageRecord {
            uuid,
            display_name,
            publish_year,
            source_fields: fields.into_iter().collect(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn keeps_extra_fields() {
        let doc = br#"[{"uuid":"a","x":1},{"uuid":"b","y":[2]},{"uuid":"c"}]"#;
        let recs = load_dataset(doc).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[0].source_fields["x"], json!(1));
        assert_eq!(recs[1].source_fields["y"], json!([2]));
        assert!(recs[2].source_fields.is_empty());
    }

    #[test]
    fn oldvis_shaped_record() {
        let doc = br#"[{"uuid":"8a1c","displayName":"Map of Europe","publishDate":"1849-03","viewUrl":"https://example.org/v/8a1c"}]"#;
        let r = &load_dataset(doc).unwrap()[0];
        assert_eq!(r.display_name.as_deref(), Some("Map of Europe"));
        assert_eq!(r.publish_year, Some(1849));
        assert!(r.location().is_some());
    }

    #[test]
    fn year_parsing() {
        assert_eq!(parse_year(&json!("1786")), Some(1786));
        assert_eq!(parse_year(&json!("17th century")), None);
        assert_eq!(parse_year(&json!("186")), None);
        assert_eq!(parse_year(&json!(1900)), Some(1900));
        assert_eq!(parse_year(&json!(null)), None);
    }

    #[test]
    fn errors() {
        assert!(matches!(load_dataset(br#"[{"name":"x"}]"#), Err(PersistError::Format(_))));
        assert!(matches!(load_dataset(br#"{"uuid":"x"}"#), Err(PersistError::Format(_))));
        assert!(matches!(
            load_dataset(br#"[{"uuid":"x"},{"uuid":"x"}]"#),
            Err(PersistError::DuplicateImage(u)) if u == "x"
        ));
    }
}
