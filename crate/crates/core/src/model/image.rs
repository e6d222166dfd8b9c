use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// One image of the corpus, as described by dataset metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub uuid: String,
    pub display_name: Option<String>,
    pub publish_year: Option<i32>,
    /// Every metadata field except `uuid`, passed through untouched.
    pub source_fields: IndexMap<String, Value>,
}

const LOCAL_KEYS: [&str; 3] = ["path", "localPath", "file"];
const REMOTE_KEYS: [&str; 4] = ["imageUrl", "url", "downloadUrl", "viewUrl"];

/// Where the bytes of an image live.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ImageLocation {
    Local(String),
    Remote(String),
}

impl ImageRecord {
    pub fn new(uuid: impl Into<String>) -> Self {
        Self {
            uuid: uuid.into(),
            display_name: None,
            publish_year: None,
            source_fields: IndexMap::new(),
        }
    }

    pub fn location(&self) -> Option<ImageLocation> {
        let field = |keys: &[&str]| {
            keys.iter()
                .find_map(|k| self.source_fields.get(*k).and_then(Value::as_str))
                .map(str::to_owned)
        };
        field(&LOCAL_KEYS)
            .map(ImageLocation::Local)
            .or_else(|| field(&REMOTE_KEYS).map(ImageLocation::Remote))
    }
}

/// Corpus metadata indexed by uuid, in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Catalog {
    records: IndexMap<String, ImageRecord>,
}

impl Catalog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a record, returning it back if the uuid is already present.
    pub fn insert(&mut self, record: ImageRecord) -> Result<(), ImageRecord> {
        if self.records.contains_key(&record.uuid) {
            return Err(record);
        }
        self.records.insert(record.uuid.clone(), record);
        Ok(())
    }

    pub fn get(&self, uuid: &str) -> Option<&ImageRecord> {
        self.records.get(uuid)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ImageRecord> {
        self.records.values()
    }

    pub fn uuids(&self) -> impl Iterator<Item = &str> {
        self.records.keys().map(String::as_str)
    }
}

impl FromIterator<ImageRecord> for Catalog {
    /// Later duplicates are dropped.
    fn from_iter<T: IntoIterator<Item = ImageRecord>>(iter: T) -> Self {
        let mut catalog = Catalog::new();
        for r in iter {
            let _ = catalog.insert(r);
        }
        catalog
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn local_path_wins_over_url() {
        let mut r = ImageRecord::new("u1");
        r.source_fields.insert("viewUrl".into(), json!("https://example.org/u1"));
        assert_eq!(r.location(), Some(ImageLocation::Remote("https://example.org/u1".into())));
        r.source_fields.insert("path".into(), json!("img/u1.png"));
        assert_eq!(r.location(), Some(ImageLocation::Local("img/u1.png".into())));
    }

    #[test]
    fn catalog_rejects_duplicates() {
        let mut c = Catalog::new();
        c.insert(ImageRecord::new("a")).unwrap();
        assert!(c.insert(ImageRecord::new("a")).is_err());
        assert_eq!(c.len(), 1);
    }
}
