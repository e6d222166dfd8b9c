use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use taxa_core::assist::{CaptionTable, EmbeddingTable};
use taxa_core::model::{Catalog, CoderSession, ImageLocation};
use taxa_core::persist::{atomic_write, load_captions, load_dataset, load_embeddings, load_session, save_session};
use tokio::sync::{Mutex, RwLock};

use crate::error::ApiError;

#[derive(Debug, Clone, Default)]
pub struct ServerConfig {
    /// Session files live here as `<session_id>.json`.
    pub data_dir: PathBuf,
    pub dataset: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub captions: Option<PathBuf>,
    /// Allowed CORS origin for a separately hosted UI; `*` allows any.
    pub cors_origin: Option<String>,
    /// Built UI assets, served at `/`.
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum StartupError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Persist {
        path: PathBuf,
        source: taxa_core::persist::PersistError,
    },
    #[error("{path}: duplicate session id {id:?}")]
    DuplicateSession { path: PathBuf, id: String },
    #[error("{path}: duplicate image {uuid}")]
    DuplicateImage { path: PathBuf, uuid: String },
}

impl StartupError {
    /// Domain errors (bad files) as opposed to I/O failures.
    pub fn is_format(&self) -> bool {
        !matches!(self, Self::Io { .. })
    }
}

pub type SessionSlot = Arc<Mutex<CoderSession>>;

/// Shared server state. Each session has its own mutex, so mutations of one
/// session are serialized while different sessions proceed independently.
pub struct AppState {
    pub config: ServerConfig,
    pub catalog: Catalog,
    /// Directory relative local image paths are resolved against.
    pub image_root: PathBuf,
    pub embeddings: Option<EmbeddingTable>,
    pub captions: CaptionTable,
    pub sessions: RwLock<BTreeMap<String, SessionSlot>>,
}

fn read(path: &Path) -> Result<Vec<u8>, StartupError> {
    std::fs::read(path).map_err(|source| StartupError::Io {
        path: path.to_owned(),
        source,
    })
}

fn persist_err(path: &Path) -> impl FnOnce(taxa_core::persist::PersistError) -> StartupError + '_ {
    move |source| StartupError::Persist {
        path: path.to_owned(),
        source,
    }
}

impl AppState {
    /// Loads the corpus tables and every session file already in `data_dir`.
    pub fn load(config: ServerConfig) -> Result<Self, StartupError> {
        let io = |path: &Path| {
            let path = path.to_owned();
            move |source| StartupError::Io { path, source }
        };
        std::fs::create_dir_all(&config.data_dir).map_err(io(&config.data_dir))?;

        let mut catalog = Catalog::new();
        let mut image_root = PathBuf::from(".");
        if let Some(path) = &config.dataset {
            for rec in load_dataset(&read(path)?).map_err(persist_err(path))? {
                let uuid = rec.uuid.clone();
                catalog
                    .insert(rec)
                    .map_err(|_| StartupError::DuplicateImage { path: path.clone(), uuid })?;
            }
            image_root = path.parent().map(Path::to_owned).unwrap_or_default();
        }
        let embeddings = match &config.embeddings {
            Some(path) => Some(load_embeddings(&read(path)?).map_err(persist_err(path))?),
            None => None,
        };
        let captions = match &config.captions {
            Some(path) => load_captions(&read(path)?).map_err(persist_err(path))?,
            None => CaptionTable::new(),
        };

        let mut sessions = BTreeMap::new();
        let mut files: Vec<PathBuf> = std::fs::read_dir(&config.data_dir)
            .map_err(io(&config.data_dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        for path in files {
            let session = load_session(&read(&path)?).map_err(persist_err(&path))?;
            let id = session.session_id().to_owned();
            if sessions.insert(id.clone(), Arc::new(Mutex::new(session))).is_some() {
                return Err(StartupError::DuplicateSession { path, id });
            }
        }

        Ok(Self {
            config,
            catalog,
            image_root,
            embeddings,
            captions,
            sessions: RwLock::new(sessions),
        })
    }

    pub fn session_path(&self, id: &str) -> PathBuf {
        self.config.data_dir.join(format!("{id}.json"))
    }

    pub async fn slot(&self, id: &str) -> Result<SessionSlot, ApiError> {
        self.sessions
            .read()
            .await
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::no_such_session(id))
    }

    /// Consistent copy of a session.
    pub async fn snapshot(&self, id: &str) -> Result<CoderSession, ApiError> {
        Ok(self.slot(id).await?.lock().await.clone())
    }

    /// Writes the session file atomically.
    pub async fn persist(&self, session: &CoderSession) -> Result<(), ApiError> {
        let path = self.session_path(session.session_id());
        let text = save_session(session);
        tokio::task::spawn_blocking(move || atomic_write(&path, text.as_bytes()))
            .await
            .map_err(|e| ApiError::internal(e.to_string()))?
            .map_err(|e| ApiError::internal(format!("could not persist session: {e}")))
    }

    pub fn image_location(&self, uuid: &str) -> Option<ImageLocation> {
        let loc = self.catalog.get(uuid)?.location()?;
        Some(match loc {
            ImageLocation::Local(p) if Path::new(&p).is_relative() => {
                ImageLocation::Local(self.image_root.join(p).to_string_lossy().into_owned())
            }
            other => other,
        })
    }
}

/// Session ids double as file names.
pub fn valid_session_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}
