//! Persistence of models (`models/<id>.dslm`) and sessions
//! (`sessions/<id>.json`) inside a workspace.

use std::io;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use thiserror::Error;

use crate::method::Session;
use crate::model::{apply, conform_model, ApplyError, BindError, ChangeSet, Model};
use crate::registry::EffectiveBlock;
use crate::syntax::{parse_model_bytes, serialize_model, ParseError};

pub const MODEL_EXTENSION: &str = "dslm";

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{} parse error(s) in {path}", .errors.len())]
    Parse { path: PathBuf, errors: Vec<ParseError> },
}

/// Writes the canonical text of `model` to `<dir>/<id>.dslm`, replacing any
/// previous file atomically.
pub fn save(model: &Model, dir: &Path) -> io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{}.{MODEL_EXTENSION}", model.id));
    write_atomic(&path, serialize_model(model).as_bytes())?;
    Ok(path)
}

pub fn load(path: &Path) -> Result<Model, LoadError> {
    let bytes = std::fs::read(path).map_err(|source| LoadError::Io { path: path.to_path_buf(), source })?;
    parse_model_bytes(&bytes).map_err(|errors| LoadError::Parse {
        path: path.to_path_buf(),
        errors: errors.into_iter().map(|e| e.with_file(path)).collect(),
    })
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

/// Model ids double as file names, so they are restricted to letters,
/// digits, `_` and `-`.
pub fn is_valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '-')
        && id.chars().next().is_some_and(|c| c.is_alphanumeric() || c == '_')
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("invalid model id '{0}'")]
    InvalidId(String),
    #[error("no model '{0}'")]
    NotFound(String),
    #[error("model '{0}' already exists")]
    Exists(String),
    #[error("version conflict: change is based on version {base}, model is at version {current}")]
    Conflict { base: u64, current: u64 },
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Apply(ApplyError),
    #[error(transparent)]
    Binding(#[from] BindError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl From<ApplyError> for StoreError {
    fn from(e: ApplyError) -> Self {
        match e {
            ApplyError::VersionConflict { base, current } => StoreError::Conflict { base, current },
            ApplyError::Binding(b) => StoreError::Binding(b),
            other => StoreError::Apply(other),
        }
    }
}

/// Model files of one workspace. Writes are serialized, so no reader sees a
/// partially applied change and two writers on the same base version cannot
/// both succeed.
#[derive(Debug)]
pub struct ModelStore {
    dir: PathBuf,
    write_lock: Mutex<()>,
}

impl ModelStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ModelStore { dir: dir.into(), write_lock: Mutex::new(()) }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.{MODEL_EXTENSION}"))
    }

    pub fn get(&self, id: &str) -> Result<Model, StoreError> {
        if !is_valid_id(id) {
            return Err(StoreError::InvalidId(id.to_string()));
        }
        let path = self.path_for(id);
        match load(&path) {
            Err(LoadError::Io { source, .. }) if source.kind() == io::ErrorKind::NotFound => {
                Err(StoreError::NotFound(id.to_string()))
            }
            other => Ok(other?),
        }
    }

    /// Model ids in name order.
    pub fn list(&self) -> Vec<String> {
        let Ok(entries) = std::fs::read_dir(&self.dir) else { return Vec::new() };
        let mut ids: Vec<String> = entries
            .filter_map(|e| e.ok()?.path().file_name()?.to_str().map(str::to_string))
            .filter_map(|f| f.strip_suffix(&format!(".{MODEL_EXTENSION}")).map(str::to_string))
            .filter(|id| is_valid_id(id))
            .collect();
        ids.sort();
        ids
    }

    fn write(&self, model: &Model) -> Result<(), StoreError> {
        save(model, &self.dir).map(|_| ()).map_err(|source| StoreError::Io { path: self.path_for(&model.id), source })
    }

    pub fn create(&self, model: &Model) -> Result<(), StoreError> {
        if !is_valid_id(&model.id) {
            return Err(StoreError::InvalidId(model.id.clone()));
        }
        let _guard = self.write_lock.lock().unwrap_or_else(|e| e.into_inner());
        if self.path_for(&model.id).exists() {
            return Err(StoreError::Exists(model.id.clone()));
        }
        self.write(model)
    }

    /// Replaces the whole model body; the stored version must equal `base`.
    pub fn replace(&self, id: &str, base: u64, body: &Model, block: &EffectiveBlock) -> Result<Model, StoreError> {
        let _guard = self.write_lock.lock().unwrap_or_else(|e| e.into_inner());
        let current = self.get(id)?;
        if current.version != base {
            return Err(StoreError::Conflict { base, current: current.version });
        }
        let mut next = Model { version: current.version + 1, ..Model::empty(id, &current.block_name) };
        for el in &body.elements {
            next.insert(el.clone());
        }
        let next = conform_model(&next, block)?;
        self.write(&next)?;
        Ok(next)
    }

    pub fn apply(&self, id: &str, block: &EffectiveBlock, change: &ChangeSet) -> Result<Model, StoreError> {
        let _guard = self.write_lock.lock().unwrap_or_else(|e| e.into_inner());
        let current = self.get(id)?;
        let next = apply(&current, block, change)?;
        self.write(&next)?;
        Ok(next)
    }
}

/// Session records of one workspace.
#[derive(Debug)]
pub struct SessionStore {
    dir: PathBuf,
    write_lock: Mutex<()>,
}

#[derive(Debug, Error)]
pub enum SessionStoreError {
    #[error("unknown session '{0}'")]
    NotFound(String),
    #[error("session file {path} is corrupt: {source}")]
    Corrupt {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl SessionStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        SessionStore { dir: dir.into(), write_lock: Mutex::new(()) }
    }

    fn path_for(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.json"))
    }

    pub fn get(&self, id: &str) -> Result<Session, SessionStoreError> {
        if !is_valid_id(id) {
            return Err(SessionStoreError::NotFound(id.to_string()));
        }
        let path = self.path_for(id);
        let bytes = std::fs::read(&path).map_err(|source| match source.kind() {
            io::ErrorKind::NotFound => SessionStoreError::NotFound(id.to_string()),
            _ => SessionStoreError::Io { path: path.clone(), source },
        })?;
        serde_json::from_slice(&bytes).map_err(|source| SessionStoreError::Corrupt { path, source })
    }

    pub fn put(&self, session: &Session) -> Result<(), SessionStoreError> {
        let _guard = self.write_lock.lock().unwrap_or_else(|e| e.into_inner());
        let path = self.path_for(&session.id);
        let io_err = |source| SessionStoreError::Io { path: path.clone(), source };
        std::fs::create_dir_all(&self.dir).map_err(io_err)?;
        let json = serde_json::to_vec_pretty(session).expect("sessions always serialize");
        write_atomic(&path, &json).map_err(io_err)
    }

    /// Reads, transforms and writes a session under the write lock.
    pub fn update<T, E>(
        &self,
        id: &str,
        f: impl FnOnce(&Session) -> Result<(Option<Session>, T), E>,
    ) -> Result<Result<T, E>, SessionStoreError> {
        let _guard = self.write_lock.lock().unwrap_or_else(|e| e.into_inner());
        let session = self.get(id)?;
        match f(&session) {
            Ok((Some(next), out)) => {
                let path = self.path_for(id);
                let json = serde_json::to_vec_pretty(&next).expect("sessions always serialize");
                write_atomic(&path, &json).map_err(|source| SessionStoreError::Io { path, source })?;
                Ok(Ok(out))
            }
            Ok((None, out)) => Ok(Ok(out)),
            Err(e) => Ok(Err(e)),
        }
    }
}
