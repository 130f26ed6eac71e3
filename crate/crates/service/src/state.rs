//! Per-study engines, their on-disk event logs, and the token table.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use maia_core::clock::{Clock, SystemClock};
use maia_core::delphi::{DelphiEngine, EngineError};
use maia_core::io::canonical;
use maia_core::io::store::EventStore;
use maia_core::model::StudyDefinition;

use crate::config::ServiceConfig;
use crate::error::ApiError;
use crate::tokens::{IssuedToken, Role, TokenRecord, TokenTable};

/// Makes the clock each new study engine runs on.
pub type ClockFactory = Arc<dyn Fn() -> Arc<dyn Clock> + Send + Sync>;

const EVENTS_FILE: &str = "events.jsonl";
const TOKENS_FILE: &str = "tokens.jsonl";

pub struct StudyHandle {
    pub engine: DelphiEngine,
    store: EventStore,
    tokens_path: PathBuf,
    persisted: usize,
}

impl StudyHandle {
    fn persist(&mut self) -> Result<(), ApiError> {
        let events = self.engine.events();
        self.store
            .append(&events[self.persisted..])
            .map_err(|e| ApiError::internal(e.to_string()))?;
        self.persisted = events.len();
        Ok(())
    }
}

pub struct Service {
    config: ServiceConfig,
    engine_clock: ClockFactory,
    token_clock: Arc<dyn Clock>,
    studies: RwLock<HashMap<String, Arc<Mutex<StudyHandle>>>>,
    tokens: RwLock<TokenTable>,
}

impl std::fmt::Debug for Service {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Service")
            .field("config", &self.config)
            .finish()
    }
}

fn valid_study_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 64
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

impl Service {
    pub fn open(config: ServiceConfig) -> Result<Self, ApiError> {
        Self::open_with(
            config,
            Arc::new(|| Arc::new(SystemClock) as Arc<dyn Clock>),
            Arc::new(SystemClock),
        )
    }

    /// Load every study under the archive directory by replaying its log.
    pub fn open_with(
        config: ServiceConfig,
        engine_clock: ClockFactory,
        token_clock: Arc<dyn Clock>,
    ) -> Result<Self, ApiError> {
        let service = Self {
            config,
            engine_clock,
            token_clock,
            studies: RwLock::new(HashMap::new()),
            tokens: RwLock::new(TokenTable::default()),
        };
        let root = service.config.archive.clone();
        if root.is_dir() {
            let mut dirs: Vec<PathBuf> = std::fs::read_dir(&root)
                .map_err(|e| ApiError::internal(format!("{}: {e}", root.display())))?
                .filter_map(|d| d.ok().map(|d| d.path()))
                .filter(|p| p.join(EVENTS_FILE).is_file())
                .collect();
            dirs.sort();
            for dir in dirs {
                service.load_study(&dir)?;
            }
        }
        Ok(service)
    }

    fn load_study(&self, dir: &Path) -> Result<(), ApiError> {
        let store = EventStore::new(dir.join(EVENTS_FILE));
        let events = store
            .load()
            .map_err(|e| ApiError::internal(e.to_string()))?;
        let engine = DelphiEngine::replay(&events, (self.engine_clock)())
            .map_err(|e| ApiError::internal(format!("{}: {e}", dir.display())))?;
        let tokens_path = dir.join(TOKENS_FILE);
        if tokens_path.is_file() {
            let text = std::fs::read_to_string(&tokens_path)
                .map_err(|e| ApiError::internal(e.to_string()))?;
            let mut table = self.tokens.write().expect("token table lock");
            for line in text.lines().filter(|l| !l.trim().is_empty()) {
                let record: TokenRecord =
                    serde_json::from_str(line).map_err(|e| ApiError::internal(e.to_string()))?;
                table.insert(record);
            }
        }
        let id = engine.study().id.clone();
        let handle = StudyHandle {
            persisted: engine.events().len(),
            engine,
            store,
            tokens_path,
        };
        self.studies
            .write()
            .expect("study map lock")
            .insert(id, Arc::new(Mutex::new(handle)));
        Ok(())
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn check_admin(&self, bearer: Option<&str>) -> Result<(), ApiError> {
        match &self.config.admin_token {
            None => Ok(()),
            Some(expected) if bearer == Some(expected.as_str()) => Ok(()),
            Some(_) => Err(ApiError::unauthorized(
                "INVALID_TOKEN",
                "study creation requires the admin token",
            )),
        }
    }

    pub fn create_study(
        &self,
        study: StudyDefinition,
    ) -> Result<(StudyDefinition, IssuedToken), ApiError> {
        if !valid_study_id(&study.id) {
            return Err(ApiError::new(
                axum::http::StatusCode::UNPROCESSABLE_ENTITY,
                "INVALID_STUDY_ID",
                "study ids may use letters, digits, '-', '_' and '.'",
            ));
        }
        let mut studies = self.studies.write().expect("study map lock");
        if studies.contains_key(&study.id) {
            return Err(ApiError::new(
                axum::http::StatusCode::CONFLICT,
                "STUDY_EXISTS",
                format!("study {} already exists", study.id),
            ));
        }
        let engine = DelphiEngine::create(study, (self.engine_clock)())?;
        let dir = self.config.archive.join(&engine.study().id);
        let mut handle = StudyHandle {
            engine,
            store: EventStore::new(dir.join(EVENTS_FILE)),
            tokens_path: dir.join(TOKENS_FILE),
            persisted: 0,
        };
        handle.persist()?;
        let id = handle.engine.study().id.clone();
        let token = self.issue_locked(&handle, Role::Facilitator, None)?;
        let study = handle.engine.study().clone();
        studies.insert(id, Arc::new(Mutex::new(handle)));
        Ok((study, token))
    }

    fn issue_locked(
        &self,
        handle: &StudyHandle,
        role: Role,
        respondent: Option<&str>,
    ) -> Result<IssuedToken, ApiError> {
        let (issued, record) = self.tokens.write().expect("token table lock").issue(
            role,
            &handle.engine.study().id,
            respondent,
            self.token_clock.now(),
            self.config.token_ttl,
        );
        let line =
            canonical::to_canonical_line(&record).map_err(|e| ApiError::internal(e.to_string()))?;
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(&handle.tokens_path)
            .and_then(|mut f| writeln!(f, "{line}"))
            .map_err(|e| ApiError::internal(e.to_string()))?;
        Ok(issued)
    }

    fn handle(&self, study_id: &str) -> Result<Arc<Mutex<StudyHandle>>, ApiError> {
        self.studies
            .read()
            .expect("study map lock")
            .get(study_id)
            .cloned()
            .ok_or_else(|| {
                ApiError::not_found("UNKNOWN_STUDY", format!("unknown study {study_id}"))
            })
    }

    /// Run `f` against the study's engine and persist any events it added.
    pub fn with_study<R>(
        &self,
        study_id: &str,
        f: impl FnOnce(&mut DelphiEngine) -> Result<R, EngineError>,
    ) -> Result<R, ApiError> {
        let handle = self.handle(study_id)?;
        let mut h = handle.lock().expect("study lock");
        let result = f(&mut h.engine);
        h.persist()?;
        Ok(result?)
    }

    /// Like `with_study`, for callers that also issue tokens.
    pub fn with_study_tokens<R>(
        &self,
        study_id: &str,
        f: impl FnOnce(&mut DelphiEngine) -> Result<R, EngineError>,
        respondent: impl FnOnce(&R) -> Option<String>,
    ) -> Result<(R, Option<IssuedToken>), ApiError> {
        let handle = self.handle(study_id)?;
        let mut h = handle.lock().expect("study lock");
        let result = f(&mut h.engine);
        h.persist()?;
        let value = result?;
        let token = match respondent(&value) {
            Some(id) => Some(self.issue_locked(&h, Role::Respondent, Some(&id))?),
            None => None,
        };
        Ok((value, token))
    }

    /// Issue a fresh token for an existing respondent.
    pub fn reissue(&self, study_id: &str, respondent_id: &str) -> Result<IssuedToken, ApiError> {
        let handle = self.handle(study_id)?;
        let h = handle.lock().expect("study lock");
        if h.engine.respondent(respondent_id).is_none() {
            return Err(EngineError::UnknownRespondent(respondent_id.to_string()).into());
        }
        self.issue_locked(&h, Role::Respondent, Some(respondent_id))
    }

    /// Resolve a bearer secret to its record for `study_id`.
    pub fn authenticate(
        &self,
        study_id: &str,
        bearer: Option<&str>,
    ) -> Result<TokenRecord, ApiError> {
        let secret = bearer
            .ok_or_else(|| ApiError::unauthorized("MISSING_TOKEN", "bearer token required"))?;
        let record = self
            .tokens
            .read()
            .expect("token table lock")
            .lookup(secret)
            .cloned()
            .ok_or_else(|| ApiError::unauthorized("INVALID_TOKEN", "unknown token"))?;
        if record.expires_at <= self.token_clock.now() {
            return Err(ApiError::unauthorized("TOKEN_EXPIRED", "token has expired"));
        }
        if record.study_id != study_id {
            return Err(ApiError::forbidden("token belongs to another study"));
        }
        Ok(record)
    }

    pub fn study_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .studies
            .read()
            .expect("study map lock")
            .keys()
            .cloned()
            .collect();
        ids.sort();
        ids
    }
}
