//! In-memory what-if sessions with an append-only NDJSON log.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use recourse_core::{FeatureSchema, Profile};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
    pub changes: Map<String, Value>,
    pub result_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub model: String,
    pub profile: Map<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub customer: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub focus: Vec<String>,
    pub history: Vec<HistoryEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
enum LogRecord {
    Create { session: Session },
    Commit { id: String, entry: HistoryEntry, profile: Map<String, Value> },
}

pub fn now_millis() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

pub fn digest(value: &Value) -> String {
    let h = Sha256::digest(value.to_string().as_bytes());
    h.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Session store. Each session has its own lock, so writes to one session
/// are serialized without blocking the others.
#[derive(Default)]
pub struct Sessions {
    map: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    log: Option<Mutex<File>>,
    log_path: Option<PathBuf>,
}

impl std::fmt::Debug for Sessions {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Sessions").field("log", &self.log_path).finish()
    }
}

impl Session {
    pub fn as_profile(&self) -> Profile {
        Profile {
            scenario: self.scenario.clone(),
            customer: self.customer.clone(),
            focus: self.focus.clone(),
            values: self.profile.clone(),
        }
    }
}

impl Sessions {
    pub fn in_memory() -> Self {
        Sessions::default()
    }

    /// Opens (creating if needed) the log and replays it.
    pub fn with_log(path: &Path) -> Result<Self> {
        let mut map = HashMap::new();
        if path.exists() {
            let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            for (n, line) in BufReader::new(f).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: LogRecord = serde_json::from_str(&line)
                    .with_context(|| format!("{}:{}: bad session record", path.display(), n + 1))?;
                match rec {
                    LogRecord::Create { session } => {
                        map.insert(session.id.clone(), session);
                    }
                    LogRecord::Commit { id, entry, profile } => {
                        if let Some(s) = map.get_mut(&id) {
                            s.history.push(entry);
                            s.profile = profile;
                        }
                    }
                }
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .with_context(|| format!("opening {}", path.display()))?;
        Ok(Sessions {
            map: RwLock::new(map.into_iter().map(|(k, v)| (k, Arc::new(Mutex::new(v)))).collect()),
            log: Some(Mutex::new(file)),
            log_path: Some(path.to_path_buf()),
        })
    }

    fn append(&self, rec: &LogRecord) -> Result<()> {
        if let Some(log) = &self.log {
            let mut f = log.lock().expect("session log lock");
            let line = serde_json::to_string(rec)?;
            writeln!(f, "{line}")?;
            f.flush()?;
        }
        Ok(())
    }

    pub fn create(&self, model: String, profile: Profile) -> Result<Session> {
        let session = Session {
            id: uuid::Uuid::new_v4().simple().to_string(),
            model,
            profile: profile.values,
            scenario: profile.scenario,
            customer: profile.customer,
            focus: profile.focus,
            history: Vec::new(),
        };
        self.append(&LogRecord::Create {
            session: session.clone(),
        })?;
        self.map
            .write()
            .expect("session map lock")
            .insert(session.id.clone(), Arc::new(Mutex::new(session.clone())));
        Ok(session)
    }

    pub fn get(&self, id: &str) -> Option<Session> {
        let handle = self.map.read().expect("session map lock").get(id).cloned()?;
        let s = handle.lock().expect("session lock").clone();
        Some(s)
    }

    /// Applies `changes` to the stored profile and records one history
    /// entry. The merged profile is validated before anything is stored.
    pub fn commit(
        &self,
        id: &str,
        changes: Map<String, Value>,
        result: &Value,
        schema: &FeatureSchema,
    ) -> Result<Option<Session>> {
        let Some(handle) = self.map.read().expect("session map lock").get(id).cloned() else {
            return Ok(None);
        };
        let mut s = handle.lock().expect("session lock");
        let mut profile = s.profile.clone();
        for (k, v) in &changes {
            profile.insert(k.clone(), v.clone());
        }
        schema.vector_from_json(&profile)?;
        let entry = HistoryEntry {
            timestamp: now_millis(),
            changes,
            result_digest: digest(result),
        };
        self.append(&LogRecord::Commit {
            id: id.to_string(),
            entry: entry.clone(),
            profile: profile.clone(),
        })?;
        s.profile = profile;
        s.history.push(entry);
        Ok(Some(s.clone()))
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("session map lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
