//! Append-only JSON-lines event log, one file per game.
//!
//! The first line is a header with the game config. Every later line is a
//! [`GameEvent`]. A line is written and synced before the submission that
//! produced it is acknowledged, so an acknowledged action survives a crash.
//! A torn final line (no trailing newline) was never acknowledged and is
//! dropped on load.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use battleship_core::{Action, GamePhase, PlayerId};

use crate::model::{GameConfig, GameId};
use crate::ServiceError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogHeader {
    pub game_id: GameId,
    pub config: GameConfig,
    pub created_at_ms: u64,
}

/// A session handed out by this event. Only the token hash is stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionGrant {
    pub player: PlayerId,
    pub token_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameEvent {
    pub sequence: u64,
    pub timestamp_ms: u64,
    pub action: Action,
    pub resulting_phase: GamePhase,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<SessionGrant>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum Line {
    Header { header: LogHeader },
    Event(GameEvent),
}

pub struct EventLog {
    path: PathBuf,
    file: File,
}

impl EventLog {
    pub fn path_for(dir: &Path, game_id: &str) -> PathBuf {
        dir.join(format!("{game_id}.jsonl"))
    }

    pub fn create(dir: &Path, header: &LogHeader) -> Result<Self, ServiceError> {
        let path = Self::path_for(dir, &header.game_id);
        let file = OpenOptions::new().create_new(true).append(true).open(&path)?;
        let mut log = Self { path, file };
        log.append_line(&Line::Header {
            header: header.clone(),
        })?;
        Ok(log)
    }

    pub fn append(&mut self, event: &GameEvent) -> Result<(), ServiceError> {
        self.append_line(&Line::Event(event.clone()))
    }

    fn append_line(&mut self, line: &Line) -> Result<(), ServiceError> {
        let mut bytes = serde_json::to_vec(line)?;
        bytes.push(b'\n');
        self.file.write_all(&bytes)?;
        self.file.sync_data()?;
        Ok(())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Reads a log back and reopens it for appending.
    pub fn load(path: &Path) -> Result<(Self, LogHeader, Vec<GameEvent>), ServiceError> {
        let corrupt = |why: String| ServiceError::CorruptLog {
            path: path.display().to_string(),
            why,
        };
        let mut reader = BufReader::new(File::open(path)?);
        let mut header = None;
        let mut events = Vec::new();
        let mut valid_len = 0u64;
        let mut buf = String::new();
        loop {
            buf.clear();
            let n = reader.read_line(&mut buf)?;
            if n == 0 {
                break;
            }
            if !buf.ends_with('\n') {
                tracing::warn!(path = %path.display(), "dropping torn final line");
                break;
            }
            match serde_json::from_str::<Line>(&buf) {
                Ok(Line::Header { header: h }) if header.is_none() => header = Some(h),
                Ok(Line::Event(e)) if header.is_some() => events.push(e),
                Ok(_) => return Err(corrupt("header out of place".into())),
                Err(e) => return Err(corrupt(e.to_string())),
            }
            valid_len += n as u64;
        }
        let header = header.ok_or_else(|| corrupt("missing header".into()))?;
        let file = OpenOptions::new().append(true).open(path)?;
        if file.metadata()?.len() != valid_len {
            file.set_len(valid_len)?;
        }
        Ok((
            Self {
                path: path.to_path_buf(),
                file,
            },
            header,
            events,
        ))
    }
}
