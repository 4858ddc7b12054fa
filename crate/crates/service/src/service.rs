use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::{Arc, RwLock};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use rand::RngCore;
use sha2::{Digest as _, Sha256};
use tokio::sync::{broadcast, Mutex};

use battleship_core::{Action, ArbiterState, Effect, PlayerId};

use crate::model::{
    Ack, ClientAction, GameConfig, GameId, GameSummary, Notification, NotificationEvent, PlayerView, Session,
};
use crate::store::{EventLog, GameEvent, LogHeader, SessionGrant};
use crate::ServiceError;

const CHANNEL_CAPACITY: usize = 256;

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    /// Where event logs live. `None` keeps games in memory only.
    pub data_dir: Option<PathBuf>,
    /// A game still waiting for its second player stops accepting joins once
    /// its clock reaches this many ticks.
    pub lobby_expiry_ticks: Option<u64>,
    /// Enables manual clock control over HTTP.
    pub test_mode: bool,
}

struct GameData {
    state: ArbiterState,
    sequence: u64,
    /// Token hash to player.
    sessions: HashMap<String, PlayerId>,
    log: Option<EventLog>,
}

struct Game {
    id: GameId,
    config: GameConfig,
    data: Mutex<GameData>,
    tx: broadcast::Sender<Notification>,
}

struct Inner {
    config: ServiceConfig,
    games: RwLock<BTreeMap<GameId, Arc<Game>>>,
}

/// Hosts live games. Cheap to clone; clones share the same games.
///
/// Each game is guarded by its own lock, so submissions to one game are
/// applied in a single order while different games proceed in parallel.
#[derive(Clone)]
pub struct GameService {
    inner: Arc<Inner>,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

fn hash_token(token: &str) -> String {
    hex::encode(Sha256::digest(token.as_bytes()))
}

fn random_hex(bytes: usize) -> String {
    let mut buf = vec![0u8; bytes];
    rand::thread_rng().fill_bytes(&mut buf);
    hex::encode(buf)
}

impl GameData {
    /// Applies `action`, logs it and returns the notification to publish.
    /// The state only changes once the event is on disk.
    fn commit(
        &mut self,
        game_id: &str,
        action: Action,
        grant: Option<(String, PlayerId)>,
    ) -> Result<(Notification, Vec<Effect>), ServiceError> {
        let t = self.state.apply(&action)?;
        let sequence = self.sequence + 1;
        let event = GameEvent {
            sequence,
            timestamp_ms: now_ms(),
            action: action.clone(),
            resulting_phase: t.state.phase.clone(),
            session: grant.as_ref().map(|(hash, player)| SessionGrant {
                player: player.clone(),
                token_sha256: hash.clone(),
            }),
        };
        if let Some(log) = &mut self.log {
            log.append(&event)?;
        }
        tracing::debug!(
            game = game_id,
            sequence,
            action = action.kind(),
            "event committed"
        );
        self.state = t.state;
        self.sequence = sequence;
        if let Some((hash, player)) = grant {
            self.sessions.insert(hash, player);
        }
        let notification = Notification {
            sequence,
            phase: self.state.phase.clone(),
            event: NotificationEvent::Applied {
                kind: action.kind().to_string(),
                actor: action.actor().cloned(),
                effects: t.effects.clone(),
            },
        };
        Ok((notification, t.effects))
    }

    /// Pays out a finished game right away.
    fn settle_if_due(&mut self, game_id: &str) -> Result<Vec<(Notification, Vec<Effect>)>, ServiceError> {
        if self.state.phase.is_finished() && self.state.pot > 0 {
            Ok(vec![self.commit(game_id, Action::Settle, None)?])
        } else {
            Ok(Vec::new())
        }
    }
}

impl Game {
    fn publish(&self, notes: impl IntoIterator<Item = Notification>) {
        for n in notes {
            // No subscribers is fine.
            let _ = self.tx.send(n);
        }
    }

    fn authenticate(&self, data: &GameData, token: &str) -> Result<PlayerId, ServiceError> {
        data.sessions
            .get(&hash_token(token))
            .cloned()
            .ok_or(ServiceError::Unauthorized)
    }
}

impl GameService {
    /// Starts a service, loading and replaying any event logs in the data
    /// directory.
    pub fn open(config: ServiceConfig) -> Result<Self, ServiceError> {
        let mut games = BTreeMap::new();
        if let Some(dir) = &config.data_dir {
            std::fs::create_dir_all(dir)?;
            let mut paths: Vec<_> = std::fs::read_dir(dir)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
                .collect();
            paths.sort();
            for path in paths {
                let game = Self::restore(&path)?;
                tracing::info!(game = %game.id, "restored game from event log");
                games.insert(game.id.clone(), Arc::new(game));
            }
        }
        Ok(Self {
            inner: Arc::new(Inner {
                config,
                games: RwLock::new(games),
            }),
        })
    }

    pub fn in_memory() -> Self {
        Self::open(ServiceConfig::default()).expect("no data directory to read")
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.inner.config
    }

    fn restore(path: &std::path::Path) -> Result<Game, ServiceError> {
        let (log, header, events) = EventLog::load(path)?;
        let replay_error = |sequence, why: String| ServiceError::ReplayMismatch {
            game: header.game_id.clone(),
            sequence,
            why,
        };
        let mut state = ArbiterState::new(header.config.arbiter_config())?;
        let mut sessions = HashMap::new();
        let mut sequence = 0;
        for event in events {
            if event.sequence != sequence + 1 {
                return Err(replay_error(
                    event.sequence,
                    format!("expected sequence {}", sequence + 1),
                ));
            }
            state = state
                .apply(&event.action)
                .map_err(|e| replay_error(event.sequence, e.to_string()))?
                .state;
            if state.phase != event.resulting_phase {
                return Err(replay_error(event.sequence, "resulting phase differs".into()));
            }
            if let Some(grant) = event.session {
                sessions.insert(grant.token_sha256, grant.player);
            }
            sequence = event.sequence;
        }
        let (tx, _) = broadcast::channel(CHANNEL_CAPACITY);
        Ok(Game {
            id: header.game_id,
            config: header.config,
            data: Mutex::new(GameData {
                state,
                sequence,
                sessions,
                log: Some(log),
            }),
            tx,
        })
    }

    fn game(&self, id: &str) -> Result<Arc<Game>, ServiceError> {
        self.inner
            .games
            .read()
            .expect("game table lock poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownGame(id.to_string()))
    }

    /// Opens a game and registers its creator with the configured deposit.
    pub fn create_game(&self, config: GameConfig, player: Option<String>) -> Result<Session, ServiceError> {
        if config.timeout_ticks == 0 {
            return Err(ServiceError::InvalidConfig(
                "timeout_ticks must be at least 1".into(),
            ));
        }
        if config.deposit == 0 {
            return Err(ServiceError::InvalidConfig("deposit must be positive".into()));
        }
        let state = ArbiterState::new(config.arbiter_config())
            .map_err(|e| ServiceError::InvalidConfig(e.to_string()))?;
        let game_id = random_hex(8);
        let log = match &self.inner.config.data_dir {
            Some(dir) => Some(EventLog::create(
                dir,
                &LogHeader {
                    game_id: game_id.clone(),
                    config: config.clone(),
                    created_at_ms: now_ms(),
                },
            )?),
            None => None,
        };
        let mut data = GameData {
            state,
            sequence: 0,
            sessions: HashMap::new(),
            log,
        };
        let player = PlayerId::new(player.unwrap_or_else(|| "player1".into()));
        let token = random_hex(32);
        data.commit(
            &game_id,
            Action::Register {
                player: player.clone(),
                deposit: config.deposit,
            },
            Some((hash_token(&token), player.clone())),
        )?;
        let (tx, _) = broadcast::channel(CHANNEL_CAPACITY);
        let game = Arc::new(Game {
            id: game_id.clone(),
            config,
            data: Mutex::new(data),
            tx,
        });
        self.inner
            .games
            .write()
            .expect("game table lock poisoned")
            .insert(game_id.clone(), game);
        Ok(Session {
            game_id,
            player,
            session_token: token,
        })
    }

    pub async fn join_game(&self, game_id: &str, player: Option<String>) -> Result<Session, ServiceError> {
        let game = self.game(game_id)?;
        let mut data = game.data.lock().await;
        if data.state.players.len() >= 2 {
            return Err(ServiceError::GameFull);
        }
        if let Some(expiry) = self.inner.config.lobby_expiry_ticks {
            if data.state.clock >= expiry {
                return Err(ServiceError::LobbyExpired);
            }
        }
        let player = PlayerId::new(player.unwrap_or_else(|| "player2".into()));
        let token = random_hex(32);
        let (note, _) = data.commit(
            game_id,
            Action::Register {
                player: player.clone(),
                deposit: game.config.deposit,
            },
            Some((hash_token(&token), player.clone())),
        )?;
        game.publish([note]);
        Ok(Session {
            game_id: game_id.to_string(),
            player,
            session_token: token,
        })
    }

    /// Applies a player's move. With `expected_sequence` set, the move is
    /// refused unless it was made against the latest state.
    pub async fn submit_action(
        &self,
        game_id: &str,
        token: &str,
        action: ClientAction,
        expected_sequence: Option<u64>,
    ) -> Result<Ack, ServiceError> {
        let game = self.game(game_id)?;
        let mut data = game.data.lock().await;
        let player = game.authenticate(&data, token)?;
        if let Some(expected) = expected_sequence {
            if expected != data.sequence {
                return Err(ServiceError::StaleSequence {
                    expected,
                    current: data.sequence,
                });
            }
        }
        let (note, mut effects) = data.commit(game_id, action.into_action(player), None)?;
        let mut notes = vec![note];
        for (n, e) in data.settle_if_due(game_id)? {
            notes.push(n);
            effects.extend(e);
        }
        let ack = Ack {
            sequence: data.sequence,
            phase: data.state.phase.clone(),
            effects,
        };
        game.publish(notes);
        Ok(ack)
    }

    /// Advances a game's clock. A finished game is left alone.
    pub async fn advance_clock(&self, game_id: &str, ticks: u64) -> Result<Ack, ServiceError> {
        let game = self.game(game_id)?;
        let mut data = game.data.lock().await;
        if data.state.phase.is_finished() {
            return Ok(Ack {
                sequence: data.sequence,
                phase: data.state.phase.clone(),
                effects: Vec::new(),
            });
        }
        let (note, effects) = data.commit(game_id, Action::Tick { ticks }, None)?;
        let ack = Ack {
            sequence: data.sequence,
            phase: data.state.phase.clone(),
            effects,
        };
        game.publish([note]);
        Ok(ack)
    }

    /// One tick for every game still in play.
    pub async fn tick_all(&self) {
        let ids: Vec<GameId> = self
            .inner
            .games
            .read()
            .expect("game table lock poisoned")
            .keys()
            .cloned()
            .collect();
        for id in ids {
            if let Err(e) = self.advance_clock(&id, 1).await {
                tracing::warn!(game = %id, error = %e, "scheduled tick failed");
            }
        }
    }

    /// Ticks every game once per `interval` until the task is aborted.
    pub fn spawn_scheduler(&self, interval: Duration) -> tokio::task::JoinHandle<()> {
        let service = self.clone();
        tokio::spawn(async move {
            let mut timer = tokio::time::interval(interval);
            timer.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
            timer.tick().await;
            loop {
                timer.tick().await;
                service.tick_all().await;
            }
        })
    }

    pub async fn get_state(&self, game_id: &str, token: &str) -> Result<PlayerView, ServiceError> {
        let game = self.game(game_id)?;
        let data = game.data.lock().await;
        let player = game.authenticate(&data, token)?;
        Ok(PlayerView::project(
            &game.id,
            &game.config,
            data.sequence,
            &data.state,
            &player,
        ))
    }

    /// A snapshot plus a receiver for every later notification, taken
    /// atomically so nothing falls between the two.
    pub async fn subscribe(
        &self,
        game_id: &str,
        token: &str,
    ) -> Result<(PlayerView, broadcast::Receiver<Notification>), ServiceError> {
        let game = self.game(game_id)?;
        let data = game.data.lock().await;
        let player = game.authenticate(&data, token)?;
        let view = PlayerView::project(&game.id, &game.config, data.sequence, &data.state, &player);
        Ok((view, game.tx.subscribe()))
    }

    pub async fn list_games(&self) -> Vec<GameSummary> {
        let games: Vec<Arc<Game>> = self
            .inner
            .games
            .read()
            .expect("game table lock poisoned")
            .values()
            .cloned()
            .collect();
        let expiry = self.inner.config.lobby_expiry_ticks;
        let mut out = Vec::with_capacity(games.len());
        for game in games {
            let data = game.data.lock().await;
            let waiting = data.state.players.len() < 2;
            out.push(GameSummary {
                game_id: game.id.clone(),
                phase: data.state.phase.name().to_string(),
                players: data.state.players.iter().map(|p| p.id.clone()).collect(),
                config: game.config.clone(),
                clock: data.state.clock,
                open: waiting && expiry.is_none_or(|e| data.state.clock < e),
            });
        }
        out
    }

    /// Full arbiter state and event count of a game. Everything in it is
    /// public on the arbiter side: roots, opened cells and the shot log.
    pub async fn arbiter_state(&self, game_id: &str) -> Result<(u64, ArbiterState), ServiceError> {
        let game = self.game(game_id)?;
        let data = game.data.lock().await;
        Ok((data.sequence, data.state.clone()))
    }

    pub fn event_log_path(&self, game_id: &str) -> Option<PathBuf> {
        self.inner
            .config
            .data_dir
            .as_ref()
            .map(|d| EventLog::path_for(d, game_id))
    }
}
