#![allow(dead_code)]

use battleship_core::sim::{HuntStrategy, Strategy};
use battleship_core::{validate_fleet, BoardTree, GamePhase, PlayerId};
use battleship_service::{ClientAction, GameConfig, GameService, PlayerView, ServiceConfig, Session};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// A client keeping its board and blinding factors to itself, as a browser
/// would, and deciding moves from the server's view only.
pub struct Client {
    pub session: Session,
    pub tree: BoardTree,
    strategy: HuntStrategy,
    /// Flip a sibling byte in the next proof.
    pub tamper_next: bool,
}

impl Client {
    pub fn new(session: Session, seed: u64, config: &GameConfig) -> Self {
        let mut strategy = HuntStrategy::new(seed, config.board);
        let placements = strategy.choose_placements(config.board, &config.fleet).unwrap();
        let layout = validate_fleet(config.board, &placements, &config.fleet).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(seed.wrapping_add(1000));
        let tree = BoardTree::build_in(config.board, layout.cells(), 16, &mut rng).unwrap();
        Self {
            session,
            tree,
            strategy,
            tamper_next: false,
        }
    }

    pub fn id(&self) -> &PlayerId {
        &self.session.player
    }

    pub fn token(&self) -> &str {
        &self.session.session_token
    }

    pub fn next_action(&mut self, view: &PlayerView) -> Option<ClientAction> {
        let me = &view.you;
        let g = view.config.board;
        match &view.phase {
            GamePhase::Committing if view.own.as_ref()?.root.is_none() => Some(ClientAction::CommitRoot {
                root: self.tree.root(),
            }),
            GamePhase::AwaitingFirstShot if view.awaited.contains(me) => {
                let t = self.strategy.choose_target(&[])?;
                Some(ClientAction::FirstShot {
                    target: g.coordinate_of(t as usize).unwrap(),
                })
            }
            GamePhase::AwaitingTurn {
                player,
                pending_target,
            } if player == me => {
                let pending = g.index_of(*pending_target).unwrap();
                let mut proof = self.tree.prove_cell(pending as usize).unwrap();
                if std::mem::take(&mut self.tamper_next) {
                    proof.siblings[3].0[7] ^= 0x80;
                }
                let history: Vec<_> = view
                    .shots
                    .iter()
                    .filter(|s| &s.shooter == me)
                    .map(|s| (g.index_of(s.target).unwrap(), s.outcome))
                    .collect();
                let next = self.strategy.choose_target(&history).unwrap_or(pending);
                Some(ClientAction::PlayTurn {
                    proof,
                    next_target: g.coordinate_of(next as usize).unwrap(),
                })
            }
            GamePhase::AwaitingReveal { candidate } if candidate == me => {
                let known = &view.own.as_ref()?.revealed;
                let proofs = (0..g.cell_count())
                    .filter(|i| !known.contains_key(&(*i as u8)))
                    .map(|i| self.tree.prove_cell(i).unwrap())
                    .collect();
                Some(ClientAction::RevealBoard { proofs })
            }
            _ => None,
        }
    }
}

/// Creates a game and joins it, returning both clients.
pub async fn two_player_game(service: &GameService, config: GameConfig, seed: u64) -> (Client, Client) {
    let a = service.create_game(config.clone(), Some("alice".into())).unwrap();
    let b = service.join_game(&a.game_id, Some("bob".into())).await.unwrap();
    (
        Client::new(a, seed * 2, &config),
        Client::new(b, seed * 2 + 1, &config),
    )
}

/// Alternates the two clients until neither has anything to do.
pub async fn play_out(service: &GameService, clients: &mut [Client; 2]) -> PlayerView {
    loop {
        let mut moved = false;
        for c in clients.iter_mut() {
            let view = service.get_state(&c.session.game_id, c.token()).await.unwrap();
            if let Some(action) = c.next_action(&view) {
                service
                    .submit_action(&c.session.game_id, c.token(), action, Some(view.sequence))
                    .await
                    .unwrap();
                moved = true;
            }
        }
        if !moved {
            let c = &clients[0];
            return service.get_state(&c.session.game_id, c.token()).await.unwrap();
        }
    }
}

pub fn temp_service(dir: &std::path::Path) -> GameService {
    GameService::open(ServiceConfig {
        data_dir: Some(dir.to_path_buf()),
        ..ServiceConfig::default()
    })
    .unwrap()
}
