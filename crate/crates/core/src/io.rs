//! JSON encoding of games and profiles.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::game::{Game, Node, Profile};
use crate::reward::RewardSpec;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeFile {
    id: String,
    budget: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeFile {
    id: String,
    u: String,
    v: String,
    reward: RewardSpec,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GameFile {
    nodes: Vec<NodeFile>,
    #[serde(default)]
    edges: Vec<EdgeFile>,
}

fn schema(e: serde_json::Error) -> Error {
    Error::Schema { line: e.line(), column: e.column(), message: e.to_string() }
}

pub fn load_game(bytes: &[u8]) -> Result<Game> {
    let file: GameFile = serde_json::from_slice(bytes).map_err(schema)?;
    let nodes = file.nodes.into_iter().map(|n| Node { id: n.id, budget: n.budget }).collect();
    let edges = file.edges.into_iter().map(|e| (e.id, e.u, e.v, e.reward)).collect();
    Game::new(nodes, edges)
}

pub fn game_to_value(game: &Game) -> Value {
    let file = GameFile {
        nodes: game.nodes().iter().map(|n| NodeFile { id: n.id.clone(), budget: n.budget }).collect(),
        edges: game
            .edges()
            .iter()
            .map(|e| EdgeFile {
                id: e.id.clone(),
                u: game.node(e.u).id.clone(),
                v: game.node(e.v).id.clone(),
                reward: e.reward.clone(),
            })
            .collect(),
    };
    serde_json::to_value(file).expect("game serializes")
}

pub fn save_game(game: &Game) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(&game_to_value(game)).expect("game serializes");
    out.push(b'\n');
    out
}

/// Hex SHA-256 of the canonical encoding.
pub fn game_hash(game: &Game) -> String {
    hex::encode(Sha256::digest(save_game(game)))
}

pub fn load_profile(game: &Game, bytes: &[u8]) -> Result<Profile> {
    let raw: Map<String, Value> = serde_json::from_slice(bytes).map_err(schema)?;
    let mut p = Profile::zeros(game);
    for (node, entries) in raw {
        let v = game
            .node_idx(&node)
            .map_err(|_| Error::UnknownNode { node: node.clone(), location: format!("profile.{node}") })?;
        let entries: HashMap<String, f64> = serde_json::from_value(entries).map_err(|e| Error::Schema {
            line: 0,
            column: 0,
            message: format!("profile.{node}: {e}"),
        })?;
        let mut keys: Vec<_> = entries.into_iter().collect();
        keys.sort_by(|a, b| a.0.cmp(&b.0));
        for (edge, x) in keys {
            let location = format!("profile.{node}.{edge}");
            let e = game
                .edge_idx(&edge)
                .map_err(|_| Error::UnknownEdge { edge: edge.clone(), location: location.clone() })?;
            if game.edge(e).side(v).is_none() {
                return Err(Error::NotIncident { node: node.clone(), edge });
            }
            if !(x.is_finite() && x >= 0.0) {
                return Err(Error::param(location, format!("effort must be finite and >= 0, got {x}")));
            }
            p.set(game, v, e, x);
        }
    }
    Ok(p)
}

pub fn profile_to_value(game: &Game, p: &Profile) -> Value {
    let mut out = Map::new();
    for v in 0..game.n() {
        let mut m = Map::new();
        for &e in game.incident(v) {
            let x = p.get(game, v, e);
            if x != 0.0 {
                m.insert(game.edge(e).id.clone(), Value::from(x));
            }
        }
        out.insert(game.node(v).id.clone(), Value::Object(m));
    }
    Value::Object(out)
}

pub fn save_profile(game: &Game, p: &Profile) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(&profile_to_value(game, p)).expect("profile serializes");
    out.push(b'\n');
    out
}
