//! Exhaustive enumeration of lattice profiles: every node's efforts are
//! multiples of `B_v / g`.

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::equilibria::{improves, node_lattice, verify_pairwise};
use crate::error::{Error, Result};
use crate::game::{Game, Profile};
use crate::io::profile_to_value;
use crate::Config;

/// The per-node strategy lists, in lexicographic order.
pub struct Lattice {
    pub resolution: u32,
    pub points: Vec<Vec<Vec<f64>>>,
}

impl Lattice {
    pub fn new(game: &Game, g: u32, cap: u64) -> Result<Self> {
        if g == 0 {
            return Err(Error::InvalidArgument("grid resolution must be positive".into()));
        }
        let required = profile_count(game, g);
        if required > cap as f64 {
            return Err(Error::GridCap { required, cap });
        }
        Ok(Lattice { resolution: g, points: (0..game.n()).map(|v| node_lattice(game, v, g)).collect() })
    }

    pub fn len(&self) -> usize {
        self.points.iter().map(|p| p.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Profile number `k`; the first node is the most significant digit.
    pub fn profile(&self, game: &Game, mut k: usize) -> Profile {
        let mut p = Profile::zeros(game);
        for v in (0..game.n()).rev() {
            let pts = &self.points[v];
            p.set_strategy(game, v, &pts[k % pts.len()]);
            k /= pts.len();
        }
        p
    }
}

/// Number of lattice profiles, `prod_v C(g + deg_v, deg_v)` over nodes with
/// positive budget.
pub fn profile_count(game: &Game, g: u32) -> f64 {
    (0..game.n())
        .map(|v| if game.budget(v) > 0.0 { crate::allocation::composition_count(game.degree(v) + 1, g) } else { 1.0 })
        .product()
}

/// Highest-welfare lattice profile; ties go to the first in enumeration
/// order.
pub fn grid_optimum(game: &Game, g: u32, cap: u64) -> Result<(Profile, f64)> {
    let lat = Lattice::new(game, g, cap)?;
    let (w, k) = (0..lat.len())
        .into_par_iter()
        .map(|k| (game.welfare(&lat.profile(game, k)), k))
        .reduce(|| (f64::NEG_INFINITY, usize::MAX), |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
    Ok((lat.profile(game, k), w))
}

fn lattice_stable(game: &Game, lat: &Lattice, p: &Profile, tol: f64) -> bool {
    let now: Vec<f64> = (0..game.n()).map(|v| game.utility(p, v)).collect();
    let value = |v: usize, s: &[f64], fixed: Option<(usize, f64)>| -> f64 {
        game.incident(v)
            .iter()
            .zip(s)
            .map(|(&e, &x)| {
                let y = match fixed {
                    Some((f, y)) if f == e => y,
                    _ => p.partner(game, v, e),
                };
                game.edge(e).reward.eval(x, y)
            })
            .sum()
    };
    for v in 0..game.n() {
        if lat.points[v].iter().any(|s| improves(value(v, s, None) - now[v], now[v], tol)) {
            return false;
        }
    }
    for (e, edge) in game.edges().iter().enumerate() {
        let (u, w) = (edge.u, edge.v);
        let iu = game.incident(u).iter().position(|&f| f == e).unwrap();
        let iw = game.incident(w).iter().position(|&f| f == e).unwrap();
        for su in &lat.points[u] {
            for sw in &lat.points[w] {
                if improves(value(u, su, Some((e, sw[iw]))) - now[u], now[u], tol)
                    && improves(value(w, sw, Some((e, su[iu]))) - now[w], now[w], tol)
                {
                    return false;
                }
            }
        }
    }
    true
}

/// Whether `p` has no improving lattice move at resolution `g`.
pub fn lattice_stable_at(game: &Game, p: &Profile, g: u32, cap: u64, tol: f64) -> Result<bool> {
    let lat = Lattice::new(game, g, cap)?;
    Ok(lattice_stable(game, &lat, p, tol))
}

/// Lattice profiles with no improving lattice move by a single node or an
/// adjacent pair, in enumeration order.
pub fn grid_equilibria(game: &Game, g: u32, cap: u64, tol: f64) -> Result<Vec<Profile>> {
    let lat = Lattice::new(game, g, cap)?;
    let keep: Vec<usize> = (0..lat.len())
        .into_par_iter()
        .filter(|&k| lattice_stable(game, &lat, &lat.profile(game, k), tol))
        .collect();
    Ok(keep.into_iter().map(|k| lat.profile(game, k)).collect())
}

/// Grid equilibria that the continuous verifier does not refute.
pub fn surviving_equilibria(game: &Game, g: u32, cfg: &Config) -> Result<Vec<Profile>> {
    let found = grid_equilibria(game, g, cfg.grid_cap, cfg.tol)?;
    Ok(found.into_iter().filter(|p| verify_pairwise(game, p, cfg).witness.is_none()).collect())
}

pub fn equilibria_to_json(game: &Game, list: &[Profile]) -> Value {
    Value::Array(
        list.iter()
            .map(|p| json!({ "welfare": game.welfare(p), "profile": profile_to_value(game, p) }))
            .collect(),
    )
}
