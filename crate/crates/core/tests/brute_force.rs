//! Cross-checks against a plain nested-loop enumeration written here.

use contribnet::equilibria::{verify_pairwise, Verdict};
use contribnet::instances::{canonical, random_family, Family};
use contribnet::oracle::{grid_equilibria, grid_optimum};
use contribnet::solvers::{self, Status};
use contribnet::{Config, Game, Profile};

/// All ways to put `g` units into `parts` ordered bins.
fn compositions(parts: usize, g: u32) -> Vec<Vec<u32>> {
    if parts == 1 {
        return vec![vec![g]];
    }
    let mut out = Vec::new();
    for first in 0..=g {
        for mut rest in compositions(parts - 1, g - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Strategies with efforts in multiples of `B_v / g`; the last bin is unspent.
fn strategies(game: &Game, v: usize, g: u32) -> Vec<Vec<f64>> {
    let d = game.degree(v);
    if game.budget(v) == 0.0 {
        return vec![vec![0.0; d]];
    }
    compositions(d + 1, g)
        .into_iter()
        .map(|c| c[..d].iter().map(|&k| game.budget(v) * k as f64 / g as f64).collect())
        .collect()
}

fn utility(game: &Game, p: &Profile, v: usize) -> f64 {
    game.incident(v)
        .iter()
        .map(|&e| {
            let edge = game.edge(e);
            edge.reward.eval(p.get(game, edge.u, e), p.get(game, edge.v, e))
        })
        .sum()
}

fn all_profiles(game: &Game, g: u32) -> Vec<Profile> {
    let mut out = vec![Profile::zeros(game)];
    for v in 0..game.n() {
        let s = strategies(game, v, g);
        out = out
            .into_iter()
            .flat_map(|p| {
                s.iter().map(move |x| {
                    let mut q = p.clone();
                    q.set_strategy(game, v, x);
                    q
                })
            })
            .collect();
    }
    out
}

fn better(new: f64, old: f64, tol: f64) -> bool {
    new - old > tol * old.abs().max(1.0)
}

fn lattice_stable(game: &Game, p: &Profile, g: u32, tol: f64) -> bool {
    let now: Vec<f64> = (0..game.n()).map(|v| utility(game, p, v)).collect();
    for v in 0..game.n() {
        for s in strategies(game, v, g) {
            let mut q = p.clone();
            q.set_strategy(game, v, &s);
            if better(utility(game, &q, v), now[v], tol) {
                return false;
            }
        }
    }
    for e in 0..game.m() {
        let (u, w) = (game.edge(e).u, game.edge(e).v);
        for su in strategies(game, u, g) {
            for sw in strategies(game, w, g) {
                let mut q = p.clone();
                q.set_strategy(game, u, &su);
                q.set_strategy(game, w, &sw);
                if better(utility(game, &q, u), now[u], tol) && better(utility(game, &q, w), now[w], tol) {
                    return false;
                }
            }
        }
    }
    true
}

fn small_games() -> Vec<Game> {
    let mut out: Vec<Game> = ["triangle-noeq", "triangle-eq", "path-classC", "min-noeq", "min-linear-path", "concave-star"]
        .iter()
        .map(|n| canonical(n, None).unwrap().game)
        .collect();
    for (i, f) in Family::ALL.iter().enumerate() {
        out.push(random_family(*f, 3, 0.7, 40 + i as u64).unwrap());
    }
    out
}

#[test]
fn optimum_matches_enumeration() {
    for (i, game) in small_games().iter().enumerate() {
        let best = all_profiles(game, 3).iter().map(|p| (0..game.n()).map(|v| utility(game, p, v)).sum::<f64>()).fold(f64::NEG_INFINITY, f64::max);
        let (_, w) = grid_optimum(game, 3, u64::MAX).unwrap();
        assert!((w - best).abs() <= 1e-9 * best.max(1.0), "game {i}: {w} vs {best}");
    }
}

#[test]
fn grid_equilibria_match_enumeration() {
    let tol = Config::default().tol;
    for (i, game) in small_games().iter().enumerate() {
        let mine: Vec<Profile> = all_profiles(game, 2).into_iter().filter(|p| lattice_stable(game, p, 2, tol)).collect();
        let theirs = grid_equilibria(game, 2, u64::MAX, tol).unwrap();
        assert_eq!(mine.len(), theirs.len(), "game {i}");
        for p in &theirs {
            assert!(mine.iter().any(|q| q.eff == p.eff), "game {i}");
        }
    }
}

#[test]
fn exact_verdicts_survive_enumeration() {
    let cfg = Config::default();
    for (i, game) in small_games().iter().enumerate() {
        for p in all_profiles(game, 2) {
            let r = verify_pairwise(game, &p, &cfg);
            if r.verdict == Verdict::Stable {
                assert!(lattice_stable(game, &p, 4, cfg.tol), "game {i}: exact stable refuted on the lattice");
            }
        }
    }
}

#[test]
fn solver_equilibria_survive_enumeration() {
    let cfg = Config::default();
    for seed in 0..30 {
        let game = random_family(Family::C0Product, 3, 0.8, 300 + seed).unwrap();
        let out = solvers::solve_greedy_c0(&game);
        assert!(lattice_stable(&game, out.profile.as_ref().unwrap(), 4, cfg.tol), "c0 seed {seed}");
        let game = random_family(Family::MinConcave, 3, 0.8, 600 + seed).unwrap();
        let out = solvers::solve_min_concave(&game, &cfg);
        if out.status == Status::Equilibrium && !out.approximate {
            assert!(lattice_stable(&game, out.profile.as_ref().unwrap(), 4, cfg.tol), "min-concave seed {seed}");
        }
    }
}
