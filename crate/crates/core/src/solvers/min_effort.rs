use super::SolveOutcome;
use crate::allocation::{is_min_concave, maximize, EngineOpts, Term};
use crate::game::{Game, Profile};
use crate::Config;

/// Budget of `w` not yet committed to edges with awake partners.
fn available(game: &Game, p: &Profile, w: usize, asleep: &[bool]) -> f64 {
    let used: f64 = game.incident(w).iter().filter(|&&e| !asleep[game.edge(e).other(w)]).map(|&e| p.get(game, w, e)).sum();
    (game.budget(w) - used).max(0.0)
}

/// Best response of sleeping `u` that matches every awake neighbor's
/// contribution and dictates sleeping neighbors' efforts up to their
/// uncommitted budget.
fn wake_response(game: &Game, p: &Profile, u: usize, asleep: &[bool], cfg: &Config) -> (Vec<(usize, f64)>, bool) {
    let free = available(game, p, u, asleep);
    let sleeping: Vec<usize> = game.incident(u).iter().copied().filter(|&e| asleep[game.edge(e).other(u)]).collect();
    let terms: Vec<Term> = sleeping
        .iter()
        .map(|&e| {
            let w = game.edge(e).other(u);
            Term::new(e, &game.edge(e).reward, free.min(available(game, p, w, asleep)))
        })
        .collect();
    let sol = maximize(&terms, free, &EngineOpts::from_config(cfg));
    let alloc = game
        .incident(u)
        .iter()
        .map(|&e| match sleeping.iter().position(|&f| f == e) {
            Some(i) => (e, sol.x[i].min(terms[i].other)),
            None => (e, p.partner(game, u, e)),
        })
        .collect();
    (alloc, sol.kind.is_exact())
}

/// Uniform budgets, convex `h`: repeatedly wake the sleeping adjacent pair
/// with the largest `h_e(B)` and put both budgets on their edge.
pub fn solve_min_convex_uniform(game: &Game) -> SolveOutcome {
    const NAME: &str = "min-convex-uniform";
    if !game.all_rewards(|r| r.min_h().is_some_and(|h| h.shape().is_convex())) {
        return SolveOutcome::unsupported(NAME, "every reward must be min_effort with convex h");
    }
    if !game.uniform_budgets() {
        return SolveOutcome::unsupported(NAME, "budgets must be uniform");
    }
    let b = if game.n() > 0 { game.budget(0) } else { 0.0 };
    let value: Vec<f64> = (0..game.m()).map(|e| game.edge(e).reward.min_h().unwrap().eval(b)).collect();
    let mut order: Vec<usize> = (0..game.m()).collect();
    order.sort_by(|&a, &c| value[c].partial_cmp(&value[a]).unwrap());
    let mut awake = vec![false; game.n()];
    let mut p = Profile::zeros(game);
    for e in order {
        let edge = game.edge(e);
        if value[e] <= 0.0 || awake[edge.u] || awake[edge.v] {
            continue;
        }
        awake[edge.u] = true;
        awake[edge.v] = true;
        p.eff[e] = [b, b];
    }
    let mut out = SolveOutcome::equilibrium(game, NAME, p);
    out.strong = true;
    out
}

/// Concave `h`: wake one node at a time, the one whose controlled best
/// response has the largest smallest left-derivative on its sleeping edges.
pub fn solve_min_concave(game: &Game, cfg: &Config) -> SolveOutcome {
    const NAME: &str = "min-concave";
    if !is_min_concave(game) {
        return SolveOutcome::unsupported(NAME, "every reward must be min_effort with concave h");
    }
    let n = game.n();
    let mut asleep = vec![true; n];
    let mut p = Profile::zeros(game);
    let mut approximate = false;
    for _ in 0..n {
        let mut cands: Vec<(usize, f64, Vec<(usize, f64)>)> = Vec::new();
        for u in (0..n).filter(|&u| asleep[u]) {
            let (allocation, exact) = wake_response(game, &p, u, &asleep, cfg);
            approximate |= !exact;
            let mut slope = f64::NEG_INFINITY;
            for &(e, x) in &allocation {
                let w = game.edge(e).other(u);
                if asleep[w] && x > cfg.tol {
                    let d = game.edge(e).reward.min_h().unwrap().deriv_left(x);
                    slope = if slope == f64::NEG_INFINITY { d } else { slope.min(d) };
                }
            }
            cands.push((u, slope, allocation));
        }
        let top = cands.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
        let tied: Vec<usize> = (0..cands.len())
            .filter(|&i| cands[i].1 == top || (top.is_finite() && (top - cands[i].1).abs() <= cfg.tol * top.abs().max(1.0)))
            .collect();
        // among tied nodes, prefer one that never puts more on a shared
        // sleeping edge than its tied neighbor would
        let pick = tied
            .iter()
            .copied()
            .find(|&i| {
                let (u, _, alloc) = &cands[i];
                alloc.iter().all(|&(e, x)| {
                    let w = game.edge(e).other(*u);
                    match tied.iter().find(|&&j| cands[j].0 == w) {
                        Some(&j) => x <= effort(&cands[j].2, e) + cfg.tol,
                        None => true,
                    }
                })
            })
            .unwrap_or(tied[0]);
        let (v, _, alloc) = &cands[pick];
        let v = *v;
        for &(e, x) in alloc {
            let w = game.edge(e).other(v);
            p.set(game, v, e, x);
            if asleep[w] {
                p.set(game, w, e, x);
            }
        }
        asleep[v] = false;
    }
    let mut out = SolveOutcome::equilibrium(game, NAME, p);
    out.strong = true;
    out.approximate = approximate;
    out.unique = game.all_rewards(|r| r.min_h().is_some_and(|h| h.shape().is_strictly_concave()));
    out
}

fn effort(alloc: &[(usize, f64)], e: usize) -> f64 {
    alloc.iter().find(|a| a.0 == e).map_or(0.0, |a| a.1)
}
