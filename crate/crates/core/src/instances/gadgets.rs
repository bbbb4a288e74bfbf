//! Reductions from 3-SAT. Each variable `i` has a decision player `d{i}` and
//! two assignment players `t{i}`, `f{i}`; each clause `j` has a small
//! subgame whose anchor is linked to the assignment players of its
//! literals.

use crate::error::{Error, Result};
use crate::game::{Game, GameBuilder, Profile};
use crate::reward::RewardSpec;
use crate::scalar::ScalarFn;

use super::cnf::CnfFormula;

fn check_size(cnf: &CnfFormula) -> Result<f64> {
    if cnf.k < 3 {
        return Err(Error::Cnf(format!("gadgets need at least 3 variables, got {}", cnf.k)));
    }
    Ok((cnf.k * cnf.l()) as f64)
}

fn literal_player(lit: i32) -> String {
    let i = lit.unsigned_abs();
    if lit > 0 {
        format!("t{i}")
    } else {
        format!("f{i}")
    }
}

/// Distinct literals of clause `j`, in clause order.
fn clause_literals(cnf: &CnfFormula, j: usize) -> Vec<i32> {
    let mut out: Vec<i32> = Vec::new();
    for &lit in &cnf.clauses[j] {
        if !out.contains(&lit) {
            out.push(lit);
        }
    }
    out
}

fn add_variables(b: &mut GameBuilder, cnf: &CnfFormula, decision_budget: f64, kl: f64, reward: &RewardSpec) {
    for i in 1..=cnf.k {
        b.add_node(format!("d{i}"), decision_budget);
        b.add_node(format!("t{i}"), kl);
        b.add_node(format!("f{i}"), kl);
    }
    for i in 1..=cnf.k {
        b.add_edge(format!("d{i}-t{i}"), format!("d{i}"), format!("t{i}"), reward.clone());
        b.add_edge(format!("d{i}-f{i}"), format!("d{i}"), format!("f{i}"), reward.clone());
    }
}

fn add_literal_edges(b: &mut GameBuilder, cnf: &CnfFormula, anchor: &str, reward: &RewardSpec) {
    for j in 0..cnf.l() {
        for lit in clause_literals(cnf, j) {
            let a = literal_player(lit);
            b.add_edge(format!("{a}-c{}", j + 1), a, format!("c{}{anchor}", j + 1), reward.clone());
        }
    }
}

/// Product-and-sum gadget: a weighted-sum triangle per clause, `7xy`
/// decision edges and `3xy` literal edges. It has a pairwise stable profile
/// iff the formula is satisfiable.
pub fn sat_gadget_xy_sum(cnf: &CnfFormula) -> Result<Game> {
    let kl = check_size(cnf)?;
    let mut b = Game::builder();
    add_variables(&mut b, cnf, 1.0, kl, &RewardSpec::WeightedProduct { c: 7.0 });
    for j in 1..=cnf.l() {
        for t in ["u1", "u2", "u3"] {
            b.add_node(format!("c{j}{t}"), 1.0);
        }
        for (name, x, y, c) in [("e1", "u1", "u2", 3.0), ("e2", "u2", "u3", 3.0), ("e3", "u3", "u1", 2.0)] {
            b.add_edge(format!("c{j}{name}"), format!("c{j}{x}"), format!("c{j}{y}"), RewardSpec::WeightedSum { c });
        }
    }
    add_literal_edges(&mut b, cnf, "u3", &RewardSpec::WeightedProduct { c: 3.0 });
    b.build()
}

fn anchor_reward(kl: f64, reserve: f64) -> Result<RewardSpec> {
    let cap = kl - reserve;
    let a = 10.0 * cap.powf(1.5);
    let h = ScalarFn::capped_power(a, 0.5, cap);
    let joined = h.eval(cap);
    let target = 10.0 * cap * cap;
    if (joined - target).abs() > 1e-9 * target.max(1.0) {
        return Err(Error::Internal(format!("anchor reward does not join at {cap}: {joined} vs {target}")));
    }
    Ok(RewardSpec::MinEffort { h })
}

const CLAUSE_PLAYERS: [(&str, f64); 4] = [("u", 2.0), ("v", 2.0), ("w", 2.0), ("z", 1.0)];

/// Min-effort gadget: a `u-v-w-z` path per clause with rewards `2x^2`,
/// `5x`, `6x`, `10x^2` decision edges and `7x` literal edges into `z`.
/// With `uniform`, every budget is `kl` and each clause player gets a
/// private anchor partner that absorbs the surplus.
pub fn sat_gadget_min(cnf: &CnfFormula, uniform: bool) -> Result<Game> {
    let kl = check_size(cnf)?;
    let mut b = Game::builder();
    add_variables(&mut b, cnf, kl, kl, &RewardSpec::MinEffort { h: ScalarFn::power(10.0, 2.0) });
    let min = |h: ScalarFn| RewardSpec::MinEffort { h };
    for j in 1..=cnf.l() {
        for (p, budget) in CLAUSE_PLAYERS {
            b.add_node(format!("c{j}{p}"), if uniform { kl } else { budget });
        }
        b.add_edge(format!("c{j}uv"), format!("c{j}u"), format!("c{j}v"), min(ScalarFn::power(2.0, 2.0)));
        b.add_edge(format!("c{j}vw"), format!("c{j}v"), format!("c{j}w"), min(ScalarFn::linear(5.0)));
        b.add_edge(format!("c{j}wz"), format!("c{j}w"), format!("c{j}z"), min(ScalarFn::linear(6.0)));
        if uniform {
            for (p, budget) in CLAUSE_PLAYERS {
                b.add_node(format!("c{j}{p}'"), kl);
                b.add_edge(format!("c{j}{p}{p}'"), format!("c{j}{p}"), format!("c{j}{p}'"), anchor_reward(kl, budget)?);
            }
        }
    }
    add_literal_edges(&mut b, cnf, "z", &min(ScalarFn::linear(7.0)));
    b.build()
}

/// Assigns each clause to an assignment player made free by the truth
/// assignment: a maximum matching first, then any satisfying literal.
fn clause_cover(cnf: &CnfFormula, assignment: &[bool]) -> Result<Vec<String>> {
    if assignment.len() != cnf.k {
        return Err(Error::InvalidArgument(format!("assignment has {} values for {} variables", assignment.len(), cnf.k)));
    }
    if !cnf.satisfied_by(assignment) {
        return Err(Error::InvalidArgument("assignment does not satisfy the formula".into()));
    }
    let free: Vec<Vec<i32>> = (0..cnf.l())
        .map(|j| clause_literals(cnf, j).into_iter().filter(|&lit| assignment[lit.unsigned_abs() as usize - 1] == (lit > 0)).collect())
        .collect();
    // Player of a satisfying literal is keyed by its literal value.
    let mut owner: std::collections::HashMap<i32, usize> = std::collections::HashMap::new();
    fn augment(j: usize, free: &[Vec<i32>], owner: &mut std::collections::HashMap<i32, usize>, seen: &mut Vec<i32>) -> bool {
        for &lit in &free[j] {
            if seen.contains(&lit) {
                continue;
            }
            seen.push(lit);
            let taken = owner.get(&lit).copied();
            if taken.is_none() || augment(taken.unwrap(), free, owner, seen) {
                owner.insert(lit, j);
                return true;
            }
        }
        false
    }
    for j in 0..cnf.l() {
        augment(j, &free, &mut owner, &mut Vec::new());
    }
    let mut cover: Vec<Option<i32>> = vec![None; cnf.l()];
    for (&lit, &j) in &owner {
        cover[j] = Some(lit);
    }
    Ok(cover.into_iter().zip(&free).map(|(c, f)| literal_player(c.unwrap_or(f[0]))).collect())
}

fn set_pair(game: &Game, p: &mut Profile, edge: &str, x: f64, y: f64) -> Result<()> {
    let e = game.edge_idx(edge)?;
    p.eff[e] = [x, y];
    Ok(())
}

fn assignment_layer(game: &Game, cnf: &CnfFormula, assignment: &[bool], p: &mut Profile, anchor_share: f64) -> Result<()> {
    let kl = (cnf.k * cnf.l()) as f64;
    for (i, &val) in assignment.iter().enumerate() {
        let i = i + 1;
        let d = game.node_idx(&format!("d{i}"))?;
        let taken = if val { format!("d{i}-f{i}") } else { format!("d{i}-t{i}") };
        set_pair(game, p, &taken, game.budget(d), kl)?;
    }
    let cover = clause_cover(cnf, assignment)?;
    let mut load: std::collections::BTreeMap<&str, usize> = std::collections::BTreeMap::new();
    for a in &cover {
        *load.entry(a.as_str()).or_default() += 1;
    }
    for (j, a) in cover.iter().enumerate() {
        let e = game.edge_idx(&format!("{a}-c{}", j + 1))?;
        let share = kl / load[a.as_str()] as f64;
        // Edges run from the assignment player to the clause anchor.
        p.eff[e] = [share, anchor_share];
    }
    Ok(())
}

/// Pairwise stable profile of [`sat_gadget_xy_sum`] built from a
/// satisfying assignment.
pub fn xy_sum_recipe(game: &Game, cnf: &CnfFormula, assignment: &[bool]) -> Result<Profile> {
    let mut p = Profile::zeros(game);
    assignment_layer(game, cnf, assignment, &mut p, 1.0)?;
    for j in 1..=cnf.l() {
        // u2 is indifferent between its triangle edges; facing u3 removes
        // the joint move where u3 adds a sliver to (u2, u3).
        set_pair(game, &mut p, &format!("c{j}e1"), 1.0, 0.0)?;
        set_pair(game, &mut p, &format!("c{j}e2"), 1.0, 0.0)?;
    }
    Ok(p)
}

/// Pairwise stable profile of [`sat_gadget_min`] built from a satisfying
/// assignment.
pub fn min_recipe(game: &Game, cnf: &CnfFormula, assignment: &[bool], uniform: bool) -> Result<Profile> {
    let kl = (cnf.k * cnf.l()) as f64;
    let mut p = Profile::zeros(game);
    assignment_layer(game, cnf, assignment, &mut p, 1.0)?;
    for j in 1..=cnf.l() {
        set_pair(game, &mut p, &format!("c{j}vw"), 2.0, 2.0)?;
        if uniform {
            for (q, budget) in CLAUSE_PLAYERS {
                set_pair(game, &mut p, &format!("c{j}{q}{q}'"), kl - budget, kl - budget)?;
            }
        }
    }
    Ok(p)
}
