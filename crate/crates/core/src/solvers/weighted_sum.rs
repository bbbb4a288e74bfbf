use super::SolveOutcome;
use crate::game::{Game, Profile};
use crate::reward::RewardSpec;

fn slope(game: &Game, e: usize) -> f64 {
    match game.edge(e).reward {
        RewardSpec::WeightedSum { c } => c,
        _ => unreachable!(),
    }
}

/// Decides existence for rewards `c_e (x + y)` and builds an equilibrium
/// when one exists.
pub fn solve_weighted_sum(game: &Game) -> SolveOutcome {
    const NAME: &str = "weighted-sum";
    if !game.all_rewards(|r| r.is_weighted_sum()) {
        return SolveOutcome::unsupported(NAME, "every reward must be weighted_sum");
    }
    let n = game.n();
    let cv: Vec<f64> = (0..n)
        .map(|v| game.incident(v).iter().map(|&e| slope(game, e)).fold(0.0, f64::max))
        .collect();
    let star = |v: usize, e: usize| slope(game, e) == cv[v];
    let positive = |v: usize| game.budget(v) > 0.0;

    // edges best for exactly one endpoint force that endpoint onto them
    let mut forced: Vec<Option<usize>> = vec![None; n];
    for (e, edge) in game.edges().iter().enumerate() {
        for (a, b) in [(edge.u, edge.v), (edge.v, edge.u)] {
            if star(a, e) && !star(b, e) && positive(a) && positive(b) {
                if let Some(f) = forced[a] {
                    return SolveOutcome::no_equilibrium(
                        NAME,
                        format!(
                            "node '{}' is forced onto both '{}' and '{}'",
                            game.node(a).id,
                            game.edge(f).id,
                            game.edge(e).id
                        ),
                    );
                }
                forced[a] = Some(e);
            }
        }
    }

    // edges best for both endpoints need one endpoint fully on them
    let shared: Vec<usize> = (0..game.m())
        .filter(|&e| {
            let edge = game.edge(e);
            star(edge.u, e) && star(edge.v, e) && positive(edge.u) && positive(edge.v)
        })
        .collect();
    let eligible = |v: usize| forced[v].is_none() && positive(v);
    let mut covers: Vec<Option<usize>> = vec![None; n];
    for &e in &shared {
        let mut seen = vec![false; n];
        if !augment(game, e, &eligible, &mut covers, &mut seen) {
            let edge = game.edge(e);
            return SolveOutcome::no_equilibrium(
                NAME,
                format!(
                    "edge '{}' between '{}' and '{}' cannot be covered by a free endpoint",
                    game.edge(e).id,
                    game.node(edge.u).id,
                    game.node(edge.v).id
                ),
            );
        }
    }

    for (e, edge) in game.edges().iter().enumerate() {
        if star(edge.u, e) || star(edge.v, e) || !positive(edge.u) || !positive(edge.v) {
            continue;
        }
        let ce = slope(game, e);
        let (a, b) = (cv[edge.u] - ce, cv[edge.v] - ce);
        if a * b < ce * ce {
            return SolveOutcome::no_equilibrium(
                NAME,
                format!(
                    "edge '{}': (c_u - c_e)(c_v - c_e) = ({} - {})({} - {}) = {} < c_e^2 = {}",
                    game.edge(e).id,
                    cv[edge.u],
                    ce,
                    cv[edge.v],
                    ce,
                    a * b,
                    ce * ce
                ),
            );
        }
    }

    let mut p = Profile::zeros(game);
    for v in 0..n {
        let target = forced[v]
            .or(covers[v])
            .or_else(|| game.incident(v).iter().copied().find(|&e| star(v, e)));
        if let Some(e) = target {
            p.set(game, v, e, game.budget(v));
        }
    }
    let mut out = SolveOutcome::equilibrium(game, NAME, p);
    out.poa = Some(1.0);
    out
}

/// Kuhn augmenting path over nodes; `covers[x]` is the edge node `x` fills.
fn augment(game: &Game, e: usize, eligible: &dyn Fn(usize) -> bool, covers: &mut [Option<usize>], seen: &mut [bool]) -> bool {
    let edge = game.edge(e);
    for x in [edge.u, edge.v] {
        if !eligible(x) || seen[x] {
            continue;
        }
        seen[x] = true;
        let free = match covers[x] {
            None => true,
            Some(f) => augment(game, f, eligible, covers, seen),
        };
        if free {
            covers[x] = Some(e);
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::verify_pairwise;
    use crate::solvers::Status;
    use crate::Config;

    fn triangle(c3: f64) -> Game {
        Game::builder()
            .node("u1", 1.0)
            .node("u2", 1.0)
            .node("u3", 1.0)
            .edge("e1", "u1", "u2", RewardSpec::WeightedSum { c: 3.0 })
            .edge("e2", "u2", "u3", RewardSpec::WeightedSum { c: 3.0 })
            .edge("e3", "u3", "u1", RewardSpec::WeightedSum { c: c3 })
            .build()
            .unwrap()
    }

    #[test]
    fn triangle_fails_on_third_edge() {
        let out = solve_weighted_sum(&triangle(2.0));
        assert_eq!(out.status, Status::NoEquilibrium);
        let w = out.witness.unwrap();
        assert!(w.starts_with("edge 'e3'"), "{w}");
        assert!(w.contains("= 1 < c_e^2 = 4"), "{w}");
    }

    #[test]
    fn triangle_with_cheap_third_edge() {
        let g = triangle(1.0);
        let out = solve_weighted_sum(&g);
        assert_eq!(out.status, Status::Equilibrium);
        assert_eq!(out.welfare, Some(18.0));
        assert!(verify_pairwise(&g, out.profile.as_ref().unwrap(), &Config::default()).is_stable());
    }

    #[test]
    fn two_forced_edges() {
        // b is best on both sides but a and c each prefer b strictly less
        let g = Game::builder()
            .node("a", 1.0)
            .node("b", 1.0)
            .node("c", 1.0)
            .node("x", 1.0)
            .node("y", 1.0)
            .edge("ab", "a", "b", RewardSpec::WeightedSum { c: 2.0 })
            .edge("ax", "a", "x", RewardSpec::WeightedSum { c: 5.0 })
            .edge("bc", "b", "c", RewardSpec::WeightedSum { c: 2.0 })
            .edge("cy", "c", "y", RewardSpec::WeightedSum { c: 5.0 })
            .build()
            .unwrap();
        let out = solve_weighted_sum(&g);
        assert_eq!(out.status, Status::NoEquilibrium);
        assert!(out.witness.unwrap().contains("node 'b'"));
    }

    #[test]
    fn single_edge() {
        let g = Game::builder()
            .node("a", 1.0)
            .node("b", 1.0)
            .edge("e", "a", "b", RewardSpec::WeightedSum { c: 2.0 })
            .build()
            .unwrap();
        let out = solve_weighted_sum(&g);
        assert_eq!(out.welfare, Some(8.0));
        assert_eq!(out.poa, Some(1.0));
    }
}
