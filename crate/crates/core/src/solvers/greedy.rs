use super::SolveOutcome;
use crate::game::{Game, Profile};

/// Greedy matching by `c_e = f_e(B_u, B_v)`, largest first; matched nodes
/// put their whole budget on the matched edge.
pub fn solve_greedy_c0(game: &Game) -> SolveOutcome {
    const NAME: &str = "greedy-c0";
    if !game.all_rewards(|r| r.in_c0()) {
        return SolveOutcome::unsupported(NAME, "every reward must be coordinate-convex with f(x, 0) = 0");
    }
    let mut order: Vec<usize> = (0..game.m()).collect();
    let c: Vec<f64> = order.iter().map(|&e| game.max_reward(e)).collect();
    order.sort_by(|&a, &b| c[b].partial_cmp(&c[a]).unwrap());
    let mut matched = vec![false; game.n()];
    let mut p = Profile::zeros(game);
    for e in order {
        let edge = game.edge(e);
        if c[e] <= 0.0 || matched[edge.u] || matched[edge.v] {
            continue;
        }
        matched[edge.u] = true;
        matched[edge.v] = true;
        p.eff[e] = [game.budget(edge.u), game.budget(edge.v)];
    }
    let mut out = SolveOutcome::equilibrium(game, NAME, p);
    out.strong = true;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reward::RewardSpec;
    use crate::solvers::Status;

    #[test]
    fn five_cycle_picks_first_and_third() {
        let mut b = Game::builder();
        for i in 0..5 {
            b.add_node(format!("v{i}"), 1.0);
        }
        for (i, c) in [5.0, 4.0, 3.0, 2.0, 1.0].into_iter().enumerate() {
            b.add_edge(format!("e{}", i + 1), format!("v{i}"), format!("v{}", (i + 1) % 5), RewardSpec::WeightedProduct { c });
        }
        let g = b.build().unwrap();
        let out = solve_greedy_c0(&g);
        assert_eq!(out.status, Status::Equilibrium);
        assert_eq!(out.welfare, Some(16.0));
        let p = out.profile.unwrap();
        assert_eq!(p.eff[0], [1.0, 1.0]);
        assert_eq!(p.eff[2], [1.0, 1.0]);
        assert!(out.strong);
    }

    #[test]
    fn rejects_sum_rewards() {
        let g = Game::builder()
            .node("a", 1.0)
            .node("b", 1.0)
            .edge("e", "a", "b", RewardSpec::WeightedSum { c: 1.0 })
            .build()
            .unwrap();
        assert_eq!(solve_greedy_c0(&g).status, Status::Unsupported);
    }
}
