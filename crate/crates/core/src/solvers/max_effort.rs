use super::SolveOutcome;
use crate::allocation::best_response;
use crate::equilibria::{improves, verify_pairwise};
use crate::error::{Error, Result};
use crate::game::{Game, Profile};
use crate::reward::RewardSpec;
use crate::Config;

/// Round-robin unilateral best responses from the zero profile. The
/// potential rises with every move, so the loop ends at a Nash profile,
/// which for max-effort rewards is also pairwise stable.
pub fn solve_max_effort(game: &Game, cfg: &Config) -> Result<SolveOutcome> {
    const NAME: &str = "max-effort";
    if !game.all_rewards(|r| matches!(r, RewardSpec::MaxEffort { .. })) {
        return Ok(SolveOutcome::unsupported(NAME, "every reward must be max_effort"));
    }
    let kinks: usize = game.edges().iter().map(|e| e.reward.max_h().unwrap().breakpoints().len() + 1).sum();
    let cap = 10 * (game.n() + game.m()) * kinks.max(1);
    let mut p = Profile::zeros(game);
    let mut trace = vec![game.potential(&p)];
    let mut approximate = false;
    let mut moves = 0usize;
    loop {
        let mut moved = false;
        for v in 0..game.n() {
            let br = best_response(game, &p, v, cfg);
            approximate |= !br.kind.is_exact();
            let now = game.utility(&p, v);
            if improves(br.value - now, now, cfg.tol) {
                br.apply(game, &mut p);
                trace.push(game.potential(&p));
                moved = true;
                moves += 1;
                if moves > cap {
                    return Err(Error::Internal(format!("max-effort ascent exceeded {cap} moves")));
                }
            }
        }
        if !moved {
            break;
        }
    }
    let report = verify_pairwise(game, &p, cfg);
    let mut out = SolveOutcome::equilibrium(game, NAME, p);
    out.approximate = approximate;
    out.potential_trace = trace;
    if !report.is_stable() {
        out.notes.push(format!("pairwise verification did not confirm stability: {:?}", report.verdict));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ScalarFn;

    fn path(eps: f64) -> Game {
        let sq = |a: f64| RewardSpec::MaxEffort { h: ScalarFn::Power { a, k: 2.0, cap: None } };
        Game::builder()
            .node("u1", 0.0)
            .node("u2", 1.0)
            .node("u3", 1.0)
            .node("u4", 0.0)
            .edge("e1", "u1", "u2", sq(1.0))
            .edge("e2", "u2", "u3", sq(1.0))
            .edge("e3", "u3", "u4", sq(eps))
            .build()
            .unwrap()
    }

    #[test]
    fn ascent_on_four_path() {
        let g = path(0.01);
        let cfg = Config::default();
        let out = solve_max_effort(&g, &cfg).unwrap();
        assert!(out.notes.is_empty());
        assert!((out.welfare.unwrap() - 4.0).abs() < 1e-12);
        assert!(out.potential_trace.windows(2).all(|w| w[1] > w[0]));

        let mut worse = Profile::zeros(&g);
        worse.set(&g, 1, 1, 1.0);
        worse.set(&g, 2, 2, 1.0);
        assert!((g.welfare(&worse) - 2.02).abs() < 1e-12);
        assert!(verify_pairwise(&g, &worse, &cfg).is_stable());
    }
}
