use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use contribnet::allocation::best_response;
use contribnet::equilibria::verify_pairwise;
use contribnet::instances::{random_family, Family};
use contribnet::io::game_hash;
use contribnet::oracle::{profile_count, Lattice};
use contribnet::solvers::{self, SolveOutcome, Status};
use contribnet::{Config, Game, Profile};

fn cfg() -> Config {
    Config::default()
}

fn rel_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn random_strategy(game: &Game, v: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let d = game.degree(v);
    let w: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..1.0)).collect();
    let sum = w.iter().sum::<f64>().max(1e-12);
    let total = if rng.random_bool(0.5) { 1.0 } else { rng.random_range(0.0..1.0) };
    w.iter().map(|x| game.budget(v) * total * x / sum).collect()
}

fn random_profile(game: &Game, rng: &mut ChaCha8Rng) -> Profile {
    let mut p = Profile::zeros(game);
    for v in 0..game.n() {
        let s = random_strategy(game, v, rng);
        p.set_strategy(game, v, &s);
    }
    p
}

fn family() -> impl Strategy<Value = Family> {
    (0..Family::ALL.len()).prop_map(|i| Family::ALL[i])
}

fn solve(game: &Game, family: Family) -> Option<SolveOutcome> {
    let c = cfg();
    Some(match family {
        Family::C0Product | Family::PolyConvex => solvers::solve_greedy_c0(game),
        Family::WeightedSum => solvers::solve_weighted_sum(game),
        Family::MinConvexUniform => solvers::solve_min_convex_uniform(game),
        Family::MinLinear | Family::MinConcave | Family::MinPowerConcave => solvers::solve_min_concave(game, &c),
        Family::MaxConvex => solvers::solve_max_effort(game, &c).ok()?,
        Family::ConcaveGeneral => return None,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn welfare_identities(f in family(), n in 2usize..7, seed in 0u64..10_000) {
        let g = random_family(f, n, 0.6, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_profile(&g, &mut rng);
        let w = g.welfare(&p);
        prop_assert!(rel_eq(w, g.welfare_by_edges(&p)));
        prop_assert!(rel_eq(w, 2.0 * g.potential(&p)));
    }

    #[test]
    fn potential_tracks_unilateral_moves(f in family(), n in 2usize..7, seed in 0u64..10_000) {
        let g = random_family(f, n, 0.6, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let p = random_profile(&g, &mut rng);
        for v in 0..g.n() {
            let mut q = p.clone();
            q.set_strategy(&g, v, &random_strategy(&g, v, &mut rng));
            let dphi = g.potential(&q) - g.potential(&p);
            let du = g.utility(&q, v) - g.utility(&p, v);
            prop_assert!((dphi - du).abs() <= 1e-9 * g.potential(&p).abs().max(g.potential(&q).abs()).max(1.0));
        }
    }

    #[test]
    fn best_response_beats_sampled_strategies(f in family(), n in 2usize..6, seed in 0u64..10_000) {
        let g = random_family(f, n, 0.6, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb4);
        let p = random_profile(&g, &mut rng);
        for v in 0..g.n() {
            let br = best_response(&g, &p, v, &cfg());
            if !br.kind.is_exact() {
                continue;
            }
            let mut q = p.clone();
            br.apply(&g, &mut q);
            prop_assert!(q.total(&g, v) <= g.budget(v) * (1.0 + 1e-9));
            prop_assert!(rel_eq(g.utility(&q, v), br.value));
            for _ in 0..20 {
                let mut r = p.clone();
                r.set_strategy(&g, v, &random_strategy(&g, v, &mut rng));
                let u = g.utility(&r, v);
                prop_assert!(u <= br.value + 1e-9 * br.value.abs().max(1.0), "node {v}: sampled {u} > best {}", br.value);
            }
        }
    }

    #[test]
    fn solver_outputs_verify(f in family(), n in 2usize..8, seed in 0u64..10_000) {
        let g = random_family(f, n, 0.5, seed).unwrap();
        if let Some(out) = solve(&g, f) {
            if out.status == Status::Equilibrium {
                let p = out.profile.as_ref().unwrap();
                g.check_feasible(p, 1e-9).unwrap();
                let r = verify_pairwise(&g, p, &cfg());
                prop_assert!(r.is_stable(), "{}: {:?}", f.name(), r.witness);
                prop_assert!(rel_eq(out.welfare.unwrap(), g.welfare(p)));
            }
        }
    }

    #[test]
    fn witnesses_replay_with_positive_gains(f in family(), n in 2usize..6, seed in 0u64..10_000) {
        let g = random_family(f, n, 0.6, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x77);
        let p = random_profile(&g, &mut rng);
        if let Some(w) = verify_pairwise(&g, &p, &cfg()).witness {
            let q = w.apply(&g, &p);
            g.check_feasible(&q, 1e-9).unwrap();
            let gains = w.replay(&g, &p);
            prop_assert!(gains.iter().all(|&x| x > 0.0), "{gains:?}");
            for (a, b) in gains.iter().zip(&w.gains) {
                prop_assert!(rel_eq(*a, *b));
            }
        }
    }

    #[test]
    fn lattice_size_matches_count(f in family(), n in 1usize..6, g_res in 1u32..4, seed in 0u64..10_000) {
        let g = random_family(f, n, 0.5, seed).unwrap();
        let lat = Lattice::new(&g, g_res, u64::MAX).unwrap();
        prop_assert_eq!(lat.len() as f64, profile_count(&g, g_res));
        for v in 0..g.n() {
            for s in &lat.points[v] {
                prop_assert!(s.iter().sum::<f64>() <= g.budget(v) * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn same_seed_same_game(f in family(), n in 1usize..9, seed in any::<u64>()) {
        let a = random_family(f, n, 0.5, seed).unwrap();
        let b = random_family(f, n, 0.5, seed).unwrap();
        prop_assert_eq!(game_hash(&a), game_hash(&b));
    }
}

#[test]
fn edge_count_is_binomial() {
    // 28 pairs at density 0.5: mean 14, variance 7
    let counts: Vec<f64> = (0..100).map(|s| random_family(Family::C0Product, 8, 0.5, s).unwrap().m() as f64).collect();
    let mean = counts.iter().sum::<f64>() / 100.0;
    let sigma = 7f64.sqrt();
    assert!((mean - 14.0).abs() <= 3.0 * sigma / 10.0, "mean {mean}");
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / 99.0;
    assert!((3.0..=12.0).contains(&var), "variance {var}");
}
