use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::game::Game;
use crate::reward::{Poly, RewardSpec};
use crate::scalar::ScalarFn;

/// Reward classes produced by [`random_family`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    C0Product,
    PolyConvex,
    WeightedSum,
    MinLinear,
    MinConvexUniform,
    MinConcave,
    MinPowerConcave,
    MaxConvex,
    ConcaveGeneral,
}

impl Family {
    pub const ALL: [Family; 9] = [
        Family::C0Product,
        Family::PolyConvex,
        Family::WeightedSum,
        Family::MinLinear,
        Family::MinConvexUniform,
        Family::MinConcave,
        Family::MinPowerConcave,
        Family::MaxConvex,
        Family::ConcaveGeneral,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::C0Product => "c0-product",
            Family::PolyConvex => "poly-convex",
            Family::WeightedSum => "weighted-sum",
            Family::MinLinear => "min-linear",
            Family::MinConvexUniform => "min-convex-uniform",
            Family::MinConcave => "min-concave",
            Family::MinPowerConcave => "min-power-concave",
            Family::MaxConvex => "max-convex",
            Family::ConcaveGeneral => "concave-general",
        }
    }

    pub fn parse(s: &str) -> Result<Family> {
        Family::ALL.into_iter().find(|f| f.name() == s).ok_or_else(|| {
            let known: Vec<&str> = Family::ALL.iter().map(|f| f.name()).collect();
            Error::InvalidArgument(format!("unknown family '{s}'; known: {}", known.join(", ")))
        })
    }
}

fn log_uniform(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(0.1f64.ln()..10.0f64.ln()).exp()
}

fn reward(family: Family, rng: &mut ChaCha8Rng) -> Result<RewardSpec> {
    let c = log_uniform(rng);
    Ok(match family {
        Family::C0Product => RewardSpec::WeightedProduct { c },
        Family::PolyConvex => {
            let c2 = log_uniform(rng);
            let poly = Poly::new(vec![(1, 1, c), (2, 1, c2), (1, 2, c2)])?;
            RewardSpec::PolyConvex { poly, outer: ScalarFn::power(1.0, rng.random_range(1.0..2.0)) }
        }
        Family::WeightedSum => RewardSpec::WeightedSum { c },
        Family::MinLinear => RewardSpec::MinEffort { h: ScalarFn::linear(c) },
        Family::MinConvexUniform => RewardSpec::MinEffort { h: ScalarFn::power(c, rng.random_range(1.5..3.0)) },
        Family::MinConcave => {
            let pieces = rng.random_range(2..=4);
            let mut slopes: Vec<f64> = (0..pieces).map(|_| log_uniform(rng)).collect();
            slopes.sort_by(|a, b| b.total_cmp(a));
            slopes.dedup();
            let mut pts = vec![(0.0, 0.0)];
            for s in slopes {
                let (x, y) = *pts.last().unwrap();
                let dx = rng.random_range(0.2..1.0);
                pts.push((x + dx, y + s * dx));
            }
            RewardSpec::MinEffort { h: ScalarFn::piecewise(&pts) }
        }
        Family::MinPowerConcave => RewardSpec::MinEffort { h: ScalarFn::power(c, rng.random_range(0.3..0.8)) },
        Family::MaxConvex => RewardSpec::MaxEffort { h: ScalarFn::power(c, rng.random_range(1.0..3.0)) },
        Family::ConcaveGeneral => {
            if rng.random_bool(0.5) {
                RewardSpec::WeightedSum { c }
            } else {
                RewardSpec::PolyConvex { poly: Poly::product(c), outer: ScalarFn::power(1.0, 0.5) }
            }
        }
    })
}

/// Seeded Erdos-Renyi instance: each node pair is an edge with probability
/// `density`; budgets are uniform on `[0.5, 2]` (all `1` for the uniform
/// family) and constants log-uniform on `[0.1, 10]`.
pub fn random_family(family: Family, n: usize, density: f64, seed: u64) -> Result<Game> {
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::InvalidArgument(format!("density must lie in [0, 1], got {density}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = Game::builder();
    for i in 0..n {
        let budget = if family == Family::MinConvexUniform { 1.0 } else { rng.random_range(0.5..=2.0) };
        b.add_node(format!("n{i}"), budget);
    }
    let mut j = 0;
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(density) {
                b.add_edge(format!("e{j}"), format!("n{u}"), format!("n{v}"), reward(family, &mut rng)?);
                j += 1;
            }
        }
    }
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::game_hash;

    #[test]
    fn same_seed_same_game() {
        for f in Family::ALL {
            let a = random_family(f, 6, 0.5, 7).unwrap();
            let b = random_family(f, 6, 0.5, 7).unwrap();
            assert_eq!(game_hash(&a), game_hash(&b), "{}", f.name());
            assert_eq!(Family::parse(f.name()).unwrap(), f);
        }
    }

    #[test]
    fn classes_hold() {
        for seed in 0..10 {
            let g = random_family(Family::C0Product, 5, 0.6, seed).unwrap();
            assert!(g.all_rewards(|r| r.in_c0()));
            let g = random_family(Family::PolyConvex, 5, 0.6, seed).unwrap();
            assert!(g.all_rewards(|r| r.in_c0()));
            let g = random_family(Family::MinConcave, 5, 0.6, seed).unwrap();
            assert!(g.all_rewards(|r| r.min_h().is_some_and(|h| h.shape().is_concave())));
            let g = random_family(Family::MinConvexUniform, 5, 0.6, seed).unwrap();
            assert!(g.uniform_budgets());
            let g = random_family(Family::ConcaveGeneral, 5, 0.6, seed).unwrap();
            assert!(g.all_rewards(|r| r.coordinate_concave()));
        }
    }
}
