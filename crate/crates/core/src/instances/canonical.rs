use crate::error::{Error, Result};
use crate::game::{Game, Profile};
use crate::reward::{Poly, RewardSpec};
use crate::scalar::ScalarFn;

pub struct Canonical {
    pub game: Game,
    /// Prescribed starting profile, where the example has one.
    pub start: Option<Profile>,
}

const NAMES: &[&str] = &[
    "triangle-noeq",
    "triangle-eq",
    "path-classC",
    "sqrt-triangle",
    "min-noeq",
    "min-linear-path",
    "min-convex-path",
    "max-effort-path",
    "noconverge",
    "concave-star",
    "five-cycle-product",
    "five-cycle-min-convex",
];

pub fn canonical_names() -> &'static [&'static str] {
    NAMES
}

fn ws(c: f64) -> RewardSpec {
    RewardSpec::WeightedSum { c }
}

fn wp(c: f64) -> RewardSpec {
    RewardSpec::WeightedProduct { c }
}

fn min(h: ScalarFn) -> RewardSpec {
    RewardSpec::MinEffort { h }
}

fn path(budgets: &[f64], rewards: Vec<RewardSpec>) -> Result<Game> {
    let mut b = Game::builder();
    for (i, &x) in budgets.iter().enumerate() {
        b.add_node(format!("u{}", i + 1), x);
    }
    for (i, r) in rewards.into_iter().enumerate() {
        b.add_edge(format!("e{}", i + 1), format!("u{}", i + 1), format!("u{}", i + 2), r);
    }
    b.build()
}

fn cycle(rewards: Vec<RewardSpec>) -> Result<Game> {
    let n = rewards.len();
    let mut b = Game::builder();
    for i in 0..n {
        b.add_node(format!("u{}", i + 1), 1.0);
    }
    for (i, r) in rewards.into_iter().enumerate() {
        b.add_edge(format!("e{}", i + 1), format!("u{}", i + 1), format!("u{}", (i + 1) % n + 1), r);
    }
    b.build()
}

/// Builds a named example; `eps` overrides the perturbation of the
/// families that have one.
pub fn canonical(name: &str, eps: Option<f64>) -> Result<Canonical> {
    let plain = |game: Game| Canonical { game, start: None };
    let eps_or = |d: f64| -> Result<f64> {
        let e = eps.unwrap_or(d);
        if e.is_finite() && e >= 0.0 {
            Ok(e)
        } else {
            Err(Error::InvalidArgument(format!("eps must be a nonnegative number, got {e}")))
        }
    };
    Ok(match name {
        "triangle-noeq" => plain(cycle(vec![ws(3.0), ws(3.0), ws(2.0)])?),
        "triangle-eq" => plain(cycle(vec![ws(3.0), ws(3.0), ws(1.0)])?),
        "path-classC" => {
            let e = eps_or(0.1)?;
            plain(path(&[1.0; 4], vec![wp(1.0), wp(1.0 + e), wp(1.0)])?)
        }
        "sqrt-triangle" => {
            let r = RewardSpec::PolyConvex { poly: Poly::product(1.0), outer: ScalarFn::power(1.0, 0.5) };
            plain(cycle(vec![r.clone(), r.clone(), r])?)
        }
        "min-noeq" => plain(
            Game::builder()
                .node("u", 2.0)
                .node("v", 2.0)
                .node("w", 2.0)
                .node("z", 1.0)
                .edge("uv", "u", "v", min(ScalarFn::power(2.0, 2.0)))
                .edge("vw", "v", "w", min(ScalarFn::linear(5.0)))
                .edge("wz", "w", "z", min(ScalarFn::linear(6.0)))
                .build()?,
        ),
        "min-linear-path" => plain(path(&[1.0; 4], vec![min(ScalarFn::linear(1.0)), min(ScalarFn::linear(1.1)), min(ScalarFn::linear(1.0))])?),
        "min-convex-path" => {
            let e = eps_or(0.1)?;
            plain(path(&[1.0; 4], vec![min(ScalarFn::linear(1.0)), min(ScalarFn::linear(1.0 + e)), min(ScalarFn::linear(1.0))])?)
        }
        "max-effort-path" => {
            let e = eps_or(0.01)?;
            let sq = |a: f64| RewardSpec::MaxEffort { h: ScalarFn::power(a, 2.0) };
            if e == 0.0 {
                return Err(Error::InvalidArgument("eps must be positive for max-effort-path".into()));
            }
            plain(path(&[0.0, 1.0, 1.0, 0.0], vec![sq(1.0), sq(1.0), sq(e)])?)
        }
        "noconverge" => {
            let mut b = Game::builder();
            for side in 1..=2 {
                for p in ["u", "v", "w", "z"] {
                    b.add_node(format!("{p}{side}"), 2.0);
                }
            }
            b.add_node("vc", 2.0);
            for side in 1..=2 {
                b.add_edge(format!("u{side}v{side}"), format!("u{side}"), format!("v{side}"), min(ScalarFn::power(2.0, 2.0)));
                b.add_edge(format!("v{side}w{side}"), format!("v{side}"), format!("w{side}"), min(ScalarFn::linear(5.0)));
                b.add_edge(format!("w{side}z{side}"), format!("w{side}"), format!("z{side}"), min(ScalarFn::linear(6.0)));
                b.add_edge(format!("z{side}vc"), format!("z{side}"), "vc", min(ScalarFn::linear(1000.0)));
            }
            let game = b.build()?;
            let hub: Vec<(usize, f64)> = ["z1vc", "z2vc"].iter().map(|id| (game.edge_idx(id).unwrap(), 1.0)).collect();
            let start = Profile::symmetric(&game, &hub);
            Canonical { game, start: Some(start) }
        }
        "concave-star" => plain(
            Game::builder()
                .node("v", 1.0)
                .node("u", 1.0)
                .node("w", 1.0)
                .edge("vu", "v", "u", min(ScalarFn::piecewise(&[(0.0, 0.0), (0.5, 1.5), (1.0, 2.0)])))
                .edge("vw", "v", "w", min(ScalarFn::linear(2.0)))
                .build()?,
        ),
        "five-cycle-product" => plain(cycle([5.0, 4.0, 3.0, 2.0, 1.0].map(wp).to_vec())?),
        "five-cycle-min-convex" => plain(cycle([5.0, 4.0, 3.0, 2.0, 1.0].map(|a| min(ScalarFn::power(a, 2.0))).to_vec())?),
        _ => {
            return Err(Error::InvalidArgument(format!("unknown instance '{name}'; known: {}", NAMES.join(", "))));
        }
    })
}
