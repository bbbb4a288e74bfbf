use serde_json::{json, Value};

use crate::equilibria::verify_pairwise;
use crate::error::{Error, Result};
use crate::game::{Game, Profile};
use crate::Config;

#[derive(Clone, Debug)]
pub struct DualCertificate {
    /// `None` marks an unbounded value at a zero-budget node.
    pub y: Vec<Option<f64>>,
    pub y_doubled: Vec<Option<f64>>,
    /// Welfare of the certified profile.
    pub primal: f64,
    /// `sum B_u y'_u`, an upper bound on the optimum.
    pub dual_value: f64,
    /// Edges with `max(y_u, y_v) < c_e - tol`.
    pub violations: Vec<usize>,
    /// Whether `y'_u + y'_v >= 2 c_e` holds on every edge.
    pub feasible: bool,
}

impl DualCertificate {
    pub fn to_json(&self, game: &Game) -> Value {
        let named = |ys: &[Option<f64>]| -> serde_json::Map<String, Value> {
            game.nodes().iter().zip(ys).map(|(n, y)| (n.id.clone(), y.map_or(json!("inf"), |v| json!(v)))).collect()
        };
        json!({
            "y": named(&self.y),
            "y_doubled": named(&self.y_doubled),
            "primal": self.primal,
            "dual_value": self.dual_value,
            "feasible": self.feasible,
            "violations": self.violations.iter().map(|&e| game.edge(e).id.clone()).collect::<Vec<_>>(),
        })
    }
}

/// Node prices certifying that a stable min-effort linear profile is within
/// a factor two of the optimum.
pub fn dual_certificate(game: &Game, p: &Profile, cfg: &Config) -> Result<DualCertificate> {
    let slopes: Vec<f64> = game
        .edges()
        .iter()
        .map(|e| e.reward.min_h().and_then(|h| h.linear_slope()))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::Unsupported("dual certificates need min_effort rewards with linear h".into()))?;
    game.check_feasible(p, cfg.tol)?;
    if !verify_pairwise(game, p, cfg).is_stable() {
        return Err(Error::Refused("profile is not pairwise stable".into()));
    }
    let y: Vec<Option<f64>> = (0..game.n())
        .map(|v| {
            let earned: f64 = game.incident(v).iter().map(|&e| slopes[e] * p.eff[e][0].min(p.eff[e][1])).sum();
            let b = game.budget(v);
            if b > 0.0 {
                Some(earned / b)
            } else if earned > 0.0 {
                None
            } else {
                Some(0.0)
            }
        })
        .collect();
    let big = |v: Option<f64>| v.unwrap_or(f64::INFINITY);
    let y_doubled: Vec<Option<f64>> = y.iter().map(|v| v.map(|x| 2.0 * x)).collect();
    let mut violations = Vec::new();
    let mut feasible = true;
    for (e, edge) in game.edges().iter().enumerate() {
        let c = slopes[e];
        if big(y[edge.u]).max(big(y[edge.v])) < c - cfg.tol {
            violations.push(e);
        }
        if big(y_doubled[edge.u]) + big(y_doubled[edge.v]) < 2.0 * c - cfg.tol {
            feasible = false;
        }
    }
    let dual_value = (0..game.n()).map(|v| if game.budget(v) > 0.0 { game.budget(v) * big(y_doubled[v]) } else { 0.0 }).sum();
    Ok(DualCertificate { y, y_doubled, primal: game.welfare(p), dual_value, violations, feasible })
}

#[derive(Clone, Copy, Debug)]
pub struct PoaRecord {
    pub ratio: f64,
    pub infinite: bool,
    pub equilibrium_welfare: f64,
    pub optimum_welfare: f64,
}

impl PoaRecord {
    pub fn to_json(&self) -> Value {
        json!({
            "ratio": if self.infinite { json!("inf") } else { json!(self.ratio) },
            "equilibrium_welfare": self.equilibrium_welfare,
            "optimum_welfare": self.optimum_welfare,
        })
    }
}

/// `w(opt) / w(eq)`; the equilibrium is verified first unless `force`.
pub fn price_of_anarchy(game: &Game, eq: &Profile, optimum_welfare: f64, cfg: &Config, force: bool) -> Result<PoaRecord> {
    game.check_feasible(eq, cfg.tol)?;
    if !force && !verify_pairwise(game, eq, cfg).is_stable() {
        return Err(Error::Refused("equilibrium profile failed pairwise verification".into()));
    }
    let w = game.welfare(eq);
    let (ratio, infinite) = if w > 0.0 {
        (optimum_welfare / w, false)
    } else if optimum_welfare > 0.0 {
        (f64::INFINITY, true)
    } else {
        (1.0, false)
    };
    Ok(PoaRecord { ratio, infinite, equilibrium_welfare: w, optimum_welfare })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reward::RewardSpec;
    use crate::scalar::ScalarFn;
    use crate::solvers::{social_optimum, OptMethod};

    fn min_linear_path() -> Game {
        let m = |a: f64| RewardSpec::MinEffort { h: ScalarFn::Linear { a } };
        Game::builder()
            .node("a", 1.0)
            .node("b", 1.0)
            .node("c", 1.0)
            .node("d", 1.0)
            .edge("e1", "a", "b", m(1.0))
            .edge("e2", "b", "c", m(1.1))
            .edge("e3", "c", "d", m(1.0))
            .build()
            .unwrap()
    }

    #[test]
    fn middle_edge_certificate() {
        let g = min_linear_path();
        let cfg = Config::default();
        let s = Profile::symmetric(&g, &[(1, 1.0)]);
        let cert = dual_certificate(&g, &s, &cfg).unwrap();
        let y: Vec<f64> = cert.y.iter().map(|v| v.unwrap()).collect();
        assert_eq!(y, vec![0.0, 1.1, 1.1, 0.0]);
        assert!((cert.dual_value - 4.4).abs() < 1e-12);
        assert!(cert.feasible && cert.violations.is_empty());
        let opt = social_optimum(&g, OptMethod::Lp, &cfg).unwrap();
        assert!(cert.dual_value >= opt.welfare);
        let poa = price_of_anarchy(&g, &s, opt.welfare, &cfg, false).unwrap();
        assert!((poa.ratio - 4.0 / 2.2).abs() < 1e-12);
    }

    #[test]
    fn unstable_profile_is_refused() {
        let g = min_linear_path();
        let z = Profile::zeros(&g);
        assert!(matches!(dual_certificate(&g, &z, &Config::default()), Err(Error::Refused(_))));
        assert!(price_of_anarchy(&g, &z, 4.0, &Config::default(), false).is_err());
        let forced = price_of_anarchy(&g, &z, 4.0, &Config::default(), true).unwrap();
        assert!(forced.infinite);
    }

    #[test]
    fn zero_over_zero_is_one() {
        let g = Game::builder().node("a", 0.0).build().unwrap();
        let z = Profile::zeros(&g);
        assert_eq!(price_of_anarchy(&g, &z, 0.0, &Config::default(), false).unwrap().ratio, 1.0);
    }
}
