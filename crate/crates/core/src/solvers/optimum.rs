use rayon::prelude::*;
use rustworkx_core::max_weight_matching::max_weight_matching;
use rustworkx_core::petgraph::graph::UnGraph;
use serde::Serialize;
use serde_json::{json, Value};

use super::simplex;
use crate::error::{Error, Result};
use crate::game::{Game, Profile};
use crate::io::profile_to_value;
use crate::reward::RewardSpec;
use crate::scalar::ScalarFn;
use crate::{oracle, Config};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptMethod {
    /// Maximum-weight matching with weights `f_e(B_u, B_v)`.
    TightMatching,
    /// Linear program over symmetric contributions of min-effort edges.
    Lp,
    /// Exhaustive lattice search.
    Grid,
    /// Every node on its best weighted-sum edge.
    Separable,
    /// Conditional gradient ascent for jointly concave rewards.
    Ascent,
    /// Best union of matched edges and half-budget odd cycles.
    HalfIntegral,
    /// Enumeration of single-edge strategies for jointly convex rewards.
    VertexEnum,
}

impl OptMethod {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "tight-matching" => OptMethod::TightMatching,
            "lp" => OptMethod::Lp,
            "grid" => OptMethod::Grid,
            "separable" => OptMethod::Separable,
            "ascent" => OptMethod::Ascent,
            "half-integral" => OptMethod::HalfIntegral,
            "vertex-enum" => OptMethod::VertexEnum,
            _ => return None,
        })
    }

    /// Exact method for the game's class, if any.
    pub fn for_game(game: &Game) -> Option<Self> {
        if game.all_rewards(|r| r.is_weighted_sum()) {
            Some(OptMethod::Separable)
        } else if game.all_rewards(|r| r.in_c0()) {
            Some(OptMethod::TightMatching)
        } else if game.all_rewards(|r| r.min_h().is_some_and(|h| lp_segments(h).is_some())) {
            Some(OptMethod::Lp)
        } else if game.uniform_budgets() && game.all_rewards(|r| r.min_h().is_some_and(|h| h.shape().is_convex())) {
            Some(OptMethod::HalfIntegral)
        } else if game.all_rewards(|r| r.max_h().is_some_and(|h| h.shape().is_convex())) {
            Some(OptMethod::VertexEnum)
        } else if game.all_rewards(smooth_concave) {
            Some(OptMethod::Ascent)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug)]
pub struct Optimum {
    pub profile: Profile,
    pub welfare: f64,
    pub method: OptMethod,
    /// Proven upper bound on the optimum; equals `welfare` for exact methods.
    pub upper_bound: f64,
    /// Lattice resolution for grid optima.
    pub resolution: Option<u32>,
}

impl Optimum {
    pub fn is_exact(&self) -> bool {
        self.upper_bound == self.welfare && self.method != OptMethod::Grid
    }

    pub fn to_json(&self, game: &Game) -> Value {
        let mut v = json!({
            "method": self.method,
            "welfare": self.welfare,
            "upper_bound": self.upper_bound,
            "profile": profile_to_value(game, &self.profile),
        });
        if let Some(g) = self.resolution {
            v.as_object_mut().unwrap().insert("resolution".into(), json!(g));
        }
        v
    }
}

fn exact(game: &Game, profile: Profile, method: OptMethod) -> Optimum {
    let welfare = game.welfare(&profile);
    Optimum { profile, welfare, method, upper_bound: welfare, resolution: None }
}

fn mismatch(method: &str, need: &str) -> Error {
    Error::Unsupported(format!("optimum method {method} needs {need}"))
}

pub fn social_optimum(game: &Game, method: OptMethod, cfg: &Config) -> Result<Optimum> {
    match method {
        OptMethod::TightMatching => tight_matching(game),
        OptMethod::Lp => lp(game),
        OptMethod::Grid => {
            let (profile, welfare) = oracle::grid_optimum(game, cfg.grid, cfg.grid_cap)?;
            Ok(Optimum { profile, welfare, method, upper_bound: f64::INFINITY, resolution: Some(cfg.grid) })
        }
        OptMethod::Separable => separable(game),
        OptMethod::Ascent => ascent(game),
        OptMethod::HalfIntegral => half_integral(game),
        OptMethod::VertexEnum => vertex_enum(game, cfg),
    }
}

fn tight_matching(game: &Game) -> Result<Optimum> {
    if !game.all_rewards(|r| r.in_c0()) {
        return Err(mismatch("tight-matching", "coordinate-convex rewards vanishing on the axes"));
    }
    // integer weights keep the blossom exact
    let c: Vec<f64> = (0..game.m()).map(|e| game.max_reward(e)).collect();
    let top = c.iter().fold(0.0f64, |a, &b| a.max(b));
    let scale = if top > 0.0 { 1e15 / top / (game.m() as f64).max(1.0) } else { 1.0 };
    let mut graph: UnGraph<(), usize> = UnGraph::default();
    let idx: Vec<_> = (0..game.n()).map(|_| graph.add_node(())).collect();
    for (e, edge) in game.edges().iter().enumerate() {
        graph.add_edge(idx[edge.u], idx[edge.v], e);
    }
    let matching = max_weight_matching(&graph, false, |er| Ok::<i128, Error>((c[*er.weight()] * scale).round() as i128), false)?;
    let mut p = Profile::zeros(game);
    for (a, b) in matching {
        let e = game.edge_between(a, b).expect("matched pair is adjacent");
        let edge = game.edge(e);
        p.eff[e] = [game.budget(edge.u), game.budget(edge.v)];
    }
    Ok(exact(game, p, OptMethod::TightMatching))
}

/// Concave piecewise-linear pieces `(slope, length)` of `h`; the final
/// piece is unbounded.
fn lp_segments(h: &ScalarFn) -> Option<Vec<(f64, f64)>> {
    match h {
        ScalarFn::Linear { a } => Some(vec![(*a, f64::INFINITY)]),
        ScalarFn::Power { a, k, cap } if *k == 1.0 => Some(vec![(*a, cap.unwrap_or(f64::INFINITY))]),
        ScalarFn::PiecewiseLinear { points } if h.shape().is_concave() => {
            let mut segs: Vec<(f64, f64)> = points
                .windows(2)
                .map(|w| ((w[1][1] - w[0][1]) / (w[1][0] - w[0][0]), w[1][0] - w[0][0]))
                .collect();
            segs.last_mut().unwrap().1 = f64::INFINITY;
            Some(segs)
        }
        _ => None,
    }
}

fn lp(game: &Game) -> Result<Optimum> {
    let segs: Vec<Vec<(f64, f64)>> = game
        .edges()
        .iter()
        .map(|e| e.reward.min_h().and_then(lp_segments))
        .collect::<Option<_>>()
        .ok_or_else(|| mismatch("lp", "min_effort rewards with linear or concave piecewise-linear h"))?;
    let mut owner = Vec::new();
    let mut c = Vec::new();
    for (e, s) in segs.iter().enumerate() {
        for &(slope, _) in s {
            owner.push(e);
            c.push(2.0 * slope);
        }
    }
    let mut a = Vec::new();
    let mut b = Vec::new();
    for v in 0..game.n() {
        a.push(owner.iter().map(|&e| if game.edge(e).endpoints().contains(&v) { 1.0 } else { 0.0 }).collect());
        b.push(game.budget(v));
    }
    let mut col = 0;
    for s in &segs {
        for &(_, len) in s {
            if len.is_finite() {
                let mut row = vec![0.0; c.len()];
                row[col] = 1.0;
                a.push(row);
                b.push(len);
            }
            col += 1;
        }
    }
    let sol = simplex::maximize(&c, &a, &b)?;
    let mut x = vec![0.0; game.m()];
    for (j, &e) in owner.iter().enumerate() {
        x[e] += sol.x[j];
    }
    let pairs: Vec<(usize, f64)> = x.into_iter().enumerate().collect();
    Ok(exact(game, Profile::symmetric(game, &pairs), OptMethod::Lp))
}

fn separable(game: &Game) -> Result<Optimum> {
    if !game.all_rewards(|r| r.is_weighted_sum()) {
        return Err(mismatch("separable", "weighted_sum rewards"));
    }
    let mut p = Profile::zeros(game);
    for v in 0..game.n() {
        let best = game.incident(v).iter().copied().fold(None, |acc: Option<usize>, e| match acc {
            Some(f) if game.edge(f).reward.eval(1.0, 0.0) >= game.edge(e).reward.eval(1.0, 0.0) => Some(f),
            _ => Some(e),
        });
        if let Some(e) = best {
            p.set(game, v, e, game.budget(v));
        }
    }
    Ok(exact(game, p, OptMethod::Separable))
}

fn half_integral(game: &Game) -> Result<Optimum> {
    let n = game.n();
    if !(game.uniform_budgets() && game.all_rewards(|r| r.min_h().is_some_and(|h| h.shape().is_convex()))) {
        return Err(mismatch("half-integral", "uniform budgets and min_effort rewards with convex h"));
    }
    if n > 16 {
        return Err(Error::Unsupported(format!("half-integral optimum is limited to 16 nodes, got {n}")));
    }
    let b = if n > 0 { game.budget(0) } else { 0.0 };
    let h = |e: usize, x: f64| game.edge(e).reward.min_h().unwrap().eval(x);
    // (node mask, edges, value) for every simple odd cycle
    let mut cycles: Vec<(u32, Vec<usize>, f64)> = Vec::new();
    for s in 0..n {
        let mut path = vec![s];
        let mut edges = Vec::new();
        odd_cycles(game, s, &mut path, &mut edges, &mut cycles, &|es: &[usize]| es.iter().map(|&e| 2.0 * h(e, b / 2.0)).sum());
    }
    let full = 1usize << n;
    let mut best = vec![0.0f64; full];
    let mut choice: Vec<Option<Vec<usize>>> = vec![None; full];
    // best[mask] is the optimum using only nodes outside mask
    for mask in (0..full).rev() {
        let Some(i) = (0..n).find(|&i| mask & (1 << i) == 0) else { continue };
        let with_i = mask | (1 << i);
        let (mut val, mut pick) = (best[with_i], None);
        for &e in game.incident(i) {
            let j = game.edge(e).other(i);
            if mask & (1 << j) == 0 {
                let cand = 2.0 * h(e, b) + best[with_i | (1 << j)];
                if cand > val {
                    val = cand;
                    pick = Some(vec![e]);
                }
            }
        }
        for (cm, es, cv) in &cycles {
            if cm & (1 << i) != 0 && (*cm as usize) & mask == 0 {
                let cand = cv + best[mask | *cm as usize];
                if cand > val {
                    val = cand;
                    pick = Some(es.clone());
                }
            }
        }
        best[mask] = val;
        choice[mask] = pick;
    }
    let mut p = Profile::zeros(game);
    let mut mask = 0usize;
    while let Some(i) = (0..n).find(|&i| mask & (1 << i) == 0) {
        match &choice[mask] {
            None => mask |= 1 << i,
            Some(es) => {
                let x = if es.len() == 1 { b } else { b / 2.0 };
                for &e in es {
                    p.eff[e] = [x, x];
                    let edge = game.edge(e);
                    mask |= (1 << edge.u) | (1 << edge.v);
                }
            }
        }
    }
    Ok(exact(game, p, OptMethod::HalfIntegral))
}

/// Simple odd cycles whose smallest node is `path[0]`.
fn odd_cycles(
    game: &Game,
    s: usize,
    path: &mut Vec<usize>,
    edges: &mut Vec<usize>,
    out: &mut Vec<(u32, Vec<usize>, f64)>,
    value: &dyn Fn(&[usize]) -> f64,
) {
    let last = *path.last().unwrap();
    for &e in game.incident(last) {
        let w = game.edge(e).other(last);
        if w == s && path.len() >= 3 && path.len() % 2 == 1 && path[1] < last {
            edges.push(e);
            let mask = path.iter().fold(0u32, |m, &v| m | (1 << v));
            out.push((mask, edges.clone(), value(edges)));
            edges.pop();
        } else if w > s && !path.contains(&w) {
            path.push(w);
            edges.push(e);
            odd_cycles(game, s, path, edges, out, value);
            edges.pop();
            path.pop();
        }
    }
}

fn vertex_enum(game: &Game, cfg: &Config) -> Result<Optimum> {
    if !game.all_rewards(|r| r.max_h().is_some_and(|h| h.shape().is_convex())) {
        return Err(mismatch("vertex-enum", "max_effort rewards with convex h"));
    }
    let choices: Vec<Vec<usize>> = (0..game.n())
        .map(|v| if game.budget(v) > 0.0 { game.incident(v).to_vec() } else { Vec::new() })
        .collect();
    let count: f64 = choices.iter().map(|c| c.len().max(1) as f64).product();
    if count > cfg.grid_cap as f64 {
        return Err(Error::GridCap { required: count, cap: cfg.grid_cap });
    }
    let build = |mut k: usize| {
        let mut p = Profile::zeros(game);
        for (v, c) in choices.iter().enumerate() {
            if !c.is_empty() {
                p.set(game, v, c[k % c.len()], game.budget(v));
                k /= c.len();
            }
        }
        p
    };
    let (_, k) = (0..count as usize)
        .into_par_iter()
        .map(|k| (game.welfare(&build(k)), k))
        .reduce(|| (f64::NEG_INFINITY, usize::MAX), |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
    Ok(exact(game, build(k), OptMethod::VertexEnum))
}

/// Weighted sums and `a (c x y)^k` with `k <= 1/2`.
fn smooth_concave(r: &RewardSpec) -> bool {
    match r {
        RewardSpec::WeightedSum { .. } => true,
        RewardSpec::PolyConvex { poly, outer: ScalarFn::Power { k, .. } } => {
            *k <= 0.5 && poly.0.len() == 1 && poly.0[0].0 == 1 && poly.0[0].1 == 1
        }
        _ => false,
    }
}

const ASCENT_ITERS: usize = 20_000;
const GRAD_CLAMP: f64 = 1e12;

/// Conditional gradient on the product of budget simplices; the duality gap
/// of the last iterate bounds the optimum from above.
fn ascent(game: &Game) -> Result<Optimum> {
    if !game.all_rewards(smooth_concave) {
        return Err(mismatch("ascent", "weighted_sum or square-root-type product rewards"));
    }
    let mut p = Profile::zeros(game);
    for v in 0..game.n() {
        let d = game.degree(v);
        for &e in game.incident(v) {
            p.set(game, v, e, game.budget(v) / d as f64);
        }
    }
    let grad = |p: &Profile, v: usize, e: usize| {
        let edge = game.edge(e);
        let (x, y) = (p.get(game, v, e), p.partner(game, v, e));
        let d = 2.0 * edge.reward.dx_right(x, y);
        if d.is_finite() { d.min(GRAD_CLAMP) } else { GRAD_CLAMP }
    };
    let mut w = game.welfare(&p);
    let mut gap = f64::INFINITY;
    for _ in 0..ASCENT_ITERS {
        let mut target = Profile::zeros(game);
        gap = 0.0;
        for v in 0..game.n() {
            let best = game.incident(v).iter().map(|&e| (grad(&p, v, e), e)).fold((0.0, None), |a, (g, e)| if g > a.0 { (g, Some(e)) } else { a });
            if let (g, Some(e)) = best {
                target.set(game, v, e, game.budget(v));
                gap += g * game.budget(v);
            }
            for &e in game.incident(v) {
                gap -= grad(&p, v, e) * p.get(game, v, e);
            }
        }
        if gap <= 1e-10 * w.abs().max(1.0) {
            break;
        }
        let mix = |t: f64| {
            let mut q = p.clone();
            for (a, b) in q.eff.iter_mut().zip(&target.eff) {
                a[0] += t * (b[0] - a[0]);
                a[1] += t * (b[1] - a[1]);
            }
            q
        };
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..80 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if game.welfare(&mix(m1)) < game.welfare(&mix(m2)) {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        let q = mix(0.5 * (lo + hi));
        let wq = game.welfare(&q);
        if wq <= w {
            break;
        }
        p = q;
        w = wq;
    }
    Ok(Optimum { profile: p, welfare: w, method: OptMethod::Ascent, upper_bound: w + gap.max(0.0), resolution: None })
}
