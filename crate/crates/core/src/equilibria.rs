//! Stability verification, approximation factors, tightness labels and
//! slack elimination.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::allocation::{best_response, composition_count, for_each_composition, maximize, BrKind, EngineOpts, Term};
use crate::error::{Error, Result};
use crate::game::{Game, Profile};
use crate::reward::RewardSpec;
use crate::Config;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Stable,
    UnilateralDeviation,
    BilateralDeviation,
    StableAtResolution,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ExactClass,
    ParametricScan,
    Grid,
}

/// A replayable deviation: new strategies for one or two nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub nodes: Vec<usize>,
    /// Full strategy of each deviator over its incident edges.
    pub strategies: Vec<Vec<(usize, f64)>>,
    pub gains: Vec<f64>,
    pub edge: Option<usize>,
}

impl Witness {
    pub fn apply(&self, game: &Game, p: &Profile) -> Profile {
        let mut q = p.clone();
        for (&v, s) in self.nodes.iter().zip(&self.strategies) {
            for &(e, x) in s {
                q.set(game, v, e, x);
            }
        }
        q
    }

    /// Utility gains observed when the witness is applied to `p`.
    pub fn replay(&self, game: &Game, p: &Profile) -> Vec<f64> {
        let q = self.apply(game, p);
        self.nodes.iter().map(|&v| game.utility(&q, v) - game.utility(p, v)).collect()
    }

    pub fn to_json(&self, game: &Game) -> Value {
        let strategies: Vec<Value> = self
            .nodes
            .iter()
            .zip(&self.strategies)
            .map(|(&v, s)| {
                let mut m = serde_json::Map::new();
                for &(e, x) in s {
                    m.insert(game.edge(e).id.clone(), json!(x));
                }
                json!({ "node": game.node(v).id, "strategy": m })
            })
            .collect();
        json!({
            "nodes": self.nodes.iter().map(|&v| game.node(v).id.clone()).collect::<Vec<_>>(),
            "edge": self.edge.map(|e| game.edge(e).id.clone()),
            "strategies": strategies,
            "gains": self.gains,
        })
    }
}

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub verdict: Verdict,
    pub witness: Option<Witness>,
    pub method: Method,
    pub resolution: Option<u32>,
}

impl VerifyReport {
    /// No improving deviation was found.
    pub fn is_stable(&self) -> bool {
        matches!(self.verdict, Verdict::Stable | Verdict::StableAtResolution)
    }

    pub fn to_json(&self, game: &Game) -> Value {
        json!({
            "verdict": self.verdict,
            "method": self.method,
            "resolution": self.resolution,
            "witness": self.witness.as_ref().map(|w| w.to_json(game)),
        })
    }
}

/// Strict improvement threshold, relative for large utilities.
pub(crate) fn improves(gain: f64, base: f64, tol: f64) -> bool {
    gain > tol * base.abs().max(1.0)
}

fn to_pairs(game: &Game, v: usize, xs: &[f64]) -> Vec<(usize, f64)> {
    game.incident(v).iter().copied().zip(xs.iter().copied()).collect()
}

/// Applies the strategies and keeps the witness only if every deviator
/// strictly gains on replay.
pub(crate) fn confirm(game: &Game, p: &Profile, nodes: &[usize], strategies: &[Vec<f64>], edge: Option<usize>, tol: f64) -> Option<Witness> {
    let w = Witness {
        nodes: nodes.to_vec(),
        strategies: nodes.iter().zip(strategies).map(|(&v, s)| to_pairs(game, v, s)).collect(),
        gains: Vec::new(),
        edge,
    };
    let gains = w.replay(game, p);
    let ok = nodes.iter().zip(&gains).all(|(&v, &g)| improves(g, game.utility(p, v), tol));
    ok.then_some(Witness { gains, ..w })
}

pub fn verify_nash(game: &Game, p: &Profile, cfg: &Config) -> VerifyReport {
    let brs: Vec<_> = (0..game.n()).into_par_iter().map(|v| best_response(game, p, v, cfg)).collect();
    let grid = brs.iter().any(|b| b.kind == BrKind::GridApproximate);
    let mut best: Option<(f64, usize)> = None;
    for br in &brs {
        let gain = br.value - game.utility(p, br.node);
        if improves(gain, game.utility(p, br.node), cfg.tol) && best.is_none_or(|b| gain > b.0) {
            best = Some((gain, br.node));
        }
    }
    let method = if grid { Method::Grid } else { Method::ExactClass };
    let resolution = grid.then_some(cfg.grid);
    if let Some((_, v)) = best {
        let xs: Vec<f64> = brs[v].allocation.iter().map(|a| a.1).collect();
        if let Some(w) = confirm(game, p, &[v], &[xs], None, cfg.tol) {
            return VerifyReport { verdict: Verdict::UnilateralDeviation, witness: Some(w), method, resolution };
        }
    }
    let verdict = if grid { Verdict::StableAtResolution } else { Verdict::Stable };
    VerifyReport { verdict, witness: None, method, resolution }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum EdgeClass {
    MaxOnly,
    WeightedSum,
    ClassC,
    MinEffort,
    General,
}

fn edge_class(game: &Game, e: usize) -> EdgeClass {
    let edge = game.edge(e);
    let around: Vec<&RewardSpec> = [edge.u, edge.v]
        .iter()
        .flat_map(|&x| game.incident(x).iter().map(|&f| &game.edge(f).reward))
        .collect();
    if around.iter().all(|r| r.max_h().is_some()) {
        EdgeClass::MaxOnly
    } else if around.iter().all(|r| r.is_weighted_sum()) {
        EdgeClass::WeightedSum
    } else if around.iter().all(|r| r.in_c()) {
        EdgeClass::ClassC
    } else if around.iter().all(|r| r.min_h().is_some()) {
        EdgeClass::MinEffort
    } else {
        EdgeClass::General
    }
}

pub fn verify_pairwise(game: &Game, p: &Profile, cfg: &Config) -> VerifyReport {
    let nash = verify_nash(game, p, cfg);
    if !nash.is_stable() {
        return nash;
    }
    let results: Vec<(Option<Witness>, Method)> = (0..game.m())
        .into_par_iter()
        .map(|e| match edge_class(game, e) {
            EdgeClass::MaxOnly => (None, Method::ExactClass),
            EdgeClass::WeightedSum => (weighted_sum_deviation(game, p, e, cfg), Method::ExactClass),
            EdgeClass::ClassC => (best_confirmed(game, p, e, &class_c_pairs(game, p, e, cfg), cfg), Method::ExactClass),
            EdgeClass::MinEffort => (best_confirmed(game, p, e, &min_effort_pairs(game, p, e, cfg), cfg), Method::ParametricScan),
            EdgeClass::General => (grid_deviation(game, p, e, cfg), Method::Grid),
        })
        .collect();
    let method = results.iter().map(|r| r.1).chain([nash.method]).max().unwrap_or(Method::ExactClass);
    let resolution = (method == Method::Grid).then_some(cfg.grid);
    if let Some(w) = results.into_iter().find_map(|r| r.0) {
        return VerifyReport { verdict: Verdict::BilateralDeviation, witness: Some(w), method, resolution };
    }
    let verdict = if method == Method::Grid { Verdict::StableAtResolution } else { Verdict::Stable };
    VerifyReport { verdict, witness: None, method, resolution }
}

type Pair = (Vec<f64>, Vec<f64>);

/// Among candidate strategy pairs for the endpoints of `e`, the one whose
/// smaller gain is largest, if it improves both.
fn best_confirmed(game: &Game, p: &Profile, e: usize, pairs: &[Pair], cfg: &Config) -> Option<Witness> {
    let (u, v) = (game.edge(e).u, game.edge(e).v);
    let (wu, wv) = (game.utility(p, u), game.utility(p, v));
    let mut best: Option<(f64, usize)> = None;
    let mut q = p.clone();
    for (i, (su, sv)) in pairs.iter().enumerate() {
        q.set_strategy(game, u, su);
        q.set_strategy(game, v, sv);
        let (gu, gv) = (game.utility(&q, u) - wu, game.utility(&q, v) - wv);
        if improves(gu, wu, cfg.tol) && improves(gv, wv, cfg.tol) {
            let m = gu.min(gv);
            if best.is_none_or(|b| m > b.0) {
                best = Some((m, i));
            }
        }
        q.set_strategy(game, u, &p.strategy(game, u));
        q.set_strategy(game, v, &p.strategy(game, v));
    }
    let (_, i) = best?;
    confirm(game, p, &[u, v], &[pairs[i].0.clone(), pairs[i].1.clone()], Some(e), cfg.tol)
}

/// Closed-form test for linear rewards: small joint additions with ratio
/// `r = eps2 / eps1` improve both iff `(k_u - c_e)(k_v - c_e) < c_e^2`,
/// where `k` is the marginal cost of freeing effort.
fn weighted_sum_deviation(game: &Game, p: &Profile, e: usize, cfg: &Config) -> Option<Witness> {
    let edge = game.edge(e);
    let ce = match edge.reward {
        RewardSpec::WeightedSum { c } => c,
        _ => return None,
    };
    let side = |x: usize| -> Option<(f64, f64)> {
        let room = game.budget(x) - p.get(game, x, e);
        if room <= cfg.tol {
            return None;
        }
        let unused = game.budget(x) - p.total(game, x);
        if unused > cfg.tol {
            return Some((0.0, unused));
        }
        let slope = |f: usize| match game.edge(f).reward {
            RewardSpec::WeightedSum { c } => c,
            _ => f64::INFINITY,
        };
        let placed: Vec<usize> = game.incident(x).iter().copied().filter(|&f| f != e && p.get(game, x, f) > 0.0).collect();
        let k = placed.iter().map(|&f| slope(f)).fold(f64::INFINITY, f64::min);
        let amount: f64 = placed.iter().filter(|&&f| slope(f) <= k).map(|&f| p.get(game, x, f)).sum();
        Some((k, amount))
    };
    let (ku, au) = side(edge.u)?;
    let (kv, av) = side(edge.v)?;
    let (a, b) = ((ku - ce).max(0.0), (kv - ce).max(0.0));
    if a * b >= ce * ce {
        return None;
    }
    // a / c_e < r < c_e / b
    let r = if a > 0.0 && b > 0.0 {
        (a / b).sqrt()
    } else if a > 0.0 {
        2.0 * a / ce
    } else if b > 0.0 {
        ce / (2.0 * b)
    } else {
        1.0
    };
    let eps1 = au.min(av / r);
    let eps2 = r * eps1;
    let shift = |x: usize, k: f64, eps: f64| -> Vec<f64> {
        let mut s = p.strategy(game, x);
        let unused = game.budget(x) - p.total(game, x);
        let mut need = eps;
        if k > 0.0 {
            for (i, &f) in game.incident(x).iter().enumerate() {
                let is_tier = f != e && matches!(game.edge(f).reward, RewardSpec::WeightedSum { c } if c <= k);
                if is_tier && need > 0.0 {
                    let take = s[i].min(need);
                    s[i] -= take;
                    need -= take;
                }
            }
        } else {
            need = (need - unused).max(0.0);
        }
        let i = game.incident(x).iter().position(|&f| f == e).unwrap();
        s[i] += eps - need;
        s
    };
    let su = shift(edge.u, ku, eps1);
    let sv = shift(edge.v, kv, eps2);
    confirm(game, p, &[edge.u, edge.v], &[su, sv], Some(e), cfg.tol)
}

/// Strategy of `x` after adding `delta` to `e`, funded from unused budget
/// first and then by the cheapest withdrawal from its other edges.
fn shifted_onto(game: &Game, p: &Profile, x: usize, e: usize, delta: f64, cfg: &Config) -> Vec<f64> {
    let inc = game.incident(x);
    let mut s = p.strategy(game, x);
    let unused = (game.budget(x) - p.total(game, x)).max(0.0);
    let need = (delta - unused).max(0.0);
    let ie = inc.iter().position(|&f| f == e).unwrap();
    if need > 0.0 {
        let others: Vec<usize> = (0..inc.len()).filter(|&i| i != ie).collect();
        let terms: Vec<Term> = others
            .iter()
            .map(|&i| Term::new(inc[i], &game.edge(inc[i]).reward, p.partner(game, x, inc[i])).capped(s[i]))
            .collect();
        let placed: f64 = others.iter().map(|&i| s[i]).sum();
        let sol = maximize(&terms, (placed - need).max(0.0), &EngineOpts::from_config(cfg));
        for (k, &i) in others.iter().enumerate() {
            s[i] = sol.x[k].min(s[i]);
        }
    }
    s[ie] += delta;
    s
}

fn node_candidates(game: &Game, p: &Profile, x: usize, e: usize, cfg: &Config) -> Vec<Vec<f64>> {
    let d = game.degree(x);
    let b = game.budget(x);
    let mut out = vec![p.strategy(game, x)];
    for k in 0..d {
        let mut s = vec![0.0; d];
        s[k] = b;
        out.push(s);
    }
    let room = b - p.get(game, x, e);
    if room > cfg.tol {
        for a in 1..=8 {
            out.push(shifted_onto(game, p, x, e, room * a as f64 / 8.0, cfg));
        }
    }
    out
}

/// Current strategies, all single-edge vertices, and partial shifts onto
/// the shared edge, combined pairwise.
fn class_c_pairs(game: &Game, p: &Profile, e: usize, cfg: &Config) -> Vec<Pair> {
    let (u, v) = (game.edge(e).u, game.edge(e).v);
    let cu = node_candidates(game, p, u, e, cfg);
    let cv = node_candidates(game, p, v, e, cfg);
    let mut out = Vec::with_capacity(cu.len() * cv.len());
    for a in &cu {
        for b in &cv {
            out.push((a.clone(), b.clone()));
        }
    }
    out
}

/// Both endpoints place exactly `t` on `e` and re-optimize the rest.
fn min_strategy(game: &Game, p: &Profile, x: usize, e: usize, t: f64, cfg: &Config) -> (Vec<f64>, f64) {
    let inc = game.incident(x);
    let terms: Vec<Term> = inc
        .iter()
        .filter(|&&f| f != e)
        .map(|&f| Term::new(f, &game.edge(f).reward, p.partner(game, x, f)))
        .collect();
    let sol = maximize(&terms, (game.budget(x) - t).max(0.0), &EngineOpts::from_config(cfg));
    let mut s = Vec::with_capacity(inc.len());
    let mut k = 0;
    for &f in inc {
        if f == e {
            s.push(t);
        } else {
            s.push(sol.x[k]);
            k += 1;
        }
    }
    let value = game.edge(e).reward.eval(t, t) + sol.value;
    (s, value)
}

fn subset_sums(xs: &[f64]) -> Vec<f64> {
    if xs.len() > 10 {
        let mut acc = 0.0;
        return xs.iter().map(|x| {
            acc += x;
            acc
        }).collect();
    }
    let mut out = vec![0.0];
    for &x in xs {
        let n = out.len();
        for i in 0..n {
            out.push(out[i] + x);
        }
    }
    out
}

/// Joint targets on `e` worth trying: a uniform scan, kinks of `h_e` and of
/// both remainders, then a golden refinement of the best smaller gain.
fn min_effort_targets(game: &Game, p: &Profile, e: usize, cfg: &Config) -> Vec<f64> {
    let edge = game.edge(e);
    let (u, v) = (edge.u, edge.v);
    let top = game.budget(u).min(game.budget(v));
    if top <= 0.0 {
        return vec![0.0];
    }
    let mut ts: Vec<f64> = (0..=64).map(|k| top * k as f64 / 64.0).collect();
    if let RewardSpec::MinEffort { h } = &edge.reward {
        ts.extend(h.breakpoints());
    }
    for x in [u, v] {
        ts.push(p.get(game, x, e));
        let caps: Vec<f64> = game
            .incident(x)
            .iter()
            .filter(|&&f| f != e)
            .map(|&f| p.partner(game, x, f))
            .collect();
        ts.extend(subset_sums(&caps).into_iter().map(|s| game.budget(x) - s));
    }
    ts.retain(|t| (0.0..=top).contains(t));
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ts.dedup();
    let (wu, wv) = (game.utility(p, u), game.utility(p, v));
    let score = |t: f64| {
        let gu = min_strategy(game, p, u, e, t, cfg).1 - wu;
        let gv = min_strategy(game, p, v, e, t, cfg).1 - wv;
        gu.min(gv)
    };
    let scores: Vec<f64> = ts.iter().map(|&t| score(t)).collect();
    let mut bi = 0;
    for i in 1..ts.len() {
        if scores[i] > scores[bi] {
            bi = i;
        }
    }
    let (mut lo, mut hi) = (ts[bi.saturating_sub(1)], ts[(bi + 1).min(ts.len() - 1)]);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        if hi - lo <= 1e-12 {
            break;
        }
        let m1 = hi - phi * (hi - lo);
        let m2 = lo + phi * (hi - lo);
        if score(m1) >= score(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    ts.push(0.5 * (lo + hi));
    ts
}

fn min_effort_pairs(game: &Game, p: &Profile, e: usize, cfg: &Config) -> Vec<Pair> {
    let (u, v) = (game.edge(e).u, game.edge(e).v);
    min_effort_targets(game, p, e, cfg)
        .into_iter()
        .map(|t| (min_strategy(game, p, u, e, t, cfg).0, min_strategy(game, p, v, e, t, cfg).0))
        .collect()
}

const PAIR_GRID_CAP: f64 = 4.0e6;

/// Lattice of one node's strategies at resolution `g`, including unspent
/// budget.
pub(crate) fn node_lattice(game: &Game, x: usize, g: u32) -> Vec<Vec<f64>> {
    let d = game.degree(x);
    if d == 0 || game.budget(x) == 0.0 {
        return vec![vec![0.0; d]];
    }
    let unit = game.budget(x) / g as f64;
    let mut out = Vec::new();
    for_each_composition(d + 1, g, |c| out.push(c[..d].iter().map(|&k| k as f64 * unit).collect()));
    out
}

/// Visits every joint grid deviation of the endpoints of `e` with the
/// resulting utilities `(w_u, w_v)`.
fn for_each_grid_pair(game: &Game, p: &Profile, e: usize, g: u32, mut f: impl FnMut(&[f64], &[f64], f64, f64)) {
    let edge = game.edge(e);
    let (u, v) = (edge.u, edge.v);
    let mut g = g.max(1);
    while g > 1 && composition_count(game.degree(u) + 1, g) * composition_count(game.degree(v) + 1, g) > PAIR_GRID_CAP {
        g /= 2;
    }
    let prep = |x: usize| -> Vec<(Vec<f64>, f64, f64)> {
        let inc = game.incident(x);
        let ie = inc.iter().position(|&f| f == e).unwrap();
        node_lattice(game, x, g)
            .into_iter()
            .map(|s| {
                let rest: f64 = inc
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != ie)
                    .map(|(i, &f)| game.edge(f).reward.eval(s[i], p.partner(game, x, f)))
                    .sum();
                let on_e = s[ie];
                (s, rest, on_e)
            })
            .collect()
    };
    let lu = prep(u);
    let lv = prep(v);
    for (su, ru, xu) in &lu {
        for (sv, rv, xv) in &lv {
            let r = edge.reward.eval(*xu, *xv);
            f(su, sv, ru + r, rv + r);
        }
    }
}

fn grid_deviation(game: &Game, p: &Profile, e: usize, cfg: &Config) -> Option<Witness> {
    let (u, v) = (game.edge(e).u, game.edge(e).v);
    let (wu, wv) = (game.utility(p, u), game.utility(p, v));
    let mut best: Option<(f64, Pair)> = None;
    for_each_grid_pair(game, p, e, cfg.grid, |su, sv, pu, pv| {
        let (gu, gv) = (pu - wu, pv - wv);
        if improves(gu, wu, cfg.tol) && improves(gv, wv, cfg.tol) && best.as_ref().is_none_or(|b| gu.min(gv) > b.0) {
            best = Some((gu.min(gv), (su.to_vec(), sv.to_vec())));
        }
    });
    let (_, (su, sv)) = best?;
    confirm(game, p, &[u, v], &[su, sv], Some(e), cfg.tol)
}

#[derive(Clone, Debug, Serialize)]
pub struct ApproxReport {
    /// Largest improvement ratio any candidate deviation achieves.
    pub factor: f64,
    /// A deviator with zero utility could obtain a positive one.
    pub infinite: bool,
    pub nodes: Vec<usize>,
}

/// Largest factor by which a unilateral or bilateral deviation improves
/// the deviators; for pairs the smaller of the two ratios counts.
pub fn approximation_factor(game: &Game, p: &Profile, cfg: &Config) -> ApproxReport {
    let ratio = |pre: f64, post: f64| -> f64 {
        if pre <= cfg.tol {
            if post > cfg.tol {
                f64::INFINITY
            } else {
                1.0
            }
        } else {
            (post / pre).max(1.0)
        }
    };
    let mut best = ApproxReport { factor: 1.0, infinite: false, nodes: Vec::new() };
    for v in 0..game.n() {
        let br = best_response(game, p, v, cfg);
        let r = ratio(game.utility(p, v), br.value);
        if r > best.factor {
            best = ApproxReport { factor: r, infinite: r.is_infinite(), nodes: vec![v] };
        }
    }
    let per_edge: Vec<(f64, usize)> = (0..game.m())
        .into_par_iter()
        .map(|e| {
            let (u, v) = (game.edge(e).u, game.edge(e).v);
            let (wu, wv) = (game.utility(p, u), game.utility(p, v));
            let mut top = 1.0f64;
            let mut pairs = class_c_pairs(game, p, e, cfg);
            if game.edge(e).reward.min_h().is_some() {
                pairs.extend(min_effort_pairs(game, p, e, cfg));
            }
            let mut q = p.clone();
            for (su, sv) in &pairs {
                q.set_strategy(game, u, su);
                q.set_strategy(game, v, sv);
                top = top.max(ratio(wu, game.utility(&q, u)).min(ratio(wv, game.utility(&q, v))));
            }
            for_each_grid_pair(game, p, e, cfg.grid, |_, _, pu, pv| {
                top = top.max(ratio(wu, pu).min(ratio(wv, pv)));
            });
            (top, e)
        })
        .collect();
    for (r, e) in per_edge {
        if r > best.factor {
            let edge = game.edge(e);
            best = ApproxReport { factor: r, infinite: r.is_infinite(), nodes: vec![edge.u, edge.v] };
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tightness {
    Tight,
    HalfSlack,
    Slack,
}

pub type EdgeTightness = Vec<Tightness>;

pub fn classify_tightness(game: &Game, p: &Profile, cfg: &Config) -> EdgeTightness {
    let interior = |x: f64, b: f64| x > cfg.tol && x < b - cfg.tol;
    game.edges()
        .iter()
        .enumerate()
        .map(|(e, edge)| {
            let a = interior(p.eff[e][0], game.budget(edge.u));
            let b = interior(p.eff[e][1], game.budget(edge.v));
            match (a, b) {
                (true, true) => Tightness::Slack,
                (false, false) => Tightness::Tight,
                _ => Tightness::HalfSlack,
            }
        })
        .collect()
}

/// Removes slack edges from a pairwise-stable profile without changing any
/// utility, by shifting effort from another edge of an endpoint onto the
/// slack edge.
pub fn eliminate_slack(game: &Game, p: &Profile, cfg: &Config) -> Result<Profile> {
    if !game.all_rewards(|r| r.in_c() && r.supermodular()) {
        return Err(Error::Unsupported("slack elimination needs coordinate-convex rewards with nonnegative mixed partials".into()));
    }
    if !verify_pairwise(game, p, cfg).is_stable() {
        return Err(Error::Unsupported("slack elimination needs a pairwise-stable profile".into()));
    }
    let mut cur = p.clone();
    let limit = 16 * (game.m() + 1) * (game.n() + 1);
    for _ in 0..limit {
        let labels = classify_tightness(game, &cur, cfg);
        let Some(e) = labels.iter().position(|&t| t == Tightness::Slack) else {
            let check = verify_pairwise(game, &cur, cfg);
            if !check.is_stable() {
                return Err(Error::Internal("slack elimination produced an unstable profile".into()));
            }
            return Ok(cur);
        };
        cur = slack_step(game, &cur, e, cfg)
            .ok_or_else(|| Error::Internal(format!("no welfare-preserving shift onto slack edge '{}'", game.edge(e).id)))?;
    }
    Err(Error::Internal("slack elimination did not terminate".into()))
}

fn slack_step(game: &Game, p: &Profile, e: usize, cfg: &Config) -> Option<Profile> {
    let edge = game.edge(e);
    let utilities: Vec<f64> = (0..game.n()).map(|x| game.utility(p, x)).collect();
    let (au, av) = (p.eff[e][0], p.eff[e][1]);
    for mover in [edge.v, edge.u] {
        // other edges carrying effort, then unspent budget
        let mut sources: Vec<(Option<usize>, f64)> = game
            .incident(mover)
            .iter()
            .filter(|&&f| f != e && p.get(game, mover, f) > 0.0)
            .map(|&f| (Some(f), p.get(game, mover, f)))
            .collect();
        let unused = game.budget(mover) - p.total(game, mover);
        if unused > cfg.tol {
            sources.push((None, unused));
        }
        for (f, gamma) in sources {
            for eps in [gamma, gamma.min(au).min(av)] {
                let mut q = p.clone();
                if let Some(f) = f {
                    q.set(game, mover, f, gamma - eps);
                }
                q.set(game, mover, e, p.get(game, mover, e) + eps);
                let same = (0..game.n()).all(|x| (game.utility(&q, x) - utilities[x]).abs() <= cfg.tol * utilities[x].abs().max(1.0));
                if same {
                    return Some(q);
                }
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reward::Poly;
    use crate::scalar::ScalarFn;

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

    fn nash_state(g: &Game, a: f64) -> Profile {
        let mut p = Profile::zeros(g);
        p.set(g, 0, 0, 1.0);
        p.set(g, 2, 1, 1.0);
        p.set(g, 1, 0, a);
        p.set(g, 1, 1, 1.0 - a);
        p
    }

    #[test]
    fn triangle_nash_but_not_pairwise() {
        let g = triangle(2.0);
        let cfg = Config::default();
        for a in [0.0, 0.25, 0.5, 1.0] {
            let p = nash_state(&g, a);
            assert_eq!(verify_nash(&g, &p, &cfg).verdict, Verdict::Stable);
            let r = verify_pairwise(&g, &p, &cfg);
            assert_eq!(r.verdict, Verdict::BilateralDeviation);
            let w = r.witness.unwrap();
            assert_eq!(w.edge, Some(2));
            assert!(w.replay(&g, &p).iter().all(|&x| x > 1e-9));
        }
    }

    #[test]
    fn triangle_full_move_gains() {
        // both corner players move everything to e3
        let g = triangle(2.0);
        let a = 0.25;
        let p = nash_state(&g, a);
        let mut q = p.clone();
        q.set(&g, 0, 0, 0.0);
        q.set(&g, 0, 2, 1.0);
        q.set(&g, 2, 1, 0.0);
        q.set(&g, 2, 2, 1.0);
        assert!((g.utility(&q, 0) - (3.0 * a + 4.0)).abs() < 1e-12);
        assert!((g.utility(&q, 2) - (3.0 * (1.0 - a) + 4.0)).abs() < 1e-12);
    }

    #[test]
    fn dominated_corner_deviates() {
        let g = triangle(2.0);
        let mut p = nash_state(&g, 0.5);
        p.set(&g, 0, 0, 0.0);
        let r = verify_nash(&g, &p, &Config::default());
        assert_eq!(r.verdict, Verdict::UnilateralDeviation);
        let w = r.witness.unwrap();
        assert_eq!(w.nodes, vec![0]);
        assert_eq!(w.strategies[0], vec![(0, 1.0), (2, 0.0)]);
    }

    fn path4(eps: f64) -> Game {
        Game::builder()
            .node("u", 1.0)
            .node("v", 1.0)
            .node("w", 1.0)
            .node("z", 1.0)
            .edge("e1", "u", "v", RewardSpec::WeightedProduct { c: 1.0 })
            .edge("e2", "v", "w", RewardSpec::WeightedProduct { c: 1.0 + eps })
            .edge("e3", "w", "z", RewardSpec::WeightedProduct { c: 1.0 })
            .build()
            .unwrap()
    }

    #[test]
    fn path_middle_matching_is_stable() {
        let g = path4(0.1);
        let p = Profile::symmetric(&g, &[(1, 1.0)]);
        let r = verify_pairwise(&g, &p, &Config::default());
        assert_eq!(r.verdict, Verdict::Stable);
        assert_eq!(r.method, Method::ExactClass);
        assert!((g.welfare(&p) - 2.2).abs() < 1e-12);
        let outer = Profile::symmetric(&g, &[(0, 1.0), (2, 1.0)]);
        assert_eq!(verify_pairwise(&g, &outer, &Config::default()).verdict, Verdict::BilateralDeviation);
    }

    #[test]
    fn sqrt_triangle_half_split_unstable() {
        let root = RewardSpec::PolyConvex { poly: Poly::product(1.0), outer: ScalarFn::power(1.0, 0.5) };
        let g = Game::builder()
            .node("a", 1.0)
            .node("b", 1.0)
            .node("c", 1.0)
            .edge("ab", "a", "b", root.clone())
            .edge("bc", "b", "c", root.clone())
            .edge("ca", "c", "a", root)
            .build()
            .unwrap();
        let p = Profile::symmetric(&g, &[(0, 0.5), (1, 0.5), (2, 0.5)]);
        let r = verify_pairwise(&g, &p, &Config::default());
        assert_eq!(r.verdict, Verdict::BilateralDeviation);
        assert_eq!(r.method, Method::Grid);
    }

    #[test]
    fn tightness_labels() {
        let g = Game::builder()
            .node("u", 1.0)
            .node("v", 1.0)
            .edge("e", "u", "v", RewardSpec::WeightedProduct { c: 1.0 })
            .build()
            .unwrap();
        let cfg = Config::default();
        let mut p = Profile::zeros(&g);
        p.eff[0] = [0.5, 1.0];
        assert_eq!(classify_tightness(&g, &p, &cfg), vec![Tightness::HalfSlack]);
        p.eff[0] = [0.5, 0.5];
        assert_eq!(classify_tightness(&g, &p, &cfg), vec![Tightness::Slack]);
        p.eff[0] = [1.0, 1.0];
        assert_eq!(classify_tightness(&g, &p, &cfg), vec![Tightness::Tight]);
    }

    #[test]
    fn stable_profile_factor_is_one() {
        let g = path4(0.1);
        let p = Profile::symmetric(&g, &[(1, 1.0)]);
        let a = approximation_factor(&g, &p, &Config::default().with_grid(4));
        assert_eq!(a.factor, 1.0);
        assert!(!a.infinite);
    }

    #[test]
    fn slack_removed_without_welfare_change() {
        // xy flattened below 1 pays nothing at half budgets, so the split
        // edge is slack yet stable; a separate product edge carries welfare
        let flat = RewardSpec::PolyConvex {
            poly: Poly::product(1.0),
            outer: ScalarFn::piecewise(&[(0.0, 0.0), (1.0, 0.0), (2.0, 1.0)]),
        };
        let g = Game::builder()
            .node("u", 1.0)
            .node("v", 1.0)
            .node("x", 1.0)
            .node("y", 1.0)
            .edge("uv", "u", "v", flat)
            .edge("xy", "x", "y", RewardSpec::WeightedProduct { c: 1.0 })
            .build()
            .unwrap();
        let p = Profile::symmetric(&g, &[(0, 0.5), (1, 1.0)]);
        let cfg = Config::default();
        assert!(verify_pairwise(&g, &p, &cfg).is_stable());
        assert_eq!(classify_tightness(&g, &p, &cfg)[0], Tightness::Slack);
        let q = eliminate_slack(&g, &p, &cfg).unwrap();
        assert!(classify_tightness(&g, &q, &cfg).iter().all(|&t| t != Tightness::Slack));
        assert_eq!(g.welfare(&q), g.welfare(&p));
        let tight = Profile::symmetric(&g, &[(1, 1.0)]);
        assert_eq!(eliminate_slack(&g, &tight, &cfg).unwrap(), tight);
    }

    #[test]
    fn strictly_convex_stable_profiles_are_tight() {
        let sq = RewardSpec::PolyConvex { poly: Poly::product(1.0), outer: ScalarFn::power(1.0, 2.0) };
        let g = Game::builder()
            .node("a", 1.0)
            .node("b", 1.0)
            .node("c", 1.0)
            .edge("ab", "a", "b", sq.clone())
            .edge("bc", "b", "c", sq)
            .build()
            .unwrap();
        let p = Profile::symmetric(&g, &[(0, 1.0)]);
        let cfg = Config::default();
        assert!(verify_pairwise(&g, &p, &cfg).is_stable());
        assert_eq!(eliminate_slack(&g, &p, &cfg).unwrap(), p);
    }
}
