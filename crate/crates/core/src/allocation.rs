//! Unilateral best responses and marginal-loss helpers.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{Game, Profile};
use crate::reward::RewardSpec;
use crate::scalar::ScalarFn;
use crate::Config;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BrKind {
    SingleEdgeVertex,
    WaterFilling,
    ArgmaxSpread,
    GridApproximate,
}

impl BrKind {
    pub fn is_exact(self) -> bool {
        self != BrKind::GridApproximate
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BestResponse {
    pub node: usize,
    /// `(edge, effort)` over the node's incident edges in order.
    pub allocation: Vec<(usize, f64)>,
    pub value: f64,
    pub kind: BrKind,
    /// Edges whose single-edge vertex attains the same value.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub tied: Vec<usize>,
}

impl BestResponse {
    pub fn apply(&self, game: &Game, p: &mut Profile) {
        for &(e, x) in &self.allocation {
            p.set(game, self.node, e, x);
        }
    }

    pub fn effort(&self, e: usize) -> f64 {
        self.allocation.iter().find(|a| a.0 == e).map_or(0.0, |a| a.1)
    }
}

const BISECT_ITERS: usize = 200;
const SPREAD_MAX_TERMS: usize = 20;
const GRID_MAX_POINTS: f64 = 2.0e5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum TermShape {
    /// Linear up to the cap, flat beyond.
    Linear,
    /// Convex on `[0, cap]`, flat beyond.
    Convex,
    /// Concave on `[0, inf)`.
    Concave,
    Other,
}

/// `phi(x) = f(min(x, cap), other)` for one incident edge.
#[derive(Clone, Debug)]
pub(crate) struct Term<'a> {
    pub edge: usize,
    pub f: &'a RewardSpec,
    pub other: f64,
    pub cap: f64,
    pub prefer: bool,
}

impl<'a> Term<'a> {
    pub fn new(edge: usize, f: &'a RewardSpec, other: f64) -> Self {
        Term { edge, f, other, cap: f64::INFINITY, prefer: false }
    }

    pub fn capped(mut self, cap: f64) -> Self {
        self.cap = cap;
        self
    }

    pub fn preferred(mut self, prefer: bool) -> Self {
        self.prefer = prefer;
        self
    }

    /// Cap after which the value is flat.
    pub fn eff_cap(&self) -> f64 {
        match self.f {
            RewardSpec::MinEffort { .. } => self.cap.min(self.other),
            _ => self.cap,
        }
    }

    pub fn phi(&self, x: f64) -> f64 {
        self.f.eval(x.max(0.0).min(self.cap), self.other)
    }

    fn poly_linear_in_x(&self) -> Option<(f64, f64)> {
        if let RewardSpec::PolyConvex { poly, .. } = self.f {
            if poly.0.iter().all(|t| t.2 == 0.0 || t.0 <= 1) {
                let (mut a, mut b) = (0.0, 0.0);
                for &(i, j, c) in &poly.0 {
                    let w = c * self.other.powi(j as i32);
                    if i == 0 {
                        a += w;
                    } else {
                        b += w;
                    }
                }
                return Some((a, b));
            }
        }
        None
    }

    pub fn shape(&self) -> TermShape {
        match self.f {
            RewardSpec::WeightedSum { .. } | RewardSpec::WeightedProduct { .. } => TermShape::Linear,
            RewardSpec::PolyConvex { outer, .. } => {
                let s = outer.shape();
                let lin = self.poly_linear_in_x();
                if s == crate::Shape::Linear && lin.is_some() {
                    TermShape::Linear
                } else if s.is_convex() {
                    TermShape::Convex
                } else if s.is_concave() && lin.is_some() {
                    TermShape::Concave
                } else {
                    TermShape::Other
                }
            }
            RewardSpec::MinEffort { h } => {
                let s = h.shape();
                if s == crate::Shape::Linear {
                    TermShape::Linear
                } else if s.is_concave() {
                    TermShape::Concave
                } else if s.is_convex() {
                    TermShape::Convex
                } else {
                    TermShape::Other
                }
            }
            RewardSpec::MaxEffort { h } => {
                if h.shape().is_convex() {
                    TermShape::Convex
                } else {
                    TermShape::Other
                }
            }
        }
    }

    /// Largest `x <= cap` whose left marginal is at least `lambda`
    /// (strictly above when `strict`). Concave and linear terms only.
    fn demand(&self, lambda: f64, strict: bool) -> f64 {
        let reaches = |d: f64| if strict { d > lambda } else { d >= lambda };
        let raw = match self.f {
            RewardSpec::WeightedSum { c } => {
                if reaches(*c) {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            RewardSpec::WeightedProduct { c } => {
                if reaches(c * self.other) {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            RewardSpec::PolyConvex { outer, .. } => {
                let (a, b) = self.poly_linear_in_x().expect("concave term");
                if b <= 0.0 {
                    if reaches(0.0) {
                        f64::INFINITY
                    } else {
                        0.0
                    }
                } else {
                    let z = outer.demand(lambda / b, strict);
                    ((z - a) / b).max(0.0)
                }
            }
            RewardSpec::MinEffort { h } => h.demand(lambda, strict).min(self.other),
            RewardSpec::MaxEffort { .. } => unreachable!("max-effort terms are never water-filled"),
        };
        raw.min(self.eff_cap())
    }

    fn levels(&self) -> Option<Vec<f64>> {
        match self.f {
            RewardSpec::WeightedSum { c } => Some(vec![*c]),
            RewardSpec::WeightedProduct { c } => Some(vec![c * self.other]),
            RewardSpec::MinEffort { h } => h.exact_levels(),
            RewardSpec::PolyConvex { outer, .. } => {
                let (_, b) = self.poly_linear_in_x()?;
                match outer {
                    ScalarFn::Power { .. } if outer.linear_slope().is_none() => None,
                    _ => outer.exact_levels().map(|l| l.into_iter().map(|s| s * b).collect()),
                }
            }
            RewardSpec::MaxEffort { .. } => None,
        }
    }

    /// Left marginal at `x`.
    #[cfg(test)]
    pub fn d_left(&self, x: f64) -> f64 {
        if x > self.cap {
            0.0
        } else {
            self.f.dx_left(x, self.other)
        }
    }

    /// Right marginal at `x`.
    #[cfg(test)]
    pub fn d_right(&self, x: f64) -> f64 {
        if x >= self.cap {
            0.0
        } else {
            self.f.dx_right(x, self.other)
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Solution {
    pub x: Vec<f64>,
    pub value: f64,
    pub kind: BrKind,
    pub tied: Vec<usize>,
}

#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct EngineOpts {
    /// Term index preferred among tied single-edge vertices.
    pub prefer_vertex: Option<usize>,
    pub grid: u32,
    pub tol: f64,
}

impl EngineOpts {
    pub fn from_config(cfg: &Config) -> Self {
        EngineOpts { prefer_vertex: None, grid: cfg.grid.max(1), tol: cfg.tol }
    }
}

fn total(terms: &[Term], x: &[f64]) -> f64 {
    terms.iter().zip(x).map(|(t, &xi)| t.phi(xi)).sum()
}

/// Maximizes `sum phi_e(x_e)` subject to `sum x_e <= budget`, `x >= 0`.
pub(crate) fn maximize(terms: &[Term], budget: f64, opts: &EngineOpts) -> Solution {
    let budget = budget.max(0.0);
    if terms.is_empty() {
        return Solution { x: Vec::new(), value: 0.0, kind: BrKind::SingleEdgeVertex, tied: Vec::new() };
    }
    if budget == 0.0 {
        let x = vec![0.0; terms.len()];
        let value = total(terms, &x);
        return Solution { x, value, kind: BrKind::SingleEdgeVertex, tied: Vec::new() };
    }
    let shapes: Vec<TermShape> = terms.iter().map(Term::shape).collect();
    let convexish = |s: &TermShape| matches!(s, TermShape::Linear | TermShape::Convex);
    let concavish = |s: &TermShape| matches!(s, TermShape::Linear | TermShape::Concave);
    if shapes.iter().all(convexish) {
        if terms.iter().all(|t| t.eff_cap() >= budget) {
            return vertex(terms, budget, opts);
        }
        if terms.iter().filter(|t| t.eff_cap() > 0.0).count() <= SPREAD_MAX_TERMS {
            return spread(terms, budget);
        }
        return grid(terms, budget, opts);
    }
    if shapes.iter().all(concavish) {
        return water_fill(terms, budget);
    }
    if shapes.iter().all(|s| *s != TermShape::Other) {
        return split(terms, &shapes, budget, opts);
    }
    grid(terms, budget, opts)
}

fn vertex(terms: &[Term], budget: f64, opts: &EngineOpts) -> Solution {
    let base: Vec<f64> = terms.iter().map(|t| t.phi(0.0)).collect();
    let base_sum: f64 = base.iter().sum();
    let vals: Vec<f64> = terms
        .iter()
        .enumerate()
        .map(|(i, t)| base_sum - base[i] + t.phi(budget))
        .collect();
    let mut best = 0;
    for i in 1..vals.len() {
        if vals[i] > vals[best] {
            best = i;
        }
    }
    let tol = opts.tol.max(1e-12) * (1.0 + vals[best].abs());
    let tied: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] >= vals[best] - tol).collect();
    best = tied[0];
    if let Some(p) = opts.prefer_vertex {
        if tied.contains(&p) {
            best = p;
        }
    }
    let mut x = vec![0.0; terms.len()];
    x[best] = budget;
    let value = total(terms, &x);
    let tied = if tied.len() > 1 { tied.iter().map(|&i| terms[i].edge).collect() } else { Vec::new() };
    Solution { x, value, kind: BrKind::SingleEdgeVertex, tied }
}

/// Convex terms with caps: at most one edge ends strictly between zero
/// and its cap, so subsets filled to their caps plus one partial edge
/// cover every maximizer.
fn spread(terms: &[Term], budget: f64) -> Solution {
    let idx: Vec<usize> = (0..terms.len()).filter(|&i| terms[i].eff_cap() > 0.0).collect();
    let d = idx.len();
    let caps: Vec<f64> = idx.iter().map(|&i| terms[i].eff_cap().min(budget)).collect();
    let zero: Vec<f64> = idx.iter().map(|&i| terms[i].phi(0.0)).collect();
    let full: Vec<f64> = idx.iter().enumerate().map(|(k, &i)| terms[i].phi(caps[k]) - zero[k]).collect();
    let n = 1usize << d;
    let mut sum_cap = vec![0.0f64; n];
    let mut gain = vec![0.0f64; n];
    let mut best = (f64::NEG_INFINITY, 0usize, None::<(usize, f64)>);
    let slack = 1e-12 * (1.0 + budget);
    for mask in 0..n {
        if mask > 0 {
            let low = mask.trailing_zeros() as usize;
            let rest = mask & (mask - 1);
            sum_cap[mask] = sum_cap[rest] + caps[low];
            gain[mask] = gain[rest] + full[low];
        }
        if sum_cap[mask] > budget + slack {
            continue;
        }
        let r = budget - sum_cap[mask];
        let mut cand = (gain[mask], None);
        if r > 0.0 {
            for k in 0..d {
                if mask >> k & 1 == 0 {
                    let amt = r.min(caps[k]);
                    let g = gain[mask] + terms[idx[k]].phi(amt) - zero[k];
                    if g > cand.0 {
                        cand = (g, Some((k, amt)));
                    }
                }
            }
        }
        if cand.0 > best.0 {
            best = (cand.0, mask, cand.1);
        }
    }
    let mut x = vec![0.0; terms.len()];
    for k in 0..d {
        if best.1 >> k & 1 == 1 {
            x[idx[k]] = caps[k];
        }
    }
    if let Some((k, amt)) = best.2 {
        x[idx[k]] = amt;
    }
    let value = total(terms, &x);
    Solution { x, value, kind: BrKind::ArgmaxSpread, tied: Vec::new() }
}

fn demands(terms: &[Term], lambda: f64, strict: bool) -> Vec<f64> {
    terms.iter().map(|t| t.demand(lambda, strict)).collect()
}

fn fill_residual(terms: &[Term], base: &mut [f64], upper: &[f64], mut residual: f64) {
    let order = (0..terms.len())
        .filter(|&i| terms[i].prefer)
        .chain((0..terms.len()).filter(|&i| !terms[i].prefer));
    for i in order {
        if residual <= 0.0 {
            break;
        }
        let room = upper[i] - base[i];
        if room > 0.0 {
            let add = room.min(residual);
            base[i] += add;
            residual -= add;
        }
    }
}

/// Concave terms: marginal levels are lowered until the budget is spent.
fn water_fill(terms: &[Term], budget: f64) -> Solution {
    let finish = |x: Vec<f64>| {
        let value = total(terms, &x);
        Solution { x, value, kind: BrKind::WaterFilling, tied: Vec::new() }
    };
    let exact: Option<Vec<Vec<f64>>> = terms.iter().map(Term::levels).collect();
    if let Some(levels) = exact {
        let mut all: Vec<f64> = levels.into_iter().flatten().filter(|&l| l > 0.0).collect();
        all.sort_by(|a, b| b.partial_cmp(a).unwrap());
        all.dedup();
        for &lambda in &all {
            let upper = demands(terms, lambda, false);
            if upper.iter().sum::<f64>() >= budget {
                let mut base = demands(terms, lambda, true);
                let used: f64 = base.iter().sum();
                fill_residual(terms, &mut base, &upper, budget - used);
                return finish(base);
            }
        }
        let x = match all.last() {
            Some(&l) => demands(terms, l, false),
            None => vec![0.0; terms.len()],
        };
        return finish(x);
    }
    let saturated = demands(terms, 0.0, true);
    if saturated.iter().sum::<f64>() <= budget {
        return finish(saturated);
    }
    let d = |l: f64| demands(terms, l, false).iter().sum::<f64>();
    let mut hi = 1.0;
    while d(hi) >= budget && hi < 1e300 {
        hi *= 2.0;
    }
    let mut lo = hi / 2.0;
    while d(lo) < budget && lo > 1e-300 {
        lo /= 2.0;
    }
    for _ in 0..BISECT_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if d(mid) >= budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut base = demands(terms, hi, false);
    let upper = demands(terms, lo, false);
    let used: f64 = base.iter().sum();
    fill_residual(terms, &mut base, &upper, budget - used);
    finish(base)
}

/// Convex and concave parts optimized separately over a scanned split of
/// the budget.
fn split(terms: &[Term], shapes: &[TermShape], budget: f64, opts: &EngineOpts) -> Solution {
    let cvx: Vec<usize> = (0..terms.len()).filter(|&i| shapes[i] == TermShape::Convex).collect();
    let ccv: Vec<usize> = (0..terms.len()).filter(|&i| shapes[i] != TermShape::Convex).collect();
    let a: Vec<Term> = cvx.iter().map(|&i| terms[i].clone()).collect();
    let b: Vec<Term> = ccv.iter().map(|&i| terms[i].clone()).collect();
    let eval = |s: f64| -> (f64, Vec<f64>) {
        let sa = maximize(&a, s, opts);
        let sb = maximize(&b, budget - s, opts);
        let mut x = vec![0.0; terms.len()];
        for (k, &i) in cvx.iter().enumerate() {
            x[i] = sa.x[k];
        }
        for (k, &i) in ccv.iter().enumerate() {
            x[i] = sb.x[k];
        }
        (total(terms, &x), x)
    };
    let mut cands: Vec<f64> = (0..=64).map(|k| budget * k as f64 / 64.0).collect();
    cands.extend(a.iter().map(|t| t.eff_cap()).filter(|c| *c < budget));
    let mut best = eval(0.0);
    let mut best_s = 0.0;
    for s in cands {
        let r = eval(s);
        if r.0 > best.0 {
            best = r;
            best_s = s;
        }
    }
    let step = budget / 64.0;
    let (mut lo, mut hi) = ((best_s - step).max(0.0), (best_s + step).min(budget));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let m1 = hi - phi * (hi - lo);
        let m2 = lo + phi * (hi - lo);
        let (r1, r2) = (eval(m1), eval(m2));
        if r1.0 >= r2.0 {
            hi = m2;
            if r1.0 > best.0 {
                best = r1;
            }
        } else {
            lo = m1;
            if r2.0 > best.0 {
                best = r2;
            }
        }
    }
    Solution { x: best.1, value: best.0, kind: BrKind::GridApproximate, tied: Vec::new() }
}

/// Visits every composition of `units` into `parts` nonnegative parts in
/// lexicographic order.
pub(crate) fn for_each_composition(parts: usize, units: u32, mut f: impl FnMut(&[u32])) {
    if parts == 0 {
        f(&[]);
        return;
    }
    let mut c = vec![0u32; parts];
    c[parts - 1] = units;
    loop {
        f(&c);
        // next composition in lexicographic order
        let mut i = parts - 1;
        while i > 0 && c[i] == 0 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        let tail = c[i];
        c[i] = 0;
        c[i - 1] += 1;
        c[parts - 1] = tail - 1;
    }
}

/// `C(g + d - 1, d - 1)`, the number of compositions of `g` into `d` parts.
pub(crate) fn composition_count(parts: usize, units: u32) -> f64 {
    if parts == 0 {
        return 1.0;
    }
    let (n, k) = (units as f64 + parts as f64 - 1.0, parts as f64 - 1.0);
    let mut r = 1.0;
    for i in 0..(k as usize) {
        r = r * (n - i as f64) / (i as f64 + 1.0);
    }
    r
}

fn grid(terms: &[Term], budget: f64, opts: &EngineOpts) -> Solution {
    let d = terms.len();
    let mut g = opts.grid.max(1);
    while g > 1 && composition_count(d + 1, g) > GRID_MAX_POINTS {
        g /= 2;
    }
    let unit = budget / g as f64;
    let mut best = (f64::NEG_INFINITY, vec![0.0; d]);
    // the extra part is unspent budget
    for_each_composition(d + 1, g, |c| {
        let x: Vec<f64> = c[..d].iter().map(|&k| k as f64 * unit).collect();
        let v = total(terms, &x);
        if v > best.0 {
            best = (v, x);
        }
    });
    Solution { x: best.1, value: best.0, kind: BrKind::GridApproximate, tied: Vec::new() }
}

fn node_terms<'a>(game: &'a Game, p: &Profile, v: usize) -> Vec<Term<'a>> {
    game.incident(v)
        .iter()
        .map(|&e| Term::new(e, &game.edge(e).reward, p.partner(game, v, e)))
        .collect()
}

fn into_response(game: &Game, p: &Profile, v: usize, sol: Solution) -> BestResponse {
    let current = game.utility(p, v);
    let inc = game.incident(v);
    if sol.value < current {
        return BestResponse {
            node: v,
            allocation: inc.iter().map(|&e| (e, p.get(game, v, e))).collect(),
            value: current,
            kind: sol.kind,
            tied: Vec::new(),
        };
    }
    let mut trial = p.clone();
    for (&e, &x) in inc.iter().zip(&sol.x) {
        trial.set(game, v, e, x);
    }
    BestResponse {
        node: v,
        allocation: inc.iter().copied().zip(sol.x.iter().copied()).collect(),
        value: game.utility(&trial, v),
        kind: sol.kind,
        tied: sol.tied,
    }
}

/// Best response of `v` with everyone else fixed.
pub fn best_response(game: &Game, p: &Profile, v: usize, cfg: &Config) -> BestResponse {
    best_response_with(game, p, v, cfg, None)
}

/// As [`best_response`], preferring `prefer` among tied single-edge
/// vertices.
pub fn best_response_with(game: &Game, p: &Profile, v: usize, cfg: &Config, prefer: Option<usize>) -> BestResponse {
    let terms = node_terms(game, p, v);
    let mut opts = EngineOpts::from_config(cfg);
    opts.prefer_vertex = prefer.and_then(|e| game.incident(v).iter().position(|&x| x == e));
    let sol = maximize(&terms, game.budget(v), &opts);
    into_response(game, p, v, sol)
}

pub fn is_min_concave(game: &Game) -> bool {
    game.all_rewards(|r| r.min_h().is_some_and(|h| h.shape().is_concave()))
}

/// Best response of `v` when it also dictates the strategies of the nodes
/// flagged in `controlled`: those neighbors match whatever `v` puts on the
/// shared edge, while other neighbors keep their contributions. Among
/// optima the one matching fixed contributions is returned.
pub fn controlled_best_response(game: &Game, p: &Profile, v: usize, controlled: &[bool], cfg: &Config) -> Result<BestResponse> {
    if !is_min_concave(game) {
        return Err(Error::Unsupported("controlled best responses need min-effort rewards with concave h".into()));
    }
    let bv = game.budget(v);
    let terms: Vec<Term> = game
        .incident(v)
        .iter()
        .map(|&e| {
            let w = game.edge(e).other(v);
            let reward = &game.edge(e).reward;
            if controlled[w] {
                Term::new(e, reward, bv.min(game.budget(w)))
            } else {
                Term::new(e, reward, p.get(game, w, e)).preferred(true)
            }
        })
        .collect();
    let sol = maximize(&terms, bv, &EngineOpts::from_config(cfg));
    let value = total(&terms, &sol.x);
    Ok(BestResponse {
        node: v,
        allocation: game.incident(v).iter().copied().zip(sol.x).collect(),
        value,
        kind: sol.kind,
        tied: Vec::new(),
    })
}

/// Smallest loss in utility when `v` withdraws `delta` effort from its edges
/// other than `excluded`.
pub fn removal_loss(game: &Game, p: &Profile, v: usize, delta: f64, excluded: Option<usize>, cfg: &Config) -> Result<f64> {
    let terms: Vec<Term> = game
        .incident(v)
        .iter()
        .filter(|&&e| Some(e) != excluded)
        .map(|&e| {
            let x = p.get(game, v, e);
            Term::new(e, &game.edge(e).reward, p.partner(game, v, e)).capped(x)
        })
        .collect();
    let placed: f64 = terms.iter().map(|t| t.cap).sum();
    if delta > placed + cfg.tol {
        return Err(Error::Infeasible { node: game.node(v).id.clone(), used: delta, budget: placed });
    }
    if delta <= 0.0 {
        return Ok(0.0);
    }
    let now: f64 = terms.iter().map(|t| t.phi(t.cap)).sum();
    let sol = maximize(&terms, (placed - delta).max(0.0), &EngineOpts::from_config(cfg));
    Ok((now - sol.value).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reward::Poly;
    use proptest::prelude::*;

    fn triangle() -> Game {
        Game::builder()
            .node("u1", 1.0)
            .node("u2", 1.0)
            .node("u3", 1.0)
            .edge("e1", "u1", "u2", RewardSpec::WeightedSum { c: 3.0 })
            .edge("e2", "u2", "u3", RewardSpec::WeightedSum { c: 3.0 })
            .edge("e3", "u3", "u1", RewardSpec::WeightedSum { c: 2.0 })
            .build()
            .unwrap()
    }

    fn star() -> Game {
        Game::builder()
            .node("v", 1.0)
            .node("u", 1.0)
            .node("w", 1.0)
            .edge("vu", "v", "u", RewardSpec::MinEffort { h: ScalarFn::piecewise(&[(0.0, 0.0), (0.5, 1.5), (1.0, 2.0)]) })
            .edge("vw", "v", "w", RewardSpec::MinEffort { h: ScalarFn::linear(2.0) })
            .build()
            .unwrap()
    }

    #[test]
    fn dominant_edge_in_triangle() {
        let g = triangle();
        let br = best_response(&g, &Profile::zeros(&g), 0, &Config::default());
        assert_eq!(br.kind, BrKind::SingleEdgeVertex);
        assert_eq!(br.effort(0), 1.0);
        assert_eq!(br.effort(2), 0.0);
    }

    #[test]
    fn star_center_water_fills() {
        let g = star();
        let mut p = Profile::zeros(&g);
        p.set(&g, 1, 0, 1.0);
        p.set(&g, 2, 1, 1.0);
        let br = best_response(&g, &p, 0, &Config::default());
        assert_eq!(br.kind, BrKind::WaterFilling);
        assert!((br.effort(0) - 0.5).abs() < 1e-12);
        assert!((br.effort(1) - 0.5).abs() < 1e-12);
        assert!((br.value - 2.5).abs() < 1e-12);
    }

    #[test]
    fn star_controlled_matches_free_fill() {
        let g = star();
        let all = vec![false, true, true];
        let br = controlled_best_response(&g, &Profile::zeros(&g), 0, &all, &Config::default()).unwrap();
        assert!((br.effort(0) - 0.5).abs() < 1e-12);
        assert!((br.effort(1) - 0.5).abs() < 1e-12);
        assert!(controlled_best_response(&triangle(), &Profile::zeros(&triangle()), 0, &all, &Config::default()).is_err());
    }

    #[test]
    fn zero_budget_node() {
        let g = Game::builder()
            .node("a", 0.0)
            .node("b", 1.0)
            .edge("e", "a", "b", RewardSpec::WeightedSum { c: 2.0 })
            .build()
            .unwrap();
        let p = Profile::symmetric(&g, &[(0, 0.0)]);
        let mut p = p;
        p.set(&g, 1, 0, 1.0);
        let br = best_response(&g, &p, 0, &Config::default());
        assert_eq!(br.allocation, vec![(0, 0.0)]);
        assert_eq!(br.value, 2.0);
    }

    #[test]
    fn isolated_node_empty() {
        let g = Game::builder().node("a", 1.0).build().unwrap();
        let br = best_response(&g, &Profile::zeros(&g), 0, &Config::default());
        assert!(br.allocation.is_empty());
        assert_eq!(br.value, 0.0);
    }

    #[test]
    fn removal_losses() {
        let g = Game::builder()
            .node("a", 2.0)
            .node("b", 2.0)
            .node("c", 2.0)
            .edge("e", "a", "b", RewardSpec::MinEffort { h: ScalarFn::linear(5.0) })
            .edge("f", "a", "c", RewardSpec::MinEffort { h: ScalarFn::piecewise(&[(0.0, 0.0), (0.5, 1.5), (1.0, 2.0)]) })
            .build()
            .unwrap();
        let p = Profile::symmetric(&g, &[(0, 1.0), (1, 1.0)]);
        let cfg = Config::default();
        assert_eq!(removal_loss(&g, &p, 0, 0.0, None, &cfg).unwrap(), 0.0);
        assert!((removal_loss(&g, &p, 0, 0.4, Some(1), &cfg).unwrap() - 2.0).abs() < 1e-12);
        assert!((removal_loss(&g, &p, 0, 0.5, Some(0), &cfg).unwrap() - 0.5).abs() < 1e-12);
        assert!(removal_loss(&g, &p, 0, 1.5, Some(0), &cfg).is_err());
    }

    #[test]
    fn compositions_enumerate_simplex() {
        let mut seen = Vec::new();
        for_each_composition(3, 2, |c| seen.push(c.to_vec()));
        assert_eq!(seen.len(), 6);
        assert_eq!(composition_count(3, 2), 6.0);
        assert_eq!(seen[0], vec![0, 0, 2]);
        assert!(seen.iter().all(|c| c.iter().sum::<u32>() == 2));
    }

    #[test]
    fn min_convex_spreads_to_caps() {
        // budget 2 against neighbors offering 1 each on x^2 edges
        let g = Game::builder()
            .node("a", 2.0)
            .node("b", 1.0)
            .node("c", 1.0)
            .edge("e", "a", "b", RewardSpec::MinEffort { h: ScalarFn::power(1.0, 2.0) })
            .edge("f", "a", "c", RewardSpec::MinEffort { h: ScalarFn::power(1.0, 2.0) })
            .build()
            .unwrap();
        let mut p = Profile::zeros(&g);
        p.set(&g, 1, 0, 1.0);
        p.set(&g, 2, 1, 1.0);
        let br = best_response(&g, &p, 0, &Config::default());
        assert_eq!(br.kind, BrKind::ArgmaxSpread);
        assert_eq!((br.effort(0), br.effort(1)), (1.0, 1.0));
    }

    fn arb_game() -> impl Strategy<Value = (Game, Vec<f64>)> {
        let reward = prop_oneof![
            (0.1f64..5.0).prop_map(|c| RewardSpec::WeightedSum { c }),
            (0.1f64..5.0).prop_map(|c| RewardSpec::WeightedProduct { c }),
            (0.1f64..5.0, 1.0f64..3.0).prop_map(|(c, k)| RewardSpec::PolyConvex { poly: Poly::product(c), outer: ScalarFn::power(1.0, k) }),
            (0.1f64..5.0, 0.3f64..1.0).prop_map(|(a, k)| RewardSpec::MinEffort { h: ScalarFn::power(a, k) }),
            (0.1f64..5.0, 1.0f64..3.0).prop_map(|(a, k)| RewardSpec::MinEffort { h: ScalarFn::power(a, k) }),
            (0.1f64..5.0, 1.0f64..3.0).prop_map(|(a, k)| RewardSpec::MaxEffort { h: ScalarFn::power(a, k) }),
            (0.1f64..5.0, 0.3f64..0.9).prop_map(|(c, k)| RewardSpec::PolyConvex { poly: Poly::product(c), outer: ScalarFn::power(1.0, k) }),
        ];
        (prop::collection::vec(reward, 3), prop::collection::vec(0.0f64..1.0, 6), 0.2f64..2.0).prop_map(|(rs, xs, b)| {
            // center 0 with three leaves
            let mut gb = Game::builder().node("c", b);
            for i in 0..3 {
                gb = gb.node(format!("l{i}"), 1.0);
            }
            for (i, r) in rs.into_iter().enumerate() {
                gb = gb.edge(format!("e{i}"), "c", format!("l{i}"), r);
            }
            (gb.build().unwrap(), xs)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn best_response_dominates_grid((g, xs) in arb_game()) {
            let mut p = Profile::zeros(&g);
            let s: f64 = xs[..3].iter().sum::<f64>().max(1.0);
            for e in 0..3 {
                p.eff[e] = [xs[e] * g.budget(0) / s, xs[3 + e]];
            }
            let cfg = Config::default();
            let br = best_response(&g, &p, 0, &cfg);
            let mut q = p.clone();
            br.apply(&g, &mut q);
            prop_assert!((g.utility(&q, 0) - br.value).abs() <= 1e-9 * (1.0 + br.value));
            prop_assert!(q.total(&g, 0) <= g.budget(0) + 1e-9);
            prop_assert!(br.value >= g.utility(&p, 0) - 1e-12);
            let b = g.budget(0);
            let mut worst = 0.0f64;
            for_each_composition(4, 16, |c| {
                let mut r = p.clone();
                for e in 0..3 {
                    r.eff[e][0] = c[e] as f64 * b / 16.0;
                }
                worst = worst.max(g.utility(&r, 0) - br.value);
            });
            prop_assert!(worst <= 1e-9 * (1.0 + br.value), "grid beats BR by {worst} ({:?})", br.kind);
        }

        #[test]
        fn water_filling_kkt(a in prop::collection::vec((0.2f64..5.0, 0.3f64..0.9), 3), b in 0.1f64..2.0, caps in prop::collection::vec(0.1f64..1.0, 3)) {
            let mut gb = Game::builder().node("c", b);
            for i in 0..3 {
                gb = gb.node(format!("l{i}"), 1.0);
                gb = gb.edge(format!("e{i}"), "c", format!("l{i}"), RewardSpec::MinEffort { h: ScalarFn::power(a[i].0, a[i].1) });
            }
            let g = gb.build().unwrap();
            let mut p = Profile::zeros(&g);
            for e in 0..3 {
                p.eff[e][1] = caps[e];
            }
            let br = best_response(&g, &p, 0, &Config::default());
            prop_assert_eq!(br.kind, BrKind::WaterFilling);
            let terms = node_terms(&g, &p, 0);
            for (i, t) in terms.iter().enumerate() {
                let xi = br.allocation[i].1;
                if xi > 1e-9 && xi < t.eff_cap() - 1e-9 {
                    for (j, o) in terms.iter().enumerate() {
                        if i != j {
                            let xj = br.allocation[j].1;
                            let dl = t.d_left(xi);
                            prop_assert!(dl >= o.d_right(xj) - 1e-6 * (1.0 + dl));
                        }
                    }
                }
            }
        }

        #[test]
        fn strictly_convex_vertex(cs in prop::collection::vec(0.1f64..5.0, 3), xs in prop::collection::vec(0.0f64..1.0, 3), b in 0.0f64..2.0) {
            let mut gb = Game::builder().node("c", b);
            for i in 0..3 {
                gb = gb.node(format!("l{i}"), 1.0);
                gb = gb.edge(format!("e{i}"), "c", format!("l{i}"), RewardSpec::PolyConvex { poly: Poly::product(cs[i]), outer: ScalarFn::power(1.0, 2.0) });
            }
            let g = gb.build().unwrap();
            let mut p = Profile::zeros(&g);
            for e in 0..3 {
                p.eff[e][1] = xs[e];
            }
            let br = best_response(&g, &p, 0, &Config::default());
            let positive = br.allocation.iter().filter(|a| a.1 > 0.0).count();
            if b == 0.0 {
                prop_assert_eq!(positive, 0);
            } else {
                prop_assert_eq!(positive, 1);
                prop_assert!(br.allocation.iter().any(|a| a.1 == b));
            }
        }
    }
}
