//! Random and concurrent improvement dynamics with unilateral and
//! bilateral best responses.

use std::collections::HashMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::allocation::{best_response, best_response_with, controlled_best_response, is_min_concave};
use crate::equilibria::{improves, node_lattice, verify_pairwise, Method};
use crate::error::{Error, Result};
use crate::game::{Game, Profile};
use crate::io::{game_hash, profile_to_value};
use crate::Config;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Random,
    Concurrent,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "random" => Some(Mode::Random),
            "concurrent" => Some(Mode::Concurrent),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MoveKind {
    UnilateralBr,
    BilateralBr,
    None,
}

/// A joint move of the endpoints of an edge, strategies in incident order.
#[derive(Clone, Debug)]
pub struct BilateralMove {
    pub strategies: [Vec<f64>; 2],
    pub gains: [f64; 2],
    /// Found by lattice search rather than an exact procedure.
    pub approximate: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MoveRecord {
    pub nodes: Vec<usize>,
    pub kind: MoveKind,
    pub deltas: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord {
    pub index: usize,
    pub moves: Vec<MoveRecord>,
    pub fingerprint: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TerminalVerdict {
    Converged { round: usize },
    CycleDetected { period: usize, first_visit: usize },
    RoundBudgetExhausted,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub seed: u64,
    pub mode: Mode,
    pub game_hash: String,
    pub max_rounds: usize,
    pub rounds: Vec<RoundRecord>,
    pub verdict: TerminalVerdict,
    pub final_profile: Profile,
    /// Verification method behind a convergence verdict.
    pub certified_by: Option<Method>,
    pub approximate: bool,
    pub notes: Vec<String>,
}

const QUANTUM: f64 = 1e-9;
const GENERIC_PAIR_CAP: f64 = 1.0e6;
const GENERIC_CANDIDATES: usize = 8;
const REFINE_STEPS: usize = 32;

/// Hash of the efforts rounded to multiples of `1e-9`.
pub fn fingerprint(p: &Profile) -> String {
    let mut h = Sha256::new();
    for e in &p.eff {
        for x in e {
            h.update(((x / QUANTUM).round() as i64).to_le_bytes());
        }
    }
    hex::encode(&h.finalize()[..8])
}

fn strategy_of(game: &Game, v: usize, alloc: &[(usize, f64)]) -> Vec<f64> {
    game.incident(v).iter().map(|&e| alloc.iter().find(|a| a.0 == e).map_or(0.0, |a| a.1)).collect()
}

fn apply_pair(game: &Game, p: &Profile, u: usize, v: usize, su: &[f64], sv: &[f64]) -> Profile {
    let mut q = p.clone();
    q.set_strategy(game, u, su);
    q.set_strategy(game, v, sv);
    q
}

fn is_best_response(game: &Game, q: &Profile, v: usize, cfg: &Config) -> bool {
    let now = game.utility(q, v);
    !improves(best_response(game, q, v, cfg).value - now, now, cfg.tol)
}

/// Accepts the pair if both strictly gain over `p` and each strategy is a
/// best response to the other.
fn accept(game: &Game, p: &Profile, u: usize, v: usize, su: Vec<f64>, sv: Vec<f64>, approximate: bool, cfg: &Config) -> Option<BilateralMove> {
    let q = apply_pair(game, p, u, v, &su, &sv);
    let (wu, wv) = (game.utility(p, u), game.utility(p, v));
    let gains = [game.utility(&q, u) - wu, game.utility(&q, v) - wv];
    if !(improves(gains[0], wu, cfg.tol) && improves(gains[1], wv, cfg.tol)) {
        return None;
    }
    if !(is_best_response(game, &q, u, cfg) && is_best_response(game, &q, v, cfg)) {
        return None;
    }
    Some(BilateralMove { strategies: [su, sv], gains, approximate })
}

/// A profitable pair of mutual best responses for the endpoints of an edge,
/// if one is found.
pub fn bilateral_best_response(game: &Game, p: &Profile, u: usize, v: usize, cfg: &Config) -> Result<Option<BilateralMove>> {
    let e = game.edge_between(u, v).ok_or_else(|| Error::NotAdjacent { u: game.node(u).id.clone(), v: game.node(v).id.clone() })?;
    if game.all_rewards(|r| r.in_c_strict() && r.in_c0()) {
        Ok(three_forms(game, p, u, v, e, cfg))
    } else if is_min_concave(game) {
        fix_lower(game, p, u, v, e, cfg)
    } else {
        Ok(refined_grid(game, p, u, v, e, cfg))
    }
}

fn full_on(game: &Game, x: usize, e: usize) -> Vec<f64> {
    game.incident(x).iter().map(|&f| if f == e { game.budget(x) } else { 0.0 }).collect()
}

/// Both on the shared edge, one of them, or neither.
fn three_forms(game: &Game, p: &Profile, u: usize, v: usize, e: usize, cfg: &Config) -> Option<BilateralMove> {
    let mut p0 = p.clone();
    p0.eff[e] = [0.0, 0.0];
    let bu = best_response_with(game, &p0, u, cfg, Some(e));
    let bv = best_response_with(game, &p0, v, cfg, Some(e));
    let (su, sv) = (strategy_of(game, u, &bu.allocation), strategy_of(game, v, &bv.allocation));
    let both = (full_on(game, u, e), full_on(game, v, e));
    let (on_u, on_v) = (bu.effort(e) > 0.0, bv.effort(e) > 0.0);
    let candidate = if on_u && on_v {
        both
    } else {
        let q = apply_pair(game, p, u, v, &su, &sv);
        let lured = |x: usize| {
            let br = best_response_with(game, &q, x, cfg, Some(e));
            let now = game.utility(&q, x);
            br.effort(e) > 0.0 && improves(br.value - now, now, cfg.tol)
        };
        if (on_u && lured(v)) || (on_v && lured(u)) {
            both
        } else {
            let f1 = apply_pair(game, p, u, v, &both.0, &both.1);
            if game.utility(&f1, u) >= game.utility(&q, u) && game.utility(&f1, v) >= game.utility(&q, v) {
                both
            } else {
                (su, sv)
            }
        }
    };
    accept(game, p, u, v, candidate.0, candidate.1, false, cfg)
}

/// Each endpoint best-responds as if the other matched it on the shared
/// edge; the one asking for less keeps its choice and the other
/// best-responds to it.
fn fix_lower(game: &Game, p: &Profile, u: usize, v: usize, e: usize, cfg: &Config) -> Result<Option<BilateralMove>> {
    let mut mask = vec![false; game.n()];
    mask[v] = true;
    let bu = controlled_best_response(game, p, u, &mask, cfg)?;
    mask[v] = false;
    mask[u] = true;
    let bv = controlled_best_response(game, p, v, &mask, cfg)?;
    let (xu, xv) = (bu.effort(e), bv.effort(e));
    let (low, high, fixed) = if xu <= xv { (u, v, bu) } else { (v, u, bv) };
    let s_low = strategy_of(game, low, &fixed.allocation);
    let mut q = p.clone();
    q.set_strategy(game, low, &s_low);
    let br = best_response_with(game, &q, high, cfg, Some(e));
    let mut s_high = strategy_of(game, high, &br.allocation);
    let ie = game.incident(high).iter().position(|&f| f == e).unwrap();
    s_high[ie] = s_high[ie].min(fixed.effort(e));
    let approximate = !fixed.kind.is_exact() || !br.kind.is_exact();
    Ok(if low == u {
        accept(game, p, u, v, s_low, s_high, approximate, cfg)
    } else {
        accept(game, p, u, v, s_high, s_low, approximate, cfg)
    })
}

/// Best joint lattice deviations, each refined by alternating best
/// responses until both strategies are mutual best responses.
fn refined_grid(game: &Game, p: &Profile, u: usize, v: usize, e: usize, cfg: &Config) -> Option<BilateralMove> {
    let mut g = cfg.grid.max(1);
    let size = |g: u32| node_lattice(game, u, g).len() as f64 * node_lattice(game, v, g).len() as f64;
    while g > 1 && size(g) > GENERIC_PAIR_CAP {
        g /= 2;
    }
    let (lu, lv) = (node_lattice(game, u, g), node_lattice(game, v, g));
    let (iu, iv) = (
        game.incident(u).iter().position(|&f| f == e).unwrap(),
        game.incident(v).iter().position(|&f| f == e).unwrap(),
    );
    let (wu, wv) = (game.utility(p, u), game.utility(p, v));
    let rest = |x: usize, s: &[f64], skip: usize| -> f64 {
        game.incident(x)
            .iter()
            .zip(s)
            .enumerate()
            .filter(|&(i, _)| i != skip)
            .map(|(_, (&f, &y))| game.edge(f).reward.eval(y, p.partner(game, x, f)))
            .sum()
    };
    let ru: Vec<f64> = lu.iter().map(|s| rest(u, s, iu)).collect();
    let rv: Vec<f64> = lv.iter().map(|s| rest(v, s, iv)).collect();
    let mut top: Vec<(f64, usize, usize)> = Vec::new();
    for (a, su) in lu.iter().enumerate() {
        for (b, sv) in lv.iter().enumerate() {
            let r = game.edge(e).reward.eval(su[iu], sv[iv]);
            let (gu, gv) = (ru[a] + r - wu, rv[b] + r - wv);
            if improves(gu, wu, cfg.tol) && improves(gv, wv, cfg.tol) {
                top.push((gu.min(gv), a, b));
            }
        }
    }
    top.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap().then((x.1, x.2).cmp(&(y.1, y.2))));
    top.truncate(GENERIC_CANDIDATES);
    for &(_, a, b) in &top {
        let mut q = apply_pair(game, p, u, v, &lu[a], &lv[b]);
        for _ in 0..REFINE_STEPS {
            let mut moved = false;
            for x in [u, v] {
                let br = best_response_with(game, &q, x, cfg, Some(e));
                let now = game.utility(&q, x);
                if improves(br.value - now, now, cfg.tol) {
                    br.apply(game, &mut q);
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
        let (su, sv) = (q.strategy(game, u), q.strategy(game, v));
        if let Some(m) = accept(game, p, u, v, su, sv, true, cfg) {
            return Some(m);
        }
    }
    // no refinement settles into mutual best responses: fall back to the
    // best joint lattice deviation
    let &(_, a, b) = top.first()?;
    let q = apply_pair(game, p, u, v, &lu[a], &lv[b]);
    Some(BilateralMove {
        strategies: [lu[a].clone(), lv[b].clone()],
        gains: [game.utility(&q, u) - wu, game.utility(&q, v) - wv],
        approximate: true,
    })
}

/// Number of "units" the random schedule draws from.
fn unit_count(game: &Game) -> usize {
    game.n() + game.m()
}

struct Runner<'a> {
    game: &'a Game,
    cfg: &'a Config,
    approximate: bool,
}

impl Runner<'_> {
    fn unilateral(&self, p: &Profile, v: usize) -> Option<(Vec<f64>, f64)> {
        let br = best_response(self.game, p, v, self.cfg);
        let now = self.game.utility(p, v);
        improves(br.value - now, now, self.cfg.tol).then(|| (strategy_of(self.game, v, &br.allocation), br.value - now))
    }

    fn bilateral(&mut self, p: &Profile, e: usize) -> Result<Option<BilateralMove>> {
        let edge = self.game.edge(e);
        let m = bilateral_best_response(self.game, p, edge.u, edge.v, self.cfg)?;
        if let Some(m) = &m {
            self.approximate |= m.approximate;
        }
        Ok(m)
    }

    /// Whether any single node or adjacent pair has an improving move.
    fn any_move(&mut self, p: &Profile) -> Result<bool> {
        for v in 0..self.game.n() {
            if self.unilateral(p, v).is_some() {
                return Ok(true);
            }
        }
        for e in 0..self.game.m() {
            if self.bilateral(p, e)?.is_some() {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

pub fn run_random(game: &Game, start: &Profile, seed: u64, max_rounds: usize, cfg: &Config) -> Result<Trajectory> {
    run(game, start, seed, max_rounds, Mode::Random, cfg)
}

pub fn run_concurrent(game: &Game, start: &Profile, seed: u64, max_rounds: usize, cfg: &Config) -> Result<Trajectory> {
    run(game, start, seed, max_rounds, Mode::Concurrent, cfg)
}

pub fn run(game: &Game, start: &Profile, seed: u64, max_rounds: usize, mode: Mode, cfg: &Config) -> Result<Trajectory> {
    run_observed(game, start, seed, max_rounds, mode, cfg, |_| {})
}

/// [`run`], calling `observe` on the start profile and after every round.
pub fn run_observed(
    game: &Game,
    start: &Profile,
    seed: u64,
    max_rounds: usize,
    mode: Mode,
    cfg: &Config,
    mut observe: impl FnMut(&Profile),
) -> Result<Trajectory> {
    game.check_feasible(start, cfg.tol)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut runner = Runner { game, cfg, approximate: false };
    let mut p = start.clone();
    observe(&p);
    let mut seen: HashMap<String, usize> = HashMap::new();
    seen.insert(fingerprint(&p), 0);
    let mut rounds = Vec::new();
    let mut notes = Vec::new();
    // a sweep is only worth repeating after the profile changed
    let mut dirty = true;
    let mut verdict = TerminalVerdict::RoundBudgetExhausted;
    let mut certified_by = None;
    let mut stall_noted = false;

    let mut round = 0;
    loop {
        if dirty {
            dirty = false;
            if !runner.any_move(&p)? {
                let report = verify_pairwise(game, &p, cfg);
                if report.is_stable() {
                    verdict = TerminalVerdict::Converged { round };
                    certified_by = Some(report.method);
                    break;
                }
                if !stall_noted {
                    stall_noted = true;
                    notes.push(format!(
                        "round {round}: no unilateral or bilateral best response exists, but pairwise verification reports {:?}",
                        report.verdict
                    ));
                }
            }
        }
        if round == max_rounds {
            break;
        }
        round += 1;
        let moves = match mode {
            Mode::Random => random_round(&mut runner, &mut p, &mut rng)?,
            Mode::Concurrent => concurrent_round(&mut runner, &mut p, &mut rng)?,
        };
        observe(&p);
        let changed = moves.iter().any(|m| m.kind != MoveKind::None);
        let fp = fingerprint(&p);
        rounds.push(RoundRecord { index: round, moves, fingerprint: fp.clone() });
        if changed {
            dirty = true;
            if let Some(&first) = seen.get(&fp) {
                verdict = TerminalVerdict::CycleDetected { period: round - first, first_visit: first };
                break;
            }
            seen.insert(fp, round);
        }
    }
    Ok(Trajectory {
        seed,
        mode,
        game_hash: game_hash(game),
        max_rounds,
        rounds,
        verdict,
        final_profile: p,
        certified_by,
        approximate: runner.approximate,
        notes,
    })
}

fn random_round(runner: &mut Runner, p: &mut Profile, rng: &mut ChaCha8Rng) -> Result<Vec<MoveRecord>> {
    let game = runner.game;
    let units = unit_count(game);
    if units == 0 {
        return Ok(Vec::new());
    }
    let k = rng.random_range(0..units);
    if k < game.n() {
        let v = k;
        Ok(vec![match runner.unilateral(p, v) {
            Some((s, gain)) => {
                p.set_strategy(game, v, &s);
                MoveRecord { nodes: vec![v], kind: MoveKind::UnilateralBr, deltas: vec![gain] }
            }
            None => MoveRecord { nodes: vec![v], kind: MoveKind::None, deltas: Vec::new() },
        }])
    } else {
        let e = k - game.n();
        let edge = game.edge(e);
        let nodes = vec![edge.u, edge.v];
        Ok(vec![match runner.bilateral(p, e)? {
            Some(m) => {
                p.set_strategy(game, edge.u, &m.strategies[0]);
                p.set_strategy(game, edge.v, &m.strategies[1]);
                MoveRecord { nodes, kind: MoveKind::BilateralBr, deltas: m.gains.to_vec() }
            }
            None => MoveRecord { nodes, kind: MoveKind::None, deltas: Vec::new() },
        }])
    }
}

fn concurrent_round(runner: &mut Runner, p: &mut Profile, rng: &mut ChaCha8Rng) -> Result<Vec<MoveRecord>> {
    let game = runner.game;
    // choice[v] = None for a unilateral move, Some(w) for a proposal to w
    let choice: Vec<Option<usize>> = (0..game.n())
        .map(|v| {
            let r = rng.random_range(0..=game.degree(v));
            (r > 0).then(|| game.edge(game.incident(v)[r - 1]).other(v))
        })
        .collect();
    let start = p.clone();
    let mut records = Vec::new();
    let mut updates: Vec<(usize, Vec<f64>)> = Vec::new();
    for v in 0..game.n() {
        match choice[v] {
            None => match runner.unilateral(&start, v) {
                Some((s, gain)) => {
                    updates.push((v, s));
                    records.push(MoveRecord { nodes: vec![v], kind: MoveKind::UnilateralBr, deltas: vec![gain] });
                }
                None => records.push(MoveRecord { nodes: vec![v], kind: MoveKind::None, deltas: Vec::new() }),
            },
            Some(w) if w > v && choice[w] == Some(v) => {
                let e = game.edge_between(v, w).unwrap();
                match runner.bilateral(&start, e)? {
                    Some(m) => {
                        let edge = game.edge(e);
                        updates.push((edge.u, m.strategies[0].clone()));
                        updates.push((edge.v, m.strategies[1].clone()));
                        records.push(MoveRecord { nodes: vec![edge.u, edge.v], kind: MoveKind::BilateralBr, deltas: m.gains.to_vec() });
                    }
                    None => {
                        let edge = game.edge(e);
                        records.push(MoveRecord { nodes: vec![edge.u, edge.v], kind: MoveKind::None, deltas: Vec::new() });
                    }
                }
            }
            Some(_) => {}
        }
    }
    for (v, s) in updates {
        p.set_strategy(game, v, &s);
    }
    Ok(records)
}

impl Trajectory {
    pub fn converged(&self) -> bool {
        matches!(self.verdict, TerminalVerdict::Converged { .. })
    }

    pub fn header_json(&self) -> Value {
        json!({
            "type": "header",
            "rng": "chacha8",
            "seed": self.seed,
            "mode": self.mode,
            "game_hash": self.game_hash,
            "max_rounds": self.max_rounds,
        })
    }

    pub fn round_json(&self, game: &Game, r: &RoundRecord) -> Value {
        json!({
            "type": "round",
            "round": r.index,
            "moves": r.moves.iter().map(|m| json!({
                "unit": m.nodes.iter().map(|&v| game.node(v).id.clone()).collect::<Vec<_>>(),
                "kind": m.kind,
                "deltas": m.deltas,
            })).collect::<Vec<_>>(),
            "fingerprint": r.fingerprint,
        })
    }

    pub fn verdict_json(&self, game: &Game) -> Value {
        let mut v = match self.verdict {
            TerminalVerdict::Converged { round } => json!({ "verdict": "converged", "round": round }),
            TerminalVerdict::CycleDetected { period, first_visit } => {
                json!({ "verdict": "cycle-detected", "period": period, "first_visit": first_visit })
            }
            TerminalVerdict::RoundBudgetExhausted => json!({ "verdict": "round-budget-exhausted" }),
        };
        let m = v.as_object_mut().unwrap();
        m.insert("type".into(), json!("verdict"));
        m.insert("rounds".into(), json!(self.rounds.len()));
        m.insert("welfare".into(), json!(game.welfare(&self.final_profile)));
        m.insert("profile".into(), profile_to_value(game, &self.final_profile));
        if let Some(c) = self.certified_by {
            m.insert("certified_by".into(), json!(c));
        }
        m.insert("approximate".into(), json!(self.approximate));
        if !self.notes.is_empty() {
            m.insert("notes".into(), json!(self.notes));
        }
        v
    }

    pub fn write_jsonl(&self, game: &Game, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "{}", self.header_json())?;
        for r in &self.rounds {
            writeln!(out, "{}", self.round_json(game, r))?;
        }
        writeln!(out, "{}", self.verdict_json(game))
    }
}

/// Progress measure for min-effort games with concave `h`: the largest
/// derivative `h'_e(min effort)` over edges not yet stabilized, and the
/// stabilized set itself.
pub fn concave_progress(game: &Game, p: &Profile, tol: f64) -> (f64, Vec<bool>) {
    let deriv: Vec<f64> = (0..game.m())
        .map(|e| {
            let h = game.edge(e).reward.min_h().expect("min_effort reward");
            let x = p.eff[e][0].min(p.eff[e][1]);
            if x > 0.0 { h.deriv_left(x) } else { h.deriv_right(0.0) }
        })
        .collect();
    let close = |a: f64, b: f64| a == b || (a.is_finite() && b.is_finite() && (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0));
    // only effort matched by the partner counts toward a full budget
    let useful = |v: usize| game.incident(v).iter().map(|&e| p.eff[e][0].min(p.eff[e][1])).sum::<f64>();
    let full = |v: usize| useful(v) >= game.budget(v) - tol * game.budget(v).max(1.0);
    let mut stable = vec![false; game.m()];
    loop {
        let open: Vec<usize> = (0..game.m()).filter(|&e| !stable[e]).collect();
        let Some(top) = open.iter().map(|&e| deriv[e]).reduce(f64::max) else { break };
        let mut grew = false;
        for &e in open.iter().filter(|&&e| close(deriv[e], top)) {
            let settled = game.edge(e).endpoints().into_iter().any(|x| {
                full(x) && game.incident(x).iter().all(|&f| stable[f] || close(deriv[f], top))
            });
            if settled {
                stable[e] = true;
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }
    let top = (0..game.m()).filter(|&e| !stable[e]).map(|e| deriv[e]).fold(f64::NEG_INFINITY, f64::max);
    (top, stable)
}
