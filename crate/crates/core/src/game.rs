//! Games, strategy profiles and welfare accounting.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::reward::RewardSpec;

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub id: String,
    pub budget: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub id: String,
    pub u: usize,
    pub v: usize,
    pub reward: RewardSpec,
}

impl Edge {
    /// Position of `node` in the endpoint pair.
    pub fn side(&self, node: usize) -> Option<usize> {
        if node == self.u {
            Some(0)
        } else if node == self.v {
            Some(1)
        } else {
            None
        }
    }

    pub fn other(&self, node: usize) -> usize {
        if node == self.u {
            self.v
        } else {
            self.u
        }
    }

    pub fn endpoints(&self) -> [usize; 2] {
        [self.u, self.v]
    }
}

/// Immutable game on a simple undirected graph. Nodes and edges keep their
/// declaration order, which is also the tie-breaking order everywhere.
#[derive(Clone, Debug)]
pub struct Game {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
    node_index: HashMap<String, usize>,
    edge_index: HashMap<String, usize>,
}

impl PartialEq for Game {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.edges == other.edges
    }
}

#[derive(Default)]
pub struct GameBuilder {
    nodes: Vec<Node>,
    edges: Vec<(String, String, String, RewardSpec)>,
}

impl GameBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node(mut self, id: impl Into<String>, budget: f64) -> Self {
        self.nodes.push(Node { id: id.into(), budget });
        self
    }

    pub fn edge(mut self, id: impl Into<String>, u: impl Into<String>, v: impl Into<String>, reward: RewardSpec) -> Self {
        self.edges.push((id.into(), u.into(), v.into(), reward));
        self
    }

    pub fn add_node(&mut self, id: impl Into<String>, budget: f64) {
        self.nodes.push(Node { id: id.into(), budget });
    }

    pub fn add_edge(&mut self, id: impl Into<String>, u: impl Into<String>, v: impl Into<String>, reward: RewardSpec) {
        self.edges.push((id.into(), u.into(), v.into(), reward));
    }

    pub fn build(self) -> Result<Game> {
        Game::new(self.nodes, self.edges)
    }
}

impl Game {
    pub fn builder() -> GameBuilder {
        GameBuilder::new()
    }

    pub fn new(nodes: Vec<Node>, edges: Vec<(String, String, String, RewardSpec)>) -> Result<Game> {
        let mut node_index = HashMap::new();
        for (i, n) in nodes.iter().enumerate() {
            let location = format!("nodes[{i}]");
            if !(n.budget >= 0.0) || !n.budget.is_finite() {
                return Err(Error::NegativeBudget { node: n.id.clone(), budget: n.budget, location });
            }
            if node_index.insert(n.id.clone(), i).is_some() {
                return Err(Error::DuplicateId { id: n.id.clone(), location });
            }
        }
        let mut edge_index = HashMap::new();
        let mut pairs = HashMap::new();
        let mut adj = vec![Vec::new(); nodes.len()];
        let mut out = Vec::with_capacity(edges.len());
        for (j, (id, a, b, reward)) in edges.into_iter().enumerate() {
            let location = format!("edges[{j}]");
            let u = *node_index
                .get(&a)
                .ok_or_else(|| Error::UnknownNode { node: a.clone(), location: format!("{location}.u") })?;
            let v = *node_index
                .get(&b)
                .ok_or_else(|| Error::UnknownNode { node: b.clone(), location: format!("{location}.v") })?;
            if u == v {
                return Err(Error::SelfLoop { node: a, location });
            }
            if pairs.insert((u.min(v), u.max(v)), j).is_some() {
                return Err(Error::DuplicateEdge { u: a, v: b, location });
            }
            if edge_index.insert(id.clone(), j).is_some() {
                return Err(Error::DuplicateId { id, location });
            }
            reward.validate(&format!("{location}.reward"))?;
            adj[u].push(j);
            adj[v].push(j);
            out.push(Edge { id, u, v, reward });
        }
        Ok(Game { nodes, edges: out, adj, node_index, edge_index })
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, v: usize) -> &Node {
        &self.nodes[v]
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn budget(&self, v: usize) -> f64 {
        self.nodes[v].budget
    }

    /// Incident edges of `v` in declaration order.
    pub fn incident(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn node_idx(&self, id: &str) -> Result<usize> {
        self.node_index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownNode { node: id.to_string(), location: "lookup".into() })
    }

    pub fn edge_idx(&self, id: &str) -> Result<usize> {
        self.edge_index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownEdge { edge: id.to_string(), location: "lookup".into() })
    }

    pub fn edge_between(&self, u: usize, v: usize) -> Option<usize> {
        self.adj[u].iter().copied().find(|&e| self.edges[e].other(u) == v)
    }

    pub fn uniform_budgets(&self) -> bool {
        match self.nodes.first() {
            None => true,
            Some(first) => self.nodes.iter().all(|n| n.budget == first.budget),
        }
    }

    /// `c_e = f_e(B_u, B_v)`
    pub fn max_reward(&self, e: usize) -> f64 {
        let edge = &self.edges[e];
        edge.reward.max_reward(self.budget(edge.u), self.budget(edge.v))
    }

    pub fn all_rewards(&self, pred: impl Fn(&RewardSpec) -> bool) -> bool {
        self.edges.iter().all(|e| pred(&e.reward))
    }

    pub fn edge_reward(&self, p: &Profile, e: usize) -> f64 {
        let [x, y] = p.eff[e];
        self.edges[e].reward.eval(x, y)
    }

    pub fn utility(&self, p: &Profile, v: usize) -> f64 {
        self.adj[v].iter().map(|&e| self.edge_reward(p, e)).sum()
    }

    /// Welfare as the sum of node utilities.
    pub fn welfare(&self, p: &Profile) -> f64 {
        (0..self.n()).map(|v| self.utility(p, v)).sum()
    }

    /// Welfare as twice the sum of edge rewards.
    pub fn welfare_by_edges(&self, p: &Profile) -> f64 {
        2.0 * (0..self.m()).map(|e| self.edge_reward(p, e)).sum::<f64>()
    }

    pub fn potential(&self, p: &Profile) -> f64 {
        self.welfare_by_edges(p) / 2.0
    }

    pub fn check_feasible(&self, p: &Profile, tol: f64) -> Result<()> {
        if p.eff.len() != self.m() {
            return Err(Error::InvalidArgument(format!(
                "profile has {} edges, game has {}",
                p.eff.len(),
                self.m()
            )));
        }
        for v in 0..self.n() {
            let used = p.total(self, v);
            if p.eff.iter().flatten().any(|x| !(x.is_finite() && *x >= -tol)) {
                return Err(Error::InvalidArgument("efforts must be finite and nonnegative".into()));
            }
            if used > self.budget(v) + tol {
                return Err(Error::Infeasible { node: self.nodes[v].id.clone(), used, budget: self.budget(v) });
            }
        }
        Ok(())
    }
}

/// Effort placed by each endpoint on each edge; `eff[e][0]` belongs to
/// `edge.u` and `eff[e][1]` to `edge.v`.
#[derive(Clone, Debug, PartialEq)]
pub struct Profile {
    pub eff: Vec<[f64; 2]>,
}

impl Profile {
    pub fn zeros(game: &Game) -> Self {
        Profile { eff: vec![[0.0, 0.0]; game.m()] }
    }

    pub fn get(&self, game: &Game, v: usize, e: usize) -> f64 {
        match game.edge(e).side(v) {
            Some(s) => self.eff[e][s],
            None => 0.0,
        }
    }

    pub fn set(&mut self, game: &Game, v: usize, e: usize, x: f64) {
        let s = game.edge(e).side(v).expect("edge not incident to node");
        self.eff[e][s] = x;
    }

    /// Effort of the other endpoint of `e`.
    pub fn partner(&self, game: &Game, v: usize, e: usize) -> f64 {
        let s = game.edge(e).side(v).expect("edge not incident to node");
        self.eff[e][1 - s]
    }

    pub fn total(&self, game: &Game, v: usize) -> f64 {
        game.incident(v).iter().map(|&e| self.get(game, v, e)).sum()
    }

    /// Strategy of `v` as efforts over its incident edges.
    pub fn strategy(&self, game: &Game, v: usize) -> Vec<f64> {
        game.incident(v).iter().map(|&e| self.get(game, v, e)).collect()
    }

    pub fn set_strategy(&mut self, game: &Game, v: usize, xs: &[f64]) {
        for (&e, &x) in game.incident(v).iter().zip(xs) {
            self.set(game, v, e, x);
        }
    }

    /// Both endpoints put `x` on every edge listed.
    pub fn symmetric(game: &Game, xs: &[(usize, f64)]) -> Self {
        let mut p = Profile::zeros(game);
        for &(e, x) in xs {
            p.eff[e] = [x, x];
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ScalarFn;

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

    #[test]
    fn triangle_utilities() {
        let g = triangle();
        let mut p = Profile::zeros(&g);
        p.set(&g, 0, 0, 1.0);
        p.set(&g, 2, 1, 1.0);
        for a in [0.0, 0.3, 1.0] {
            p.set(&g, 1, 0, a);
            p.set(&g, 1, 1, 1.0 - a);
            assert!((g.utility(&p, 0) - (3.0 + 3.0 * a)).abs() < 1e-12);
        }
        p.set(&g, 1, 0, 1.0);
        p.set(&g, 1, 1, 0.0);
        assert!((g.welfare(&p) - 18.0).abs() < 1e-12);
        assert!((g.welfare_by_edges(&p) - 18.0).abs() < 1e-12);
    }

    #[test]
    fn construction_errors() {
        let r = RewardSpec::WeightedSum { c: 1.0 };
        let neg = Game::builder().node("a", -1.0).build();
        assert!(matches!(neg, Err(Error::NegativeBudget { .. })));
        let dup = Game::builder()
            .node("a", 1.0)
            .node("b", 1.0)
            .edge("e", "a", "b", r.clone())
            .edge("f", "b", "a", r.clone())
            .build();
        assert!(matches!(dup, Err(Error::DuplicateEdge { .. })));
        let lp = Game::builder().node("a", 1.0).edge("e", "a", "a", r.clone()).build();
        assert!(matches!(lp, Err(Error::SelfLoop { .. })));
        let bad = Game::builder()
            .node("a", 1.0)
            .node("b", 1.0)
            .edge("e", "a", "b", RewardSpec::MinEffort { h: ScalarFn::linear(-1.0) })
            .build();
        assert!(matches!(bad, Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn isolated_node_has_zero_utility() {
        let g = Game::builder().node("a", 1.0).build().unwrap();
        assert_eq!(g.utility(&Profile::zeros(&g), 0), 0.0);
        assert!(g.uniform_budgets());
    }
}
