//! Network contribution games: players on a graph split effort budgets
//! across incident edges and every edge pays a symmetric reward to both
//! endpoints.
//!
//! The crate computes and certifies pairwise equilibria, social optima,
//! price-of-anarchy ratios and best-response dynamics for the reward
//! families in [`reward::RewardSpec`].

pub mod allocation;
pub mod dynamics;
pub mod equilibria;
pub mod error;
pub mod game;
pub mod instances;
pub mod io;
pub mod oracle;
pub mod reward;
pub mod scalar;
pub mod solvers;

pub use error::{Error, Result};
pub use game::{Edge, Game, GameBuilder, Node, Profile};
pub use reward::{Poly, RewardSpec};
pub use scalar::{ScalarFn, Shape};

/// Numerical settings shared by verifiers, solvers and dynamics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Config {
    /// Gains at or below this are not improvements.
    pub tol: f64,
    /// Grid resolution `g`: efforts are multiples of `B_v / g`.
    pub grid: u32,
    /// Largest lattice the grid routines will enumerate.
    pub grid_cap: u64,
}

impl Default for Config {
    fn default() -> Self {
        Config { tol: 1e-9, grid: 16, grid_cap: 5_000_000 }
    }
}

impl Config {
    pub fn with_grid(self, grid: u32) -> Self {
        Config { grid, ..self }
    }

    pub fn with_tol(self, tol: f64) -> Self {
        Config { tol, ..self }
    }
}
