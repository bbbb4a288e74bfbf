//! Class-specific equilibrium constructions, social optima and
//! price-of-anarchy metrics.

mod greedy;
mod max_effort;
mod metrics;
mod min_effort;
mod optimum;
pub mod simplex;
mod weighted_sum;

use serde::Serialize;
use serde_json::{json, Value};

use crate::game::{Game, Profile};
use crate::io::profile_to_value;

pub use greedy::solve_greedy_c0;
pub use max_effort::solve_max_effort;
pub use metrics::{dual_certificate, price_of_anarchy, DualCertificate, PoaRecord};
pub use min_effort::{solve_min_concave, solve_min_convex_uniform};
pub use optimum::{social_optimum, OptMethod, Optimum};
pub use weighted_sum::solve_weighted_sum;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Equilibrium,
    NoEquilibrium,
    Unsupported,
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub status: Status,
    pub profile: Option<Profile>,
    pub welfare: Option<f64>,
    /// Violated condition when no equilibrium exists.
    pub witness: Option<String>,
    pub algorithm: &'static str,
    /// The constructing argument also rules out coalitions of any size.
    pub strong: bool,
    /// The equilibrium is the only one.
    pub unique: bool,
    /// Some best responses were grid approximations.
    pub approximate: bool,
    pub poa: Option<f64>,
    /// Potential after every applied move, for iterative solvers.
    pub potential_trace: Vec<f64>,
    pub notes: Vec<String>,
}

impl SolveOutcome {
    pub(crate) fn new(status: Status, algorithm: &'static str) -> Self {
        SolveOutcome {
            status,
            profile: None,
            welfare: None,
            witness: None,
            algorithm,
            strong: false,
            unique: false,
            approximate: false,
            poa: None,
            potential_trace: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub(crate) fn unsupported(algorithm: &'static str, why: impl Into<String>) -> Self {
        let mut o = Self::new(Status::Unsupported, algorithm);
        o.notes.push(why.into());
        o
    }

    pub(crate) fn no_equilibrium(algorithm: &'static str, witness: String) -> Self {
        let mut o = Self::new(Status::NoEquilibrium, algorithm);
        o.witness = Some(witness);
        o
    }

    pub(crate) fn equilibrium(game: &Game, algorithm: &'static str, profile: Profile) -> Self {
        let mut o = Self::new(Status::Equilibrium, algorithm);
        o.welfare = Some(game.welfare(&profile));
        o.profile = Some(profile);
        o
    }

    pub fn to_json(&self, game: &Game) -> Value {
        let mut v = json!({
            "status": self.status,
            "algorithm": self.algorithm,
        });
        let m = v.as_object_mut().unwrap();
        if let Some(p) = &self.profile {
            m.insert("profile".into(), profile_to_value(game, p));
        }
        if let Some(w) = self.welfare {
            m.insert("welfare".into(), json!(w));
        }
        if let Some(w) = &self.witness {
            m.insert("witness".into(), json!(w));
        }
        if self.status == Status::Equilibrium {
            m.insert("strong".into(), json!(self.strong));
            m.insert("unique".into(), json!(self.unique));
            m.insert("approximate".into(), json!(self.approximate));
        }
        if let Some(p) = self.poa {
            m.insert("poa".into(), json!(p));
        }
        if !self.potential_trace.is_empty() {
            m.insert("potential_trace".into(), json!(self.potential_trace));
        }
        if !self.notes.is_empty() {
            m.insert("notes".into(), json!(self.notes));
        }
        v
    }
}
