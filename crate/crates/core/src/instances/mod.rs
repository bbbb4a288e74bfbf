//! Instance generators: named examples, 3-SAT gadgets and random families.

mod canonical;
mod cnf;
mod gadgets;
mod random;

pub use canonical::{canonical, canonical_names, Canonical};
pub use cnf::{random_satisfiable_cnf, CnfFormula};
pub use gadgets::{min_recipe, sat_gadget_min, sat_gadget_xy_sum, xy_sum_recipe};
pub use random::{random_family, Family};
