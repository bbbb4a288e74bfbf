use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A 3-CNF formula over variables `1..=k`; literal `-i` is the negation of
/// variable `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CnfFormula {
    pub k: usize,
    pub clauses: Vec<[i32; 3]>,
}

impl CnfFormula {
    pub fn new(k: usize, clauses: Vec<[i32; 3]>) -> Result<Self> {
        if clauses.is_empty() {
            return Err(Error::Cnf("formula has no clauses".into()));
        }
        for (j, c) in clauses.iter().enumerate() {
            for &lit in c {
                if lit == 0 || lit.unsigned_abs() as usize > k {
                    return Err(Error::Cnf(format!("clause {} has literal {lit} outside 1..={k}", j + 1)));
                }
            }
        }
        Ok(CnfFormula { k, clauses })
    }

    pub fn l(&self) -> usize {
        self.clauses.len()
    }

    /// Reads DIMACS CNF; every clause must have exactly three literals.
    pub fn parse_dimacs(text: &str) -> Result<Self> {
        let mut header: Option<(usize, usize)> = None;
        let mut lits: Vec<i32> = Vec::new();
        let mut clauses = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
                continue;
            }
            if line.starts_with('p') {
                let parts: Vec<&str> = line.split_whitespace().collect();
                if parts.len() != 4 || parts[1] != "cnf" {
                    return Err(Error::Cnf(format!("line {}: expected 'p cnf <vars> <clauses>'", ln + 1)));
                }
                let num = |s: &str| s.parse::<usize>().map_err(|_| Error::Cnf(format!("line {}: bad number '{s}'", ln + 1)));
                header = Some((num(parts[2])?, num(parts[3])?));
                continue;
            }
            if header.is_none() {
                return Err(Error::Cnf(format!("line {}: clause before the problem line", ln + 1)));
            }
            for tok in line.split_whitespace() {
                let lit: i32 = tok.parse().map_err(|_| Error::Cnf(format!("line {}: bad literal '{tok}'", ln + 1)))?;
                if lit == 0 {
                    if lits.len() != 3 {
                        return Err(Error::Cnf(format!("line {}: clause {} has {} literals, expected 3", ln + 1, clauses.len() + 1, lits.len())));
                    }
                    clauses.push([lits[0], lits[1], lits[2]]);
                    lits.clear();
                } else {
                    lits.push(lit);
                }
            }
        }
        if !lits.is_empty() {
            return Err(Error::Cnf("last clause is not terminated by 0".into()));
        }
        let (k, l) = header.ok_or_else(|| Error::Cnf("missing problem line".into()))?;
        if clauses.len() != l {
            return Err(Error::Cnf(format!("problem line declares {l} clauses, found {}", clauses.len())));
        }
        CnfFormula::new(k, clauses)
    }

    pub fn to_dimacs(&self) -> String {
        let mut s = format!("p cnf {} {}\n", self.k, self.l());
        for c in &self.clauses {
            s.push_str(&format!("{} {} {} 0\n", c[0], c[1], c[2]));
        }
        s
    }

    pub fn satisfied_by(&self, assignment: &[bool]) -> bool {
        self.clauses.iter().all(|c| c.iter().any(|&lit| assignment[lit.unsigned_abs() as usize - 1] == (lit > 0)))
    }

    /// First satisfying assignment in binary counting order, for small `k`.
    pub fn solve(&self) -> Option<Vec<bool>> {
        if self.k > 24 {
            return None;
        }
        (0u64..1 << self.k)
            .map(|bits| (0..self.k).map(|i| bits >> i & 1 == 1).collect::<Vec<_>>())
            .find(|a| self.satisfied_by(a))
    }
}

/// Random 3-CNF with distinct variables per clause, satisfied by a planted
/// assignment.
pub fn random_satisfiable_cnf(k: usize, l: usize, seed: u64) -> Result<CnfFormula> {
    if k < 3 || l == 0 {
        return Err(Error::InvalidArgument("need k >= 3 variables and at least one clause".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let planted: Vec<bool> = (0..k).map(|_| rng.random_bool(0.5)).collect();
    let mut clauses = Vec::with_capacity(l);
    while clauses.len() < l {
        let mut vars: Vec<usize> = Vec::new();
        while vars.len() < 3 {
            let v = rng.random_range(1..=k);
            if !vars.contains(&v) {
                vars.push(v);
            }
        }
        let c: Vec<i32> = vars.iter().map(|&v| if rng.random_bool(0.5) { v as i32 } else { -(v as i32) }).collect();
        if c.iter().any(|&lit| planted[lit.unsigned_abs() as usize - 1] == (lit > 0)) {
            clauses.push([c[0], c[1], c[2]]);
        }
    }
    CnfFormula::new(k, clauses)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimacs_round_trip() {
        let f = CnfFormula::parse_dimacs("c demo\np cnf 3 2\n1 -2 3 0\n-1 2 3 0\n").unwrap();
        assert_eq!(f.clauses, vec![[1, -2, 3], [-1, 2, 3]]);
        assert_eq!(CnfFormula::parse_dimacs(&f.to_dimacs()).unwrap(), f);
    }

    #[test]
    fn dimacs_errors() {
        assert!(CnfFormula::parse_dimacs("p cnf 3 1\n1 2 0\n").is_err());
        assert!(CnfFormula::parse_dimacs("p cnf 3 1\n1 2 4 0\n").is_err());
        assert!(CnfFormula::parse_dimacs("p cnf 3 0\n").is_err());
        assert!(CnfFormula::parse_dimacs("1 2 3 0\n").is_err());
    }

    #[test]
    fn planted_formulas_are_satisfiable() {
        for seed in 0..20 {
            let f = random_satisfiable_cnf(4, 3, seed).unwrap();
            assert!(f.solve().is_some());
        }
    }
}
