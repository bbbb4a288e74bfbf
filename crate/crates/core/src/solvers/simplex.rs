//! Dense tableau simplex for `max c·x  s.t.  A x <= b, x >= 0` with
//! `b >= 0`, pivoting by Bland's rule.

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
    /// Optimal dual values, one per constraint row.
    pub dual: Vec<f64>,
}

const EPS: f64 = 1e-12;

pub fn maximize(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<LpSolution> {
    let (rows, cols) = (a.len(), c.len());
    if b.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidArgument("right-hand sides must be nonnegative".into()));
    }
    if a.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidArgument("constraint row length does not match the objective".into()));
    }
    let width = cols + rows + 1;
    let mut t = vec![vec![0.0; width]; rows + 1];
    for i in 0..rows {
        t[i][..cols].copy_from_slice(&a[i]);
        t[i][cols + i] = 1.0;
        t[i][width - 1] = b[i];
    }
    for j in 0..cols {
        t[rows][j] = -c[j];
    }
    let mut basis: Vec<usize> = (cols..cols + rows).collect();
    let scale = c.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    loop {
        let Some(enter) = (0..cols + rows).find(|&j| t[rows][j] < -EPS * scale) else { break };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..rows {
            if t[i][enter] > EPS {
                let ratio = t[i][width - 1] / t[i][enter];
                leave = match leave {
                    Some((k, r)) if ratio > r + EPS || (ratio >= r - EPS && basis[i] > basis[k]) => Some((k, r)),
                    _ => Some((i, ratio)),
                };
            }
        }
        let Some((r, _)) = leave else {
            return Err(Error::Unsupported("linear program is unbounded".into()));
        };
        let pv = t[r][enter];
        for v in t[r].iter_mut() {
            *v /= pv;
        }
        for i in 0..=rows {
            if i != r && t[i][enter] != 0.0 {
                let f = t[i][enter];
                for j in 0..width {
                    t[i][j] -= f * t[r][j];
                }
            }
        }
        basis[r] = enter;
    }
    let mut x = vec![0.0; cols];
    for (i, &bv) in basis.iter().enumerate() {
        if bv < cols {
            x[bv] = t[i][width - 1].max(0.0);
        }
    }
    let dual = (0..rows).map(|i| t[rows][cols + i].max(0.0)).collect();
    Ok(LpSolution { value: c.iter().zip(&x).map(|(a, b)| a * b).sum(), x, dual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn textbook_instance() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18
        let s = maximize(&[3.0, 5.0], &[vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]], &[4.0, 12.0, 18.0]).unwrap();
        assert!((s.value - 36.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
        let dual_value: f64 = s.dual.iter().zip([4.0, 12.0, 18.0]).map(|(y, b)| y * b).sum();
        assert!((dual_value - 36.0).abs() < 1e-9);
    }

    #[test]
    fn unbounded_is_reported() {
        assert!(maximize(&[1.0], &[vec![-1.0]], &[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn strong_duality_on_packing_programs(
            c in prop::collection::vec(0.0f64..5.0, 1..6),
            seed in prop::collection::vec(0.0f64..3.0, 36),
            b in prop::collection::vec(0.1f64..4.0, 1..6),
        ) {
            let a: Vec<Vec<f64>> = (0..b.len())
                .map(|i| (0..c.len()).map(|j| seed[(i * 6 + j) % 36] + if i == j % b.len() { 0.5 } else { 0.0 }).collect())
                .collect();
            let s = maximize(&c, &a, &b).unwrap();
            for i in 0..b.len() {
                let used: f64 = a[i].iter().zip(&s.x).map(|(p, q)| p * q).sum();
                prop_assert!(used <= b[i] + 1e-7);
            }
            for j in 0..c.len() {
                let col: f64 = (0..b.len()).map(|i| a[i][j] * s.dual[i]).sum();
                prop_assert!(col >= c[j] - 1e-7);
            }
            let dual_value: f64 = s.dual.iter().zip(&b).map(|(y, q)| y * q).sum();
            prop_assert!((dual_value - s.value).abs() <= 1e-7 * s.value.max(1.0));
        }
    }
}
