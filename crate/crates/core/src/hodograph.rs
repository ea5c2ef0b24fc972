//! The hodograph matrix `M(t,u) = tI + ∂f/∂u` and quantities derived from it.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, ShiftedExpansion};
use crate::map::InitialDataMap;

/// Default relative tolerance for numerical rank decisions.
pub const TOL_RANK: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct HodographMatrix {
    pub t: f64,
    pub u: Vec<f64>,
    pub entries: DMatrix<f64>,
    pub det: f64,
    pub adjugate: DMatrix<f64>,
    pub rank: usize,
}

pub fn build_matrix(map: &InitialDataMap, t: f64, u: &[f64]) -> Result<HodographMatrix> {
    let j = map.jacobian(u)?;
    Ok(HodographMatrix::from_jacobian(t, u, &j))
}

impl HodographMatrix {
    pub fn from_jacobian(t: f64, u: &[f64], jacobian: &DMatrix<f64>) -> Self {
        let n = jacobian.nrows();
        let mut entries = jacobian.clone();
        for i in 0..n {
            entries[(i, i)] += t;
        }
        Self::from_entries(t, u, entries)
    }

    pub fn from_entries(t: f64, u: &[f64], entries: DMatrix<f64>) -> Self {
        let n = entries.nrows();
        let det = linalg::determinant(&entries);
        let adjugate = linalg::adjugate(&entries);
        let scale = linalg::max_abs(&entries);
        let rank = if det.abs() > TOL_RANK * scale.powi(n as i32) {
            n
        } else {
            linalg::eliminate(&entries, TOL_RANK).rank.min(n.saturating_sub(1))
        };
        Self {
            t,
            u: u.to_vec(),
            entries,
            det,
            adjugate,
            rank,
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Largest absolute entry.
    pub fn norm(&self) -> f64 {
        linalg::max_abs(&self.entries)
    }

    /// True when `|det|` is at the round-off floor `(ε‖M‖)ⁿ`.
    pub fn is_singular(&self) -> bool {
        let floor = (f64::EPSILON * self.norm()).powi(self.dim() as i32);
        !self.det.is_finite() || self.det.abs() <= floor
    }

    /// Velocity gradient `(∂u/∂x)_{jk} = M̃_{jk} / det M`
    /// (row = velocity component, column = space direction).
    pub fn derivatives_from_inverse(&self) -> Result<DMatrix<f64>> {
        if self.is_singular() {
            return Err(Error::Singular { det: self.det });
        }
        Ok(&self.adjugate / self.det)
    }

    /// Rank by complete-pivoting elimination with relative pivot tolerance.
    pub fn numerical_rank(&self, tol_rank: f64) -> usize {
        numerical_rank(&self.entries, tol_rank)
    }
}

pub fn numerical_rank(m: &DMatrix<f64>, tol_rank: f64) -> usize {
    linalg::eliminate(m, tol_rank).rank
}

/// Coefficients of the monic polynomial `det M(t,u) = tⁿ + a_{n−1}tⁿ⁻¹ + … + a₀`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CharacteristicCoefficients {
    /// `a[k]` multiplies `t^k`, k = 0..n−1.
    pub a: Vec<f64>,
}

impl CharacteristicCoefficients {
    /// Exact trace/minor formulas for n ≤ 3, Faddeev–LeVerrier above.
    pub fn from_jacobian(j: &DMatrix<f64>) -> Self {
        let n = j.nrows();
        let a = match n {
            1 => vec![j[(0, 0)]],
            2 => vec![linalg::determinant(j), j.trace()],
            3 => {
                let minors = j[(0, 0)] * j[(1, 1)] - j[(0, 1)] * j[(1, 0)]
                    + j[(0, 0)] * j[(2, 2)]
                    - j[(0, 2)] * j[(2, 0)]
                    + j[(1, 1)] * j[(2, 2)]
                    - j[(1, 2)] * j[(2, 1)];
                vec![linalg::determinant(j), minors, j.trace()]
            }
            _ => {
                let exp = ShiftedExpansion::new(j);
                exp.det_coeffs[..n].to_vec()
            }
        };
        Self { a }
    }

    /// Coefficients of a monic polynomial with the given roots (with repetition).
    pub fn from_roots(roots: &[f64]) -> Self {
        let mut p = vec![1.0];
        for r in roots {
            let mut next = vec![0.0; p.len() + 1];
            for (k, c) in p.iter().enumerate() {
                next[k + 1] += c;
                next[k] -= r * c;
            }
            p = next;
        }
        p.pop();
        Self { a: p }
    }

    pub fn degree(&self) -> usize {
        self.a.len()
    }

    /// Full ascending coefficient list including the leading 1.
    pub fn monic(&self) -> Vec<f64> {
        let mut v = self.a.clone();
        v.push(1.0);
        v
    }

    pub fn eval(&self, t: f64) -> f64 {
        linalg::horner(&self.monic(), t)
    }

    /// `k`-th derivative in `t`.
    pub fn derivative(&self, t: f64, k: usize) -> f64 {
        let mut c = self.monic();
        for _ in 0..k {
            c = linalg::poly_derivative(&c);
        }
        linalg::horner(&c, t)
    }
}

pub fn characteristic_coefficients(
    map: &InitialDataMap,
    u: &[f64],
) -> Result<CharacteristicCoefficients> {
    Ok(CharacteristicCoefficients::from_jacobian(&map.jacobian(u)?))
}
