//! Small dense linear algebra: cofactor adjugates, Faddeev–LeVerrier
//! expansions, and complete-pivoting elimination for rank and null spaces.

use nalgebra::{DMatrix, DVector};

/// Determinant by explicit expansion for n ≤ 3, Faddeev–LeVerrier above.
pub fn determinant(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    match n {
        0 => 1.0,
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        3 => {
            m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
                - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
                + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
        }
        _ => {
            let exp = ShiftedExpansion::new(m);
            exp.det_coeffs[0]
        }
    }
}

/// Adjugate (transposed cofactor matrix), so that `m * adj = det(m) * I`.
pub fn adjugate(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    match n {
        0 => DMatrix::zeros(0, 0),
        1 => DMatrix::from_element(1, 1, 1.0),
        2 => DMatrix::from_row_slice(2, 2, &[m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]]),
        3 => {
            let c = |r0: usize, r1: usize, c0: usize, c1: usize| {
                m[(r0, c0)] * m[(r1, c1)] - m[(r0, c1)] * m[(r1, c0)]
            };
            DMatrix::from_row_slice(
                3,
                3,
                &[
                    c(1, 2, 1, 2),
                    -c(0, 2, 1, 2),
                    c(0, 1, 1, 2),
                    -c(1, 2, 0, 2),
                    c(0, 2, 0, 2),
                    -c(0, 1, 0, 2),
                    c(1, 2, 0, 1),
                    -c(0, 2, 0, 1),
                    c(0, 1, 0, 1),
                ],
            )
        }
        _ => ShiftedExpansion::new(m).adjugate_at(0.0),
    }
}

/// Polynomial expansions of `det(tI + J)` and `adj(tI + J)` in `t`.
///
/// Built with the Faddeev–LeVerrier recursion applied to `A = -J`:
/// `det(tI - A) = Σ c_k t^k` and `adj(tI - A) = Σ_{k=1..n} N_k t^{n-k}`.
#[derive(Debug, Clone)]
pub struct ShiftedExpansion {
    /// `det_coeffs[k]` multiplies `t^k`; the leading entry is 1.
    pub det_coeffs: Vec<f64>,
    /// `adj_coeffs[k]` multiplies `t^k`, for k = 0..n-1.
    pub adj_coeffs: Vec<DMatrix<f64>>,
}

impl ShiftedExpansion {
    pub fn new(j: &DMatrix<f64>) -> Self {
        let n = j.nrows();
        let a = -j;
        let mut c = vec![0.0; n + 1];
        c[n] = 1.0;
        // nk[k-1] = N_k
        let mut nk: Vec<DMatrix<f64>> = Vec::with_capacity(n);
        let mut prev = DMatrix::<f64>::zeros(n, n);
        for k in 1..=n {
            let mut cur = &a * &prev;
            for i in 0..n {
                cur[(i, i)] += c[n - k + 1];
            }
            let an = &a * &cur;
            c[n - k] = -an.trace() / k as f64;
            nk.push(cur.clone());
            prev = cur;
        }
        let adj_coeffs = (0..n).map(|p| nk[n - 1 - p].clone()).collect();
        Self {
            det_coeffs: c,
            adj_coeffs,
        }
    }

    pub fn det_at(&self, t: f64) -> f64 {
        horner(&self.det_coeffs, t)
    }

    pub fn adjugate_at(&self, t: f64) -> DMatrix<f64> {
        let n = self.adj_coeffs.first().map_or(0, |m| m.nrows());
        let mut out = DMatrix::zeros(n, n);
        for c in self.adj_coeffs.iter().rev() {
            out = out * t + c;
        }
        out
    }

    /// `d/dt adj(tI + J)` evaluated at `t`.
    pub fn adjugate_derivative_at(&self, t: f64) -> DMatrix<f64> {
        let n = self.adj_coeffs.first().map_or(0, |m| m.nrows());
        let mut out = DMatrix::zeros(n, n);
        for (k, c) in self.adj_coeffs.iter().enumerate().skip(1).rev() {
            out = out * t + c * k as f64;
        }
        out
    }
}

/// Evaluates `Σ c_k x^k` (coefficients in ascending order).
pub fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Derivative coefficients of an ascending-order polynomial.
pub fn poly_derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| c * k as f64)
        .collect()
}

/// Result of complete-pivoting Gaussian elimination.
#[derive(Debug, Clone)]
pub struct Elimination {
    pub rank: usize,
    /// Reduced matrix (row echelon form in permuted column order).
    reduced: DMatrix<f64>,
    /// `col_perm[k]` is the original column placed at position k.
    col_perm: Vec<usize>,
}

/// Complete-pivoting elimination; pivots at or below `tol * |first pivot|`
/// are treated as zero.
pub fn eliminate(m: &DMatrix<f64>, tol: f64) -> Elimination {
    let (rows, cols) = m.shape();
    let mut a = m.clone();
    let mut col_perm: Vec<usize> = (0..cols).collect();
    let mut rank = 0;
    let mut first_pivot = 0.0;
    for k in 0..rows.min(cols) {
        // largest remaining entry; ties resolved by first (row, col) in scan order
        let mut best = (k, k, -1.0);
        for c in k..cols {
            for r in k..rows {
                let v = a[(r, c)].abs();
                if v > best.2 {
                    best = (r, c, v);
                }
            }
        }
        let (pr, pc, pv) = best;
        if k == 0 {
            first_pivot = pv;
        }
        if pv <= 0.0 || pv <= tol * first_pivot {
            break;
        }
        a.swap_rows(k, pr);
        a.swap_columns(k, pc);
        col_perm.swap(k, pc);
        let p = a[(k, k)];
        for r in (k + 1)..rows {
            let factor = a[(r, k)] / p;
            if factor != 0.0 {
                for c in k..cols {
                    let v = a[(k, c)];
                    a[(r, c)] -= factor * v;
                }
            }
            a[(r, k)] = 0.0;
        }
        rank += 1;
    }
    Elimination {
        rank,
        reduced: a,
        col_perm,
    }
}

impl Elimination {
    /// Basis of the right null space (unnormalized), one vector per free column.
    pub fn null_basis(&self) -> Vec<DVector<f64>> {
        let cols = self.reduced.ncols();
        let r = self.rank;
        let mut out = Vec::with_capacity(cols - r);
        for free in r..cols {
            // permuted-coordinate solution: z_free = 1, other free = 0, back-substitute pivots
            let mut z = DVector::<f64>::zeros(cols);
            z[free] = 1.0;
            for i in (0..r).rev() {
                let mut s = 0.0;
                for c in (i + 1)..cols {
                    s += self.reduced[(i, c)] * z[c];
                }
                z[i] = -s / self.reduced[(i, i)];
            }
            let mut v = DVector::<f64>::zeros(cols);
            for (k, &orig) in self.col_perm.iter().enumerate() {
                v[orig] = z[k];
            }
            out.push(v);
        }
        out
    }
}

/// Modified Gram–Schmidt; drops vectors whose residual falls below `drop_tol`.
pub fn orthonormalize(vs: &[DVector<f64>], drop_tol: f64) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(vs.len());
    for v in vs {
        let mut w = v.clone();
        // two passes for orthogonality at round-off level
        for _ in 0..2 {
            for q in &out {
                let d = q.dot(&w);
                w.axpy(-d, q, 1.0);
            }
        }
        let nrm = w.norm();
        if nrm > drop_tol * v.norm().max(f64::MIN_POSITIVE) {
            out.push(w / nrm);
        }
    }
    out
}

/// Flips the sign so that the first component above `1e-12 * |v|` is positive.
pub fn canonical_sign(mut v: DVector<f64>) -> DVector<f64> {
    let thresh = 1e-12 * v.norm();
    if let Some(x) = v.iter().find(|x| x.abs() > thresh) {
        if *x < 0.0 {
            v.neg_mut();
        }
    }
    v
}

/// Orthonormal completion of an orthonormal set, built greedily from the
/// standard basis (largest residual first, ties by index).
pub fn orthonormal_complement(basis: &[DVector<f64>], n: usize) -> Vec<DVector<f64>> {
    let mut current: Vec<DVector<f64>> = basis.to_vec();
    let mut out = Vec::new();
    while current.len() < n {
        let mut best: Option<(f64, DVector<f64>)> = None;
        for i in 0..n {
            let mut w = DVector::<f64>::zeros(n);
            w[i] = 1.0;
            for _ in 0..2 {
                for q in &current {
                    let d = q.dot(&w);
                    w.axpy(-d, q, 1.0);
                }
            }
            let nrm = w.norm();
            if best.as_ref().is_none_or(|(b, _)| nrm > *b + 1e-14) {
                best = Some((nrm, w));
            }
        }
        let (nrm, w) = best.expect("n > 0");
        let q = canonical_sign(w / nrm);
        current.push(q.clone());
        out.push(q);
    }
    out
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, &b| a.max(b.abs()))
}

/// Serializes a matrix as a list of rows.
pub fn serialize_rows<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(m.nrows()))?;
    for row in m.row_iter() {
        seq.serialize_element(&row.iter().copied().collect::<Vec<f64>>())?;
    }
    seq.end()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m3(v: [f64; 9]) -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 3, &v)
    }

    #[test]
    fn adjugate_identity_small() {
        let m = m3([2.0, -1.0, 0.5, 0.3, 4.0, 1.0, -2.0, 0.7, 3.0]);
        let adj = adjugate(&m);
        let d = determinant(&m);
        let prod = &m * &adj;
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { d } else { 0.0 };
                assert!((prod[(i, j)] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn leverrier_matches_cofactors() {
        let j = m3([0.2, 1.1, -0.4, 0.9, -1.3, 0.25, 2.0, 0.1, 0.6]);
        let exp = ShiftedExpansion::new(&j);
        for &t in &[-1.3, 0.0, 0.5, 2.7] {
            let m = DMatrix::identity(3, 3) * t + &j;
            assert!((exp.det_at(t) - determinant(&m)).abs() < 1e-12);
            let a = exp.adjugate_at(t);
            assert!((a - adjugate(&m)).abs().max() < 1e-12);
        }
    }

    #[test]
    fn leverrier_adjugate_four_by_four() {
        let m = DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, 2.0, 0.0, -1.0, 0.5, 3.0, 1.0, 0.0, 0.0, -2.0, 1.5, 0.3, 1.0, 0.0, 0.2, 2.0,
            ],
        );
        let adj = adjugate(&m);
        let d = determinant(&m);
        let lu = m.clone().lu().determinant();
        assert!((d - lu).abs() < 1e-10);
        let prod = &m * &adj;
        assert!((prod - DMatrix::identity(4, 4) * d).abs().max() < 1e-10);
    }

    #[test]
    fn adjugate_derivative_matches_fd() {
        let j = m3([0.2, 1.1, -0.4, 0.9, -1.3, 0.25, 2.0, 0.1, 0.6]);
        let exp = ShiftedExpansion::new(&j);
        let t = 0.8;
        let h = 1e-5;
        let fd = (exp.adjugate_at(t + h) - exp.adjugate_at(t - h)) / (2.0 * h);
        assert!((fd - exp.adjugate_derivative_at(t)).abs().max() < 1e-8);
    }

    #[test]
    fn rank_and_null_space() {
        let m = m3([0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let e = eliminate(&m, 1e-8);
        assert_eq!(e.rank, 2);
        let ns = orthonormalize(&e.null_basis(), 1e-10);
        assert_eq!(ns.len(), 1);
        let v = canonical_sign(ns[0].clone());
        assert!((v[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn complement_spans_rest() {
        let r = DVector::from_vec(vec![1.0, 1.0, 0.0]).normalize();
        let comp = orthonormal_complement(std::slice::from_ref(&r), 3);
        assert_eq!(comp.len(), 2);
        for q in &comp {
            assert!(q.dot(&r).abs() < 1e-14);
            assert!((q.norm() - 1.0).abs() < 1e-14);
        }
        assert!(comp[0].dot(&comp[1]).abs() < 1e-14);
    }
}
