//! Real roots of monic characteristic polynomials with multiplicity detection.
//!
//! Degrees up to three are solved in closed form (stable quadratic formula,
//! trigonometric method for three real cubic roots, Cardano otherwise).
//! Higher degrees go through companion-matrix eigenvalues. All complex roots
//! are polished with a few Newton steps and then clustered: roots within
//! [`cluster_tol`] of each other merge into one root of higher multiplicity,
//! and a cluster is real when its centre's imaginary part is inside the same
//! tolerance.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::hodograph::CharacteristicCoefficients;

/// Relative clustering scale; a numerically split double root has separation
/// near `sqrt(ε)·scale`, well inside this.
pub const ROOT_CLUSTER_REL: f64 = 1e-7;

pub fn cluster_tol(t: f64) -> f64 {
    ROOT_CLUSTER_REL * t.abs().max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RealRoot {
    pub t: f64,
    pub multiplicity: usize,
}

/// Real roots, ascending, with multiplicities.
pub fn real_roots(coeffs: &CharacteristicCoefficients) -> Vec<RealRoot> {
    let a = &coeffs.a;
    let complex = match a.len() {
        0 => Vec::new(),
        1 => vec![Complex64::new(-a[0], 0.0)],
        2 => quadratic(a[1], a[0]),
        3 => cubic(a[2], a[1], a[0]),
        _ => companion_roots(a),
    };
    let monic = coeffs.monic();
    let polished: Vec<Complex64> = complex.into_iter().map(|z| polish(&monic, z)).collect();
    cluster(&polished)
}

fn quadratic(b: f64, c: f64) -> Vec<Complex64> {
    let disc = b * b - 4.0 * c;
    let sq = disc.abs().sqrt();
    if disc >= 0.0 {
        // stable pair: q = −(b + sign(b)√Δ)/2, roots q and c/q
        let q = -0.5 * (b + b.signum().max(0.0).mul_add(2.0, -1.0) * sq);
        let q = if b == 0.0 { -0.5 * sq } else { q };
        if q == 0.0 {
            return vec![Complex64::new(0.0, 0.0); 2];
        }
        vec![Complex64::new(q, 0.0), Complex64::new(c / q, 0.0)]
    } else {
        let re = -0.5 * b;
        vec![Complex64::new(re, 0.5 * sq), Complex64::new(re, -0.5 * sq)]
    }
}

fn cubic(a2: f64, a1: f64, a0: f64) -> Vec<Complex64> {
    let shift = a2 / 3.0;
    let p = a1 - a2 * a2 / 3.0;
    let q = 2.0 * a2 * a2 * a2 / 27.0 - a2 * a1 / 3.0 + a0;
    let d = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    let ys: Vec<Complex64> = if p == 0.0 && q == 0.0 {
        vec![Complex64::new(0.0, 0.0); 3]
    } else if d < 0.0 {
        // three distinct real roots; p < 0 here
        let r = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (2.0 * p) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        (0..3)
            .map(|k| {
                let y = r * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos();
                Complex64::new(y, 0.0)
            })
            .collect()
    } else {
        let sd = d.sqrt();
        let a = (-q / 2.0 + sd).cbrt();
        let b = (-q / 2.0 - sd).cbrt();
        let re = -(a + b) / 2.0;
        let im = 3f64.sqrt() / 2.0 * (a - b);
        vec![
            Complex64::new(a + b, 0.0),
            Complex64::new(re, im),
            Complex64::new(re, -im),
        ]
    };
    ys.into_iter().map(|y| y - shift).collect()
}

fn companion_roots(a: &[f64]) -> Vec<Complex64> {
    let n = a.len();
    let mut c = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        c[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        c[(i, n - 1)] = -a[i];
    }
    c.complex_eigenvalues().iter().copied().collect()
}

fn eval_complex(coeffs: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

fn polish(coeffs: &[f64], mut z: Complex64) -> Complex64 {
    for _ in 0..3 {
        let (p, dp) = eval_complex(coeffs, z);
        if dp.norm() == 0.0 || p.norm() == 0.0 {
            break;
        }
        let next = z - p / dp;
        if !(next.re.is_finite() && next.im.is_finite()) {
            break;
        }
        // keep the step only if the residual actually drops
        if eval_complex(coeffs, next).0.norm() < p.norm() {
            z = next;
        } else {
            break;
        }
    }
    z
}

fn cluster(roots: &[Complex64]) -> Vec<RealRoot> {
    let n = roots.len();
    // single-linkage grouping
    let mut group: Vec<usize> = (0..n).collect();
    fn find(g: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while g[r] != r {
            r = g[r];
        }
        g[i] = r;
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let tol = cluster_tol(roots[i].re.abs().max(roots[j].re.abs()));
            if (roots[i] - roots[j]).norm() <= tol {
                let (ri, rj) = (find(&mut group, i), find(&mut group, j));
                if ri != rj {
                    group[rj.max(ri)] = ri.min(rj);
                }
            }
        }
    }
    let mut out: Vec<RealRoot> = Vec::new();
    for i in 0..n {
        if find(&mut group, i) != i {
            continue;
        }
        let members: Vec<Complex64> = (0..n)
            .filter(|&j| find(&mut group, j) == i)
            .map(|j| roots[j])
            .collect();
        let center = members.iter().sum::<Complex64>() / members.len() as f64;
        if center.im.abs() <= cluster_tol(center.re) {
            out.push(RealRoot {
                t: center.re,
                multiplicity: members.len(),
            });
        }
    }
    out.sort_by(|a, b| a.t.total_cmp(&b.t));
    out
}

/// Discriminant of the monic cubic `t³ + a2 t² + a1 t + a0`; zero exactly at repeated roots.
pub fn cubic_discriminant(a2: f64, a1: f64, a0: f64) -> f64 {
    18.0 * a2 * a1 * a0 - 4.0 * a2.powi(3) * a0 + a2 * a2 * a1 * a1 - 4.0 * a1.powi(3) - 27.0 * a0 * a0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn roots_of(rs: &[f64]) -> Vec<RealRoot> {
        real_roots(&CharacteristicCoefficients::from_roots(rs))
    }

    #[test]
    fn three_simple() {
        let r = roots_of(&[3.0, 1.0, 2.0]);
        assert_eq!(r.len(), 3);
        for (k, e) in [1.0, 2.0, 3.0].iter().enumerate() {
            assert!((r[k].t - e).abs() < 1e-12);
            assert_eq!(r[k].multiplicity, 1);
        }
    }

    #[test]
    fn double_and_simple() {
        let r = roots_of(&[2.0, 2.0, -1.0]);
        assert_eq!(r.len(), 2);
        assert!((r[0].t + 1.0).abs() < 1e-12 && r[0].multiplicity == 1);
        assert!((r[1].t - 2.0).abs() < 1e-9 && r[1].multiplicity == 2);
    }

    #[test]
    fn triple() {
        let r = roots_of(&[-1.0, -1.0, -1.0]);
        assert_eq!(r, vec![RealRoot { t: -1.0, multiplicity: 3 }]);
    }

    #[test]
    fn complex_pair_only() {
        // cubic map at u = (2, 0): t² − 16/3 t + 22/3
        let c = CharacteristicCoefficients { a: vec![22.0 / 3.0, -16.0 / 3.0] };
        assert!(real_roots(&c).is_empty());
        // one real root plus a complex pair
        let c = CharacteristicCoefficients { a: vec![-2.0, 1.0, 0.0] };
        let r = real_roots(&c);
        assert_eq!(r.len(), 1);
        assert!((r[0].t - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nearly_split_double_root_merges() {
        let r = roots_of(&[1.5, 1.5 + 1e-9]);
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].multiplicity, 2);
        // tiny negative discriminant: complex pair sitting on the real axis
        let c = CharacteristicCoefficients { a: vec![2.25 + 1e-17, -3.0] };
        assert_eq!(real_roots(&c)[0].multiplicity, 2);
    }

    #[test]
    fn quartic_via_companion() {
        let r = roots_of(&[0.5, -2.0, 3.0, 3.0]);
        assert_eq!(r.len(), 3);
        assert!((r[2].t - 3.0).abs() < 1e-7 && r[2].multiplicity == 2);
    }

    #[test]
    fn discriminant_vanishes_on_repeat() {
        let c = CharacteristicCoefficients::from_roots(&[0.3, 0.3, -2.0]);
        assert!(cubic_discriminant(c.a[2], c.a[1], c.a[0]).abs() < 1e-12);
        let c = CharacteristicCoefficients::from_roots(&[0.3, 1.3, -2.0]);
        assert!(cubic_discriminant(c.a[2], c.a[1], c.a[0]) > 0.0);
    }

    proptest! {
        #[test]
        fn rebuilt_polynomial_matches(r1 in -5.0..5.0f64, r2 in -5.0..5.0f64, r3 in -5.0..5.0f64) {
            let c = CharacteristicCoefficients::from_roots(&[r1, r2, r3]);
            let found = real_roots(&c);
            let mut flat = Vec::new();
            for r in &found {
                for _ in 0..r.multiplicity { flat.push(r.t); }
            }
            prop_assert_eq!(flat.len(), 3);
            let rebuilt = CharacteristicCoefficients::from_roots(&flat);
            for k in 0..3 {
                let scale = 1.0 + c.a[k].abs();
                prop_assert!((rebuilt.a[k] - c.a[k]).abs() <= 1e-7 * scale);
            }
        }
    }
}
