//! The blowup surface: real roots of `det M(t,u) = 0` in `t`, their
//! multiplicities, the 2D discriminant split of the hodograph domain, and the
//! double-root locus.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hodograph::{characteristic_coefficients, CharacteristicCoefficients};
use crate::map::{Bounds, InitialDataMap};
use crate::roots::{cubic_discriminant, real_roots};

pub const TOL_DISC: f64 = 1e-10;
pub const LOCUS_TOL: f64 = 1e-8;
pub const TOL_TRIPLE: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlowupRoot {
    pub t: f64,
    pub multiplicity: usize,
    /// `∂_t det M` at the root.
    pub d1: f64,
    /// `∂²_t det M` at the root.
    pub d2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupBranchSet {
    pub u: Vec<f64>,
    pub roots: Vec<BlowupRoot>,
}

impl BlowupBranchSet {
    pub fn from_coefficients(u: &[f64], coeffs: &CharacteristicCoefficients) -> Self {
        let roots = real_roots(coeffs)
            .into_iter()
            .map(|r| BlowupRoot {
                t: r.t,
                multiplicity: r.multiplicity,
                d1: coeffs.derivative(r.t, 1),
                d2: coeffs.derivative(r.t, 2),
            })
            .collect();
        Self {
            u: u.to_vec(),
            roots,
        }
    }

    pub fn smallest_positive(&self) -> Option<&BlowupRoot> {
        self.roots.iter().find(|r| r.t > 0.0)
    }

    pub fn total_multiplicity(&self) -> usize {
        self.roots.iter().map(|r| r.multiplicity).sum()
    }
}

/// Typical root magnitude `max(1, |a_k|^{1/(n−k)})` of a monic polynomial.
pub fn root_scale(coeffs: &CharacteristicCoefficients) -> f64 {
    let n = coeffs.degree();
    coeffs
        .a
        .iter()
        .enumerate()
        .map(|(k, c)| c.abs().powf(1.0 / (n - k) as f64))
        .fold(1.0, f64::max)
}

pub fn branch_times(map: &InitialDataMap, u: &[f64]) -> Result<BlowupBranchSet> {
    let c = characteristic_coefficients(map, u)?;
    Ok(BlowupBranchSet::from_coefficients(u, &c))
}

pub fn smallest_positive_root(map: &InitialDataMap, u: &[f64]) -> Result<Option<f64>> {
    Ok(branch_times(map, u)?.smallest_positive().map(|r| r.t))
}

fn require_dim(map: &InitialDataMap, dims: &[usize]) -> Result<()> {
    if dims.contains(&map.dim()) {
        Ok(())
    } else {
        Err(Error::Dimension {
            expected: dims[0],
            found: map.dim(),
        })
    }
}

/// `Δ = (J11 − J22)² + 4 J12 J21`, the discriminant of the quadratic `det M` in `t`.
pub fn discriminant_2d(map: &InitialDataMap, u: &[f64]) -> Result<f64> {
    require_dim(map, &[2])?;
    let j = map.jacobian(u)?;
    Ok((j[(0, 0)] - j[(1, 1)]).powi(2) + 4.0 * j[(0, 1)] * j[(1, 0)])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum DomainLabel {
    Dplus,
    Dminus,
    Dzero,
}

pub fn classify_domain(map: &InitialDataMap, u: &[f64], tol_disc: f64) -> Result<DomainLabel> {
    let delta = discriminant_2d(map, u)?;
    let scale = root_scale(&characteristic_coefficients(map, u)?).powi(2);
    Ok(if delta.abs() <= tol_disc * scale {
        DomainLabel::Dzero
    } else if delta > 0.0 {
        DomainLabel::Dplus
    } else {
        DomainLabel::Dminus
    })
}

/// Degeneracy function whose zero set is the double-root locus, with its natural scale.
fn degeneracy(map: &InitialDataMap, u: &[f64]) -> Option<(f64, f64)> {
    if !map.contains(u) {
        return None;
    }
    let c = characteristic_coefficients(map, u).ok()?;
    let rho = root_scale(&c);
    let value = match c.degree() {
        2 => c.a[1] * c.a[1] - 4.0 * c.a[0],
        3 => cubic_discriminant(c.a[2], c.a[1], c.a[0]),
        _ => return None,
    };
    let n = c.degree() as i32;
    value.is_finite().then_some((value, rho.powi(n * (n - 1))))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocusPoint {
    pub u: Vec<f64>,
    /// The merged root at this point.
    pub t_b: f64,
    pub degeneracy: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Locus {
    pub points: Vec<LocusPoint>,
    /// Index pairs of points joined inside one grid cell (2D only).
    pub segments: Vec<[usize; 2]>,
}

impl Locus {
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for p in &self.points {
            for v in &p.u {
                s.push_str(&format!("{v:.17e},"));
            }
            s.push_str(&format!("{:.17e}\n", p.t_b));
        }
        s
    }
}

/// Merged root: a clustered root of multiplicity ≥ 2, else the root with smallest `|D₁|`.
fn merged_root(map: &InitialDataMap, u: &[f64]) -> Option<f64> {
    let set = branch_times(map, u).ok()?;
    if let Some(r) = set.roots.iter().find(|r| r.multiplicity >= 2) {
        return Some(r.t);
    }
    set.roots
        .iter()
        .min_by(|a, b| a.d1.abs().total_cmp(&b.d1.abs()))
        .map(|r| r.t)
}

fn grid_point(bounds: &Bounds, n: usize, idx: &[usize]) -> Vec<f64> {
    idx.iter()
        .enumerate()
        .map(|(k, &i)| {
            let (lo, hi) = (bounds.lower[k], bounds.upper[k]);
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        })
        .collect()
}

fn bisect_edge(map: &InitialDataMap, a: &[f64], b: &[f64], fa: f64) -> Option<LocusPoint> {
    let mut lo = a.to_vec();
    let mut hi = b.to_vec();
    let mut flo = fa;
    let mut mid = lo.clone();
    for _ in 0..200 {
        for k in 0..mid.len() {
            mid[k] = 0.5 * (lo[k] + hi[k]);
        }
        if mid == lo || mid == hi {
            break;
        }
        let (fm, _) = degeneracy(map, &mid)?;
        if fm == 0.0 {
            lo = mid.clone();
            hi = mid.clone();
            break;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid.clone();
            flo = fm;
        } else {
            hi = mid.clone();
        }
    }
    // pick the endpoint with the smaller residual
    let (f_lo, scale) = degeneracy(map, &lo)?;
    let (f_hi, _) = degeneracy(map, &hi)?;
    let (u, value) = if f_lo.abs() <= f_hi.abs() { (lo, f_lo) } else { (hi, f_hi) };
    if value.abs() > LOCUS_TOL * scale {
        // sign change across a pole or domain edge, not a zero
        return None;
    }
    let t_b = merged_root(map, &u)?;
    Some(LocusPoint {
        u,
        t_b,
        degeneracy: value,
    })
}

/// Zero set of the degeneracy function by grid sign changes and edge bisection.
/// `n_points` samples per axis.
pub fn double_root_locus(map: &InitialDataMap, bounds: &Bounds, n_points: usize) -> Result<Locus> {
    require_dim(map, &[2, 3])?;
    let dim = map.dim();
    let n = n_points.max(2);
    let total = n.pow(dim as u32);
    let unravel = |mut flat: usize| -> Vec<usize> {
        let mut idx = vec![0; dim];
        for k in (0..dim).rev() {
            idx[k] = flat % n;
            flat /= n;
        }
        idx
    };
    let samples: Vec<Option<f64>> = (0..total)
        .into_par_iter()
        .map(|flat| degeneracy(map, &grid_point(bounds, n, &unravel(flat))).map(|v| v.0))
        .collect();

    // edge id = flat * dim + axis, for the edge from `flat` in the +axis direction
    let strides: Vec<usize> = (0..dim).map(|k| n.pow((dim - 1 - k) as u32)).collect();
    let edges: Vec<(usize, usize)> = (0..total)
        .flat_map(|flat| (0..dim).map(move |axis| (flat, axis)))
        .filter(|&(flat, axis)| {
            let idx = unravel(flat);
            if idx[axis] + 1 >= n {
                return false;
            }
            match (samples[flat], samples[flat + strides[axis]]) {
                (Some(a), Some(b)) => (a > 0.0) != (b > 0.0) || a == 0.0,
                _ => false,
            }
        })
        .collect();
    let found: Vec<Option<LocusPoint>> = edges
        .par_iter()
        .map(|&(flat, axis)| {
            let a = grid_point(bounds, n, &unravel(flat));
            let b = grid_point(bounds, n, &unravel(flat + strides[axis]));
            bisect_edge(map, &a, &b, samples[flat]?)
        })
        .collect();

    let mut locus = Locus::default();
    let mut edge_to_point = std::collections::HashMap::new();
    for (&(flat, axis), p) in edges.iter().zip(found) {
        if let Some(p) = p {
            edge_to_point.insert(flat * dim + axis, locus.points.len());
            locus.points.push(p);
        }
    }
    if locus.points.is_empty() {
        return Err(Error::EmptyLocus);
    }
    if dim == 2 {
        for i in 0..n - 1 {
            for j in 0..n - 1 {
                let c = i * n + j;
                // bottom, right, top, left edges of the cell in a fixed order
                let cell_edges = [c * 2 + 1, (c + 1) * 2, (c + n) * 2 + 1, c * 2];
                let hits: Vec<usize> = cell_edges
                    .iter()
                    .filter_map(|e| edge_to_point.get(e).copied())
                    .collect();
                for pair in hits.chunks_exact(2) {
                    locus.segments.push([pair[0], pair[1]]);
                }
            }
        }
    }
    Ok(locus)
}

/// True iff some root is (numerically) triple: clustered with multiplicity 3,
/// or with `|D₁|` and `|D₂|` both inside `tol` of their natural scales.
pub fn triple_root_check(map: &InitialDataMap, u: &[f64], tol: f64) -> Result<bool> {
    require_dim(map, &[3])?;
    let c = characteristic_coefficients(map, u)?;
    let rho = root_scale(&c);
    let set = BlowupBranchSet::from_coefficients(u, &c);
    Ok(set.roots.iter().any(|r| {
        r.multiplicity >= 3 || (r.d1.abs() <= tol * rho * rho && r.d2.abs() <= tol * rho)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins;
    use nalgebra::DMatrix;

    #[test]
    fn cubic_discriminant_values() {
        let map = builtins::cubic();
        // the published quartic is 9Δ (normalized so that t± = (tr ± √(9Δ))/6)
        assert!((9.0 * discriminant_2d(&map, &[0.0, 0.0]).unwrap() + 72.0).abs() < 1e-12);
        for u in [[0.4, 1.3], [2.0, -0.5], [1.1, 1.9]] {
            let (a, b) = (u[0] * u[0], u[1] * u[1]);
            let closed = 4.0 * a * a + 28.0 * a * b + b * b - 72.0;
            let d = 9.0 * discriminant_2d(&map, &u).unwrap();
            assert!((d - closed).abs() < 1e-10 * (1.0 + closed.abs()));
        }
    }

    #[test]
    fn cubic_labels() {
        let map = builtins::cubic();
        assert_eq!(classify_domain(&map, &[0.0, 0.0], TOL_DISC).unwrap(), DomainLabel::Dminus);
        assert_eq!(classify_domain(&map, &[2.0, 2.0], TOL_DISC).unwrap(), DomainLabel::Dplus);
        let u2 = 72f64.powf(0.25);
        assert_eq!(classify_domain(&map, &[0.0, u2], TOL_DISC).unwrap(), DomainLabel::Dzero);
    }

    #[test]
    fn harmonic_discriminant_nonpositive() {
        let map = builtins::harmonic("expcos").unwrap();
        let u = [0.3_f64, -0.2];
        // Δ = −4 W_11² for the harmonic family
        let w11 = u[0].exp() * u[1].cos();
        let d = discriminant_2d(&map, &u).unwrap();
        assert!((d + 4.0 * w11 * w11).abs() < 1e-12);
    }

    #[test]
    fn zero_map_has_full_multiplicity_root() {
        for n in 1..=4 {
            let set = branch_times(&builtins::zero(n), &vec![0.1; n]).unwrap();
            assert_eq!(set.roots.len(), 1);
            assert_eq!(set.roots[0].t, 0.0);
            assert_eq!(set.roots[0].multiplicity, n);
        }
    }

    #[test]
    fn cubic_times_match_closed_form() {
        let map = builtins::cubic();
        let u = [2.0, 1.5];
        let (tm, tp) = builtins::reference::cubic_branches(&u).unwrap();
        let set = branch_times(&map, &u).unwrap();
        assert_eq!(set.roots.len(), 2);
        assert!((set.roots[0].t - tm).abs() < 1e-12);
        assert!((set.roots[1].t - tp).abs() < 1e-12);
        // D₁ = ±√Δ at the two roots of a monic quadratic
        let d = discriminant_2d(&map, &u).unwrap().sqrt();
        assert!((set.roots[0].d1 + d).abs() < 1e-9);
        assert!((set.roots[1].d1 - d).abs() < 1e-9);
        assert_eq!(set.roots[0].d2, 2.0);
        assert!(branch_times(&map, &[2.0, 0.0]).unwrap().roots.is_empty());
    }

    #[test]
    fn cubic_locus_points_on_curve() {
        let map = builtins::cubic();
        let locus = double_root_locus(&map, map.bounds(), 41).unwrap();
        assert!(locus.points.len() > 20);
        assert!(!locus.segments.is_empty());
        for p in &locus.points {
            let (a, b) = (p.u[0] * p.u[0], p.u[1] * p.u[1]);
            assert!((4.0 * a * a + 28.0 * a * b + b * b - 72.0).abs() < 1e-6);
            assert!(p.degeneracy.abs() < 1e-7);
            // merged root of the quadratic: 2 t_b + tr J = 0
            let tr = map.jacobian(&p.u).unwrap().trace();
            assert!((2.0 * p.t_b + tr).abs() < 1e-6);
        }
    }

    #[test]
    fn harmonic_locus_empty() {
        let map = builtins::harmonic("quadratic").unwrap();
        assert_eq!(double_root_locus(&map, map.bounds(), 30).unwrap_err(), Error::EmptyLocus);
    }

    #[test]
    fn triple_checks() {
        assert!(triple_root_check(&builtins::zero(3), &[0.0; 3], TOL_TRIPLE).unwrap());
        let diag = InitialDataMap::new(3, "diag123", |u| vec![u[0], 2.0 * u[1], 3.0 * u[2]])
            .with_jacobian(|_| DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0])));
        assert!(!triple_root_check(&diag, &[0.2, 0.3, 0.4], TOL_TRIPLE).unwrap());
        let id = builtins::linear(3, 1.0);
        assert!(triple_root_check(&id, &[0.2, 0.3, 0.4], TOL_TRIPLE).unwrap());
        let set = branch_times(&id, &[0.2, 0.3, 0.4]).unwrap();
        assert_eq!(set.roots[0].t, -1.0);
        assert_eq!(set.roots[0].multiplicity, 3);
    }

    #[test]
    fn dimension_checked() {
        assert!(matches!(
            discriminant_2d(&builtins::zero(3), &[0.0; 3]),
            Err(Error::Dimension { .. })
        ));
    }
}
