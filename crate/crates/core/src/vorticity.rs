//! Vorticity and stress from the adjugate formula `∂u/∂x = M̃ / det M`, plus
//! the pole structure of the vorticity at a blowup root.
//!
//! Curl components follow `ω_i = Σ ε_ijk (M⁻¹)_kj`: in 2D the single component
//! is `ω₃`, in 3D the axial vector, and above 3D the upper triangle of the
//! two-form `ω_ij = (M⁻¹)_ji − (M⁻¹)_ij`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hodograph::{build_matrix, CharacteristicCoefficients, HodographMatrix};
use crate::linalg::{self, ShiftedExpansion};
use crate::map::InitialDataMap;
use crate::surface::BlowupBranchSet;

/// Relative threshold below which a σ (or numerator) component counts as zero.
pub const TOL_SIGMA: f64 = 1e-8;

/// How far a requested `t_b` may sit from an actual root before it is rejected.
pub const ROOT_SNAP_REL: f64 = 1e-3;

/// Curl components of `A` read as a velocity gradient: `Σ ε_ijk A_kj` in 3D,
/// `A_21 − A_12` in 2D, and `A_ji − A_ij` for `i < j` otherwise.
pub fn curl_components(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    match n {
        2 => vec![a[(1, 0)] - a[(0, 1)]],
        3 => vec![
            a[(2, 1)] - a[(1, 2)],
            a[(0, 2)] - a[(2, 0)],
            a[(1, 0)] - a[(0, 1)],
        ],
        _ => {
            let mut v = Vec::with_capacity(n * (n - 1) / 2);
            for i in 0..n {
                for j in (i + 1)..n {
                    v.push(a[(j, i)] - a[(i, j)]);
                }
            }
            v
        }
    }
}

/// `ω_ij = A_ji − A_ij`.
pub fn two_form_of(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.transpose() - a
}

/// `|ω| = ‖ω_ij‖_F / √2`; equals the axial vector length in 3D and `|ω₃|` in 2D.
pub fn two_form_norm(w: &DMatrix<f64>) -> f64 {
    w.norm() / std::f64::consts::SQRT_2
}

#[derive(Debug, Clone, Serialize)]
pub struct VorticityRecord {
    pub t: f64,
    pub u: Vec<f64>,
    #[serde(serialize_with = "linalg::serialize_rows")]
    pub two_form: DMatrix<f64>,
    pub components: Vec<f64>,
    pub norm: f64,
    /// `ω/|ω|` (3D only, and only when `|ω| > 0`).
    pub direction: Option<Vec<f64>>,
}

fn regular(map: &InitialDataMap, t: f64, u: &[f64]) -> Result<HodographMatrix> {
    let m = build_matrix(map, t, u)?;
    if m.is_singular() {
        return Err(Error::Singular { det: m.det });
    }
    Ok(m)
}

pub fn vorticity(map: &InitialDataMap, t: f64, u: &[f64]) -> Result<VorticityRecord> {
    let m = regular(map, t, u)?;
    let grad = &m.adjugate / m.det;
    let two_form = two_form_of(&grad);
    let components = curl_components(&grad);
    let norm = two_form_norm(&two_form);
    let direction = (m.dim() == 3 && norm > 0.0)
        .then(|| components.iter().map(|c| c / norm).collect());
    Ok(VorticityRecord {
        t,
        u: u.to_vec(),
        two_form,
        components,
        norm,
        direction,
    })
}

pub fn vorticity_vector(map: &InitialDataMap, t: f64, u: &[f64]) -> Result<VorticityRecord> {
    if map.dim() != 3 {
        return Err(Error::Dimension { expected: 3, found: map.dim() });
    }
    vorticity(map, t, u)
}

/// `ω₃ = (J12 − J21) / det M`.
pub fn vorticity_scalar_2d(map: &InitialDataMap, t: f64, u: &[f64]) -> Result<f64> {
    if map.dim() != 2 {
        return Err(Error::Dimension { expected: 2, found: map.dim() });
    }
    let m = regular(map, t, u)?;
    Ok((m.entries[(0, 1)] - m.entries[(1, 0)]) / m.det)
}

pub fn vorticity_two_form(map: &InitialDataMap, t: f64, u: &[f64]) -> Result<DMatrix<f64>> {
    let m = regular(map, t, u)?;
    Ok(two_form_of(&m.adjugate) / m.det)
}

/// `S_ij = (M̃_ij + M̃_ji) / det M`.
pub fn stress_tensor(map: &InitialDataMap, t: f64, u: &[f64]) -> Result<DMatrix<f64>> {
    let m = regular(map, t, u)?;
    Ok((&m.adjugate + m.adjugate.transpose()) / m.det)
}

/// Vorticity near a real root `t_b` of `det M(·, u_b)`.
///
/// The determinant is written as `(t − t_b)^m q(t)` with `q` obtained by
/// deflating the characteristic polynomial, so `ω` stays accurate at
/// distances far below `ε^{1/m}` from a multiple root.
#[derive(Debug, Clone)]
pub struct PoleExpansion {
    pub u_b: Vec<f64>,
    pub t_b: f64,
    pub multiplicity: usize,
    pub coeffs: CharacteristicCoefficients,
    /// Other real roots (cluster centres) at `u_b`.
    pub other_roots: Vec<f64>,
    expansion: ShiftedExpansion,
    /// Deflated quotient `q`, ascending.
    quotient: Vec<f64>,
    /// Taylor coefficients of `M̃(t_b + s)` in `s`.
    adj_taylor: Vec<DMatrix<f64>>,
}

impl PoleExpansion {
    /// Snaps `t_b` to the nearest real root within `ROOT_SNAP_REL·max(1,|t_b|)`.
    pub fn new(map: &InitialDataMap, u_b: &[f64], t_b: f64) -> Result<Self> {
        let j = map.jacobian(u_b)?;
        let coeffs = CharacteristicCoefficients::from_jacobian(&j);
        let set = BlowupBranchSet::from_coefficients(u_b, &coeffs);
        let root = set
            .roots
            .iter()
            .min_by(|a, b| (a.t - t_b).abs().total_cmp(&(b.t - t_b).abs()))
            .filter(|r| (r.t - t_b).abs() <= ROOT_SNAP_REL * t_b.abs().max(1.0))
            .ok_or(Error::NoBlowup)?;
        let (t_b, multiplicity) = (root.t, root.multiplicity);
        let other_roots = set.roots.iter().map(|r| r.t).filter(|&t| t != t_b).collect();

        let mut quotient = coeffs.monic();
        for _ in 0..multiplicity {
            quotient = deflate(&quotient, t_b);
        }
        let expansion = ShiftedExpansion::new(&j);
        let n = j.nrows();
        let adj_taylor = (0..n)
            .map(|p| {
                let mut b = DMatrix::zeros(n, n);
                for (k, a) in expansion.adj_coeffs.iter().enumerate().skip(p) {
                    b += a * (binomial(k, p) * t_b.powi((k - p) as i32));
                }
                b
            })
            .collect();
        Ok(Self {
            u_b: u_b.to_vec(),
            t_b,
            multiplicity,
            coeffs,
            other_roots,
            expansion,
            quotient,
            adj_taylor,
        })
    }

    pub fn dim(&self) -> usize {
        self.adj_taylor[0].nrows()
    }

    /// `det M(t)` in factored form.
    pub fn det_at(&self, t: f64) -> f64 {
        (t - self.t_b).powi(self.multiplicity as i32) * linalg::horner(&self.quotient, t)
    }

    pub fn adjugate_at(&self, t: f64) -> DMatrix<f64> {
        self.expansion.adjugate_at(t)
    }

    /// Velocity gradient `M̃(t)/det M(t)`.
    pub fn gradient_at(&self, t: f64) -> DMatrix<f64> {
        self.adjugate_at(t) / self.det_at(t)
    }

    pub fn two_form_at(&self, t: f64) -> DMatrix<f64> {
        two_form_of(&self.gradient_at(t))
    }

    pub fn components_at(&self, t: f64) -> Vec<f64> {
        curl_components(&self.gradient_at(t))
    }

    pub fn norm_at(&self, t: f64) -> f64 {
        two_form_norm(&self.two_form_at(t))
    }

    /// Taylor coefficients (in `t − t_b`) of each curl component of `M̃`.
    pub fn numerator_taylor(&self) -> Vec<Vec<f64>> {
        let per_order: Vec<Vec<f64>> = self.adj_taylor.iter().map(curl_components).collect();
        let n_comp = per_order[0].len();
        (0..n_comp)
            .map(|c| per_order.iter().map(|o| o[c]).collect())
            .collect()
    }

    fn numerator_tol(&self) -> f64 {
        TOL_SIGMA * self.adj_taylor.iter().map(linalg::max_abs).fold(1.0, f64::max)
    }

    /// Order of vanishing at `t_b` of each numerator component; `None` when
    /// the component vanishes identically.
    pub fn vanishing_orders(&self) -> Vec<Option<usize>> {
        let tol = self.numerator_tol();
        self.numerator_taylor()
            .iter()
            .map(|c| c.iter().position(|v| v.abs() > tol))
            .collect()
    }

    /// Pole order of each component: multiplicity minus vanishing order.
    pub fn component_degrees(&self) -> Vec<usize> {
        self.vanishing_orders()
            .iter()
            .map(|v| v.map_or(0, |v| self.multiplicity.saturating_sub(v)))
            .collect()
    }

    pub fn degree(&self) -> usize {
        self.component_degrees().into_iter().max().unwrap_or(0)
    }
}

/// Synthetic division by `(t − r)`, dropping the remainder.
fn deflate(monic: &[f64], r: f64) -> Vec<f64> {
    let n = monic.len() - 1;
    let mut q = vec![0.0; n];
    let mut carry = 0.0;
    for k in (0..n).rev() {
        carry = monic[k + 1] + r * carry;
        q[k] = carry;
    }
    q
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[derive(Debug, Clone, Serialize)]
pub struct SigmaCoefficients {
    pub t_b: f64,
    pub d1: f64,
    pub d2: f64,
    /// Curl components of `M̃(t_b)`.
    pub numerator: Vec<f64>,
    /// Residues `numerator / D₁` in `t − t_b`.
    pub sigma: Vec<f64>,
    /// Curl components of `dM̃/dt` at `t_b`.
    pub sigma_prime: Vec<f64>,
}

pub fn sigma_coefficients(map: &InitialDataMap, u_b: &[f64], t_b: f64) -> Result<SigmaCoefficients> {
    let pole = PoleExpansion::new(map, u_b, t_b)?;
    let t_b = pole.t_b;
    let d1 = pole.coeffs.derivative(t_b, 1);
    let d2 = pole.coeffs.derivative(t_b, 2);
    if pole.multiplicity >= 2 {
        return Err(Error::Degenerate { d1 });
    }
    let numerator = curl_components(&pole.adjugate_at(t_b));
    let sigma = numerator.iter().map(|v| v / d1).collect();
    let sigma_prime = curl_components(&pole.expansion.adjugate_derivative_at(t_b));
    Ok(SigmaCoefficients {
        t_b,
        d1,
        d2,
        numerator,
        sigma,
        sigma_prime,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RootOrder {
    pub t_b: f64,
    pub multiplicity: usize,
    /// Pole order of each curl component (0 = bounded).
    pub component_degrees: Vec<usize>,
    pub degree: usize,
}

/// Temporal blowup degree at every real root over `u_b`.
pub fn temporal_blowup_order(map: &InitialDataMap, u_b: &[f64]) -> Result<Vec<RootOrder>> {
    let set = crate::surface::branch_times(map, u_b)?;
    if set.roots.is_empty() {
        return Err(Error::NoBlowup);
    }
    set.roots
        .iter()
        .map(|r| {
            let pole = PoleExpansion::new(map, u_b, r.t)?;
            let component_degrees = pole.component_degrees();
            Ok(RootOrder {
                t_b: pole.t_b,
                multiplicity: pole.multiplicity,
                degree: component_degrees.iter().copied().max().unwrap_or(0),
                component_degrees,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Direction {
    pub unit: Vec<f64>,
    /// Components reported as zero because they are subdominant.
    pub subdominant: Vec<bool>,
}

/// Limiting direction `σ/|σ|` with components below `TOL_SIGMA·max|σ|` zeroed and flagged.
pub fn direction_vector(sigma: &[f64]) -> Result<Direction> {
    let max = sigma.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 || !max.is_finite() {
        return Err(Error::ZeroVorticity);
    }
    let subdominant: Vec<bool> = sigma.iter().map(|v| v.abs() <= TOL_SIGMA * max).collect();
    let kept: Vec<f64> = sigma
        .iter()
        .zip(&subdominant)
        .map(|(v, &s)| if s { 0.0 } else { *v })
        .collect();
    let norm = kept.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(Direction {
        unit: kept.iter().map(|v| v / norm).collect(),
        subdominant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins;

    fn constant_map(j: DMatrix<f64>) -> InitialDataMap {
        let n = j.nrows();
        let jj = j.clone();
        InitialDataMap::new(n, "const", move |u| {
            (&jj * nalgebra::DVector::from_column_slice(u)).iter().copied().collect()
        })
        .with_jacobian(move |_| j.clone())
    }

    #[test]
    fn zero_map_is_irrotational() {
        let r = vorticity_vector(&builtins::zero(3), 1.3, &[0.1, 0.2, 0.3]).unwrap();
        assert!(r.components.iter().all(|c| *c == 0.0));
        assert_eq!(r.direction, None);
        let s = stress_tensor(&builtins::zero(3), 2.0, &[0.0; 3]).unwrap();
        assert_eq!(s, DMatrix::identity(3, 3));
    }

    #[test]
    fn antisymmetric_constant_jacobian() {
        // I + J with J = [[0,c,0],[-c,0,0],[0,0,0]]; inverse by hand:
        // (1/(1+c²))·[[1,-c,0],[c,1,0],[0,0,1+c²]]
        let c = 0.7;
        let j = DMatrix::from_row_slice(3, 3, &[0.0, c, 0.0, -c, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let map = constant_map(j);
        let r = vorticity_vector(&map, 1.0, &[0.0; 3]).unwrap();
        let w3 = 2.0 * c / (1.0 + c * c);
        assert!(r.components[0].abs() < 1e-15 && r.components[1].abs() < 1e-15);
        assert!((r.components[2] - w3).abs() < 1e-15);
        let d = r.direction.unwrap();
        assert!(d[0] == 0.0 && d[1] == 0.0 && (d[2] - 1.0).abs() < 1e-15);
        let s = stress_tensor(&map, 1.0, &[0.0; 3]).unwrap();
        let d = 2.0 / (1.0 + c * c);
        let expect = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![d, d, 2.0]));
        assert!((s - expect).abs().max() < 1e-15);
    }

    #[test]
    fn two_form_matches_axial_vector() {
        let map = builtins::jordan(0.4, 0.9, -0.3);
        let t = 0.8;
        let u = [0.1, 0.2, 0.3];
        let w = vorticity_two_form(&map, t, &u).unwrap();
        let v = vorticity_vector(&map, t, &u).unwrap();
        // ω_i = ½ Σ ε_ijk ω_jk
        assert!((w[(1, 2)] - v.components[0]).abs() < 1e-14);
        assert!((w[(2, 0)] - v.components[1]).abs() < 1e-14);
        assert!((w[(0, 1)] - v.components[2]).abs() < 1e-14);
        assert!((&w + w.transpose()).abs().max() == 0.0);
    }

    #[test]
    fn four_dim_block() {
        let c = 1.5;
        let mut j = DMatrix::zeros(4, 4);
        j[(0, 1)] = c;
        j[(1, 0)] = -c;
        let w = vorticity_two_form(&constant_map(j), 1.0, &[0.0; 4]).unwrap();
        // only the (1,2) block: ω_12 = 2c/(1+c²)
        assert!((w[(0, 1)] - 2.0 * c / (1.0 + c * c)).abs() < 1e-14);
        for (i, jx) in [(0, 2), (0, 3), (1, 2), (1, 3), (2, 3)] {
            assert!(w[(i, jx)].abs() < 1e-15);
        }
    }

    #[test]
    fn rotational_closed_form() {
        for alpha in [0.5, 1.0, 2.5] {
            let map = builtins::rotational(alpha);
            for t in [0.0, 0.3, 1.7, 10.0] {
                let w = vorticity_scalar_2d(&map, t, &[0.2, -0.4]).unwrap();
                let exact = builtins::reference::rotational_vorticity(alpha, t);
                assert!((w - exact).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cubic_scalar_and_linear_zero() {
        let map = builtins::cubic();
        let (u, t) = ([0.9, 1.4], 0.3);
        let m = build_matrix(&map, t, &u).unwrap();
        let expect = (3.0 - 2.0 / 3.0 * u[0] * u[1]) / m.det;
        assert!((vorticity_scalar_2d(&map, t, &u).unwrap() - expect).abs() < 1e-13);
        assert_eq!(vorticity_scalar_2d(&builtins::linear(2, 1.0), 0.5, &u).unwrap(), 0.0);
    }

    #[test]
    fn decomposition_identity() {
        let map = builtins::cubic();
        let (u, t) = ([0.9, 1.4], 0.3);
        let s = stress_tensor(&map, t, &u).unwrap();
        let w = vorticity_two_form(&map, t, &u).unwrap();
        let g = build_matrix(&map, t, &u).unwrap().derivatives_from_inverse().unwrap();
        // S + ωᵀ = 2 ∂u/∂x with ω_ij = ∂_i u_j − ∂_j u_i
        assert!((s + w.transpose() - g * 2.0).abs().max() < 1e-12);
    }

    #[test]
    fn singular_rejected() {
        let map = builtins::linear(2, 1.0);
        assert!(matches!(vorticity_scalar_2d(&map, -1.0, &[0.1, 0.1]), Err(Error::Singular { .. })));
    }

    #[test]
    fn cubic_residue_closed_form() {
        let map = builtins::cubic();
        let u = [2.0_f64, 1.5];
        let (a, b) = (u[0] * u[0], u[1] * u[1]);
        let root = (4.0 * a * a + 28.0 * a * b + b * b - 72.0).sqrt();
        let (tm, tp) = builtins::reference::cubic_branches(&u).unwrap();
        for (t_b, sign) in [(tm, 1.0), (tp, -1.0)] {
            let s = sigma_coefficients(&map, &u, t_b).unwrap();
            let expect = sign * (2.0 * u[0] * u[1] - 9.0) / root;
            assert!((s.sigma[0] - expect).abs() < 1e-10, "{} vs {}", s.sigma[0], expect);
            // 2D: the numerator does not depend on t
            assert!(s.sigma_prime[0].abs() < 1e-14);
        }
    }

    #[test]
    fn zero_map_sigma_degenerate() {
        let r = sigma_coefficients(&builtins::zero(3), &[0.0; 3], 0.0);
        assert!(matches!(r, Err(Error::Degenerate { .. })));
    }

    #[test]
    fn orders() {
        let cubic = builtins::cubic();
        let ords = temporal_blowup_order(&cubic, &[2.0, 1.5]).unwrap();
        assert_eq!(ords.iter().map(|o| o.degree).collect::<Vec<_>>(), vec![1, 1]);

        let id = builtins::linear(3, 1.0);
        let o = temporal_blowup_order(&id, &[0.1, 0.2, 0.3]).unwrap();
        assert_eq!((o[0].multiplicity, o[0].degree), (3, 0));

        let jordan = builtins::jordan(1.0, 1.0, 1.0);
        let o = temporal_blowup_order(&jordan, &[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(o[0].multiplicity, 3);
        assert_eq!(o[0].component_degrees, vec![2, 3, 2]);

        // rank-one M_b with antisymmetric part: the pole survives at order one
        let j = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let o = temporal_blowup_order(&constant_map(j), &[0.0; 3]).unwrap();
        let at_zero = o.iter().find(|r| r.t_b == 0.0).unwrap();
        assert_eq!(at_zero.multiplicity, 2);
        assert_eq!(at_zero.degree, 1);
    }

    #[test]
    fn pole_expansion_matches_direct() {
        let map = builtins::cubic();
        let u = [2.0, 1.5];
        let (tm, _) = builtins::reference::cubic_branches(&u).unwrap();
        let pole = PoleExpansion::new(&map, &u, tm + 1e-6).unwrap();
        assert!((pole.t_b - tm).abs() < 1e-14);
        let t = tm - 0.01;
        let direct = vorticity_scalar_2d(&map, t, &u).unwrap();
        assert!((pole.components_at(t)[0] - direct).abs() < 1e-9 * direct.abs());
        assert!(PoleExpansion::new(&builtins::rotational(1.0), &u, 0.5).is_err());
    }

    #[test]
    fn directions() {
        let d = direction_vector(&[3.0, 4.0, 0.0]).unwrap();
        assert_eq!(d.unit, vec![0.6, 0.8, 0.0]);
        assert_eq!(d.subdominant, vec![false, false, true]);
        assert_eq!(direction_vector(&[0.0, 0.0, 5.0]).unwrap().unit, vec![0.0, 0.0, 1.0]);
        assert_eq!(direction_vector(&[0.0, 0.0]).unwrap_err(), Error::ZeroVorticity);
        assert_eq!(direction_vector(&[-2.5]).unwrap().unit, vec![-1.0]);
    }
}
