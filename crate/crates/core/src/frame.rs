//! Adapted frames at blowup points: null vectors of `M(t_b,u_b)`, their
//! complements and duals, and fixed-time exponent fits along rays from
//! `x_b = u_b t_b + f(u_b)`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::newton;
use crate::fit::{linear_regression, SlopeFit};
use crate::hodograph::build_matrix;
use crate::linalg;
use crate::map::{Bounds, InitialDataMap};
use crate::surface::branch_times;
use crate::vorticity::{two_form_norm, two_form_of};

/// Relative pivot tolerance for null-space decisions.
pub const TOL_NULL: f64 = 1e-8;

fn serialize_vecs<S: serde::Serializer>(vs: &[DVector<f64>], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(vs.len()))?;
    for v in vs {
        seq.serialize_element(v.as_slice())?;
    }
    seq.end()
}

/// Orthonormal right and left null bases, canonical signs, deterministic order.
pub fn null_vectors(m: &DMatrix<f64>, tol_null: f64) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>)> {
    let n = m.nrows();
    let right = linalg::eliminate(m, tol_null);
    if right.rank == n {
        return Err(Error::FullRank);
    }
    let left = linalg::eliminate(&m.transpose(), tol_null);
    let basis = |e: &linalg::Elimination| -> Vec<DVector<f64>> {
        linalg::orthonormalize(&e.null_basis(), 1e-12)
            .into_iter()
            .map(linalg::canonical_sign)
            .collect()
    };
    let (mut r, mut l) = (basis(&right), basis(&left));
    // the two eliminations can disagree at the tolerance edge; keep the common corank
    let k = r.len().min(l.len()).max(1);
    r.truncate(k);
    l.truncate(k);
    if r.is_empty() || l.is_empty() {
        return Err(Error::FullRank);
    }
    Ok((r, l))
}

#[derive(Debug, Clone, Serialize)]
pub struct AdaptedFrame {
    pub u_b: Vec<f64>,
    pub t_b: f64,
    /// Rank of `M(t_b,u_b)`.
    pub rank: usize,
    #[serde(serialize_with = "serialize_vecs")]
    pub r: Vec<DVector<f64>>,
    #[serde(serialize_with = "serialize_vecs")]
    pub r_tilde: Vec<DVector<f64>>,
    #[serde(serialize_with = "serialize_vecs")]
    pub l: Vec<DVector<f64>>,
    #[serde(serialize_with = "serialize_vecs")]
    pub l_tilde: Vec<DVector<f64>>,
    #[serde(serialize_with = "serialize_vecs")]
    pub p: Vec<DVector<f64>>,
    #[serde(serialize_with = "serialize_vecs")]
    pub p_tilde: Vec<DVector<f64>>,
}

fn columns(vs: impl Iterator<Item = DVector<f64>>, n: usize) -> DMatrix<f64> {
    let cols: Vec<DVector<f64>> = vs.collect();
    if cols.is_empty() {
        return DMatrix::zeros(n, 0);
    }
    DMatrix::from_columns(&cols)
}

/// Completes `R, L` with orthonormal complements; `P, P̃` are the columns of
/// the inverse of the stacked rows `[L | L̃]`.
pub fn complementary_basis(
    u_b: &[f64],
    t_b: f64,
    r: Vec<DVector<f64>>,
    l: Vec<DVector<f64>>,
) -> Result<AdaptedFrame> {
    let n = r.first().or(l.first()).map(|v| v.len()).ok_or(Error::FullRank)?;
    let r_tilde = linalg::orthonormal_complement(&r, n);
    let l_tilde = linalg::orthonormal_complement(&l, n);
    let stacked_l = columns(l.iter().chain(&l_tilde).cloned(), n).transpose();
    let inv = stacked_l
        .clone()
        .try_inverse()
        .ok_or(Error::Singular { det: linalg::determinant(&stacked_l) })?;
    let k = l.len();
    let p = (0..k).map(|a| inv.column(a).into_owned()).collect();
    let p_tilde = (k..n).map(|a| inv.column(a).into_owned()).collect();
    Ok(AdaptedFrame {
        u_b: u_b.to_vec(),
        t_b,
        rank: n - k,
        r,
        r_tilde,
        l,
        l_tilde,
        p,
        p_tilde,
    })
}

/// Frame of `M(t_b,u_b)`; errors with `FullRank` off the blowup surface.
pub fn frame_at(map: &InitialDataMap, u_b: &[f64], t_b: f64, tol_null: f64) -> Result<AdaptedFrame> {
    let m = build_matrix(map, t_b, u_b)?;
    let (r, l) = null_vectors(&m.entries, tol_null)?;
    complementary_basis(u_b, t_b, r, l)
}

impl AdaptedFrame {
    pub fn dim(&self) -> usize {
        self.u_b.len()
    }

    pub fn corank(&self) -> usize {
        self.r.len()
    }

    /// `[R | R̃]` as columns.
    pub fn stacked_r(&self) -> DMatrix<f64> {
        columns(self.r.iter().chain(&self.r_tilde).cloned(), self.dim())
    }

    /// `[L | L̃]` as rows.
    pub fn stacked_l(&self) -> DMatrix<f64> {
        columns(self.l.iter().chain(&self.l_tilde).cloned(), self.dim()).transpose()
    }

    /// `[P | P̃]` as columns.
    pub fn stacked_p(&self) -> DMatrix<f64> {
        columns(self.p.iter().chain(&self.p_tilde).cloned(), self.dim())
    }

    /// `q_{αβ} = 𝓡^{(α)}·𝓟^{(β)}`, null vectors first.
    pub fn q_matrix(&self) -> DMatrix<f64> {
        self.stacked_r().transpose() * self.stacked_p()
    }

    /// `δy_β = 𝓛^{(β)}·δx`.
    pub fn displacement_to_y(&self, dx: &[f64]) -> Vec<f64> {
        (self.stacked_l() * DVector::from_column_slice(dx)).as_slice().to_vec()
    }

    /// `δx = Σ_β 𝓟^{(β)} δy_β`.
    pub fn y_to_displacement(&self, dy: &[f64]) -> Vec<f64> {
        (self.stacked_p() * DVector::from_column_slice(dy)).as_slice().to_vec()
    }

    /// Max-norm of `Σ P Lᵀ + Σ P̃ L̃ᵀ − I`.
    pub fn completeness_defect(&self) -> f64 {
        let n = self.dim();
        linalg::max_abs(&(self.stacked_p() * self.stacked_l() - DMatrix::identity(n, n)))
    }

    /// `max(‖M R‖, ‖Lᵀ M‖)` over the null vectors.
    pub fn null_residual(&self, m: &DMatrix<f64>) -> f64 {
        let right = self.r.iter().map(|v| (m * v).norm());
        let left = self.l.iter().map(|v| (v.transpose() * m).norm());
        right.chain(left).fold(0.0, f64::max)
    }

    /// Velocity gradient in adapted variables: `∂v/∂y = 𝓡⁻¹ (∂u/∂x) 𝓟`,
    /// where `δu = 𝓡 v` and `δx = 𝓟 δy`.
    pub fn adapted_gradient(&self, grad: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        let rinv = self.stacked_r().try_inverse()?;
        Some(rinv * grad * self.stacked_p())
    }

    /// First-level fold coefficient `κ = L·D²f(R,R)` for the first null pair.
    pub fn fold_coefficient(&self, map: &InitialDataMap) -> Result<f64> {
        let h = map.hessian(&self.u_b)?;
        let (r, l) = (&self.r[0], &self.l[0]);
        Ok(h.iter().zip(l.iter()).map(|(hi, li)| li * (r.transpose() * hi * r)[(0, 0)]).sum())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

#[derive(Debug, Clone)]
pub struct SpatialWindow {
    pub min: f64,
    pub max: f64,
    pub n: usize,
    /// Samples kept for the fit, taken from the middle of the window.
    pub keep: usize,
}

impl Default for SpatialWindow {
    fn default() -> Self {
        Self {
            min: 1e-7,
            max: 1e-3,
            n: 20,
            keep: 12,
        }
    }
}

impl SpatialWindow {
    /// Geometric distances, largest first.
    pub fn distances(&self) -> Vec<f64> {
        let n = self.n.max(2);
        (0..n)
            .map(|k| self.max * (self.min / self.max).powf(k as f64 / (n - 1) as f64))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RayKind {
    /// Along `P^{(1)}`, across the fold.
    Singular,
    /// Along a `P̃` direction, tangent to the caustic.
    Control,
}

#[derive(Debug, Clone, Serialize)]
pub struct QuantityFit {
    pub name: String,
    #[serde(flatten)]
    pub fit: SlopeFit,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpatialFit {
    pub u_b: Vec<f64>,
    pub t_b: f64,
    pub x_b: Vec<f64>,
    pub kind: RayKind,
    /// Control ray tilted off `P̃` towards the preimage side.
    pub tilted: bool,
    pub direction: Vec<f64>,
    /// Distances that produced a sample, largest first.
    pub eps: Vec<f64>,
    pub quantities: Vec<QuantityFit>,
}

impl SpatialFit {
    pub fn quantity(&self, name: &str) -> Option<&SlopeFit> {
        self.quantities.iter().find(|q| q.name == name).map(|q| &q.fit)
    }

    /// Fits of the bounded block `∂v_β/∂y_γ`, `β, γ` past the null sector.
    pub fn bounded_block(&self) -> impl Iterator<Item = &QuantityFit> {
        self.quantities.iter().filter(|q| q.name.starts_with("bounded"))
    }
}

/// Lyapunov–Schmidt reduction at fixed `t_b`: for `u = u_b + R s + R̃ w`, solves
/// the complement equations `L̃·(g(u) − x) = 0` for `w` and returns
/// `(L·(g(u) − x), u)`.
fn reduced(
    map: &InitialDataMap,
    frame: &AdaptedFrame,
    x: &[f64],
    s: f64,
    w0: &DVector<f64>,
) -> Option<(f64, DVector<f64>, Vec<f64>)> {
    let t = frame.t_b;
    let n = frame.dim();
    let ub = DVector::from_column_slice(&frame.u_b);
    let base = &ub + &frame.r[0] * s;
    let rt = columns(frame.r_tilde.iter().cloned(), n);
    let lt = columns(frame.l_tilde.iter().cloned(), n).transpose();
    let xv = DVector::from_column_slice(x);
    let scale = xv.norm().max(1.0);
    let mut w = w0.clone();
    for _ in 0..30 {
        let u = &base + &rt * &w;
        let g = DVector::from_vec(map.forward(u.as_slice(), t).ok()?) - &xv;
        let c = &lt * &g;
        if c.norm() <= 1e-15 * scale {
            return Some((frame.l[0].dot(&g), w, u.as_slice().to_vec()));
        }
        let m = build_matrix(map, t, u.as_slice()).ok()?;
        let dw = (&lt * &m.entries * &rt).lu().solve(&c)?;
        w -= dw;
        if !w.iter().all(|v| v.is_finite()) {
            return None;
        }
    }
    let u = &base + &rt * &w;
    let g = DVector::from_vec(map.forward(u.as_slice(), t).ok()?) - &xv;
    ((&lt * &g).norm() <= 1e-12 * scale).then(|| (frame.l[0].dot(&g), w, u.as_slice().to_vec()))
}

/// Scans the reduced equation over `s` for the preimage of `x` nearest to `u_b`,
/// preferring `s > 0` so successive distances stay on one sheet.
fn preimage(map: &InitialDataMap, frame: &AdaptedFrame, x: &[f64], eps: f64) -> Option<Vec<f64>> {
    let k = frame.dim() - frame.corank();
    let zero = DVector::zeros(k);
    // covers the fold root √(2ε/κ) and the cusp root ∝ ε^{1/3}
    let smax = 10.0 * eps.cbrt();
    let smin = 1e-3 * eps;
    let per_side = 240;
    let mags: Vec<f64> = (0..per_side)
        .map(|i| smin * (smax / smin).powf(i as f64 / (per_side - 1) as f64))
        .collect();
    let mut ss: Vec<f64> = mags.iter().rev().map(|m| -m).collect();
    ss.push(0.0);
    ss.extend(&mags);
    let phi: Vec<Option<f64>> = ss.iter().map(|&s| reduced(map, frame, x, s, &zero).map(|r| r.0)).collect();

    let mut brackets: Vec<(f64, f64)> = Vec::new();
    for i in 0..ss.len() - 1 {
        if let (Some(a), Some(b)) = (phi[i], phi[i + 1]) {
            if a == 0.0 || a.signum() != b.signum() {
                brackets.push((ss[i], ss[i + 1]));
            }
        }
    }
    // nearest positive bracket first, then nearest negative
    brackets.sort_by(|a, b| {
        let key = |p: &(f64, f64)| (p.0 < 0.0, p.0.abs().min(p.1.abs()));
        let (ka, kb) = (key(a), key(b));
        ka.0.cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
    });
    for (mut lo, mut hi) in brackets {
        let mut flo = reduced(map, frame, x, lo, &zero)?.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            let Some((fm, _, _)) = reduced(map, frame, x, mid, &zero) else { break };
            if fm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if fm.signum() == flo.signum() {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        let s = 0.5 * (lo + hi);
        if let Some((_, _, u)) = reduced(map, frame, x, s, &zero) {
            if let Ok((u, _, _)) = newton(map, x, frame.t_b, &u) {
                return Some(u);
            }
        }
    }
    None
}

/// Fold strength at or above which a `Γ` point counts as generic: the first
/// correction to the `−1/2` slope stays below 0.01 over the default window.
pub const GENERIC_FOLD_STRENGTH: f64 = 0.1;

/// `|κ| / max_i ‖D²f_i‖`: how firmly the point sits on a fold. Near zero the
/// point approaches a cusp and fixed-time slopes cross over towards `−2/3`.
pub fn fold_strength(map: &InitialDataMap, frame: &AdaptedFrame) -> Result<f64> {
    let kappa = frame.fold_coefficient(map)?;
    let scale = map.hessian(&frame.u_b)?.iter().map(|h| h.norm()).fold(0.0, f64::max);
    Ok(if scale > 0.0 { kappa.abs() / scale } else { 0.0 })
}

/// Samples `∂u/∂x` along `x(ε) = x_b + ε d` at `t = t_b` and fits log–log
/// slopes of `|ω|`, `|∂v₁/∂y₁|` and each entry of the bounded block.
///
/// A pure `P̃` ray can miss the preimage side of the caustic in both senses,
/// since it is tangent to it; the control fit then tilts to `P̃ + sign(κ) P`
/// and sets `tilted`.
pub fn fit_spatial_exponent(
    map: &InitialDataMap,
    u_b: &[f64],
    t_b: f64,
    kind: RayKind,
    window: &SpatialWindow,
) -> Result<SpatialFit> {
    let frame = frame_at(map, u_b, t_b, TOL_NULL)?;
    if frame.corank() != 1 {
        return Err(Error::Fit(format!("ray fits need corank one, found {}", frame.corank())));
    }
    let n = frame.dim();
    let f = map.f(u_b)?;
    let x_b: Vec<f64> = (0..n).map(|i| u_b[i] * t_b + f[i]).collect();
    let kappa = frame.fold_coefficient(map)?;
    let generic = fold_strength(map, &frame)? > 1e-3;

    match kind {
        RayKind::Singular => {
            // preimages lie on the side where L·d carries the sign of κ
            let p = frame.p[0].clone();
            let candidates = if generic { vec![&p * kappa.signum()] } else { vec![p.clone(), -p] };
            fit_ray(map, &frame, &x_b, candidates, kind, false, window)
        }
        RayKind::Control => {
            let pt = frame
                .p_tilde
                .first()
                .cloned()
                .ok_or_else(|| Error::Fit("no complement direction in 1D".into()))?;
            fit_ray(map, &frame, &x_b, vec![pt.clone(), -&pt], kind, false, window).or_else(|_| {
                let side = if generic { kappa.signum() } else { 1.0 };
                let d = (&pt + &frame.p[0] * side).normalize();
                fit_ray(map, &frame, &x_b, vec![d], kind, true, window)
            })
        }
    }
}

fn fit_ray(
    map: &InitialDataMap,
    frame: &AdaptedFrame,
    x_b: &[f64],
    candidates: Vec<DVector<f64>>,
    kind: RayKind,
    tilted: bool,
    window: &SpatialWindow,
) -> Result<SpatialFit> {
    let (u_b, t_b, n) = (&frame.u_b, frame.t_b, frame.dim());
    let eps = window.distances();
    // among the candidate senses keep the one whose outermost preimage is nearest
    let ub = DVector::from_column_slice(u_b);
    let d = candidates
        .into_iter()
        .filter_map(|d| {
            let x: Vec<f64> = (0..n).map(|i| x_b[i] + eps[0] * d[i]).collect();
            let u = preimage(map, frame, &x, eps[0])?;
            Some(((DVector::from_vec(u) - &ub).norm(), d))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, d)| d)
        .ok_or(Error::NoConvergence { best: u_b.to_vec(), residual: f64::INFINITY })?;

    let samples: Vec<Option<(f64, Vec<f64>)>> = eps
        .par_iter()
        .map(|&e| {
            let x: Vec<f64> = (0..n).map(|i| x_b[i] + e * d[i]).collect();
            let u = preimage(map, frame, &x, e)?;
            Some((e, u))
        })
        .collect();

    // another Γ sheet crossing the ray shows up as a second real root near t_b
    for (e, u) in samples.iter().flatten() {
        let set = branch_times(map, u)?;
        let mut gaps: Vec<f64> = set.roots.iter().map(|r| (r.t - t_b).abs()).collect();
        gaps.sort_by(f64::total_cmp);
        if gaps.len() >= 2 && gaps[1] <= 1e-2 * e.sqrt() * t_b.abs().max(1.0) {
            return Err(Error::Contamination);
        }
    }

    // middle `keep` of the window; failures near the tip shrink it
    let trim = window.n.saturating_sub(window.keep) / 2;
    let used: Vec<(f64, Vec<f64>)> = samples
        .into_iter()
        .enumerate()
        .filter(|(i, _)| *i >= trim && *i < trim + window.keep)
        .filter_map(|(_, s)| s)
        .collect();
    if used.len() < 6 {
        return Err(Error::Fit(format!("only {} ray samples converged", used.len())));
    }

    let k = frame.corank();
    let mut names = vec!["omega".to_string(), "dv1/dy1".to_string()];
    for a in k..n {
        for b in k..n {
            names.push(format!("bounded dv{}/dy{}", a + 1, b + 1));
        }
    }
    let mut series: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    let mut log_eps = Vec::new();
    for (e, u) in &used {
        let m = build_matrix(map, t_b, u)?;
        let grad = m.derivatives_from_inverse()?;
        let dvdy = frame
            .adapted_gradient(&grad)
            .ok_or(Error::Singular { det: 0.0 })?;
        let mut vals = vec![two_form_norm(&two_form_of(&grad)), dvdy[(0, 0)].abs()];
        for a in k..n {
            for b in k..n {
                vals.push(dvdy[(a, b)].abs());
            }
        }
        log_eps.push(e.ln());
        for (s, v) in series.iter_mut().zip(vals) {
            s.push(v.max(f64::MIN_POSITIVE).ln());
        }
    }
    let quantities = names
        .into_iter()
        .zip(series)
        .map(|(name, ys)| Ok(QuantityFit { name, fit: linear_regression(&log_eps, &ys)? }))
        .collect::<Result<Vec<_>>>()?;
    Ok(SpatialFit {
        u_b: u_b.to_vec(),
        t_b,
        x_b: x_b.to_vec(),
        kind,
        tilted,
        direction: d.as_slice().to_vec(),
        eps: used.iter().map(|(e, _)| *e).collect(),
        quantities,
    })
}

/// Which real root of `det M(·,u)` defines the blowup sheet being scanned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootSelect {
    SmallestPositive,
    /// Index into the ascending list of distinct real roots.
    Index(usize),
}

fn select_root(map: &InitialDataMap, u: &[f64], which: RootSelect) -> Option<f64> {
    let set = branch_times(map, u).ok()?;
    match which {
        RootSelect::SmallestPositive => set.smallest_positive().map(|r| r.t),
        RootSelect::Index(k) => set.roots.get(k).filter(|r| r.multiplicity == 1).map(|r| r.t),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelCandidate {
    pub u: Vec<f64>,
    pub t_b: f64,
    /// Fold coefficient at the candidate; zero up to bisection accuracy.
    pub kappa: f64,
    pub level: usize,
}

/// Scans a 2D `u` grid for zeros of the fold coefficient on one blowup sheet.
/// Those are the second-level (cusp) points of `Γ`, where the fixed-time
/// exponent steepens from `−1/2` to `−2/3`. Sign flips caused by the null
/// vectors' sign convention are rejected by requiring `κ → 0` under bisection.
pub fn scan_level_candidates(
    map: &InitialDataMap,
    bounds: &Bounds,
    n_points: usize,
    which: RootSelect,
) -> Result<Vec<LevelCandidate>> {
    if map.dim() != 2 {
        return Err(Error::Dimension { expected: 2, found: map.dim() });
    }
    let kappa = |u: &[f64]| -> Option<f64> {
        let t = select_root(map, u, which)?;
        let frame = frame_at(map, u, t, TOL_NULL).ok()?;
        if frame.corank() != 1 {
            return None;
        }
        frame.fold_coefficient(map).ok().filter(|k| k.is_finite())
    };
    let n = n_points.max(2);
    let at = |i: usize, j: usize| -> Vec<f64> {
        (0..2)
            .map(|k| {
                let idx = if k == 0 { i } else { j };
                bounds.lower[k] + (bounds.upper[k] - bounds.lower[k]) * idx as f64 / (n - 1) as f64
            })
            .collect()
    };
    let values: Vec<Option<f64>> = (0..n * n).into_par_iter().map(|f| kappa(&at(f / n, f % n))).collect();
    let scale = values.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);

    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for (di, dj) in [(1, 0), (0, 1)] {
                if i + di < n && j + dj < n {
                    edges.push(((i, j), (i + di, j + dj)));
                }
            }
        }
    }
    let found: Vec<Option<LevelCandidate>> = edges
        .par_iter()
        .map(|&((i0, j0), (i1, j1))| {
            let (a, b) = (values[i0 * n + j0]?, values[i1 * n + j1]?);
            if a.signum() == b.signum() {
                return None;
            }
            let (mut p, mut q) = (at(i0, j0), at(i1, j1));
            let mut fp = a;
            for _ in 0..80 {
                let mid: Vec<f64> = p.iter().zip(&q).map(|(x, y)| 0.5 * (x + y)).collect();
                let fm = kappa(&mid)?;
                if fm.signum() == fp.signum() {
                    p = mid;
                    fp = fm;
                } else {
                    q = mid;
                }
            }
            let u: Vec<f64> = p.iter().zip(&q).map(|(x, y)| 0.5 * (x + y)).collect();
            let k = kappa(&u)?;
            (k.abs() <= 1e-6 * scale).then(|| LevelCandidate {
                t_b: select_root(map, &u, which).unwrap_or(f64::NAN),
                u,
                kappa: k,
                level: 2,
            })
        })
        .collect();
    Ok(found.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn diagonal_null_pair() {
        let m = DMatrix::from_diagonal(&dv(&[0.0, 1.0, 1.0]));
        let (r, l) = null_vectors(&m, TOL_NULL).unwrap();
        assert_eq!(r, vec![dv(&[1.0, 0.0, 0.0])]);
        assert_eq!(l, vec![dv(&[1.0, 0.0, 0.0])]);
        let frame = complementary_basis(&[0.0; 3], 0.0, r, l).unwrap();
        assert_eq!(frame.r_tilde, vec![dv(&[0.0, 1.0, 0.0]), dv(&[0.0, 0.0, 1.0])]);
        assert_eq!(frame.p, vec![dv(&[1.0, 0.0, 0.0])]);
        assert_eq!(frame.completeness_defect(), 0.0);
        assert_eq!(frame.q_matrix(), DMatrix::identity(3, 3));
        assert_eq!(frame.displacement_to_y(&[1.0, 2.0, 3.0]), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn rank_one_outer_product() {
        let a = dv(&[1.0, 2.0, 3.0]);
        let b = dv(&[4.0, 5.0, 6.0]);
        let m = &a * b.transpose() / (a.norm() * b.norm());
        let (r, l) = null_vectors(&m, TOL_NULL).unwrap();
        assert_eq!(r.len(), 2);
        for v in &r {
            assert!(v.dot(&b).abs() < 1e-14);
        }
        for v in &l {
            assert!(v.dot(&a).abs() < 1e-14);
        }
        assert!((r[0].dot(&r[1])).abs() < 1e-15);
    }

    #[test]
    fn full_rank_rejected() {
        let m = DMatrix::<f64>::identity(2, 2);
        assert_eq!(null_vectors(&m, TOL_NULL).unwrap_err(), Error::FullRank);
    }

    #[test]
    fn hand_q_matrix() {
        // M = [[1, 1], [0, 0]]: R ∝ (1, −1), L = (0, 1), P = L since [L|L̃] is orthogonal
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 0.0]);
        let (r, l) = null_vectors(&m, TOL_NULL).unwrap();
        let frame = complementary_basis(&[0.0, 0.0], 0.0, r, l).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((frame.r[0].clone() - dv(&[h, -h])).norm() < 1e-15);
        assert_eq!(frame.l[0], dv(&[0.0, 1.0]));
        let q = frame.q_matrix();
        let expect = frame.stacked_r().transpose() * frame.stacked_l().transpose();
        assert!(linalg::max_abs(&(q - expect)) < 1e-15);
    }

    #[test]
    fn displacement_round_trip() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.5, 2.0, 4.0, 1.0, 0.0, 1.0, 3.0]);
        let frame = {
            let (r, l) = null_vectors(&m, TOL_NULL).unwrap();
            complementary_basis(&[0.0; 3], 0.0, r, l).unwrap()
        };
        assert!(frame.null_residual(&m) < 1e-12);
        let dx = [0.3, -1.2, 2.5];
        let back = frame.y_to_displacement(&frame.displacement_to_y(&dx));
        for (a, b) in back.iter().zip(dx) {
            assert!((a - b).abs() < 1e-12);
        }
        // a displacement orthogonal to L has no null-sector component
        let mut perp = dv(&[1.0, 0.0, 0.0]);
        perp -= &frame.l[0] * frame.l[0].dot(&perp);
        assert!(frame.displacement_to_y(perp.as_slice())[0].abs() < 1e-15);
    }

    #[test]
    fn cubic_gamma_point_frame() {
        let map = builtins::cubic();
        let u = [1.6, 1.2];
        let t = branch_times(&map, &u).unwrap().roots[0].t;
        let frame = frame_at(&map, &u, t, TOL_NULL).unwrap();
        assert_eq!((frame.corank(), frame.r_tilde.len()), (1, 1));
        let m = build_matrix(&map, t, &u).unwrap();
        assert!(frame.null_residual(&m.entries) <= 1e-10 * m.norm());
        assert!(frame.completeness_defect() <= 1e-12);
        assert!(frame.q_matrix().iter().all(|v| v.abs() <= 1.0 + 1e-12));
    }

    #[test]
    fn frames_are_bitwise_deterministic() {
        let map = builtins::cubic();
        let u = [2.0, -0.5];
        let t = branch_times(&map, &u).unwrap().roots[0].t;
        let a = frame_at(&map, &u, t, TOL_NULL).unwrap();
        let b = frame_at(&map, &u, t, TOL_NULL).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn fold_slope_on_cubic() {
        let map = builtins::cubic();
        let u = [1.2, 1.5];
        let t = branch_times(&map, &u).unwrap().roots[0].t;
        let fit = fit_spatial_exponent(&map, &u, t, RayKind::Singular, &SpatialWindow::default()).unwrap();
        let s = fit.quantity("dv1/dy1").unwrap().slope;
        assert!((s + 0.5).abs() < 0.05, "{s}");
        for q in fit.bounded_block() {
            assert!(q.fit.slope >= -0.05, "{}: {}", q.name, q.fit.slope);
        }
    }
}
