//! The physical field `u(x,t)` recovered by Newton inversion of
//! `x = u t + f(u)`, single points and grids, with finite-difference oracles.

use std::io::{self, Read, Write};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hodograph::build_matrix;
use crate::linalg;
use crate::map::{InitialDataMap, MapFamily};

pub const NEWTON_MAX_ITERS: usize = 60;
pub const NEWTON_MAX_HALVINGS: usize = 30;
/// Relative `|det M|` below which a Newton step is refused.
const NEWTON_SINGULAR_REL: f64 = 1e-13;
/// Grid cells whose characteristic `u` has a real blowup time within
/// `MASK_TIME_REL·max(1,|t|)` of `t` are masked as near-singular. Unlike a
/// threshold on `det M`, this ignores the diagonal scaling of `M`, which is
/// extreme in the tails of maps like the Gaussian one.
pub const MASK_TIME_REL: f64 = 1e-3;
/// Time steps of the cold-start ladder from `t = 0`.
const LADDER_STEPS: usize = 16;

pub fn newton_tol(x: &[f64]) -> f64 {
    1e-12 * norm(x).max(1.0)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldSample {
    pub x: Vec<f64>,
    pub t: f64,
    pub u: Vec<f64>,
    /// Index into the family's branches.
    pub branch: usize,
    pub residual: f64,
    pub newton_iters: usize,
}

fn residual_vec(map: &InitialDataMap, x: &[f64], t: f64, u: &[f64]) -> Option<Vec<f64>> {
    let fwd = map.forward(u, t).ok()?;
    Some(fwd.iter().zip(x).map(|(a, b)| a - b).collect())
}

/// Damped Newton on `g(u) = u t + f(u) − x` with Armijo backtracking.
/// Returns `(u, residual, iterations)`; the branch predicate is not checked.
/// A stall is accepted when the residual sits at the roundoff floor of `g`.
pub fn newton(map: &InitialDataMap, x: &[f64], t: f64, seed: &[f64]) -> Result<(Vec<f64>, f64, usize)> {
    if !map.contains(seed) {
        return Err(Error::Domain(seed.to_vec()));
    }
    let tol = newton_tol(x);
    let mut u = seed.to_vec();
    let mut g = residual_vec(map, x, t, &u).ok_or_else(|| Error::Domain(u.clone()))?;
    let mut r = norm(&g);
    for iter in 0..=NEWTON_MAX_ITERS {
        if r <= tol {
            return Ok((u, r, iter));
        }
        if iter == NEWTON_MAX_ITERS {
            break;
        }
        let m = build_matrix(map, t, &u)?;
        let n = m.dim();
        if m.det.abs() <= NEWTON_SINGULAR_REL * m.norm().max(1e-300).powi(n as i32) {
            return Err(Error::SingularNewton { det: m.det });
        }
        let step = m
            .entries
            .clone()
            .lu()
            .solve(&DVector::from_column_slice(&g))
            .ok_or(Error::SingularNewton { det: m.det })?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=NEWTON_MAX_HALVINGS {
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(a, d)| a - lambda * d).collect();
            if map.contains(&trial) {
                if let Some(gt) = residual_vec(map, x, t, &trial) {
                    let rt = norm(&gt);
                    // a converged-looking trial is useless if M cannot be formed there
                    if rt <= (1.0 - 1e-4 * lambda) * r && (rt <= tol || map.jacobian(&trial).is_ok()) {
                        u = trial;
                        g = gt;
                        r = rt;
                        accepted = true;
                        break;
                    }
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            // stalled: accept if the residual is at the roundoff floor of g near u,
            // which grows with ‖M‖ where f is steep (e.g. next to a branch edge)
            let floor = 64.0 * f64::EPSILON * (norm(x) + norm(&u) * m.norm());
            if r <= floor {
                return Ok((u, r, iter));
            }
            break;
        }
    }
    Err(Error::NoConvergence { best: u, residual: r })
}

/// Newton solve on one branch, validated by the branch predicate.
pub fn solve_point(map: &InitialDataMap, x: &[f64], t: f64, seed: Option<&[f64]>) -> Result<FieldSample> {
    match seed {
        Some(s) => seeded(map, x, t, s),
        None => cold_start(&MapFamily::single(map.clone()), x, t),
    }
}

fn seeded(map: &InitialDataMap, x: &[f64], t: f64, seed: &[f64]) -> Result<FieldSample> {
    let (u, residual, newton_iters) = newton(map, x, t, seed)?;
    if !map.branch_accepts(x, t, &u) {
        return Err(Error::BranchViolation(u));
    }
    Ok(FieldSample {
        x: x.to_vec(),
        t,
        u,
        branch: 0,
        residual,
        newton_iters,
    })
}

fn seeded_family(
    family: &MapFamily,
    x: &[f64],
    t: f64,
    seed: &[f64],
    prefer: Option<usize>,
) -> Result<FieldSample> {
    let nb = family.branches.len();
    let first = prefer.unwrap_or(0).min(nb - 1);
    let mut err = Error::NoConvergence {
        best: seed.to_vec(),
        residual: f64::INFINITY,
    };
    for b in std::iter::once(first).chain((0..nb).filter(|&b| b != first)) {
        match seeded(&family.branches[b], x, t, seed) {
            Ok(mut s) => {
                s.branch = b;
                return Ok(s);
            }
            Err(e) => err = e,
        }
    }
    Err(err)
}

/// With initial data, seeds from `u₀(ξ)` at the characteristic foot `ξ`, and
/// failing that continues from `u₀(x)` at `t = 0` along a time ladder,
/// letting the owning branch change between rungs. Without initial data
/// each branch starts from the centre of its chart.
fn cold_start(family: &MapFamily, x: &[f64], t: f64) -> Result<FieldSample> {
    let primary = family.primary();
    if primary.has_initial_data() {
        if let Some(xi) = solve_foot(primary, x, t) {
            let u = primary.initial_data(&xi)?;
            if let Ok(s) = seeded_family(family, x, t, &u, None) {
                return Ok(s);
            }
        }
        let mut u = primary.initial_data(x)?;
        let mut prefer = None;
        let mut total = 0;
        for k in 0..=LADDER_STEPS {
            let tk = t * k as f64 / LADDER_STEPS as f64;
            let mut s = seeded_family(family, x, tk, &u, prefer)?;
            total += s.newton_iters;
            if k == LADDER_STEPS {
                s.newton_iters = total;
                return Ok(s);
            }
            u = s.u;
            prefer = Some(s.branch);
        }
        unreachable!("ladder returns on its last rung");
    }
    let mut err = Error::NoConvergence {
        best: x.to_vec(),
        residual: f64::INFINITY,
    };
    for (b, map) in family.branches.iter().enumerate() {
        let chart = map.chart();
        let seed = (chart.to_domain)(&chart.bounds.center());
        match seeded(map, x, t, &seed) {
            Ok(mut s) => {
                s.branch = b;
                return Ok(s);
            }
            Err(e) => err = e,
        }
    }
    Err(err)
}

/// Foot of the characteristic through `(x, t)`: Newton on `ξ + t u₀(ξ) = x`,
/// which stays smooth across branch boundaries of the hodograph map.
fn solve_foot(map: &InitialDataMap, x: &[f64], t: f64) -> Option<Vec<f64>> {
    let n = x.len();
    let phi = |xi: &[f64]| -> Option<Vec<f64>> {
        let u = map.initial_data(xi).ok()?;
        let r: Vec<f64> = (0..n).map(|i| xi[i] + t * u[i] - x[i]).collect();
        r.iter().all(|v| v.is_finite()).then_some(r)
    };
    let mut xi = x.to_vec();
    let mut g = phi(&xi)?;
    let tol = newton_tol(x);
    for _ in 0..NEWTON_MAX_ITERS {
        let r = norm(&g);
        if r <= tol {
            return Some(xi);
        }
        let mut jac = DMatrix::<f64>::identity(n, n);
        for j in 0..n {
            let h = 1e-6 * xi[j].abs().max(1.0);
            let mut p = xi.clone();
            let mut m = xi.clone();
            p[j] += h;
            m[j] -= h;
            let (up, um) = (map.initial_data(&p).ok()?, map.initial_data(&m).ok()?);
            for i in 0..n {
                jac[(i, j)] += t * (up[i] - um[i]) / (2.0 * h);
            }
        }
        let step = jac.lu().solve(&DVector::from_column_slice(&g))?;
        let mut lambda = 1.0;
        let mut moved = false;
        for _ in 0..=NEWTON_MAX_HALVINGS {
            let trial: Vec<f64> = xi.iter().zip(step.iter()).map(|(a, d)| a - lambda * d).collect();
            if let Some(gt) = phi(&trial) {
                if norm(&gt) <= (1.0 - 1e-4 * lambda) * r {
                    xi = trial;
                    g = gt;
                    moved = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !moved {
            break;
        }
    }
    // close enough to seed the hodograph solve
    (norm(&g) <= 1e-8 * norm(x).max(1.0)).then_some(xi)
}

/// Solves on a branch family: seeded Newton over the branches (starting
/// with `prefer`), falling back to a cold start.
pub fn solve_family(
    family: &MapFamily,
    x: &[f64],
    t: f64,
    seed: Option<&[f64]>,
    prefer: Option<usize>,
) -> Result<FieldSample> {
    if let Some(s) = seed {
        if let Ok(sample) = seeded_family(family, x, t, s, prefer) {
            return Ok(sample);
        }
    }
    cold_start(family, x, t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, count: usize) -> Self {
        Self { min, max, count }
    }

    pub fn value(&self, i: usize) -> f64 {
        if self.count <= 1 {
            self.min
        } else {
            self.min + (self.max - self.min) * i as f64 / (self.count - 1) as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldGrid {
    pub axes: Vec<Axis>,
    pub t: f64,
    /// Row-major over the axes (last axis fastest); `None` marks masked cells.
    pub samples: Vec<Option<FieldSample>>,
}

fn unravel(axes: &[Axis], mut flat: usize) -> Vec<usize> {
    let mut idx = vec![0; axes.len()];
    for k in (0..axes.len()).rev() {
        idx[k] = flat % axes[k].count;
        flat /= axes[k].count;
    }
    idx
}

fn ravel(axes: &[Axis], idx: &[usize]) -> usize {
    idx.iter().zip(axes).fold(0, |acc, (i, a)| acc * a.count + i)
}

impl FieldGrid {
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        unravel(&self.axes, flat)
            .iter()
            .zip(&self.axes)
            .map(|(&i, a)| a.value(i))
            .collect()
    }

    pub fn masked_count(&self) -> usize {
        self.samples.iter().filter(|s| s.is_none()).count()
    }

    pub fn to_csv(&self) -> String {
        let n = self.dim();
        let mut head: Vec<String> = (1..=n).map(|k| format!("x{k}")).collect();
        head.extend((1..=n).map(|k| format!("u{k}")));
        head.push("branch".into());
        head.push("mask".into());
        let mut out = head.join(",");
        out.push('\n');
        for (flat, s) in self.samples.iter().enumerate() {
            let mut row: Vec<String> = self.point(flat).iter().map(|v| format!("{v:.17e}")).collect();
            match s {
                Some(s) => {
                    row.extend(s.u.iter().map(|v| format!("{v:.17e}")));
                    row.push(s.branch.to_string());
                    row.push("0".into());
                }
                None => {
                    row.extend(std::iter::repeat_n("NaN".to_string(), n));
                    row.push("-1".into());
                    row.push("1".into());
                }
            }
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Little-endian: `u32` dim, per axis `f64 min, f64 max, u64 count`, `f64 t`,
    /// then per cell `x…, u…, branch, mask` as `f64` (`u` NaN and branch −1 when masked).
    pub fn write_binary(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(&(self.dim() as u32).to_le_bytes())?;
        for a in &self.axes {
            w.write_all(&a.min.to_le_bytes())?;
            w.write_all(&a.max.to_le_bytes())?;
            w.write_all(&(a.count as u64).to_le_bytes())?;
        }
        w.write_all(&self.t.to_le_bytes())?;
        for (flat, s) in self.samples.iter().enumerate() {
            let mut row = self.point(flat);
            match s {
                Some(s) => {
                    row.extend(&s.u);
                    row.push(s.branch as f64);
                    row.push(0.0);
                }
                None => {
                    row.extend(std::iter::repeat_n(f64::NAN, self.dim()));
                    row.push(-1.0);
                    row.push(1.0);
                }
            }
            for v in row {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Inverse of [`write_binary`](Self::write_binary). Residuals and iteration
    /// counts are not stored and come back as zero.
    pub fn read_binary(r: &mut impl Read) -> io::Result<Self> {
        fn f64_of(r: &mut impl Read) -> io::Result<f64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(f64::from_le_bytes(b))
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let dim = u32::from_le_bytes(b4) as usize;
        let mut axes = Vec::with_capacity(dim);
        for _ in 0..dim {
            let min = f64_of(r)?;
            let max = f64_of(r)?;
            let mut b8 = [0u8; 8];
            r.read_exact(&mut b8)?;
            axes.push(Axis::new(min, max, u64::from_le_bytes(b8) as usize));
        }
        let t = f64_of(r)?;
        let total: usize = axes.iter().map(|a| a.count).product();
        let mut samples = Vec::with_capacity(total);
        for _ in 0..total {
            let vals: Vec<f64> = (0..2 * dim + 2).map(|_| f64_of(r)).collect::<io::Result<_>>()?;
            samples.push((vals[2 * dim + 1] == 0.0).then(|| FieldSample {
                x: vals[..dim].to_vec(),
                t,
                u: vals[dim..2 * dim].to_vec(),
                branch: vals[2 * dim] as usize,
                residual: 0.0,
                newton_iters: 0,
            }));
        }
        Ok(Self { axes, t, samples })
    }
}

/// True when the converged cell sits too close to the blowup surface to trust.
fn near_singular(family: &MapFamily, s: &FieldSample) -> bool {
    let map = &family.branches[s.branch];
    match build_matrix(map, s.t, &s.u) {
        // f has infinite slope here (a wedge edge), so M⁻¹ → 0: no blowup
        Err(Error::Derivative(_)) => return false,
        Err(_) => return true,
        Ok(_) => {}
    }
    let reach = MASK_TIME_REL * s.t.abs().max(1.0);
    match crate::surface::branch_times(map, &s.u) {
        Ok(set) => set.roots.iter().any(|r| (r.t - s.t).abs() <= reach),
        Err(_) => true,
    }
}

fn accept(family: &MapFamily, r: Result<FieldSample>) -> Option<FieldSample> {
    r.ok().filter(|s| !near_singular(family, s))
}

/// Solves every grid cell.
///
/// Stripes (fixed first-axis index) run in parallel; inside a stripe the
/// cells are swept in serpentine order seeding each from its predecessor
/// when `continuation` is on. A sequential second pass retries masked cells
/// from already solved neighbours in index order, so the output does not
/// depend on scheduling.
pub fn solve_grid(family: &MapFamily, axes: &[Axis], t: f64, continuation: bool) -> Result<FieldGrid> {
    let dim = family.dim();
    if axes.len() != dim {
        return Err(Error::Dimension { expected: dim, found: axes.len() });
    }
    if axes.iter().any(|a| a.count == 0) {
        return Err(Error::Spec("grid axes need at least one point".into()));
    }
    let mut grid = FieldGrid {
        axes: axes.to_vec(),
        t,
        samples: vec![None; axes.iter().map(|a| a.count).product()],
    };
    let stripe_len = grid.len() / axes[0].count;
    let stripes: Vec<Vec<Option<FieldSample>>> = (0..axes[0].count)
        .into_par_iter()
        .map(|s| {
            let mut out = vec![None; stripe_len];
            let mut prev: Option<FieldSample> = None;
            for k in 0..stripe_len {
                let local = serpentine(&axes[1..], k);
                let flat = s * stripe_len + local;
                let x = grid.point(flat);
                let (seed, prefer) = match (&prev, continuation) {
                    (Some(p), true) => (Some(p.u.as_slice()), Some(p.branch)),
                    _ => (None, None),
                };
                let r = accept(family, solve_family(family, &x, t, seed, prefer));
                prev = r.clone().or(prev);
                out[local] = r;
            }
            out
        })
        .collect();
    for (s, stripe) in stripes.into_iter().enumerate() {
        for (k, v) in stripe.into_iter().enumerate() {
            grid.samples[s * stripe_len + k] = v;
        }
    }

    // pass 2: masked cells seeded from solved neighbours
    for flat in 0..grid.len() {
        if grid.samples[flat].is_some() {
            continue;
        }
        let idx = unravel(axes, flat);
        let x = grid.point(flat);
        for k in 0..dim {
            for delta in [-1i64, 1] {
                let j = idx[k] as i64 + delta;
                if j < 0 || j >= axes[k].count as i64 {
                    continue;
                }
                let mut nidx = idx.clone();
                nidx[k] = j as usize;
                let Some(nb) = grid.samples[ravel(axes, &nidx)].clone() else {
                    continue;
                };
                if let Some(s) = accept(family, solve_family(family, &x, t, Some(&nb.u), Some(nb.branch))) {
                    grid.samples[flat] = Some(s);
                    break;
                }
            }
            if grid.samples[flat].is_some() {
                break;
            }
        }
    }
    Ok(grid)
}

/// Index within a stripe visited `k`-th by a serpentine sweep over `axes`.
fn serpentine(axes: &[Axis], k: usize) -> usize {
    if axes.is_empty() {
        return 0;
    }
    let mut idx = unravel(axes, k);
    // reverse every other line so consecutive cells stay adjacent
    for d in 1..axes.len() {
        let outer: usize = idx[..d].iter().sum();
        if outer % 2 == 1 {
            idx[d] = axes[d].count - 1 - idx[d];
        }
    }
    ravel(axes, &idx)
}

/// Central-difference `∂u_i/∂x_j` of the Newton-inverted field.
pub fn fd_gradient(family: &MapFamily, x: &[f64], t: f64, h: f64) -> Result<DMatrix<f64>> {
    let n = family.dim();
    let centre = solve_family(family, x, t, None, None)?;
    let mut g = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += h;
        xm[j] -= h;
        let up = solve_family(family, &xp, t, Some(&centre.u), Some(centre.branch))?.u;
        let um = solve_family(family, &xm, t, Some(&centre.u), Some(centre.branch))?.u;
        for i in 0..n {
            g[(i, j)] = (up[i] - um[i]) / (2.0 * h);
        }
    }
    Ok(g)
}

/// `‖u(x,t) − u₀(x − u t)‖`.
pub fn characteristics_check(family: &MapFamily, x: &[f64], t: f64) -> Result<f64> {
    let s = solve_family(family, x, t, None, None)?;
    let map = &family.branches[s.branch];
    let foot: Vec<f64> = x.iter().zip(&s.u).map(|(xi, ui)| xi - ui * t).collect();
    let u0 = map.initial_data(&foot)?;
    Ok(norm(&s.u.iter().zip(&u0).map(|(a, b)| a - b).collect::<Vec<_>>()))
}

/// Max-norm distance between two velocity gradients relative to the larger.
pub fn relative_gap(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    linalg::max_abs(&(a - b)) / linalg::max_abs(a).max(linalg::max_abs(b)).max(1e-300)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins;

    #[test]
    fn linear_point() {
        let fam = MapFamily::single(builtins::linear(2, 1.0));
        let s = solve_family(&fam, &[1.0, 2.0], 1.0, None, None).unwrap();
        assert!((s.u[0] - 0.5).abs() < 1e-12 && (s.u[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_initial_data() {
        let fam = builtins::gaussian();
        let s = solve_family(&fam, &[1.0, 1.0], 0.0, None, None).unwrap();
        assert!((s.u[0] - (-2f64).exp()).abs() < 1e-12);
        assert!((s.u[1] - (-4f64).exp()).abs() < 1e-12);
        assert_eq!(fam.branches[s.branch].branch_label(), Some("++"));
    }

    #[test]
    fn gaussian_round_trip() {
        let fam = builtins::gaussian();
        let uc = builtins::reference::GAUSSIAN_U_C;
        let map = fam.branch("++").unwrap();
        let x = map.forward(&uc, 0.5).unwrap();
        let s = solve_family(&fam, &x, 0.5, None, None).unwrap();
        assert!((s.u[0] - uc[0]).abs() < 1e-8 && (s.u[1] - uc[1]).abs() < 1e-8);
    }

    #[test]
    fn rotational_grid() {
        let alpha = 1.3;
        let fam = MapFamily::single(builtins::rotational(alpha));
        let t = 0.7;
        let axes = [Axis::new(-1.0, 1.0, 9), Axis::new(-1.0, 1.0, 7)];
        let grid = solve_grid(&fam, &axes, t, true).unwrap();
        assert_eq!(grid.masked_count(), 0);
        for (flat, s) in grid.samples.iter().enumerate() {
            let x = grid.point(flat);
            let exact = builtins::reference::rotational_field(alpha, &x, t);
            let s = s.as_ref().unwrap();
            assert!((s.u[0] - exact[0]).abs() < 1e-10 && (s.u[1] - exact[1]).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_map_identity() {
        let fam = MapFamily::single(builtins::zero(2));
        let grid = solve_grid(&fam, &[Axis::new(-2.0, 2.0, 5), Axis::new(0.0, 1.0, 3)], 1.0, true).unwrap();
        for (flat, s) in grid.samples.iter().enumerate() {
            assert_eq!(s.as_ref().unwrap().u, grid.point(flat));
        }
    }

    #[test]
    fn binary_round_trip() {
        let fam = MapFamily::single(builtins::linear(2, 1.0));
        let grid = solve_grid(&fam, &[Axis::new(-1.0, 1.0, 4), Axis::new(-1.0, 1.0, 3)], -1.0, true).unwrap();
        // t = −1 is singular everywhere for f = u
        assert_eq!(grid.masked_count(), grid.len());
        let grid = solve_grid(&fam, &[Axis::new(-1.0, 1.0, 4), Axis::new(-1.0, 1.0, 3)], 0.5, true).unwrap();
        let mut buf = Vec::new();
        grid.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 2 * 24 + 8 + grid.len() * 6 * 8);
        let back = FieldGrid::read_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(back.axes, grid.axes);
        for (a, b) in back.samples.iter().zip(&grid.samples) {
            assert_eq!(a.as_ref().unwrap().u, b.as_ref().unwrap().u);
        }
        assert!(grid.to_csv().starts_with("x1,x2,u1,u2,branch,mask\n"));
    }

    #[test]
    fn gradient_oracle() {
        let fam = MapFamily::single(builtins::linear(2, 0.5));
        let g = fd_gradient(&fam, &[0.3, -0.2], 1.0, 1e-5).unwrap();
        assert!((g[(0, 0)] - 1.0 / 1.5).abs() < 1e-8 && g[(0, 1)].abs() < 1e-8);

        let cubic = MapFamily::single(builtins::cubic());
        let t = 0.4;
        let u = [0.5, 0.7];
        let x = cubic.primary().forward(&u, t).unwrap();
        let g = fd_gradient(&cubic, &x, t, 1e-5).unwrap();
        let s = solve_family(&cubic, &x, t, Some(&u), None).unwrap();
        let exact = build_matrix(cubic.primary(), t, &s.u).unwrap().derivatives_from_inverse().unwrap();
        assert!(relative_gap(&g, &exact) < 1e-6);
    }

    #[test]
    fn characteristics() {
        let fam = MapFamily::single(builtins::rotational(0.8));
        assert!(characteristics_check(&fam, &[0.4, -0.3], 1.2).unwrap() < 1e-10);
        let g = builtins::gaussian();
        assert!(characteristics_check(&g, &[0.3, 0.2], 0.4).unwrap() < 1e-8);
        assert!(characteristics_check(&g, &[-0.5, 0.6], 0.0).unwrap() < 1e-12);
        let noinit = MapFamily::single(builtins::cubic());
        assert_eq!(
            characteristics_check(&noinit, &[0.1, 0.1], 0.0).unwrap_err(),
            Error::NotAvailable("initial data u0")
        );
    }
}
