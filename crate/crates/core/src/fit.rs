//! Asymptotic fits of the vorticity near a blowup root: the log–log slope of
//! `|ω|` against `|t − t_b|` and a Laurent expansion in `s = |t − t_b|`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::map::InitialDataMap;
use crate::vorticity::PoleExpansion;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    /// `t ↑ t_b`
    Below,
    /// `t ↓ t_b`
    Above,
}

impl Side {
    pub fn time(self, t_b: f64, s: f64) -> f64 {
        match self {
            Side::Below => t_b - s,
            Side::Above => t_b + s,
        }
    }
}

/// Geometric sequence of distances `s ∈ [min_rel, max_rel]·max(1,|t_b|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub min_rel: f64,
    pub max_rel: f64,
    pub n: usize,
    /// Forced approach side; `None` fits every clean side and keeps the best.
    pub side: Option<Side>,
}

impl Default for Window {
    fn default() -> Self {
        Self {
            min_rel: 1e-6,
            max_rel: 1e-2,
            n: 16,
            side: None,
        }
    }
}

impl Window {
    /// Default window for Laurent fits: wider, so the regular part is resolved.
    pub fn laurent() -> Self {
        Self {
            min_rel: 1e-4,
            max_rel: 1e-1,
            n: 24,
            side: None,
        }
    }

    pub fn distances(&self, t_b: f64) -> Vec<f64> {
        let scale = t_b.abs().max(1.0);
        let (a, b) = (self.min_rel.ln(), self.max_rel.ln());
        (0..self.n)
            .map(|k| {
                let f = if self.n == 1 { 0.0 } else { k as f64 / (self.n - 1) as f64 };
                scale * (a + (b - a) * f).exp()
            })
            .collect()
    }

    pub fn max_distance(&self, t_b: f64) -> f64 {
        self.max_rel * t_b.abs().max(1.0)
    }

    fn halved(&self) -> Self {
        Self {
            max_rel: 0.5 * self.max_rel,
            min_rel: self.min_rel.min(0.25 * self.max_rel),
            ..self.clone()
        }
    }
}

/// Approach sides to try; fails when any other root is within ten window widths.
fn clean_sides(pole: &PoleExpansion, window: &Window) -> Result<Vec<Side>> {
    let reach = 10.0 * window.max_distance(pole.t_b);
    let distance = pole
        .other_roots
        .iter()
        .map(|r| (r - pole.t_b).abs())
        .fold(f64::INFINITY, f64::min);
    if distance <= reach {
        return Err(Error::Window { distance });
    }
    Ok(match window.side {
        Some(s) => vec![s],
        None => vec![Side::Below, Side::Above],
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
}

/// Ordinary least squares `y = intercept + slope·x` with the slope's standard error.
pub fn linear_regression(x: &[f64], y: &[f64]) -> Result<SlopeFit> {
    let n = x.len();
    if n < 3 || y.len() != n {
        return Err(Error::Fit(format!("need at least 3 points, got {n}")));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("degenerate abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    Ok(SlopeFit {
        slope,
        intercept,
        stderr: (ssr / (n - 2) as f64 / sxx).sqrt(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TemporalFit {
    pub t_b: f64,
    pub multiplicity: usize,
    pub side: Side,
    pub slope: f64,
    pub stderr: f64,
    /// `(s, |ω|)` samples used.
    pub samples: Vec<(f64, f64)>,
}

fn slope_on_side(pole: &PoleExpansion, window: &Window, side: Side) -> Result<TemporalFit> {
    let samples: Vec<(f64, f64)> = window
        .distances(pole.t_b)
        .into_iter()
        .map(|s| (s, pole.norm_at(side.time(pole.t_b, s))))
        .collect();
    if samples.iter().any(|(_, w)| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::ZeroVorticity);
    }
    let x: Vec<f64> = samples.iter().map(|(s, _)| s.ln()).collect();
    let y: Vec<f64> = samples.iter().map(|(_, w)| w.ln()).collect();
    let fit = linear_regression(&x, &y)?;
    Ok(TemporalFit {
        t_b: pole.t_b,
        multiplicity: pole.multiplicity,
        side,
        slope: fit.slope,
        stderr: fit.stderr,
        samples,
    })
}

/// Slope of `ln|ω|` against `ln|t − t_b|`; `t_b` snaps to the nearest real root.
pub fn fit_temporal_exponent(
    map: &InitialDataMap,
    u_b: &[f64],
    t_b: f64,
    window: &Window,
) -> Result<TemporalFit> {
    let pole = PoleExpansion::new(map, u_b, t_b)?;
    let mut best: Option<TemporalFit> = None;
    let mut last_err = None;
    for side in clean_sides(&pole, window)? {
        match slope_on_side(&pole, window, side) {
            Ok(f) => {
                if best.as_ref().is_none_or(|b| f.stderr < b.stderr) {
                    best = Some(f);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or(Error::ZeroVorticity))
}

/// Number of regular terms fitted beyond `c₁` to absorb truncation.
const NUISANCE_TERMS: usize = 2;

#[derive(Debug, Clone, Serialize)]
pub struct LaurentFit {
    pub t_b: f64,
    pub pole_order: usize,
    pub side: Side,
    /// Which curl component was fitted.
    pub component: usize,
    /// `c_{−m}, …, c₀, c₁` in powers of `s = |t − t_b|`.
    pub coefficients: Vec<f64>,
    /// Bound on the change of each coefficient under a halved window.
    pub uncertainty: Vec<f64>,
    /// RMS residual of `s^m ω` over the window.
    pub residual: f64,
}

impl LaurentFit {
    /// Coefficient of `s^k`, `k ∈ [−m, 1]`.
    pub fn coefficient(&self, k: i32) -> Option<f64> {
        let idx = k + self.pole_order as i32;
        (idx >= 0).then(|| self.coefficients.get(idx as usize).copied()).flatten()
    }
}

fn solve_laurent(g: &dyn Fn(f64) -> f64, t_b: f64, order: usize, side: Side, window: &Window) -> Result<(Vec<f64>, f64)> {
    let s = window.distances(t_b);
    let n_terms = order + 2 + NUISANCE_TERMS;
    if s.len() < n_terms {
        return Err(Error::Fit(format!("window has {} points for {n_terms} terms", s.len())));
    }
    let s_max = s.iter().fold(0.0f64, |m, v| m.max(*v));
    let y: Vec<f64> = s.iter().map(|&si| si.powi(order as i32) * g(side.time(t_b, si))).collect();
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite sample in window".into()));
    }
    // columns (s/s_max)^j keep the design matrix well scaled
    let a = DMatrix::from_fn(s.len(), n_terms, |i, j| (s[i] / s_max).powi(j as i32));
    let b = DVector::from_vec(y.clone());
    let beta = a
        .clone()
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::Fit(e.to_string()))?;
    let resid = (&a * &beta - &b).norm() / (s.len() as f64).sqrt();
    let coeffs = (0..order + 2).map(|j| beta[j] / s_max.powi(j as i32)).collect();
    Ok((coeffs, resid))
}

/// Laurent fit of an arbitrary scalar function with a pole of order `order` at `t_b`.
pub fn laurent_fit_fn(
    g: impl Fn(f64) -> f64,
    t_b: f64,
    order: usize,
    side: Side,
    window: &Window,
) -> Result<LaurentFit> {
    let (coefficients, residual) = solve_laurent(&g, t_b, order, side, window)?;
    let (half, _) = solve_laurent(&g, t_b, order, side, &window.halved())?;
    let uncertainty = coefficients
        .iter()
        .zip(&half)
        .map(|(c, h)| 2.0 * (c - h).abs() + 1e-12 * c.abs().max(1e-300))
        .collect();
    Ok(LaurentFit {
        t_b,
        pole_order: order,
        side,
        component: 0,
        coefficients,
        uncertainty,
        residual,
    })
}

/// Laurent fit of the vorticity at `(u_b, t_b)`.
///
/// The fitted component is the one with the highest pole order (largest
/// magnitude on ties). Its order must not exceed `order` when one is given;
/// without an explicit order only simple poles are accepted.
pub fn laurent_fit(
    map: &InitialDataMap,
    u_b: &[f64],
    t_b: f64,
    order: Option<usize>,
    window: &Window,
) -> Result<LaurentFit> {
    let pole = PoleExpansion::new(map, u_b, t_b)?;
    let degrees = pole.component_degrees();
    let probe = pole.components_at(pole.t_b - window.max_distance(pole.t_b));
    let component = (0..degrees.len())
        .max_by(|&a, &b| {
            degrees[a]
                .cmp(&degrees[b])
                .then(probe[a].abs().total_cmp(&probe[b].abs()))
                .then(b.cmp(&a))
        })
        .unwrap_or(0);
    let degree = degrees[component];
    let order = match order {
        Some(m) if m >= degree => m,
        None if degree <= 1 => 1,
        _ => return Err(Error::Degenerate { d1: pole.coeffs.derivative(pole.t_b, 1) }),
    };
    let sides = clean_sides(&pole, window)?;
    let side = if sides.contains(&Side::Below) { Side::Below } else { Side::Above };
    let g = |t: f64| pole.components_at(t)[component];
    let mut fit = laurent_fit_fn(g, pole.t_b, order, side, window)?;
    fit.component = component;
    Ok(fit)
}
