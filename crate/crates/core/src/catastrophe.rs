//! Gradient catastrophe: the earliest positive blowup time over the hodograph
//! domain, found by grid seeding followed by Nelder–Mead refinement.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::map::{Bounds, Chart, InitialDataMap, MapFamily};
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::surface::smallest_positive_root;

#[derive(Debug, Clone)]
pub struct CatastropheOptions {
    /// Grid samples per axis; `None` picks 200 up to 2D, 50 in 3D, 16 above.
    pub grid_per_axis: Option<usize>,
    pub n_seeds: usize,
    pub nelder_mead: NelderMeadOptions,
}

impl Default for CatastropheOptions {
    fn default() -> Self {
        Self {
            grid_per_axis: None,
            n_seeds: 5,
            nelder_mead: NelderMeadOptions::default(),
        }
    }
}

impl CatastropheOptions {
    pub fn per_axis(&self, dim: usize) -> usize {
        self.grid_per_axis.unwrap_or(match dim {
            0..=2 => 200,
            3 => 50,
            _ => 16,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CatastropheResult {
    pub t_c: f64,
    pub u_c: Vec<f64>,
    pub x_c: Vec<f64>,
    pub branch: Option<String>,
    pub n_evals: usize,
    #[serde(skip)]
    pub trace: Vec<f64>,
}

impl CatastropheResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

/// Smallest positive root at `u`, or +∞ where there is none or `u` is invalid.
pub fn blowup_time(map: &InitialDataMap, u: &[f64]) -> f64 {
    match smallest_positive_root(map, u) {
        Ok(Some(t)) => t,
        _ => f64::INFINITY,
    }
}

fn lex(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Searches `bounds` (identity chart) or, when `None`, the map's own chart.
pub fn find_catastrophe(
    map: &InitialDataMap,
    bounds: Option<&Bounds>,
    opts: &CatastropheOptions,
) -> Result<CatastropheResult> {
    let chart = match bounds {
        Some(b) => Chart {
            bounds: b.clone(),
            to_domain: std::sync::Arc::new(|p: &[f64]| p.to_vec()),
        },
        None => map.chart(),
    };
    let dim = map.dim();
    let n = opts.per_axis(dim).max(2);
    let total = n.pow(dim as u32);
    let cb = &chart.bounds;
    let objective = |p: &[f64]| blowup_time(map, &(chart.to_domain)(p));

    let grid_point = |mut flat: usize| -> Vec<f64> {
        let mut p = vec![0.0; dim];
        for k in (0..dim).rev() {
            let i = flat % n;
            flat /= n;
            p[k] = cb.lower[k] + (cb.upper[k] - cb.lower[k]) * i as f64 / (n - 1) as f64;
        }
        p
    };
    let values: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|i| objective(&grid_point(i)))
        .collect();
    // grid order is lexicographic in u, so the index breaks ties deterministically
    let mut order: Vec<usize> = (0..total).filter(|&i| values[i].is_finite()).collect();
    if order.is_empty() {
        return Err(Error::NoBlowup);
    }
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order.truncate(opts.n_seeds.max(1));

    let mut nm = opts.nelder_mead.clone();
    nm.step = nm.step.min(2.0 / (n - 1) as f64);
    let runs: Vec<_> = order
        .par_iter()
        .map(|&i| nelder_mead(objective, &grid_point(i), cb, &nm))
        .collect();
    let best = runs
        .iter()
        .filter(|m| m.value.is_finite())
        .min_by(|a, b| a.value.total_cmp(&b.value).then_with(|| lex(&a.x, &b.x)))
        .ok_or(Error::NoBlowup)?;

    let u_c = (chart.to_domain)(&best.x);
    let t_c = best.value;
    let f = map.f(&u_c)?;
    let x_c = u_c.iter().zip(&f).map(|(u, f)| u * t_c + f).collect();
    Ok(CatastropheResult {
        t_c,
        u_c,
        x_c,
        branch: map.branch_label().map(str::to_string),
        n_evals: total + runs.iter().map(|m| m.n_evals).sum::<usize>(),
        trace: best.trace.clone(),
    })
}

#[derive(Debug, Clone)]
pub struct FamilyCatastrophe {
    pub best: CatastropheResult,
    /// Per-branch outcome in family order.
    pub branches: Vec<(String, Result<CatastropheResult>)>,
}

/// Branch-by-branch search; the global result is the minimum over branches.
pub fn find_family_catastrophe(
    family: &MapFamily,
    bounds: Option<&Bounds>,
    opts: &CatastropheOptions,
) -> Result<FamilyCatastrophe> {
    let branches: Vec<(String, Result<CatastropheResult>)> = family
        .branches
        .iter()
        .map(|b| (b.label(), find_catastrophe(b, bounds, opts)))
        .collect();
    let best = branches
        .iter()
        .filter_map(|(_, r)| r.as_ref().ok())
        .min_by(|a, b| a.t_c.total_cmp(&b.t_c).then_with(|| lex(&a.u_c, &b.u_c)))
        .cloned();
    match best {
        Some(best) => Ok(FamilyCatastrophe { best, branches }),
        None => {
            // surface a non-NoBlowup error if every branch failed for another reason
            let err = branches
                .iter()
                .filter_map(|(_, r)| r.as_ref().err())
                .find(|e| **e != Error::NoBlowup)
                .cloned()
                .unwrap_or(Error::NoBlowup);
            Err(err)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins;

    #[test]
    fn linear_map_has_no_positive_blowup() {
        let map = builtins::linear(2, 1.0);
        let r = find_catastrophe(&map, None, &CatastropheOptions::default());
        assert_eq!(r.unwrap_err(), Error::NoBlowup);
    }

    #[test]
    fn contracting_linear_map() {
        // f = −u/2 collapses everything at t = 1/2
        let map = builtins::linear(2, -0.5);
        let r = find_catastrophe(&map, None, &CatastropheOptions { grid_per_axis: Some(11), ..Default::default() })
            .unwrap();
        assert!((r.t_c - 0.5).abs() < 1e-12);
        for (x, u) in r.x_c.iter().zip(&r.u_c) {
            assert!((x - 0.0 * u).abs() < 1e-12);
        }
    }

    #[test]
    fn harmonic_presets_no_blowup() {
        for name in ["quadratic", "cubic", "expcos"] {
            let map = builtins::harmonic(name).unwrap();
            let opts = CatastropheOptions { grid_per_axis: Some(40), ..Default::default() };
            assert_eq!(find_catastrophe(&map, None, &opts).unwrap_err(), Error::NoBlowup);
        }
    }
}
