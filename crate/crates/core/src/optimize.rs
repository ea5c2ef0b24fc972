//! Box-constrained Nelder–Mead. Trial points are clamped into the box;
//! non-finite objective values count as +∞.

use crate::map::Bounds;

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    /// Initial simplex edge as a fraction of each box width.
    pub step: f64,
    pub xtol: f64,
    pub ftol: f64,
    pub max_evals: usize,
    /// Fresh simplices started from the incumbent after convergence.
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            step: 0.05,
            xtol: 1e-11,
            ftol: 1e-14,
            max_evals: 4000,
            restarts: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub n_evals: usize,
    /// Best value after each iteration.
    pub trace: Vec<f64>,
}

pub fn nelder_mead(
    f: impl Fn(&[f64]) -> f64,
    x0: &[f64],
    bounds: &Bounds,
    opts: &NelderMeadOptions,
) -> Minimum {
    let n = x0.len();
    let mut evals = 0usize;
    let eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let clamp = |mut x: Vec<f64>| {
        bounds.clamp(&mut x);
        x
    };
    let widths: Vec<f64> = (0..n).map(|k| bounds.upper[k] - bounds.lower[k]).collect();

    let mut best = clamp(x0.to_vec());
    let mut best_val = eval(&best, &mut evals);
    let mut trace = vec![best_val];
    let mut step = opts.step;

    for round in 0..=opts.restarts {
        let start_val = best_val;
        // simplex: incumbent plus one step per axis, stepping inward at the upper edge
        let mut simplex: Vec<(Vec<f64>, f64)> = vec![(best.clone(), best_val)];
        for k in 0..n {
            let mut v = best.clone();
            let h = step * widths[k];
            v[k] = if v[k] + h <= bounds.upper[k] { v[k] + h } else { v[k] - h };
            let v = clamp(v);
            let fv = eval(&v, &mut evals);
            simplex.push((v, fv));
        }
        while evals < opts.max_evals {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let (lo, hi) = (simplex[0].1, simplex[n].1);
            let spread = (0..n)
                .map(|k| {
                    simplex
                        .iter()
                        .map(|(v, _)| (v[k] - simplex[0].0[k]).abs())
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max);
            let scale = simplex[0].0.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            if spread <= opts.xtol * scale
                && (hi - lo).abs() <= opts.ftol * lo.abs().max(1.0)
            {
                break;
            }
            if spread <= 1e-3 * opts.xtol * scale {
                break;
            }
            let centroid: Vec<f64> = (0..n)
                .map(|k| simplex[..n].iter().map(|(v, _)| v[k]).sum::<f64>() / n as f64)
                .collect();
            let along = |c: f64| -> Vec<f64> {
                clamp((0..n).map(|k| centroid[k] + c * (simplex[n].0[k] - centroid[k])).collect())
            };
            let xr = along(-1.0);
            let fr = eval(&xr, &mut evals);
            if fr < simplex[0].1 {
                let xe = along(-2.0);
                let fe = eval(&xe, &mut evals);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
            } else {
                let (xc, fc) = if fr < simplex[n].1 {
                    let x = along(-0.5);
                    let v = eval(&x, &mut evals);
                    (x, v)
                } else {
                    let x = along(0.5);
                    let v = eval(&x, &mut evals);
                    (x, v)
                };
                if fc < simplex[n].1.min(fr) {
                    simplex[n] = (xc, fc);
                } else {
                    let x0 = simplex[0].0.clone();
                    for s in simplex.iter_mut().skip(1) {
                        let x: Vec<f64> = (0..n).map(|k| x0[k] + 0.5 * (s.0[k] - x0[k])).collect();
                        let x = clamp(x);
                        let v = eval(&x, &mut evals);
                        *s = (x, v);
                    }
                }
            }
            let cur = simplex.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
            trace.push(cur.min(best_val));
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[0].1 < best_val {
            best = simplex[0].0.clone();
            best_val = simplex[0].1;
        }
        let stalled = (start_val - best_val).abs() <= opts.ftol * best_val.abs().max(1.0);
        if evals >= opts.max_evals || (stalled && round > 0) {
            break;
        }
        step *= 0.1;
    }
    Minimum {
        x: best,
        value: best_val,
        n_evals: evals,
        trace,
    }
}
