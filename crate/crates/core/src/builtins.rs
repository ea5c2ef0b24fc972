//! Built-in example maps and their closed-form reference quantities.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::map::{Bounds, InitialDataMap, MapFamily};

const UV: [&str; 2] = ["u1", "u2"];

/// Named harmonic potentials `W(u1, u2)` with search boxes avoiding the
/// lines where `∂²W/∂u1²` vanishes.
pub const HARMONIC_PRESETS: [(&str, &str, [f64; 4]); 3] = [
    ("quadratic", "(u2^2 - u1^2)/2", [-1.0, 1.0, -1.0, 1.0]),
    ("cubic", "u1^3 - 3*u1*u2^2", [0.2, 1.5, -1.0, 1.0]),
    ("expcos", "exp(u1)*cos(u2)", [-1.0, 1.0, -1.0, 1.0]),
];

/// Names accepted by [`from_name`].
pub const BUILTIN_NAMES: [&str; 9] = [
    "zero",
    "linear",
    "isotropic",
    "jordan",
    "rotational",
    "harmonic",
    "cubic",
    "gaussian",
    "analytic2d",
];

fn num_param(params: &serde_json::Map<String, Value>, key: &str, default: f64) -> Result<f64> {
    match params.get(key) {
        None => Ok(default),
        Some(Value::Number(n)) => Ok(n.as_f64().unwrap_or(default)),
        Some(Value::String(s)) => s
            .trim()
            .parse()
            .map_err(|_| Error::Spec(format!("parameter `{key}` must be numeric, got `{s}`"))),
        Some(v) => Err(Error::Spec(format!("parameter `{key}` must be numeric, got {v}"))),
    }
}

fn str_param<'a>(params: &'a serde_json::Map<String, Value>, key: &str) -> Option<&'a str> {
    params.get(key).and_then(|v| v.as_str())
}

fn reject_unknown(params: &serde_json::Map<String, Value>, allowed: &[&str]) -> Result<()> {
    for k in params.keys() {
        if !allowed.contains(&k.as_str()) {
            return Err(Error::Spec(format!("unknown parameter `{k}`")));
        }
    }
    Ok(())
}

/// Resolves a built-in by name. `dim` is honoured by the dimension-generic maps.
pub fn from_name(
    name: &str,
    dim: usize,
    params: &serde_json::Map<String, Value>,
) -> Result<MapFamily> {
    let fam = match name {
        "zero" => {
            reject_unknown(params, &[])?;
            MapFamily::single(zero(dim))
        }
        "linear" => {
            reject_unknown(params, &["beta"])?;
            MapFamily::single(linear(dim, num_param(params, "beta", 1.0)?))
        }
        "isotropic" => {
            reject_unknown(params, &[])?;
            MapFamily::single(linear(dim, 1.0))
        }
        "jordan" => {
            reject_unknown(params, &["c", "a", "b"])?;
            MapFamily::single(jordan(
                num_param(params, "c", 1.0)?,
                num_param(params, "a", 1.0)?,
                num_param(params, "b", 1.0)?,
            ))
        }
        "rotational" => {
            reject_unknown(params, &["alpha"])?;
            MapFamily::single(rotational(num_param(params, "alpha", 1.0)?))
        }
        "harmonic" => {
            reject_unknown(params, &["W"])?;
            MapFamily::single(harmonic(str_param(params, "W").unwrap_or("quadratic"))?)
        }
        "cubic" => {
            reject_unknown(params, &[])?;
            MapFamily::single(cubic())
        }
        "gaussian" => {
            reject_unknown(params, &["branch"])?;
            let fam = gaussian();
            match str_param(params, "branch") {
                Some(b) => MapFamily::single(
                    fam.branch(b)
                        .ok_or_else(|| Error::Spec(format!("unknown gaussian branch `{b}`")))?
                        .clone(),
                ),
                None => fam,
            }
        }
        "analytic2d" => {
            reject_unknown(params, &["F"])?;
            let f = str_param(params, "F")
                .ok_or_else(|| Error::Spec("analytic2d needs parameter F".into()))?;
            MapFamily::single(analytic2d(f)?)
        }
        other => return Err(Error::Spec(format!("unknown builtin `{other}`"))),
    };
    Ok(fam)
}

/// `f ≡ 0`.
pub fn zero(dim: usize) -> InitialDataMap {
    InitialDataMap::new(dim, "zero", move |_| vec![0.0; dim])
        .with_jacobian(move |_| DMatrix::zeros(dim, dim))
        .with_hessian(move |_| vec![DMatrix::zeros(dim, dim); dim])
}

/// `f = β u`: decoupled Burgers–Hopf flow along each axis.
pub fn linear(dim: usize, beta: f64) -> InitialDataMap {
    let mut m = InitialDataMap::new(dim, "linear", move |u| u.iter().map(|x| beta * x).collect())
        .with_jacobian(move |_| DMatrix::identity(dim, dim) * beta)
        .with_hessian(move |_| vec![DMatrix::zeros(dim, dim); dim]);
    if beta != 0.0 {
        m = m.with_initial_data(move |x| x.iter().map(|xi| xi / beta).collect());
    }
    m
}

/// Linear 3D map with Jacobian `[[c, a, 0], [0, c, b], [0, 0, c]]`:
/// triple root `t = -c` with a rank-two hodograph matrix there.
pub fn jordan(c: f64, a: f64, b: f64) -> InitialDataMap {
    let j = DMatrix::from_row_slice(3, 3, &[c, a, 0.0, 0.0, c, b, 0.0, 0.0, c]);
    let jf = j.clone();
    let inv = j.clone().try_inverse();
    let mut m = InitialDataMap::new(3, "jordan", move |u| {
        vec![c * u[0] + a * u[1], c * u[1] + b * u[2], c * u[2]]
    })
    .with_jacobian(move |_| jf.clone())
    .with_hessian(|_| vec![DMatrix::zeros(3, 3); 3]);
    if let Some(inv) = inv {
        m = m.with_initial_data(move |x| {
            let v = &inv * nalgebra::DVector::from_column_slice(x);
            v.iter().copied().collect()
        });
    }
    m
}

/// Rigid rotation `f = (u2/α, −u1/α)`.
pub fn rotational(alpha: f64) -> InitialDataMap {
    InitialDataMap::new(2, "rotational", move |u| vec![u[1] / alpha, -u[0] / alpha])
        .with_jacobian(move |_| DMatrix::from_row_slice(2, 2, &[0.0, 1.0 / alpha, -1.0 / alpha, 0.0]))
        .with_hessian(|_| vec![DMatrix::zeros(2, 2); 2])
        .with_initial_data(move |x| vec![-alpha * x[1], alpha * x[0]])
        .with_bounds(Bounds::cube(2, -2.0, 2.0))
}

/// `f1 = ∂W/∂u2`, `f2 = ∂W/∂u1` for a harmonic `W`, given as an expression or a preset name.
pub fn harmonic(w: &str) -> Result<InitialDataMap> {
    let (src, bounds) = match HARMONIC_PRESETS.iter().find(|p| p.0 == w) {
        Some((_, src, b)) => (*src, Bounds::new(vec![b[0], b[2]], vec![b[1], b[3]])),
        None => (w, Bounds::cube(2, -1.0, 1.0)),
    };
    let wexpr = Expr::parse(src, &UV)?;
    let lap = (
        wexpr.derivative(0).derivative(0),
        wexpr.derivative(1).derivative(1),
    );
    let probes = [[0.31, -0.17], [-0.52, 0.44], [0.9, 0.05], [0.25, 0.8], [1.1, -0.6]];
    for p in probes {
        let (a, b) = (lap.0.eval(&p), lap.1.eval(&p));
        if (a + b).abs() > 1e-9 * (1.0 + a.abs() + b.abs()) {
            return Err(Error::Spec(format!("W = {src} is not harmonic")));
        }
    }
    let exprs = vec![wexpr.derivative(1), wexpr.derivative(0)];
    Ok(InitialDataMap::from_exprs("harmonic", exprs).with_bounds(bounds))
}

pub const CUBIC_F: [&str; 2] = [
    "-u1^3/3 - 2/3*u1*u2^2 + 2*u2",
    "-u2^3/3 - 1/3*u1^2*u2 - u1",
];

/// Nongeneric cubic map with a quartic discriminant curve.
pub fn cubic() -> InitialDataMap {
    let exprs = CUBIC_F
        .iter()
        .map(|s| Expr::parse(s, &UV).expect("valid builtin"))
        .collect();
    InitialDataMap::from_exprs("cubic", exprs).with_bounds(Bounds::cube(2, -3.0, 3.0))
}

/// Offset from the singular wedge edges used by the Gaussian search chart.
const WEDGE_EDGE_OFFSET: f64 = 1e-10;

/// Local inverses of `u0(x) = (exp(−x1²−x2²), exp(−x1²−3x2²))`, one branch per
/// sign pair `(a, b)` of `(x1 − u1 t, x2 − u2 t)`.
pub fn gaussian() -> MapFamily {
    let branches = [(1.0, 1.0, "++"), (1.0, -1.0, "+-"), (-1.0, 1.0, "-+"), (-1.0, -1.0, "--")]
        .iter()
        .map(|&(a, b, label)| gaussian_branch(a, b, label))
        .collect();
    MapFamily {
        name: "gaussian".into(),
        branches,
    }
}

fn gaussian_branch(a: f64, b: f64, label: &str) -> InitialDataMap {
    let f1 = format!("{a}*sqrt(0.5*log(u2/u1^3))");
    let f2 = format!("{b}*sqrt(0.5*log(u1/u2))");
    let exprs = vec![
        Expr::parse(&f1, &UV).expect("valid builtin"),
        Expr::parse(&f2, &UV).expect("valid builtin"),
    ];
    let lo = WEDGE_EDGE_OFFSET;
    InitialDataMap::from_exprs("gaussian", exprs)
        .with_domain(|u| {
            let (u1, u2) = (u[0], u[1]);
            u1 > 0.0 && u1 <= 1.0 && u2 > 0.0 && u2 <= 1.0 && u1.powi(3) <= u2 && u2 <= u1
        })
        .with_bounds(Bounds::cube(2, 0.0, 1.0))
        // (s, p) ↦ (s, s^p) sweeps the wedge u1³ ≤ u2 ≤ u1
        .with_chart(
            Bounds::new(vec![1e-3, 1.0 + lo], vec![1.0 - 1e-6, 3.0 - lo]),
            |p| vec![p[0], p[0].powf(p[1])],
        )
        .with_initial_data(gaussian_u0)
        .with_branch(label, move |x, t, u| {
            let tol = 1e-9 * (1.0 + x[0].abs().max(x[1].abs()));
            a * (x[0] - u[0] * t) >= -tol && b * (x[1] - u[1] * t) >= -tol
        })
}

pub fn gaussian_u0(x: &[f64]) -> Vec<f64> {
    vec![
        (-x[0] * x[0] - x[1] * x[1]).exp(),
        (-x[0] * x[0] - 3.0 * x[1] * x[1]).exp(),
    ]
}

/// Label of the Gaussian branch owning the characteristic foot `ξ = x − u t`.
pub fn gaussian_branch_for(xi: &[f64]) -> &'static str {
    match (xi[0] >= 0.0, xi[1] >= 0.0) {
        (true, true) => "++",
        (true, false) => "+-",
        (false, true) => "-+",
        (false, false) => "--",
    }
}

/// Complex-analytic hodograph map `Z − V t = F(V)` with `V = u1 + i u2`.
pub fn analytic2d(f_src: &str) -> Result<InitialDataMap> {
    let f = Expr::parse(f_src, &["V"])?;
    let df = f.derivative(0);
    let d2f = df.derivative(0);
    let cv = |u: &[f64]| [Complex64::new(u[0], u[1])];
    let fv = f.clone();
    Ok(InitialDataMap::new(2, "analytic2d", move |u| {
        let z = fv.eval(&cv(u));
        vec![z.re, z.im]
    })
    .with_jacobian(move |u| {
        let d = df.eval(&cv(u));
        DMatrix::from_row_slice(2, 2, &[d.re, -d.im, d.im, d.re])
    })
    .with_hessian(move |u| {
        let s = d2f.eval(&cv(u));
        let (r, i) = (s.re, s.im);
        vec![
            DMatrix::from_row_slice(2, 2, &[r, -i, -i, -r]),
            DMatrix::from_row_slice(2, 2, &[i, r, r, -i]),
        ]
    }))
}

/// Closed forms and reference values for the built-in examples.
pub mod reference {
    /// Vorticity of the rotational vortex.
    pub fn rotational_vorticity(alpha: f64, t: f64) -> f64 {
        2.0 * alpha / (alpha * alpha * t * t + 1.0)
    }

    /// Velocity field of the rotational vortex.
    pub fn rotational_field(alpha: f64, x: &[f64], t: f64) -> [f64; 2] {
        let d = alpha * alpha * t * t + 1.0;
        [
            alpha * (alpha * x[0] * t - x[1]) / d,
            alpha * (alpha * x[1] * t + x[0]) / d,
        ]
    }

    /// Discriminant of the cubic map's characteristic quadratic.
    pub fn cubic_discriminant(u: &[f64]) -> f64 {
        let (a, b) = (u[0] * u[0], u[1] * u[1]);
        4.0 * a * a + 28.0 * a * b + b * b - 72.0
    }

    /// Branches `t± = (4u1² + 5u2² ± √Δ)/6`, when real.
    pub fn cubic_branches(u: &[f64]) -> Option<(f64, f64)> {
        let d = cubic_discriminant(u);
        if d < 0.0 {
            return None;
        }
        let c = 4.0 * u[0] * u[0] + 5.0 * u[1] * u[1];
        Some(((c - d.sqrt()) / 6.0, (c + d.sqrt()) / 6.0))
    }

    /// Numerator of the cubic map's vorticity, `3 − (2/3) u1 u2`.
    pub fn cubic_vorticity_numerator(u: &[f64]) -> f64 {
        3.0 - 2.0 / 3.0 * u[0] * u[1]
    }

    pub const CUBIC_T_C: f64 = 1.62019;
    pub const CUBIC_U_C: [f64; 2] = [1.59562, 1.17844];

    pub const GAUSSIAN_T_C: f64 = 0.642593;
    pub const GAUSSIAN_MIN_PP: f64 = 0.642593;
    pub const GAUSSIAN_MIN_PM: f64 = 1.16582;
    pub const GAUSSIAN_MIN_MP: f64 = 0.673088;
    pub const GAUSSIAN_U_C: [f64; 2] = [0.803494, 0.584021];
    pub const GAUSSIAN_X_C: [f64; 2] = [0.759774, 0.77468];
    /// Laurent coefficients `c₋₁, c₀, c₁` of ω(t, u_c) in powers of `t_c − t`.
    pub const GAUSSIAN_LAURENT: [f64; 3] = [0.270466, -0.0747002, 0.0206315];
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_jacobian_matches_printed_matrix() {
        let m = cubic();
        let u = [0.7, -1.3];
        let j = m.jacobian(&u).unwrap();
        let (u1, u2) = (u[0], u[1]);
        let expect = [
            -(u1 * u1 + 2.0 / 3.0 * u2 * u2),
            2.0 - 4.0 / 3.0 * u1 * u2,
            -2.0 / 3.0 * u1 * u2 - 1.0,
            -(u1 * u1 / 3.0 + u2 * u2),
        ];
        for (k, e) in expect.iter().enumerate() {
            assert!((j[(k / 2, k % 2)] - e).abs() < 1e-14);
        }
    }

    #[test]
    fn gaussian_inverts_initial_data() {
        let fam = gaussian();
        for (x, label) in [([0.3, 0.2], "++"), ([0.5, -0.4], "+-"), ([-0.7, 0.1], "-+"), ([-0.2, -0.6], "--")] {
            let u = gaussian_u0(&x);
            let m = fam.branch(label).unwrap();
            let back = m.f(&u).unwrap();
            assert!((back[0] - x[0]).abs() < 1e-12 && (back[1] - x[1]).abs() < 1e-12);
            assert_eq!(gaussian_branch_for(&x), label);
        }
    }

    #[test]
    fn gaussian_jacobian_matches_printed_entries() {
        let fam = gaussian();
        let u = [0.7_f64, 0.5];
        let s = 2.0 * 2f64.sqrt();
        let l1 = (u[1] / u[0].powi(3)).ln();
        let l2 = (u[0] / u[1]).ln();
        for (a, b, label) in [(1.0, 1.0, "++"), (1.0, -1.0, "+-"), (-1.0, 1.0, "-+")] {
            let j = fam.branch(label).unwrap().jacobian(&u).unwrap();
            assert!((j[(0, 0)] + a * 3.0 / (s * u[0] * l1.sqrt())).abs() < 1e-12);
            assert!((j[(0, 1)] - a / (s * u[1] * l1.sqrt())).abs() < 1e-12);
            assert!((j[(1, 0)] - b / (s * u[0] * l2.sqrt())).abs() < 1e-12);
            assert!((j[(1, 1)] + b / (s * u[1] * l2.sqrt())).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_domain_is_the_wedge() {
        let m = gaussian().branches[0].clone();
        assert!(m.contains(&[0.5, 0.3]));
        assert!(!m.contains(&[0.5, 0.6]));
        assert!(!m.contains(&[0.5, 0.1]));
        assert!(!m.contains(&[1.2, 1.0]));
    }

    #[test]
    fn analytic2d_matches_rotational() {
        let alpha = 2.0;
        let a = analytic2d("-i*V/2").unwrap();
        let r = rotational(alpha);
        let u = [0.3, -0.8];
        let (fa, fr) = (a.f(&u).unwrap(), r.f(&u).unwrap());
        assert!((fa[0] - fr[0]).abs() < 1e-15 && (fa[1] - fr[1]).abs() < 1e-15);
        assert!((a.jacobian(&u).unwrap() - r.jacobian(&u).unwrap()).abs().max() < 1e-15);
    }

    #[test]
    fn analytic2d_hessian_matches_fd() {
        let m = analytic2d("V^3 + exp(V)").unwrap();
        let u = [0.4, 0.3];
        let h = m.hessian(&u).unwrap();
        let step = 1e-6;
        for k in 0..2 {
            let mut up = u;
            let mut um = u;
            up[k] += step;
            um[k] -= step;
            let d = (m.jacobian(&up).unwrap() - m.jacobian(&um).unwrap()) / (2.0 * step);
            for i in 0..2 {
                for j in 0..2 {
                    assert!((h[i][(j, k)] - d[(i, j)]).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn harmonic_rejects_non_harmonic() {
        assert!(harmonic("u1^2 + u2^2").is_err());
        assert!(harmonic("cubic").is_ok());
        assert!(harmonic("u1*u2 + u1").is_ok());
    }

    #[test]
    fn unknown_names_and_params() {
        let empty = serde_json::Map::new();
        assert!(from_name("nope", 2, &empty).is_err());
        let mut p = serde_json::Map::new();
        p.insert("gamma".into(), 1.0.into());
        assert!(from_name("rotational", 2, &p).is_err());
        assert_eq!(from_name("gaussian", 2, &empty).unwrap().branches.len(), 4);
    }
}
