//! Initial-data inverse maps `f(u)` and the data attached to them.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::expr::Expr;

pub type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
/// `h[i][(j, k)] = ∂²f_i / ∂u_j ∂u_k`
pub type HessianFn = Arc<dyn Fn(&[f64]) -> Vec<DMatrix<f64>> + Send + Sync>;
pub type PointPredicate = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;
/// Branch ownership test on `(x, t, u)`.
pub type BranchPredicate = Arc<dyn Fn(&[f64], f64, &[f64]) -> bool + Send + Sync>;

/// Axis-aligned box.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len());
        Self { lower, upper }
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    pub fn clamp(&self, p: &mut [f64]) {
        for ((x, lo), hi) in p.iter_mut().zip(&self.lower).zip(&self.upper) {
            *x = x.clamp(*lo, *hi);
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .all(|((x, lo), hi)| *x >= *lo && *x <= *hi)
    }
}

/// Smooth parameterization of (part of) the domain by a box, used by
/// searches whose optimum may sit on the domain boundary.
#[derive(Clone)]
pub struct Chart {
    pub bounds: Bounds,
    pub to_domain: VectorFn,
}

impl fmt::Debug for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Chart").field("bounds", &self.bounds).finish()
    }
}

/// A hodograph map `u ↦ f(u)` with derivative providers and a validity domain.
#[derive(Clone)]
pub struct InitialDataMap {
    dim: usize,
    name: String,
    branch: Option<String>,
    f: VectorFn,
    jacobian: Option<MatrixFn>,
    hessian: Option<HessianFn>,
    valid: Option<PointPredicate>,
    bounds: Bounds,
    chart: Option<Chart>,
    initial_data: Option<VectorFn>,
    branch_predicate: Option<BranchPredicate>,
}

impl fmt::Debug for InitialDataMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InitialDataMap")
            .field("dim", &self.dim)
            .field("name", &self.name)
            .field("branch", &self.branch)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .field("analytic_hessian", &self.hessian.is_some())
            .field("bounds", &self.bounds)
            .finish()
    }
}

impl InitialDataMap {
    /// A map given only by `f`; derivatives fall back to finite differences.
    pub fn new(
        dim: usize,
        name: impl Into<String>,
        f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            name: name.into(),
            branch: None,
            f: Arc::new(f),
            jacobian: None,
            hessian: None,
            valid: None,
            bounds: Bounds::cube(dim, -1.0, 1.0),
            chart: None,
            initial_data: None,
            branch_predicate: None,
        }
    }

    /// Builds `f`, Jacobian and Hessian from expressions in `u1..un`.
    pub fn from_exprs(name: impl Into<String>, exprs: Vec<Expr>) -> Self {
        let dim = exprs.len();
        let jac: Vec<Vec<Expr>> = exprs
            .iter()
            .map(|e| (0..dim).map(|j| e.derivative(j)).collect())
            .collect();
        let hess: Vec<Vec<Vec<Expr>>> = jac
            .iter()
            .map(|row| {
                row.iter()
                    .map(|e| (0..dim).map(|k| e.derivative(k)).collect())
                    .collect()
            })
            .collect();
        let exprs = Arc::new(exprs);
        let jac = Arc::new(jac);
        let hess = Arc::new(hess);
        let fe = Arc::clone(&exprs);
        let mut map = Self::new(dim, name, move |u: &[f64]| {
            fe.iter().map(|e| e.eval(u)).collect()
        });
        map.jacobian = Some(Arc::new(move |u: &[f64]| {
            DMatrix::from_fn(dim, dim, |i, j| jac[i][j].eval(u))
        }));
        map.hessian = Some(Arc::new(move |u: &[f64]| {
            (0..dim)
                .map(|i| DMatrix::from_fn(dim, dim, |j, k| hess[i][j][k].eval(u)))
                .collect()
        }));
        map
    }

    pub fn with_jacobian(
        mut self,
        j: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.jacobian = Some(Arc::new(j));
        self
    }

    pub fn with_hessian(
        mut self,
        h: impl Fn(&[f64]) -> Vec<DMatrix<f64>> + Send + Sync + 'static,
    ) -> Self {
        self.hessian = Some(Arc::new(h));
        self
    }

    pub fn with_domain(mut self, valid: impl Fn(&[f64]) -> bool + Send + Sync + 'static) -> Self {
        self.valid = Some(Arc::new(valid));
        self
    }

    pub fn with_bounds(mut self, bounds: Bounds) -> Self {
        assert_eq!(bounds.dim(), self.dim);
        self.bounds = bounds;
        self
    }

    pub fn with_chart(
        mut self,
        bounds: Bounds,
        to_domain: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.chart = Some(Chart {
            bounds,
            to_domain: Arc::new(to_domain),
        });
        self
    }

    pub fn with_initial_data(
        mut self,
        u0: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.initial_data = Some(Arc::new(u0));
        self
    }

    pub fn with_branch(
        mut self,
        label: impl Into<String>,
        predicate: impl Fn(&[f64], f64, &[f64]) -> bool + Send + Sync + 'static,
    ) -> Self {
        self.branch = Some(label.into());
        self.branch_predicate = Some(Arc::new(predicate));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn branch_label(&self) -> Option<&str> {
        self.branch.as_deref()
    }

    /// `name` or `name(branch)` for piecewise maps.
    pub fn label(&self) -> String {
        match &self.branch {
            Some(b) => format!("{}({b})", self.name),
            None => self.name.clone(),
        }
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    pub fn has_initial_data(&self) -> bool {
        self.initial_data.is_some()
    }

    /// Search chart; the bounding box with the identity map when none was set.
    pub fn chart(&self) -> Chart {
        self.chart.clone().unwrap_or_else(|| Chart {
            bounds: self.bounds.clone(),
            to_domain: Arc::new(|p: &[f64]| p.to_vec()),
        })
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        if u.len() != self.dim || u.iter().any(|x| !x.is_finite()) {
            return false;
        }
        match &self.valid {
            Some(p) => p(u),
            None => (self.f)(u).iter().all(|x| x.is_finite()),
        }
    }

    fn check(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                found: u.len(),
            });
        }
        if !self.contains(u) {
            return Err(Error::Domain(u.to_vec()));
        }
        Ok(())
    }

    pub fn f(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check(u)?;
        let v = (self.f)(u);
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain(u.to_vec()));
        }
        Ok(v)
    }

    /// `J_ij = ∂f_i/∂u_j`: analytic when provided, otherwise central differences.
    pub fn jacobian(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        self.check(u)?;
        match &self.jacobian {
            Some(j) => {
                let m = j(u);
                if m.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Derivative(u.to_vec()));
                }
                Ok(m)
            }
            None => self.jacobian_fd(u),
        }
    }

    /// Central-difference Jacobian with step `ε^{1/3}·max(1, |u_j|)`.
    pub fn jacobian_fd(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        self.check(u)?;
        let n = self.dim;
        let mut out = DMatrix::zeros(n, n);
        for j in 0..n {
            let h = f64::EPSILON.cbrt() * u[j].abs().max(1.0);
            let (fp, fm) = self.stencil_pair(u, j, h)?;
            for i in 0..n {
                out[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        Ok(out)
    }

    fn stencil_pair(&self, u: &[f64], j: usize, h: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut up = u.to_vec();
        let mut um = u.to_vec();
        up[j] += h;
        um[j] -= h;
        if !self.contains(&up) || !self.contains(&um) {
            return Err(Error::Derivative(u.to_vec()));
        }
        Ok(((self.f)(&up), (self.f)(&um)))
    }

    /// Second derivatives; analytic when provided, otherwise differences of
    /// the Jacobian with step `ε^{1/4}·max(1, |u_k|)`.
    pub fn hessian(&self, u: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        self.check(u)?;
        if let Some(h) = &self.hessian {
            let v = h(u);
            if v.iter().any(|m| m.iter().any(|x| !x.is_finite())) {
                return Err(Error::Derivative(u.to_vec()));
            }
            return Ok(v);
        }
        let n = self.dim;
        let mut out = vec![DMatrix::zeros(n, n); n];
        for k in 0..n {
            let h = f64::EPSILON.powf(0.25) * u[k].abs().max(1.0);
            let mut up = u.to_vec();
            let mut um = u.to_vec();
            up[k] += h;
            um[k] -= h;
            if !self.contains(&up) || !self.contains(&um) {
                return Err(Error::Derivative(u.to_vec()));
            }
            let jp = self.jacobian(&up).map_err(|_| Error::Derivative(u.to_vec()))?;
            let jm = self.jacobian(&um).map_err(|_| Error::Derivative(u.to_vec()))?;
            for i in 0..n {
                for j in 0..n {
                    out[i][(j, k)] = (jp[(i, j)] - jm[(i, j)]) / (2.0 * h);
                }
            }
        }
        for hi in out.iter_mut() {
            let sym = (hi.clone() + hi.transpose()) * 0.5;
            *hi = sym;
        }
        Ok(out)
    }

    /// Initial velocity field `u₀(x)`, when known in closed form.
    pub fn initial_data(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.initial_data {
            Some(u0) => Ok(u0(x)),
            None => Err(Error::NotAvailable("initial data u0")),
        }
    }

    /// Branch sign conditions at a converged point; always true for single-branch maps.
    pub fn branch_accepts(&self, x: &[f64], t: f64, u: &[f64]) -> bool {
        match &self.branch_predicate {
            Some(p) => p(x, t, u),
            None => true,
        }
    }

    /// `x = u t + f(u)`.
    pub fn forward(&self, u: &[f64], t: f64) -> Result<Vec<f64>> {
        let f = self.f(u)?;
        Ok(u.iter().zip(f).map(|(ui, fi)| ui * t + fi).collect())
    }
}

/// One or more branches of a (possibly piecewise) map.
#[derive(Debug, Clone)]
pub struct MapFamily {
    pub name: String,
    pub branches: Vec<InitialDataMap>,
}

impl MapFamily {
    pub fn single(map: InitialDataMap) -> Self {
        Self {
            name: map.name().to_string(),
            branches: vec![map],
        }
    }

    pub fn dim(&self) -> usize {
        self.branches[0].dim()
    }

    pub fn primary(&self) -> &InitialDataMap {
        &self.branches[0]
    }

    pub fn branch(&self, label: &str) -> Option<&InitialDataMap> {
        self.branches
            .iter()
            .find(|b| b.branch_label() == Some(label))
    }
}

/// JSON form of a map definition: `{"dim": n, "builtin": name, "params": {...}}`
/// or `{"dim": n, "expr": ["...", ...]}`.
#[derive(Debug, Clone, serde::Deserialize, serde::Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub params: serde_json::Map<String, serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expr: Option<Vec<String>>,
    /// Optional search box `[[lo, hi], ...]`.
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<[f64; 2]>>,
}

impl MapSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Spec(e.to_string()))
    }

    pub fn build(&self) -> Result<MapFamily> {
        let mut family = match (&self.builtin, &self.expr) {
            (Some(name), None) => crate::builtins::from_name(name, self.dim, &self.params)?,
            (None, Some(exprs)) => {
                if exprs.len() != self.dim {
                    return Err(Error::Spec(format!(
                        "expected {} expressions, found {}",
                        self.dim,
                        exprs.len()
                    )));
                }
                let names: Vec<String> = (1..=self.dim).map(|i| format!("u{i}")).collect();
                let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
                let parsed = exprs
                    .iter()
                    .map(|e| Expr::parse(e, &refs))
                    .collect::<Result<Vec<_>>>()?;
                MapFamily::single(InitialDataMap::from_exprs("expr", parsed))
            }
            _ => {
                return Err(Error::Spec(
                    "exactly one of `builtin` or `expr` must be given".into(),
                ))
            }
        };
        if family.dim() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                found: family.dim(),
            });
        }
        if let Some(b) = &self.bounds {
            if b.len() != self.dim {
                return Err(Error::Spec("box must have one [lo, hi] pair per dimension".into()));
            }
            let bounds = Bounds::new(b.iter().map(|p| p[0]).collect(), b.iter().map(|p| p[1]).collect());
            family.branches = family
                .branches
                .into_iter()
                .map(|m| m.with_bounds(bounds.clone()))
                .collect();
        }
        Ok(family)
    }
}
