//! The six analysis subcommands. Each writes its files under the output
//! directory and, under `--check`, evaluates the reference assertions that
//! apply to the chosen map.

use std::path::{Path, PathBuf};

use hodograph::builtins::reference;
use hodograph::catastrophe::{find_family_catastrophe, CatastropheOptions};
use hodograph::field::{solve_grid, Axis, FieldGrid};
use hodograph::fit::{fit_temporal_exponent, laurent_fit, LaurentFit};
use hodograph::frame::{
    fit_spatial_exponent, fold_strength, frame_at, scan_level_candidates, RayKind, RootSelect, SpatialFit, TOL_NULL,
};
use hodograph::surface::{branch_times, classify_domain, double_root_locus, DomainLabel, Locus};
use hodograph::vorticity::vorticity;
use hodograph::{build_matrix, Bounds, InitialDataMap, MapFamily};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{Format, Ray, Regime, ResolvedMap, RunConfig};
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Surface,
    Catastrophe,
    Vorticity,
    Exponent,
    Field,
    Frame,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Surface => "surface",
            Command::Catastrophe => "catastrophe",
            Command::Vorticity => "vorticity",
            Command::Exponent => "exponent",
            Command::Field => "field",
            Command::Frame => "frame",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    fn within(name: impl Into<String>, got: f64, want: f64, tol: f64) -> Self {
        let err = (got - want).abs();
        Self::new(name, err <= tol, format!("{got:.7} vs {want} (|err| {err:.2e}, tol {tol:.0e})"))
    }
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub checks: Vec<Check>,
    /// Printed on stdout after the run.
    pub summary: Option<Value>,
}

impl Report {
    fn failures(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{}: {}", c.name, c.detail))
            .collect()
    }
}

/// Runs one subcommand. Checks are evaluated only with `check` set; any
/// failure turns the result into [`CliError::Check`] after the files are written.
pub fn run(cmd: Command, cfg: &RunConfig) -> Result<Report, CliError> {
    if let Some(c) = &cfg.command {
        if c != cmd.name() {
            return Err(CliError::Config(format!("config is for `{c}`, not `{}`", cmd.name())));
        }
    }
    let map = cfg.resolve_map()?;
    cfg.validate_points(map.family.dim())?;
    let (report, pending) = match cmd {
        Command::Surface => surface(cfg, &map)?,
        Command::Catastrophe => (catastrophe(cfg, &map)?, None),
        Command::Vorticity => (vorticity_cmd(cfg, &map)?, None),
        Command::Exponent => (exponent(cfg, &map)?, None),
        Command::Field => (field(cfg, &map)?, None),
        Command::Frame => (frame(cfg, &map)?, None),
    };
    if cfg.check {
        let failures = report.failures();
        if !failures.is_empty() {
            return Err(CliError::Check(failures));
        }
    }
    match pending {
        Some(e) => Err(e),
        None => Ok(report),
    }
}

fn write(dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}

fn num(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:.17e}")
    }
}

fn coord_names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|k| format!("{prefix}{k}")).collect()
}

fn vorticity_names(n: usize) -> Vec<String> {
    match n {
        2 => vec!["omega".into()],
        3 => coord_names("omega", 3),
        _ => coord_names("w", n * (n - 1) / 2),
    }
}

/// Tensor grid over `bounds`, last axis fastest.
fn grid_points(bounds: &Bounds, counts: &[usize]) -> Vec<Vec<f64>> {
    let total: usize = counts.iter().product();
    (0..total)
        .map(|mut flat| {
            let mut p = vec![0.0; counts.len()];
            for k in (0..counts.len()).rev() {
                let i = flat % counts[k];
                flat /= counts[k];
                p[k] = bounds.lower[k] + (bounds.upper[k] - bounds.lower[k]) * i as f64 / (counts[k] - 1) as f64;
            }
            p
        })
        .collect()
}

fn default_per_axis(dim: usize, two: usize, three: usize) -> usize {
    match dim {
        0..=2 => two,
        3 => three,
        _ => 8,
    }
}

fn owning_branch(family: &MapFamily, u: &[f64]) -> Result<usize, CliError> {
    family
        .branches
        .iter()
        .position(|m| m.contains(u))
        .ok_or_else(|| CliError::Config(format!("point {u:?} is outside the map domain")))
}

/// Smallest positive root, else the root nearest zero.
fn pick_root(map: &InitialDataMap, u: &[f64]) -> Option<(f64, usize)> {
    let set = branch_times(map, u).ok()?;
    set.smallest_positive()
        .or_else(|| set.roots.iter().min_by(|a, b| a.t.abs().total_cmp(&b.t.abs())))
        .map(|r| (r.t, r.multiplicity))
}

/// Random points whose smallest root is simple and well separated from the
/// next one, so a fit window fits between them. In 2D these are D⁺ points.
/// With `generic`, also requires fold strength ≥ 0.1.
pub fn sample_blowup_points(
    map: &InitialDataMap,
    bounds: &Bounds,
    n: usize,
    seed: u64,
    generic: bool,
) -> Vec<(Vec<f64>, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for _ in 0..200_000 {
        if out.len() >= n {
            break;
        }
        let u: Vec<f64> = (0..map.dim()).map(|k| rng.gen_range(bounds.lower[k]..bounds.upper[k])).collect();
        if !map.contains(&u) {
            continue;
        }
        let Ok(set) = branch_times(map, &u) else { continue };
        let Some(first) = set.roots.first() else { continue };
        let scale = first.t.abs().max(1.0);
        if first.multiplicity != 1 || set.roots.get(1).is_some_and(|r| r.t - first.t <= 0.2 * scale) {
            continue;
        }
        if generic {
            let strong = frame_at(map, &u, first.t, TOL_NULL)
                .and_then(|f| fold_strength(map, &f))
                .is_ok_and(|s| s >= 0.1);
            if !strong {
                continue;
            }
        }
        out.push((u, first.t));
    }
    out
}

// ---------------------------------------------------------------- surface

struct SurfaceRow {
    branch: usize,
    u: Vec<f64>,
    label: Option<DomainLabel>,
    roots: Vec<(f64, usize)>,
}

fn label_name(l: Option<DomainLabel>) -> &'static str {
    match l {
        Some(DomainLabel::Dplus) => "D+",
        Some(DomainLabel::Dminus) => "D-",
        Some(DomainLabel::Dzero) => "D0",
        None => "",
    }
}

fn surface(cfg: &RunConfig, m: &ResolvedMap) -> Result<(Report, Option<CliError>), CliError> {
    let fam = &m.family;
    let dim = fam.dim();
    let bounds = cfg.bounds_or(fam.primary().bounds())?;
    let counts = cfg.grid_counts(dim, default_per_axis(dim, 200, 40))?;
    let points = grid_points(&bounds, &counts);
    let tol = cfg.tol_disc();

    let mut rows = Vec::new();
    for (b, map) in fam.branches.iter().enumerate() {
        let part: Vec<Option<SurfaceRow>> = points
            .par_iter()
            .map(|u| {
                if !map.contains(u) {
                    return None;
                }
                let set = branch_times(map, u).ok()?;
                Some(SurfaceRow {
                    branch: b,
                    u: u.clone(),
                    label: if dim == 2 { classify_domain(map, u, tol).ok() } else { None },
                    roots: set.roots.iter().map(|r| (r.t, r.multiplicity)).collect(),
                })
            })
            .collect();
        rows.extend(part.into_iter().flatten());
    }

    let mut head = vec!["branch".to_string()];
    head.extend(coord_names("u", dim));
    head.extend(["label".into(), "n_real".into()]);
    for k in 1..=dim {
        head.push(format!("t{k}"));
        head.push(format!("m{k}"));
    }
    let mut csv = head.join(",") + "\n";
    for r in &rows {
        let mut cells = vec![fam.branches[r.branch].label()];
        cells.extend(r.u.iter().map(|v| num(*v)));
        cells.push(label_name(r.label).into());
        cells.push(r.roots.iter().map(|r| r.1).sum::<usize>().to_string());
        for k in 0..dim {
            match r.roots.get(k) {
                Some((t, mult)) => {
                    cells.push(num(*t));
                    cells.push(mult.to_string());
                }
                None => cells.extend([String::new(), String::new()]),
            }
        }
        csv.push_str(&cells.join(","));
        csv.push('\n');
    }
    let dir = cfg.out_dir();
    let mut report = Report::default();
    report.files.push(write(&dir, "surface.csv", csv.as_bytes())?);

    let mut loci: Vec<(usize, Locus)> = Vec::new();
    let mut pending = None;
    if (2..=3).contains(&dim) {
        for (b, map) in fam.branches.iter().enumerate() {
            match double_root_locus(map, &bounds, counts[0]) {
                Ok(l) => loci.push((b, l)),
                Err(hodograph::Error::EmptyLocus) => {}
                Err(e) => return Err(e.into()),
            }
        }
        let mut head = vec!["branch".to_string()];
        head.extend(coord_names("u", dim));
        head.extend(["t_b".into(), "degeneracy".into()]);
        let mut lcsv = head.join(",") + "\n";
        let mut scsv = String::from("branch,i,j\n");
        let mut offset = 0;
        for (b, l) in &loci {
            let label = fam.branches[*b].label();
            for p in &l.points {
                let mut cells = vec![label.clone()];
                cells.extend(p.u.iter().map(|v| num(*v)));
                cells.push(num(p.t_b));
                cells.push(num(p.degeneracy));
                lcsv.push_str(&cells.join(","));
                lcsv.push('\n');
            }
            for [i, j] in &l.segments {
                scsv.push_str(&format!("{label},{},{}\n", i + offset, j + offset));
            }
            offset += l.points.len();
        }
        report.files.push(write(&dir, "locus.csv", lcsv.as_bytes())?);
        if dim == 2 {
            report.files.push(write(&dir, "locus_segments.csv", scsv.as_bytes())?);
        }
        if loci.is_empty() {
            pending = Some(CliError::Empty("the double-root locus is empty in the sampled box".into()));
        }
    }
    let n_real = rows.iter().filter(|r| !r.roots.is_empty()).count();
    report.summary = Some(json!({
        "rows": rows.len(),
        "rows_with_real_roots": n_real,
        "locus_points": loci.iter().map(|(_, l)| l.points.len()).sum::<usize>(),
    }));

    if cfg.check {
        if m.is("linear") || m.is("isotropic") {
            let beta = if m.is("linear") { m.num_param("beta", 1.0) } else { 1.0 };
            let bad = rows
                .iter()
                .filter(|r| r.roots.len() != 1 || (r.roots[0].0 + beta).abs() > 1e-12 || r.roots[0].1 != dim)
                .count();
            report.checks.push(Check::new("every row has t = -beta", bad == 0, format!("{bad} rows differ")));
        }
        if m.is("harmonic") {
            report
                .checks
                .push(Check::new("no real roots", n_real == 0, format!("{n_real} rows with real roots")));
        }
        if m.is("cubic") {
            let worst = loci
                .iter()
                .flat_map(|(_, l)| &l.points)
                .map(|p| reference::cubic_discriminant(&p.u).abs())
                .fold(0.0, f64::max);
            report
                .checks
                .push(Check::new("locus on quartic", worst <= 1e-5, format!("max |quartic| {worst:.2e}")));
        }
        if dim == 2 {
            let mut worst = 0.0f64;
            for (b, l) in &loci {
                for p in &l.points {
                    let tr = fam.branches[*b].jacobian(&p.u)?.trace();
                    worst = worst.max((2.0 * p.t_b + tr).abs() / tr.abs().max(1.0));
                }
            }
            report
                .checks
                .push(Check::new("merged root is -tr J/2", worst <= 1e-6, format!("max defect {worst:.2e}")));
        }
    }
    Ok((report, pending))
}

// ------------------------------------------------------------ catastrophe

fn catastrophe(cfg: &RunConfig, m: &ResolvedMap) -> Result<Report, CliError> {
    let opts = CatastropheOptions {
        grid_per_axis: cfg.search_grid,
        ..CatastropheOptions::default()
    };
    let bounds = match &cfg.bounds {
        Some(_) => Some(cfg.bounds_or(m.family.primary().bounds())?),
        None => None,
    };
    let res = find_family_catastrophe(&m.family, bounds.as_ref(), &opts)?;
    let best = &res.best;
    let branches: Vec<Value> = res
        .branches
        .iter()
        .map(|(label, r)| match r {
            Ok(c) => json!({"branch": label, "t_c": c.t_c, "u_c": c.u_c, "x_c": c.x_c}),
            Err(e) => json!({"branch": label, "error": e.to_string()}),
        })
        .collect();
    let out = json!({
        "map": m.family.name,
        "t_c": best.t_c,
        "u_c": best.u_c,
        "x_c": best.x_c,
        "branch": best.branch,
        "n_evals": best.n_evals,
        "branches": branches,
    });
    let mut report = Report::default();
    let text = serde_json::to_string_pretty(&out).expect("plain data serializes");
    report.files.push(write(&cfg.out_dir(), "catastrophe.json", text.as_bytes())?);
    report.summary = Some(out);

    if cfg.check {
        if m.is("cubic") {
            report.checks.push(Check::within("cubic t_c", best.t_c, reference::CUBIC_T_C, 1e-3));
            for k in 0..2 {
                report.checks.push(Check::within(
                    format!("cubic |u_c[{k}]|"),
                    best.u_c[k].abs(),
                    reference::CUBIC_U_C[k],
                    1e-3,
                ));
            }
        }
        if m.is("gaussian") && m.family.branches.len() == 4 {
            let minima = [
                ("++", reference::GAUSSIAN_MIN_PP),
                ("+-", reference::GAUSSIAN_MIN_PM),
                ("-+", reference::GAUSSIAN_MIN_MP),
            ];
            for (label, want) in minima {
                let got = res
                    .branches
                    .iter()
                    .find(|(l, _)| l.ends_with(&format!("({label})")))
                    .and_then(|(_, r)| r.as_ref().ok())
                    .map_or(f64::NAN, |c| c.t_c);
                report.checks.push(Check::within(format!("gaussian {label} minimum"), got, want, 1e-3));
            }
            for k in 0..2 {
                report.checks.push(Check::within(format!("gaussian u_c[{k}]"), best.u_c[k], reference::GAUSSIAN_U_C[k], 1e-3));
                report.checks.push(Check::within(format!("gaussian x_c[{k}]"), best.x_c[k], reference::GAUSSIAN_X_C[k], 1e-3));
            }
        }
    }
    Ok(report)
}

// -------------------------------------------------------------- vorticity

fn default_point(map: &InitialDataMap) -> Vec<f64> {
    let chart = map.chart();
    (chart.to_domain)(&chart.bounds.center())
}

fn vorticity_cmd(cfg: &RunConfig, m: &ResolvedMap) -> Result<Report, CliError> {
    let fam = &m.family;
    let dim = fam.dim();
    let dir = cfg.out_dir();
    let mut report = Report::default();
    let names = vorticity_names(dim);

    let points = if cfg.points.is_empty() { vec![default_point(fam.primary())] } else { cfg.points.clone() };
    let [t0, t1] = cfg.t_range.unwrap_or([0.0, 10.0]);
    let steps = cfg.t_steps.unwrap_or(201).max(2);
    let times: Vec<f64> = (0..steps).map(|k| t0 + (t1 - t0) * k as f64 / (steps - 1) as f64).collect();
    let mut head = vec!["point".to_string(), "branch".into()];
    head.extend(coord_names("u", dim));
    head.push("t".into());
    head.extend(names.iter().cloned());
    head.push("norm".into());
    let mut csv = head.join(",") + "\n";
    // (point, t, components) for the checks
    let mut series: Vec<(usize, f64, Vec<f64>)> = Vec::new();
    for (i, u) in points.iter().enumerate() {
        let b = owning_branch(fam, u)?;
        let map = &fam.branches[b];
        for &t in &times {
            let (comps, norm) = match vorticity(map, t, u) {
                Ok(r) => (r.components, r.norm),
                Err(_) => (vec![f64::NAN; names.len()], f64::NAN),
            };
            let mut cells = vec![i.to_string(), map.label()];
            cells.extend(u.iter().map(|v| num(*v)));
            cells.push(num(t));
            cells.extend(comps.iter().map(|v| num(*v)));
            cells.push(num(norm));
            csv.push_str(&cells.join(","));
            csv.push('\n');
            series.push((i, t, comps));
        }
    }
    report.files.push(write(&dir, "vorticity.csv", csv.as_bytes())?);

    if !cfg.times.is_empty() {
        let bounds = cfg.bounds_or(fam.primary().bounds())?;
        let counts = cfg.grid_counts(dim, default_per_axis(dim, 101, 21))?;
        let grid = grid_points(&bounds, &counts);
        for (k, &t) in cfg.times.iter().enumerate() {
            let mut head = vec!["branch".to_string()];
            head.extend(coord_names("u", dim));
            head.push("t".into());
            head.extend(names.iter().cloned());
            head.push("norm".into());
            let mut csv = head.join(",") + "\n";
            for map in &fam.branches {
                let rows: Vec<Option<String>> = grid
                    .par_iter()
                    .map(|u| {
                        if !map.contains(u) {
                            return None;
                        }
                        let (comps, norm) = match vorticity(map, t, u) {
                            Ok(r) => (r.components, r.norm),
                            Err(_) => (vec![f64::NAN; names.len()], f64::NAN),
                        };
                        let mut cells = vec![map.label()];
                        cells.extend(u.iter().map(|v| num(*v)));
                        cells.push(num(t));
                        cells.extend(comps.iter().map(|v| num(*v)));
                        cells.push(num(norm));
                        Some(cells.join(",") + "\n")
                    })
                    .collect();
                rows.into_iter().flatten().for_each(|r| csv.push_str(&r));
            }
            report.files.push(write(&dir, &format!("vorticity_snapshot_{k}.csv"), csv.as_bytes())?);
        }
    }

    let want_laurent = cfg.laurent || (cfg.check && m.is("gaussian"));
    let mut laurent: Option<LaurentFit> = None;
    if want_laurent {
        let (map, u_b, t_b) = if let Some(u) = cfg.points.first() {
            let map = &fam.branches[owning_branch(fam, u)?];
            let (t_b, _) = pick_root(map, u).ok_or_else(|| CliError::NoBlowup(format!("no real root at {u:?}")))?;
            (map, u.clone(), t_b)
        } else {
            let c = find_family_catastrophe(fam, None, &CatastropheOptions::default())?.best;
            let map = match &c.branch {
                Some(l) => fam.branch(l).expect("catastrophe branch exists"),
                None => fam.primary(),
            };
            (map, c.u_c, c.t_c)
        };
        let fit = laurent_fit(map, &u_b, t_b, None, &cfg.temporal_window(true))?;
        let out = json!({"branch": map.label(), "u_b": u_b, "fit": fit});
        let text = serde_json::to_string_pretty(&out).expect("plain data serializes");
        report.files.push(write(&dir, "laurent.json", text.as_bytes())?);
        report.summary = Some(out);
        laurent = Some(fit);
    }

    if cfg.check {
        if m.is("rotational") {
            let alpha = m.num_param("alpha", 1.0);
            let worst = series
                .iter()
                .map(|(_, t, c)| (c[0] - reference::rotational_vorticity(alpha, *t)).abs())
                .fold(0.0, f64::max);
            report
                .checks
                .push(Check::new("rotational closed form", worst <= 1e-12, format!("max |err| {worst:.2e}")));
        }
        if m.is("linear") || m.is("isotropic") || m.is("zero") {
            let worst = series.iter().flat_map(|(_, _, c)| c).map(|v| v.abs()).fold(0.0, f64::max);
            report.checks.push(Check::new("vorticity vanishes", worst == 0.0, format!("max |omega| {worst:.2e}")));
        }
        if let (true, Some(fit)) = (m.is("gaussian"), &laurent) {
            let tol = [1e-2, 1e-2, 5e-2];
            for (k, (want, tol)) in reference::GAUSSIAN_LAURENT.iter().zip(tol).enumerate() {
                let got = fit.coefficient(k as i32 - 1).unwrap_or(f64::NAN);
                report.checks.push(Check::within(format!("laurent c{}", k as i32 - 1), got, *want, tol * want.abs()));
            }
        }
    }
    Ok(report)
}

// --------------------------------------------------------------- exponent

struct Target {
    u: Vec<f64>,
    t_b: f64,
    branch: usize,
    level: usize,
}

fn temporal_tolerance(m: usize) -> f64 {
    match m {
        1 => 0.03,
        2 => 0.05,
        _ => 0.1,
    }
}

fn exponent(cfg: &RunConfig, m: &ResolvedMap) -> Result<Report, CliError> {
    let fam = &m.family;
    let dim = fam.dim();
    let bounds = cfg.bounds_or(fam.primary().bounds())?;
    let seed = cfg.seed();
    let mut targets = Vec::new();
    for u in &cfg.points {
        let b = owning_branch(fam, u)?;
        let (t_b, mult) = pick_root(&fam.branches[b], u).ok_or_else(|| CliError::NoBlowup(format!("no real root at {u:?}")))?;
        targets.push(Target { u: u.clone(), t_b, branch: b, level: mult });
    }
    let nothing_asked = cfg.points.is_empty() && cfg.random.is_none() && cfg.locus.is_none() && !cfg.scan;
    let n_random = cfg.random.unwrap_or(if nothing_asked { if cfg.regime == Regime::Temporal { 20 } else { 10 } } else { 0 });
    if n_random > 0 {
        let generic = cfg.regime == Regime::Spatial;
        for (u, t_b) in sample_blowup_points(fam.primary(), &bounds, n_random, seed, generic) {
            targets.push(Target { u, t_b, branch: 0, level: 1 });
        }
    }
    if let Some(n) = cfg.locus {
        if !(2..=3).contains(&dim) {
            return Err(CliError::Config("locus points need a 2D or 3D map".into()));
        }
        let per_axis = cfg.grid_counts(dim, 61)?[0];
        let locus = double_root_locus(fam.primary(), &bounds, per_axis)?;
        let stride = (locus.points.len() / n.max(1)).max(1);
        for p in locus.points.iter().step_by(stride).take(n) {
            targets.push(Target { u: p.u.clone(), t_b: p.t_b, branch: 0, level: 2 });
        }
    }
    if cfg.scan {
        if cfg.regime != Regime::Spatial {
            return Err(CliError::Config("--scan applies to the spatial regime".into()));
        }
        let per_axis = cfg.grid_counts(dim, 61)?[0];
        let cands = scan_level_candidates(fam.primary(), &bounds, per_axis, RootSelect::Index(0))?;
        let n = cfg.random.unwrap_or(8).max(1);
        let stride = (cands.len() / n).max(1);
        for c in cands.iter().step_by(stride).take(n) {
            targets.push(Target { u: c.u.clone(), t_b: c.t_b, branch: 0, level: c.level });
        }
    }
    if targets.is_empty() {
        return Err(CliError::Empty("no blowup points to fit".into()));
    }

    let mut head = coord_names("u", dim);
    head.extend(["t_b".into(), "slope".into(), "stderr".into(), "level".into()]);
    let mut csv = head.join(",") + "\n";
    let mut records = Vec::new();
    let mut checks = Vec::new();
    match cfg.regime {
        Regime::Temporal => {
            let window = cfg.temporal_window(false);
            let fits: Vec<_> = targets
                .par_iter()
                .map(|t| fit_temporal_exponent(&fam.branches[t.branch], &t.u, t.t_b, &window))
                .collect();
            for (t, fit) in targets.iter().zip(fits) {
                let (slope, stderr, level) = match &fit {
                    Ok(f) => (f.slope, f.stderr, f.multiplicity),
                    Err(_) => (f64::NAN, f64::NAN, t.level),
                };
                let mut cells: Vec<String> = t.u.iter().map(|v| num(*v)).collect();
                cells.extend([num(t.t_b), num(slope), num(stderr), level.to_string()]);
                csv.push_str(&(cells.join(",") + "\n"));
                match &fit {
                    Ok(f) => {
                        let tol = temporal_tolerance(f.multiplicity);
                        checks.push(Check::new(
                            format!("temporal slope at {:?}", t.u),
                            (f.slope + f.multiplicity as f64).abs() <= tol,
                            format!("{:.4} for multiplicity {} (tol {tol})", f.slope, f.multiplicity),
                        ));
                        records.push(json!({"u": t.u, "t_b": f.t_b, "fit": f}));
                    }
                    Err(e) => {
                        checks.push(Check::new(format!("temporal fit at {:?}", t.u), false, e.to_string()));
                        records.push(json!({"u": t.u, "t_b": t.t_b, "error": e.to_string()}));
                    }
                }
            }
        }
        Regime::Spatial => {
            let window = cfg.spatial_window();
            let kind = match cfg.ray {
                Ray::Singular => RayKind::Singular,
                Ray::Control => RayKind::Control,
            };
            let quantity = match cfg.ray {
                Ray::Singular => "dv1/dy1",
                Ray::Control => "omega",
            };
            type Outcome = (Result<SpatialFit, hodograph::Error>, Option<f64>);
            let fits: Vec<Outcome> = targets
                .par_iter()
                .map(|t| {
                    let map = &fam.branches[t.branch];
                    let strength = frame_at(map, &t.u, t.t_b, TOL_NULL).and_then(|f| fold_strength(map, &f)).ok();
                    (fit_spatial_exponent(map, &t.u, t.t_b, kind, &window), strength)
                })
                .collect();
            for (t, (fit, strength)) in targets.iter().zip(fits) {
                let q = fit.as_ref().ok().and_then(|f| f.quantity(quantity).cloned());
                let (slope, stderr) = q.map_or((f64::NAN, f64::NAN), |q| (q.slope, q.stderr));
                let mut cells: Vec<String> = t.u.iter().map(|v| num(*v)).collect();
                cells.extend([num(t.t_b), num(slope), num(stderr), t.level.to_string()]);
                csv.push_str(&(cells.join(",") + "\n"));
                match &fit {
                    Ok(f) => {
                        let bounded = f.bounded_block().map(|q| q.fit.slope).fold(f64::INFINITY, f64::min);
                        checks.push(Check::new(
                            format!("bounded block at {:?}", t.u),
                            bounded >= -0.05,
                            format!("min slope {bounded:.4}"),
                        ));
                        if kind == RayKind::Singular {
                            if t.level >= 2 {
                                checks.push(Check::new(
                                    format!("level-2 slope at {:?}", t.u),
                                    slope < -0.6,
                                    format!("{slope:.4} not below the fold rate"),
                                ));
                            } else if strength.is_some_and(|s| s >= 0.1) {
                                checks.push(Check::new(
                                    format!("fold slope at {:?}", t.u),
                                    (slope + 0.5).abs() <= 0.05,
                                    format!("{slope:.4}"),
                                ));
                            }
                        }
                        records.push(json!({
                            "level": t.level,
                            "fold_strength": strength,
                            "bounded_min_slope": bounded,
                            "fit": f,
                        }));
                    }
                    Err(e) => {
                        checks.push(Check::new(format!("spatial fit at {:?}", t.u), false, e.to_string()));
                        records.push(json!({"u": t.u, "t_b": t.t_b, "level": t.level, "error": e.to_string()}));
                    }
                }
            }
        }
    }
    let dir = cfg.out_dir();
    let mut report = Report::default();
    report.files.push(write(&dir, "exponent.csv", csv.as_bytes())?);
    let out = Value::Array(records);
    let text = serde_json::to_string_pretty(&out).expect("plain data serializes");
    report.files.push(write(&dir, "exponent.json", text.as_bytes())?);
    report.summary = Some(json!({"fits": targets.len()}));
    if cfg.check {
        report.checks = checks;
    }
    Ok(report)
}

// ------------------------------------------------------------------ field

/// Central-difference curl `∂u2/∂x1 − ∂u1/∂x2` on a 2D grid; NaN on the
/// border and next to masked cells.
fn fd_curl(grid: &FieldGrid) -> Vec<f64> {
    let (nx, ny) = (grid.axes[0].count, grid.axes[1].count);
    let hx = (grid.axes[0].max - grid.axes[0].min) / (nx - 1).max(1) as f64;
    let hy = (grid.axes[1].max - grid.axes[1].min) / (ny - 1).max(1) as f64;
    let u = |i: usize, j: usize| grid.samples[i * ny + j].as_ref().map(|s| &s.u);
    (0..nx * ny)
        .map(|flat| {
            let (i, j) = (flat / ny, flat % ny);
            if i == 0 || j == 0 || i + 1 == nx || j + 1 == ny {
                return f64::NAN;
            }
            match (u(i + 1, j), u(i - 1, j), u(i, j + 1), u(i, j - 1)) {
                (Some(e), Some(w), Some(n), Some(s)) => (e[1] - w[1]) / (2.0 * hx) - (n[0] - s[0]) / (2.0 * hy),
                _ => f64::NAN,
            }
        })
        .collect()
}

fn field(cfg: &RunConfig, m: &ResolvedMap) -> Result<Report, CliError> {
    let fam = &m.family;
    let dim = fam.dim();
    if cfg.fd_curl && dim != 2 {
        return Err(CliError::Config("--fd-curl needs a 2D map".into()));
    }
    let bounds = cfg.bounds_or(&Bounds::cube(dim, -2.0, 2.0))?;
    let counts = cfg.grid_counts(dim, default_per_axis(dim, 101, 31))?;
    let axes: Vec<Axis> = (0..dim).map(|k| Axis::new(bounds.lower[k], bounds.upper[k], counts[k])).collect();
    let times = if cfg.times.is_empty() { vec![0.0] } else { cfg.times.clone() };
    let dir = cfg.out_dir();
    let mut report = Report::default();
    let mut masked = Vec::new();
    for (k, &t) in times.iter().enumerate() {
        let grid = solve_grid(fam, &axes, t, cfg.continuation())?;
        if grid.masked_count() == grid.len() {
            return Err(CliError::Empty(format!("every cell is masked at t = {t}")));
        }
        if matches!(cfg.format, Format::Csv | Format::Both) {
            let mut csv = grid.to_csv();
            if cfg.fd_curl {
                let curl = fd_curl(&grid);
                csv = csv
                    .lines()
                    .enumerate()
                    .map(|(i, line)| match i {
                        0 => format!("{line},curl_fd\n"),
                        _ => format!("{line},{}\n", num(curl[i - 1])),
                    })
                    .collect();
            }
            report.files.push(write(&dir, &format!("field_{k}.csv"), csv.as_bytes())?);
        }
        if matches!(cfg.format, Format::Binary | Format::Both) {
            let mut buf = Vec::new();
            grid.write_binary(&mut buf)?;
            report.files.push(write(&dir, &format!("field_{k}.bin"), &buf)?);
        }
        masked.push(json!({"t": t, "cells": grid.len(), "masked": grid.masked_count()}));
        if cfg.check {
            field_checks(m, &grid, &mut report.checks);
        }
    }
    report.summary = Some(Value::Array(masked));
    Ok(report)
}

fn field_checks(m: &ResolvedMap, grid: &FieldGrid, checks: &mut Vec<Check>) {
    let fam = &m.family;
    let t = grid.t;
    let cells: Vec<(Vec<f64>, &hodograph::field::FieldSample)> =
        grid.samples.iter().enumerate().filter_map(|(i, s)| s.as_ref().map(|s| (grid.point(i), s))).collect();
    if fam.primary().has_initial_data() {
        let worst = cells
            .iter()
            .filter_map(|(x, s)| {
                let foot: Vec<f64> = x.iter().zip(&s.u).map(|(x, u)| x - u * t).collect();
                let u0 = fam.branches[s.branch].initial_data(&foot).ok()?;
                Some(s.u.iter().zip(&u0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            })
            .fold(0.0, f64::max);
        checks.push(Check::new(format!("characteristics at t={t}"), worst <= 1e-8, format!("max defect {worst:.2e}")));
    }
    if m.is("rotational") {
        let alpha = m.num_param("alpha", 1.0);
        let worst = cells
            .iter()
            .map(|(x, s)| {
                let want = reference::rotational_field(alpha, x, t);
                (s.u[0] - want[0]).abs().max((s.u[1] - want[1]).abs()) / x.iter().fold(1.0f64, |a, v| a.max(v.abs()))
            })
            .fold(0.0, f64::max);
        checks.push(Check::new(format!("rotational field at t={t}"), worst <= 1e-10, format!("max rel err {worst:.2e}")));
    }
    if m.is("gaussian") && fam.branches.len() == 4 && t >= 0.99 * reference::GAUSSIAN_T_C {
        let x_c = reference::GAUSSIAN_X_C;
        let far = grid
            .samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_none())
            .map(|(i, _)| {
                let p = grid.point(i);
                ((p[0] - x_c[0]).powi(2) + (p[1] - x_c[1]).powi(2)).sqrt()
            })
            .fold(0.0, f64::max);
        checks.push(Check::new(
            format!("masks near x_c at t={t}"),
            far <= 0.05,
            format!("{} masked, farthest {far:.4} from x_c", grid.masked_count()),
        ));
    }
}

// ------------------------------------------------------------------ frame

fn frame(cfg: &RunConfig, m: &ResolvedMap) -> Result<Report, CliError> {
    let fam = &m.family;
    let dim = fam.dim();
    let bounds = cfg.bounds_or(fam.primary().bounds())?;
    let mut targets = Vec::new();
    for u in &cfg.points {
        let b = owning_branch(fam, u)?;
        let (t_b, _) = pick_root(&fam.branches[b], u).ok_or_else(|| CliError::NoBlowup(format!("no real root at {u:?}")))?;
        targets.push((b, u.clone(), t_b));
    }
    let n_random = cfg.random.unwrap_or(if cfg.points.is_empty() { 10 } else { 0 });
    if n_random > 0 {
        for (u, t_b) in sample_blowup_points(fam.primary(), &bounds, n_random, cfg.seed(), false) {
            targets.push((0, u, t_b));
        }
    }
    let dir = cfg.out_dir();
    let mut report = Report::default();
    if cfg.scan {
        let per_axis = cfg.grid_counts(dim, 61)?[0];
        let cands = scan_level_candidates(fam.primary(), &bounds, per_axis, RootSelect::Index(0))?;
        let mut head = coord_names("u", dim);
        head.extend(["t_b".into(), "kappa".into(), "level".into()]);
        let mut csv = head.join(",") + "\n";
        for c in &cands {
            let mut cells: Vec<String> = c.u.iter().map(|v| num(*v)).collect();
            cells.extend([num(c.t_b), num(c.kappa), c.level.to_string()]);
            csv.push_str(&(cells.join(",") + "\n"));
        }
        report.files.push(write(&dir, "frame_candidates.csv", csv.as_bytes())?);
    }
    if targets.is_empty() && !cfg.scan {
        return Err(CliError::Empty("no blowup points found".into()));
    }
    let mut records = Vec::new();
    for (b, u, t_b) in &targets {
        let map = &fam.branches[*b];
        let f = frame_at(map, u, *t_b, TOL_NULL)?;
        let mat = build_matrix(map, f.t_b, u)?;
        let completeness = f.completeness_defect();
        let null_residual = f.null_residual(&mat.entries);
        let strength = fold_strength(map, &f).ok();
        if cfg.check {
            report.checks.push(Check::new(
                format!("frame completeness at {u:?}"),
                completeness <= 1e-12,
                format!("{completeness:.2e}"),
            ));
            report.checks.push(Check::new(
                format!("null residual at {u:?}"),
                null_residual <= 1e-10 * mat.norm().max(1.0),
                format!("{null_residual:.2e}"),
            ));
        }
        records.push(json!({
            "branch": map.label(),
            "frame": f,
            "q_matrix": f.q_matrix().row_iter().map(|r| r.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>(),
            "fold_strength": strength,
            "completeness_defect": completeness,
            "null_residual": null_residual,
        }));
    }
    let text = serde_json::to_string_pretty(&Value::Array(records)).expect("plain data serializes");
    report.files.push(write(&dir, "frame.json", text.as_bytes())?);
    report.summary = Some(json!({"frames": targets.len()}));
    Ok(report)
}
