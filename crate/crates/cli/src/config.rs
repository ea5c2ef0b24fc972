//! Run configuration, read from `--config <json>` and overridden by flags.

use std::path::PathBuf;

use hodograph::fit::{Side, Window};
use hodograph::frame::SpatialWindow;
use hodograph::{Bounds, MapFamily, MapSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// `t → t_b` at fixed `u`
    #[default]
    Temporal,
    /// `x → x_b` at fixed `t_b`
    Spatial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Ray {
    #[default]
    Singular,
    Control,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Binary,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SideChoice {
    Below,
    Above,
}

/// A map given either in short form (`cubic`, `rotational:alpha=2`) or as a
/// full JSON definition.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum MapSource {
    Short(String),
    Spec(MapSpec),
}

/// Fitting window. Temporal fits read `min`/`max` relative to `max(1,|t_b|)`;
/// spatial fits read them as absolute distances and also use `keep`.
#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowConfig {
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub n: Option<usize>,
    pub keep: Option<usize>,
    pub side: Option<SideChoice>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Subcommand this file is meant for; checked against the command line.
    pub command: Option<String>,
    pub map: Option<MapSource>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub check: bool,
    /// Samples per axis.
    pub grid: Option<Vec<usize>>,
    /// `[[lo, hi], ...]` per axis; u-space for surface/vorticity/exponent/frame,
    /// x-space for field.
    #[serde(rename = "box")]
    pub bounds: Option<Vec<[f64; 2]>>,
    pub points: Vec<Vec<f64>>,
    pub times: Vec<f64>,
    pub t_range: Option<[f64; 2]>,
    pub t_steps: Option<usize>,
    pub tol_disc: Option<f64>,
    pub regime: Regime,
    pub ray: Ray,
    pub window: Option<WindowConfig>,
    /// Number of randomly sampled blowup points.
    pub random: Option<usize>,
    /// Number of double-root locus points.
    pub locus: Option<usize>,
    /// Scan for second-level (cusp) candidates.
    pub scan: bool,
    pub laurent: bool,
    pub continuation: Option<bool>,
    pub format: Format,
    pub fd_curl: bool,
    /// Catastrophe grid samples per axis.
    pub search_grid: Option<usize>,
}

pub const DEFAULT_MAP: &str = "cubic";
pub const DEFAULT_TOL_DISC: f64 = 1e-10;

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self, CliError> {
        serde_json::from_str(s).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn tol_disc(&self) -> f64 {
        self.tol_disc.unwrap_or(DEFAULT_TOL_DISC)
    }

    pub fn continuation(&self) -> bool {
        self.continuation.unwrap_or(true)
    }

    pub fn resolve_map(&self) -> Result<ResolvedMap, CliError> {
        match &self.map {
            None => crate::mapspec::parse_short(DEFAULT_MAP),
            Some(MapSource::Short(s)) => crate::mapspec::parse_short(s),
            Some(MapSource::Spec(spec)) => crate::mapspec::from_spec(spec.clone()),
        }
    }

    /// Per-axis sample counts, broadcasting a single value.
    pub fn grid_counts(&self, dim: usize, default: usize) -> Result<Vec<usize>, CliError> {
        match &self.grid {
            None => Ok(vec![default; dim]),
            Some(g) if g.len() == 1 => Ok(vec![g[0]; dim]),
            Some(g) if g.len() == dim => Ok(g.clone()),
            Some(g) => Err(CliError::Config(format!("grid has {} axes, map has {dim}", g.len()))),
        }
        .and_then(|g| {
            if g.iter().any(|&c| c < 2) {
                Err(CliError::Config("grid needs at least 2 samples per axis".into()))
            } else {
                Ok(g)
            }
        })
    }

    pub fn bounds_or(&self, fallback: &Bounds) -> Result<Bounds, CliError> {
        match &self.bounds {
            None => Ok(fallback.clone()),
            Some(b) if b.len() == fallback.dim() => {
                if b.iter().any(|[lo, hi]| !(lo < hi)) {
                    return Err(CliError::Config("box needs lo < hi on every axis".into()));
                }
                Ok(Bounds::new(b.iter().map(|p| p[0]).collect(), b.iter().map(|p| p[1]).collect()))
            }
            Some(b) => Err(CliError::Config(format!("box has {} axes, map has {}", b.len(), fallback.dim()))),
        }
    }

    pub fn temporal_window(&self, laurent: bool) -> Window {
        let mut w = if laurent { Window::laurent() } else { Window::default() };
        if let Some(c) = &self.window {
            w.min_rel = c.min.unwrap_or(w.min_rel);
            w.max_rel = c.max.unwrap_or(w.max_rel);
            w.n = c.n.unwrap_or(w.n);
            w.side = c.side.map(|s| match s {
                SideChoice::Below => Side::Below,
                SideChoice::Above => Side::Above,
            });
        }
        w
    }

    pub fn spatial_window(&self) -> SpatialWindow {
        let mut w = SpatialWindow::default();
        if let Some(c) = &self.window {
            w.min = c.min.unwrap_or(w.min);
            w.max = c.max.unwrap_or(w.max);
            w.n = c.n.unwrap_or(w.n);
            w.keep = c.keep.unwrap_or(w.keep);
        }
        w
    }

    pub fn validate_points(&self, dim: usize) -> Result<(), CliError> {
        match self.points.iter().find(|p| p.len() != dim) {
            Some(p) => Err(CliError::Config(format!("point {p:?} has {} coordinates, map has {dim}", p.len()))),
            None => Ok(()),
        }
    }
}

/// A built map together with the name and parameters it was built from.
#[derive(Debug, Clone)]
pub struct ResolvedMap {
    pub family: MapFamily,
    pub builtin: Option<String>,
    pub params: serde_json::Map<String, serde_json::Value>,
}

impl ResolvedMap {
    pub fn is(&self, name: &str) -> bool {
        self.builtin.as_deref() == Some(name)
    }

    pub fn num_param(&self, key: &str, default: f64) -> f64 {
        match self.params.get(key) {
            Some(serde_json::Value::Number(n)) => n.as_f64().unwrap_or(default),
            Some(serde_json::Value::String(s)) => s.trim().parse().unwrap_or(default),
            _ => default,
        }
    }
}
