//! Short map syntax: `name` or `name:key=value,key=value`, e.g.
//! `rotational:alpha=2`, `harmonic:W=exp(u1)*cos(u2)`, `linear:beta=1,dim=3`,
//! `gaussian:branch=++`. A path ending in `.json` is read as a full map definition.

use hodograph::builtins::BUILTIN_NAMES;
use hodograph::MapSpec;
use serde_json::{Map, Value};

use crate::config::ResolvedMap;
use crate::error::CliError;

/// Splits on commas outside parentheses, so expression values may contain calls.
fn split_params(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let (mut depth, mut start) = (0i32, 0);
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&s[start..]);
    parts
}

fn default_dim(name: &str) -> usize {
    if name == "jordan" {
        3
    } else {
        2
    }
}

pub fn parse_short(s: &str) -> Result<ResolvedMap, CliError> {
    let s = s.trim();
    if s.ends_with(".json") {
        let text = std::fs::read_to_string(s).map_err(|e| CliError::Config(format!("{s}: {e}")))?;
        return from_spec(MapSpec::from_json(&text)?);
    }
    let (name, rest) = s.split_once(':').unwrap_or((s, ""));
    if !BUILTIN_NAMES.contains(&name) {
        return Err(CliError::Config(format!(
            "unknown map `{name}` (expected one of {})",
            BUILTIN_NAMES.join(", ")
        )));
    }
    let mut params = Map::new();
    let mut dim = default_dim(name);
    for part in split_params(rest).into_iter().filter(|p| !p.trim().is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("map parameter `{part}` is not key=value")))?;
        let (k, v) = (k.trim(), v.trim());
        if k == "dim" {
            dim = v.parse().map_err(|_| CliError::Config(format!("dim must be an integer, got `{v}`")))?;
            continue;
        }
        params.insert(k.to_string(), Value::String(v.to_string()));
    }
    from_spec(MapSpec {
        dim,
        builtin: Some(name.to_string()),
        params,
        expr: None,
        bounds: None,
    })
}

pub fn from_spec(spec: MapSpec) -> Result<ResolvedMap, CliError> {
    let family = spec.build()?;
    Ok(ResolvedMap {
        family,
        builtin: spec.builtin.clone(),
        params: spec.params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_with_calls() {
        assert_eq!(split_params("W=exp(u1)*cos(u2),x=1"), vec!["W=exp(u1)*cos(u2)", "x=1"]);
    }

    #[test]
    fn rotational_alpha() {
        let m = parse_short("rotational:alpha=2").unwrap();
        assert!(m.is("rotational"));
        assert_eq!(m.num_param("alpha", 1.0), 2.0);
    }

    #[test]
    fn linear_in_three_dimensions() {
        let m = parse_short("linear:beta=1,dim=3").unwrap();
        assert_eq!(m.family.dim(), 3);
    }

    #[test]
    fn unknown_names_are_config_errors() {
        assert_eq!(parse_short("spiral").unwrap_err().exit_code(), 2);
        assert_eq!(parse_short("rotational:omega=1").unwrap_err().exit_code(), 2);
        assert_eq!(parse_short("harmonic:W=u1^3").unwrap_err().exit_code(), 2);
    }
}
