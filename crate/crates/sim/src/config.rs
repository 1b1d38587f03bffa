//! Loading and saving scenario files.
//!
//! A scenario file is a JSON object whose keys are the [`ScenarioConfig`]
//! field names. Every key is optional. Powers may be given in Watts
//! (`p_max`, `noise_power`) or dBm (`p_max_dbm`, `noise_power_dbm`), the
//! vehicle speed in m/s (`vehicle_speed`) or km/h (`vehicle_speed_kmh`).
//! `K`, `N`, `Z`, `V` and `T0` are accepted as aliases of `num_pairs`,
//! `num_rbs`, `num_zones`, `lyapunov_v` and `frame_length`.
//!
//! `key=value` overrides are applied to the parsed document before the
//! defaults are filled in and the result is validated.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};
use thiserror::Error;
use v2v_core::scenario::{ConfigError, ConfigFile};
use v2v_core::ScenarioConfig;

use crate::output::atomic_write;

#[derive(Debug, Error)]
pub enum ConfigLoadError {
    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: io::Error },
    #[error("{}:{line}:{column}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("override `{spec}`: {message}")]
    Override { spec: String, message: String },
    #[error("{0}")]
    Resolve(#[from] ConfigError),
}

const ALIASES: &[(&str, &str)] = &[
    ("K", "num_pairs"),
    ("N", "num_rbs"),
    ("Z", "num_zones"),
    ("V", "lyapunov_v"),
    ("T0", "frame_length"),
];

const UNIT_VARIANTS: &[(&str, &str)] = &[
    ("p_max", "p_max_dbm"),
    ("noise_power", "noise_power_dbm"),
    ("vehicle_speed", "vehicle_speed_kmh"),
];

/// Maps an alias to its canonical key. Unknown keys pass through unchanged.
pub fn canonical_key(key: &str) -> &str {
    ALIASES
        .iter()
        .find(|(alias, _)| *alias == key)
        .map_or(key, |(_, canonical)| canonical)
}

/// Keys that name the same quantity as `key` and must be dropped when `key`
/// is overridden.
fn shadowed_keys(canonical: &str) -> Vec<&'static str> {
    let mut out: Vec<&'static str> = ALIASES
        .iter()
        .filter(|(_, c)| *c == canonical)
        .map(|(a, _)| *a)
        .collect();
    for &(linear, log) in UNIT_VARIANTS {
        if canonical == linear {
            out.push(log);
        } else if canonical == log {
            out.push(linear);
        }
    }
    out
}

/// Applies one `key=value` override to a parsed config document.
///
/// `value` is read as JSON when it parses as JSON and as a bare string
/// otherwise, so `scheme=baseline` and `V=1e8` both work. Nested keys use a
/// dot, as in `path_loss.n_nlos=3`.
pub fn apply_override(doc: &mut Map<String, Value>, spec: &str) -> Result<(), ConfigLoadError> {
    let fail = |message: &str| ConfigLoadError::Override {
        spec: spec.to_owned(),
        message: message.to_owned(),
    };
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| fail("expected key=value"))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(fail("empty key"));
    }
    let raw = raw.trim();
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()));

    let mut parts = key.split('.');
    let head = canonical_key(parts.next().unwrap_or_default());
    let rest: Vec<&str> = parts.collect();
    for shadow in shadowed_keys(head) {
        doc.remove(shadow);
    }
    if rest.is_empty() {
        doc.insert(head.to_owned(), value);
        return Ok(());
    }

    let mut node = doc
        .entry(head.to_owned())
        .or_insert_with(|| Value::Object(Map::new()));
    for (i, part) in rest.iter().enumerate() {
        let Value::Object(map) = node else {
            return Err(fail("parent key is not an object"));
        };
        if i + 1 == rest.len() {
            map.insert((*part).to_owned(), value);
            return Ok(());
        }
        node = map
            .entry((*part).to_owned())
            .or_insert_with(|| Value::Object(Map::new()));
    }
    unreachable!("rest is non-empty")
}

fn parse_error(path: &Path, e: &serde_json::Error) -> ConfigLoadError {
    ConfigLoadError::Parse {
        path: path.to_owned(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Resolves a config from JSON text plus overrides. `origin` only labels
/// error messages.
pub fn parse_scenario(
    text: &str,
    origin: &Path,
    overrides: &[String],
) -> Result<ScenarioConfig, ConfigLoadError> {
    // typed pass first so file errors carry a line number
    let file: ConfigFile = serde_json::from_str(text).map_err(|e| parse_error(origin, &e))?;
    if overrides.is_empty() {
        return Ok(file.resolve()?);
    }
    let mut doc: Map<String, Value> =
        serde_json::from_str(text).map_err(|e| parse_error(origin, &e))?;
    for spec in overrides {
        apply_override(&mut doc, spec)?;
    }
    let file: ConfigFile =
        serde_json::from_value(Value::Object(doc)).map_err(|e| ConfigLoadError::Override {
            spec: overrides.join(" "),
            message: e.to_string(),
        })?;
    Ok(file.resolve()?)
}

/// Reads and resolves a scenario file.
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, ConfigLoadError> {
    load_with_overrides(Some(path), &[])
}

/// Resolves a scenario from an optional file plus overrides. Without a file
/// the overrides apply to the built-in defaults.
pub fn load_with_overrides(
    path: Option<&Path>,
    overrides: &[String],
) -> Result<ScenarioConfig, ConfigLoadError> {
    match path {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| ConfigLoadError::Read {
                path: path.to_owned(),
                source,
            })?;
            parse_scenario(&text, path, overrides)
        }
        None => parse_scenario("{}", Path::new("<defaults>"), overrides),
    }
}

/// Writes a resolved config in the same format [`load_scenario`] reads.
pub fn save_scenario(config: &ScenarioConfig, path: &Path) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(config).map_err(io::Error::other)?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}
