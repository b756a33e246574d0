//! JSON experiment configuration.
//!
//! A document is either a complete [`ExperimentSpec`] or an object with a
//! `"preset"` key whose remaining keys are deep-merged over the named preset.

use serde_json::{Map, Value};
use thiserror::Error;

use crate::experiment::{preset, ExperimentError, ExperimentSpec, PRESET_NAMES};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("malformed JSON: {0}")]
    Syntax(String),
    #[error("at `{path}`: {message}")]
    Field { path: String, message: String },
    #[error("unknown preset `{0}` (available: {list})", list = PRESET_NAMES.join(", "))]
    UnknownPreset(String),
    #[error("bad override `{0}`: expected key.path=value")]
    BadOverride(String),
    #[error(transparent)]
    Invalid(#[from] ExperimentError),
}

pub fn parse_config(text: &str) -> Result<ExperimentSpec, ConfigError> {
    parse_config_with(text, &[])
}

/// Parses `text` and then applies `key.path=value` overrides in order.
pub fn parse_config_with(text: &str, overrides: &[String]) -> Result<ExperimentSpec, ConfigError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    let mut value = expand_preset(doc)?;
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    let spec: ExperimentSpec = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::Field { path, message: e.into_inner().to_string() }
    })?;
    spec.validate()?;
    Ok(spec)
}

/// Config document for a bare preset.
pub fn preset_document(name: &str) -> String {
    serde_json::json!({ "preset": name }).to_string()
}

/// Pretty JSON that [`parse_config`] maps back to `spec`.
pub fn render(spec: &ExperimentSpec) -> String {
    serde_json::to_string_pretty(spec).expect("specs serialize")
}

fn expand_preset(doc: Value) -> Result<Value, ConfigError> {
    let Value::Object(mut map) = doc else {
        return Err(ConfigError::Field { path: ".".into(), message: "expected a JSON object".into() });
    };
    let Some(name) = map.remove("preset") else {
        return Ok(Value::Object(map));
    };
    let name = name.as_str().ok_or_else(|| ConfigError::Field {
        path: "preset".into(),
        message: "expected a preset name".into(),
    })?;
    let spec = preset(name).ok_or_else(|| ConfigError::UnknownPreset(name.to_string()))?;
    let mut base = serde_json::to_value(spec).expect("specs serialize");
    merge(&mut base, Value::Object(map));
    Ok(base)
}

/// Objects merge key by key; anything else replaces.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn apply_override(root: &mut Value, text: &str) -> Result<(), ConfigError> {
    let (path, raw) = text.split_once('=').ok_or_else(|| ConfigError::BadOverride(text.into()))?;
    if path.is_empty() {
        return Err(ConfigError::BadOverride(text.into()));
    }
    // bare words such as scheme names are taken as strings
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut slot = root;
    for key in path.split('.') {
        slot = match slot {
            Value::Array(items) => {
                let i: usize = key.parse().map_err(|_| ConfigError::Field {
                    path: path.into(),
                    message: format!("`{key}` is not an array index"),
                })?;
                let len = items.len();
                items.get_mut(i).ok_or_else(|| ConfigError::Field {
                    path: path.into(),
                    message: format!("index {i} out of range for array of length {len}"),
                })?
            }
            Value::Object(map) => map.entry(key).or_insert_with(|| Value::Object(Map::new())),
            _ => {
                return Err(ConfigError::Field { path: path.into(), message: format!("cannot descend into `{key}`") })
            }
        };
    }
    *slot = value;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::case_a_spec;
    use crate::sde::Scheme;

    #[test]
    fn bare_preset_equals_spec() {
        assert_eq!(parse_config(r#"{"preset": "case-a"}"#).unwrap(), case_a_spec());
    }

    #[test]
    fn preset_with_trajectory_override() {
        let spec = parse_config(r#"{"preset": "case-a", "n_trajectories": 2000}"#).unwrap();
        assert_eq!(spec, ExperimentSpec { n_trajectories: 2000, ..case_a_spec() });
    }

    #[test]
    fn nested_override_keeps_siblings() {
        let spec = parse_config(r#"{"preset": "case-a", "base": {"g": 0.02}}"#).unwrap();
        assert_eq!(spec.base.g, 0.02);
        assert_eq!(spec.base.gamma_p, 100.0);
    }

    #[test]
    fn misspelled_key_is_named() {
        let err = parse_config(r#"{"preset": "case-a", "base": {"gama_s": 0.1}}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("gama_s"), "{msg}");
        assert!(msg.contains("base"), "{msg}");
    }

    #[test]
    fn type_mismatch_names_path() {
        let err = parse_config(r#"{"preset": "case-b", "sweep": [{"label": "x", "overrides": {"gamma_c": "big"}}]}"#)
            .unwrap_err();
        assert!(err.to_string().contains("sweep[0].overrides.gamma_c"), "{err}");
    }

    #[test]
    fn invariant_violation_rejected() {
        let err = parse_config(r#"{"preset": "case-a", "n_trajectories": 0}"#).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(_)));
        assert!(matches!(parse_config(r#"{"preset": "case-z"}"#), Err(ConfigError::UnknownPreset(_))));
        assert!(matches!(parse_config("{"), Err(ConfigError::Syntax(_))));
    }

    #[test]
    fn render_round_trips_every_preset() {
        for name in PRESET_NAMES {
            let spec = preset(name).unwrap();
            assert_eq!(parse_config(&render(&spec)).unwrap(), spec, "{name}");
        }
    }

    #[test]
    fn dotted_overrides() {
        let sets = vec![
            "base.gamma_s=0.3".to_string(),
            "sweep.1.overrides.gamma_c=7".to_string(),
            "scheme=euler_maruyama".to_string(),
        ];
        let spec = parse_config_with(&preset_document("case-b"), &sets).unwrap();
        assert_eq!(spec.base.gamma_s, 0.3);
        assert_eq!(spec.sweep[1].overrides.gamma_c, Some(7.0));
        assert_eq!(spec.scheme, Scheme::EulerMaruyama);
        assert!(parse_config_with(&preset_document("case-b"), &["nonsense".into()]).is_err());
        assert!(parse_config_with(&preset_document("case-b"), &["sweep.9.label=x".into()]).is_err());
    }
}
