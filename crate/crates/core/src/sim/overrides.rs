//! Dotted-path `key=value` overrides applied to a parsed configuration.

use serde_json::Value;

use super::config::ScenarioConfig;
use crate::error::{Error, Result};

fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

fn set_path(root: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (depth, part) in parts.iter().enumerate() {
        let last = depth + 1 == parts.len();
        node = match node {
            Value::Object(map) => {
                if last {
                    map.insert(part.to_string(), value);
                    return Ok(());
                }
                map.entry(part.to_string()).or_insert(Value::Null)
            }
            Value::Array(items) => {
                let i: usize = part
                    .parse()
                    .map_err(|_| Error::Config(format!("{path}: '{part}' is not an index")))?;
                let len = items.len();
                let slot = items.get_mut(i).ok_or_else(|| {
                    Error::Config(format!("{path}: index {i} out of range (length {len})"))
                })?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(Error::Config(format!("{path}: '{part}' is not a container"))),
        };
    }
    Err(Error::Config("empty override key".into()))
}

/// Applies `key=value` pairs in order; later keys win.
pub fn apply_overrides(cfg: &ScenarioConfig, pairs: &[String]) -> Result<ScenarioConfig> {
    let mut doc = serde_json::to_value(cfg).map_err(|e| Error::Config(e.to_string()))?;
    for pair in pairs {
        let (key, raw) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{pair}' is not key=value")))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Config(format!("override '{pair}' has an empty key")));
        }
        set_path(&mut doc, key, parse_value(raw.trim()))?;
    }
    serde_json::from_value(doc).map_err(|e| Error::Config(format!("after overrides: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn later_keys_win() {
        let cfg = ScenarioConfig::example1([3.0, 4.5]);
        let out = apply_overrides(
            &cfg,
            &["filter.rho=5".into(), "duration=0".into(), "filter.rho=20".into()],
        )
        .unwrap();
        assert_eq!(out.filter.rho, 20.0);
        assert_eq!(out.duration, 0.0);
    }

    #[test]
    fn indexes_into_lists() {
        let cfg = ScenarioConfig::example1([3.0, 4.5]);
        let out = apply_overrides(&cfg, &["filter.barriers.7.degree=2".into(), "goal=[1,2]".into()])
            .unwrap();
        assert_eq!(out.filter.barriers[7].degree, 2);
        assert_eq!(out.goal, [1.0, 2.0]);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        let cfg = ScenarioConfig::example1([3.0, 4.5]);
        assert!(apply_overrides(&cfg, &["filter.nope=1".into()]).is_err());
        assert!(apply_overrides(&cfg, &["rho".into()]).is_err());
        assert!(apply_overrides(&cfg, &["filter.barriers.99.degree=1".into()]).is_err());
        assert!(apply_overrides(&cfg, &["duration=abc".into()]).is_err());
    }
}
