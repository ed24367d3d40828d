//! `--config FILE`: a flat JSON object whose keys are long flag names.
//!
//! The file's entries become flags inserted right after the subcommand, so
//! anything given on the command line comes later and wins.

use std::ffi::OsString;
use std::fs;

use serde_json::Value;

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(rest) = s.strip_prefix("--config=") {
            return Some(rest.into());
        }
    }
    None
}

fn to_flags(json: &str) -> Result<Vec<OsString>, String> {
    let value: Value =
        serde_json::from_str(json).map_err(|e| format!("config is not valid JSON: {e}"))?;
    let Value::Object(map) = value else {
        return Err("config must be a JSON object".into());
    };
    let mut out = Vec::new();
    for (key, v) in map {
        if key == "config" {
            continue;
        }
        let flag = format!("--{}", key.replace('_', "-"));
        let scalar = |v: &Value| -> Result<String, String> {
            match v {
                Value::Number(n) => Ok(n.to_string()),
                Value::String(s) => Ok(s.clone()),
                Value::Bool(b) => Ok(b.to_string()),
                _ => Err(format!("config key {key:?} has an unsupported value")),
            }
        };
        match &v {
            Value::Null | Value::Bool(false) => {}
            Value::Bool(true) => out.push(flag.into()),
            Value::Array(items) => {
                let joined = items
                    .iter()
                    .map(scalar)
                    .collect::<Result<Vec<_>, _>>()?
                    .join(",");
                out.push(flag.into());
                out.push(joined.into());
            }
            other => {
                out.push(flag.into());
                out.push(scalar(other)?.into());
            }
        }
    }
    Ok(out)
}

/// Splices the config file's flags in after the subcommand.
pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path)
        .map_err(|e| format!("cannot read config {}: {e}", path.to_string_lossy()))?;
    let flags = to_flags(&text)?;
    let Some(sub) = args
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
    else {
        return Ok(args);
    };
    let at = sub + 2;
    let mut out = args[..at].to_vec();
    out.extend(flags);
    out.extend_from_slice(&args[at..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn json_becomes_flags() {
        let flags = to_flags(
            r#"{"epochs": 5, "sbm": true, "raw": false, "hidden": [8, 4], "weight_decay": 0.001}"#,
        )
        .unwrap();
        assert_eq!(
            flags,
            os(&[
                "--epochs",
                "5",
                "--hidden",
                "8,4",
                "--sbm",
                "--weight-decay",
                "0.001"
            ])
        );
        assert!(to_flags("[1]").is_err());
        assert!(to_flags(r#"{"a": {"b": 1}}"#).is_err());
    }

    #[test]
    fn flags_land_after_the_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"epochs": 5}"#).unwrap();
        let p = path.to_str().unwrap();
        let out = expand(os(&["pyrewire", "train", "--config", p, "--epochs", "7"])).unwrap();
        assert_eq!(
            out,
            os(&["pyrewire", "train", "--epochs", "5", "--config", p, "--epochs", "7"])
        );
        assert!(expand(os(&["pyrewire", "train", "--config", "/nonexistent.json"])).is_err());
    }
}
