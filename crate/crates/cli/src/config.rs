//! JSON configuration files.
//!
//! A config file is an object keyed by subcommand name; each entry maps long
//! flag names to values. Flags given on the command line win over the file,
//! and the file wins over built-in defaults:
//!
//! ```json
//! { "fit": { "iterations": 5000, "chains": 8 }, "build": { "coding": "sr" } }
//! ```

use std::path::Path;

use serde_json::Value;

/// Finds `--config <path>` or `--config=<path>` in raw arguments.
pub fn config_path(args: &[String]) -> Option<String> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

/// The first argument naming a known subcommand.
fn subcommand<'a>(args: &'a [String], names: &[&str]) -> Option<&'a str> {
    args.iter().skip(1).map(String::as_str).find(|a| names.contains(a))
}

fn has_flag(args: &[String], flag: &str) -> bool {
    let long = format!("--{flag}");
    let eq = format!("--{flag}=");
    args.iter().any(|a| *a == long || a.starts_with(&eq))
}

fn render(value: &Value) -> Result<Option<String>, String> {
    Ok(match value {
        Value::Bool(true) => Some(String::new()),
        Value::Bool(false) | Value::Null => None,
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) => Some(s.clone()),
        Value::Array(items) => Some(
            items
                .iter()
                .map(|v| match v {
                    Value::String(s) => Ok(s.clone()),
                    Value::Number(n) => Ok(n.to_string()),
                    other => Err(format!("unsupported list item {other}")),
                })
                .collect::<Result<Vec<_>, _>>()?
                .join(","),
        ),
        Value::Object(_) => return Err("nested objects are not flag values".into()),
    })
}

/// Appends the config file's flags for the selected subcommand to `args`
/// unless the flag is already present.
pub fn merge(args: Vec<String>, path: &Path, names: &[&str]) -> Result<Vec<String>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("reading config {}: {e}", path.display()))?;
    let root: Value = serde_json::from_str(&text).map_err(|e| format!("parsing config {}: {e}", path.display()))?;
    let Value::Object(sections) = root else {
        return Err("config must be a JSON object keyed by subcommand".into());
    };
    for key in sections.keys() {
        if !names.contains(&key.as_str()) {
            return Err(format!("config section `{key}` is not a subcommand"));
        }
    }
    let Some(cmd) = subcommand(&args, names) else {
        return Ok(args);
    };
    let Some(section) = sections.get(cmd) else {
        return Ok(args);
    };
    let Value::Object(flags) = section else {
        return Err(format!("config section `{cmd}` must be an object"));
    };
    let mut out = args.clone();
    for (flag, value) in flags {
        if flag == "config" || has_flag(&args, flag) {
            continue;
        }
        match render(value).map_err(|e| format!("config flag `{flag}`: {e}"))? {
            Some(v) if v.is_empty() => out.push(format!("--{flag}")),
            Some(v) => out.push(format!("--{flag}={v}")),
            None => {}
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(s: &[&str]) -> Vec<String> {
        s.iter().map(|a| a.to_string()).collect()
    }

    #[test]
    fn command_line_wins() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"fit": {"chains": 8, "iterations": 10, "seed": null, "verbose": false}}"#).unwrap();
        let merged = merge(args(&["dmfc", "fit", "--chains", "2"]), &p, &["fit", "build"]).unwrap();
        assert_eq!(merged, args(&["dmfc", "fit", "--chains", "2", "--iterations=10"]));
    }

    #[test]
    fn unknown_section_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"nope": {}}"#).unwrap();
        assert!(merge(args(&["dmfc", "fit"]), &p, &["fit"]).is_err());
    }

    #[test]
    fn finds_config_path() {
        assert_eq!(config_path(&args(&["dmfc", "--config", "a.json", "fit"])), Some("a.json".into()));
        assert_eq!(config_path(&args(&["dmfc", "fit", "--config=b.json"])), Some("b.json".into()));
        assert_eq!(config_path(&args(&["dmfc", "fit"])), None);
    }
}
