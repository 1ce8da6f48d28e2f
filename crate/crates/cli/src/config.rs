//! JSON config files mirrored onto flags.
//!
//! Every key of the config object becomes `--key=value` unless that flag (or
//! one of its aliases) already appears on the command line. A run manifest is
//! accepted as a config: its `flags` object is used and its subcommand must
//! match.

use std::ffi::OsString;
use std::path::Path;

use clap::CommandFactory;
use serde_json::Value;

use crate::args::Cli;
use crate::CliError;

fn config_path(raw: &[OsString]) -> Option<OsString> {
    let mut it = raw.iter();
    while let Some(tok) = it.next() {
        let s = tok.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(p.into());
        }
    }
    None
}

fn load(path: &Path, subcommand: &str) -> Result<serde_json::Map<String, Value>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::domain(format!("cannot read config {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::domain(format!("config {} is not valid JSON: {e}", path.display())))?;
    let Value::Object(mut obj) = value else {
        return Err(CliError::domain("config must be a JSON object"));
    };
    if let Some(Value::Object(flags)) = obj.remove("flags") {
        match obj.get("subcommand").and_then(Value::as_str) {
            Some(s) if s != subcommand => {
                return Err(CliError::domain(format!("manifest is for subcommand {s}, not {subcommand}")))
            }
            _ => return Ok(flags),
        }
    }
    Ok(obj)
}

fn render(value: &Value) -> Option<String> {
    match value {
        Value::Null | Value::Bool(_) => None,
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Array(items) if items.is_empty() => None,
        Value::Array(items) => Some(items.iter().filter_map(render).collect::<Vec<_>>().join(",")),
        Value::Object(_) => Some(value.to_string()),
    }
}

/// Returns `raw` with the config's flags spliced in after the subcommand.
pub fn expand_argv(raw: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&raw) else {
        return Ok(raw);
    };
    let Some(name) = raw.get(1).map(|s| s.to_string_lossy().into_owned()) else {
        return Ok(raw);
    };
    let cli = Cli::command();
    let Some(sub) = cli.find_subcommand(&name) else {
        return Ok(raw);
    };
    let given: Vec<String> = raw[2..].iter().map(|s| s.to_string_lossy().into_owned()).collect();
    let on_command_line = |long: &str| {
        given.iter().any(|g| g == &format!("--{long}") || g.starts_with(&format!("--{long}=")))
    };
    let mut injected = Vec::new();
    for (key, value) in load(Path::new(&path), &name)? {
        let long = key.replace('_', "-");
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(long.as_str()))
            .ok_or_else(|| CliError::domain(format!("unknown config key {key:?} for {name}")))?;
        let mut names = vec![long.clone()];
        names.extend(arg.get_all_aliases().unwrap_or_default().into_iter().map(str::to_string));
        if names.iter().any(|n| on_command_line(n)) {
            continue;
        }
        if value == Value::Bool(true) {
            injected.push(format!("--{long}").into());
        } else if let Some(v) = render(&value) {
            injected.push(format!("--{long}={v}").into());
        }
    }
    let mut out = raw[..2].to_vec();
    out.extend(injected);
    out.extend_from_slice(&raw[2..]);
    Ok(out)
}
