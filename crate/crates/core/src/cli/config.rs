//! JSON run configs. Keys are long flag names without the leading dashes, so a
//! config file expands into the same argument tokens a user would type.

use std::ffi::OsString;
use std::path::Path;

use serde_json::Value;

use super::CliError;

/// Flag tokens for one config document. `true` becomes a bare switch, `false`
/// and `null` are dropped, arrays become multi-value flags.
pub fn config_tokens(doc: &Value) -> Result<Vec<OsString>, CliError> {
    let Value::Object(map) = doc else {
        return Err(CliError::Usage("config must be a JSON object".into()));
    };
    let mut out = Vec::new();
    for (key, value) in map {
        if key == "config" {
            return Err(CliError::Usage(
                "configs cannot include other configs".into(),
            ));
        }
        let flag = OsString::from(format!("--{key}"));
        match value {
            Value::Bool(true) => out.push(flag),
            Value::Bool(false) | Value::Null => {}
            Value::Array(items) => {
                out.push(flag);
                for item in items {
                    out.push(scalar(key, item)?.into());
                }
            }
            other => {
                out.push(flag);
                out.push(scalar(key, other)?.into());
            }
        }
    }
    Ok(out)
}

fn scalar(key: &str, v: &Value) -> Result<String, CliError> {
    match v {
        Value::Number(n) => Ok(n.to_string()),
        Value::String(s) => Ok(s.clone()),
        _ => Err(CliError::Usage(format!(
            "config key `{key}` has an unsupported value {v}"
        ))),
    }
}

fn config_path(args: &[OsString]) -> Result<Option<OsString>, CliError> {
    let mut found = None;
    let mut iter = args.iter();
    while let Some(a) = iter.next() {
        let s = a.to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            let path = iter
                .next()
                .ok_or_else(|| CliError::Usage("--config needs a file path".into()))?;
            found = Some(path.clone());
        } else if let Some(rest) = s.strip_prefix("--config=") {
            found = Some(OsString::from(rest));
        }
    }
    Ok(found)
}

/// Splices the tokens of a `--config` file in right after the subcommand name,
/// so flags given on the command line take precedence.
pub fn expand_args(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    if args.len() < 2 {
        return Ok(args);
    }
    let Some(path) = config_path(&args[2..])? else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(Path::new(&path)).map_err(|e| {
        CliError::Usage(format!(
            "cannot read --config {}: {e}",
            path.to_string_lossy()
        ))
    })?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| {
        CliError::Usage(format!(
            "--config {} is not valid JSON: {e}",
            path.to_string_lossy()
        ))
    })?;
    let mut out = args[..2].to_vec();
    out.extend(config_tokens(&doc)?);
    out.extend(args[2..].iter().cloned());
    Ok(out)
}
