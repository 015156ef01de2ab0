//! `--config` files: one `key = value` per line, `#` starts a comment.
//! Keys are long flag names. The entries are spliced in front of the
//! explicit flags so that the latter win.

use std::ffi::OsString;
use std::path::Path;

#[derive(Debug)]
pub enum ConfigError {
    Read(String),
    Syntax(String),
}

pub fn parse_config(text: &str, path: &Path) -> Result<Vec<OsString>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Syntax(format!(
                "{}:{}: expected `key = value`",
                path.display(),
                i + 1
            )));
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key.is_empty() || key == "config" {
            return Err(ConfigError::Syntax(format!("{}:{}: invalid key", path.display(), i + 1)));
        }
        match value {
            "true" => out.push(format!("--{key}").into()),
            "false" => {}
            _ => {
                out.push(format!("--{key}").into());
                out.push(value.into());
            }
        }
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<(usize, OsString)> {
    for (i, a) in args.iter().enumerate() {
        let s = a.to_string_lossy();
        if s == "--" {
            return None;
        }
        if s == "--config" {
            return args.get(i + 1).map(|p| (i, p.clone()));
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some((i, p.into()));
        }
    }
    None
}

/// Inserts the config entries right after the subcommand name.
pub fn expand_args(args: Vec<OsString>, subcommands: &[&str]) -> Result<Vec<OsString>, ConfigError> {
    let Some((_, path)) = config_path(&args) else {
        return Ok(args);
    };
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Read(format!("cannot read config {}: {e}", path.display())))?;
    let extra = parse_config(&text, path)?;
    let at = args
        .iter()
        .position(|a| subcommands.iter().any(|s| a == *s))
        .map_or(args.len(), |i| i + 1);
    let mut out = args[..at].to_vec();
    out.extend(extra);
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
    fn entries_become_flags() {
        let got = parse_config("# c\nlambda = 0.3\nno_admm = true\nquiet=false\n\n", Path::new("x")).unwrap();
        assert_eq!(got, os(&["--lambda", "0.3", "--no-admm"]));
        assert!(parse_config("lambda 0.3", Path::new("x")).is_err());
    }

    #[test]
    fn spliced_after_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.conf");
        std::fs::write(&p, "lambda = 0.3\n").unwrap();
        let args = os(&["prog", "--config", p.to_str().unwrap(), "solve", "--lambda", "0.5"]);
        let out = expand_args(args, &["solve"]).unwrap();
        assert_eq!(
            out,
            os(&["prog", "--config", p.to_str().unwrap(), "solve", "--lambda", "0.3", "--lambda", "0.5"])
        );
    }
}
