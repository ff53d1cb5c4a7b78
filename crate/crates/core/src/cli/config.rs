//! `key = value` config files, merged under the command-line flags.

use std::ffi::OsString;
use std::path::Path;

/// Global options that take a value, so the subcommand can be located
/// without a full parse.
const GLOBAL_VALUED: [&str; 5] = ["seed", "workers", "out", "format", "config"];

/// Parse a config file: one `key = value` per line, `#` comments, blank
/// lines ignored. Keys are flag names without the leading dashes.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected `key = value`", i + 1))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || !k.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(format!("config line {}: bad key `{k}`", i + 1));
        }
        if k == "config" {
            return Err(format!("config line {}: nested config files are not supported", i + 1));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

fn long_name(tok: &str) -> Option<&str> {
    let name = tok.strip_prefix("--")?;
    Some(name.split_once('=').map_or(name, |(n, _)| n))
}

/// Splice config entries into `argv` right after the subcommand, skipping
/// keys already given on the command line. Unknown keys then surface as
/// ordinary unknown-flag errors.
pub fn merge_config(argv: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let strs: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let mut config_path = None;
    for (i, tok) in strs.iter().enumerate() {
        if tok == "--config" {
            config_path = strs.get(i + 1).cloned();
        } else if let Some(p) = tok.strip_prefix("--config=") {
            config_path = Some(p.to_string());
        }
    }
    let Some(path) = config_path else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(Path::new(&path)).map_err(|e| format!("cannot read config {path}: {e}"))?;
    let entries = parse_config(&text)?;

    let mut sub = None;
    let mut i = 1;
    while i < strs.len() {
        let tok = &strs[i];
        if let Some(name) = long_name(tok) {
            if !tok.contains('=') && GLOBAL_VALUED.contains(&name) {
                i += 1;
            }
        } else if !tok.starts_with('-') {
            sub = Some(i);
            break;
        }
        i += 1;
    }
    let Some(sub) = sub else {
        return Ok(argv);
    };
    let given: Vec<&str> = strs.iter().filter_map(|t| long_name(t)).collect();
    let mut extra = Vec::new();
    for (k, v) in entries {
        if given.contains(&k.as_str()) {
            continue;
        }
        match v.as_str() {
            "false" => {}
            "true" => extra.push(OsString::from(format!("--{k}"))),
            _ => {
                extra.push(OsString::from(format!("--{k}")));
                extra.push(OsString::from(v));
            }
        }
    }
    let mut out = argv;
    out.splice(sub + 1..sub + 1, extra);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn parses_pairs_and_comments() {
        let c = parse_config("# c\n\nseed = 7\nt-grid = 1,2 \n").unwrap();
        assert_eq!(c, vec![("seed".into(), "7".into()), ("t-grid".into(), "1,2".into())]);
        assert!(parse_config("novalue\n").is_err());
        assert!(parse_config("bad key = 1\n").is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.conf");
        std::fs::write(&p, "seed = 3\nn = 50\ntiming = true\nemit-acf = false\n").unwrap();
        let argv = os(&["regensim", "--config", p.to_str().unwrap(), "--seed", "9", "sample", "--t", "2"]);
        let merged: Vec<String> = merge_config(argv)
            .unwrap()
            .into_iter()
            .map(|s| s.into_string().unwrap())
            .collect();
        let path = p.to_str().unwrap();
        assert_eq!(
            merged,
            ["regensim", "--config", path, "--seed", "9", "sample", "--n", "50", "--timing", "--t", "2"]
        );
    }
}
