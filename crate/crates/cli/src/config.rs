//! `--config FILE`: one `key=value` per line, `#` comments, keys named like
//! the long flags. The pairs are spliced into the argument list right after
//! the subcommand, so flags given on the command line win.

use std::fs;

pub const SUBCOMMANDS: [&str; 5] = ["simulate", "sde", "fpsolve", "verify", "dh"];

pub fn parse_file(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key=value, got '{line}'", n + 1))?;
        let k = k.trim().replace('_', "-");
        if k.is_empty() || k == "config" {
            return Err(format!("config line {}: invalid key '{}'", n + 1, k));
        }
        out.push((k, v.trim().to_string()));
    }
    Ok(out)
}

fn as_args(pairs: &[(String, String)]) -> Vec<String> {
    let mut args = Vec::new();
    for (k, v) in pairs {
        match v.as_str() {
            "true" => args.push(format!("--{k}")),
            "false" => {}
            _ => {
                args.push(format!("--{k}"));
                args.push(v.clone());
            }
        }
    }
    args
}

fn config_path(argv: &[String]) -> Option<String> {
    let mut it = argv.iter();
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

/// `argv` with the pairs of the `--config` file inserted after the subcommand.
pub fn expand(argv: Vec<String>) -> Result<Vec<String>, String> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = fs::read_to_string(&path).map_err(|e| format!("cannot read config {path}: {e}"))?;
    let extra = as_args(&parse_file(&text)?);
    let Some(pos) = argv.iter().position(|a| SUBCOMMANDS.contains(&a.as_str())) else {
        return Ok(argv);
    };
    let mut out = argv[..=pos].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[pos + 1..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_pairs_precede_flags() {
        let dir = std::env::temp_dir().join(format!("lgmm-config-{}", std::process::id()));
        fs::write(
            &dir,
            "# run\npaths = 10\nfull_paths=true\nrenormalize=false\n",
        )
        .unwrap();
        let argv: Vec<String> = [
            "lgmm",
            "--config",
            dir.to_str().unwrap(),
            "sde",
            "--paths",
            "3",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let out = expand(argv).unwrap();
        assert_eq!(
            out[3..],
            ["sde", "--paths", "10", "--full-paths", "--paths", "3"]
        );
        fs::remove_file(dir).unwrap();
    }

    #[test]
    fn malformed_lines_are_rejected() {
        assert!(parse_file("paths 10").is_err());
        assert!(parse_file("=3").is_err());
    }
}
