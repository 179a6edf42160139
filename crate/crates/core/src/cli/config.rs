//! `key = value` config files. Each key names a long flag of the chosen
//! subcommand; flags given on the command line win.

use std::ffi::OsString;
use std::path::Path;

use clap::Command;

pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key = value", i + 1))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(format!("config line {}: empty key", i + 1));
        }
        if out.iter().any(|(k, _)| *k == key) {
            return Err(format!("config line {}: duplicate key '{key}'", i + 1));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

fn config_arg(args: &[OsString]) -> Option<(usize, usize, String)> {
    for (i, a) in args.iter().enumerate() {
        let s = a.to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            return Some((i, 2, args.get(i + 1)?.to_string_lossy().into_owned()));
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some((i, 1, p.to_string()));
        }
    }
    None
}

fn flag_given(args: &[OsString], long: &str) -> bool {
    let eq = format!("--{long}=");
    let bare = format!("--{long}");
    args.iter().any(|a| {
        let s = a.to_string_lossy();
        s == bare || s.starts_with(&eq)
    })
}

/// Splices config-file values into `args` as flags for every key the command
/// line leaves unset. Returns `args` unchanged when no `--config` is given.
pub fn expand_config(cmd: &Command, mut args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let Some((at, width, path)) = config_arg(&args) else {
        return Ok(args);
    };
    args.drain(at..at + width);
    let text = std::fs::read_to_string(Path::new(&path)).map_err(|e| format!("config file {path}: {e}"))?;
    let entries = parse_config(&text).map_err(|e| format!("config file {path}: {e}"))?;
    let sub = args
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .find_map(|s| cmd.find_subcommand(&s).cloned())
        .ok_or_else(|| "a config file needs a subcommand".to_string())?;
    let mut extra: Vec<OsString> = Vec::new();
    for (key, value) in entries {
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| format!("config file {path}: '{key}' is not a flag of '{}'", sub.get_name()))?;
        if flag_given(&args, &key) {
            continue;
        }
        if arg.get_action().takes_values() {
            extra.push(format!("--{key}").into());
            extra.push(value.into());
        } else {
            match value.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" => extra.push(format!("--{key}").into()),
                "false" | "no" | "0" => {}
                other => return Err(format!("config file {path}: '{key}' expects true or false, got '{other}'")),
            }
        }
    }
    // after any `--` the values would turn positional
    let end = args.iter().position(|a| a == "--").unwrap_or(args.len());
    args.splice(end..end, extra);
    Ok(args)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::{Arg, ArgAction};

    fn cmd() -> Command {
        Command::new("t").subcommand(
            Command::new("run")
                .arg(Arg::new("seed").long("seed"))
                .arg(Arg::new("out-dir").long("out-dir"))
                .arg(Arg::new("noisy").long("noisy").action(ArgAction::SetTrue)),
        )
    }

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn parses_comments_and_underscores() {
        let c = parse_config("# x\nseed = 4\nout_dir=a b # trailing\n\n").unwrap();
        assert_eq!(c, vec![("seed".into(), "4".into()), ("out-dir".into(), "a b".into())]);
        assert!(parse_config("seed").is_err());
        assert!(parse_config("a=1\na=2").is_err());
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.cfg");
        std::fs::write(&p, "seed = 4\nout_dir = x\nnoisy = true\n").unwrap();
        let args = os(&["t", "run", "--seed", "9", "--config", p.to_str().unwrap()]);
        let out = expand_config(&cmd(), args).unwrap();
        let m = cmd().try_get_matches_from(out).unwrap();
        let (_, sub) = m.subcommand().unwrap();
        assert_eq!(sub.get_one::<String>("seed").unwrap(), "9");
        assert_eq!(sub.get_one::<String>("out-dir").unwrap(), "x");
        assert!(sub.get_flag("noisy"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.cfg");
        std::fs::write(&p, "sed = 4\n").unwrap();
        let args = os(&["t", "run", &format!("--config={}", p.display())]);
        let e = expand_config(&cmd(), args).unwrap_err();
        assert!(e.contains("'sed'"), "{e}");
    }
}
