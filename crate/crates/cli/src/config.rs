//! Flat `key = value` config files merged beneath command-line flags.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::parser::ValueSource;
use clap::{ArgMatches, Command};

/// Parses `key = value` lines; `#` starts a comment. Keys may use `_` or `-`.
pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut entries: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("line {}: expected key = value, got {raw:?}", i + 1);
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim().to_string();
        if key.is_empty() {
            bail!("line {}: empty key", i + 1);
        }
        if entries.iter().any(|(k, _)| *k == key) {
            bail!("line {}: duplicate key {key:?}", i + 1);
        }
        entries.push((key, value));
    }
    Ok(entries)
}

/// Long flag names accepted by any subcommand.
fn known_keys(cmd: &Command) -> BTreeSet<String> {
    cmd.get_subcommands()
        .flat_map(|sub| sub.get_arguments())
        .filter_map(|arg| arg.get_long())
        .filter(|long| !matches!(*long, "config" | "help"))
        .map(str::to_string)
        .collect()
}

/// Returns `argv` extended with the config entries that apply to the chosen
/// subcommand and were not given on the command line.
pub fn merge(
    cmd: &Command,
    matches: &ArgMatches,
    argv: &[OsString],
    path: &Path,
) -> Result<Vec<OsString>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let entries = parse(&text).with_context(|| format!("parsing config {}", path.display()))?;
    let known = known_keys(cmd);
    if let Some((key, _)) = entries.iter().find(|(k, _)| !known.contains(k)) {
        bail!("config {}: unknown key {key:?}", path.display());
    }

    let Some((name, sub_matches)) = matches.subcommand() else {
        return Ok(argv.to_vec());
    };
    let sub = cmd.find_subcommand(name).expect("parsed subcommand exists");
    let mut merged = argv.to_vec();
    for (key, value) in entries {
        let Some(arg) = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()))
        else {
            continue;
        };
        if sub_matches.value_source(arg.get_id().as_str()) == Some(ValueSource::CommandLine) {
            continue;
        }
        if arg.get_action().takes_values() {
            merged.push(format!("--{key}").into());
            merged.push(value.into());
        } else {
            match value.as_str() {
                "true" => merged.push(format!("--{key}").into()),
                "false" => {}
                other => bail!(
                    "config {}: {key} expects true or false, got {other:?}",
                    path.display()
                ),
            }
        }
    }
    Ok(merged)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_separators() {
        let entries = parse("# header\nn = 10\n\nrun_s=3 # trailing\n").unwrap();
        assert_eq!(
            entries,
            vec![("n".into(), "10".into()), ("run-s".into(), "3".into())]
        );
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(parse("n 10").is_err());
        assert!(parse("= 3").is_err());
        assert!(parse("n = 1\nn = 2").is_err());
    }
}
