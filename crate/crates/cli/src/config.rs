use std::path::Path;

use anyhow::{bail, Context};
use clap::Command;

/// `key = value` pairs from a config file, in file order.
pub fn read_config(path: &Path) -> anyhow::Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("IoFailure: cannot read config {}", path.display()))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> anyhow::Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected `key = value`", n + 1);
        };
        let key = key.trim();
        if key.is_empty() {
            bail!("config line {}: empty key", n + 1);
        }
        out.push((key.to_string(), value.trim().to_string()));
    }
    Ok(out)
}

/// Arguments to splice in after the subcommand name so that flags given on
/// the command line, which come later, take precedence.
pub fn config_args(
    command: &Command,
    subcommand: &str,
    pairs: &[(String, String)],
) -> anyhow::Result<Vec<String>> {
    let sub = command
        .find_subcommand(subcommand)
        .expect("subcommand was parsed from this command");
    let mut out = Vec::new();
    for (key, value) in pairs {
        let known = sub
            .get_arguments()
            .chain(command.get_arguments())
            .find(|a| a.get_long() == Some(key.as_str()) && a.get_id() != "config");
        let Some(arg) = known else {
            bail!("unknown config key {key:?} for `{subcommand}`");
        };
        out.push(format!("--{}", arg.get_long().expect("matched by long name")));
        out.push(value.clone());
    }
    Ok(out)
}
