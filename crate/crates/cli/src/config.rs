//! `--config` files: `key = value` lines naming long flags. Entries only fill
//! in flags the command line leaves out.

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Arg, CommandFactory};

use crate::args::Cli;
use crate::Failure;

fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut iter = argv.iter().skip(1);
    while let Some(arg) = iter.next() {
        let s = arg.to_string_lossy();
        if s == "--config" {
            return iter.next().map(PathBuf::from);
        }
        if let Some(rest) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(rest));
        }
    }
    None
}

pub fn parse_entries(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!(Failure::usage(format!("config line {}: expected key = value", i + 1)));
        };
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        let value = value.trim().trim_matches('"').to_owned();
        out.push((key, value));
    }
    Ok(out)
}

fn given(argv: &[OsString], arg: &Arg) -> bool {
    argv.iter().skip(1).any(|a| {
        let s = a.to_string_lossy();
        let long = arg.get_long().is_some_and(|l| s == format!("--{l}") || s.starts_with(&format!("--{l}=")));
        let short = arg.get_short().is_some_and(|c| s.starts_with(&format!("-{c}")) && !s.starts_with("--"));
        long || short
    })
}

/// Appends config-file flags that the command line does not set.
pub fn merge(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&argv) else { return Ok(argv) };
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading config {}", path.display()))?;
    let entries = parse_entries(&text)?;

    let root = Cli::command();
    let sub = argv
        .iter()
        .skip(1)
        .find_map(|a| root.find_subcommand(a.to_string_lossy().as_ref()).cloned());
    let mut candidates: Vec<Arg> = root.get_arguments().cloned().collect();
    if let Some(sub) = &sub {
        candidates.extend(sub.get_arguments().cloned());
    }

    let mut extra = Vec::new();
    for (key, value) in entries {
        if key == "config" {
            continue;
        }
        let Some(arg) = candidates.iter().find(|a| a.get_long() == Some(key.as_str())) else {
            bail!(Failure::usage(format!("config key {key:?} is not a flag of this command")));
        };
        if given(&argv, arg) {
            continue;
        }
        let flag = format!("--{key}");
        if arg.get_action().takes_values() {
            let multiple = matches!(arg.get_action(), clap::ArgAction::Append);
            let parts: Vec<&str> = if multiple { value.split(',').map(str::trim).collect() } else { vec![&value] };
            for part in parts {
                extra.push(OsString::from(&flag));
                extra.push(OsString::from(part));
            }
        } else {
            match value.as_str() {
                "true" | "1" | "yes" => extra.push(OsString::from(flag)),
                "false" | "0" | "no" => {}
                other => bail!(Failure::usage(format!("config key {key:?}: expected a boolean, got {other:?}"))),
            }
        }
    }
    let mut merged = argv;
    merged.extend(extra);
    Ok(merged)
}
