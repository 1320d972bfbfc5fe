//! `key=value` config files, merged into the argument list before clap sees
//! it. Flags given on the command line win over file entries.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::CommandFactory;

use crate::Cli;

/// Where a file-provided key ended up coming from.
pub type Provenance = BTreeMap<String, &'static str>;

/// Lines are `key = value`; blank lines and `#` comments are skipped.
pub fn parse_file(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("line {}: expected key=value, got {raw:?}", i + 1);
        };
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            bail!("line {}: empty key", i + 1);
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

/// Path given by `--config PATH` or `--config=PATH`.
fn config_path(args: &[String]) -> Option<String> {
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

fn given_on_command_line(args: &[String], key: &str) -> bool {
    let flag = format!("--{key}");
    let prefix = format!("--{key}=");
    args.iter().any(|a| *a == flag || a.starts_with(&prefix))
}

/// Splices file entries into `args` right after the subcommand name.
/// Keys must be long options of that subcommand or global options.
pub fn expand(args: Vec<String>) -> Result<(Vec<String>, Provenance)> {
    let Some(path) = config_path(&args) else {
        return Ok((args, Provenance::new()));
    };
    let text = fs::read_to_string(Path::new(&path)).with_context(|| format!("reading config file {path}"))?;
    let entries = parse_file(&text).with_context(|| format!("in config file {path}"))?;

    let root = Cli::command();
    let Some((pos, sub)) = args
        .iter()
        .enumerate()
        .skip(1)
        .find_map(|(i, a)| root.find_subcommand(a).map(|s| (i, s.clone())))
    else {
        // no subcommand: let clap report it
        return Ok((args, Provenance::new()));
    };
    let mut known: Vec<String> = root
        .get_arguments()
        .chain(sub.get_arguments())
        .filter_map(|a| a.get_long().map(str::to_string))
        .collect();
    known.retain(|k| k != "config" && k != "help" && k != "version");

    let mut provenance = Provenance::new();
    let mut spliced = Vec::new();
    for (key, value) in entries {
        if !known.contains(&key) {
            bail!(
                "unknown config key {key:?} for {} (known: {})",
                sub.get_name(),
                known.join(", ")
            );
        }
        if given_on_command_line(&args, &key) {
            provenance.insert(key, "flag (overrides file)");
            continue;
        }
        provenance.insert(key.clone(), "file");
        match value.as_str() {
            "true" => spliced.push(format!("--{key}")),
            "false" => {}
            _ => spliced.push(format!("--{key}={value}")),
        }
    }
    let mut out = args;
    out.splice(pos + 1..pos + 1, spliced);
    Ok((out, provenance))
}
