//! Merges `--config` file settings into the argument list before parsing.
//!
//! File settings are inserted right after the subcommand name, and only for
//! flags the command line does not already set. Keys that belong to some
//! other subcommand are skipped so one file can serve them all.

use std::ffi::OsString;

use clap::{ArgAction, Command};
use rehab_core::config::ConfigFile;

use crate::Failure;

/// Value of `--config` in `args` (program name excluded).
fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--" {
            break;
        }
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = a.to_str().and_then(|s| s.strip_prefix("--config=")) {
            return Some(v.into());
        }
    }
    None
}

/// Position of the subcommand name in `args`.
fn subcommand_position(args: &[OsString]) -> Option<usize> {
    let mut i = 0;
    while i < args.len() {
        let a = &args[i];
        if a == "--config" {
            i += 2;
            continue;
        }
        if !a.to_string_lossy().starts_with('-') {
            return Some(i);
        }
        i += 1;
    }
    None
}

fn sets_flag(args: &[OsString], long: &str) -> bool {
    let flag = format!("--{long}");
    let with_value = format!("--{long}=");
    args.iter()
        .take_while(|a| *a != "--")
        .filter_map(|a| a.to_str())
        .any(|a| a == flag || a.starts_with(&with_value))
}

pub fn apply(cli: &Command, args: Vec<OsString>) -> Result<Vec<OsString>, Failure> {
    let (program, rest) = match args.split_first() {
        Some((p, r)) => (p.clone(), r.to_vec()),
        None => return Ok(args),
    };
    let Some(path) = config_path(&rest) else {
        return Ok(args);
    };
    let file = ConfigFile::load(path.as_ref()).map_err(|e| Failure::Usage(e.to_string()))?;
    let Some(pos) = subcommand_position(&rest) else {
        return Ok(args);
    };
    let name = rest[pos].to_string_lossy().into_owned();
    let Some(sub) = cli.find_subcommand(&name) else {
        // let clap report the unknown subcommand
        return Ok(args);
    };
    let known_anywhere = |key: &str| {
        cli.get_subcommands()
            .flat_map(|s| s.get_arguments())
            .chain(cli.get_arguments())
            .any(|a| a.get_long() == Some(key))
    };

    let mut injected: Vec<OsString> = Vec::new();
    for (key, value) in file.entries() {
        if key == "config" {
            return Err(Failure::Usage(
                "config files cannot include other config files".into(),
            ));
        }
        let Some(arg) = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()))
        else {
            if known_anywhere(key) {
                continue;
            }
            return Err(Failure::Usage(format!(
                "config key {key:?} is not a known flag"
            )));
        };
        if sets_flag(&rest[pos + 1..], key) {
            continue;
        }
        match arg.get_action() {
            ArgAction::SetTrue => match value.as_str() {
                "true" => injected.push(format!("--{key}").into()),
                "false" => {}
                _ => {
                    return Err(Failure::Usage(format!(
                        "config key {key:?} takes true or false, got {value:?}"
                    )))
                }
            },
            _ => injected.push(format!("--{key}={value}").into()),
        }
    }

    let mut out = Vec::with_capacity(args.len() + injected.len());
    out.push(program);
    out.extend_from_slice(&rest[..=pos]);
    out.extend(injected);
    out.extend_from_slice(&rest[pos + 1..]);
    Ok(out)
}
