//! Splits free-form `--key value` overrides from the flags a subcommand
//! declares, so clap only sees the latter.

use clap::Command;
use halalnet::{Error, Result};
use std::ffi::OsString;

/// Returns `(argv for clap, overrides)`. Overrides use `_` in place of `-`.
pub fn partition(cmd: &Command, argv: Vec<OsString>) -> Result<(Vec<OsString>, Vec<(String, String)>)> {
    let mut known = Vec::new();
    let mut overrides = Vec::new();
    let mut it = argv.into_iter();
    known.extend(it.next());
    let mut sub: Option<&Command> = None;
    let mut rest = it.peekable();
    while let Some(arg) = rest.next() {
        let Some(s) = arg.to_str() else {
            known.push(arg);
            continue;
        };
        if sub.is_none() {
            if let Some(c) = cmd.find_subcommand(s) {
                sub = Some(c);
            }
            known.push(arg);
            continue;
        }
        let Some(flag) = s.strip_prefix("--").filter(|f| !f.is_empty()) else {
            known.push(arg);
            continue;
        };
        let (name, inline) = match flag.split_once('=') {
            Some((n, v)) => (n, Some(v.to_string())),
            None => (flag, None),
        };
        let declared = name == "help"
            || sub.is_some_and(|c| c.get_arguments().any(|a| a.get_long() == Some(name)));
        if declared {
            known.push(arg);
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => match rest.next() {
                Some(v) => v.into_string().map_err(|_| Error::Config(format!("--{name}: value is not UTF-8")))?,
                None => return Err(Error::Config(format!("--{name} needs a value"))),
            },
        };
        overrides.push((name.replace('-', "_"), value));
    }
    Ok((known, overrides))
}
