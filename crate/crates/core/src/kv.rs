//! The line-oriented `key = value` text format shared by every config file.
//!
//! Grammar:
//!
//! ```text
//! file    := line*
//! line    := blank | comment | section | entry
//! comment := '#' any*
//! section := '[' name ']'
//! entry   := key '=' value        (value runs to end of line, trimmed;
//!                                   a trailing '# ...' comment is stripped)
//! ```
//!
//! Entries before the first section belong to the top level. Section names
//! may repeat (one `[block]` per backbone block); keys may not repeat
//! within one section.

use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<(String, String)>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Document {
    pub top: Section,
    pub sections: Vec<Section>,
}

impl Document {
    pub fn parse(text: &str) -> Result<Document> {
        let mut doc = Document::default();
        let mut current: Option<Section> = None;
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Config(format!("line {lineno}: unterminated section header")))?
                    .trim();
                if name.is_empty() {
                    return Err(Error::Config(format!("line {lineno}: empty section name")));
                }
                if let Some(done) = current.take() {
                    doc.sections.push(done);
                }
                current = Some(Section { name: name.to_string(), line: lineno, entries: Vec::new() });
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {lineno}: expected `key = value`")))?;
            let key = k.trim();
            if key.is_empty() {
                return Err(Error::Config(format!("line {lineno}: empty key")));
            }
            let target = current.as_mut().unwrap_or(&mut doc.top);
            if target.entries.iter().any(|(ek, _)| ek == key) {
                return Err(Error::Config(format!("line {lineno}: duplicate key `{key}`")));
            }
            target.entries.push((key.to_string(), v.trim().to_string()));
        }
        if let Some(done) = current {
            doc.sections.push(done);
        }
        Ok(doc)
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Consumes the entries of a section, rejecting keys nobody asked for.
pub struct Reader {
    context: String,
    values: BTreeMap<String, String>,
}

impl Reader {
    pub fn new(section: &Section, context: impl Into<String>) -> Self {
        Reader { context: context.into(), values: section.entries.iter().cloned().collect() }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, String)>, context: impl Into<String>) -> Self {
        Reader { context: context.into(), values: pairs.into_iter().collect() }
    }

    pub fn take_str(&mut self, key: &str) -> Option<String> {
        self.values.remove(key)
    }

    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.values.remove(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::Config(format!("{}: cannot parse `{key} = {v}`", self.context))),
        }
    }

    pub fn take_or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        Ok(self.take(key)?.unwrap_or(default))
    }

    pub fn take_list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>> {
        match self.values.remove(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|p| p.trim().parse::<T>())
                .collect::<std::result::Result<Vec<T>, _>>()
                .map(Some)
                .map_err(|_| Error::Config(format!("{}: cannot parse list `{key} = {v}`", self.context))),
        }
    }

    /// Errors on the first key that was never taken.
    pub fn finish(self) -> Result<()> {
        match self.values.into_keys().next() {
            Some(k) => Err(Error::UnknownKey(k)),
            None => Ok(()),
        }
    }
}

/// Render `(key, value)` pairs as one text block.
pub fn render(pairs: &[(&str, String)]) -> String {
    let mut out = String::new();
    for (k, v) in pairs {
        let _ = writeln!(out, "{k} = {v}");
    }
    out
}

pub fn parse_bool(s: &str) -> Option<bool> {
    match s.trim() {
        "true" | "yes" | "1" | "on" => Some(true),
        "false" | "no" | "0" | "off" => Some(false),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_comments() {
        let doc = Document::parse(
            "# header\ninput = 64, 64, 3  # trailing\n\n[block]\nkind = conv\n[block]\nkind = sep\n",
        )
        .unwrap();
        assert_eq!(doc.top.entries, vec![("input".to_string(), "64, 64, 3".to_string())]);
        assert_eq!(doc.sections.len(), 2);
        assert_eq!(doc.sections[1].entries[0].1, "sep");
        assert_eq!(doc.sections[1].line, 6);
    }

    #[test]
    fn rejects_garbage_and_duplicates() {
        assert!(Document::parse("no equals sign").is_err());
        assert!(Document::parse("a = 1\na = 2").is_err());
        assert!(Document::parse("[unterminated").is_err());
    }

    #[test]
    fn reader_rejects_unknown_keys() {
        let doc = Document::parse("lr = 0.1\nbogus = 3").unwrap();
        let mut r = Reader::new(&doc.top, "train");
        assert_eq!(r.take::<f64>("lr").unwrap(), Some(0.1));
        match r.finish() {
            Err(Error::UnknownKey(k)) => assert_eq!(k, "bogus"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
