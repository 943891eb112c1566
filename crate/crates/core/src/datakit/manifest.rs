//! Dataset manifest: CSV with header `path,class,visibility,segmented`.
//! Relative paths resolve against the manifest's directory.

use crate::error::{Error, Result};
use serde::Deserialize;
use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Class {
    Halal,
    NonHalal,
}

impl Class {
    pub const ALL: [Class; 2] = [Class::Halal, Class::NonHalal];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Class::Halal => "halal",
            Class::NonHalal => "non-halal",
        }
    }
}

impl FromStr for Class {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "halal" => Ok(Class::Halal),
            "non-halal" => Ok(Class::NonHalal),
            other => Err(Error::UnknownClass(other.to_string())),
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How visible the cut is in the photograph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Visibility {
    Clear,
    Blurred,
    Bloodied,
    Dark,
    Obstructed,
    Side,
}

impl Visibility {
    pub const ALL: [Visibility; 6] = [
        Visibility::Clear,
        Visibility::Blurred,
        Visibility::Bloodied,
        Visibility::Dark,
        Visibility::Obstructed,
        Visibility::Side,
    ];

    /// Halal image counts per tag in the reference dataset.
    pub const REFERENCE_COUNTS: [usize; 6] = [520, 13, 126, 25, 14, 39];

    pub fn name(self) -> &'static str {
        match self {
            Visibility::Clear => "clear",
            Visibility::Blurred => "blurred",
            Visibility::Bloodied => "bloodied",
            Visibility::Dark => "dark",
            Visibility::Obstructed => "obstructed",
            Visibility::Side => "side",
        }
    }
}

impl FromStr for Visibility {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Visibility::ALL
            .iter()
            .copied()
            .find(|v| v.name() == s.trim())
            .ok_or_else(|| Error::UnknownTag(s.trim().to_string()))
    }
}

impl fmt::Display for Visibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    /// As written in the manifest.
    pub path: PathBuf,
    pub class: Class,
    pub visibility: Visibility,
    /// The file is already a segmented image.
    pub segmented: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetManifest {
    /// Directory relative paths resolve against.
    pub root: PathBuf,
    pub records: Vec<Record>,
}

#[derive(Deserialize)]
struct Row {
    path: String,
    class: String,
    visibility: String,
    segmented: String,
}

impl DatasetManifest {
    pub fn new(root: impl Into<PathBuf>, records: Vec<Record>) -> Self {
        DatasetManifest { root: root.into(), records }
    }

    pub fn resolve(&self, r: &Record) -> PathBuf {
        if r.path.is_absolute() {
            r.path.clone()
        } else {
            self.root.join(&r.path)
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn count(&self, class: Class) -> usize {
        self.records.iter().filter(|r| r.class == class).count()
    }

    /// Same root, chosen records.
    pub fn subset(&self, records: Vec<Record>) -> DatasetManifest {
        DatasetManifest { root: self.root.clone(), records }
    }

    /// Sort by path, the canonical order used when saving.
    pub fn canonicalize(&mut self) {
        self.records.sort_by(|a, b| a.path.cmp(&b.path));
    }

    /// Parses manifest text. Does not touch the filesystem.
    pub fn parse(text: &str, root: impl Into<PathBuf>) -> Result<DatasetManifest> {
        let mut records = Vec::new();
        if !text.trim().is_empty() {
            let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
            let headers = rdr.headers()?.clone();
            if headers.iter().collect::<Vec<_>>() != ["path", "class", "visibility", "segmented"] {
                return Err(Error::MalformedHeader(format!(
                    "manifest header must be `path,class,visibility,segmented`, got `{}`",
                    headers.iter().collect::<Vec<_>>().join(",")
                )));
            }
            for row in rdr.deserialize::<Row>() {
                let row = row?;
                let segmented = crate::kv::parse_bool(&row.segmented)
                    .ok_or_else(|| Error::InvalidInput(format!("segmented flag `{}` is not a boolean", row.segmented)))?;
                records.push(Record {
                    path: PathBuf::from(row.path),
                    class: row.class.parse()?,
                    visibility: row.visibility.parse()?,
                    segmented,
                });
            }
        }
        let mut seen = BTreeSet::new();
        for r in &records {
            if !seen.insert(&r.path) {
                return Err(Error::DuplicatePath(r.path.clone()));
            }
        }
        Ok(DatasetManifest { root: root.into(), records })
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["path", "class", "visibility", "segmented"]).expect("in-memory write");
        for r in &self.records {
            let path = r.path.to_string_lossy();
            let (class, vis) = (r.class.to_string(), r.visibility.to_string());
            w.write_record([path.as_ref(), class.as_str(), vis.as_str(), if r.segmented { "true" } else { "false" }])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

/// Reads and validates a manifest; every referenced file must exist.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let m = DatasetManifest::parse(&text, root)?;
    for r in &m.records {
        let p = m.resolve(r);
        if !p.is_file() {
            return Err(Error::MissingFile(p));
        }
    }
    Ok(m)
}

/// Writes the manifest in canonical (path-sorted) order.
pub fn save_manifest(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    let mut m = manifest.clone();
    m.canonicalize();
    std::fs::write(path, m.to_csv()).map_err(|e| Error::io(path, e))
}
