//! Control-set classification and pairwise verification.
//!
//! A query is compared (query first, control second) against every
//! reference image of every class; a class scores the mean, or optionally
//! the max, of its pair probabilities and the best-scoring class wins.
//! Equal scores go to the lexicographically smaller label.

use crate::backbone::network_input;
use crate::datakit::decode_image;
use crate::error::{Error, Result};
use crate::imaging::{segment_cut, Image, SegmentationParams};
use crate::siamese::SiameseModel;
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    #[default]
    Mean,
    Max,
}

impl FromStr for Aggregation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Aggregation::Mean),
            "max" => Ok(Aggregation::Max),
            _ => Err(Error::Config(format!("unknown aggregation `{s}` (mean, max)"))),
        }
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Mean => "mean",
            Aggregation::Max => "max",
        })
    }
}

/// Reference images per class label, already in network space.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSet {
    classes: BTreeMap<String, Vec<Image>>,
}

impl ControlSet {
    pub fn new(classes: BTreeMap<String, Vec<Image>>) -> Result<ControlSet> {
        if classes.is_empty() {
            return Err(Error::Empty("control set has no classes".into()));
        }
        if let Some((label, _)) = classes.iter().find(|(_, v)| v.is_empty()) {
            return Err(Error::Empty(format!("control class `{label}` has no images")));
        }
        Ok(ControlSet { classes })
    }

    pub fn from_images(items: impl IntoIterator<Item = (String, Image)>) -> Result<ControlSet> {
        let mut classes: BTreeMap<String, Vec<Image>> = BTreeMap::new();
        for (label, img) in items {
            classes.entry(label).or_default().push(img);
        }
        Self::new(classes)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.classes.keys().map(String::as_str)
    }

    pub fn images(&self, label: &str) -> Option<&[Image]> {
        self.classes.get(label).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}

/// Parses `<class-label> <image-path>` lines. Blank lines and `#` comments
/// are skipped; relative paths resolve against `root`.
pub fn parse_control_manifest(text: &str, root: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (label, path) = line
            .split_once(char::is_whitespace)
            .map(|(l, p)| (l, p.trim()))
            .filter(|(_, p)| !p.is_empty())
            .ok_or_else(|| Error::InvalidInput(format!("control manifest line {}: expected `<label> <path>`", i + 1)))?;
        let path = PathBuf::from(path);
        out.push((label.to_string(), if path.is_absolute() { path } else { root.join(path) }));
    }
    Ok(out)
}

/// How raw images are brought into network space.
#[derive(Debug, Clone, Default)]
pub struct Preprocess {
    /// Apply [`segment_cut`] first, keeping the raw image when the histogram
    /// is degenerate.
    pub segment: bool,
    pub params: SegmentationParams,
}

impl Preprocess {
    pub fn segmenting() -> Self {
        Preprocess { segment: true, params: SegmentationParams::default() }
    }

    /// Network-space image and whether segmentation was applied.
    pub fn apply(&self, img: &Image, input: (usize, usize)) -> Result<(Image, bool)> {
        if self.segment {
            match segment_cut(img, &self.params) {
                Ok((_, masked)) => return Ok((network_input(&masked, input.0, input.1)?, true)),
                Err(Error::DegenerateHistogram) => {}
                Err(e) => return Err(e),
            }
        }
        Ok((network_input(img, input.0, input.1)?, false))
    }
}

/// Reads the manifest at `path` and preprocesses every image.
pub fn load_control_set(path: &Path, input: (usize, usize), pre: &Preprocess) -> Result<ControlSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let root = path.parent().unwrap_or(Path::new(""));
    let entries = parse_control_manifest(&text, root)?;
    let mut items = Vec::with_capacity(entries.len());
    for (label, p) in entries {
        if !p.is_file() {
            return Err(Error::MissingFile(p));
        }
        items.push((label, pre.apply(&decode_image(&p)?, input)?.0));
    }
    ControlSet::from_images(items)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub class: String,
    /// One score per control class, each in `(0, 1)`.
    pub scores: BTreeMap<String, f64>,
}

/// Picks the best class; `scores` iterates in label order so the first
/// maximum is the lexicographically smallest.
fn argmax(scores: &BTreeMap<String, f64>) -> String {
    let mut best: Option<(&String, f64)> = None;
    for (k, &v) in scores {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((k, v));
        }
    }
    best.map(|(k, _)| k.clone()).unwrap_or_default()
}

pub fn aggregate(probs: &[f64], how: Aggregation) -> f64 {
    match how {
        Aggregation::Mean => probs.iter().sum::<f64>() / probs.len() as f64,
        Aggregation::Max => probs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Classifies a network-space query against the control set.
pub fn classify(model: &SiameseModel, img: &Image, control: &ControlSet, how: Aggregation) -> Result<Classification> {
    if control.is_empty() {
        return Err(Error::Empty("control set has no classes".into()));
    }
    let mut scores = BTreeMap::new();
    for (label, refs) in &control.classes {
        let pairs: Vec<(&Image, &Image)> = refs.iter().map(|c| (img, c)).collect();
        scores.insert(label.clone(), aggregate(&model.forward_pairs(&pairs)?, how));
    }
    Ok(Classification { class: argmax(&scores), scores })
}

/// Same class iff the pair probability reaches `threshold`.
pub fn verify(model: &SiameseModel, a: &Image, b: &Image, threshold: f64) -> Result<bool> {
    Ok(model.forward_pair(a, b)? >= threshold)
}
