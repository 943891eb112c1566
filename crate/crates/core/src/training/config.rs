use crate::augmentation::{AugmentationConfig, Technique};
use crate::error::{Error, Result};
use crate::kv::{self, Document, Reader};
use std::path::Path;

/// Everything the training loop needs besides the model and the data.
/// Loaded from the shared `key = value` format; unknown keys are errors.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub lr_decay: f64,
    /// Epochs between learning-rate decays.
    pub decay_every: usize,
    pub batch: usize,
    pub epochs: usize,
    pub steps_per_epoch: usize,
    /// L2 coefficient on the head kernels.
    pub l2: f64,
    pub seed: u64,
    pub segmented_probability: f64,
    /// Size of the fixed validation pair set.
    pub val_pairs: usize,
    /// Threads preparing augmented batches.
    pub workers: usize,
    pub augment: bool,
    pub augmentation: AugmentationConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-4,
            lr_decay: 0.99,
            decay_every: 1,
            batch: 8,
            epochs: 3200,
            steps_per_epoch: 100,
            l2: 1e-4,
            seed: 0,
            segmented_probability: 2.0 / 3.0,
            val_pairs: 256,
            workers: 1,
            augment: true,
            augmentation: AugmentationConfig::default(),
        }
    }
}


impl TrainConfig {
    pub fn parse(text: &str) -> Result<TrainConfig> {
        let doc = Document::parse(text)?;
        if let Some(s) = doc.sections.first() {
            return Err(Error::Config(format!("line {}: training config has no sections", s.line)));
        }
        Self::from_pairs(doc.top.entries)
    }

    pub fn load(path: &Path) -> Result<TrainConfig> {
        Self::parse(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    /// Builds from `(key, value)` pairs over the defaults.
    pub fn from_pairs(pairs: Vec<(String, String)>) -> Result<TrainConfig> {
        let mut c = TrainConfig::default();
        c.apply(pairs)?;
        Ok(c)
    }

    /// Overrides fields from `(key, value)` pairs.
    pub fn apply(&mut self, pairs: Vec<(String, String)>) -> Result<()> {
        let mut r = Reader::from_pairs(pairs, "training config");
        self.lr = r.take_or("lr", self.lr)?;
        self.lr_decay = r.take_or("lr_decay", self.lr_decay)?;
        self.decay_every = r.take_or("decay_every", self.decay_every)?;
        self.batch = r.take_or("batch", self.batch)?;
        self.epochs = r.take_or("epochs", self.epochs)?;
        self.steps_per_epoch = r.take_or("steps_per_epoch", self.steps_per_epoch)?;
        self.l2 = r.take_or("l2", self.l2)?;
        self.seed = r.take_or("seed", self.seed)?;
        self.segmented_probability = r.take_or("segmented_probability", self.segmented_probability)?;
        self.val_pairs = r.take_or("val_pairs", self.val_pairs)?;
        self.workers = r.take_or("workers", self.workers)?;
        if let Some(v) = r.take_str("augment") {
            self.augment = kv::parse_bool(&v).ok_or_else(|| Error::Config(format!("`augment = {v}` is not a boolean")))?;
        }
        self.augmentation.probability = r.take_or("aug_probability", self.augmentation.probability)?;
        if let Some(list) = r.take_str("aug_techniques") {
            self.augmentation.techniques = if list.trim() == "all" {
                Technique::ALL.to_vec()
            } else if list.trim() == "none" {
                Vec::new()
            } else {
                list.split(',').map(str::parse).collect::<Result<_>>()?
            };
        }
        r.finish()?;
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("batch", self.batch),
            ("epochs", self.epochs),
            ("steps_per_epoch", self.steps_per_epoch),
            ("val_pairs", self.val_pairs),
            ("workers", self.workers),
            ("decay_every", self.decay_every),
        ];
        for (k, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("`{k}` must be positive")));
            }
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr {} must be finite and non-negative", self.lr)));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::Config(format!("lr_decay {} must be in (0,1]", self.lr_decay)));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::Config(format!("l2 {} must be finite and non-negative", self.l2)));
        }
        if !(0.0..=1.0).contains(&self.segmented_probability) {
            return Err(Error::Config(format!("segmented_probability {} not in [0,1]", self.segmented_probability)));
        }
        self.augmentation.validate()
    }

    /// Canonical text form; `parse(render(c))` reproduces `c` for the keys above.
    pub fn render(&self) -> String {
        let techniques: Vec<&str> = self.augmentation.techniques.iter().map(|t| t.name()).collect();
        kv::render(&[
            ("lr", self.lr.to_string()),
            ("lr_decay", self.lr_decay.to_string()),
            ("decay_every", self.decay_every.to_string()),
            ("batch", self.batch.to_string()),
            ("epochs", self.epochs.to_string()),
            ("steps_per_epoch", self.steps_per_epoch.to_string()),
            ("l2", self.l2.to_string()),
            ("seed", self.seed.to_string()),
            ("segmented_probability", self.segmented_probability.to_string()),
            ("val_pairs", self.val_pairs.to_string()),
            ("workers", self.workers.to_string()),
            ("augment", self.augment.to_string()),
            ("aug_probability", self.augmentation.probability.to_string()),
            ("aug_techniques", if techniques.is_empty() { "none".into() } else { techniques.join(",") }),
        ])
    }

    /// Learning rate in effect during epoch `e` (0-based).
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr * self.lr_decay.powi((epoch / self.decay_every) as i32)
    }
}
