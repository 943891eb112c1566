use super::config::TrainConfig;
use super::pools::{sample_pair, DatasetPools};
use crate::augmentation::augment;
use crate::autodiff::{AdamState, Graph, Tensor};
use crate::backbone::{network_input, to_batch};
use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::rng;
use crate::siamese::{save, SiameseModel, TrainingState};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Clamp applied to probabilities inside the loss.
pub const LOSS_EPS: f64 = 1e-7;

/// A network-space image pair with its label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPair {
    pub a: Image,
    pub b: Image,
    pub label: u8,
}

/// `n` pairs drawn from `pools` with the stream `name` under `seed`, without
/// augmentation, converted to the model's input space.
pub fn fixed_pairs(
    pools: &DatasetPools,
    n: usize,
    seed: u64,
    name: &str,
    input: (usize, usize),
) -> Result<Vec<LabeledPair>> {
    let mut r = rng::substream(seed, name);
    (0..n)
        .map(|_| {
            let s = sample_pair(pools, &mut r)?;
            Ok(LabeledPair {
                a: network_input(s.a, input.0, input.1)?,
                b: network_input(s.b, input.0, input.1)?,
                label: s.label,
            })
        })
        .collect()
}

/// Mean clamped binary cross-entropy in f64.
pub fn bce_loss(p: &[f64], y: &[u8]) -> Result<f64> {
    if p.len() != y.len() || p.is_empty() {
        return Err(Error::InvalidInput(format!("bce: {} predictions, {} labels", p.len(), y.len())));
    }
    let total: f64 = p
        .iter()
        .zip(y)
        .map(|(&p, &y)| {
            let q = p.clamp(LOSS_EPS, 1.0 - LOSS_EPS);
            if y == 1 {
                -q.ln()
            } else {
                -(1.0 - q).ln()
            }
        })
        .sum();
    Ok(total / p.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub loss: f64,
    pub accuracy: f64,
    pub probabilities: Vec<f64>,
    /// `1` where the probability is at least the threshold.
    pub predictions: Vec<u8>,
    pub labels: Vec<u8>,
}

pub fn evaluate(model: &SiameseModel, pairs: &[LabeledPair], threshold: f64) -> Result<EvalResult> {
    if pairs.is_empty() {
        return Err(Error::Empty("no pairs to evaluate".into()));
    }
    let refs: Vec<(&Image, &Image)> = pairs.iter().map(|p| (&p.a, &p.b)).collect();
    let probabilities = model.forward_pairs(&refs)?;
    let labels: Vec<u8> = pairs.iter().map(|p| p.label).collect();
    let predictions: Vec<u8> = probabilities.iter().map(|&p| u8::from(p >= threshold)).collect();
    let correct = predictions.iter().zip(&labels).filter(|(p, y)| p == y).count();
    Ok(EvalResult {
        loss: bce_loss(&probabilities, &labels)?,
        accuracy: correct as f64 / pairs.len() as f64,
        probabilities,
        predictions,
        labels,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    /// 1-based epoch number.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    /// Learning rate used during the epoch.
    pub lr: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub epochs: Vec<EpochStats>,
}

impl History {
    pub const CSV_HEADER: &'static str = "epoch,train_loss,train_acc,val_loss,val_acc";

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn csv_row(e: &EpochStats) -> String {
        format!("{},{:.6},{:.6},{:.6},{:.6}", e.epoch, e.train_loss, e.train_acc, e.val_loss, e.val_acc)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for e in &self.epochs {
            let _ = writeln!(out, "{}", Self::csv_row(e));
        }
        out
    }
}

/// Where and how the loop persists its progress.
#[derive(Default)]
pub struct TrainOptions<'a> {
    /// Writes `best.hnet`, `last.hnet` and `history.csv` here when set.
    pub out_dir: Option<PathBuf>,
    /// Continue from a saved state; the model passed in must be the one
    /// stored with it.
    pub resume: Option<TrainingState>,
    pub on_epoch: Option<&'a mut dyn FnMut(&EpochStats)>,
}

pub struct TrainOutcome {
    /// Weights with the best validation accuracy (ties: lower loss) among
    /// the epochs of this call; the incoming model when none beat the
    /// resumed record.
    pub best: SiameseModel,
    pub best_epoch: Option<usize>,
    pub last: SiameseModel,
    pub state: TrainingState,
    pub history: History,
}

pub const BEST_CHECKPOINT: &str = "best.hnet";
pub const LAST_CHECKPOINT: &str = "last.hnet";
pub const HISTORY_CSV: &str = "history.csv";

struct Batch {
    left: Vec<Image>,
    right: Vec<Image>,
    labels: Vec<u8>,
}

/// Builds one batch. Slot `k` of step `s` in epoch `e` draws from its own
/// stream, so the result does not depend on how slots are spread over threads.
fn prepare_batch(pools: &DatasetPools, cfg: &TrainConfig, input: (usize, usize), epoch: usize, step: usize) -> Result<Batch> {
    let slot = |k: usize| -> Result<(Image, Image, u8)> {
        let mut r = rng::indexed(cfg.seed, "pair", &[epoch as u64, step as u64, k as u64]);
        let s = sample_pair(pools, &mut r)?;
        let (a, b) = if cfg.augment {
            (augment(&cfg.augmentation, s.a, &mut r), augment(&cfg.augmentation, s.b, &mut r))
        } else {
            (s.a.clone(), s.b.clone())
        };
        Ok((network_input(&a, input.0, input.1)?, network_input(&b, input.0, input.1)?, s.label))
    };
    let slots: Vec<Result<(Image, Image, u8)>> = if cfg.workers <= 1 {
        (0..cfg.batch).map(slot).collect()
    } else {
        let per = cfg.batch.div_ceil(cfg.workers);
        std::thread::scope(|sc| {
            let handles: Vec<_> = (0..cfg.batch)
                .step_by(per)
                .map(|lo| {
                    let slot = &slot;
                    sc.spawn(move || (lo..(lo + per).min(cfg.batch)).map(slot).collect::<Vec<_>>())
                })
                .collect();
            handles.into_iter().flat_map(|h| h.join().expect("batch worker panicked")).collect()
        })
    };
    let mut batch = Batch { left: Vec::new(), right: Vec::new(), labels: Vec::new() };
    for s in slots {
        let (a, b, y) = s?;
        batch.left.push(a);
        batch.right.push(b);
        batch.labels.push(y);
    }
    Ok(batch)
}

/// One optimizer step; returns `(bce, correct)`.
fn train_step(
    model: &mut SiameseModel,
    adam: &mut AdamState<f32>,
    batch: &Batch,
    l2: f64,
    epoch: usize,
    step: usize,
) -> Result<(f64, usize)> {
    let mut g = Graph::<f32>::new();
    let ids = model.register(&mut g, true);
    let a = g.input(to_batch(&batch.left.iter().collect::<Vec<_>>())?);
    let b = g.input(to_batch(&batch.right.iter().collect::<Vec<_>>())?);
    let nodes = model.forward_pair_nodes(&mut g, ids, a, b)?;
    let labels: Vec<f32> = batch.labels.iter().map(|&y| f32::from(y)).collect();
    let bce = g.bce(nodes.prob, &labels, LOSS_EPS as f32)?;
    let loss = if l2 > 0.0 {
        let pen = g.l2_penalty(&nodes.head_kernels, l2 as f32);
        g.add_scalars(&[bce, pen])?
    } else {
        bce
    };
    let (bce_v, loss_v) = (g.value(bce).data()[0], g.value(loss).data()[0]);
    if !loss_v.is_finite() {
        return Err(Error::NonFinite { epoch, step, detail: format!("loss = {loss_v} (bce = {bce_v}), lr = {}", adam.lr) });
    }
    let probs = g.value(nodes.prob).data().to_vec();
    g.backward(loss)?;
    let mut grads = Vec::with_capacity(nodes.params.len());
    for (&id, p) in nodes.params.iter().zip(model.params()) {
        let gr = g.take_grad(id).unwrap_or_else(|| Tensor::zeros(p.shape()));
        if !gr.is_finite() {
            return Err(Error::NonFinite { epoch, step, detail: "non-finite gradient".into() });
        }
        grads.push(gr);
    }
    adam.step(model.params_mut(), &grads)?;
    if let Some(i) = model.params().iter().position(|p| !p.is_finite()) {
        let name = &model.specs()[i].name;
        return Err(Error::NonFinite { epoch, step, detail: format!("parameter `{name}` is not finite") });
    }
    let correct = probs.iter().zip(&batch.labels).filter(|(&p, &y)| u8::from(p >= 0.5) == y).count();
    Ok((f64::from(bce_v), correct))
}

fn append(path: &Path, text: &str) -> Result<()> {
    use std::io::Write;
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Runs `cfg.epochs` epochs (or the remainder when resuming) of
/// `cfg.steps_per_epoch` batches each, validating on a fixed pair set drawn
/// from `val` after every epoch.
pub fn train(
    model: SiameseModel,
    train_pools: &DatasetPools,
    val_pools: &DatasetPools,
    cfg: &TrainConfig,
    mut opts: TrainOptions<'_>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let (h, w, _) = model.config().input;
    let input = (h, w);
    let val_pairs = fixed_pairs(val_pools, cfg.val_pairs, cfg.seed, "validation", input)?;
    let mut model = model;
    let mut state = match opts.resume.take() {
        Some(s) => s,
        None => TrainingState {
            epoch: 0,
            seed: cfg.seed,
            best_val_acc: f64::NEG_INFINITY,
            best_val_loss: f64::INFINITY,
            adam: AdamState::for_params(cfg.lr, cfg.lr_decay, model.params()),
        },
    };
    if let Some(dir) = &opts.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let hist = dir.join(HISTORY_CSV);
        if state.epoch == 0 || !hist.exists() {
            std::fs::write(&hist, format!("{}\n", History::CSV_HEADER)).map_err(|e| Error::io(&hist, e))?;
        }
    }
    let mut best = model.clone();
    let mut best_epoch = None;
    let mut history = History::default();
    for epoch in state.epoch as usize..cfg.epochs {
        let lr = state.adam.lr;
        let (mut loss_sum, mut correct) = (0.0, 0);
        for step in 0..cfg.steps_per_epoch {
            let batch = prepare_batch(train_pools, cfg, input, epoch, step)?;
            let (l, c) = train_step(&mut model, &mut state.adam, &batch, cfg.l2, epoch, step)?;
            loss_sum += l;
            correct += c;
        }
        let val = evaluate(&model, &val_pairs, 0.5)?;
        let stats = EpochStats {
            epoch: epoch + 1,
            train_loss: loss_sum / cfg.steps_per_epoch as f64,
            train_acc: correct as f64 / (cfg.steps_per_epoch * cfg.batch) as f64,
            val_loss: val.loss,
            val_acc: val.accuracy,
            lr,
        };
        if (epoch + 1) % cfg.decay_every == 0 {
            state.adam.decay_lr();
        }
        state.epoch = epoch as u64 + 1;
        let improved = val.accuracy > state.best_val_acc
            || (val.accuracy == state.best_val_acc && val.loss < state.best_val_loss);
        if improved {
            state.best_val_acc = val.accuracy;
            state.best_val_loss = val.loss;
            best = model.clone();
            best_epoch = Some(epoch + 1);
        }
        if let Some(dir) = &opts.out_dir {
            if improved {
                save(&best, None, &dir.join(BEST_CHECKPOINT))?;
            }
            save(&model, Some(&state), &dir.join(LAST_CHECKPOINT))?;
            append(&dir.join(HISTORY_CSV), &format!("{}\n", History::csv_row(&stats)))?;
        }
        if let Some(cb) = opts.on_epoch.as_mut() {
            cb(&stats);
        }
        history.epochs.push(stats);
    }
    Ok(TrainOutcome { best, best_epoch, last: model, state, history })
}
