use halalnet::augmentation::{augment_traced, AugmentationConfig, Technique};
use halalnet::backbone::BackboneConfig;
use halalnet::datakit::{
    decode_image, encode_image, generate_synthetic, load_manifest, prepare_pools, save_manifest, DatasetManifest,
    Record, SyntheticSpec,
};
use halalnet::imaging::{segment_cut_traced, SegmentationParams};
use halalnet::inference::{classify, load_control_set, Aggregation, Preprocess};
use halalnet::kv::{self, Document, Reader};
use halalnet::metrics::{confusion, macro_metrics, MetricsReport};
use halalnet::siamese::{load, SiameseModel};
use halalnet::training::{
    evaluate, fixed_pairs, split_dataset, train as run_training, EpochStats, TrainConfig, TrainOptions, DEFAULT_RATIOS,
};
use halalnet::{rng, Error, Result};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

type Pairs = Vec<(String, String)>;

/// Top-level entries of an optional `key = value` file.
fn file_pairs(path: Option<&Path>) -> Result<Pairs> {
    let Some(path) = path else { return Ok(Vec::new()) };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc = Document::parse(&text)?;
    if let Some(s) = doc.sections.first() {
        return Err(Error::Config(format!("{}: line {}: unexpected section", path.display(), s.line)));
    }
    Ok(doc.top.entries)
}

fn log_config(title: &str, text: &str) {
    eprintln!("# {title}");
    eprint!("{text}");
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn mkdir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn segmentation_params(file: Option<&Path>, overrides: Pairs) -> Result<SegmentationParams> {
    let mut p = SegmentationParams::default();
    p.apply(file_pairs(file)?)?;
    p.apply(overrides)?;
    Ok(p)
}

pub fn segment(input: &Path, output: &Path, config: Option<&Path>, overrides: Pairs) -> Result<()> {
    let params = segmentation_params(config, overrides)?;
    log_config("segmentation", &params.render());
    if !input.is_dir() {
        return Err(Error::MissingFile(input.to_path_buf()));
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(input)
        .map_err(|e| Error::io(input, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "ppm"))
        .collect();
    files.sort();
    let (masks, masked) = (output.join("masks"), output.join("masked"));
    mkdir(&masks)?;
    mkdir(&masked)?;
    let mut summary = String::from("file,threshold,foreground,status\n");
    let mut failures = String::new();
    for f in &files {
        let name = f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let stem = f.file_stem().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let img = decode_image(f)?;
        match segment_cut_traced(&img, &params) {
            Ok(t) => {
                encode_image(&t.opened.to_image(), &masks.join(format!("{stem}.pgm")))?;
                encode_image(&t.masked, &masked.join(format!("{stem}.ppm")))?;
                let _ = writeln!(summary, "{name},{},{},ok", t.threshold, t.opened.count());
            }
            Err(Error::DegenerateHistogram) => {
                let _ = writeln!(summary, "{name},,,degenerate");
                let _ = writeln!(failures, "{}", f.display());
            }
            Err(e) => return Err(e),
        }
    }
    write(&output.join("summary.csv"), &summary)?;
    write(&output.join("failures.txt"), &failures)?;
    eprintln!("segmented {} of {} images", files.len() - failures.lines().count(), files.len());
    Ok(())
}

pub struct TrainArgs {
    pub manifest: PathBuf,
    pub out: PathBuf,
    pub backbone: Option<PathBuf>,
    pub config: Option<PathBuf>,
    pub segmentation: Option<PathBuf>,
    pub resume: Option<PathBuf>,
    pub overrides: Pairs,
}

/// Records with paths resolved, so split manifests can live anywhere.
fn absolute(m: &DatasetManifest, records: Vec<Record>) -> Vec<Record> {
    records
        .into_iter()
        .map(|r| {
            let path = std::path::absolute(m.resolve(&r)).unwrap_or_else(|_| m.resolve(&r));
            Record { path, ..r }
        })
        .collect()
}

pub fn train(args: TrainArgs) -> Result<()> {
    let mut cfg = TrainConfig::default();
    cfg.apply(file_pairs(args.config.as_deref())?)?;
    cfg.apply(args.overrides)?;
    let seg = segmentation_params(args.segmentation.as_deref(), Vec::new())?;
    let (model, state) = match &args.resume {
        Some(path) => {
            let (m, s) = load(path)?;
            let s = s.ok_or_else(|| Error::Config(format!("{}: checkpoint has no training state", path.display())))?;
            cfg.seed = s.seed;
            (m, Some(s))
        }
        None => {
            let backbone = match &args.backbone {
                Some(p) => BackboneConfig::load(p)?,
                None => BackboneConfig::desk(),
            };
            (SiameseModel::build(backbone, &mut rng::substream(cfg.seed, "init"))?, None)
        }
    };
    log_config("training", &cfg.render());
    log_config("backbone", &model.config().render());
    log_config("segmentation", &seg.render());

    let manifest = load_manifest(&args.manifest)?;
    let split = split_dataset(&manifest.records, |r| r.class, DEFAULT_RATIOS, rng::derive_seed(cfg.seed, "split"))?;
    let split_dir = args.out.join("split");
    mkdir(&split_dir)?;
    let mut parts = Vec::new();
    for (name, records) in [("train", split.train), ("val", split.val), ("test", split.test)] {
        let m = DatasetManifest::new(&split_dir, absolute(&manifest, records));
        save_manifest(&m, &split_dir.join(format!("{name}.csv")))?;
        parts.push(m);
    }
    let (h, w, _) = model.config().input;
    let train_pools = prepare_pools(&parts[0], &seg, Some((w, h)), cfg.segmented_probability)?;
    let val_pools = prepare_pools(&parts[1], &seg, Some((w, h)), cfg.segmented_probability)?;
    eprintln!(
        "train {} images ({} segmentation failures), val {} images ({} failures)",
        parts[0].len(),
        train_pools.failures(),
        parts[1].len(),
        val_pools.failures()
    );
    write(&args.out.join("train.cfg"), &cfg.render())?;

    let mut report = |s: &EpochStats| {
        eprintln!(
            "epoch {:>5}  lr {:.3e}  train loss {:.4} acc {:.4}  val loss {:.4} acc {:.4}",
            s.epoch, s.lr, s.train_loss, s.train_acc, s.val_loss, s.val_acc
        )
    };
    let opts = TrainOptions { out_dir: Some(args.out.clone()), resume: state, on_epoch: Some(&mut report) };
    let outcome = run_training(model, &train_pools.pools, &val_pools.pools, &cfg, opts)?;
    if outcome.history.is_empty() {
        eprintln!("no epochs run; checkpoint already at epoch {}", outcome.state.epoch);
    } else {
        eprintln!(
            "best validation accuracy {:.4} (loss {:.4}); checkpoints in {}",
            outcome.state.best_val_acc,
            outcome.state.best_val_loss,
            args.out.display()
        );
    }
    Ok(())
}

pub fn eval(
    checkpoint: &Path,
    manifest: &Path,
    report_path: Option<&Path>,
    segmentation: Option<&Path>,
    overrides: Pairs,
) -> Result<()> {
    let mut r = Reader::from_pairs(overrides, "eval");
    let n: usize = r.take_or("pairs", 256)?;
    let seed: u64 = r.take_or("seed", 0)?;
    let threshold: f64 = r.take_or("threshold", 0.5)?;
    let p_seg: f64 = r.take_or("segmented_probability", 2.0 / 3.0)?;
    r.finish()?;
    if n == 0 {
        return Err(Error::Config("`pairs` must be positive".into()));
    }
    let seg = segmentation_params(segmentation, Vec::new())?;
    log_config(
        "eval",
        &kv::render(&[
            ("pairs", n.to_string()),
            ("seed", seed.to_string()),
            ("threshold", threshold.to_string()),
            ("segmented_probability", p_seg.to_string()),
        ]),
    );
    log_config("segmentation", &seg.render());
    let (model, _) = load(checkpoint)?;
    let (h, w, _) = model.config().input;
    let m = load_manifest(manifest)?;
    let pools = prepare_pools(&m, &seg, Some((w, h)), p_seg)?;
    let pairs = fixed_pairs(&pools.pools, n, seed, "eval", (h, w))?;
    let res = evaluate(&model, &pairs, threshold)?;
    let report = macro_metrics(&confusion(&res.predictions, &res.labels)?)?.with_loss(res.loss);
    println!("{report}");
    if let Some(p) = report_path {
        write(p, &format!("{}\n{}\n", MetricsReport::CSV_HEADER, report.csv_row()))?;
    }
    Ok(())
}

pub fn infer(
    checkpoint: &Path,
    control: &Path,
    segment: bool,
    segmentation: Option<&Path>,
    images: &[PathBuf],
    overrides: Pairs,
) -> Result<()> {
    let mut r = Reader::from_pairs(overrides, "infer");
    let how: Aggregation = r.take_str("aggregation").map(|s| s.parse()).transpose()?.unwrap_or_default();
    r.finish()?;
    let pre = Preprocess { segment, params: segmentation_params(segmentation, Vec::new())? };
    log_config("infer", &kv::render(&[("aggregation", how.to_string()), ("segment", segment.to_string())]));
    if segment {
        log_config("segmentation", &pre.params.render());
    }
    let (model, _) = load(checkpoint)?;
    let (h, w, _) = model.config().input;
    let set = load_control_set(control, (h, w), &pre)?;
    for path in images {
        let (img, segmented) = pre.apply(&decode_image(path)?, (h, w))?;
        let c = classify(&model, &img, &set, how)?;
        let scores: Vec<String> = c.scores.iter().map(|(k, v)| format!("{k}={v:.6}")).collect();
        let note = if segment && !segmented { "\t(raw fallback)" } else { "" };
        println!("{}\t{}\t{}{note}", path.display(), c.class, scores.join(" "));
    }
    Ok(())
}

pub fn synth(spec_path: Option<&Path>, out: &Path, overrides: Pairs) -> Result<()> {
    let mut spec = SyntheticSpec::default();
    spec.apply(file_pairs(spec_path)?)?;
    spec.apply(overrides)?;
    log_config("synthetic spec", &spec.render());
    let m = generate_synthetic(&spec, out)?;
    eprintln!("wrote {} images and {}", m.len(), out.join("manifest.csv").display());
    Ok(())
}

pub fn augment_preview(input: &Path, out: &Path, overrides: Pairs) -> Result<()> {
    let mut r = Reader::from_pairs(overrides, "augment-preview");
    let count: usize = r.take_or("count", 8)?;
    let seed: u64 = r.take_or("seed", 0)?;
    let mut config = AugmentationConfig::default();
    config.probability = r.take_or("aug_probability", config.probability)?;
    if let Some(list) = r.take_str("aug_techniques") {
        config.techniques = match list.trim() {
            "all" => Technique::ALL.to_vec(),
            "none" => Vec::new(),
            l => l.split(',').map(|t| t.trim().parse()).collect::<Result<_>>()?,
        };
    }
    r.finish()?;
    config.validate()?;
    let names: Vec<&str> = config.techniques.iter().map(|t| t.name()).collect();
    log_config(
        "augment-preview",
        &kv::render(&[
            ("count", count.to_string()),
            ("seed", seed.to_string()),
            ("aug_probability", config.probability.to_string()),
            ("aug_techniques", names.join(",")),
        ]),
    );
    let img = decode_image(input)?;
    mkdir(out)?;
    let mut rng = rng::substream(seed, "augment-preview");
    for i in 0..count {
        let (aug, used) = augment_traced(&config, &img, &mut rng);
        let name = format!("preview_{i:02}.ppm");
        encode_image(&aug, &out.join(&name))?;
        let used: Vec<&str> = used.iter().map(|t| t.name()).collect();
        println!("{name}\t{}", if used.is_empty() { "-".to_string() } else { used.join(",") });
    }
    Ok(())
}
