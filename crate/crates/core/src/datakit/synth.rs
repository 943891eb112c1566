//! Deterministic stand-in dataset. Halal images carry a red curved band
//! across a pale neck; non-halal images show the intact neck. Backgrounds
//! differ by class (bluish gray vs greenish), as in the real photographs.

use super::manifest::{save_manifest, Class, DatasetManifest, Record, Visibility};
use super::pnm::encode_image;
use crate::error::{Error, Result};
use crate::imaging::{gaussian_blur_with_sigma, round_u8, BinaryMask, Image};
use crate::kv::{self, Document, Reader};
use crate::rng;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub seed: u64,
    /// Side length of the square images.
    pub size: usize,
    pub halal: usize,
    pub non_halal: usize,
    /// Std-dev of per-pixel Gaussian noise, in 8-bit levels.
    pub noise: f64,
    /// Band thickness in pixels at size 64; scales with `size`.
    pub band_thickness: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec { seed: 7, size: 64, halal: 240, non_halal: 240, noise: 6.0, band_thickness: 7.0 }
    }
}

impl SyntheticSpec {
    pub fn parse(text: &str) -> Result<SyntheticSpec> {
        let doc = Document::parse(text)?;
        if let Some(s) = doc.sections.first() {
            return Err(Error::Config(format!("line {}: synthetic spec has no sections", s.line)));
        }
        let mut spec = SyntheticSpec::default();
        spec.apply(doc.top.entries)?;
        Ok(spec)
    }

    /// Overrides fields from `(key, value)` pairs, then validates.
    pub fn apply(&mut self, pairs: Vec<(String, String)>) -> Result<()> {
        let mut r = Reader::from_pairs(pairs, "synthetic spec");
        self.seed = r.take_or("seed", self.seed)?;
        self.size = r.take_or("size", self.size)?;
        self.halal = r.take_or("halal", self.halal)?;
        self.non_halal = r.take_or("non_halal", self.non_halal)?;
        self.noise = r.take_or("noise", self.noise)?;
        self.band_thickness = r.take_or("band_thickness", self.band_thickness)?;
        r.finish()?;
        self.validate()
    }

    pub fn load(path: &Path) -> Result<SyntheticSpec> {
        Self::parse(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn render(&self) -> String {
        kv::render(&[
            ("seed", self.seed.to_string()),
            ("size", self.size.to_string()),
            ("halal", self.halal.to_string()),
            ("non_halal", self.non_halal.to_string()),
            ("noise", self.noise.to_string()),
            ("band_thickness", self.band_thickness.to_string()),
        ])
    }

    pub fn validate(&self) -> Result<()> {
        if self.size < 32 {
            return Err(Error::Config(format!("synthetic size {} below 32", self.size)));
        }
        if self.halal == 0 || self.non_halal == 0 {
            return Err(Error::Config("synthetic counts must be at least 1 per class".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::Config(format!("noise {} must be a finite non-negative number", self.noise)));
        }
        if !(self.band_thickness >= 1.0 && self.band_thickness.is_finite()) {
            return Err(Error::Config(format!("band thickness {} must be ≥ 1", self.band_thickness)));
        }
        Ok(())
    }

    pub fn count(&self, class: Class) -> usize {
        match class {
            Class::Halal => self.halal,
            Class::NonHalal => self.non_halal,
        }
    }
}

/// Splits `n` over the reference tag proportions (largest remainder, ties
/// to the earlier tag).
pub fn visibility_counts(n: usize) -> [usize; 6] {
    let total: usize = Visibility::REFERENCE_COUNTS.iter().sum();
    let mut counts = [0usize; 6];
    let mut rem = [(0usize, 0usize); 6];
    for (i, &c) in Visibility::REFERENCE_COUNTS.iter().enumerate() {
        counts[i] = n * c / total;
        rem[i] = (n * c % total, i);
    }
    let left = n - counts.iter().sum::<usize>();
    rem.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in rem.iter().take(left) {
        counts[i] += 1;
    }
    counts
}

/// Tag of each image of one class, in index order.
pub fn visibility_plan(spec: &SyntheticSpec, class: Class) -> Vec<Visibility> {
    let counts = visibility_counts(spec.count(class));
    let mut tags: Vec<Visibility> =
        Visibility::ALL.iter().zip(counts).flat_map(|(&v, n)| std::iter::repeat_n(v, n)).collect();
    let mut r = rng::substream(spec.seed, &format!("synth-tags-{}", class.name()));
    for i in (1..tags.len()).rev() {
        tags.swap(i, r.random_range(0..=i));
    }
    tags
}

/// One rendered image with its ground-truth cut mask.
#[derive(Debug, Clone)]
pub struct Sample {
    pub image: Image,
    pub mask: BinaryMask,
    pub class: Class,
    pub visibility: Visibility,
}

struct Canvas {
    n: usize,
    px: Vec<[f64; 3]>,
}

impl Canvas {
    fn paint(&mut self, inside: impl Fn(f64, f64) -> f64, color: [f64; 3]) {
        for y in 0..self.n {
            for x in 0..self.n {
                let a = inside(x as f64 + 0.5, y as f64 + 0.5).clamp(0.0, 1.0);
                if a > 0.0 {
                    let p = &mut self.px[y * self.n + x];
                    for c in 0..3 {
                        p[c] = p[c] * (1.0 - a) + color[c] * a;
                    }
                }
            }
        }
    }
}

/// Soft edge: 1 inside, 0 outside, linear over one pixel around `d = 0`.
fn coverage(d: f64) -> f64 {
    (0.5 - d).clamp(0.0, 1.0)
}

fn jitter<R: Rng>(r: &mut R, base: [f64; 3], amount: f64) -> [f64; 3] {
    base.map(|v| v + r.random_range(-amount..=amount))
}

/// Ellipse centred at `(cx, cy)` with semi-axes `(a, b)` rotated by `theta`.
#[derive(Clone, Copy)]
struct Ellipse {
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
    theta: f64,
}

impl Ellipse {
    /// Local frame coordinates.
    fn local(&self, x: f64, y: f64) -> (f64, f64) {
        let (dx, dy) = (x - self.cx, y - self.cy);
        let (s, c) = self.theta.sin_cos();
        (c * dx + s * dy, -s * dx + c * dy)
    }

    fn radius(&self, x: f64, y: f64) -> f64 {
        let (u, v) = self.local(x, y);
        ((u / self.a).powi(2) + (v / self.b).powi(2)).sqrt()
    }

    /// Approximate signed distance to the boundary in pixels.
    fn signed_distance(&self, x: f64, y: f64) -> f64 {
        (self.radius(x, y) - 1.0) * self.a.min(self.b)
    }
}

pub fn render_sample(spec: &SyntheticSpec, class: Class, index: usize, visibility: Visibility) -> Result<Sample> {
    let n = spec.size;
    let s = n as f64;
    let scale = s / 64.0;
    let mut r = rng::indexed(spec.seed, "synth-image", &[class.index() as u64, index as u64]);

    let bg = match class {
        Class::Halal => jitter(&mut r, [105.0, 112.0, 130.0], 12.0),
        Class::NonHalal => jitter(&mut r, [92.0, 130.0, 100.0], 12.0),
    };
    let gradient = r.random_range(-15.0..15.0);
    let mut canvas = Canvas { n, px: vec![[0.0; 3]; n * n] };
    for y in 0..n {
        let g = gradient * (y as f64 / s - 0.5);
        for x in 0..n {
            canvas.px[y * n + x] = bg.map(|v| v + g);
        }
    }

    let neck = Ellipse {
        cx: s * (0.5 + r.random_range(-0.06..0.06)),
        cy: s * (0.55 + r.random_range(-0.06..0.06)),
        a: s * r.random_range(0.26..0.32),
        b: s * r.random_range(0.36..0.44),
        theta: r.random_range(-0.3..0.3),
    };
    let skin = jitter(&mut r, [208.0, 206.0, 206.0], 6.0);
    for y in 0..n {
        for x in 0..n {
            let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
            let a = coverage(neck.signed_distance(fx, fy));
            if a > 0.0 {
                let shade = 0.85 + 0.15 * (1.0 - neck.radius(fx, fy).powi(2)).max(0.0);
                let p = &mut canvas.px[y * n + x];
                for c in 0..3 {
                    p[c] = p[c] * (1.0 - a) + skin[c] * shade * a;
                }
            }
        }
    }

    // Band centre line in the neck frame: v = c0 + kappa·u².
    let c0 = neck.b * r.random_range(-0.12..0.12);
    let kappa = r.random_range(0.006..0.014) / scale;
    let side = visibility == Visibility::Side;
    let thickness = spec.band_thickness * scale * if side { 0.6 } else { 1.0 };
    let reach = if side { r.random_range(0.45..0.6) } else { 0.92 };
    let band_offset = move |x: f64, y: f64| {
        let (u, v) = neck.local(x, y);
        (v - (c0 + kappa * u * u)).abs() - thickness / 2.0
    };
    let band_inside = move |x: f64, y: f64| {
        let (u, _) = neck.local(x, y);
        neck.radius(x, y) <= 0.92 && u.abs() <= reach * neck.a
    };

    let mut mask = BinaryMask::filled(n, n, false);
    match class {
        Class::Halal => {
            let red = jitter(&mut r, [182.0, 36.0, 46.0], 14.0);
            let core = red.map(|v| v * 0.8);
            canvas.paint(|x, y| if band_inside(x, y) { coverage(band_offset(x, y)) } else { 0.0 }, red);
            canvas.paint(
                |x, y| if band_inside(x, y) { coverage(band_offset(x, y) + thickness / 4.0) } else { 0.0 },
                core,
            );
            for y in 0..n {
                for x in 0..n {
                    let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
                    if band_inside(fx, fy) && band_offset(fx, fy) <= 0.0 {
                        mask.set(x, y, true);
                    }
                }
            }
        }
        Class::NonHalal => {
            // Intact skin fold: a faint luminance-only line.
            let fold = skin.map(|v| v * 0.9);
            canvas.paint(
                |x, y| if band_inside(x, y) { 0.5 * coverage((band_offset(x, y) + thickness / 2.0).abs() - 0.75) } else { 0.0 },
                fold,
            );
        }
    }

    match visibility {
        Visibility::Bloodied => {
            if class == Class::Halal {
                for _ in 0..r.random_range(4..=8) {
                    let (u, v) = (r.random_range(-0.8..0.8) * neck.a, r.random_range(-0.8..0.8) * neck.b);
                    let (sn, cs) = neck.theta.sin_cos();
                    let (dx, dy) = (neck.cx + cs * u - sn * v, neck.cy + sn * u + cs * v);
                    let rad = r.random_range(0.8..1.8) * scale;
                    canvas.paint(|x, y| coverage(((x - dx).powi(2) + (y - dy).powi(2)).sqrt() - rad), [170.0, 30.0, 40.0]);
                }
            } else {
                smear(&mut canvas, &mut r, &neck, scale);
            }
        }
        Visibility::Obstructed => {
            let (u, v) = (r.random_range(-0.4..0.4) * neck.a, c0);
            let (sn, cs) = neck.theta.sin_cos();
            let feather = Ellipse {
                cx: neck.cx + cs * u - sn * v,
                cy: neck.cy + sn * u + cs * v,
                a: 0.04 * s,
                b: 0.13 * s,
                theta: neck.theta + r.random_range(-0.4..0.4),
            };
            canvas.paint(|x, y| coverage(feather.signed_distance(x, y)), jitter(&mut r, [226.0, 224.0, 218.0], 6.0));
            for y in 0..n {
                for x in 0..n {
                    if feather.signed_distance(x as f64 + 0.5, y as f64 + 0.5) <= 0.0 {
                        mask.set(x, y, false);
                    }
                }
            }
        }
        _ => {
            if class == Class::NonHalal && r.random_bool(0.1) {
                smear(&mut canvas, &mut r, &neck, scale);
            }
        }
    }

    if visibility == Visibility::Dark {
        let f = r.random_range(0.45..0.6);
        canvas.px.iter_mut().for_each(|p| *p = p.map(|v| v * f));
    }

    let mut image =
        Image::new(n, n, 3, canvas.px.iter().flat_map(|p| p.map(round_u8)).collect()).expect("square canvas");
    if visibility == Visibility::Blurred {
        image = gaussian_blur_with_sigma(&image, 9, 1.6)?;
    }
    if spec.noise > 0.0 {
        let normal = Normal::new(0.0, spec.noise).map_err(|e| Error::Config(e.to_string()))?;
        for v in image.data_mut() {
            *v = round_u8(f64::from(*v) + normal.sample(&mut r));
        }
    }
    Ok(Sample { image, mask, class, visibility })
}

/// Small brownish smudge, small enough for a 5×5 opening to remove.
fn smear<R: Rng>(canvas: &mut Canvas, r: &mut R, neck: &Ellipse, scale: f64) {
    let (u, v) = (r.random_range(-0.6..0.6) * neck.a, r.random_range(-0.6..0.6) * neck.b);
    let (sn, cs) = neck.theta.sin_cos();
    let e = Ellipse {
        cx: neck.cx + cs * u - sn * v,
        cy: neck.cy + sn * u + cs * v,
        a: 2.2 * scale,
        b: 1.3 * scale,
        theta: r.random_range(0.0..std::f64::consts::PI),
    };
    canvas.paint(|x, y| coverage(e.signed_distance(x, y)), [150.0, 62.0, 60.0]);
}

/// Relative path of image `index` of `class`.
pub fn image_path(class: Class, index: usize) -> PathBuf {
    PathBuf::from(format!("images/{}_{index:04}.ppm", class.name()))
}

pub fn mask_path(class: Class, index: usize) -> PathBuf {
    PathBuf::from(format!("masks/{}_{index:04}.pgm", class.name()))
}

/// Renders every image, writes `images/`, `masks/`, `spec.cfg` and
/// `manifest.csv` under `out_dir`, and returns the manifest.
pub fn generate_synthetic(spec: &SyntheticSpec, out_dir: &Path) -> Result<DatasetManifest> {
    spec.validate()?;
    for sub in ["images", "masks"] {
        let d = out_dir.join(sub);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let mut records = Vec::new();
    for class in Class::ALL {
        for (i, vis) in visibility_plan(spec, class).into_iter().enumerate() {
            let sample = render_sample(spec, class, i, vis)?;
            encode_image(&sample.image, &out_dir.join(image_path(class, i)))?;
            encode_image(&sample.mask.to_image(), &out_dir.join(mask_path(class, i)))?;
            records.push(Record { path: image_path(class, i), class, visibility: vis, segmented: false });
        }
    }
    let spec_path = out_dir.join("spec.cfg");
    std::fs::write(&spec_path, spec.render()).map_err(|e| Error::io(&spec_path, e))?;
    let manifest = DatasetManifest::new(out_dir, records);
    save_manifest(&manifest, &out_dir.join("manifest.csv"))?;
    let mut m = manifest;
    m.canonicalize();
    Ok(m)
}
