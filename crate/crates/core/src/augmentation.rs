//! Stochastic image augmentation.
//!
//! Each technique in the configured list fires independently with the same
//! probability, in list order. Geometric techniques resample with bilinear
//! interpolation and edge replication, so the output keeps the input size.

use crate::error::{Error, Result};
use crate::imaging::{resize_bilinear, round_u8, Image};
use crate::rng::Rng;
use rand::{Rng as _, SeedableRng};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Technique {
    FlipLr,
    FlipUd,
    Crop,
    Pad,
    Scale,
    Translate,
    Rotate,
    Shear,
    Warp,
    Brightness,
    PiecewiseAffine,
}

impl Technique {
    pub const ALL: [Technique; 11] = [
        Technique::FlipLr,
        Technique::FlipUd,
        Technique::Crop,
        Technique::Pad,
        Technique::Scale,
        Technique::Translate,
        Technique::Rotate,
        Technique::Shear,
        Technique::Warp,
        Technique::Brightness,
        Technique::PiecewiseAffine,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Technique::FlipLr => "flip_lr",
            Technique::FlipUd => "flip_ud",
            Technique::Crop => "crop",
            Technique::Pad => "pad",
            Technique::Scale => "scale",
            Technique::Translate => "translate",
            Technique::Rotate => "rotate",
            Technique::Shear => "shear",
            Technique::Warp => "warp",
            Technique::Brightness => "brightness",
            Technique::PiecewiseAffine => "piecewise_affine",
        }
    }
}

impl std::str::FromStr for Technique {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Technique::ALL
            .iter()
            .copied()
            .find(|t| t.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown augmentation technique `{s}`")))
    }
}

/// Parameter ranges. Fractions are relative to the image side.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranges {
    pub crop: f64,
    pub pad: f64,
    pub scale: (f64, f64),
    pub translate: f64,
    pub rotate_deg: f64,
    pub shear_deg: f64,
    pub brightness: f64,
    pub warp_amplitude: f64,
    pub piecewise_jitter: f64,
    pub piecewise_grid: usize,
}

impl Default for Ranges {
    fn default() -> Self {
        Ranges {
            crop: 0.10,
            pad: 0.10,
            scale: (0.85, 1.15),
            translate: 0.10,
            rotate_deg: 25.0,
            shear_deg: 15.0,
            brightness: 40.0,
            warp_amplitude: 0.03,
            piecewise_jitter: 0.03,
            piecewise_grid: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationConfig {
    pub techniques: Vec<Technique>,
    pub probability: f64,
    pub ranges: Ranges,
    /// Final `(width, height)`; `None` keeps the input size.
    pub output_size: Option<(usize, usize)>,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        AugmentationConfig {
            techniques: Technique::ALL.to_vec(),
            probability: 0.5,
            ranges: Ranges::default(),
            output_size: None,
        }
    }
}

impl AugmentationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.probability) {
            return Err(Error::Config(format!("augmentation probability {} not in [0,1]", self.probability)));
        }
        if self.ranges.piecewise_grid < 2 {
            return Err(Error::Config("piecewise grid needs at least 2 points per side".into()));
        }
        Ok(())
    }

    /// Every technique disabled.
    pub fn identity() -> Self {
        AugmentationConfig { probability: 0.0, ..Default::default() }
    }
}

/// Interleaved float raster in `[0, 255]`.
#[derive(Clone)]
struct Raster {
    w: usize,
    h: usize,
    c: usize,
    data: Vec<f64>,
}

impl Raster {
    fn from_image(img: &Image) -> Self {
        Raster {
            w: img.width(),
            h: img.height(),
            c: img.channels(),
            data: img.data().iter().map(|&v| f64::from(v)).collect(),
        }
    }

    fn to_image(&self) -> Image {
        Image::new(self.w, self.h, self.c, self.data.iter().map(|&v| round_u8(v)).collect()).expect("dims")
    }

    fn sample(&self, x: f64, y: f64, ch: usize) -> f64 {
        let (w, h) = (self.w as isize, self.h as isize);
        let (x0, y0) = (x.floor(), y.floor());
        let (fx, fy) = (x - x0, y - y0);
        let (xi, yi) = (x0 as isize, y0 as isize);
        let at = |xx: isize, yy: isize| {
            let xx = xx.clamp(0, w - 1) as usize;
            let yy = yy.clamp(0, h - 1) as usize;
            self.data[(yy * self.w + xx) * self.c + ch]
        };
        let top = at(xi, yi) + (at(xi + 1, yi) - at(xi, yi)) * fx;
        let bot = at(xi, yi + 1) + (at(xi + 1, yi + 1) - at(xi, yi + 1)) * fx;
        top + (bot - top) * fy
    }

    /// Resample through an inverse map `dst pixel center -> src position`;
    /// `None` from the map yields a black pixel.
    fn remap(&self, map: impl Fn(f64, f64) -> Option<(f64, f64)>) -> Raster {
        let mut data = vec![0.0; self.data.len()];
        for y in 0..self.h {
            for x in 0..self.w {
                if let Some((sx, sy)) = map(x as f64, y as f64) {
                    for ch in 0..self.c {
                        data[(y * self.w + x) * self.c + ch] = self.sample(sx, sy, ch);
                    }
                }
            }
        }
        Raster { data, ..*self }
    }
}

fn flip_lr(r: &Raster) -> Raster {
    let mut out = r.clone();
    for y in 0..r.h {
        for x in 0..r.w {
            let (s, d) = ((y * r.w + x) * r.c, (y * r.w + (r.w - 1 - x)) * r.c);
            out.data[d..d + r.c].copy_from_slice(&r.data[s..s + r.c]);
        }
    }
    out
}

fn flip_ud(r: &Raster) -> Raster {
    let mut out = r.clone();
    let row = r.w * r.c;
    for y in 0..r.h {
        let d = (r.h - 1 - y) * row;
        out.data[d..d + row].copy_from_slice(&r.data[y * row..(y + 1) * row]);
    }
    out
}

fn piecewise_affine(r: &Raster, grid: usize, jitter: f64, rng: &mut Rng) -> Raster {
    let (w, h) = (r.w as f64, r.h as f64);
    let n = grid;
    let cell_w = (w - 1.0) / (n - 1) as f64;
    let cell_h = (h - 1.0) / (n - 1) as f64;
    let mut src = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let jx = rng.random_range(-1.0..=1.0) * jitter * w;
            let jy = rng.random_range(-1.0..=1.0) * jitter * h;
            src.push((i as f64 * cell_w + jx, j as f64 * cell_h + jy));
        }
    }
    r.remap(|x, y| {
        let gx = (x / cell_w).min((n - 1) as f64 - 1e-9).max(0.0);
        let gy = (y / cell_h).min((n - 1) as f64 - 1e-9).max(0.0);
        let (i, j) = (gx.floor() as usize, gy.floor() as usize);
        let (u, v) = (gx - i as f64, gy - j as f64);
        let q00 = src[j * n + i];
        let q10 = src[j * n + i + 1];
        let q01 = src[(j + 1) * n + i];
        let q11 = src[(j + 1) * n + i + 1];
        // Split the cell along its main diagonal; affine inside each triangle.
        let (sx, sy) = if u >= v {
            (
                q00.0 + u * (q10.0 - q00.0) + v * (q11.0 - q10.0),
                q00.1 + u * (q10.1 - q00.1) + v * (q11.1 - q10.1),
            )
        } else {
            (
                q00.0 + v * (q01.0 - q00.0) + u * (q11.0 - q01.0),
                q00.1 + v * (q01.1 - q00.1) + u * (q11.1 - q01.1),
            )
        };
        Some((sx, sy))
    })
}

fn apply_technique(t: Technique, r: &Raster, ranges: &Ranges, rng: &mut Rng) -> Raster {
    let (w, h) = (r.w as f64, r.h as f64);
    let (cx, cy) = ((w - 1.0) / 2.0, (h - 1.0) / 2.0);
    match t {
        Technique::FlipLr => flip_lr(r),
        Technique::FlipUd => flip_ud(r),
        Technique::Crop => {
            let f: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.0..=ranges.crop));
            let (x0, x1) = (f[0] * w, w - f[1] * w);
            let (y0, y1) = (f[2] * h, h - f[3] * h);
            r.remap(|x, y| Some((x0 + (x + 0.5) / w * (x1 - x0) - 0.5, y0 + (y + 0.5) / h * (y1 - y0) - 0.5)))
        }
        Technique::Pad => {
            let f: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.0..=ranges.pad));
            let (pw, ph) = (w * (1.0 + f[0] + f[1]), h * (1.0 + f[2] + f[3]));
            r.remap(|x, y| {
                let sx = (x + 0.5) / w * pw - f[0] * w - 0.5;
                let sy = (y + 0.5) / h * ph - f[2] * h - 0.5;
                let inside = sx >= -0.5 && sx <= w - 0.5 && sy >= -0.5 && sy <= h - 0.5;
                inside.then_some((sx, sy))
            })
        }
        Technique::Scale => {
            let s = rng.random_range(ranges.scale.0..=ranges.scale.1);
            r.remap(|x, y| Some((cx + (x - cx) / s, cy + (y - cy) / s)))
        }
        Technique::Translate => {
            let tx = rng.random_range(-1.0..=1.0) * ranges.translate * w;
            let ty = rng.random_range(-1.0..=1.0) * ranges.translate * h;
            r.remap(|x, y| Some((x - tx, y - ty)))
        }
        Technique::Rotate => {
            let a = rng.random_range(-1.0..=1.0) * ranges.rotate_deg.to_radians();
            let (s, c) = a.sin_cos();
            r.remap(|x, y| {
                let (dx, dy) = (x - cx, y - cy);
                Some((cx + c * dx + s * dy, cy - s * dx + c * dy))
            })
        }
        Technique::Shear => {
            let k = (rng.random_range(-1.0..=1.0) * ranges.shear_deg.to_radians()).tan();
            r.remap(|x, y| Some((x - k * (y - cy), y)))
        }
        Technique::Warp => {
            let ax = rng.random_range(0.0..=ranges.warp_amplitude) * w;
            let ay = rng.random_range(0.0..=ranges.warp_amplitude) * h;
            let fx = rng.random_range(0.5..=1.5);
            let fy = rng.random_range(0.5..=1.5);
            let (px, py) = (rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI));
            r.remap(|x, y| {
                Some((x + ax * (2.0 * PI * fy * y / h + py).sin(), y + ay * (2.0 * PI * fx * x / w + px).sin()))
            })
        }
        Technique::Brightness => {
            let delta = rng.random_range(-ranges.brightness..=ranges.brightness);
            let mut out = r.clone();
            for v in out.data.iter_mut() {
                *v = (*v + delta).clamp(0.0, 255.0);
            }
            out
        }
        Technique::PiecewiseAffine => piecewise_affine(r, ranges.piecewise_grid, ranges.piecewise_jitter, rng),
    }
}

/// One augmentation draw using `rng`; also reports which techniques fired.
pub fn augment_traced(config: &AugmentationConfig, img: &Image, rng: &mut Rng) -> (Image, Vec<Technique>) {
    let mut applied = Vec::new();
    let mut raster: Option<Raster> = None;
    for &t in &config.techniques {
        // Always consume the coin so streams stay aligned across configs.
        let fire = rng.random::<f64>() < config.probability;
        if fire {
            let cur = raster.take().unwrap_or_else(|| Raster::from_image(img));
            raster = Some(apply_technique(t, &cur, &config.ranges, rng));
            applied.push(t);
        }
    }
    let out = raster.map(|r| r.to_image()).unwrap_or_else(|| img.clone());
    let out = match config.output_size {
        Some((w, h)) => resize_bilinear(&out, w, h),
        None => out,
    };
    (out, applied)
}

pub fn augment(config: &AugmentationConfig, img: &Image, rng: &mut Rng) -> Image {
    augment_traced(config, img, rng).0
}

/// Augmentation config plus its own random stream.
#[derive(Debug, Clone)]
pub struct AugmentationPipeline {
    config: AugmentationConfig,
    rng: Rng,
}

impl AugmentationPipeline {
    pub fn new(config: AugmentationConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        Ok(AugmentationPipeline { config, rng: Rng::seed_from_u64(seed) })
    }

    pub fn with_rng(config: AugmentationConfig, rng: Rng) -> Result<Self> {
        config.validate()?;
        Ok(AugmentationPipeline { config, rng })
    }

    pub fn config(&self) -> &AugmentationConfig {
        &self.config
    }

    pub fn apply(&mut self, img: &Image) -> Image {
        augment(&self.config, img, &mut self.rng)
    }

    pub fn apply_traced(&mut self, img: &Image) -> (Image, Vec<Technique>) {
        augment_traced(&self.config, img, &mut self.rng)
    }

    /// Two independent draws, `a` first.
    pub fn apply_pair(&mut self, a: &Image, b: &Image) -> (Image, Image) {
        let a = self.apply(a);
        let b = self.apply(b);
        (a, b)
    }

    pub fn apply_pair_traced(&mut self, a: &Image, b: &Image) -> ((Image, Vec<Technique>), (Image, Vec<Technique>)) {
        let a = self.apply_traced(a);
        let b = self.apply_traced(b);
        (a, b)
    }

    pub fn preview(&mut self, img: &Image, n: usize) -> Vec<Image> {
        (0..n).map(|_| self.apply(img)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient_image(w: usize, h: usize) -> Image {
        let mut data = Vec::new();
        for y in 0..h {
            for x in 0..w {
                data.extend_from_slice(&[(x * 7 % 256) as u8, (y * 11 % 256) as u8, ((x * y) % 256) as u8]);
            }
        }
        Image::new(w, h, 3, data).unwrap()
    }

    fn only(t: Technique) -> AugmentationConfig {
        AugmentationConfig { techniques: vec![t], probability: 1.0, ..Default::default() }
    }

    #[test]
    fn zero_probability_is_identity() {
        let img = gradient_image(33, 21);
        let mut p = AugmentationPipeline::new(AugmentationConfig::identity(), 1).unwrap();
        for _ in 0..10 {
            assert_eq!(p.apply(&img), img);
        }
        let (a, b) = p.apply_pair(&img, &img);
        assert_eq!((a, b), (img.clone(), img.clone()));
        assert_eq!(p.preview(&img, 1), vec![img]);
    }

    #[test]
    fn flips_are_involutions() {
        let img = gradient_image(16, 9);
        for t in [Technique::FlipLr, Technique::FlipUd] {
            let mut p = AugmentationPipeline::new(only(t), 3).unwrap();
            let once = p.apply(&img);
            assert_ne!(once, img);
            assert_eq!(p.apply(&once), img);
        }
    }

    #[test]
    fn every_technique_preserves_dimensions() {
        let img = gradient_image(40, 28);
        for t in Technique::ALL {
            let mut p = AugmentationPipeline::new(only(t), 9).unwrap();
            let out = p.apply(&img);
            assert_eq!(out.dims(), img.dims(), "{}", t.name());
        }
        let mut p = AugmentationPipeline::new(AugmentationConfig { probability: 1.0, ..Default::default() }, 2).unwrap();
        assert_eq!(p.apply(&img).dims(), img.dims());
    }

    #[test]
    fn resizes_to_requested_output() {
        let img = gradient_image(40, 28);
        let cfg = AugmentationConfig { output_size: Some((16, 16)), ..Default::default() };
        let mut p = AugmentationPipeline::new(cfg, 2).unwrap();
        assert_eq!(p.apply(&img).dims(), (16, 16, 3));
    }

    #[test]
    fn brightness_is_clamped_shift() {
        let img = gradient_image(20, 20);
        let mut p = AugmentationPipeline::new(only(Technique::Brightness), 5).unwrap();
        let out = p.apply(&img);
        // One common delta: every unclamped pixel moves by the same amount.
        let deltas: std::collections::BTreeSet<i16> = img
            .data()
            .iter()
            .zip(out.data())
            .filter(|(_, &o)| o != 0 && o != 255)
            .map(|(&i, &o)| i16::from(o) - i16::from(i))
            .collect();
        assert!(deltas.len() <= 2, "{deltas:?}");
        assert!(deltas.iter().all(|d| d.abs() <= 40));
    }

    #[test]
    fn rotation_keeps_center_pixel_of_constant_image() {
        let img = Image::filled(31, 31, &[100, 50, 25]);
        for t in [Technique::Rotate, Technique::Shear, Technique::Scale, Technique::Warp, Technique::PiecewiseAffine] {
            let mut p = AugmentationPipeline::new(only(t), 4).unwrap();
            assert_eq!(p.apply(&img), img, "{}", t.name());
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let img = gradient_image(24, 24);
        let cfg = AugmentationConfig::default();
        let mut a = AugmentationPipeline::new(cfg.clone(), 77).unwrap();
        let mut b = AugmentationPipeline::new(cfg, 77).unwrap();
        for _ in 0..5 {
            assert_eq!(a.apply_pair(&img, &img), b.apply_pair(&img, &img));
        }
    }

    #[test]
    fn preview_is_stream_continuous() {
        let img = gradient_image(24, 24);
        let cfg = AugmentationConfig::default();
        let four = AugmentationPipeline::new(cfg.clone(), 12).unwrap().preview(&img, 4);
        let mut p = AugmentationPipeline::new(cfg, 12).unwrap();
        let mut two_two = p.preview(&img, 2);
        two_two.extend(p.preview(&img, 2));
        assert_eq!(four, two_two);
        assert!(four.iter().all(|i| i.dims() == img.dims()));
    }

    #[test]
    fn bad_probability_rejected() {
        let cfg = AugmentationConfig { probability: 1.5, ..Default::default() };
        assert!(AugmentationPipeline::new(cfg, 0).is_err());
    }
}
