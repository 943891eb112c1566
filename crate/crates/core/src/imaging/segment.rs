use super::{gaussian_blur_with_sigma, morph_close, morph_open, otsu_threshold, rgb_to_ycbcr};
use super::{BinaryMask, Image, StructuringElement};
use crate::error::{Error, Result};
use crate::kv::{self, parse_bool, Reader};

/// YCbCr channel fed to the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Y,
    Cb,
    Cr,
}

impl Channel {
    pub fn index(self) -> usize {
        match self {
            Channel::Y => 0,
            Channel::Cb => 1,
            Channel::Cr => 2,
        }
    }
}

impl Channel {
    pub fn name(self) -> &'static str {
        match self {
            Channel::Y => "y",
            Channel::Cb => "cb",
            Channel::Cr => "cr",
        }
    }
}

impl std::str::FromStr for Channel {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "y" => Ok(Channel::Y),
            "cb" => Ok(Channel::Cb),
            "cr" => Ok(Channel::Cr),
            other => Err(format!("unknown channel `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationParams {
    pub blur_kernel: usize,
    /// `None` derives sigma from the kernel size.
    pub blur_sigma: Option<f64>,
    pub channel: Channel,
    /// Foreground is `value <= t` instead of `value > t`.
    pub invert: bool,
    pub close_se: StructuringElement,
    pub open_se: StructuringElement,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        let se = StructuringElement::square(5).expect("odd size");
        SegmentationParams {
            blur_kernel: 15,
            blur_sigma: None,
            channel: Channel::Cr,
            invert: false,
            close_se: se,
            open_se: se,
        }
    }
}

impl SegmentationParams {
    /// Overrides fields from `(key, value)` pairs. Keys: `blur_kernel`,
    /// `blur_sigma` (`auto` or a number), `channel`, `invert`, `close_size`,
    /// `open_size`, `se_shape`.
    pub fn apply(&mut self, pairs: Vec<(String, String)>) -> Result<()> {
        let mut r = Reader::from_pairs(pairs, "segmentation");
        self.blur_kernel = r.take_or("blur_kernel", self.blur_kernel)?;
        if let Some(v) = r.take_str("blur_sigma") {
            self.blur_sigma = match v.as_str() {
                "auto" => None,
                s => Some(s.parse().map_err(|_| Error::Config(format!("`blur_sigma = {s}` is not a number")))?),
            };
        }
        if let Some(v) = r.take_str("channel") {
            self.channel = v.parse().map_err(Error::Config)?;
        }
        if let Some(v) = r.take_str("invert") {
            self.invert = parse_bool(&v).ok_or_else(|| Error::Config(format!("`invert = {v}` is not a boolean")))?;
        }
        let shape = r.take_or("se_shape", self.close_se.shape())?;
        let close = r.take_or("close_size", self.close_se.size())?;
        let open = r.take_or("open_size", self.open_se.size())?;
        r.finish()?;
        self.close_se = StructuringElement::new(shape, close)?;
        self.open_se = StructuringElement::new(shape, open)?;
        if self.blur_kernel % 2 == 0 {
            return Err(Error::Config(format!("blur_kernel {} must be odd", self.blur_kernel)));
        }
        Ok(())
    }

    pub fn render(&self) -> String {
        kv::render(&[
            ("blur_kernel", self.blur_kernel.to_string()),
            ("blur_sigma", self.blur_sigma.map_or("auto".to_string(), |s| s.to_string())),
            ("channel", self.channel.name().to_string()),
            ("invert", self.invert.to_string()),
            ("se_shape", self.close_se.shape().name().to_string()),
            ("close_size", self.close_se.size().to_string()),
            ("open_size", self.open_se.size().to_string()),
        ])
    }
}

/// Foreground where `value > t`.
pub fn binarize(gray: &Image, t: u8) -> BinaryMask {
    assert_eq!(gray.channels(), 1, "binarize takes a single-channel image");
    BinaryMask::new(gray.width(), gray.height(), gray.data().iter().map(|&v| v > t).collect())
}

/// Every intermediate of the segmentation chain, in order.
#[derive(Debug, Clone)]
pub struct SegmentationTrace {
    pub blurred: Image,
    pub ycbcr: Image,
    pub channel: Image,
    pub threshold: u8,
    pub binary: BinaryMask,
    pub closed: BinaryMask,
    pub opened: BinaryMask,
    pub masked: Image,
}

pub fn segment_cut_traced(img: &Image, params: &SegmentationParams) -> Result<SegmentationTrace> {
    img.require_channels(3, "segment_cut")?;
    let sigma = params.blur_sigma.unwrap_or_else(|| super::default_sigma(params.blur_kernel));
    let blurred = gaussian_blur_with_sigma(img, params.blur_kernel, sigma)?;
    let ycbcr = rgb_to_ycbcr(&blurred)?;
    let channel = ycbcr.channel(params.channel.index());
    let threshold = otsu_threshold(&channel)?;
    let mut binary = binarize(&channel, threshold);
    if params.invert {
        binary = binary.not();
    }
    let closed = morph_close(&binary, &params.close_se);
    let opened = morph_open(&closed, &params.open_se);
    let masked = apply_mask(img, &opened);
    Ok(SegmentationTrace { blurred, ycbcr, channel, threshold, binary, closed, opened, masked })
}

/// Segment the cut region; returns the mask and the source with background zeroed.
pub fn segment_cut(img: &Image, params: &SegmentationParams) -> Result<(BinaryMask, Image)> {
    let t = segment_cut_traced(img, params)?;
    Ok((t.opened, t.masked))
}

fn apply_mask(img: &Image, mask: &BinaryMask) -> Image {
    let mut out = img.clone();
    let c = img.channels();
    for (i, &fg) in mask.bits().iter().enumerate() {
        if !fg {
            out.data_mut()[i * c..(i + 1) * c].fill(0);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{dilate, erode, gaussian_blur};

    fn blob_image() -> (Image, BinaryMask) {
        let (w, h) = (64, 64);
        let mut img = Image::filled(w, h, &[128, 128, 128]);
        let mut gt = BinaryMask::filled(w, h, false);
        for y in 0..h {
            for x in 0..w {
                let (dx, dy) = (x as f64 - 30.0, y as f64 - 34.0);
                if dx * dx + dy * dy <= 12.0 * 12.0 {
                    img.data_mut()[(y * w + x) * 3..(y * w + x) * 3 + 3].copy_from_slice(&[210, 30, 40]);
                    gt.set(x, y, true);
                }
            }
        }
        (img, gt)
    }

    #[test]
    fn params_from_pairs() {
        let mut p = SegmentationParams::default();
        let kv = |k: &str, v: &str| (k.to_string(), v.to_string());
        p.apply(vec![kv("channel", "y"), kv("invert", "true"), kv("open_size", "3"), kv("blur_sigma", "1.5")]).unwrap();
        assert_eq!((p.channel, p.invert, p.open_se.size(), p.close_se.size()), (Channel::Y, true, 3, 5));
        assert_eq!(p.blur_sigma, Some(1.5));
        let mut q = SegmentationParams::default();
        let text = crate::kv::Document::parse(&p.render()).unwrap().top.entries;
        q.apply(text).unwrap();
        assert_eq!(q, p);
        assert!(matches!(q.apply(vec![kv("bogus", "1")]), Err(Error::UnknownKey(_))));
        assert!(SegmentationParams::default().apply(vec![kv("blur_kernel", "4")]).is_err());
    }

    #[test]
    fn red_blob_recovered_within_one_pixel() {
        let (img, gt) = blob_image();
        let (mask, masked) = segment_cut(&img, &SegmentationParams::default()).unwrap();
        let se = StructuringElement::square(3).unwrap();
        let outer = dilate(&gt, &se);
        let inner = erode(&gt, &se);
        assert_eq!(mask.and(&outer), mask, "mask leaks beyond the 1px band");
        assert_eq!(inner.and(&mask), inner, "mask misses the blob core");
        for (i, &fg) in mask.bits().iter().enumerate() {
            let px = &masked.data()[i * 3..i * 3 + 3];
            if fg {
                assert_eq!(px, &img.data()[i * 3..i * 3 + 3]);
            } else {
                assert_eq!(px, &[0, 0, 0]);
            }
        }
    }

    #[test]
    fn uniform_image_is_degenerate() {
        let img = Image::filled(32, 32, &[120, 120, 120]);
        assert!(matches!(
            segment_cut(&img, &SegmentationParams::default()),
            Err(crate::Error::DegenerateHistogram)
        ));
    }

    #[test]
    fn stages_match_single_op_calls() {
        let (img, _) = blob_image();
        let p = SegmentationParams::default();
        let t = segment_cut_traced(&img, &p).unwrap();
        assert_eq!(t.blurred, gaussian_blur(&img, 15).unwrap());
        assert_eq!(t.ycbcr, rgb_to_ycbcr(&t.blurred).unwrap());
        assert_eq!(t.channel, t.ycbcr.channel(2));
        assert_eq!(t.threshold, otsu_threshold(&t.channel).unwrap());
        assert_eq!(t.binary, binarize(&t.channel, t.threshold));
        assert_eq!(t.closed, morph_close(&t.binary, &p.close_se));
        assert_eq!(t.opened, morph_open(&t.closed, &p.open_se));
    }

    #[test]
    fn invert_flips_polarity() {
        let (img, _) = blob_image();
        let p = SegmentationParams { invert: true, ..Default::default() };
        let t = segment_cut_traced(&img, &p).unwrap();
        assert_eq!(t.binary, binarize(&t.channel, t.threshold).not());
    }

    #[test]
    fn binarize_cases() {
        let zero = Image::zeros(4, 4, 1);
        assert_eq!(binarize(&zero, 0).count(), 0);
        let full = Image::filled(4, 4, &[255]);
        assert_eq!(binarize(&full, 0).count(), 16);
        let checker: Vec<u8> = (0..16).map(|i| if (i / 4 + i % 4) % 2 == 0 { 255 } else { 0 }).collect();
        let m = binarize(&Image::new(4, 4, 1, checker.clone()).unwrap(), 128);
        for (b, v) in m.bits().iter().zip(&checker) {
            assert_eq!(*b, *v == 255);
        }
    }
}
