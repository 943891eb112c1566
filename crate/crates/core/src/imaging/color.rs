use super::Image;
use crate::error::Result;

/// Round half-up, then clamp to the 8-bit range.
#[inline]
pub fn round_u8(v: f64) -> u8 {
    let r = (v + 0.5).floor();
    r.clamp(0.0, 255.0) as u8
}

/// Full-range BT.601 RGB → YCbCr for one pixel.
#[inline]
pub fn rgb_to_ycbcr_pixel(r: u8, g: u8, b: u8) -> [u8; 3] {
    let (r, g, b) = (f64::from(r), f64::from(g), f64::from(b));
    let y = 0.299 * r + 0.587 * g + 0.114 * b;
    let cb = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b;
    let cr = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b;
    [round_u8(y), round_u8(cb), round_u8(cr)]
}

pub fn rgb_to_ycbcr(img: &Image) -> Result<Image> {
    img.require_channels(3, "rgb_to_ycbcr")?;
    let mut data = Vec::with_capacity(img.data().len());
    for px in img.data().chunks_exact(3) {
        data.extend_from_slice(&rgb_to_ycbcr_pixel(px[0], px[1], px[2]));
    }
    Image::new(img.width(), img.height(), 3, data)
}

/// Inverse full-range BT.601 transform.
pub fn ycbcr_to_rgb(img: &Image) -> Result<Image> {
    img.require_channels(3, "ycbcr_to_rgb")?;
    let mut data = Vec::with_capacity(img.data().len());
    for px in img.data().chunks_exact(3) {
        let (y, cb, cr) = (f64::from(px[0]), f64::from(px[1]) - 128.0, f64::from(px[2]) - 128.0);
        data.push(round_u8(y + 1.402 * cr));
        data.push(round_u8(y - 0.344136 * cb - 0.714136 * cr));
        data.push(round_u8(y + 1.772 * cb));
    }
    Image::new(img.width(), img.height(), 3, data)
}
