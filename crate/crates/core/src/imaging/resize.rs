use super::color::round_u8;
use super::Image;

/// Bilinear sample of channel `c` at continuous pixel-center coordinates,
/// replicating edge pixels outside the image.
#[inline]
pub fn sample_bilinear(img: &Image, x: f64, y: f64, c: usize) -> f64 {
    let (w, h) = (img.width() as isize, img.height() as isize);
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let cx = |v: isize| v.clamp(0, w - 1) as usize;
    let cy = |v: isize| v.clamp(0, h - 1) as usize;
    let (xi, yi) = (x0 as isize, y0 as isize);
    let p00 = f64::from(img.get(cx(xi), cy(yi), c));
    let p10 = f64::from(img.get(cx(xi + 1), cy(yi), c));
    let p01 = f64::from(img.get(cx(xi), cy(yi + 1), c));
    let p11 = f64::from(img.get(cx(xi + 1), cy(yi + 1), c));
    let top = p00 + (p10 - p00) * fx;
    let bot = p01 + (p11 - p01) * fx;
    top + (bot - top) * fy
}

/// Bilinear resize with half-pixel alignment.
pub fn resize_bilinear(img: &Image, width: usize, height: usize) -> Image {
    if (width, height) == (img.width(), img.height()) {
        return img.clone();
    }
    let c = img.channels();
    let sx = img.width() as f64 / width as f64;
    let sy = img.height() as f64 / height as f64;
    let mut data = Vec::with_capacity(width * height * c);
    for y in 0..height {
        let src_y = (y as f64 + 0.5) * sy - 0.5;
        for x in 0..width {
            let src_x = (x as f64 + 0.5) * sx - 0.5;
            for ch in 0..c {
                data.push(round_u8(sample_bilinear(img, src_x, src_y, ch)));
            }
        }
    }
    Image::new(width, height, c, data).expect("consistent dims")
}
