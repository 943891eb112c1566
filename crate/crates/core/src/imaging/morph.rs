use super::BinaryMask;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeShape {
    Square,
    Ellipse,
}

impl SeShape {
    pub fn name(self) -> &'static str {
        match self {
            SeShape::Square => "square",
            SeShape::Ellipse => "ellipse",
        }
    }
}

impl std::str::FromStr for SeShape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square" => Ok(SeShape::Square),
            "ellipse" => Ok(SeShape::Ellipse),
            other => Err(Error::Config(format!("unknown structuring element `{other}` (square, ellipse)"))),
        }
    }
}

/// Centered, symmetric structuring element of odd size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StructuringElement {
    shape: SeShape,
    size: usize,
}

impl StructuringElement {
    pub fn new(shape: SeShape, size: usize) -> Result<Self> {
        if size == 0 || size % 2 == 0 {
            return Err(Error::InvalidInput(format!("structuring element size must be odd and >= 1, got {size}")));
        }
        Ok(StructuringElement { shape, size })
    }

    pub fn square(size: usize) -> Result<Self> {
        Self::new(SeShape::Square, size)
    }

    pub fn ellipse(size: usize) -> Result<Self> {
        Self::new(SeShape::Ellipse, size)
    }

    pub fn shape(&self) -> SeShape {
        self.shape
    }
    pub fn size(&self) -> usize {
        self.size
    }
    pub fn radius(&self) -> isize {
        (self.size / 2) as isize
    }

    /// Horizontal half-extent of the element on row `dy`, if the row is used.
    pub fn row_extent(&self, dy: isize) -> Option<isize> {
        let r = self.radius();
        if dy.abs() > r {
            return None;
        }
        match self.shape {
            SeShape::Square => Some(r),
            SeShape::Ellipse => {
                // Disc of radius size/2 sampled at integer offsets.
                let rr = self.size as f64 / 2.0;
                let y = dy as f64 / rr;
                let half = (rr * (1.0 - y * y).max(0.0).sqrt()).floor() as isize;
                Some(half.min(r))
            }
        }
    }

    /// All member offsets `(dx, dy)`.
    pub fn offsets(&self) -> Vec<(isize, isize)> {
        let r = self.radius();
        let mut out = Vec::new();
        for dy in -r..=r {
            if let Some(h) = self.row_extent(dy) {
                out.extend((-h..=h).map(|dx| (dx, dy)));
            }
        }
        out
    }
}

/// 1-D sliding OR (dilate) or AND (erode) along rows, off-image = background.
fn row_pass(src: &BinaryMask, half: isize, dilate: bool) -> Vec<bool> {
    let (w, h) = (src.width() as isize, src.height());
    let mut out = vec![false; src.bits().len()];
    for y in 0..h {
        let row = &src.bits()[y * w as usize..(y + 1) * w as usize];
        // prefix counts of foreground
        let mut pre = vec![0u32; w as usize + 1];
        for x in 0..w as usize {
            pre[x + 1] = pre[x] + u32::from(row[x]);
        }
        for x in 0..w {
            let lo = x - half;
            let hi = x + half;
            let clo = lo.max(0) as usize;
            let chi = (hi.min(w - 1) + 1) as usize;
            let fg = pre[chi] - pre[clo];
            out[y * w as usize + x as usize] = if dilate {
                fg > 0
            } else {
                lo >= 0 && hi < w && fg as isize == 2 * half + 1
            };
        }
    }
    out
}

fn transpose(bits: &[bool], w: usize, h: usize) -> Vec<bool> {
    let mut t = vec![false; bits.len()];
    for y in 0..h {
        for x in 0..w {
            t[x * h + y] = bits[y * w + x];
        }
    }
    t
}

fn square_pass(mask: &BinaryMask, r: isize, dilate: bool) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    let rows = BinaryMask::new(w, h, row_pass(mask, r, dilate));
    let t = BinaryMask::new(h, w, transpose(rows.bits(), w, h));
    let cols = row_pass(&t, r, dilate);
    BinaryMask::new(w, h, transpose(&cols, h, w))
}

fn span_pass(mask: &BinaryMask, se: &StructuringElement, dilate: bool) -> BinaryMask {
    let (w, h) = (mask.width() as isize, mask.height() as isize);
    let r = se.radius();
    // Horizontal runs per row via prefix sums, then per-row extents.
    let mut pre = vec![0u32; ((w + 1) * h) as usize];
    for y in 0..h {
        for x in 0..w {
            let i = (y * (w + 1) + x) as usize;
            pre[i + 1] = pre[i] + u32::from(mask.get(x as usize, y as usize));
        }
    }
    let mut out = BinaryMask::filled(w as usize, h as usize, false);
    for y in 0..h {
        for x in 0..w {
            let mut hit = !dilate;
            for dy in -r..=r {
                let Some(half) = se.row_extent(dy) else { continue };
                let yy = y + dy;
                let (lo, hi) = (x - half, x + half);
                if yy < 0 || yy >= h {
                    if !dilate {
                        hit = false;
                        break;
                    }
                    continue;
                }
                let base = (yy * (w + 1)) as usize;
                let clo = lo.max(0) as usize;
                let chi = (hi.min(w - 1) + 1) as usize;
                let fg = if chi > clo { pre[base + chi] - pre[base + clo] } else { 0 };
                if dilate {
                    if fg > 0 {
                        hit = true;
                        break;
                    }
                } else if lo < 0 || hi >= w || fg as isize != hi - lo + 1 {
                    hit = false;
                    break;
                }
            }
            out.set(x as usize, y as usize, hit);
        }
    }
    out
}

/// Dilation; pixels outside the image count as background.
pub fn dilate(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    match se.shape() {
        SeShape::Square => square_pass(mask, se.radius(), true),
        SeShape::Ellipse => span_pass(mask, se, true),
    }
}

/// Erosion; a pixel survives only if every element offset lands on an
/// in-image foreground pixel.
pub fn erode(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    match se.shape() {
        SeShape::Square => square_pass(mask, se.radius(), false),
        SeShape::Ellipse => span_pass(mask, se, false),
    }
}

/// Dilation followed by erosion: fills foreground holes smaller than `se`.
pub fn morph_close(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    erode(&dilate(mask, se), se)
}

/// Erosion followed by dilation: removes foreground specks smaller than `se`.
pub fn morph_open(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    dilate(&erode(mask, se), se)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_must_be_odd() {
        assert!(StructuringElement::square(4).is_err());
        assert!(StructuringElement::ellipse(0).is_err());
        assert_eq!(StructuringElement::square(3).unwrap().offsets().len(), 9);
    }

    #[test]
    fn ellipse_is_a_disc() {
        let se = StructuringElement::ellipse(5).unwrap();
        let offs = se.offsets();
        assert!(offs.contains(&(2, 1)));
        assert!(!offs.contains(&(2, 2)));
        assert_eq!(offs.len(), 21);
        assert_eq!(StructuringElement::ellipse(1).unwrap().offsets(), vec![(0, 0)]);
    }

    #[test]
    fn closing_fills_center_hole() {
        let mut m = BinaryMask::filled(9, 9, false);
        for y in 2..7 {
            for x in 2..7 {
                m.set(x, y, true);
            }
        }
        m.set(4, 4, false);
        let se = StructuringElement::square(3).unwrap();
        let c = morph_close(&m, &se);
        assert!(c.get(4, 4));
        let mut filled = m.clone();
        filled.set(4, 4, true);
        assert_eq!(c, filled);
    }

    #[test]
    fn opening_removes_isolated_pixel() {
        let mut m = BinaryMask::filled(7, 7, false);
        m.set(3, 3, true);
        let o = morph_open(&m, &StructuringElement::square(3).unwrap());
        assert_eq!(o.count(), 0);
    }

    #[test]
    fn trivial_masks() {
        let se = StructuringElement::square(5).unwrap();
        let bg = BinaryMask::filled(10, 8, false);
        assert_eq!(morph_close(&bg, &se), bg);
        let fg = BinaryMask::filled(10, 8, true);
        assert_eq!(morph_open(&fg, &se), fg);
    }
}
