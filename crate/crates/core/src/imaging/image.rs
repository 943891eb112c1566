use crate::error::{Error, Result};

/// 8-bit raster, row-major with interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Image> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidInput(format!("images have 1 or 3 channels, got {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::InvalidInput(format!(
                "data length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Image { width, height, channels, data })
    }

    pub fn filled(width: usize, height: usize, pixel: &[u8]) -> Image {
        let channels = pixel.len();
        assert!(channels == 1 || channels == 3, "1 or 3 channels");
        let data = pixel.iter().copied().cycle().take(width * height * channels).collect();
        Image { width, height, channels, data }
    }

    pub fn zeros(width: usize, height: usize, channels: usize) -> Image {
        assert!(channels == 1 || channels == 3, "1 or 3 channels");
        Image { width, height, channels, data: vec![0; width * height * channels] }
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn channels(&self) -> usize {
        self.channels
    }
    pub fn data(&self) -> &[u8] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }
    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.channels)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: u8) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    /// Extract one channel as a grayscale image.
    pub fn channel(&self, c: usize) -> Image {
        assert!(c < self.channels);
        let data = self.data.iter().skip(c).step_by(self.channels).copied().collect();
        Image { width: self.width, height: self.height, channels: 1, data }
    }

    pub(crate) fn require_channels(&self, channels: usize, op: &str) -> Result<()> {
        if self.channels != channels {
            return Err(Error::InvalidInput(format!(
                "{op} needs a {channels}-channel image, got {}",
                self.channels
            )));
        }
        Ok(())
    }
}

/// One boolean per pixel; `true` is foreground.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> BinaryMask {
        assert_eq!(bits.len(), width * height, "mask size");
        BinaryMask { width, height, bits }
    }

    pub fn filled(width: usize, height: usize, value: bool) -> BinaryMask {
        BinaryMask { width, height, bits: vec![value; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    /// Out-of-range coordinates read as background.
    #[inline]
    pub fn get_or_bg(&self, x: isize, y: isize) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height && self.get(x as usize, y as usize)
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn not(&self) -> BinaryMask {
        BinaryMask { width: self.width, height: self.height, bits: self.bits.iter().map(|b| !b).collect() }
    }

    pub fn and(&self, other: &BinaryMask) -> BinaryMask {
        assert_eq!((self.width, self.height), (other.width, other.height));
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| *a && *b).collect();
        BinaryMask { width: self.width, height: self.height, bits }
    }

    pub fn or(&self, other: &BinaryMask) -> BinaryMask {
        assert_eq!((self.width, self.height), (other.width, other.height));
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect();
        BinaryMask { width: self.width, height: self.height, bits }
    }

    /// Intersection over union; two empty masks score 1.
    pub fn iou(&self, other: &BinaryMask) -> f64 {
        let inter = self.and(other).count();
        let union = self.or(other).count();
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }

    /// `{0, 255}` grayscale rendering.
    pub fn to_image(&self) -> Image {
        let data = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        Image { width: self.width, height: self.height, channels: 1, data }
    }

    /// Foreground where the gray value is above 127.
    pub fn from_image(img: &Image) -> Result<BinaryMask> {
        img.require_channels(1, "mask decoding")?;
        Ok(BinaryMask {
            width: img.width(),
            height: img.height(),
            bits: img.data().iter().map(|&v| v > 127).collect(),
        })
    }
}
