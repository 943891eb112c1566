use super::color::round_u8;
use super::Image;
use crate::error::{Error, Result};

/// Size-to-sigma rule used when no sigma is given: `0.3·((k−1)/2 − 1) + 0.8`.
pub fn default_sigma(kernel_size: usize) -> f64 {
    0.3 * ((kernel_size as f64 - 1.0) * 0.5 - 1.0) + 0.8
}

/// Normalized 1-D Gaussian taps.
pub fn gaussian_kernel(kernel_size: usize, sigma: f64) -> Result<Vec<f64>> {
    if kernel_size % 2 == 0 {
        return Err(Error::InvalidInput(format!("gaussian kernel size must be odd, got {kernel_size}")));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidInput(format!("gaussian sigma must be positive, got {sigma}")));
    }
    let r = (kernel_size / 2) as isize;
    let taps: Vec<f64> = (-r..=r).map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = taps.iter().sum();
    Ok(taps.into_iter().map(|t| t / sum).collect())
}

/// Separable blur of one float plane with edge replication.
pub fn gaussian_blur_plane(plane: &[f32], width: usize, height: usize, kernel_size: usize, sigma: f64) -> Result<Vec<f32>> {
    assert_eq!(plane.len(), width * height);
    let taps = gaussian_kernel(kernel_size, sigma)?;
    let r = (kernel_size / 2) as isize;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;

    let mut tmp = vec![0f64; plane.len()];
    for y in 0..height {
        let row = &plane[y * width..(y + 1) * width];
        for x in 0..width {
            let mut acc = 0.0;
            for (j, t) in taps.iter().enumerate() {
                acc += t * f64::from(row[clamp(x as isize + j as isize - r, width)]);
            }
            tmp[y * width + x] = acc;
        }
    }
    let mut out = vec![0f32; plane.len()];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for (j, t) in taps.iter().enumerate() {
                acc += t * tmp[clamp(y as isize + j as isize - r, height) * width + x];
            }
            out[y * width + x] = acc as f32;
        }
    }
    Ok(out)
}

pub fn gaussian_blur_with_sigma(img: &Image, kernel_size: usize, sigma: f64) -> Result<Image> {
    let (w, h, c) = img.dims();
    let mut out = img.clone();
    for ch in 0..c {
        let plane: Vec<f32> = img.data().iter().skip(ch).step_by(c).map(|&v| f32::from(v)).collect();
        let blurred = gaussian_blur_plane(&plane, w, h, kernel_size, sigma)?;
        for (i, v) in blurred.into_iter().enumerate() {
            out.data_mut()[i * c + ch] = round_u8(f64::from(v));
        }
    }
    Ok(out)
}

/// Gaussian blur with `sigma` derived from the kernel size.
pub fn gaussian_blur(img: &Image, kernel_size: usize) -> Result<Image> {
    gaussian_blur_with_sigma(img, kernel_size, default_sigma(kernel_size))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn sigma_for_fifteen() {
        assert!((default_sigma(15) - 2.6).abs() < 1e-12);
    }

    #[test]
    fn even_kernel_rejected() {
        assert!(gaussian_blur(&Image::zeros(4, 4, 1), 4).is_err());
    }

    #[test]
    fn constant_image_unchanged() {
        let img = Image::filled(20, 13, &[90, 14, 200]);
        assert_eq!(gaussian_blur(&img, 15).unwrap(), img);
    }

    #[test]
    fn impulse_reproduces_kernel() {
        // Independent 2-D evaluation of the normalized Gaussian.
        let sigma = 2.6;
        let mut k2 = [[0f64; 15]; 15];
        let mut total = 0.0;
        for (dy, row) in k2.iter_mut().enumerate() {
            for (dx, v) in row.iter_mut().enumerate() {
                let (x, y) = (dx as f64 - 7.0, dy as f64 - 7.0);
                *v = (-(x * x + y * y) / (2.0 * sigma * sigma)).exp();
                total += *v;
            }
        }
        let (w, h) = (31, 31);
        let mut plane = vec![0f32; w * h];
        plane[15 * w + 15] = 1.0;
        let out = gaussian_blur_plane(&plane, w, h, 15, sigma).unwrap();
        let mut sum = 0.0;
        for y in 0..h {
            for x in 0..w {
                let v = f64::from(out[y * w + x]);
                sum += v;
                let (dx, dy) = (x as isize - 15, y as isize - 15);
                if dx.abs() <= 7 && dy.abs() <= 7 {
                    let want = k2[(dy + 7) as usize][(dx + 7) as usize] / total;
                    assert!((v - want).abs() < 1e-7, "({x},{y}) {v} vs {want}");
                } else {
                    assert_eq!(v, 0.0);
                }
            }
        }
        assert!((sum - 1.0).abs() < 1e-6);
    }

    #[test]
    fn periodic_mean_and_range() {
        // Away from the borders the blur acts as a circular convolution of the
        // periodic pattern, so the mean over one full period is preserved.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let period = 8;
        let tile: Vec<f32> = (0..period * period).map(|_| rng.random::<f32>() * 255.0).collect();
        let n = period * 8;
        let plane: Vec<f32> = (0..n * n).map(|i| tile[(i / n % period) * period + (i % n % period)]).collect();
        let out = gaussian_blur_plane(&plane, n, n, 15, 2.6).unwrap();
        let (lo, hi) = tile.iter().fold((f32::MAX, f32::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(out.iter().all(|&v| v >= lo - 1e-3 && v <= hi + 1e-3));
        let start = n / 2 - period / 2;
        let mut m_in = 0.0;
        let mut m_out = 0.0;
        for y in start..start + period {
            for x in start..start + period {
                m_in += f64::from(plane[y * n + x]);
                m_out += f64::from(out[y * n + x]);
            }
        }
        let cells = (period * period) as f64;
        assert!((m_in / cells - m_out / cells).abs() / 255.0 < 1e-6);
    }
}
