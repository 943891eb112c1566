use super::Image;
use crate::error::{Error, Result};

pub fn histogram(gray: &Image) -> Result<[u64; 256]> {
    gray.require_channels(1, "histogram")?;
    let mut h = [0u64; 256];
    for &v in gray.data() {
        h[v as usize] += 1;
    }
    Ok(h)
}

/// `w0·w1·(μ0−μ1)²` up to the constant factor `1/N²`, computed from integer
/// class counts and intensity sums so equal splits compare bitwise equal.
pub fn between_class_variance(count0: u64, sum0: u64, count1: u64, sum1: u64) -> f64 {
    if count0 == 0 || count1 == 0 {
        return 0.0;
    }
    let cross = i128::from(sum0) * i128::from(count1) - i128::from(sum1) * i128::from(count0);
    let cross = cross as f64;
    cross * cross / (count0 as f64 * count1 as f64)
}

/// Smallest threshold maximizing the between-class variance of a histogram;
/// classes are `v <= t` and `v > t`.
pub fn otsu_threshold_hist(hist: &[u64; 256]) -> Result<u8> {
    let total: u64 = hist.iter().sum();
    let total_sum: u64 = hist.iter().enumerate().map(|(v, &c)| v as u64 * c).sum();
    let mut count0 = 0u64;
    let mut sum0 = 0u64;
    let mut best = 0.0f64;
    let mut best_t = None;
    for (t, &c) in hist.iter().enumerate() {
        count0 += c;
        sum0 += t as u64 * c;
        let s = between_class_variance(count0, sum0, total - count0, total_sum - sum0);
        if s > best {
            best = s;
            best_t = Some(t as u8);
        }
    }
    best_t.ok_or(Error::DegenerateHistogram)
}

pub fn otsu_threshold(gray: &Image) -> Result<u8> {
    otsu_threshold_hist(&histogram(gray)?)
}
