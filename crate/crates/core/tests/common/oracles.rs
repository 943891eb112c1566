//! Exhaustive and set-definition oracles for thresholding and morphology.

#![allow(dead_code)]

use halalnet::imaging::{
    dilate, erode, morph_close, morph_open, otsu_threshold_hist, BinaryMask, SeShape, StructuringElement,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Textbook Otsu: for each t, recount both classes from scratch.
pub fn otsu_oracle(hist: &[u64; 256]) -> Option<u8> {
    let n: u64 = hist.iter().sum();
    let mut best = 0.0;
    let mut best_t = None;
    for t in 0..256usize {
        let (mut c0, mut s0, mut c1, mut s1) = (0u64, 0u64, 0u64, 0u64);
        for (v, &c) in hist.iter().enumerate() {
            if v <= t {
                c0 += c;
                s0 += v as u64 * c;
            } else {
                c1 += c;
                s1 += v as u64 * c;
            }
        }
        if c0 == 0 || c1 == 0 {
            continue;
        }
        let w0 = c0 as f64 / n as f64;
        let w1 = c1 as f64 / n as f64;
        let d = s0 as f64 / c0 as f64 - s1 as f64 / c1 as f64;
        let var = w0 * w1 * d * d;
        if var > best {
            best = var;
            best_t = Some(t as u8);
        }
    }
    best_t
}

pub fn random_hist(rng: &mut ChaCha8Rng) -> [u64; 256] {
    let mut h = [0u64; 256];
    match rng.random_range(0..3) {
        0 => {
            // sparse: a handful of occupied bins
            for _ in 0..rng.random_range(2..8) {
                h[rng.random_range(0..256)] += rng.random_range(1..200);
            }
        }
        1 => {
            // bimodal
            let (m0, m1) = (rng.random_range(0..128), rng.random_range(128..256));
            for _ in 0..rng.random_range(50..3000) {
                let m = if rng.random_bool(0.5) { m0 } else { m1 };
                let v = (m as i32 + rng.random_range(-20..=20)).clamp(0, 255);
                h[v as usize] += 1;
            }
        }
        _ => {
            for b in h.iter_mut() {
                *b = rng.random_range(0..20);
            }
        }
    }
    h
}

pub fn brute_dilate(m: &BinaryMask, offs: &[(isize, isize)]) -> BinaryMask {
    let mut out = BinaryMask::filled(m.width(), m.height(), false);
    for y in 0..m.height() {
        for x in 0..m.width() {
            let hit = offs.iter().any(|&(dx, dy)| m.get_or_bg(x as isize + dx, y as isize + dy));
            out.set(x, y, hit);
        }
    }
    out
}

pub fn brute_erode(m: &BinaryMask, offs: &[(isize, isize)]) -> BinaryMask {
    let mut out = BinaryMask::filled(m.width(), m.height(), false);
    for y in 0..m.height() {
        for x in 0..m.width() {
            let all = offs.iter().all(|&(dx, dy)| m.get_or_bg(x as isize + dx, y as isize + dy));
            out.set(x, y, all);
        }
    }
    out
}

/// Element membership from the geometric definition, not from the type.
pub fn oracle_offsets(se: &StructuringElement) -> Vec<(isize, isize)> {
    let r = se.radius();
    let rr = se.size() as f64 / 2.0;
    let mut v = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            let inside = match se.shape() {
                SeShape::Square => true,
                SeShape::Ellipse => {
                    let (fx, fy) = (dx as f64, dy as f64);
                    fx * fx + fy * fy <= rr * rr
                }
            };
            if inside {
                v.push((dx, dy));
            }
        }
    }
    v
}

pub fn random_mask(rng: &mut ChaCha8Rng, max: usize) -> BinaryMask {
    let w = rng.random_range(1..=max);
    let h = rng.random_range(1..=max);
    let density = rng.random_range(0.1..0.9);
    BinaryMask::new(w, h, (0..w * h).map(|_| rng.random_bool(density)).collect())
}

pub fn random_se(rng: &mut ChaCha8Rng) -> StructuringElement {
    let size = [1, 3, 5, 7][rng.random_range(0..4)];
    if rng.random_bool(0.5) {
        StructuringElement::square(size).unwrap()
    } else {
        StructuringElement::ellipse(size).unwrap()
    }
}

/// Number of `n` random histograms on which the threshold matches the oracle.
pub fn otsu_agreement(seed: u64, n: usize) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .filter(|_| {
            let h = random_hist(&mut rng);
            match otsu_oracle(&h) {
                Some(t) => otsu_threshold_hist(&h).ok() == Some(t),
                None => otsu_threshold_hist(&h).is_err(),
            }
        })
        .count()
}

/// Number of `n` random masks (side ≤ 64) on which dilation, erosion,
/// closing and opening all match brute force.
pub fn morphology_agreement(seed: u64, n: usize) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .filter(|_| {
            let m = random_mask(&mut rng, 64);
            let se = random_se(&mut rng);
            let offs = oracle_offsets(&se);
            dilate(&m, &se) == brute_dilate(&m, &offs)
                && erode(&m, &se) == brute_erode(&m, &offs)
                && morph_close(&m, &se) == brute_erode(&brute_dilate(&m, &offs), &offs)
                && morph_open(&m, &se) == brute_dilate(&brute_erode(&m, &offs), &offs)
        })
        .count()
}
