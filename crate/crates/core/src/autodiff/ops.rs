//! Raw kernels behind the graph operations. Layout is `[N, C, H, W]`.

use super::{gemm, Float};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Padding {
    Valid,
    Same,
}

impl std::str::FromStr for Padding {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "valid" => Ok(Padding::Valid),
            "same" => Ok(Padding::Same),
            o => Err(Error::Config(format!("unknown padding `{o}`"))),
        }
    }
}

impl std::fmt::Display for Padding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Padding::Valid => "valid",
            Padding::Same => "same",
        })
    }
}

/// Output length along one axis: valid `⌊(n−k)/s⌋+1`, same `⌈n/s⌉`.
pub fn conv_out_len(n: usize, k: usize, stride: usize, padding: Padding) -> Result<usize> {
    if stride == 0 || k == 0 {
        return Err(Error::InvalidShape("kernel and stride must be >= 1".into()));
    }
    match padding {
        Padding::Valid => {
            if n < k {
                Err(Error::InvalidShape(format!("input {n} smaller than kernel {k}")))
            } else {
                Ok((n - k) / stride + 1)
            }
        }
        Padding::Same => Ok(n.div_ceil(stride)),
    }
}

/// Leading pad for `same` (the extra pixel, if any, goes at the end).
pub fn pad_before(n: usize, k: usize, stride: usize, padding: Padding) -> usize {
    match padding {
        Padding::Valid => 0,
        Padding::Same => {
            let out = n.div_ceil(stride);
            ((out - 1) * stride + k).saturating_sub(n) / 2
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Geometry {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub k: usize,
    pub stride: usize,
    pub oh: usize,
    pub ow: usize,
    pub pt: usize,
    pub pl: usize,
}

impl Geometry {
    pub fn new(shape: &[usize], k: usize, stride: usize, padding: Padding) -> Result<Self> {
        let [n, c, h, w] = shape else {
            return Err(Error::InvalidShape(format!("expected [N,C,H,W], got {shape:?}")));
        };
        let oh = conv_out_len(*h, k, stride, padding)?;
        let ow = conv_out_len(*w, k, stride, padding)?;
        Ok(Geometry {
            n: *n,
            c: *c,
            h: *h,
            w: *w,
            k,
            stride,
            oh,
            ow,
            pt: pad_before(*h, k, stride, padding),
            pl: pad_before(*w, k, stride, padding),
        })
    }

    #[inline]
    fn src(&self, o: usize, kk: usize, pad: usize, len: usize) -> Option<usize> {
        let i = (o * self.stride + kk) as isize - pad as isize;
        (i >= 0 && (i as usize) < len).then_some(i as usize)
    }

    pub fn is_pointwise(&self) -> bool {
        self.k == 1 && self.stride == 1 && self.pt == 0 && self.pl == 0
    }
}

/// One sample `[C,H,W]` → columns `[C·k·k, OH·OW]`.
pub(crate) fn im2col<T: Float>(g: &Geometry, x: &[T], cols: &mut [T]) {
    let ohw = g.oh * g.ow;
    for c in 0..g.c {
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (c * g.k + ky) * g.k + kx;
                let dst = &mut cols[row * ohw..(row + 1) * ohw];
                for oy in 0..g.oh {
                    let line = &mut dst[oy * g.ow..(oy + 1) * g.ow];
                    match g.src(oy, ky, g.pt, g.h) {
                        None => line.fill(T::zero()),
                        Some(iy) => {
                            let src = &x[(c * g.h + iy) * g.w..(c * g.h + iy + 1) * g.w];
                            for (ox, v) in line.iter_mut().enumerate() {
                                *v = match g.src(ox, kx, g.pl, g.w) {
                                    Some(ix) => src[ix],
                                    None => T::zero(),
                                };
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-add columns back into `[C,H,W]`.
pub(crate) fn col2im<T: Float>(g: &Geometry, cols: &[T], dx: &mut [T]) {
    let ohw = g.oh * g.ow;
    for c in 0..g.c {
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (c * g.k + ky) * g.k + kx;
                let src = &cols[row * ohw..(row + 1) * ohw];
                for oy in 0..g.oh {
                    let Some(iy) = g.src(oy, ky, g.pt, g.h) else { continue };
                    let base = (c * g.h + iy) * g.w;
                    for ox in 0..g.ow {
                        if let Some(ix) = g.src(ox, kx, g.pl, g.w) {
                            dx[base + ix] += src[oy * g.ow + ox];
                        }
                    }
                }
            }
        }
    }
}

/// Standard convolution forward. `w` is `[Cout, Cin, k, k]`. Returns the
/// output and, if `keep_cols`, the per-sample column buffers.
pub(crate) fn conv_forward<T: Float>(
    g: &Geometry,
    x: &[T],
    w: &[T],
    b: Option<&[T]>,
    cout: usize,
    keep_cols: bool,
) -> (Vec<T>, Vec<T>) {
    let ohw = g.oh * g.ow;
    let kdim = g.c * g.k * g.k;
    let in_len = g.c * g.h * g.w;
    let mut out = vec![T::zero(); g.n * cout * ohw];
    let pointwise = g.is_pointwise();
    let mut saved = if keep_cols && !pointwise { vec![T::zero(); g.n * kdim * ohw] } else { Vec::new() };
    let mut scratch = if pointwise { Vec::new() } else { vec![T::zero(); kdim * ohw] };
    for s in 0..g.n {
        let xs = &x[s * in_len..(s + 1) * in_len];
        let cols: &[T] = if pointwise {
            xs
        } else {
            im2col(g, xs, &mut scratch);
            if keep_cols {
                saved[s * kdim * ohw..(s + 1) * kdim * ohw].copy_from_slice(&scratch);
            }
            &scratch
        };
        let ys = &mut out[s * cout * ohw..(s + 1) * cout * ohw];
        if let Some(b) = b {
            for (co, chunk) in ys.chunks_mut(ohw).enumerate() {
                chunk.fill(b[co]);
            }
            gemm(cout, kdim, ohw, w, false, cols, false, T::one(), ys);
        } else {
            gemm(cout, kdim, ohw, w, false, cols, false, T::zero(), ys);
        }
    }
    (out, saved)
}

/// Convolution backward; accumulates into whichever gradients are given.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_backward<T: Float>(
    g: &Geometry,
    x: &[T],
    cols: &[T],
    w: &[T],
    cout: usize,
    dy: &[T],
    dx: Option<&mut [T]>,
    dw: Option<&mut [T]>,
    db: Option<&mut [T]>,
) {
    let ohw = g.oh * g.ow;
    let kdim = g.c * g.k * g.k;
    let in_len = g.c * g.h * g.w;
    let pointwise = g.is_pointwise();
    if let Some(db) = db {
        for s in 0..g.n {
            for co in 0..cout {
                let sum: T = dy[(s * cout + co) * ohw..(s * cout + co + 1) * ohw].iter().copied().sum();
                db[co] += sum;
            }
        }
    }
    if let Some(dw) = dw {
        let mut scratch = if pointwise || !cols.is_empty() { Vec::new() } else { vec![T::zero(); kdim * ohw] };
        for s in 0..g.n {
            let c: &[T] = if pointwise {
                &x[s * in_len..(s + 1) * in_len]
            } else if !cols.is_empty() {
                &cols[s * kdim * ohw..(s + 1) * kdim * ohw]
            } else {
                im2col(g, &x[s * in_len..(s + 1) * in_len], &mut scratch);
                &scratch
            };
            gemm(cout, ohw, kdim, &dy[s * cout * ohw..(s + 1) * cout * ohw], false, c, true, T::one(), dw);
        }
    }
    if let Some(dx) = dx {
        let mut dcols = vec![T::zero(); kdim * ohw];
        for s in 0..g.n {
            let dys = &dy[s * cout * ohw..(s + 1) * cout * ohw];
            let dxs = &mut dx[s * in_len..(s + 1) * in_len];
            if pointwise {
                gemm(kdim, cout, ohw, w, true, dys, false, T::one(), dxs);
            } else {
                gemm(kdim, cout, ohw, w, true, dys, false, T::zero(), &mut dcols);
                col2im(g, &dcols, dxs);
            }
        }
    }
}

/// Per-channel convolution; `w` is `[C, 1, k, k]`.
pub(crate) fn depthwise_forward<T: Float>(g: &Geometry, x: &[T], w: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); g.n * g.c * g.oh * g.ow];
    for s in 0..g.n {
        for c in 0..g.c {
            let xin = &x[(s * g.c + c) * g.h * g.w..(s * g.c + c + 1) * g.h * g.w];
            let o = &mut out[(s * g.c + c) * g.oh * g.ow..(s * g.c + c + 1) * g.oh * g.ow];
            for ky in 0..g.k {
                for kx in 0..g.k {
                    let wv = w[(c * g.k + ky) * g.k + kx];
                    for oy in 0..g.oh {
                        let Some(iy) = g.src(oy, ky, g.pt, g.h) else { continue };
                        let row = &xin[iy * g.w..(iy + 1) * g.w];
                        let orow = &mut o[oy * g.ow..(oy + 1) * g.ow];
                        for (ox, ov) in orow.iter_mut().enumerate() {
                            if let Some(ix) = g.src(ox, kx, g.pl, g.w) {
                                *ov += wv * row[ix];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

pub(crate) fn depthwise_backward<T: Float>(
    g: &Geometry,
    x: &[T],
    w: &[T],
    dy: &[T],
    mut dx: Option<&mut [T]>,
    mut dw: Option<&mut [T]>,
) {
    for s in 0..g.n {
        for c in 0..g.c {
            let base_in = (s * g.c + c) * g.h * g.w;
            let base_out = (s * g.c + c) * g.oh * g.ow;
            for ky in 0..g.k {
                for kx in 0..g.k {
                    let widx = (c * g.k + ky) * g.k + kx;
                    let wv = w[widx];
                    let mut acc = T::zero();
                    for oy in 0..g.oh {
                        let Some(iy) = g.src(oy, ky, g.pt, g.h) else { continue };
                        for ox in 0..g.ow {
                            let Some(ix) = g.src(ox, kx, g.pl, g.w) else { continue };
                            let d = dy[base_out + oy * g.ow + ox];
                            let xi = base_in + iy * g.w + ix;
                            acc += d * x[xi];
                            if let Some(dx) = dx.as_deref_mut() {
                                dx[xi] += d * wv;
                            }
                        }
                    }
                    if let Some(dw) = dw.as_deref_mut() {
                        dw[widx] += acc;
                    }
                }
            }
        }
    }
}

/// Max pooling; padded cells never win. Returns output and argmax indices.
pub(crate) fn maxpool_forward<T: Float>(g: &Geometry, x: &[T]) -> (Vec<T>, Vec<usize>) {
    let len = g.n * g.c * g.oh * g.ow;
    let mut out = Vec::with_capacity(len);
    let mut arg = Vec::with_capacity(len);
    for nc in 0..g.n * g.c {
        let base = nc * g.h * g.w;
        for oy in 0..g.oh {
            for ox in 0..g.ow {
                let mut best: Option<(T, usize)> = None;
                for ky in 0..g.k {
                    let Some(iy) = g.src(oy, ky, g.pt, g.h) else { continue };
                    for kx in 0..g.k {
                        let Some(ix) = g.src(ox, kx, g.pl, g.w) else { continue };
                        let i = base + iy * g.w + ix;
                        if best.is_none_or(|(b, _)| x[i] > b) {
                            best = Some((x[i], i));
                        }
                    }
                }
                let (v, i) = best.expect("window overlaps the input");
                out.push(v);
                arg.push(i);
            }
        }
    }
    (out, arg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_lengths() {
        assert_eq!(conv_out_len(299, 3, 2, Padding::Valid).unwrap(), 149);
        assert_eq!(conv_out_len(149, 3, 1, Padding::Valid).unwrap(), 147);
        assert_eq!(conv_out_len(147, 3, 2, Padding::Same).unwrap(), 74);
        assert_eq!(conv_out_len(19, 3, 2, Padding::Same).unwrap(), 10);
        assert!(conv_out_len(2, 3, 1, Padding::Valid).is_err());
        assert!(conv_out_len(5, 3, 0, Padding::Same).is_err());
        assert_eq!(pad_before(64, 3, 2, Padding::Same), 0);
        assert_eq!(pad_before(64, 3, 1, Padding::Same), 1);
    }

    #[test]
    fn im2col_col2im_adjoint() {
        // <im2col(x), c> == <x, col2im(c)>
        let g = Geometry::new(&[1, 2, 5, 4], 3, 2, Padding::Same).unwrap();
        let x: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let rows = 2 * 9 * g.oh * g.ow;
        let c: Vec<f64> = (0..rows).map(|i| (i as f64 * 0.11).cos()).collect();
        let mut cols = vec![0.0; rows];
        im2col(&g, &x, &mut cols);
        let mut back = vec![0.0; 40];
        col2im(&g, &c, &mut back);
        let lhs: f64 = cols.iter().zip(&c).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&back).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
