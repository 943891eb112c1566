use super::config::{BackboneConfig, Block, BlockKind};
use crate::autodiff::{conv_out_len, Padding};
use crate::error::{Error, Result};

/// `(height, width, channels)`.
pub type Shape = (usize, usize, usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockShapes {
    /// Output of each layer of the block, then of its trailing pool if any.
    pub stages: Vec<Shape>,
    pub output: Shape,
    /// Whether a residual connection needs a 1×1 projection.
    pub projection: bool,
}

fn spatial(n: usize, k: usize, s: usize, p: Padding, what: &str) -> std::result::Result<usize, String> {
    conv_out_len(n, k, s, p).map_err(|_| format!("{what}: input extent {n} smaller than kernel {k}"))
}

fn block_shapes(b: &Block, input: Shape) -> std::result::Result<BlockShapes, String> {
    if b.stride == 0 || b.kernel == 0 {
        return Err("kernel and stride must be ≥ 1".into());
    }
    let (mut h, mut w, mut c) = input;
    let mut stages = Vec::new();
    match b.kind {
        BlockKind::MaxPool => {
            if !b.channels.is_empty() || b.residual || b.bias {
                return Err("maxpool takes no channels, bias or residual".into());
            }
            h = spatial(h, b.kernel, b.stride, b.padding, "maxpool")?;
            w = spatial(w, b.kernel, b.stride, b.padding, "maxpool")?;
            stages.push((h, w, c));
        }
        BlockKind::Conv | BlockKind::Sep => {
            if b.channels.is_empty() {
                return Err("needs at least one layer in `channels`".into());
            }
            if b.channels.contains(&0) {
                return Err("channel counts must be ≥ 1".into());
            }
            for (i, &co) in b.channels.iter().enumerate() {
                let s = if b.kind == BlockKind::Conv && i == 0 { b.stride } else { 1 };
                h = spatial(h, b.kernel, s, b.padding, "layer")?;
                w = spatial(w, b.kernel, s, b.padding, "layer")?;
                c = co;
                stages.push((h, w, c));
            }
            if b.kind == BlockKind::Sep && b.stride > 1 {
                h = spatial(h, b.pool, b.stride, Padding::Same, "pool")?;
                w = spatial(w, b.pool, b.stride, Padding::Same, "pool")?;
                stages.push((h, w, c));
            }
        }
    }
    let output = (h, w, c);
    let mut projection = false;
    if b.residual {
        if output != input {
            let ph = spatial(input.0, 1, b.stride, Padding::Same, "projection")?;
            let pw = spatial(input.1, 1, b.stride, Padding::Same, "projection")?;
            if (ph, pw) != (h, w) {
                return Err(format!(
                    "residual projection yields {ph}×{pw} but the block outputs {h}×{w}"
                ));
            }
            projection = true;
        }
    }
    Ok(BlockShapes { stages, output, projection })
}

/// Shapes through every block; errors name the offending block.
pub fn infer_shapes(cfg: &BackboneConfig) -> Result<Vec<BlockShapes>> {
    let (h, w, c) = cfg.input;
    if h == 0 || w == 0 || c == 0 {
        return Err(Error::Config(format!("input shape {:?} has a zero dimension", cfg.input)));
    }
    let mut cur = cfg.input;
    let mut out = Vec::with_capacity(cfg.blocks.len());
    for (index, b) in cfg.blocks.iter().enumerate() {
        let s = block_shapes(b, cur).map_err(|msg| Error::Block { index, msg })?;
        cur = s.output;
        out.push(s);
    }
    Ok(out)
}

/// Final feature shape.
pub fn output_shape(cfg: &BackboneConfig) -> Result<Shape> {
    Ok(infer_shapes(cfg)?.last().map_or(cfg.input, |s| s.output))
}
