use crate::autodiff::Padding;
use crate::error::{Error, Result};
use crate::kv::{self, Document, Reader};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    /// Standard convolutions.
    Conv,
    /// Depthwise-separable convolutions; a stride above 1 is realized by a
    /// trailing max-pool.
    Sep,
    MaxPool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    /// ReLU before each layer.
    Pre,
    /// ReLU after each layer.
    Post,
    None,
}

macro_rules! text_enum {
    ($ty:ident { $($v:ident => $s:literal),* }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$v => $s),* })
            }
        }
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.trim() {
                    $($s => Ok($ty::$v),)*
                    other => Err(Error::Config(format!("unknown {} `{other}`", stringify!($ty)))),
                }
            }
        }
    };
}

text_enum!(BlockKind { Conv => "conv", Sep => "sep", MaxPool => "maxpool" });
text_enum!(Activation { Pre => "pre", Post => "post", None => "none" });

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub kind: BlockKind,
    pub kernel: usize,
    pub stride: usize,
    /// Output channels of each layer; empty for pooling blocks.
    pub channels: Vec<usize>,
    pub padding: Padding,
    pub residual: bool,
    pub bias: bool,
    pub relu: Activation,
    /// Window of the trailing pool of a strided `sep` block.
    pub pool: usize,
}

impl Block {
    pub fn conv(channels: &[usize], kernel: usize, stride: usize) -> Block {
        Block {
            kind: BlockKind::Conv,
            kernel,
            stride,
            channels: channels.to_vec(),
            padding: Padding::Same,
            residual: false,
            bias: true,
            relu: Activation::Post,
            pool: 3,
        }
    }

    pub fn sep(channels: &[usize], kernel: usize, stride: usize) -> Block {
        Block { kind: BlockKind::Sep, relu: Activation::Pre, ..Block::conv(channels, kernel, stride) }
    }

    pub fn max_pool(kernel: usize, stride: usize) -> Block {
        Block { kind: BlockKind::MaxPool, relu: Activation::None, bias: false, ..Block::conv(&[], kernel, stride) }
    }

    pub fn with_residual(mut self, on: bool) -> Block {
        self.residual = on;
        self
    }

    pub fn with_padding(mut self, p: Padding) -> Block {
        self.padding = p;
        self
    }

    pub fn with_bias(mut self, on: bool) -> Block {
        self.bias = on;
        self
    }

    pub fn with_relu(mut self, a: Activation) -> Block {
        self.relu = a;
        self
    }
}

/// Declarative layer stack. Input is `(height, width, channels)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BackboneConfig {
    pub input: (usize, usize, usize),
    pub blocks: Vec<Block>,
}

impl BackboneConfig {
    pub fn identity(input: (usize, usize, usize)) -> BackboneConfig {
        BackboneConfig { input, blocks: Vec::new() }
    }

    /// The Xception-like configuration: 299×299×3 in, 10×10×2048 out.
    pub fn paper() -> BackboneConfig {
        Self::parse(include_str!("../../configs/paper.cfg")).expect("bundled paper.cfg")
    }

    /// Small 64×64 configuration used for training on a desktop.
    pub fn desk() -> BackboneConfig {
        Self::parse(include_str!("../../configs/desk.cfg")).expect("bundled desk.cfg")
    }

    pub fn load(path: &Path) -> Result<BackboneConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<BackboneConfig> {
        let doc = Document::parse(text)?;
        let mut top = Reader::new(&doc.top, "backbone");
        let input: Vec<usize> =
            top.take_list("input")?.ok_or_else(|| Error::Config("backbone: missing `input = H,W,C`".into()))?;
        let [h, w, c] = input[..] else {
            return Err(Error::Config(format!("backbone: input needs 3 dims, got {input:?}")));
        };
        top.finish()?;
        let mut blocks = Vec::new();
        for (index, sec) in doc.sections.iter().enumerate() {
            if sec.name != "block" {
                return Err(Error::Config(format!("line {}: unknown section [{}]", sec.line, sec.name)));
            }
            let blk = |e: Error| match e {
                Error::Block { .. } => e,
                other => Error::Block { index, msg: other.to_string() },
            };
            blocks.push(parse_block(Reader::new(sec, format!("block {index}"))).map_err(blk)?);
        }
        let cfg = BackboneConfig { input: (h, w, c), blocks };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical text form; `parse(render(c)) == c`.
    pub fn render(&self) -> String {
        let (h, w, c) = self.input;
        let mut out = kv::render(&[("input", format!("{h},{w},{c}"))]);
        for b in &self.blocks {
            out.push_str("\n[block]\n");
            let mut pairs = vec![("kind", b.kind.to_string()), ("kernel", b.kernel.to_string())];
            pairs.push(("stride", b.stride.to_string()));
            if b.kind != BlockKind::MaxPool {
                let ch: Vec<String> = b.channels.iter().map(|c| c.to_string()).collect();
                pairs.push(("channels", ch.join(",")));
            }
            pairs.push(("padding", b.padding.to_string()));
            if b.kind != BlockKind::MaxPool {
                pairs.push(("residual", b.residual.to_string()));
                pairs.push(("bias", b.bias.to_string()));
                pairs.push(("relu", b.relu.to_string()));
            }
            if b.kind == BlockKind::Sep {
                pairs.push(("pool", b.pool.to_string()));
            }
            out.push_str(&kv::render(&pairs));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        super::shapes::infer_shapes(self).map(|_| ())
    }
}

fn parse_block(mut r: Reader) -> Result<Block> {
    let kind: BlockKind = r.take_str("kind").ok_or_else(|| Error::Config("missing `kind`".into()))?.parse()?;
    let mut b = match kind {
        BlockKind::Conv => Block::conv(&[], 3, 1),
        BlockKind::Sep => Block::sep(&[], 3, 1),
        BlockKind::MaxPool => Block::max_pool(3, 1),
    };
    b.kernel = r.take_or("kernel", b.kernel)?;
    b.stride = r.take_or("stride", b.stride)?;
    if let Some(p) = r.take_str("padding") {
        b.padding = p.parse()?;
    }
    if kind != BlockKind::MaxPool {
        b.channels = r.take_list("channels")?.ok_or_else(|| Error::Config("missing `channels`".into()))?;
        for (key, slot) in [("residual", &mut b.residual), ("bias", &mut b.bias)] {
            if let Some(v) = r.take_str(key) {
                *slot = kv::parse_bool(&v).ok_or_else(|| Error::Config(format!("`{key} = {v}` is not a boolean")))?;
            }
        }
        if let Some(a) = r.take_str("relu") {
            b.relu = a.parse()?;
        }
    }
    if kind == BlockKind::Sep {
        b.pool = r.take_or("pool", b.pool)?;
    }
    r.finish()?;
    Ok(b)
}

impl fmt::Display for BackboneConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}
