use super::config::{Activation, BackboneConfig, BlockKind};
use super::shapes::{infer_shapes, output_shape, Shape};
use crate::autodiff::{xavier_uniform, Float, Graph, NodeId, Padding, Tensor};
use crate::error::{Error, Result};
use crate::imaging::{resize_bilinear, rgb_to_ycbcr, Image};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamRole {
    Kernel,
    Bias,
}

/// One learnable tensor: name, shape and the fans used for initialization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub fan_in: usize,
    pub fan_out: usize,
    pub role: ParamRole,
}

impl ParamSpec {
    pub fn kernel(name: String, shape: Vec<usize>, fan_in: usize, fan_out: usize) -> ParamSpec {
        ParamSpec { name, shape, fan_in, fan_out, role: ParamRole::Kernel }
    }

    pub fn bias(name: String, len: usize) -> ParamSpec {
        ParamSpec { name, shape: vec![len], fan_in: 0, fan_out: 0, role: ParamRole::Bias }
    }

    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

/// Every learnable tensor of the backbone, in forward order.
pub fn param_specs(cfg: &BackboneConfig) -> Result<Vec<ParamSpec>> {
    let shapes = infer_shapes(cfg)?;
    let mut specs = Vec::new();
    let mut cin = cfg.input.2;
    for (i, (b, s)) in cfg.blocks.iter().zip(&shapes).enumerate() {
        let block_in = cin;
        let k = b.kernel;
        for (j, &co) in b.channels.iter().enumerate() {
            match b.kind {
                BlockKind::Conv => {
                    specs.push(ParamSpec::kernel(format!("b{i}.l{j}.w"), vec![co, cin, k, k], cin * k * k, co * k * k));
                }
                BlockKind::Sep => {
                    specs.push(ParamSpec::kernel(format!("b{i}.l{j}.dw"), vec![cin, 1, k, k], k * k, k * k));
                    specs.push(ParamSpec::kernel(format!("b{i}.l{j}.pw"), vec![co, cin, 1, 1], cin, co));
                }
                BlockKind::MaxPool => unreachable!("pooling blocks have no layers"),
            }
            if b.bias {
                specs.push(ParamSpec::bias(format!("b{i}.l{j}.b"), co));
            }
            cin = co;
        }
        if s.projection {
            specs.push(ParamSpec::kernel(format!("b{i}.proj.w"), vec![cin, block_in, 1, 1], block_in, cin));
            if b.bias {
                specs.push(ParamSpec::bias(format!("b{i}.proj.b"), cin));
            }
        }
    }
    Ok(specs)
}

/// Exact number of learnable scalars.
pub fn param_count(cfg: &BackboneConfig) -> Result<usize> {
    Ok(param_specs(cfg)?.iter().map(ParamSpec::numel).sum())
}

/// Xavier-uniform kernels, zero biases.
pub fn init_params<T: Float, R: Rng + ?Sized>(specs: &[ParamSpec], rng: &mut R) -> Result<Vec<Tensor<T>>> {
    specs
        .iter()
        .map(|s| match s.role {
            ParamRole::Kernel => xavier_uniform(&s.shape, s.fan_in, s.fan_out, rng),
            ParamRole::Bias => Ok(Tensor::zeros(&s.shape)),
        })
        .collect()
}

/// Checks that `tensors` line up with `specs` one to one.
pub fn check_params<T: Float>(specs: &[ParamSpec], tensors: &[Tensor<T>]) -> Result<()> {
    if specs.len() != tensors.len() {
        return Err(Error::ShapeMismatch(format!("expected {} tensors, got {}", specs.len(), tensors.len())));
    }
    for (s, t) in specs.iter().zip(tensors) {
        if s.shape != t.shape() {
            return Err(Error::ShapeMismatch(format!("{}: expected {:?}, got {:?}", s.name, s.shape, t.shape())));
        }
    }
    Ok(())
}

/// Records the backbone on `g`. `params` are the nodes of the tensors from
/// [`param_specs`], in order; `x` is an `[N, C, H, W]` batch.
pub fn forward_graph<T: Float>(cfg: &BackboneConfig, g: &mut Graph<T>, params: &[NodeId], x: NodeId) -> Result<NodeId> {
    let shapes = infer_shapes(cfg)?;
    let (h, w, c) = cfg.input;
    let xs = g.shape(x);
    if xs.len() != 4 || xs[1..] != [c, h, w] {
        return Err(Error::InvalidShape(format!("backbone expects [N,{c},{h},{w}], got {xs:?}")));
    }
    let mut next = params.iter().copied();
    let mut take = || next.next().ok_or_else(|| Error::ShapeMismatch("too few backbone parameters".into()));
    let mut cur = x;
    for (b, s) in cfg.blocks.iter().zip(&shapes) {
        let block_in = cur;
        match b.kind {
            BlockKind::MaxPool => cur = g.max_pool(cur, b.kernel, b.stride, b.padding)?,
            BlockKind::Conv | BlockKind::Sep => {
                for j in 0..b.channels.len() {
                    if b.relu == Activation::Pre {
                        cur = g.relu(cur);
                    }
                    cur = if b.kind == BlockKind::Conv {
                        let wk = take()?;
                        let bias = if b.bias { Some(take()?) } else { None };
                        let stride = if j == 0 { b.stride } else { 1 };
                        g.conv2d(cur, wk, bias, stride, b.padding)?
                    } else {
                        let (dw, pw) = (take()?, take()?);
                        let bias = if b.bias { Some(take()?) } else { None };
                        g.separable_conv2d(cur, dw, pw, bias, 1, b.padding)?
                    };
                    if b.relu == Activation::Post {
                        cur = g.relu(cur);
                    }
                }
                if b.kind == BlockKind::Sep && b.stride > 1 {
                    cur = g.max_pool(cur, b.pool, b.stride, Padding::Same)?;
                }
            }
        }
        if b.residual {
            let skip = if s.projection {
                let wk = take()?;
                let bias = if b.bias { Some(take()?) } else { None };
                g.conv2d(block_in, wk, bias, b.stride, Padding::Same)?
            } else {
                block_in
            };
            cur = g.residual_add(cur, skip)?;
        }
    }
    if next.next().is_some() {
        return Err(Error::ShapeMismatch("too many backbone parameters".into()));
    }
    Ok(cur)
}

/// Converts an RGB image to network space: resized to `(width, height)`,
/// full-range YCbCr, scaled to `[0, 1]`.
pub fn network_input(img: &Image, height: usize, width: usize) -> Result<Image> {
    let sized = if img.width() == width && img.height() == height {
        img.clone()
    } else {
        resize_bilinear(img, width, height)
    };
    rgb_to_ycbcr(&sized)
}

/// Stacks same-sized images (already in network space) into `[N, C, H, W]`.
pub fn to_batch<T: Float>(images: &[&Image]) -> Result<Tensor<T>> {
    let first = images.first().ok_or_else(|| Error::Empty("no images in batch".into()))?;
    let (w, h, c) = (first.width(), first.height(), first.channels());
    let plane = w * h;
    let scale = T::c(1.0 / 255.0);
    let mut data = vec![T::zero(); images.len() * c * plane];
    for (n, img) in images.iter().enumerate() {
        if (img.width(), img.height(), img.channels()) != (w, h, c) {
            return Err(Error::InvalidShape(format!(
                "batch image {n} is {}×{}×{}, expected {w}×{h}×{c}",
                img.width(),
                img.height(),
                img.channels()
            )));
        }
        let base = n * c * plane;
        for (p, px) in img.data().chunks_exact(c).enumerate() {
            for (ch, &v) in px.iter().enumerate() {
                data[base + ch * plane + p] = T::c(f64::from(v)) * scale;
            }
        }
    }
    Tensor::new(vec![images.len(), c, h, w], data)
}

/// Backbone output for one image, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub shape: Shape,
    pub data: Vec<f32>,
}

impl FeatureMap {
    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        let (h, w, _) = self.shape;
        self.data[(c * h + y) * w + x]
    }
}

/// Runs the backbone on one network-space image.
pub fn forward(cfg: &BackboneConfig, weights: &[Tensor<f32>], img: &Image) -> Result<FeatureMap> {
    let specs = param_specs(cfg)?;
    check_params(&specs, weights)?;
    let (h, w, c) = cfg.input;
    if (img.height(), img.width(), img.channels()) != (h, w, c) {
        return Err(Error::InvalidShape(format!(
            "image is {}×{}×{}, network expects {h}×{w}×{c}",
            img.height(),
            img.width(),
            img.channels()
        )));
    }
    let mut g = Graph::new();
    let ids: Vec<NodeId> = weights.iter().map(|t| g.input(t.clone())).collect();
    let x = g.input(to_batch(&[img])?);
    let y = forward_graph(cfg, &mut g, &ids, x)?;
    let shape = output_shape(cfg)?;
    Ok(FeatureMap { shape, data: g.value(y).data().to_vec() })
}
