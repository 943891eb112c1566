use crate::autodiff::{Float, Graph, NodeId, Tensor};
use crate::backbone::{
    check_params, forward_graph, init_params, output_shape, param_specs, to_batch, BackboneConfig, ParamSpec,
};
use crate::error::{Error, Result};
use crate::imaging::Image;
use rand::Rng;

/// Widths of the dense head layers.
pub const HEAD_WIDTHS: [usize; 3] = [64, 32, 1];

/// Dense head for `features` flattened inputs: kernels `[in, out]`, biases `[out]`.
pub fn head_specs(features: usize) -> Vec<ParamSpec> {
    let mut specs = Vec::new();
    let mut fan_in = features;
    for (i, &w) in HEAD_WIDTHS.iter().enumerate() {
        specs.push(ParamSpec::kernel(format!("head.d{i}.w"), vec![fan_in, w], fan_in, w));
        specs.push(ParamSpec::bias(format!("head.d{i}.b"), w));
        fan_in = w;
    }
    specs
}

pub fn head_param_count(cfg: &BackboneConfig) -> Result<usize> {
    let (h, w, c) = output_shape(cfg)?;
    Ok(head_specs(h * w * c).iter().map(ParamSpec::numel).sum())
}

/// Shared-weight twin network. `params` holds the backbone tensors followed
/// by the head tensors, matching [`SiameseModel::specs`].
#[derive(Debug, Clone, PartialEq)]
pub struct SiameseModel<T = f32> {
    config: BackboneConfig,
    specs: Vec<ParamSpec>,
    backbone_len: usize,
    params: Vec<Tensor<T>>,
}

/// Nodes recorded for one pair batch.
pub struct PairNodes {
    pub params: Vec<NodeId>,
    /// Head kernels, the default target of the L2 penalty.
    pub head_kernels: Vec<NodeId>,
    pub logit: NodeId,
    pub prob: NodeId,
}

impl<T: Float> SiameseModel<T> {
    /// Xavier-uniform kernels everywhere, zero biases.
    pub fn build<R: Rng + ?Sized>(config: BackboneConfig, rng: &mut R) -> Result<Self> {
        let (specs, backbone_len) = Self::all_specs(&config)?;
        let params = init_params(&specs, rng)?;
        Ok(SiameseModel { config, specs, backbone_len, params })
    }

    pub fn from_params(config: BackboneConfig, params: Vec<Tensor<T>>) -> Result<Self> {
        let (specs, backbone_len) = Self::all_specs(&config)?;
        check_params(&specs, &params)?;
        Ok(SiameseModel { config, specs, backbone_len, params })
    }

    fn all_specs(config: &BackboneConfig) -> Result<(Vec<ParamSpec>, usize)> {
        let mut specs = param_specs(config)?;
        let n = specs.len();
        let (h, w, c) = output_shape(config)?;
        specs.extend(head_specs(h * w * c));
        Ok((specs, n))
    }

    pub fn config(&self) -> &BackboneConfig {
        &self.config
    }

    pub fn specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    pub fn params(&self) -> &[Tensor<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.params
    }

    pub fn backbone_params(&self) -> &[Tensor<T>] {
        &self.params[..self.backbone_len]
    }

    pub fn head_params(&self) -> &[Tensor<T>] {
        &self.params[self.backbone_len..]
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    pub fn cast<U: Float>(&self) -> SiameseModel<U> {
        SiameseModel {
            config: self.config.clone(),
            specs: self.specs.clone(),
            backbone_len: self.backbone_len,
            params: self.params.iter().map(Tensor::cast).collect(),
        }
    }

    /// Registers parameters as graph leaves (trainable when `trainable`).
    pub fn register(&self, g: &mut Graph<T>, trainable: bool) -> Vec<NodeId> {
        self.params.iter().map(|t| g.leaf(t.clone(), trainable)).collect()
    }

    /// Records `sigmoid(head(flatten(f(a) − f(b))))` for batches `a`, `b`
    /// of shape `[N, C, H, W]`. Both twins read the same parameter nodes.
    pub fn forward_pair_nodes(&self, g: &mut Graph<T>, params: Vec<NodeId>, a: NodeId, b: NodeId) -> Result<PairNodes> {
        if params.len() != self.params.len() {
            return Err(Error::ShapeMismatch(format!("{} parameter nodes for {} tensors", params.len(), self.params.len())));
        }
        if g.shape(a) != g.shape(b) {
            return Err(Error::InvalidShape(format!("pair batches differ: {:?} vs {:?}", g.shape(a), g.shape(b))));
        }
        let (bb, head) = params.split_at(self.backbone_len);
        let fa = forward_graph(&self.config, g, bb, a)?;
        let fb = forward_graph(&self.config, g, bb, b)?;
        let d = g.subtract(fa, fb)?;
        let mut x = g.flatten(d);
        let mut head_kernels = Vec::new();
        for (i, wb) in head.chunks(2).enumerate() {
            x = g.dense(x, wb[0], Some(wb[1]))?;
            head_kernels.push(wb[0]);
            if i + 1 < HEAD_WIDTHS.len() {
                x = g.relu(x);
            }
        }
        let prob = g.sigmoid(x);
        Ok(PairNodes { params, head_kernels, logit: x, prob })
    }

    /// Same-class probabilities for network-space image pairs.
    pub fn forward_pairs(&self, pairs: &[(&Image, &Image)]) -> Result<Vec<f64>> {
        let (h, w, c) = self.config.input;
        let mut out = Vec::with_capacity(pairs.len());
        for chunk in pairs.chunks(16) {
            for (i, (a, b)) in chunk.iter().enumerate() {
                for img in [a, b] {
                    if (img.height(), img.width(), img.channels()) != (h, w, c) {
                        return Err(Error::InvalidShape(format!(
                            "pair {i}: image is {}×{}×{}, network expects {h}×{w}×{c}",
                            img.height(),
                            img.width(),
                            img.channels()
                        )));
                    }
                }
            }
            let left: Vec<&Image> = chunk.iter().map(|p| p.0).collect();
            let right: Vec<&Image> = chunk.iter().map(|p| p.1).collect();
            let mut g = Graph::new();
            let ids = self.register(&mut g, false);
            let a = g.input(to_batch(&left)?);
            let b = g.input(to_batch(&right)?);
            let nodes = self.forward_pair_nodes(&mut g, ids, a, b)?;
            out.extend(g.value(nodes.logit).data().iter().map(|z| probability(z.to_f64().unwrap_or(f64::NAN))));
        }
        Ok(out)
    }

    /// Same-class probability of one pair, query first.
    pub fn forward_pair(&self, a: &Image, b: &Image) -> Result<f64> {
        Ok(self.forward_pairs(&[(a, b)])?[0])
    }
}

/// Sigmoid in f64, kept strictly inside `(0, 1)`.
fn probability(z: f64) -> f64 {
    let p = if z >= 0.0 { 1.0 / (1.0 + (-z).exp()) } else { z.exp() / (1.0 + z.exp()) };
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)
}
