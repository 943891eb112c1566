//! Desk-scale Siamese fixtures for end-to-end gradient checks.

#![allow(dead_code)]

use super::gradcheck::{check, check_cast, Coords, Report};
use halalnet::autodiff::{Float, Graph, NodeId, Tensor};
use halalnet::backbone::{to_batch, BackboneConfig};
use halalnet::imaging::Image;
use halalnet::siamese::SiameseModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn noise(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Image {
    let mut img = Image::zeros(w, h, 3);
    img.data_mut().iter_mut().for_each(|v| *v = rng.random());
    img
}

/// Params of the model followed by the two input batches, all as leaves.
pub fn pair_loss<'a, T: Float>(
    model: &'a SiameseModel<T>,
    labels: &[f64],
) -> impl Fn(&mut Graph<T>, &[NodeId]) -> halalnet::Result<NodeId> + 'a {
    let labels: Vec<T> = labels.iter().map(|&v| T::c(v)).collect();
    move |g: &mut Graph<T>, ids: &[NodeId]| {
        let n = model.params().len();
        let nodes = model.forward_pair_nodes(g, ids[..n].to_vec(), ids[n], ids[n + 1])?;
        let bce = g.bce(nodes.prob, &labels, T::c(1e-7))?;
        let l2 = g.l2_penalty(&nodes.head_kernels, T::c(1e-3));
        g.add_scalars(&[bce, l2])
    }
}

pub fn desk_inputs<T: Float>(seed: u64, n: usize) -> (SiameseModel<T>, Vec<Tensor<T>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model: SiameseModel<f64> = SiameseModel::build(BackboneConfig::desk(), &mut rng).unwrap();
    let a: Vec<Image> = (0..n).map(|_| noise(&mut rng, 64, 64)).collect();
    let b: Vec<Image> = (0..n).map(|_| noise(&mut rng, 64, 64)).collect();
    let mut inputs: Vec<Tensor<T>> = model.params().iter().map(Tensor::cast).collect();
    inputs.push(to_batch(&a.iter().collect::<Vec<_>>()).unwrap());
    inputs.push(to_batch(&b.iter().collect::<Vec<_>>()).unwrap());
    (model.cast(), inputs)
}

/// Pair loss plus head L2 in f64; step 1e-7 because a first-layer bias
/// moves thousands of pre-activations at once and 1e-6 lets some cross zero.
pub fn end_to_end_f64() -> Report {
    let (model, inputs) = desk_inputs::<f64>(11, 2);
    let loss = pair_loss(&model, &[1.0, 0.0]);
    check(&inputs, &loss, 1e-7, Coords::Sample(3))
}

/// f32 analytic gradient against f64 differences of the same network.
pub fn end_to_end_f32() -> Report {
    let (model, inputs) = desk_inputs::<f32>(12, 2);
    let model64: SiameseModel<f64> = model.cast();
    let loss = pair_loss(&model, &[0.0, 1.0]);
    let loss64 = pair_loss(&model64, &[0.0, 1.0]);
    check_cast(&inputs, &loss, &loss64, 1e-7, 3)
}
