use halalnet::autodiff::{Graph, Padding, Tensor};
use halalnet::backbone::{
    forward_graph, infer_shapes, init_params, output_shape, param_count, param_specs, BackboneConfig, Block,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_block(rng: &mut ChaCha8Rng) -> Block {
    let k = [1, 3, 5][rng.random_range(0..3)];
    let s = rng.random_range(1..=2);
    let layers = rng.random_range(1..=2);
    let ch: Vec<usize> = (0..layers).map(|_| rng.random_range(1..=6)).collect();
    let pad = if rng.random_bool(0.7) { Padding::Same } else { Padding::Valid };
    let b = match rng.random_range(0..3) {
        0 => Block::conv(&ch, k, s),
        1 => Block::sep(&ch, k, s),
        _ => Block::max_pool(k.max(2), s),
    };
    b.with_padding(pad).with_residual(rng.random_bool(0.4) && !ch.is_empty()).with_bias(rng.random_bool(0.5))
}

fn random_config(rng: &mut ChaCha8Rng) -> BackboneConfig {
    loop {
        let mut cfg = BackboneConfig::identity((rng.random_range(6..20), rng.random_range(6..20), rng.random_range(1..=3)));
        for _ in 0..rng.random_range(1..=4) {
            let mut b = random_block(rng);
            if b.kind == halalnet::backbone::BlockKind::MaxPool {
                b.residual = false;
                b.bias = false;
            }
            cfg.blocks.push(b);
        }
        if infer_shapes(&cfg).is_ok() {
            return cfg;
        }
    }
}

#[test]
fn forward_matches_inferred_shape_on_random_configs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..20 {
        let cfg = random_config(&mut rng);
        let text = cfg.render();
        assert_eq!(BackboneConfig::parse(&text).unwrap(), cfg);
        let specs = param_specs(&cfg).unwrap();
        let weights = init_params::<f32, _>(&specs, &mut rng).unwrap();
        assert_eq!(weights.iter().map(Tensor::len).sum::<usize>(), param_count(&cfg).unwrap());
        let (h, w, c) = cfg.input;
        let n = 2;
        let x = Tensor::new(vec![n, c, h, w], (0..n * c * h * w).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
        let mut g = Graph::new();
        let ids: Vec<_> = weights.into_iter().map(|t| g.param(t)).collect();
        let xi = g.input(x);
        let y = forward_graph(&cfg, &mut g, &ids, xi).unwrap();
        let (oh, ow, oc) = output_shape(&cfg).unwrap();
        assert_eq!(g.shape(y), &[n, oc, oh, ow], "{text}");
    }
}

#[test]
fn zeroed_projection_reduces_to_plain_block() {
    let with = BackboneConfig { input: (12, 12, 3), blocks: vec![Block::sep(&[5, 6], 3, 2).with_residual(true)] };
    let without = BackboneConfig { input: (12, 12, 3), blocks: vec![Block::sep(&[5, 6], 3, 2)] };
    let specs = param_specs(&with).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut weights = init_params::<f32, _>(&specs, &mut rng).unwrap();
    for (s, t) in specs.iter().zip(weights.iter_mut()) {
        if s.name.contains("proj") {
            *t = Tensor::zeros(&s.shape);
        } else {
            t.data_mut().iter_mut().for_each(|v| *v += 0.01);
        }
    }
    let plain: Vec<Tensor<f32>> =
        specs.iter().zip(&weights).filter(|(s, _)| !s.name.contains("proj")).map(|(_, t)| t.clone()).collect();
    assert_eq!(plain.len(), param_specs(&without).unwrap().len());
    let mut img = halalnet::imaging::Image::zeros(12, 12, 3);
    img.data_mut().iter_mut().enumerate().for_each(|(i, v)| *v = (i * 37 % 256) as u8);
    let a = halalnet::backbone::forward(&with, &weights, &img).unwrap();
    let b = halalnet::backbone::forward(&without, &plain, &img).unwrap();
    assert_eq!(a.shape, b.shape);
    assert_eq!(a.data, b.data);
    // With a live projection the outputs differ.
    let live = init_params::<f32, _>(&specs, &mut rng).unwrap();
    let c = halalnet::backbone::forward(&with, &live, &img).unwrap();
    assert_ne!(c.data, a.data);
}

#[test]
fn paper_config_contracts() {
    let cfg = BackboneConfig::paper();
    assert_eq!(output_shape(&cfg).unwrap(), (10, 10, 2048));
    assert_eq!(cfg.blocks.len(), 14);
    let sep_layers: usize = cfg
        .blocks
        .iter()
        .filter(|b| b.kind == halalnet::backbone::BlockKind::Sep)
        .map(|b| b.channels.len())
        .sum();
    assert_eq!(sep_layers, 34);
}
