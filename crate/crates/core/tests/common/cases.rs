//! Small random inputs for every differentiable op, each paired with an f64
//! and an f32 loss builder.

#![allow(dead_code)]

use super::gradcheck::{check, Build, Coords, Report};
use halalnet::autodiff::{Float, Graph, NodeId, Padding, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const F64_TOL: f64 = 1e-6;
pub const F32_TOL: f64 = 1e-3;
pub const F64_EPS: f64 = 1e-6;
pub const F32_EPS: f64 = 1e-2;

pub fn rand_tensor<T: Float>(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<T> {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| T::c(rng.random_range(lo..hi))).collect()).unwrap()
}

/// Values bounded away from zero, for kinked ops.
pub fn away_from_zero<T: Float>(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<T> {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let m = rng.random_range(0.1..1.0);
            T::c(if rng.random_bool(0.5) { m } else { -m })
        })
        .collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

fn coeffs<T: Float>(seed: u64, n: usize) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| T::c(rng.random_range(-1.0..1.0))).collect()
}

/// Project a node onto fixed random coefficients so any output becomes a scalar.
pub fn project<T: Float>(g: &mut Graph<T>, y: NodeId) -> halalnet::Result<NodeId> {
    let n = g.value(y).len();
    g.weighted_sum(y, &coeffs(n as u64, n))
}

pub struct OpCase {
    pub name: &'static str,
    pub inputs: Vec<Tensor<f64>>,
    pub b64: Box<Build<'static, f64>>,
    pub b32: Box<Build<'static, f32>>,
}

impl OpCase {
    /// Relative errors in f64 and f32 mode.
    pub fn run(&self) -> (Report, Report) {
        let r64 = check(&self.inputs, &*self.b64, F64_EPS, Coords::All);
        let in32: Vec<Tensor<f32>> = self.inputs.iter().map(|t| t.cast()).collect();
        let r32 = check(&in32, &*self.b32, F32_EPS, Coords::All);
        (r64, r32)
    }

    pub fn passes(&self) -> bool {
        let (a, b) = self.run();
        a.checked > 0 && a.rel_error < F64_TOL && b.rel_error < F32_TOL
    }
}

macro_rules! builder {
    (|$g:ident, $ids:ident| $body:expr) => {{
        fn b64($g: &mut Graph<f64>, $ids: &[NodeId]) -> halalnet::Result<NodeId> {
            $body
        }
        fn b32($g: &mut Graph<f32>, $ids: &[NodeId]) -> halalnet::Result<NodeId> {
            $body
        }
        (Box::new(b64) as Box<Build<'static, f64>>, Box::new(b32) as Box<Build<'static, f32>>)
    }};
}

fn case(name: &'static str, make: impl Fn(&mut ChaCha8Rng) -> (Vec<Tensor<f64>>, Box<Build<'static, f64>>, Box<Build<'static, f32>>)) -> OpCase {
    let mut rng = ChaCha8Rng::seed_from_u64(name.len() as u64 * 7919);
    let (inputs, b64, b32) = make(&mut rng);
    OpCase { name, inputs, b64, b32 }
}

pub const NAMES: [&str; 13] = ["conv_valid", "conv_same1", "conv_same2_odd", "pointwise", "depthwise", "separable", "dense", "relu", "sigmoid", "sub_add_flatten", "max_pool", "bce", "l2"];

pub fn op_case(name: &str) -> OpCase {
    match name {
        "conv_valid" => case("conv_valid", |rng| {
            let inputs = vec![
                rand_tensor(rng, &[2, 3, 6, 6], -1.0, 1.0),
                rand_tensor(rng, &[4, 3, 3, 3], -1.0, 1.0),
                rand_tensor(rng, &[4], -1.0, 1.0),
            ];
            let (a, b) = builder!(|g, ids| {
                let y = g.conv2d(ids[0], ids[1], Some(ids[2]), 2, Padding::Valid)?;
                project(g, y)
            });
            (inputs, a, b)
        }),
        "conv_same1" => case("conv_same1", |rng| {
            let inputs = vec![rand_tensor(rng, &[1, 2, 6, 6], -1.0, 1.0), rand_tensor(rng, &[3, 2, 3, 3], -1.0, 1.0)];
            let (a, b) = builder!(|g, ids| {
                let y = g.conv2d(ids[0], ids[1], None, 1, Padding::Same)?;
                project(g, y)
            });
            (inputs, a, b)
        }),
        "conv_same2_odd" => case("conv_same2_odd", |rng| {
            let inputs = vec![rand_tensor(rng, &[1, 2, 7, 5], -1.0, 1.0), rand_tensor(rng, &[2, 2, 3, 3], -1.0, 1.0)];
            let (a, b) = builder!(|g, ids| {
                let y = g.conv2d(ids[0], ids[1], None, 2, Padding::Same)?;
                project(g, y)
            });
            (inputs, a, b)
        }),
        "pointwise" => case("pointwise", |rng| {
            let inputs = vec![
                rand_tensor(rng, &[2, 3, 4, 4], -1.0, 1.0),
                rand_tensor(rng, &[5, 3, 1, 1], -1.0, 1.0),
                rand_tensor(rng, &[5], -1.0, 1.0),
            ];
            let (a, b) = builder!(|g, ids| {
                let y = g.conv2d(ids[0], ids[1], Some(ids[2]), 1, Padding::Valid)?;
                project(g, y)
            });
            (inputs, a, b)
        }),
        "depthwise" => case("depthwise", |rng| {
            let inputs = vec![rand_tensor(rng, &[2, 3, 6, 6], -1.0, 1.0), rand_tensor(rng, &[3, 1, 3, 3], -1.0, 1.0)];
            let (a, b) = builder!(|g, ids| {
                let y = g.depthwise_conv2d(ids[0], ids[1], 2, Padding::Same)?;
                project(g, y)
            });
            (inputs, a, b)
        }),
        "separable" => case("separable", |rng| {
            let inputs = vec![
                rand_tensor(rng, &[1, 3, 6, 6], -1.0, 1.0),
                rand_tensor(rng, &[3, 1, 3, 3], -1.0, 1.0),
                rand_tensor(rng, &[4, 3, 1, 1], -1.0, 1.0),
                rand_tensor(rng, &[4], -1.0, 1.0),
            ];
            let (a, b) = builder!(|g, ids| {
                let y = g.separable_conv2d(ids[0], ids[1], ids[2], Some(ids[3]), 1, Padding::Same)?;
                project(g, y)
            });
            (inputs, a, b)
        }),
        "dense" => case("dense", |rng| {
            let inputs = vec![
                rand_tensor(rng, &[3, 5], -1.0, 1.0),
                rand_tensor(rng, &[5, 4], -1.0, 1.0),
                rand_tensor(rng, &[4], -1.0, 1.0),
            ];
            let (a, b) = builder!(|g, ids| {
                let y = g.dense(ids[0], ids[1], Some(ids[2]))?;
                project(g, y)
            });
            (inputs, a, b)
        }),
        "relu" => case("relu", |rng| {
            let inputs = vec![away_from_zero(rng, &[2, 3, 4])];
            let (a, b) = builder!(|g, ids| {
                let y = g.relu(ids[0]);
                project(g, y)
            });
            (inputs, a, b)
        }),
        "sigmoid" => case("sigmoid", |rng| {
            let inputs = vec![rand_tensor(rng, &[10], -4.0, 4.0)];
            let (a, b) = builder!(|g, ids| {
                let y = g.sigmoid(ids[0]);
                project(g, y)
            });
            (inputs, a, b)
        }),
        "sub_add_flatten" => case("sub_add_flatten", |rng| {
            let inputs = vec![rand_tensor(rng, &[2, 2, 3, 3], -1.0, 1.0), rand_tensor(rng, &[2, 2, 3, 3], -1.0, 1.0)];
            let (a, b) = builder!(|g, ids| {
                let d = g.subtract(ids[0], ids[1])?;
                let s = g.residual_add(d, ids[0])?;
                let f = g.flatten(s);
                project(g, f)
            });
            (inputs, a, b)
        }),
        "max_pool" => case("max_pool", |rng| {
            // A permutation of well-separated values keeps each window's winner stable.
            let n = 2 * 2 * 6 * 6;
            let mut vals: Vec<f64> = (0..n).map(|i| i as f64 * 0.1).collect();
            for i in (1..n).rev() {
                vals.swap(i, rng.random_range(0..=i));
            }
            let inputs = vec![Tensor::new(vec![2, 2, 6, 6], vals).unwrap()];
            let (a, b) = builder!(|g, ids| {
                let y = g.max_pool(ids[0], 3, 2, Padding::Same)?;
                project(g, y)
            });
            (inputs, a, b)
        }),
        "bce" => case("bce", |rng| {
            let inputs = vec![rand_tensor(rng, &[6, 1], 0.25, 0.75)];
            let (a, b) = builder!(|g, ids| {
                let labels: Vec<_> = [1.0, 0.0, 0.0, 1.0, 1.0, 0.0].iter().map(|&v| Float::c(v)).collect();
                g.bce(ids[0], &labels, Float::c(1e-7))
            });
            (inputs, a, b)
        }),
        "l2" => case("l2", |rng| {
            let inputs = vec![rand_tensor(rng, &[3, 4], -1.0, 1.0), rand_tensor(rng, &[5], -1.0, 1.0)];
            let (a, b) = builder!(|g, ids| {
                let l2 = g.l2_penalty(&[ids[0], ids[1]], Float::c(0.3));
                let p = project(g, ids[1])?;
                g.add_scalars(&[l2, p])
            });
            (inputs, a, b)
        }),
        other => panic!("no op case `{other}`"),
    }
}

pub fn op_cases() -> Vec<OpCase> {
    NAMES.iter().map(|n| op_case(n)).collect()
}
