//! Central finite-difference oracle. Lives in test code so it stays
//! independent of the backward pass it checks.

#![allow(dead_code)]

use halalnet::autodiff::{Float, Graph, NodeId, Tensor};
use halalnet::Result;

pub type Build<'a, T> = dyn Fn(&mut Graph<T>, &[NodeId]) -> Result<NodeId> + 'a;

/// Which coordinates of each input to probe.
pub enum Coords {
    All,
    /// The `n` coordinates with the largest analytic gradient magnitude, plus
    /// `n` evenly spaced ones.
    Sample(usize),
}

pub struct Report {
    pub rel_error: f64,
    pub checked: usize,
}

fn loss_of<T: Float>(inputs: &[Tensor<T>], build: &Build<'_, T>) -> f64 {
    let mut g = Graph::new();
    let ids: Vec<NodeId> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let l = build(&mut g, &ids).expect("build");
    g.value(l).data()[0].to_f64().unwrap()
}

pub fn analytic<T: Float>(inputs: &[Tensor<T>], build: &Build<'_, T>) -> Vec<Tensor<T>> {
    let mut g = Graph::new();
    let ids: Vec<NodeId> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let l = build(&mut g, &ids).expect("build");
    g.backward(l).expect("backward");
    ids.iter()
        .zip(inputs)
        .map(|(&id, t)| g.grad(id).cloned().unwrap_or_else(|| Tensor::zeros(t.shape())))
        .collect()
}

/// Norm-wise relative error `‖a − n‖ / max(‖a‖, ‖n‖)` over the probed
/// coordinates of every input.
pub fn check<T: Float>(inputs: &[Tensor<T>], build: &Build<'_, T>, eps: f64, coords: Coords) -> Report {
    let grads = analytic(inputs, build);
    let (mut diff2, mut a2, mut n2, mut checked) = (0.0, 0.0, 0.0, 0);
    let mut work = inputs.to_vec();
    for (ti, g) in grads.iter().enumerate() {
        let len = g.len();
        let idx: Vec<usize> = match coords {
            Coords::All => (0..len).collect(),
            Coords::Sample(n) => {
                let mut by_mag: Vec<usize> = (0..len).collect();
                by_mag.sort_by(|&a, &b| g.data()[b].abs().partial_cmp(&g.data()[a].abs()).unwrap());
                let mut v: Vec<usize> = by_mag.into_iter().take(n).collect();
                let step = (len / n.max(1)).max(1);
                v.extend((0..len).step_by(step).take(n));
                v.sort_unstable();
                v.dedup();
                v
            }
        };
        for j in idx {
            let orig = work[ti].data()[j];
            work[ti].data_mut()[j] = orig + T::c(eps);
            let plus = loss_of(&work, build);
            work[ti].data_mut()[j] = orig - T::c(eps);
            let minus = loss_of(&work, build);
            work[ti].data_mut()[j] = orig;
            // Use the actually representable step.
            let h = (orig + T::c(eps)).to_f64().unwrap() - (orig - T::c(eps)).to_f64().unwrap();
            let num = (plus - minus) / h;
            let ana = g.data()[j].to_f64().unwrap();
            diff2 += (num - ana) * (num - ana);
            a2 += ana * ana;
            n2 += num * num;
            checked += 1;
        }
    }
    let denom = a2.sqrt().max(n2.sqrt());
    let rel_error = if denom == 0.0 { 0.0 } else { diff2.sqrt() / denom };
    Report { rel_error, checked }
}

/// Directional derivative along the analytic gradient: compares `‖g‖`
/// with the central difference of the loss along `g/‖g‖`.
pub fn check_directional<T: Float>(inputs: &[Tensor<T>], build: &Build<'_, T>, eps: f64) -> Report {
    let grads = analytic(inputs, build);
    let norm: f64 = grads
        .iter()
        .flat_map(|g| g.data().iter().map(|v| v.to_f64().unwrap().powi(2)))
        .sum::<f64>()
        .sqrt();
    let shifted = |sign: f64| -> Vec<Tensor<T>> {
        inputs
            .iter()
            .zip(&grads)
            .map(|(t, g)| {
                let data = t
                    .data()
                    .iter()
                    .zip(g.data())
                    .map(|(&v, &d)| v + T::c(sign * eps * d.to_f64().unwrap() / norm))
                    .collect();
                Tensor::new(t.shape().to_vec(), data).unwrap()
            })
            .collect()
    };
    let num = (loss_of(&shifted(1.0), build) - loss_of(&shifted(-1.0), build)) / (2.0 * eps);
    Report { rel_error: (num - norm).abs() / num.abs().max(norm), checked: 1 }
}

/// Analytic gradient computed in `T` against central differences of the same
/// function evaluated in `U` at the cast inputs. Used for low-precision
/// checks of deep compositions, where `T` differences cannot resolve the
/// loss without stepping across ReLU kinks.
pub fn check_cast<T: Float, U: Float>(
    inputs: &[Tensor<T>],
    build_t: &Build<'_, T>,
    build_u: &Build<'_, U>,
    eps: f64,
    per_tensor: usize,
) -> Report {
    let grads = analytic(inputs, build_t);
    let mut work: Vec<Tensor<U>> = inputs.iter().map(Tensor::cast).collect();
    let (mut diff2, mut a2, mut n2, mut checked) = (0.0, 0.0, 0.0, 0);
    for (ti, g) in grads.iter().enumerate() {
        let mut by_mag: Vec<usize> = (0..g.len()).collect();
        by_mag.sort_by(|&a, &b| g.data()[b].abs().partial_cmp(&g.data()[a].abs()).unwrap());
        let step = (g.len() / per_tensor.max(1)).max(1);
        let mut idx: Vec<usize> = by_mag.into_iter().take(per_tensor).collect();
        idx.extend((0..g.len()).step_by(step).take(per_tensor));
        idx.sort_unstable();
        idx.dedup();
        for j in idx {
            let orig = work[ti].data()[j];
            work[ti].data_mut()[j] = orig + U::c(eps);
            let plus = loss_of(&work, build_u);
            work[ti].data_mut()[j] = orig - U::c(eps);
            let minus = loss_of(&work, build_u);
            work[ti].data_mut()[j] = orig;
            let num = (plus - minus) / (2.0 * eps);
            let ana = g.data()[j].to_f64().unwrap();
            diff2 += (num - ana) * (num - ana);
            a2 += ana * ana;
            n2 += num * num;
            checked += 1;
        }
    }
    let denom = a2.sqrt().max(n2.sqrt());
    Report { rel_error: if denom == 0.0 { 0.0 } else { diff2.sqrt() / denom }, checked }
}
