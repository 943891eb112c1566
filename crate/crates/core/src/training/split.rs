use crate::datakit::Class;
use crate::error::{Error, Result};
use crate::rng;
use rand::Rng;

pub const DEFAULT_RATIOS: [f64; 3] = [0.70, 0.15, 0.15];

#[derive(Debug, Clone, PartialEq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub test: Vec<T>,
}

/// Stratified split: within each class the items are shuffled by `seed`,
/// then `⌊n·r_train⌋` go to train, `⌊n·r_val⌋` to validation and the rest to
/// test. Classes are emitted in [`Class::ALL`] order.
pub fn split_dataset<T: Clone>(
    items: &[T],
    class_of: impl Fn(&T) -> Class,
    ratios: [f64; 3],
    seed: u64,
) -> Result<Split<T>> {
    if ratios.iter().any(|&r| !(0.0..=1.0).contains(&r)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split ratios {ratios:?} must be in [0,1] and sum to 1")));
    }
    let mut out = Split { train: Vec::new(), val: Vec::new(), test: Vec::new() };
    for class in Class::ALL {
        let mut group: Vec<&T> = items.iter().filter(|t| class_of(t) == class).collect();
        let n = group.len();
        if n == 0 {
            continue;
        }
        if n < 3 {
            return Err(Error::Stratification(format!("class {class} has {n} items; at least 3 are needed")));
        }
        let mut r = rng::substream(seed, &format!("split-{}", class.name()));
        for i in (1..n).rev() {
            group.swap(i, r.random_range(0..=i));
        }
        // The epsilon keeps exact products such as 100·0.7 from flooring low.
        let n_train = (n as f64 * ratios[0] + 1e-9).floor() as usize;
        let n_val = (n as f64 * ratios[1] + 1e-9).floor() as usize;
        out.train.extend(group[..n_train].iter().map(|t| (*t).clone()));
        out.val.extend(group[n_train..n_train + n_val].iter().map(|t| (*t).clone()));
        out.test.extend(group[n_train + n_val..].iter().map(|t| (*t).clone()));
    }
    Ok(out)
}
