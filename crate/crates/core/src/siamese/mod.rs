//! The pair network: one backbone applied to both images, their feature
//! difference flattened into a three-layer dense head ending in a sigmoid.
//!
//! Argument order matters: the first image is the query, the second the
//! reference. `forward_pair(a, b)` is generally not equal to `forward_pair(b, a)`.

mod checkpoint;
mod model;

pub use checkpoint::{load, load_bytes, save, save_bytes, TrainingState, MAGIC};
pub use model::{head_param_count, head_specs, PairNodes, SiameseModel, HEAD_WIDTHS};
