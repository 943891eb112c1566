//! Configurable stack of convolution, separable-convolution and pooling
//! blocks with optional residual connections.
//!
//! Config files use the [`crate::kv`] grammar. The top level holds
//! `input = H,W,C`; each `[block]` section describes one block:
//!
//! | key        | values                  | default                   |
//! |------------|-------------------------|---------------------------|
//! | `kind`     | `conv`, `sep`, `maxpool`| required                  |
//! | `channels` | comma list, one per layer | required unless maxpool |
//! | `kernel`   | odd integer             | 3                         |
//! | `stride`   | integer ≥ 1             | 1                         |
//! | `padding`  | `same`, `valid`         | `same`                    |
//! | `residual` | bool                    | false                     |
//! | `bias`     | bool                    | true                      |
//! | `relu`     | `pre`, `post`, `none`   | `post` (conv), `pre` (sep)|
//! | `pool`     | integer                 | 3 (sep only)              |
//!
//! A `conv` block applies its stride on the first layer. A `sep` block keeps
//! stride 1 in its layers and ends with a `pool×pool` same-padded max-pool of
//! the given stride. A residual adds the block input when shapes agree and a
//! strided 1×1 projection of it otherwise.

mod config;
mod net;
mod shapes;

pub use config::{Activation, BackboneConfig, Block, BlockKind};
pub use net::{
    check_params, forward, forward_graph, init_params, network_input, param_count, param_specs, to_batch, FeatureMap,
    ParamRole, ParamSpec,
};
pub use shapes::{infer_shapes, output_shape, BlockShapes, Shape};
