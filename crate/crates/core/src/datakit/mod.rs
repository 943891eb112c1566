//! Dataset plumbing: PPM/PGM codec, manifests, the synthetic generator and
//! pool preparation for training.

mod manifest;
pub mod pnm;
mod pools;
mod synth;

pub use manifest::{load_manifest, save_manifest, Class, DatasetManifest, Record, Visibility};
pub use pnm::{decode_image, encode_image};
pub use pools::{prepare_pools, PreparedPools};
pub use synth::{
    generate_synthetic, image_path, mask_path, render_sample, visibility_counts, visibility_plan, Sample,
    SyntheticSpec,
};
