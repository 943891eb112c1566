//! Classical image processing for isolating the cut region.
//!
//! The segmentation chain is blur → YCbCr → Otsu on one channel →
//! binarize → closing → opening → mask the source image. Each stage is a
//! standalone function; [`segment_cut`] composes them.

mod blur;
mod color;
mod image;
mod morph;
mod otsu;
mod resize;
mod segment;

pub use blur::{default_sigma, gaussian_blur, gaussian_blur_plane, gaussian_blur_with_sigma, gaussian_kernel};
pub use color::{rgb_to_ycbcr, rgb_to_ycbcr_pixel, round_u8, ycbcr_to_rgb};
pub use image::{BinaryMask, Image};
pub use morph::{dilate, erode, morph_close, morph_open, SeShape, StructuringElement};
pub use otsu::{between_class_variance, histogram, otsu_threshold, otsu_threshold_hist};
pub use resize::{resize_bilinear, sample_bilinear};
pub use segment::{binarize, segment_cut, segment_cut_traced, Channel, SegmentationParams, SegmentationTrace};
