use super::manifest::DatasetManifest;
use super::pnm::decode_image;
use crate::error::{Error, Result};
use crate::imaging::{resize_bilinear, segment_cut, Image, SegmentationParams};
use crate::training::DatasetPools;
use std::path::PathBuf;

#[derive(Debug, Clone)]
pub struct PreparedPools {
    pub pools: DatasetPools,
    /// Images whose segmentation failed; they stay in the raw pool only.
    pub failed: Vec<PathBuf>,
}

impl PreparedPools {
    pub fn failures(&self) -> usize {
        self.failed.len()
    }
}

/// Decodes every record. Raw records contribute their image to the raw pool
/// and, when segmentation succeeds, the masked image to the segmented pool.
/// Records flagged as already segmented go to the segmented pool as-is.
/// Images are resized to `size = (width, height)` after segmentation.
pub fn prepare_pools(
    manifest: &DatasetManifest,
    params: &SegmentationParams,
    size: Option<(usize, usize)>,
    p_segmented: f64,
) -> Result<PreparedPools> {
    let mut pools = DatasetPools::new(p_segmented);
    pools.validate()?;
    let mut failed = Vec::new();
    let fit = |img: Image| match size {
        Some((w, h)) if (img.width(), img.height()) != (w, h) => resize_bilinear(&img, w, h),
        _ => img,
    };
    for r in &manifest.records {
        let path = manifest.resolve(r);
        let img = decode_image(&path)?;
        if img.channels() != 3 {
            return Err(Error::InvalidInput(format!("{}: expected an RGB image", path.display())));
        }
        if r.segmented {
            pools.push(r.class, true, fit(img));
            continue;
        }
        match segment_cut(&img, params) {
            Ok((_, masked)) => pools.push(r.class, true, fit(masked)),
            Err(Error::DegenerateHistogram) => failed.push(path),
            Err(e) => return Err(e),
        }
        pools.push(r.class, false, fit(img));
    }
    Ok(PreparedPools { pools, failed })
}
