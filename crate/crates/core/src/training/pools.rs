use crate::datakit::Class;
use crate::error::{Error, Result};
use crate::imaging::Image;
use rand::Rng;

/// Raw and segmented images per class, indexed by [`Class::index`].
#[derive(Debug, Clone, Default)]
pub struct DatasetPools {
    pub segmented: [Vec<Image>; 2],
    pub raw: [Vec<Image>; 2],
    /// Chance of drawing from the segmented pool.
    pub p_segmented: f64,
}

/// Two images and whether they share a class (label 1).
#[derive(Debug, Clone, Copy)]
pub struct PairSample<'a> {
    pub a: &'a Image,
    pub b: &'a Image,
    pub label: u8,
    pub classes: (Class, Class),
    pub segmented: (bool, bool),
}

impl DatasetPools {
    pub fn new(p_segmented: f64) -> Self {
        DatasetPools { p_segmented, ..Default::default() }
    }

    pub fn push(&mut self, class: Class, segmented: bool, img: Image) {
        let pool = if segmented { &mut self.segmented } else { &mut self.raw };
        pool[class.index()].push(img);
    }

    pub fn len(&self, class: Class) -> usize {
        self.segmented[class.index()].len() + self.raw[class.index()].len()
    }

    pub fn is_empty(&self) -> bool {
        Class::ALL.iter().all(|&c| self.len(c) == 0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_segmented) {
            return Err(Error::Config(format!("segmented probability {} not in [0,1]", self.p_segmented)));
        }
        Ok(())
    }

    /// One image of `class`: segmented with probability `p_segmented`,
    /// falling back to the other pool when the chosen one is empty.
    pub fn draw<R: Rng + ?Sized>(&self, class: Class, rng: &mut R) -> Result<(&Image, bool)> {
        let want_seg = rng.random_bool(self.p_segmented);
        let (seg, raw) = (&self.segmented[class.index()], &self.raw[class.index()]);
        let (pool, is_seg) = match (want_seg, seg.is_empty(), raw.is_empty()) {
            (_, true, true) => return Err(Error::Sampling(format!("no images of class {class}"))),
            (true, false, _) | (false, false, true) => (seg, true),
            _ => (raw, false),
        };
        Ok((&pool[rng.random_range(0..pool.len())], is_seg))
    }
}

/// Label uniform over {0, 1}; first class uniform; second class equal to
/// the first iff the label is 1.
pub fn sample_pair<'a, R: Rng + ?Sized>(pools: &'a DatasetPools, rng: &mut R) -> Result<PairSample<'a>> {
    let same = rng.random_bool(0.5);
    let ca = if rng.random_bool(0.5) { Class::Halal } else { Class::NonHalal };
    let cb = match (same, ca) {
        (true, c) => c,
        (false, Class::Halal) => Class::NonHalal,
        (false, Class::NonHalal) => Class::Halal,
    };
    let (a, sa) = pools.draw(ca, rng)?;
    let (b, sb) = pools.draw(cb, rng)?;
    Ok(PairSample { a, b, label: u8::from(same), classes: (ca, cb), segmented: (sa, sb) })
}
