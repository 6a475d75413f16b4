use rand::RngCore;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256StarStar;

use crate::error::{Error, Result};
use crate::tensor::{ObservationMask, Shape};

/// Observation ratio and sampling seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskSpec {
    pub ratio: f64,
    pub seed: u64,
    /// Observe whole fibres along the last mode (e.g. all three channels of
    /// a pixel) instead of individual entries.
    pub pixel_aligned: bool,
}

impl MaskSpec {
    pub fn new(ratio: f64, seed: u64) -> Self {
        Self {
            ratio,
            seed,
            pixel_aligned: false,
        }
    }
}

/// Seeded generator behind mask sampling.
///
/// xoshiro256** seeded from a `u64` through SplitMix64, with bounded draws by
/// Lemire's multiply-and-reject method, so masks are reproducible in any
/// language that implements the same three published algorithms.
pub struct MaskRng(Xoshiro256StarStar);

impl MaskRng {
    pub fn new(seed: u64) -> Self {
        Self(Xoshiro256StarStar::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform integer in `0..bound` (`bound > 0`).
    pub fn below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        let mut m = u128::from(self.next_u64()) * u128::from(bound);
        if (m as u64) < bound {
            let threshold = bound.wrapping_neg() % bound;
            while (m as u64) < threshold {
                m = u128::from(self.next_u64()) * u128::from(bound);
            }
        }
        (m >> 64) as u64
    }
}

/// Draws exactly `round(ratio · N)` of the `N` candidates uniformly without
/// replacement by a partial Fisher–Yates shuffle; returns them ascending.
fn choose(total: usize, count: usize, rng: &mut MaskRng) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..total).collect();
    for i in 0..count {
        let j = i + rng.below((total - i) as u64) as usize;
        pool.swap(i, j);
    }
    pool.truncate(count);
    pool.sort_unstable();
    pool
}

/// Samples an observation mask with a deterministic generator.
pub fn sample_mask(shape: &Shape, spec: &MaskSpec) -> Result<ObservationMask> {
    if !(spec.ratio > 0.0 && spec.ratio <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "observation ratio must lie in (0, 1], got {}",
            spec.ratio
        )));
    }
    let fibre = if spec.pixel_aligned {
        shape.dim(shape.order() - 1)
    } else {
        1
    };
    let candidates = shape.numel() / fibre;
    let count = (spec.ratio * candidates as f64).round() as usize;
    if count == 0 {
        return Err(Error::InvalidArgument(format!(
            "ratio {} observes no entries of {shape}",
            spec.ratio
        )));
    }
    let mut rng = MaskRng::new(spec.seed);
    let picked = choose(candidates, count.min(candidates), &mut rng);
    let indices: Vec<usize> = picked
        .iter()
        .flat_map(|&p| (0..fibre).map(move |c| p * fibre + c))
        .collect();
    ObservationMask::from_indices(shape.clone(), &indices)
}
