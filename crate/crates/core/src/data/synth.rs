use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256StarStar;

use crate::data::quantize_to_alphabet;
use crate::discrete::Alphabet;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::tensor::{fold, unfold, DenseTensor, ModeMatrix, Shape};

/// Discrete, near-low-rank fixture description.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub dims: Vec<usize>,
    /// Multilinear ranks of the continuous tensor before quantization.
    pub ranks: Vec<usize>,
    /// Alphabet `{0, …, levels − 1}`.
    pub levels: usize,
    pub seed: u64,
}

impl SynthSpec {
    pub fn alphabet(&self) -> Result<Alphabet> {
        Alphabet::integer_levels(self.levels)
    }
}

/// Builds `G ×_1 A_1 ⋯ ×_N A_N` from a standard normal core `G` and factors
/// `A_n` (drawn in that order from xoshiro256** seeded with `spec.seed`),
/// maps its range affinely onto `[0, levels − 1]` and rounds to the alphabet.
pub fn synthesize(spec: &SynthSpec) -> Result<DenseTensor> {
    let shape = Shape::new(spec.dims.clone())?;
    if spec.ranks.len() != shape.order() {
        return Err(Error::InvalidArgument(format!(
            "{} ranks for {} modes",
            spec.ranks.len(),
            shape.order()
        )));
    }
    for (n, (&r, &d)) in spec.ranks.iter().zip(shape.dims()).enumerate() {
        if r == 0 || r > d {
            return Err(Error::InvalidArgument(format!(
                "rank {r} invalid for mode {n} of size {d}"
            )));
        }
    }
    if spec.levels < 2 {
        return Err(Error::InvalidArgument("need at least two levels".into()));
    }

    let mut rng = Xoshiro256StarStar::seed_from_u64(spec.seed);
    let core_shape = Shape::new(spec.ranks.clone())?;
    let core_data = (0..core_shape.numel()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut x = DenseTensor::new(core_shape, core_data)?;
    for n in 0..shape.order() {
        let factor = Matrix::from_fn(shape.dim(n), spec.ranks[n], |_, _| StandardNormal.sample(&mut rng));
        let product = linalg::mul(&factor, unfold(&x, n)?.matrix());
        let mut dims = x.shape().dims().to_vec();
        dims[n] = shape.dim(n);
        x = fold(&ModeMatrix::new(n, product), &Shape::new(dims)?)?;
    }

    let (lo, hi) = x
        .data()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let top = (spec.levels - 1) as f64;
    let span = if hi > lo { hi - lo } else { 1.0 };
    let scaled: Vec<f64> = x.data().iter().map(|&v| (v - lo) / span * top).collect();
    let scaled = DenseTensor::new(shape, scaled)?;
    Ok(quantize_to_alphabet(&scaled, &spec.alphabet()?))
}
