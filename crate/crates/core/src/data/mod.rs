//! Experimental substrate: images, masks, quantization, serialization and
//! synthetic fixtures.

mod format;
mod image_io;
mod mask;
mod synth;

pub use format::{mask_load, mask_save, read_mask, read_tensor, tensor_load, tensor_save, write_mask, write_tensor};
pub use image_io::{load_image, save_image, ImageTensor};
pub use mask::{sample_mask, MaskRng, MaskSpec};
pub use synth::{synthesize, SynthSpec};

use crate::discrete::Alphabet;
use crate::tensor::DenseTensor;

/// Replaces every entry by its nearest alphabet symbol (ties toward the smaller).
pub fn quantize_to_alphabet(t: &DenseTensor, alphabet: &Alphabet) -> DenseTensor {
    let data = t.data().iter().map(|&v| alphabet.nearest(v)).collect();
    DenseTensor::from_parts_unchecked(t.shape().clone(), data)
}
