use std::path::Path;

use image::{ImageFormat, RgbImage};

use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, Shape};

/// RGB image as a `[W, H, 3]` tensor of integer intensities in `0..=255`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    pub width: usize,
    pub height: usize,
    pub tensor: DenseTensor,
}

/// Decodes an 8-bit image; alpha is dropped and grayscale expanded to RGB.
/// Pixel `(x, y)` channel `c` lands at tensor index `[x, y, c]`.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageTensor> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let color = img.color();
    if color.bytes_per_pixel() != color.channel_count() {
        return Err(Error::UnsupportedImage(format!(
            "{}: {color:?} is not 8 bits per channel",
            path.display()
        )));
    }
    let rgb = img.to_rgb8();
    let (width, height) = (rgb.width() as usize, rgb.height() as usize);
    let shape = Shape::new(vec![width, height, 3])?;
    let mut data = vec![0.0; shape.numel()];
    for (x, y, px) in rgb.enumerate_pixels() {
        let base = (x as usize * height + y as usize) * 3;
        for c in 0..3 {
            data[base + c] = f64::from(px[c]);
        }
    }
    Ok(ImageTensor {
        width,
        height,
        tensor: DenseTensor::new(shape, data)?,
    })
}

/// Writes a `[W, H, 3]` tensor as PNG after clamping to `[0, 255]` and rounding.
pub fn save_image(t: &DenseTensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let dims = t.shape().dims();
    if dims.len() != 3 || dims[2] != 3 {
        return Err(Error::InvalidShape(format!(
            "image tensors must be W x H x 3, got {}",
            t.shape()
        )));
    }
    let (width, height) = (dims[0], dims[1]);
    let (w, h) = (
        u32::try_from(width).map_err(|_| Error::InvalidShape("width too large".into()))?,
        u32::try_from(height).map_err(|_| Error::InvalidShape("height too large".into()))?,
    );
    let img = RgbImage::from_fn(w, h, |x, y| {
        let base = (x as usize * height + y as usize) * 3;
        let px = |c: usize| t.data()[base + c].clamp(0.0, 255.0).round() as u8;
        image::Rgb([px(0), px(1), px(2)])
    });
    img.save_with_format(path, ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}

impl ImageTensor {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        save_image(&self.tensor, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_white_pixel() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("white.png");
        RgbImage::from_pixel(1, 1, image::Rgb([255, 255, 255])).save(&path).unwrap();
        let img = load_image(&path).unwrap();
        assert_eq!((img.width, img.height), (1, 1));
        assert_eq!(img.tensor.data(), &[255.0, 255.0, 255.0]);
    }

    #[test]
    fn layout_and_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("src.png");
        let img = RgbImage::from_fn(5, 3, |x, y| image::Rgb([x as u8 * 40, y as u8 * 70, (x + y) as u8]));
        img.save(&src).unwrap();

        let loaded = load_image(&src).unwrap();
        assert_eq!(loaded.tensor.shape().dims(), &[5, 3, 3]);
        assert_eq!(loaded.tensor.get(&[4, 1, 0]).unwrap(), 160.0);
        assert_eq!(loaded.tensor.get(&[4, 1, 1]).unwrap(), 70.0);
        assert_eq!(loaded.tensor.get(&[2, 2, 2]).unwrap(), 4.0);

        let out = dir.path().join("out.png");
        loaded.save(&out).unwrap();
        assert_eq!(image::open(&out).unwrap().to_rgb8(), img);
    }

    #[test]
    fn clamping_and_rounding() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.png");
        let t = DenseTensor::new(Shape::new(vec![1, 1, 3]).unwrap(), vec![255.7, -3.2, 99.5]).unwrap();
        save_image(&t, &path).unwrap();
        assert_eq!(image::open(&path).unwrap().to_rgb8().get_pixel(0, 0).0, [255, 0, 100]);
    }

    #[test]
    fn alpha_and_gray_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let rgba = dir.path().join("a.png");
        image::RgbaImage::from_pixel(2, 2, image::Rgba([1, 2, 3, 4])).save(&rgba).unwrap();
        assert_eq!(&load_image(&rgba).unwrap().tensor.data()[..3], &[1.0, 2.0, 3.0]);
        let gray = dir.path().join("g.png");
        image::GrayImage::from_pixel(2, 1, image::Luma([9])).save(&gray).unwrap();
        assert_eq!(load_image(&gray).unwrap().tensor.data(), &[9.0; 6]);
    }

    #[test]
    fn rejects_sixteen_bit_and_bad_shapes() {
        let dir = tempfile::tempdir().unwrap();
        let deep = dir.path().join("d.png");
        image::ImageBuffer::<image::Rgb<u16>, _>::from_pixel(1, 1, image::Rgb([1u16, 2, 3]))
            .save(&deep)
            .unwrap();
        assert!(matches!(load_image(&deep), Err(Error::UnsupportedImage(_))));
        assert!(load_image(dir.path().join("nope.png")).is_err());

        let flat = DenseTensor::zeros(Shape::new(vec![2, 2]).unwrap());
        assert!(save_image(&flat, dir.path().join("x.png")).is_err());
        let t = DenseTensor::zeros(Shape::new(vec![1, 1, 3]).unwrap());
        assert!(save_image(&t, dir.path().join("missing/dir/x.png")).is_err());
    }
}
