//! Image file decoding/encoding around the channel-major float tensors the
//! backends consume. Pixel values map linearly between [0, 255] and [-1, 1].

use std::path::Path;

use image::imageops::FilterType;
use image::{DynamicImage, RgbaImage};

use crate::diffusion::{Geometry, ImageTensor};
use crate::error::{Error, Result};

/// Decode an image file and resize it to the backend's input geometry.
///
/// Resize uses a fixed triangle filter so results are deterministic across
/// runs. Channels beyond the source image's (e.g. alpha for an RGB file)
/// fill with 1.0 (opaque).
pub fn load_image(path: &Path, geometry: Geometry) -> Result<ImageTensor> {
    let decoded = image::open(path).map_err(|e| Error::InvalidImage {
        reason: format!("{}: {e}", path.display()),
    })?;
    image_to_tensor(&decoded, geometry)
}

pub fn image_to_tensor(decoded: &DynamicImage, geometry: Geometry) -> Result<ImageTensor> {
    if geometry.channels > 4 {
        return Err(Error::InvalidImage {
            reason: format!("unsupported channel count {}", geometry.channels),
        });
    }
    let resized = decoded
        .resize_exact(geometry.width as u32, geometry.height as u32, FilterType::Triangle)
        .to_rgba8();
    let mut data = vec![0.0; geometry.len()];
    for c in 0..geometry.channels {
        for y in 0..geometry.height {
            for x in 0..geometry.width {
                let px = resized.get_pixel(x as u32, y as u32).0[c] as f64;
                data[c * geometry.height * geometry.width + y * geometry.width + x] =
                    px / 127.5 - 1.0;
            }
        }
    }
    ImageTensor::new(geometry.channels, geometry.height, geometry.width, data)
}

/// Encode a tensor as RGBA pixels, clamping to the displayable range.
pub fn tensor_to_image(tensor: &ImageTensor) -> RgbaImage {
    let g = tensor.geometry();
    let mut img = RgbaImage::new(g.width as u32, g.height as u32);
    for y in 0..g.height {
        for x in 0..g.width {
            let mut px = [255u8; 4];
            for (c, slot) in px.iter_mut().enumerate().take(4) {
                if c < g.channels {
                    let v = tensor.data()[c * g.height * g.width + y * g.width + x];
                    *slot = (((v + 1.0) * 127.5).round()).clamp(0.0, 255.0) as u8;
                }
            }
            img.put_pixel(x as u32, y as u32, image::Rgba(px));
        }
    }
    img
}

pub fn save_png(path: &Path, tensor: &ImageTensor) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    tensor_to_image(tensor)
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::InvalidImage { reason: format!("{}: {e}", path.display()) })
}
