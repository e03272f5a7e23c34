//! Raster ingestion (PNG and PNM) with resampling to the working resolution.

use std::path::Path;

use image::imageops::{self, FilterType};
use image::{DynamicImage, GrayImage, ImageReader, RgbImage};

use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::neuro::Image;

fn decode(path: &Path) -> Result<DynamicImage> {
    let reader = ImageReader::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    let decode_err = |message: String| Error::Decode {
        path: path.to_path_buf(),
        message,
    };
    reader
        .with_guessed_format()
        .map_err(|e| decode_err(e.to_string()))?
        .decode()
        .map_err(|e| decode_err(e.to_string()))
}

/// Decodes in-memory PNG or PNM bytes; `None` keeps the native size.
pub fn image_from_bytes(bytes: &[u8], resolution: Option<(usize, usize)>) -> Result<Image> {
    let img = image::load_from_memory(bytes).map_err(|e| Error::Decode {
        path: "<upload>".into(),
        message: e.to_string(),
    })?;
    Ok(to_image(&img, resolution))
}

/// Bilinear resampling to `resolution`; grayscale input is replicated to
/// three channels. `None` keeps the native size.
pub fn to_image(img: &DynamicImage, resolution: Option<(usize, usize)>) -> Image {
    let mut rgb = img.to_rgb32f();
    if let Some((h, w)) = resolution {
        if (rgb.height() as usize, rgb.width() as usize) != (h, w) {
            rgb = imageops::resize(&rgb, w as u32, h as u32, FilterType::Triangle);
        }
    }
    let (h, w) = (rgb.height() as usize, rgb.width() as usize);
    Image::from_fn(h, w, |r, c| {
        let px = rgb.get_pixel(c as u32, r as u32).0;
        [px[0] as f64, px[1] as f64, px[2] as f64]
    })
}

/// Nearest-neighbour resampling to `resolution`, then binarization at 0.5.
pub fn to_mask(img: &DynamicImage, resolution: Option<(usize, usize)>) -> BinaryMask {
    let mut luma = img.to_luma32f();
    if let Some((h, w)) = resolution {
        if (luma.height() as usize, luma.width() as usize) != (h, w) {
            luma = imageops::resize(&luma, w as u32, h as u32, FilterType::Nearest);
        }
    }
    let (h, w) = (luma.height() as usize, luma.width() as usize);
    BinaryMask::from_fn(h, w, |r, c| luma.get_pixel(c as u32, r as u32).0[0] > 0.5)
}

pub fn read_image(path: impl AsRef<Path>, resolution: (usize, usize)) -> Result<Image> {
    Ok(to_image(&decode(path.as_ref())?, Some(resolution)))
}

pub fn read_mask(path: impl AsRef<Path>, resolution: (usize, usize)) -> Result<BinaryMask> {
    Ok(to_mask(&decode(path.as_ref())?, Some(resolution)))
}

pub fn ingest_pair(image: impl AsRef<Path>, mask: impl AsRef<Path>, resolution: (usize, usize)) -> Result<(Image, BinaryMask)> {
    Ok((read_image(image, resolution)?, read_mask(mask, resolution)?))
}

/// 8-bit RGB raster of `image`.
pub fn image_to_rgb8(image: &Image) -> RgbImage {
    let (h, w) = image.dims();
    RgbImage::from_fn(w as u32, h as u32, |c, r| {
        let q = |ch| (image.get(r as usize, c as usize, ch) * 255.0).round() as u8;
        image::Rgb([q(0), q(1), q(2)])
    })
}

pub fn mask_to_gray8(mask: &BinaryMask) -> GrayImage {
    GrayImage::from_fn(mask.width() as u32, mask.height() as u32, |c, r| {
        image::Luma([if mask.get(r as usize, c as usize) { 255 } else { 0 }])
    })
}

/// Writes an image; the format follows the file extension.
pub fn write_image(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    save(DynamicImage::ImageRgb8(image_to_rgb8(image)), path.as_ref())
}

pub fn write_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    save(DynamicImage::ImageLuma8(mask_to_gray8(mask)), path.as_ref())
}

/// PNG bytes of `image`.
pub fn encode_png(image: &Image) -> Result<Vec<u8>> {
    let mut out = std::io::Cursor::new(Vec::new());
    image_to_rgb8(image)
        .write_to(&mut out, image::ImageFormat::Png)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    Ok(out.into_inner())
}

fn save(img: DynamicImage, path: &Path) -> Result<()> {
    img.save(path).map_err(|e| match e {
        image::ImageError::IoError(e) => Error::Io(e),
        other => Error::Io(std::io::Error::other(other)),
    })
}
