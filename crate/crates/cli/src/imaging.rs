//! Image decoding and the PNG artifacts.

use std::io::Cursor;
use std::path::Path;

use accv::{EdgeMask, ImageTensor, LabelMap, PhaseStack};
use image::{DynamicImage, GrayImage, ImageFormat, Rgb, RgbImage};

use crate::error::CliError;

/// Label colors indexed by region code.
pub const PALETTE: [[u8; 3]; 8] = [
    [0, 0, 0],
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
];

/// Interface colors of `U_1`, `U_2`, `U_3`.
pub const CONTOUR_COLORS: [[u8; 3]; 3] = [[0, 255, 0], [255, 0, 0], [0, 0, 255]];

/// Decodes a PNG, PGM or PPM file into `[0, 1]` intensities. Gray inputs
/// give one channel, everything else three; alpha is dropped.
pub fn load_image(path: &Path, rescale: Option<[usize; 2]>) -> Result<ImageTensor, CliError> {
    let decoded = image::ImageReader::open(path)
        .map_err(|e| CliError::Io(format!("cannot open {}: {e}", path.display())))?
        .with_guessed_format()
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let format = decoded.format();
    let img = decoded.decode().map_err(|e| {
        let name = format.map_or("unknown".to_owned(), |f| format!("{f:?}"));
        CliError::Io(format!("cannot decode {} ({name}): {e}", path.display()))
    })?;
    let tensor = to_tensor(&img)?;
    match rescale {
        Some([h, w]) => Ok(tensor.resize_bilinear(h, w)?),
        None => Ok(tensor),
    }
}

fn to_tensor(img: &DynamicImage) -> Result<ImageTensor, CliError> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let gray = img.color().channel_count() <= 2;
    let wide = img.color().bytes_per_pixel() / img.color().channel_count() > 1;
    let tensor = match (gray, wide) {
        (true, false) => {
            let g = img.to_luma8();
            ImageTensor::from_fn(h, w, 1, |r, c, _| {
                g.get_pixel(c as u32, r as u32)[0] as f64 / 255.0
            })
        }
        (true, true) => {
            let g = img.to_luma16();
            ImageTensor::from_fn(h, w, 1, |r, c, _| {
                g.get_pixel(c as u32, r as u32)[0] as f64 / 65535.0
            })
        }
        (false, false) => {
            let rgb = img.to_rgb8();
            ImageTensor::from_fn(h, w, 3, |r, c, k| {
                rgb.get_pixel(c as u32, r as u32)[k] as f64 / 255.0
            })
        }
        (false, true) => {
            let rgb = img.to_rgb16();
            ImageTensor::from_fn(h, w, 3, |r, c, k| {
                rgb.get_pixel(c as u32, r as u32)[k] as f64 / 65535.0
            })
        }
    };
    Ok(tensor?)
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn png_bytes(img: DynamicImage) -> Vec<u8> {
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)
        .expect("PNG encoding into memory cannot fail");
    out.into_inner()
}

pub fn labels_png(labels: &LabelMap) -> Vec<u8> {
    let (h, w) = labels.dim();
    let img = RgbImage::from_fn(w as u32, h as u32, |c, r| {
        Rgb(PALETTE[labels.get(r as usize, c as usize).index() % PALETTE.len()])
    });
    png_bytes(DynamicImage::ImageRgb8(img))
}

/// The input image with the interface band of each field painted over it.
pub fn contours_png(image: &ImageTensor, bands: &[EdgeMask]) -> Vec<u8> {
    let (h, w) = image.dim();
    let base = |r: usize, c: usize| -> [u8; 3] {
        if image.channels() == 1 {
            [quantize(image.get(r, c, 0)); 3]
        } else {
            [0, 1, 2].map(|k| quantize(image.get(r, c, k)))
        }
    };
    let img = RgbImage::from_fn(w as u32, h as u32, |c, r| {
        let (r, c) = (r as usize, c as usize);
        let color = bands
            .iter()
            .zip(CONTOUR_COLORS.iter().cycle())
            .filter(|(band, _)| band.get(r, c))
            .map(|(_, &color)| color)
            .last();
        Rgb(color.unwrap_or_else(|| base(r, c)))
    });
    png_bytes(DynamicImage::ImageRgb8(img))
}

pub fn field_png(u: &PhaseStack, i: usize) -> Vec<u8> {
    let (h, w) = u.dim();
    let f = u.field(i);
    let img = GrayImage::from_fn(w as u32, h as u32, |c, r| {
        image::Luma([quantize(f[[r as usize, c as usize]])])
    });
    png_bytes(DynamicImage::ImageLuma8(img))
}

pub fn mask_png(mask: &EdgeMask) -> Vec<u8> {
    let (h, w) = mask.dim();
    let img = GrayImage::from_fn(w as u32, h as u32, |c, r| {
        image::Luma([if mask.get(r as usize, c as usize) {
            255
        } else {
            0
        }])
    });
    png_bytes(DynamicImage::ImageLuma8(img))
}
