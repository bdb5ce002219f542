//! Writes the synthetic test images next to the sample configs:
//! `cargo run -p accv-cli --example make_synthetic -- configs`

use std::path::PathBuf;

use accv::synthetic::{add_gaussian_noise, four_blocks, six_blocks};
use accv::ImageTensor;
use image::GrayImage;

fn save(image: &ImageTensor, path: PathBuf) -> Result<(), Box<dyn std::error::Error>> {
    let (h, w) = image.dim();
    let img = GrayImage::from_fn(w as u32, h as u32, |c, r| {
        image::Luma([(image.get(r as usize, c as usize, 0) * 255.0).round() as u8])
    });
    img.save(&path)?;
    println!("{}", path.display());
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "configs".into()));
    let blocks = four_blocks(128, [0.1, 0.37, 0.63, 0.9])?;
    save(
        &add_gaussian_noise(&blocks.image, 0.01, 7)?,
        dir.join("synthetic.png"),
    )?;
    save(&six_blocks(96, 144)?.image, dir.join("six_phase.png"))?;
    Ok(())
}
