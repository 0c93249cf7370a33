//! PNG input and output for 8-bit gray and RGB images.

use std::path::Path;

use image::{DynamicImage, GrayImage, ImageReader, RgbImage};

use super::pnm::quantize8;
use super::IoError;
use crate::raster::PlanarImage;

pub fn write_png(image: &PlanarImage, path: &Path) -> Result<(), IoError> {
    let (h, w) = (image.height(), image.width());
    let result = match image.channels() {
        1 => {
            let mut out = GrayImage::new(w as u32, h as u32);
            for (row, col, px) in out.enumerate_pixels_mut().map(|(x, y, p)| (y, x, p)) {
                px.0 = [quantize8(image.get(0, row as usize, col as usize))];
            }
            out.save(path)
        }
        3 => {
            let mut out = RgbImage::new(w as u32, h as u32);
            for (row, col, px) in out.enumerate_pixels_mut().map(|(x, y, p)| (y, x, p)) {
                px.0 = [0, 1, 2].map(|ch| quantize8(image.get(ch, row as usize, col as usize)));
            }
            out.save(path)
        }
        c => return Err(IoError::Unsupported(format!("{c}-channel PNG"))),
    };
    result.map_err(|e| IoError::Png(e.to_string()))
}

pub fn read_png(path: &Path) -> Result<PlanarImage, IoError> {
    let decoded = ImageReader::open(path)?
        .decode()
        .map_err(|e| IoError::Png(e.to_string()))?;
    let (h, w) = (decoded.height() as usize, decoded.width() as usize);
    Ok(match decoded {
        DynamicImage::ImageLuma8(gray) => {
            let mut image = PlanarImage::zeros(1, h, w);
            for (x, y, px) in gray.enumerate_pixels() {
                image.set(0, y as usize, x as usize, px.0[0] as f32 / 255.0);
            }
            image
        }
        other => {
            let rgb = other.to_rgb8();
            let mut image = PlanarImage::zeros(3, h, w);
            for (x, y, px) in rgb.enumerate_pixels() {
                for ch in 0..3 {
                    image.set(ch, y as usize, x as usize, px.0[ch] as f32 / 255.0);
                }
            }
            image
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rgb_roundtrip_at_8bit_precision() {
        let data: Vec<f32> = (0..3 * 4 * 4).map(|i| (i as f32 / 47.0).fract()).collect();
        let image = PlanarImage::from_data(3, 4, 4, data);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.png");
        write_png(&image, &path).unwrap();
        let back = read_png(&path).unwrap();
        assert_eq!(back.channels(), 3);
        for (a, b) in image.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-6);
        }
    }

    #[test]
    fn gray_roundtrip_at_8bit_precision() {
        let data: Vec<f32> = (0..9).map(|i| i as f32 / 8.0).collect();
        let image = PlanarImage::from_data(1, 3, 3, data);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.png");
        write_png(&image, &path).unwrap();
        let back = read_png(&path).unwrap();
        assert_eq!(back.channels(), 1);
        for (a, b) in image.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-6);
        }
    }

    #[test]
    fn garbage_bytes_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("not.png");
        std::fs::write(&path, b"definitely not a png").unwrap();
        assert!(matches!(read_png(&path), Err(IoError::Png(_))));
    }
}
