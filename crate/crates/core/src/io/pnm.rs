//! Binary PNM rasters: P5 grayscale and P6 color.
//!
//! 16-bit samples are big-endian per the format. Depth maps quantize
//! through a configurable divisor (e.g. 1000 for millimeters in a u16);
//! masks, labels and level maps store their bytes as-is.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::pfm::parse_token;
use super::IoError;
use crate::geom::DepthImage;
use crate::raster::{LabelMap, Mask, PlanarImage};

fn write_pnm_header(
    out: &mut impl Write,
    magic: &str,
    w: usize,
    h: usize,
    maxval: u32,
) -> Result<(), IoError> {
    write!(out, "{magic}\n{w} {h}\n{maxval}\n")?;
    Ok(())
}

fn read_pnm_header(
    r: &mut impl Read,
    path: &Path,
    expect_magic: &str,
) -> Result<(usize, usize, u32), IoError> {
    let magic = super::pfm::header_token(r, path)?;
    if magic != expect_magic {
        return Err(IoError::parse(
            path,
            format!("expected {expect_magic}, got {magic:?}"),
        ));
    }
    let w: usize = parse_token(r, path, "width")?;
    let h: usize = parse_token(r, path, "height")?;
    let maxval: u32 = parse_token(r, path, "maxval")?;
    if w == 0 || h == 0 || maxval == 0 || maxval > 65535 {
        return Err(IoError::parse(path, "bad PNM dimensions or maxval"));
    }
    Ok((w, h, maxval))
}

fn read_payload(r: &mut impl Read, path: &Path, len: usize) -> Result<Vec<u8>, IoError> {
    let mut data = vec![0u8; len];
    r.read_exact(&mut data)
        .map_err(|e| IoError::parse(path, format!("truncated data: {e}")))?;
    let mut trailer = [0u8; 1];
    if r.read(&mut trailer)? != 0 {
        return Err(IoError::parse(path, "trailing bytes"));
    }
    Ok(data)
}

/// Raw 8- or 16-bit P5 write; samples must fit the maxval.
pub(super) fn write_pgm_raw(
    samples: &[u16],
    w: usize,
    h: usize,
    maxval: u32,
    path: &Path,
) -> Result<(), IoError> {
    debug_assert_eq!(samples.len(), w * h);
    let mut out = BufWriter::new(File::create(path)?);
    write_pnm_header(&mut out, "P5", w, h, maxval)?;
    if maxval < 256 {
        for &s in samples {
            out.write_all(&[s as u8])?;
        }
    } else {
        for &s in samples {
            out.write_all(&s.to_be_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub(super) fn read_pgm_raw(path: &Path) -> Result<(Vec<u16>, usize, usize, u32), IoError> {
    let mut r = BufReader::new(File::open(path)?);
    let (w, h, maxval) = read_pnm_header(&mut r, path, "P5")?;
    let samples = if maxval < 256 {
        read_payload(&mut r, path, w * h)?
            .into_iter()
            .map(u16::from)
            .collect()
    } else {
        read_payload(&mut r, path, 2 * w * h)?
            .chunks_exact(2)
            .map(|b| u16::from_be_bytes([b[0], b[1]]))
            .collect()
    };
    Ok((samples, w, h, maxval))
}

/// Depth to 16-bit PGM: stored sample = round(z * divisor), clamped to
/// u16; zero stays the invalid marker.
pub fn write_depth_pgm(depth: &DepthImage, divisor: f64, path: &Path) -> Result<(), IoError> {
    if !(divisor > 0.0) || !divisor.is_finite() {
        return Err(IoError::Unsupported(format!("depth divisor {divisor}")));
    }
    let samples: Vec<u16> = depth
        .data()
        .iter()
        .map(|&z| (z * divisor).round().clamp(0.0, 65535.0) as u16)
        .collect();
    write_pgm_raw(&samples, depth.width(), depth.height(), 65535, path)
}

pub fn read_depth_pgm(path: &Path, divisor: f64) -> Result<DepthImage, IoError> {
    if !(divisor > 0.0) || !divisor.is_finite() {
        return Err(IoError::Unsupported(format!("depth divisor {divisor}")));
    }
    let (samples, w, h, _) = read_pgm_raw(path)?;
    let data = samples.into_iter().map(|s| s as f64 / divisor).collect();
    Ok(DepthImage::from_data(h, w, data))
}

pub fn write_mask_pgm(mask: &Mask, path: &Path) -> Result<(), IoError> {
    let samples: Vec<u16> = mask
        .data()
        .iter()
        .map(|&b| if b { 255 } else { 0 })
        .collect();
    write_pgm_raw(&samples, mask.width(), mask.height(), 255, path)
}

pub fn read_mask_pgm(path: &Path) -> Result<Mask, IoError> {
    let (samples, w, h, _) = read_pgm_raw(path)?;
    Ok(Mask::from_data(
        h,
        w,
        samples.into_iter().map(|s| s != 0).collect(),
    ))
}

pub fn write_labels_pgm(labels: &LabelMap, path: &Path) -> Result<(), IoError> {
    let samples: Vec<u16> = labels.data().iter().map(|&l| u16::from(l)).collect();
    write_pgm_raw(&samples, labels.width(), labels.height(), 255, path)
}

pub fn read_labels_pgm(path: &Path) -> Result<LabelMap, IoError> {
    let (samples, w, h, maxval) = read_pgm_raw(path)?;
    if maxval > 255 {
        return Err(IoError::parse(path, "label PGM must be 8-bit"));
    }
    Ok(LabelMap::from_data(
        h,
        w,
        samples.into_iter().map(|s| s as u8).collect(),
    ))
}

/// Color image to binary PPM; channel values clamp to [0, 1] and quantize
/// to 8 bits.
pub fn write_ppm(image: &PlanarImage, path: &Path) -> Result<(), IoError> {
    if image.channels() != 3 {
        return Err(IoError::Unsupported(format!(
            "{}-channel PPM",
            image.channels()
        )));
    }
    let (h, w) = (image.height(), image.width());
    let mut out = BufWriter::new(File::create(path)?);
    write_pnm_header(&mut out, "P6", w, h, 255)?;
    for row in 0..h {
        for col in 0..w {
            let px = [0, 1, 2].map(|ch| quantize8(image.get(ch, row, col)));
            out.write_all(&px)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_ppm(path: &Path) -> Result<PlanarImage, IoError> {
    let mut r = BufReader::new(File::open(path)?);
    let (w, h, maxval) = read_pnm_header(&mut r, path, "P6")?;
    if maxval != 255 {
        return Err(IoError::parse(path, "only 8-bit PPM supported"));
    }
    let bytes = read_payload(&mut r, path, 3 * w * h)?;
    let mut image = PlanarImage::zeros(3, h, w);
    for (idx, px) in bytes.chunks_exact(3).enumerate() {
        let (row, col) = (idx / w, idx % w);
        for (ch, &v) in px.iter().enumerate() {
            image.set(ch, row, col, v as f32 / 255.0);
        }
    }
    Ok(image)
}

pub(super) fn quantize8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}
