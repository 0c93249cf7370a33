//! PFM: the lossless float image format.
//!
//! Header is three text lines (magic, `width height`, scale whose sign
//! gives the byte order), then rows of f32 samples stored bottom-up. We
//! always write little-endian (negative scale) and read either order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::IoError;
use crate::geom::DepthImage;
use crate::raster::PlanarImage;

pub fn write_pfm(image: &PlanarImage, path: &Path) -> Result<(), IoError> {
    let magic = match image.channels() {
        1 => "Pf",
        3 => "PF",
        c => return Err(IoError::Unsupported(format!("{c}-channel PFM"))),
    };
    let (c, h, w) = (image.channels(), image.height(), image.width());
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "{magic}\n{w} {h}\n-1\n")?;
    for row in (0..h).rev() {
        for col in 0..w {
            for ch in 0..c {
                out.write_all(&image.get(ch, row, col).to_le_bytes())?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_pfm(path: &Path) -> Result<PlanarImage, IoError> {
    let mut r = BufReader::new(File::open(path)?);
    let magic = header_token(&mut r, path)?;
    let channels = match magic.as_str() {
        "Pf" => 1,
        "PF" => 3,
        other => return Err(IoError::parse(path, format!("bad PFM magic {other:?}"))),
    };
    let w: usize = parse_token(&mut r, path, "width")?;
    let h: usize = parse_token(&mut r, path, "height")?;
    let scale: f64 = parse_token(&mut r, path, "scale")?;
    if w == 0 || h == 0 {
        return Err(IoError::parse(path, "zero image dimension"));
    }
    let little_endian = scale < 0.0;
    let mut image = PlanarImage::zeros(channels, h, w);
    let mut buf = [0u8; 4];
    for row in (0..h).rev() {
        for col in 0..w {
            for ch in 0..channels {
                r.read_exact(&mut buf)
                    .map_err(|e| IoError::parse(path, format!("truncated data: {e}")))?;
                let v = if little_endian {
                    f32::from_le_bytes(buf)
                } else {
                    f32::from_be_bytes(buf)
                };
                image.set(ch, row, col, v);
            }
        }
    }
    Ok(image)
}

/// Depth as a single-channel PFM; values pass through f32, which is the
/// format's precision, not ours.
pub fn write_depth_pfm(depth: &DepthImage, path: &Path) -> Result<(), IoError> {
    let data: Vec<f32> = depth.data().iter().map(|&z| z as f32).collect();
    write_pfm(
        &PlanarImage::from_data(1, depth.height(), depth.width(), data),
        path,
    )
}

pub fn read_depth_pfm(path: &Path) -> Result<DepthImage, IoError> {
    let image = read_pfm(path)?;
    if image.channels() != 1 {
        return Err(IoError::parse(path, "depth PFM must be single-channel"));
    }
    let data: Vec<f64> = image.data().iter().map(|&v| v as f64).collect();
    Ok(DepthImage::from_data(image.height(), image.width(), data))
}

/// Next whitespace-delimited token; `#` comments run to end of line.
pub(super) fn header_token(r: &mut impl Read, path: &Path) -> Result<String, IoError> {
    let mut token = String::new();
    let mut in_comment = false;
    let mut byte = [0u8; 1];
    loop {
        if r.read(&mut byte)? == 0 {
            if token.is_empty() {
                return Err(IoError::parse(path, "unexpected end of header"));
            }
            return Ok(token);
        }
        let ch = byte[0] as char;
        if in_comment {
            in_comment = ch != '\n';
        } else if ch == '#' && token.is_empty() {
            in_comment = true;
        } else if ch.is_ascii_whitespace() {
            if !token.is_empty() {
                return Ok(token);
            }
        } else {
            token.push(ch);
        }
    }
}

pub(super) fn parse_token<T: std::str::FromStr>(
    r: &mut impl Read,
    path: &Path,
    what: &str,
) -> Result<T, IoError> {
    let token = header_token(r, path)?;
    token
        .parse()
        .map_err(|_| IoError::parse(path, format!("bad {what} {token:?}")))
}
