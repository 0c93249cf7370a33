//! ASCII PLY point clouds with properties x,y,z[,red,green,blue][,label].
//!
//! Coordinates print in shortest round-trip form, so a write/read cycle
//! reproduces the f64 values bit-exactly; colors quantize to 8 bits.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::IoError;
use crate::geom::{Point3, PointCloud};

pub fn write_ply(cloud: &PointCloud, path: &Path) -> Result<(), IoError> {
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(out, "element vertex {}", cloud.points.len());
    out.push_str("property double x\nproperty double y\nproperty double z\n");
    if cloud.color.is_some() {
        out.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    if cloud.label.is_some() {
        out.push_str("property uint label\n");
    }
    out.push_str("end_header\n");
    for (idx, p) in cloud.points.iter().enumerate() {
        let _ = write!(out, "{} {} {}", p.x, p.y, p.z);
        if let Some(color) = &cloud.color {
            for ch in color[idx] {
                let _ = write!(out, " {}", (ch.clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
        if let Some(label) = &cloud.label {
            let _ = write!(out, " {}", label[idx]);
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_ply(path: &Path) -> Result<PointCloud, IoError> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let mut next = || -> Result<String, IoError> {
        lines
            .next()
            .transpose()?
            .ok_or_else(|| IoError::parse(path, "unexpected end of file"))
    };
    if next()?.trim() != "ply" {
        return Err(IoError::parse(path, "missing ply magic"));
    }
    if next()?.trim() != "format ascii 1.0" {
        return Err(IoError::Unsupported("only ascii 1.0 PLY".into()));
    }

    let mut count = None;
    let mut props: Vec<String> = Vec::new();
    loop {
        let line = next()?;
        let line = line.trim();
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            ["end_header"] => break,
            ["comment", ..] => {}
            ["element", "vertex", n] => {
                count = Some(
                    n.parse::<usize>()
                        .map_err(|_| IoError::parse(path, format!("bad vertex count {n:?}")))?,
                );
            }
            ["element", other, ..] => {
                return Err(IoError::Unsupported(format!("PLY element {other}")));
            }
            ["property", _, name] => props.push((*name).to_string()),
            _ => return Err(IoError::parse(path, format!("bad header line {line:?}"))),
        }
    }
    let count = count.ok_or_else(|| IoError::parse(path, "no vertex element"))?;

    let index_of = |name: &str| props.iter().position(|p| p == name);
    let (xi, yi, zi) = match (index_of("x"), index_of("y"), index_of("z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return Err(IoError::parse(path, "missing x, y or z property")),
    };
    let rgb = match (index_of("red"), index_of("green"), index_of("blue")) {
        (Some(r), Some(g), Some(b)) => Some([r, g, b]),
        _ => None,
    };
    let label_idx = index_of("label");

    let mut points = Vec::with_capacity(count);
    let mut color = rgb.map(|_| Vec::with_capacity(count));
    let mut label = label_idx.map(|_| Vec::with_capacity(count));
    for _ in 0..count {
        let line = next()?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != props.len() {
            return Err(IoError::parse(
                path,
                format!("{} values for {} properties", fields.len(), props.len()),
            ));
        }
        let num = |idx: usize| -> Result<f64, IoError> {
            fields[idx]
                .parse()
                .map_err(|_| IoError::parse(path, format!("bad number {:?}", fields[idx])))
        };
        points.push(Point3::new(num(xi)?, num(yi)?, num(zi)?));
        if let (Some(c), Some([r, g, b])) = (&mut color, rgb) {
            c.push([
                num(r)? as f32 / 255.0,
                num(g)? as f32 / 255.0,
                num(b)? as f32 / 255.0,
            ]);
        }
        if let (Some(l), Some(idx)) = (&mut label, label_idx) {
            let v = num(idx)?;
            if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
                return Err(IoError::parse(path, format!("bad label {v}")));
            }
            l.push(v as u32);
        }
    }
    Ok(PointCloud::new(points, color, label)?)
}
