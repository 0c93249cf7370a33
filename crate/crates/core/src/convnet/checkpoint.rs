//! Network checkpoints.
//!
//! Layout: a 16-byte magic, a u32 tensor count, then each tensor as a
//! u32 rank, u32 dimensions, and f64 data. All integers and floats are
//! little-endian. Tensors appear in layer order, weight before bias, so
//! the file fully determines the architecture.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::net::{ConvLayer, SegNet};
use super::tensor::Tensor;
use super::ConvError;

const MAGIC: &[u8; 16] = b"SURFCONV-NET v1\n";

pub fn save_checkpoint(net: &SegNet, path: &Path) -> Result<(), ConvError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    let tensors: Vec<&Tensor> = net
        .layers()
        .iter()
        .flat_map(|l| [&l.weight, &l.bias])
        .collect();
    write_u32(&mut w, tensors.len() as u32)?;
    for t in tensors {
        write_u32(&mut w, t.shape().len() as u32)?;
        for &d in t.shape() {
            write_u32(&mut w, d as u32)?;
        }
        for &v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<SegNet, ConvError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 16];
    read_exact(&mut r, &mut magic)?;
    if &magic != MAGIC {
        return Err(ConvError::BadCheckpoint("unrecognized magic".into()));
    }
    let count = read_u32(&mut r)? as usize;
    if count == 0 || !count.is_multiple_of(2) {
        return Err(ConvError::BadCheckpoint(format!(
            "tensor count {count} is not a positive even number"
        )));
    }
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let ndim = read_u32(&mut r)? as usize;
        if ndim == 0 || ndim > 4 {
            return Err(ConvError::BadCheckpoint(format!("tensor rank {ndim}")));
        }
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(read_u32(&mut r)? as usize);
        }
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        let mut buf = [0u8; 8];
        for _ in 0..len {
            read_exact(&mut r, &mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        tensors.push(
            Tensor::from_data(&shape, data).map_err(|e| ConvError::BadCheckpoint(e.to_string()))?,
        );
    }
    let mut trailer = [0u8; 1];
    if r.read(&mut trailer)? != 0 {
        return Err(ConvError::BadCheckpoint("trailing bytes".into()));
    }

    let mut layers = Vec::with_capacity(count / 2);
    let mut it = tensors.into_iter();
    while let (Some(weight), Some(bias)) = (it.next(), it.next()) {
        layers.push(
            ConvLayer::new(weight, bias).map_err(|e| ConvError::BadCheckpoint(e.to_string()))?,
        );
    }
    SegNet::from_layers(layers).map_err(|e| ConvError::BadCheckpoint(e.to_string()))
}

fn write_u32(w: &mut impl Write, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn read_u32(r: &mut impl Read) -> Result<u32, ConvError> {
    let mut buf = [0u8; 4];
    read_exact(r, &mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<(), ConvError> {
    r.read_exact(buf)
        .map_err(|e| ConvError::BadCheckpoint(format!("truncated file: {e}")))
}
