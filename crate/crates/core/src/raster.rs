//! Planar image, label map and mask containers shared across the pipeline.

use serde::{Deserialize, Serialize};

/// Sentinel class id for pixels that carry no label.
pub const IGNORE_LABEL: u8 = 255;

/// A channel-planar float image (CHW layout, row-major within a plane).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanarImage {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl PlanarImage {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    /// Wraps raw CHW data. Panics if the length does not match the shape.
    pub fn from_data(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), channels * height * width, "CHW length mismatch");
        Self {
            channels,
            height,
            width,
            data,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, ch: usize, row: usize, col: usize) -> f32 {
        self.data[(ch * self.height + row) * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, ch: usize, row: usize, col: usize, value: f32) {
        self.data[(ch * self.height + row) * self.width + col] = value;
    }

    /// One full channel plane, row-major.
    pub fn plane(&self, ch: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[ch * n..(ch + 1) * n]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }
}

/// Per-pixel class ids with [`IGNORE_LABEL`] marking unlabeled pixels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMap {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl LabelMap {
    /// A map with every pixel set to [`IGNORE_LABEL`].
    pub fn ignored(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![IGNORE_LABEL; height * width],
        }
    }

    pub fn from_data(height: usize, width: usize, data: Vec<u8>) -> Self {
        assert_eq!(data.len(), height * width, "label map length mismatch");
        Self {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, label: u8) {
        self.data[row * self.width + col] = label;
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    /// Number of pixels with a real (non-ignore) label.
    pub fn labeled_count(&self) -> usize {
        self.data.iter().filter(|&&l| l != IGNORE_LABEL).count()
    }
}

/// A per-pixel boolean mask.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mask {
    height: usize,
    width: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn filled(height: usize, width: usize, value: bool) -> Self {
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn from_data(height: usize, width: usize, data: Vec<bool>) -> Self {
        assert_eq!(data.len(), height * width, "mask length mismatch");
        Self {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.data[row * self.width + col] = value;
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }
}
