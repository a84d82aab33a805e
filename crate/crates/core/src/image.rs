use crate::error::{Error, Result};

/// Luminance weights applied to (r, g, b).
pub const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// A 2D or 3D image in row-major order with interleaved channels.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    dims: Vec<usize>,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(dims: Vec<usize>, channels: usize, data: Vec<f64>) -> Result<Self> {
        if dims.is_empty() || dims.len() > 3 {
            return Err(Error::InvalidInput(format!(
                "images must have 1 to 3 spatial axes, got {}",
                dims.len()
            )));
        }
        if channels == 0 {
            return Err(Error::InvalidInput("image has no channels".into()));
        }
        let expected = dims.iter().product::<usize>() * channels;
        if data.len() != expected {
            return Err(Error::InvalidInput(format!(
                "image of dims {dims:?} with {channels} channels needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Image { dims, channels, data })
    }

    pub fn gray(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        Self::new(dims, 1, data)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixel_count(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// One channel as a scalar field.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        assert!(c < self.channels);
        self.data.iter().skip(c).step_by(self.channels).copied().collect()
    }

    /// Scalar field of a single-channel image, or the luminance of an RGB one.
    pub fn intensity(&self) -> Result<Vec<f64>> {
        match self.channels {
            1 => Ok(self.data.clone()),
            3 => Ok(self
                .data
                .chunks_exact(3)
                .map(|p| LUMA[0] * p[0] + LUMA[1] * p[1] + LUMA[2] * p[2])
                .collect()),
            c => Err(Error::InvalidInput(format!("expected 1 or 3 channels, got {c}"))),
        }
    }
}
