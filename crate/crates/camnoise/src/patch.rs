//! The [`Patch`] type: a 2-D grayscale intensity grid in DN, the unit of
//! noise estimation.

use crate::error::{Error, Result};

/// A row-major grayscale patch with intensities in `[0, 255]` DN.
///
/// Values are stored as `f32`: clean patches may carry fractional DN (they
/// are real-valued signal levels before quantization), while corrupted
/// patches hold integers after quantization — both within the same range.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Patch {
    /// Builds a patch from row-major data; every value must be finite and
    /// within `[0, 255]`.
    pub fn from_data(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::domain("patch dimensions must be positive"));
        }
        if data.len() != width * height {
            return Err(Error::domain(format!(
                "patch data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 255.0) {
            return Err(Error::domain(format!(
                "patch intensity {bad} outside [0, 255]"
            )));
        }
        Ok(Patch { width, height, data })
    }

    /// A `size`×`size` patch filled with one intensity.
    pub fn constant(size: usize, value: f32) -> Result<Self> {
        Self::from_data(size, size, vec![value; size * size])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of pixels.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Row-major pixel data.
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Mean intensity in DN.
    pub fn mean(&self) -> f64 {
        let sum: f64 = self.data.iter().map(|v| f64::from(*v)).sum();
        sum / self.data.len() as f64
    }

    /// Population standard deviation of the pixel intensities in DN.
    pub fn std(&self) -> f64 {
        let mean = self.mean();
        let ss: f64 = self
            .data
            .iter()
            .map(|v| {
                let d = f64::from(*v) - mean;
                d * d
            })
            .sum();
        (ss / self.data.len() as f64).sqrt()
    }

    /// Adds a scalar offset to every pixel and clips to `[0, 255]`.
    pub fn offset_clipped(&self, offset: f64) -> Patch {
        let data = self
            .data
            .iter()
            .map(|v| (f64::from(*v) + offset).clamp(0.0, 255.0) as f32)
            .collect();
        Patch {
            width: self.width,
            height: self.height,
            data,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn construction_validates_shape_and_range() {
        assert!(Patch::from_data(2, 2, vec![0.0, 1.0, 2.0, 255.0]).is_ok());
        assert!(Patch::from_data(2, 2, vec![0.0; 3]).is_err());
        assert!(Patch::from_data(0, 2, vec![]).is_err());
        assert!(Patch::from_data(1, 1, vec![-0.5]).is_err());
        assert!(Patch::from_data(1, 1, vec![255.5]).is_err());
        assert!(Patch::from_data(1, 1, vec![f32::NAN]).is_err());
    }

    #[test]
    fn moments_match_hand_values() {
        let p = Patch::from_data(2, 2, vec![1.0, 3.0, 5.0, 7.0]).unwrap();
        assert_relative_eq!(p.mean(), 4.0);
        assert_relative_eq!(p.std(), 5.0_f64.sqrt()); // var = (9+1+1+9)/4 = 5
    }

    #[test]
    fn offset_clips_at_both_ends() {
        let p = Patch::from_data(1, 3, vec![0.0, 128.0, 250.0]).unwrap();
        let up = p.offset_clipped(20.0);
        assert_eq!(up.data(), &[20.0, 148.0, 255.0]);
        let down = p.offset_clipped(-20.0);
        assert_eq!(down.data(), &[0.0, 108.0, 230.0]);
    }
}
