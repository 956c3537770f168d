//! Floating-point RGB image planes.

use crate::error::{invalid_arg, Result};
use crate::scalar::{cast, Scalar};

/// Interleaved `H×W×3` RGB image with components nominally in `[0, 1]`.
///
/// Components are sRGB-encoded code values; nothing here linearizes them.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePlane<S> {
    height: usize,
    width: usize,
    data: Vec<S>,
}

impl<S: Scalar> ImagePlane<S> {
    pub fn new(height: usize, width: usize, data: Vec<S>) -> Result<Self> {
        if data.len() != height * width * 3 {
            return Err(invalid_arg!(
                "image data has {} components, expected {}x{}x3 = {}",
                data.len(),
                height,
                width,
                height * width * 3
            ));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, [S::zero(); 3])
    }

    pub fn filled(height: usize, width: usize, rgb: [S; 3]) -> Self {
        let mut data = Vec::with_capacity(height * width * 3);
        for _ in 0..height * width {
            data.extend_from_slice(&rgb);
        }
        Self {
            height,
            width,
            data,
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> [S; 3]) -> Self {
        let mut data = Vec::with_capacity(height * width * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(y, x));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn data(&self) -> &[S] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    #[inline]
    pub fn pixel(&self, y: usize, x: usize) -> [S; 3] {
        let o = (y * self.width + x) * 3;
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, y: usize, x: usize, rgb: [S; 3]) {
        let o = (y * self.width + x) * 3;
        self.data[o..o + 3].copy_from_slice(&rgb);
    }

    pub fn same_shape<T>(&self, other: &ImagePlane<T>) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub fn cast<T: Scalar>(&self) -> ImagePlane<T> {
        ImagePlane {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| cast(v)).collect(),
        }
    }

    /// Copy with every component clamped to `[0, 1]`.
    pub fn clamped(&self) -> Self {
        Self {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|v| v.clamp_unit()).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite_value())
    }
}

pub(crate) fn check_same_shape<A: Scalar, B: Scalar>(
    a: &ImagePlane<A>,
    b: &ImagePlane<B>,
) -> Result<()> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(invalid_arg!(
            "image shapes differ: {}x{} vs {}x{}",
            a.height(),
            a.width(),
            b.height(),
            b.width()
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_length() {
        assert!(ImagePlane::<f32>::new(2, 2, vec![0.0; 11]).is_err());
        assert!(ImagePlane::<f32>::new(2, 2, vec![0.0; 12]).is_ok());
    }

    #[test]
    fn pixel_addressing_is_row_major() {
        let img = ImagePlane::<f32>::from_fn(2, 3, |y, x| [y as f32, x as f32, 0.0]);
        assert_eq!(img.pixel(1, 2), [1.0, 2.0, 0.0]);
        assert_eq!(&img.data()[15..18], &[1.0, 2.0, 0.0]);
    }
}
