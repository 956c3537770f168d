use crate::error::Result;
use crate::resample::{resize_channels, resize_channels_backward};
use crate::scalar::Scalar;

/// Bilinear resize of an `h×w×channels` map to `out_h×out_w`, half-pixel centers.
pub fn upsample_bilinear<S: Scalar>(
    map: &[S],
    h: usize,
    w: usize,
    channels: usize,
    out_h: usize,
    out_w: usize,
) -> Result<Vec<S>> {
    resize_channels(map, h, w, channels, out_h, out_w)
}

/// Exact adjoint of [`upsample_bilinear`].
pub fn upsample_bilinear_backward<S: Scalar>(
    d_output: &[S],
    out_h: usize,
    out_w: usize,
    channels: usize,
    src_h: usize,
    src_w: usize,
) -> Result<Vec<S>> {
    resize_channels_backward(d_output, src_h, src_w, channels, out_h, out_w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;

    #[test]
    fn constant_map_is_preserved() {
        let map = vec![0.37f32; 3 * 2 * 2];
        let up = upsample_bilinear(&map, 3, 2, 2, 11, 7).unwrap();
        assert!(up.iter().all(|&v| v == 0.37));
    }

    #[test]
    fn single_pixel_broadcasts() {
        let up = upsample_bilinear(&[0.25f64, 0.75], 1, 1, 2, 5, 4).unwrap();
        for px in up.chunks(2) {
            assert_eq!(px, &[0.25, 0.75]);
        }
    }

    #[test]
    fn checkerboard_two_to_four_hand_values() {
        // source [[0,1],[1,0]]; output coordinate taps are 0, 0.25, 0.75, 1
        let up = upsample_bilinear(&[0.0f64, 1.0, 1.0, 0.0], 2, 2, 1, 4, 4).unwrap();
        let expected = [
            [0.0, 0.25, 0.75, 1.0],
            [0.25, 0.375, 0.625, 0.75],
            [0.75, 0.625, 0.375, 0.25],
            [1.0, 0.75, 0.25, 0.0],
        ];
        for y in 0..4 {
            for x in 0..4 {
                assert_eq!(up[y * 4 + x], expected[y][x], "({y},{x})");
            }
        }
    }

    #[test]
    fn zero_target_is_rejected() {
        assert!(upsample_bilinear(&[1.0f32], 1, 1, 1, 0, 3).is_err());
        assert!(upsample_bilinear_backward(&[1.0f32; 3], 1, 3, 1, 2, 2).is_ok());
        assert!(upsample_bilinear_backward(&[1.0f32; 4], 1, 3, 1, 2, 2).is_err());
    }

    #[test]
    fn backward_of_ones_conserves_mass() {
        let (h, w, oh, ow, ch) = (3, 4, 10, 7, 2);
        let ones = vec![1.0f64; oh * ow * ch];
        let back = upsample_bilinear_backward(&ones, oh, ow, ch, h, w).unwrap();
        for c in 0..ch {
            let total: f64 = back.iter().skip(c).step_by(ch).sum();
            assert!((total - (oh * ow) as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn same_size_backward_is_identity() {
        let g: Vec<f32> = (0..30).map(|i| i as f32 * 0.1 - 1.0).collect();
        assert_eq!(upsample_bilinear_backward(&g, 5, 3, 2, 5, 3).unwrap(), g);
    }

    #[test]
    fn adjoint_is_exact_in_rationals() {
        let a: Vec<Rational64> = (0..9).map(|i| Rational64::new(i * 3 % 7, 5)).collect();
        let g: Vec<Rational64> = (0..35).map(|i| Rational64::new(i % 11 - 4, 3)).collect();
        let up = upsample_bilinear(&a, 3, 3, 1, 7, 5).unwrap();
        let back = upsample_bilinear_backward(&g, 7, 5, 1, 3, 3).unwrap();
        let lhs: Rational64 = up.iter().zip(&g).map(|(x, y)| x * y).sum();
        let rhs: Rational64 = a.iter().zip(&back).map(|(x, y)| x * y).sum();
        assert_eq!(lhs, rhs);
    }
}
