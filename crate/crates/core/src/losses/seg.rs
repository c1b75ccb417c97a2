//! Multi-scale squared-L2 segmentation loss.

use ndarray::Array2;

use super::pyramid::{build_pyramid, downsample_adjoint, Pyramid};
use crate::error::{Error, Result};
use crate::image::SegMask;

/// Sum over pyramid levels of the per-pixel mean squared difference
/// between the input mask and the rendered mask. The per-level mean
/// keeps every level equally weighted.
pub fn seg_loss(mask_in: &SegMask, mask_rend: &SegMask, levels: usize) -> Result<f64> {
    check_dims(mask_in, mask_rend)?;
    let pyr_in = build_pyramid(mask_in, levels);
    Ok(seg_loss_with_grad(&pyr_in, mask_rend, levels).0)
}

/// Loss plus its gradient w.r.t. the rendered mask at full resolution.
/// The input-mask pyramid is taken prebuilt so fitting loops can reuse it.
pub fn seg_loss_with_grad(
    pyr_in: &Pyramid,
    mask_rend: &SegMask,
    levels: usize,
) -> (f64, Array2<f64>) {
    let pyr_rend = build_pyramid(mask_rend, levels);
    assert_eq!(pyr_in.len(), pyr_rend.len(), "pyramids must match");
    let n_levels = pyr_rend.len();

    let mut loss = 0.0;
    let mut direct: Vec<Array2<f64>> = Vec::with_capacity(n_levels);
    for (a, b) in pyr_in.levels.iter().zip(&pyr_rend.levels) {
        let diff = b - a;
        let n = diff.len() as f64;
        loss += diff.mapv(|d| d * d).sum() / n;
        direct.push(diff.mapv(|d| 2.0 * d / n));
    }

    // Accumulate level gradients down to full resolution through the
    // downsampling adjoints.
    let mut grad = direct.pop().expect("at least one level");
    for level in (0..n_levels - 1).rev() {
        let fine_dim = pyr_rend.levels[level].dim();
        let mut g = downsample_adjoint(&grad, fine_dim);
        g += &direct[level];
        grad = g;
    }
    (loss, grad)
}

fn check_dims(a: &SegMask, b: &SegMask) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: format!("{:?}", a.dim()),
            got: format!("{:?}", b.dim()),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_masks_give_zero() {
        let m = Array2::from_shape_fn((16, 24), |(i, j)| ((i + j) % 2) as f64);
        assert_eq!(seg_loss(&m, &m, 8).unwrap(), 0.0);
    }

    #[test]
    fn single_level_2x2_one_pixel_diff() {
        // 2x2 stays single-level; mean of squares = 1/4.
        let a = array![[0.0, 0.0], [0.0, 0.0]];
        let b = array![[1.0, 0.0], [0.0, 0.0]];
        assert_relative_eq!(seg_loss(&a, &b, 8).unwrap(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn symmetric_in_arguments() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = Array2::from_shape_fn((12, 18), |_| rng.random_range(0.0..1.0));
        let b = Array2::from_shape_fn((12, 18), |_| rng.random_range(0.0..1.0));
        assert_relative_eq!(
            seg_loss(&a, &b, 8).unwrap(),
            seg_loss(&b, &a, 8).unwrap(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn size_mismatch_is_an_error() {
        let a = Array2::<f64>::zeros((4, 4));
        let b = Array2::<f64>::zeros((4, 5));
        assert!(seg_loss(&a, &b, 8).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = Array2::from_shape_fn((9, 11), |_| rng.random_range(0.0..1.0));
        let mut b = Array2::from_shape_fn((9, 11), |_| rng.random_range(0.0..1.0));
        let pyr_in = build_pyramid(&a, 8);
        let (_, grad) = seg_loss_with_grad(&pyr_in, &b, 8);
        let h = 1e-6;
        for &(i, j) in &[(0usize, 0usize), (4, 5), (8, 10), (3, 2)] {
            let orig = b[[i, j]];
            b[[i, j]] = orig + h;
            let lp = seg_loss(&a, &b, 8).unwrap();
            b[[i, j]] = orig - h;
            let lm = seg_loss(&a, &b, 8).unwrap();
            b[[i, j]] = orig;
            let fd = (lp - lm) / (2.0 * h);
            assert_relative_eq!(grad[[i, j]], fd, max_relative = 1e-6, epsilon = 1e-10);
        }
    }
}
