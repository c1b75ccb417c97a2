//! Object point-cloud extraction: masked back-projection, depth-outlier
//! filtering, and size-capped subsampling.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};
use crate::image::{depth_valid, DepthMap, SegMask};
use crate::PointCloud;

/// Depth-outlier filter and subsampling parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FilterConfig {
    /// Absolute depth-deviation threshold in meters.
    pub tau_abs: f64,
    /// Relative deviation threshold as a fraction of the median depth.
    pub tau_rel: f64,
    /// Hard cap on the number of returned points.
    pub max_points: usize,
    /// Seed for the subsampling generator.
    pub seed: u64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { tau_abs: 1.5, tau_rel: 0.2, max_points: 512, seed: 0 }
    }
}

/// Median of a slice (mean of the two middle order statistics for even
/// lengths). Panics on empty input.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("non-finite value in median"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Back-project the masked pixels of `depth`, drop occlusion-boundary
/// outliers whose depth deviates from the masked median by more than
/// `max(tau_abs, tau_rel * median)`, and subsample to at most
/// `max_points` with a seeded generator (order-preserving).
pub fn extract_object_points(
    depth: &DepthMap,
    mask: &SegMask,
    cam: &CameraIntrinsics,
    cfg: &FilterConfig,
) -> Result<PointCloud> {
    let (h, w) = depth.dim();
    if mask.dim() != (h, w) || (h, w) != (cam.height, cam.width) {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", cam.height, cam.width),
            got: format!("depth {:?}, mask {:?}", depth.dim(), mask.dim()),
        });
    }

    let mut depths = Vec::new();
    let mut raw: Vec<Vector3<f64>> = Vec::new();
    for i in 0..h {
        for j in 0..w {
            let d = depth[[i, j]];
            if mask[[i, j]] > 0.5 && depth_valid(d) {
                depths.push(d);
                raw.push(cam.backproject_pixel(j as f64, i as f64, d));
            }
        }
    }
    if raw.is_empty() {
        return Err(Error::EmptyObject);
    }

    let med = median(&depths);
    let tol = cfg.tau_abs.max(cfg.tau_rel * med);
    let mut kept: Vec<Vector3<f64>> = raw
        .into_iter()
        .filter(|p| (p.z - med).abs() <= tol)
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyObject);
    }

    if kept.len() > cfg.max_points {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut idx =
            rand::seq::index::sample(&mut rng, kept.len(), cfg.max_points).into_vec();
        idx.sort_unstable();
        kept = idx.into_iter().map(|i| kept[i]).collect();
    }
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn cam() -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 100.0, 32.0, 32.0, 64, 64).unwrap()
    }

    #[test]
    fn empty_mask_is_an_error() {
        let depth = Array2::from_elem((64, 64), 5.0);
        let mask = Array2::zeros((64, 64));
        assert!(matches!(
            extract_object_points(&depth, &mask, &cam(), &FilterConfig::default()),
            Err(Error::EmptyObject)
        ));
    }

    #[test]
    fn outliers_at_twice_median_are_removed() {
        // 10% of masked pixels at depth 2x median, tau_rel such that the
        // relative branch dominates.
        let mut depth = Array2::from_elem((64, 64), 10.0);
        let mut mask: SegMask = Array2::zeros((64, 64));
        let mut k = 0;
        for i in 10..30 {
            for j in 10..30 {
                mask[[i, j]] = 1.0;
                if k % 10 == 0 {
                    depth[[i, j]] = 20.0;
                }
                k += 1;
            }
        }
        let cfg = FilterConfig { tau_rel: 0.3, ..FilterConfig::default() };
        let pts = extract_object_points(&depth, &mask, &cam(), &cfg).unwrap();
        assert!(!pts.is_empty());
        assert!(pts.iter().all(|p| (p.z - 10.0).abs() < 1e-9));
        assert_eq!(pts.len(), 400 - 40);
    }

    #[test]
    fn subsampling_caps_and_is_deterministic() {
        let cfg = FilterConfig { max_points: 300, ..FilterConfig::default() };
        let depth = Array2::from_elem((64, 64), 8.0);
        let mut mask: SegMask = Array2::zeros((64, 64));
        for i in 20..40 {
            for j in 20..40 {
                mask[[i, j]] = 1.0;
            }
        }
        let a = extract_object_points(&depth, &mask, &cam(), &cfg).unwrap();
        let b = extract_object_points(&depth, &mask, &cam(), &cfg).unwrap();
        assert_eq!(a.len(), 300);
        assert_eq!(a, b);
        let cfg2 = FilterConfig { seed: 1, ..cfg };
        let c = extract_object_points(&depth, &mask, &cam(), &cfg2).unwrap();
        assert_eq!(c.len(), 300);
        assert_ne!(a, c);
    }

    #[test]
    fn output_is_subset_of_masked_backprojection() {
        use crate::camera::backproject;
        let mut depth = Array2::from_elem((64, 64), 6.0);
        let mut mask: SegMask = Array2::zeros((64, 64));
        for i in 5..25 {
            for j in 30..50 {
                mask[[i, j]] = 1.0;
                depth[[i, j]] = 6.0 + 0.01 * (i + j) as f64;
            }
        }
        let pts =
            extract_object_points(&depth, &mask, &cam(), &FilterConfig::default()).unwrap();
        let masked: DepthMap = &depth * &mask;
        let full = backproject(&masked, &cam()).unwrap();
        let mut cursor = 0;
        for p in &pts {
            // Order-preserving subset of the masked back-projection.
            while cursor < full.len() && full[cursor] != *p {
                cursor += 1;
            }
            assert!(cursor < full.len(), "point not found in masked cloud");
            cursor += 1;
        }
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
