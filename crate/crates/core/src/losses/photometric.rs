//! Photometric reconstruction loss over a frame triplet.
//!
//! Pixels of the middle frame are back-projected with the composited
//! depth, moved by the object motion inside the mask (identity outside),
//! moved by the ego motion, projected into each adjacent frame and
//! compared by bilinear-sampled L1, per pyramid level.

use nalgebra::Vector3;
use ndarray::Array2;

use super::pyramid::{build_pyramid, downsample_adjoint, Pyramid};
use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};
use crate::image::{bilinear_sample, GrayImage, SegMask};
use crate::image::DepthMap;
use crate::mesh::RigidMotion;

/// Three consecutive grayscale frames of one vehicle with the rigid
/// motions needed to warp the outer frames into the middle one.
#[derive(Debug, Clone)]
pub struct FrameTriplet {
    /// `[I_prev, I_mid, I_next]`, intensities in `[0,1]`.
    pub images: [GrayImage; 3],
    /// Camera motion `mid -> prev` and `mid -> next` (maps middle-frame
    /// camera coordinates into the adjacent frame's camera).
    pub ego: [RigidMotion; 2],
    /// Additional rigid motion of the object region, applied before the
    /// ego motion, per adjacent frame.
    pub object: [RigidMotion; 2],
}

impl FrameTriplet {
    pub fn validate(&self) -> Result<()> {
        for m in self.ego.iter().chain(self.object.iter()) {
            if !m.is_valid() {
                return Err(Error::Config("triplet motion is not a valid rigid transform".into()));
            }
        }
        Ok(())
    }
}

/// A pixel at a pyramid level is only used when its full-resolution
/// support is entirely valid and inside the image (the validity
/// indicator is downsampled with zero padding, so border-contaminated
/// coarse pixels drop out of the mean).
const VALID_THRESH: f64 = 1.0 - 1e-9;

/// Photometric loss and its gradient w.r.t. the full-resolution
/// composited depth. Per level and adjacent frame the per-pixel L1
/// residuals are averaged over valid, in-bounds pixels; levels and
/// frames are summed. Fully out-of-bounds warps are excluded from the
/// mean rather than erroring.
pub fn photometric_loss(
    triplet: &FrameTriplet,
    composite_depth: &DepthMap,
    mask_in: &SegMask,
    cam: &CameraIntrinsics,
    levels: usize,
) -> Result<(f64, Array2<f64>)> {
    let dims = (cam.height, cam.width);
    if composite_depth.dim() != dims
        || mask_in.dim() != dims
        || triplet.images.iter().any(|im| im.dim() != dims)
    {
        return Err(Error::DimensionMismatch {
            expected: format!("{dims:?}"),
            got: format!(
                "depth {:?}, mask {:?}, images {:?}",
                composite_depth.dim(),
                mask_in.dim(),
                triplet.images[0].dim()
            ),
        });
    }

    let depth_pyr = build_pyramid(composite_depth, levels);
    let validity0 = composite_depth.mapv(|d| if crate::image::depth_valid(d) { 1.0 } else { 0.0 });
    let mut valid_levels = vec![validity0];
    while valid_levels.len() < depth_pyr.len() {
        valid_levels.push(super::pyramid::downsample_zeropad(valid_levels.last().unwrap()));
    }
    let valid_pyr = Pyramid { levels: valid_levels };
    let mask_pyr = build_pyramid(mask_in, levels);
    let mid_pyr = build_pyramid(&triplet.images[1], levels);
    let adj_pyrs = [
        build_pyramid(&triplet.images[0], levels),
        build_pyramid(&triplet.images[2], levels),
    ];

    let n_levels = depth_pyr.len();
    let mut total = 0.0;
    let mut level_grads: Vec<Array2<f64>> = Vec::with_capacity(n_levels);

    for level in 0..n_levels {
        let cam_l = cam.at_level(level);
        let mut grad = Array2::<f64>::zeros(depth_pyr.levels[level].dim());
        for (k, adj_pyr) in adj_pyrs.iter().enumerate() {
            let motion_obj = triplet.ego[k].compose(&triplet.object[k]);
            let motion_bg = triplet.ego[k];
            total += warp_level(
                &depth_pyr,
                &valid_pyr,
                &mask_pyr,
                &mid_pyr,
                adj_pyr,
                level,
                &cam_l,
                &motion_obj,
                &motion_bg,
                &mut grad,
            );
        }
        level_grads.push(grad);
    }

    // Chain per-level gradients back to full resolution.
    let mut grad = level_grads.pop().expect("at least one level");
    for level in (0..n_levels - 1).rev() {
        let fine_dim = depth_pyr.levels[level].dim();
        let mut g = downsample_adjoint(&grad, fine_dim);
        g += &level_grads[level];
        grad = g;
    }
    Ok((total, grad))
}

#[allow(clippy::too_many_arguments)]
fn warp_level(
    depth_pyr: &Pyramid,
    valid_pyr: &Pyramid,
    mask_pyr: &Pyramid,
    mid_pyr: &Pyramid,
    adj_pyr: &Pyramid,
    level: usize,
    cam: &CameraIntrinsics,
    motion_obj: &RigidMotion,
    motion_bg: &RigidMotion,
    grad: &mut Array2<f64>,
) -> f64 {
    let depth = &depth_pyr.levels[level];
    let valid = &valid_pyr.levels[level];
    let mask = &mask_pyr.levels[level];
    let mid = &mid_pyr.levels[level];
    let adj = &adj_pyr.levels[level];
    let (h, w) = depth.dim();

    let mut sum = 0.0;
    let mut count = 0usize;
    let mut pixel_grads: Vec<(usize, usize, f64)> = Vec::new();

    for i in 0..h {
        for j in 0..w {
            if valid[[i, j]] < VALID_THRESH {
                continue;
            }
            let d = depth[[i, j]];
            if d <= 0.0 {
                continue;
            }
            let motion = if mask[[i, j]] > 0.5 { motion_obj } else { motion_bg };
            let ray = cam.ray(j as f64, i as f64);
            let warped = motion.r * (d * ray) + motion.t;
            if warped.z <= 1e-6 {
                continue;
            }
            let Some((u, v, z)) = cam.project(&warped) else { continue };
            let _ = z;
            let Some((val, gu, gv)) = bilinear_sample(adj, u, v) else { continue };
            let r = val - mid[[i, j]];
            sum += r.abs();
            count += 1;

            // d residual / d depth through the warp chain.
            let dwdd: Vector3<f64> = motion.r * ray;
            let iz = 1.0 / warped.z;
            let du_dw = Vector3::new(cam.fx * iz, 0.0, -cam.fx * warped.x * iz * iz);
            let dv_dw = Vector3::new(0.0, cam.fy * iz, -cam.fy * warped.y * iz * iz);
            let dr_dd = gu * du_dw.dot(&dwdd) + gv * dv_dw.dot(&dwdd);
            pixel_grads.push((i, j, r.signum() * dr_dd));
        }
    }

    if count == 0 {
        return 0.0;
    }
    let inv = 1.0 / count as f64;
    for (i, j, g) in pixel_grads {
        grad[[i, j]] += g * inv;
    }
    sum * inv
}
