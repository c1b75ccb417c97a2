//! Training objectives: multi-scale segmentation loss, robust one-sided
//! chamfer with a gradient-isolated auxiliary position, photometric
//! reconstruction over frame triplets, and their weighted composition
//! with hindsight selection over orientation hypotheses.

mod chamfer;
mod photometric;
pub mod pyramid;
mod seg;

pub use chamfer::{chamfer_loss, huber, pose_cd, ChamferResult};
pub use photometric::{photometric_loss, FrameTriplet};
pub use pyramid::{build_pyramid, downsample, downsample_adjoint, Pyramid};
pub use seg::{seg_loss, seg_loss_with_grad};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::manifold::ShapeCoeffs;
use crate::mesh::ObjectPose;

/// Loss weights and the Huber scale.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LossWeights {
    pub w_rec: f64,
    pub w_cd: f64,
    pub w_seg: f64,
    /// Huber transition point in meters.
    pub huber_delta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { w_rec: 0.1, w_cd: 1.0, w_seg: 1.0, huber_delta: 0.5 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> crate::Result<()> {
        if self.w_rec < 0.0 || self.w_cd < 0.0 || self.w_seg < 0.0 {
            return Err(crate::Error::Config("loss weights must be nonnegative".into()));
        }
        if self.huber_delta <= 0.0 {
            return Err(crate::Error::Config("huber_delta must be positive".into()));
        }
        Ok(())
    }
}

/// Per-object unknowns: pose, shape coefficients, and the auxiliary
/// position used by the gradient-isolated chamfer term.
#[derive(Debug, Clone, PartialEq)]
pub struct FitState {
    pub pose: ObjectPose,
    pub z: ShapeCoeffs,
    pub x_aux: Vector3<f64>,
}

impl FitState {
    pub fn new(pose: ObjectPose, k: usize) -> Self {
        Self { pose, z: ShapeCoeffs::zeros(k), x_aux: pose.position }
    }
}

/// Loss components of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub seg: f64,
    pub cd: f64,
    pub rec: f64,
    /// `w_cd * cd + w_seg * seg`.
    pub single: f64,
    /// Single-frame total: `single + w_rec * rec`.
    pub total: f64,
}

impl LossBreakdown {
    /// Compose from parts. `single` and `total` always reproduce the
    /// weighted sums exactly.
    pub fn from_parts(seg: f64, cd: f64, rec: f64, w: &LossWeights) -> Self {
        let single = single_image_loss(seg, cd, w);
        Self { seg, cd, rec, single, total: single + w.w_rec * rec }
    }
}

/// Single-image loss: weighted sum of the chamfer and segmentation
/// terms.
pub fn single_image_loss(seg: f64, cd: f64, w: &LossWeights) -> f64 {
    w.w_cd * cd + w.w_seg * seg
}

/// Multi-image total: reconstruction term plus the mean of the three
/// per-frame single-image losses.
pub fn total_loss(singles: [f64; 3], rec: f64, w: &LossWeights) -> f64 {
    w.w_rec * rec + (singles[0] + singles[1] + singles[2]) / 3.0
}

/// Minimum loss over orientation hypotheses, ties broken toward the
/// lowest bin index. Panics on an empty slice (L >= 1 is a config
/// invariant).
pub fn hindsight(losses: &[f64]) -> (f64, usize) {
    assert!(!losses.is_empty(), "hindsight needs at least one hypothesis");
    let mut best = 0;
    for (i, l) in losses.iter().enumerate() {
        if *l < losses[best] {
            best = i;
        }
    }
    (losses[best], best)
}
