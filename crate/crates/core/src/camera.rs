//! Pinhole camera model: projection and depth-map back-projection.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{depth_valid, DepthMap};
use crate::PointCloud;

/// Pinhole intrinsics. Camera frame: +x right, +y down, +z forward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let cam = Self { fx, fy, cx, cy, width, height };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::InvalidCamera(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if !(0.0 <= self.cx && self.cx < self.width as f64) {
            return Err(Error::InvalidCamera(format!(
                "cx={} outside [0, {})",
                self.cx, self.width
            )));
        }
        if !(0.0 <= self.cy && self.cy < self.height as f64) {
            return Err(Error::InvalidCamera(format!(
                "cy={} outside [0, {})",
                self.cy, self.height
            )));
        }
        Ok(())
    }

    /// Project a camera-frame point to `(u, v, depth)`. `None` if the point
    /// is at or behind the image plane.
    #[inline]
    pub fn project(&self, p: &Vector3<f64>) -> Option<(f64, f64, f64)> {
        if p.z <= 0.0 {
            return None;
        }
        Some((
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
            p.z,
        ))
    }

    /// Back-project pixel `(u, v)` at depth `d` into the camera frame.
    #[inline]
    pub fn backproject_pixel(&self, u: f64, v: f64, d: f64) -> Vector3<f64> {
        Vector3::new(
            (u - self.cx) / self.fx * d,
            (v - self.cy) / self.fy * d,
            d,
        )
    }

    /// Unit-depth ray direction through pixel `(u, v)`.
    #[inline]
    pub fn ray(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    /// Intrinsics of pyramid level `level` (level 0 = this camera). Pixel
    /// `(u, v)` at level `l` maps to `(2^l u, 2^l v)` at level 0.
    pub fn at_level(&self, level: usize) -> Self {
        let s = (1u64 << level) as f64;
        Self {
            fx: self.fx / s,
            fy: self.fy / s,
            cx: self.cx / s,
            cy: self.cy / s,
            width: self.width.div_ceil(1 << level),
            height: self.height.div_ceil(1 << level),
        }
    }
}

/// Back-project every valid pixel of `depth` into a point cloud, row-major.
pub fn backproject(depth: &DepthMap, cam: &CameraIntrinsics) -> Result<PointCloud> {
    let (h, w) = depth.dim();
    if h != cam.height || w != cam.width {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", cam.height, cam.width),
            got: format!("{h}x{w}"),
        });
    }
    let mut points = Vec::new();
    for i in 0..h {
        for j in 0..w {
            let d = depth[[i, j]];
            if depth_valid(d) {
                points.push(cam.backproject_pixel(j as f64, i as f64, d));
            }
        }
    }
    Ok(points)
}
