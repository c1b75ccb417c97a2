//! Differentiable rendering of a posed mesh.
//!
//! Two outputs with different gradient structures:
//!
//! - a soft silhouette, differentiable everywhere: per pixel the
//!   occupancy of a triangle is `sigmoid(signed_dist / sigma)` of the
//!   signed screen-space distance to the triangle boundary (positive
//!   inside), and triangles combine by probabilistic union
//!   `1 - prod(1 - o_tri)`;
//! - a hard z-buffer depth map composited over a background, with
//!   gradients through the perspective-correct interpolated depth of the
//!   winning triangle (the winner itself is held fixed per evaluation).
//!
//! Both renders expose a vector-Jacobian contract: per-pixel cotangents
//! map back to per-vertex 3D gradients.

mod depth;
mod silhouette;

pub use depth::{render_depth_composited, zbuffer, DepthRender, ZBuffer};
pub use silhouette::{render_silhouette, SilhouetteRender};

use serde::{Deserialize, Serialize};

/// Renderer parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RenderConfig {
    /// Softness scale of silhouette edges, in pixels.
    pub sigma: f64,
    /// Near clip depth in meters.
    pub near: f64,
    /// Far clip depth in meters.
    pub far: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self { sigma: 1.0, near: 0.5, far: 100.0 }
    }
}

/// Counts of faces skipped during rasterization.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RenderDiagnostics {
    /// Faces with a vertex at or in front of the near plane.
    pub clipped_faces: usize,
    /// Faces with (near-)zero projected area.
    pub degenerate_faces: usize,
}

/// A triangle after projection: screen positions, camera depths, and the
/// source vertex indices.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ScreenTri {
    pub uv: [[f64; 2]; 3],
    pub z: [f64; 3],
    pub idx: [u32; 3],
    /// Index of the source face in the mesh face list.
    pub face: u32,
}

/// Project all faces, dropping clipped and degenerate ones.
pub(crate) fn project_faces(
    mesh: &crate::TriMesh,
    cam: &crate::CameraIntrinsics,
    cfg: &RenderConfig,
    diag: &mut RenderDiagnostics,
) -> Vec<ScreenTri> {
    let mut out = Vec::with_capacity(mesh.faces.len());
    'faces: for (fi, f) in mesh.faces.iter().enumerate() {
        let mut uv = [[0.0; 2]; 3];
        let mut z = [0.0; 3];
        for k in 0..3 {
            let p = &mesh.vertices[f[k] as usize];
            if p.z <= cfg.near {
                diag.clipped_faces += 1;
                continue 'faces;
            }
            uv[k] = [cam.fx * p.x / p.z + cam.cx, cam.fy * p.y / p.z + cam.cy];
            z[k] = p.z;
        }
        let area2 = (uv[1][0] - uv[0][0]) * (uv[2][1] - uv[0][1])
            - (uv[1][1] - uv[0][1]) * (uv[2][0] - uv[0][0]);
        if area2.abs() < 1e-12 {
            diag.degenerate_faces += 1;
            continue;
        }
        out.push(ScreenTri { uv, z, idx: *f, face: fi as u32 });
    }
    out
}

/// d(u,v)/d(X,Y,Z) of the pinhole projection, as two row gradients.
#[inline]
pub(crate) fn projection_jacobian(
    cam: &crate::CameraIntrinsics,
    p: &nalgebra::Vector3<f64>,
) -> ([f64; 3], [f64; 3]) {
    let iz = 1.0 / p.z;
    (
        [cam.fx * iz, 0.0, -cam.fx * p.x * iz * iz],
        [0.0, cam.fy * iz, -cam.fy * p.y * iz * iz],
    )
}
