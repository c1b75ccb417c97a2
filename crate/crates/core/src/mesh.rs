//! Triangle meshes, yaw-only object poses, and rigid transforms with
//! analytic Jacobians.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Indexed triangle mesh. Vertices in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vector3<f64>>,
    pub faces: Vec<[u32; 3]>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vector3<f64>>, faces: Vec<[u32; 3]>) -> Result<Self> {
        let mesh = Self { vertices, faces };
        mesh.validate_faces()?;
        Ok(mesh)
    }

    pub fn validate_faces(&self) -> Result<()> {
        let n = self.vertices.len() as u32;
        for (fi, f) in self.faces.iter().enumerate() {
            if f.iter().any(|&i| i >= n) {
                return Err(Error::InvalidMesh(format!(
                    "face {fi} references vertex out of range (n={n})"
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidMesh(format!("face {fi} repeats a vertex")));
            }
        }
        Ok(())
    }

    /// Every edge shared by exactly two faces.
    pub fn is_watertight(&self) -> bool {
        use std::collections::HashMap;
        let mut edges: HashMap<(u32, u32), u32> = HashMap::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                *edges.entry(key).or_insert(0) += 1;
            }
        }
        !edges.is_empty() && edges.values().all(|&c| c == 2)
    }

    /// Axis-aligned extents: `(min, max)` corners.
    pub fn extents(&self) -> (Vector3<f64>, Vector3<f64>) {
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }
}

/// Object pose: position in the camera frame plus yaw about the y-axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectPose {
    pub position: Vector3<f64>,
    /// Radians, normalized into `[0, 2pi)`.
    pub yaw: f64,
}

impl ObjectPose {
    pub fn new(position: Vector3<f64>, yaw: f64) -> Self {
        Self { position, yaw: normalize_yaw(yaw) }
    }
}

/// Wrap an angle into `[0, 2pi)`.
pub fn normalize_yaw(yaw: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let y = yaw.rem_euclid(tau);
    if y >= tau { 0.0 } else { y }
}

/// Rotation by `yaw` about the y-axis.
#[rustfmt::skip]
pub fn rotation_y(yaw: f64) -> Matrix3<f64> {
    let (s, c) = yaw.sin_cos();
    Matrix3::new(
         c, 0.0,   s,
       0.0, 1.0, 0.0,
        -s, 0.0,   c,
    )
}

/// d/dyaw of `rotation_y`.
#[rustfmt::skip]
pub fn rotation_y_deriv(yaw: f64) -> Matrix3<f64> {
    let (s, c) = yaw.sin_cos();
    Matrix3::new(
        -s, 0.0,   c,
       0.0, 0.0, 0.0,
        -c, 0.0,  -s,
    )
}

/// Apply `v' = R_y(yaw) v + x` to every vertex. Faces unchanged.
///
/// The Jacobians are analytic: d v'/d x is the identity and
/// d v'/d yaw = R_y'(yaw) v; both are exposed to callers through
/// [`PoseShapeChain`].
pub fn transform_mesh(mesh: &TriMesh, pose: &ObjectPose) -> TriMesh {
    let rot = rotation_y(pose.yaw);
    TriMesh {
        vertices: mesh
            .vertices
            .iter()
            .map(|v| rot * v + pose.position)
            .collect(),
        faces: mesh.faces.clone(),
    }
}

/// Rigid motion `p' = R p + t` between camera frames or object states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidMotion {
    pub r: Matrix3<f64>,
    pub t: Vector3<f64>,
}

impl RigidMotion {
    pub fn identity() -> Self {
        Self { r: Matrix3::identity(), t: Vector3::zeros() }
    }

    pub fn new(r: Matrix3<f64>, t: Vector3<f64>) -> Self {
        Self { r, t }
    }

    /// Orthonormal rotation with determinant +1.
    pub fn is_valid(&self) -> bool {
        let rtr = self.r.transpose() * self.r;
        (rtr - Matrix3::identity()).norm() < 1e-9
            && (self.r.determinant() - 1.0).abs() < 1e-9
            && self.t.iter().all(|v| v.is_finite())
    }

    #[inline]
    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.r * p + self.t
    }

    /// `self` after `other`: `(self * other)(p) = self(other(p))`.
    pub fn compose(&self, other: &RigidMotion) -> RigidMotion {
        RigidMotion { r: self.r * other.r, t: self.r * other.t + self.t }
    }

    pub fn inverse(&self) -> RigidMotion {
        let rt = self.r.transpose();
        RigidMotion { r: rt, t: -(rt * self.t) }
    }
}

/// Gradient of a scalar loss w.r.t. the per-object unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct StateGrad {
    pub x: Vector3<f64>,
    pub yaw: f64,
    pub z: Vec<f64>,
    pub x_aux: Vector3<f64>,
}

impl StateGrad {
    pub fn zeros(k: usize) -> Self {
        Self {
            x: Vector3::zeros(),
            yaw: 0.0,
            z: vec![0.0; k],
            x_aux: Vector3::zeros(),
        }
    }

    pub fn scaled_add(&mut self, w: f64, other: &StateGrad) {
        self.x += w * other.x;
        self.yaw += w * other.yaw;
        for (a, b) in self.z.iter_mut().zip(&other.z) {
            *a += w * b;
        }
        self.x_aux += w * other.x_aux;
    }
}

/// Differentiation record for the composition
/// `world_vertices = R_y(yaw) * (mean + sum_k z_k basis_k) + x`.
///
/// `pullback` maps per-vertex world-space gradients back onto
/// `(x, yaw, z)`; the shared rotation and the canonical (deformed,
/// unposed) vertices are kept so the chain rule needs no re-deformation.
pub struct PoseShapeChain<'a> {
    pub canonical: TriMesh,
    pub world: TriMesh,
    pub rot: Matrix3<f64>,
    rot_deriv: Matrix3<f64>,
    bases: &'a [Vec<Vector3<f64>>],
}

impl<'a> PoseShapeChain<'a> {
    pub fn new(manifold: &'a crate::manifold::ShapeManifold, z: &crate::manifold::ShapeCoeffs, pose: &ObjectPose) -> Result<Self> {
        let canonical = manifold.deform(z)?;
        let world = transform_mesh(&canonical, pose);
        Ok(Self {
            canonical,
            world,
            rot: rotation_y(pose.yaw),
            rot_deriv: rotation_y_deriv(pose.yaw),
            bases: &manifold.bases,
        })
    }

    /// Chain per-vertex gradients `g_i = dL/d world_i` to the unknowns:
    /// dL/dx = sum g_i, dL/dyaw = sum g_i . (R' v_i),
    /// dL/dz_k = sum g_i . (R b_ki). `x_aux` is untouched.
    pub fn pullback(&self, vertex_grads: &[Vector3<f64>]) -> StateGrad {
        assert_eq!(vertex_grads.len(), self.canonical.vertices.len());
        let mut out = StateGrad::zeros(self.bases.len());
        for (i, g) in vertex_grads.iter().enumerate() {
            out.x += g;
            out.yaw += g.dot(&(self.rot_deriv * self.canonical.vertices[i]));
        }
        for (k, basis) in self.bases.iter().enumerate() {
            let mut acc = 0.0;
            for (g, b) in vertex_grads.iter().zip(basis) {
                acc += g.dot(&(self.rot * b));
            }
            out.z[k] = acc;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn tri() -> TriMesh {
        TriMesh::new(
            vec![
                Vector3::new(0.3, -0.7, 1.1),
                Vector3::new(-1.2, 0.4, 2.0),
                Vector3::new(0.9, 0.1, -0.5),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    #[test]
    fn identity_pose_is_noop() {
        let m = tri();
        let t = transform_mesh(&m, &ObjectPose::new(Vector3::zeros(), 0.0));
        assert_eq!(t, m);
    }

    #[test]
    fn yaw_pi_negates_x_and_z() {
        let m = tri();
        let t = transform_mesh(&m, &ObjectPose::new(Vector3::zeros(), PI));
        for (a, b) in m.vertices.iter().zip(&t.vertices) {
            assert_relative_eq!(b.x, -a.x, epsilon = 1e-12);
            assert_relative_eq!(b.y, a.y, epsilon = 1e-12);
            assert_relative_eq!(b.z, -a.z, epsilon = 1e-12);
        }
    }

    #[test]
    fn quarter_turn_hand_case() {
        // R_y(pi/2) * (0,0,1) = (1,0,0); plus x = (1,0,0) gives (2,0,0).
        let m = TriMesh {
            vertices: vec![Vector3::new(0.0, 0.0, 1.0)],
            faces: vec![],
        };
        let t = transform_mesh(&m, &ObjectPose::new(Vector3::new(1.0, 0.0, 0.0), FRAC_PI_2));
        assert_relative_eq!(t.vertices[0].x, 2.0, epsilon = 1e-12);
        assert_relative_eq!(t.vertices[0].y, 0.0, epsilon = 1e-12);
        assert_relative_eq!(t.vertices[0].z, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rigid_transform_preserves_distances() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let m = tri();
            let pose = ObjectPose::new(
                Vector3::new(
                    rng.random_range(-5.0..5.0),
                    rng.random_range(-5.0..5.0),
                    rng.random_range(-5.0..5.0),
                ),
                rng.random_range(0.0..std::f64::consts::TAU),
            );
            let t = transform_mesh(&m, &pose);
            for i in 0..3 {
                for j in (i + 1)..3 {
                    let d0 = (m.vertices[i] - m.vertices[j]).norm();
                    let d1 = (t.vertices[i] - t.vertices[j]).norm();
                    assert_relative_eq!(d0, d1, max_relative = 1e-9);
                }
            }
        }
    }

    #[test]
    fn yaw_normalization() {
        assert_relative_eq!(normalize_yaw(-0.1), std::f64::consts::TAU - 0.1);
        assert_relative_eq!(normalize_yaw(std::f64::consts::TAU + 0.25), 0.25);
        assert_eq!(normalize_yaw(0.0), 0.0);
    }

    #[test]
    fn rotation_deriv_matches_fd() {
        let h = 1e-6;
        for &yaw in &[0.1, 1.3, 4.0] {
            let fd = (rotation_y(yaw + h) - rotation_y(yaw - h)) / (2.0 * h);
            let an = rotation_y_deriv(yaw);
            assert_relative_eq!(fd, an, epsilon = 1e-8);
        }
    }

    #[test]
    fn face_validation() {
        assert!(TriMesh::new(vec![Vector3::zeros()], vec![[0, 0, 0]]).is_err());
        assert!(TriMesh::new(vec![Vector3::zeros()], vec![[0, 1, 2]]).is_err());
    }
}
