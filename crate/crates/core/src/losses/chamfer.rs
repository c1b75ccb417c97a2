//! One-sided Huber chamfer distance from the object point cloud to the
//! deformed, posed mesh vertices, and its gradient-isolated variant.
//!
//! The distance is one-sided: every input point must have a mesh vertex
//! near it, but occluded or truncated parts of the mesh need no matching
//! points.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::manifold::{ShapeCoeffs, ShapeManifold};
use crate::mesh::{rotation_y, rotation_y_deriv, StateGrad};
use crate::PointCloud;

/// Huber penalty: `a^2/2` below `delta`, `delta * (a - delta/2)` above.
#[inline]
pub fn huber(a: f64, delta: f64) -> f64 {
    if a <= delta {
        0.5 * a * a
    } else {
        delta * (a - 0.5 * delta)
    }
}

#[inline]
fn huber_deriv(a: f64, delta: f64) -> f64 {
    a.min(delta)
}

/// Chamfer value and its gradients w.r.t. the evaluation position, yaw,
/// and shape coefficients.
#[derive(Debug, Clone)]
pub struct ChamferResult {
    pub value: f64,
    pub grad_x: Vector3<f64>,
    pub grad_yaw: f64,
    pub grad_z: Vec<f64>,
}

/// `(1/M) sum_i huber(min_j |r_i - v_j|)` with `v_j` the deformed mesh
/// vertices rotated by `yaw` and translated by `x_eval`.
///
/// The nearest-vertex search is exact (brute force); the argmin is held
/// fixed for the gradient.
pub fn chamfer_loss(
    points: &PointCloud,
    manifold: &ShapeManifold,
    z: &ShapeCoeffs,
    x_eval: &Vector3<f64>,
    yaw: f64,
    delta: f64,
) -> Result<ChamferResult> {
    if points.is_empty() {
        return Err(Error::EmptyObject);
    }
    let canonical = manifold.deform(z)?;
    let rot = rotation_y(yaw);
    let rot_d = rotation_y_deriv(yaw);
    let posed: Vec<Vector3<f64>> = canonical
        .vertices
        .iter()
        .map(|v| rot * v + x_eval)
        .collect();

    let m = points.len() as f64;
    let mut value = 0.0;
    let mut grad_x = Vector3::zeros();
    let mut grad_yaw = 0.0;
    let mut grad_z = vec![0.0; manifold.n_bases()];

    for r in points {
        let (j, d2) = posed
            .iter()
            .enumerate()
            .map(|(j, v)| (j, (r - v).norm_squared()))
            .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite distances"))
            .expect("non-empty mesh");
        let d = d2.sqrt();
        value += huber(d, delta);
        if d > 1e-12 {
            // dL/dv_j = rho'(d) * (v_j - r)/d, argmin fixed.
            let gv = (huber_deriv(d, delta) / d) * (posed[j] - r);
            grad_x += gv;
            grad_yaw += gv.dot(&(rot_d * canonical.vertices[j]));
            for (k, basis) in manifold.bases.iter().enumerate() {
                grad_z[k] += gv.dot(&(rot * basis[j]));
            }
        }
    }
    value /= m;
    grad_x /= m;
    grad_yaw /= m;
    for g in &mut grad_z {
        *g /= m;
    }
    Ok(ChamferResult { value, grad_x, grad_yaw, grad_z })
}

/// Chamfer evaluated at the auxiliary position: the value and the
/// gradients w.r.t. `x_aux`, yaw, and shape, while the gradient w.r.t.
/// the main position is identically zero (the flow is cut, not small).
pub fn pose_cd(
    state: &super::FitState,
    points: &PointCloud,
    manifold: &ShapeManifold,
    delta: f64,
) -> Result<(f64, StateGrad)> {
    let r = chamfer_loss(points, manifold, &state.z, &state.x_aux, state.pose.yaw, delta)?;
    let mut g = StateGrad::zeros(manifold.n_bases());
    g.x_aux = r.grad_x;
    g.yaw = r.grad_yaw;
    g.z = r.grad_z;
    Ok((r.value, g))
}
