//! Soft silhouette rasterization and its vertex-gradient backward pass.

use nalgebra::Vector3;
use ndarray::Array2;

use super::{project_faces, projection_jacobian, RenderConfig, RenderDiagnostics, ScreenTri};
use crate::camera::CameraIntrinsics;
use crate::image::SegMask;
use crate::TriMesh;

/// Per-triangle occupancies are truncated once the signed distance drops
/// below `-BAND_SIGMAS * sigma`; the shifted softplus keeps the
/// truncation continuous so finite differences stay consistent with the
/// analytic gradient.
const BAND_SIGMAS: f64 = 8.0;

/// Accumulated negative-log-transparency beyond which further triangles
/// cannot move the pixel (occupancy is 1 within 2e-22).
const ACCUM_CAP: f64 = 50.0;

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Soft silhouette of a mesh plus everything needed to run the backward
/// pass. Produced by [`render_silhouette`].
pub struct SilhouetteRender {
    /// Occupancy in `[0,1]`, `H x W`.
    pub silhouette: SegMask,
    pub diagnostics: RenderDiagnostics,
    /// `A(p) = sum_tri -log(1 - o_tri)`; `silhouette = 1 - exp(-A)`.
    neg_log: Array2<f64>,
    tris: Vec<ScreenTri>,
    sigma: f64,
    n_vertices: usize,
    zs: Vec<f64>,
    xs: Vec<f64>,
    ys: Vec<f64>,
    cam: CameraIntrinsics,
}

/// Render the soft silhouette. A mesh entirely behind the near plane (or
/// with no faces) yields an all-zero silhouette, not an error.
pub fn render_silhouette(
    mesh: &TriMesh,
    cam: &CameraIntrinsics,
    cfg: &RenderConfig,
) -> SilhouetteRender {
    let mut diag = RenderDiagnostics::default();
    let tris = project_faces(mesh, cam, cfg, &mut diag);
    let (h, w) = (cam.height, cam.width);
    let mut neg_log = Array2::<f64>::zeros((h, w));
    let band = BAND_SIGMAS * cfg.sigma;
    let tail = softplus(-BAND_SIGMAS);

    for tri in &tris {
        rasterize_band(tri, band, h, w, |i, j, p| {
            let a = &mut neg_log[[i, j]];
            if *a >= ACCUM_CAP {
                return;
            }
            let sd = signed_distance(p, &tri.uv);
            if sd > -band {
                *a += softplus(sd / cfg.sigma) - tail;
            }
        });
    }

    let silhouette = neg_log.mapv(|a| 1.0 - (-a).exp());
    SilhouetteRender {
        silhouette,
        diagnostics: diag,
        neg_log,
        tris,
        sigma: cfg.sigma,
        n_vertices: mesh.vertices.len(),
        zs: mesh.vertices.iter().map(|v| v.z).collect(),
        xs: mesh.vertices.iter().map(|v| v.x).collect(),
        ys: mesh.vertices.iter().map(|v| v.y).collect(),
        cam: *cam,
    }
}

impl SilhouetteRender {
    /// Map per-pixel cotangents `dL/d silhouette` to per-vertex 3D
    /// gradients `dL/d vertex`.
    ///
    /// With `A = sum_j a_j`, `a_j = softplus(sd_j / sigma)` and
    /// `occ = 1 - exp(-A)`:
    /// `d occ / d sd_j = exp(-A) * sigmoid(sd_j / sigma) / sigma`,
    /// then `sd_j` pulls back onto the two endpoints of the nearest
    /// boundary edge and through the projection Jacobian.
    pub fn backward(&self, cotangent: &SegMask) -> Vec<Vector3<f64>> {
        assert_eq!(cotangent.dim(), self.silhouette.dim());
        let (h, w) = cotangent.dim();
        let mut grads = vec![Vector3::zeros(); self.n_vertices];
        let band = BAND_SIGMAS * self.sigma;
        // Replicates the forward accumulation order so the cap makes the
        // same inclusion decisions.
        let mut running = Array2::<f64>::zeros((h, w));
        let tail = softplus(-BAND_SIGMAS);

        for tri in &self.tris {
            rasterize_band(tri, band, h, w, |i, j, p| {
                let r = &mut running[[i, j]];
                if *r >= ACCUM_CAP {
                    return;
                }
                let (sd, duv) = signed_distance_grad(p, &tri.uv);
                if sd <= -band {
                    return;
                }
                *r += softplus(sd / self.sigma) - tail;
                let cot = cotangent[[i, j]];
                if cot == 0.0 {
                    return;
                }
                let w_occ = (-self.neg_log[[i, j]]).exp();
                let g_sd = cot * w_occ * sigmoid(sd / self.sigma) / self.sigma;
                if g_sd == 0.0 {
                    return;
                }
                for k in 0..3 {
                    let vi = tri.idx[k] as usize;
                    let vp = Vector3::new(self.xs[vi], self.ys[vi], self.zs[vi]);
                    let (ju, jv) = projection_jacobian(&self.cam, &vp);
                    let (gu, gv) = (g_sd * duv[k][0], g_sd * duv[k][1]);
                    grads[vi] += Vector3::new(
                        gu * ju[0] + gv * jv[0],
                        gu * ju[1] + gv * jv[1],
                        gu * ju[2] + gv * jv[2],
                    );
                }
            });
        }
        grads
    }
}

/// Visit every pixel whose distance to `tri` can be within `band`.
///
/// Any point within `band` of a pixel at row `y` lies in the vertical
/// slab `[y - band, y + band]`; the triangle clipped to that slab gives
/// a horizontal span which, padded by `band`, bounds all candidate
/// pixels on the row.
fn rasterize_band<F: FnMut(usize, usize, [f64; 2])>(
    tri: &ScreenTri,
    band: f64,
    h: usize,
    w: usize,
    mut visit: F,
) {
    let ys = [tri.uv[0][1], tri.uv[1][1], tri.uv[2][1]];
    let y_min = ys.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let y_max = ys.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));

    let row_lo = ((y_min - band).ceil().max(0.0)) as isize;
    let row_hi = ((y_max + band).floor().min((h - 1) as f64)) as isize;
    for i in row_lo..=row_hi {
        let y = i as f64;
        let (slab_lo, slab_hi) = (y - band, y + band);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for k in 0..3 {
            let (a, b) = (tri.uv[k], tri.uv[(k + 1) % 3]);
            if (slab_lo..=slab_hi).contains(&a[1]) {
                lo = lo.min(a[0]);
                hi = hi.max(a[0]);
            }
            // Crossings of the slab boundaries.
            for yb in [slab_lo, slab_hi] {
                if (a[1] - yb) * (b[1] - yb) < 0.0 {
                    let t = (yb - a[1]) / (b[1] - a[1]);
                    let x = a[0] + t * (b[0] - a[0]);
                    lo = lo.min(x);
                    hi = hi.max(x);
                }
            }
        }
        if !lo.is_finite() {
            continue;
        }
        let col_lo = ((lo - band).ceil().max(0.0)) as isize;
        let col_hi = ((hi + band).floor().min((w - 1) as f64)) as isize;
        for j in col_lo..=col_hi {
            visit(i as usize, j as usize, [j as f64, y]);
        }
    }
}

/// Signed distance from `p` to the triangle boundary, positive inside.
fn signed_distance(p: [f64; 2], uv: &[[f64; 2]; 3]) -> f64 {
    let mut best = f64::INFINITY;
    for k in 0..3 {
        let (d2, _) = segment_dist2(p, uv[k], uv[(k + 1) % 3]);
        best = best.min(d2);
    }
    let d = best.sqrt();
    if inside(p, uv) {
        d
    } else {
        -d
    }
}

/// Signed distance plus its gradient w.r.t. the three screen vertices.
fn signed_distance_grad(p: [f64; 2], uv: &[[f64; 2]; 3]) -> (f64, [[f64; 2]; 3]) {
    let mut best = f64::INFINITY;
    let mut best_k = 0;
    let mut best_t = 0.0;
    for k in 0..3 {
        let (d2, t) = segment_dist2(p, uv[k], uv[(k + 1) % 3]);
        if d2 < best {
            best = d2;
            best_k = k;
            best_t = t;
        }
    }
    let d = best.sqrt();
    let s = if inside(p, uv) { 1.0 } else { -1.0 };
    let mut grad = [[0.0; 2]; 3];
    if d > 1e-12 {
        let (e0, e1) = (uv[best_k], uv[(best_k + 1) % 3]);
        let q = [
            e0[0] + best_t * (e1[0] - e0[0]),
            e0[1] + best_t * (e1[1] - e0[1]),
        ];
        // d|p - q|/dq = (q - p)/d; q is affine in the endpoints.
        let gq = [s * (q[0] - p[0]) / d, s * (q[1] - p[1]) / d];
        grad[best_k] = [(1.0 - best_t) * gq[0], (1.0 - best_t) * gq[1]];
        grad[(best_k + 1) % 3] = [best_t * gq[0], best_t * gq[1]];
    }
    (s * d, grad)
}

#[inline]
fn segment_dist2(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> (f64, f64) {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 1e-24 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let dx = ap[0] - t * ab[0];
    let dy = ap[1] - t * ab[1];
    (dx * dx + dy * dy, t)
}

#[inline]
fn inside(p: [f64; 2], uv: &[[f64; 2]; 3]) -> bool {
    let cross = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| {
        (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    };
    let w = cross(uv[0], uv[1], uv[2]);
    let s0 = cross(uv[0], uv[1], p);
    let s1 = cross(uv[1], uv[2], p);
    let s2 = cross(uv[2], uv[0], p);
    s0 * w >= 0.0 && s1 * w >= 0.0 && s2 * w >= 0.0
}
