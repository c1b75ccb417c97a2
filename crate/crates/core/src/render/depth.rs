//! Hard z-buffer depth rendering, background compositing, and the
//! interior depth gradient.

use nalgebra::Vector3;
use ndarray::Array2;

use super::{project_faces, projection_jacobian, RenderConfig, RenderDiagnostics, ScreenTri};
use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};
use crate::image::{DepthMap, SegMask};
use crate::TriMesh;

/// Full-frame hard rasterization result: per-pixel nearest depth
/// (`0` where the mesh misses) and the winning face index (`-1` miss).
pub struct ZBuffer {
    pub depth: DepthMap,
    pub winner: Array2<i32>,
    pub diagnostics: RenderDiagnostics,
}

/// Rasterize the mesh with a hard z-buffer. Depth is the
/// perspective-correct interpolation `1 / sum(lambda_i / Z_i)` of the
/// winning triangle at the pixel center, which for a planar triangle
/// equals the exact ray-plane intersection depth.
pub fn zbuffer(mesh: &TriMesh, cam: &CameraIntrinsics, cfg: &RenderConfig) -> ZBuffer {
    let mut diag = RenderDiagnostics::default();
    let tris = project_faces(mesh, cam, cfg, &mut diag);
    let (h, w) = (cam.height, cam.width);
    let mut depth = Array2::<f64>::zeros((h, w));
    let mut winner = Array2::<i32>::from_elem((h, w), -1);

    for tri in &tris {
        rasterize_cover(tri, h, w, |i, j, lam| {
            let zeta = lam[0] / tri.z[0] + lam[1] / tri.z[1] + lam[2] / tri.z[2];
            if zeta <= 0.0 {
                return;
            }
            let z = 1.0 / zeta;
            if z <= cfg.near || z >= cfg.far {
                return;
            }
            let cur = depth[[i, j]];
            if winner[[i, j]] < 0 || z < cur {
                depth[[i, j]] = z;
                winner[[i, j]] = tri.face as i32;
            }
        });
    }
    ZBuffer { depth, winner, diagnostics: diag }
}

/// Composited depth render plus everything needed for the backward pass.
pub struct DepthRender {
    /// `H x W` meters: mesh depth inside the mask where the mesh covers,
    /// background depth elsewhere.
    pub depth: DepthMap,
    pub diagnostics: RenderDiagnostics,
    /// Winning projected-triangle index per pixel (into the internal
    /// list), `-1` where the composite fell back to the background.
    winner: Array2<i32>,
    tris: Vec<ScreenTri>,
    n_vertices: usize,
    verts: Vec<Vector3<f64>>,
    cam: CameraIntrinsics,
}

/// Render mesh depth inside `mask_in`, falling back to `background`
/// outside the mask and wherever the mesh misses a masked pixel.
pub fn render_depth_composited(
    mesh: &TriMesh,
    cam: &CameraIntrinsics,
    background: &DepthMap,
    mask_in: &SegMask,
    cfg: &RenderConfig,
) -> Result<DepthRender> {
    let (h, w) = (cam.height, cam.width);
    if background.dim() != (h, w) || mask_in.dim() != (h, w) {
        return Err(Error::DimensionMismatch {
            expected: format!("{h}x{w}"),
            got: format!("background {:?}, mask {:?}", background.dim(), mask_in.dim()),
        });
    }
    let mut diag = RenderDiagnostics::default();
    let tris = project_faces(mesh, cam, cfg, &mut diag);
    let mut depth = background.clone();
    let mut winner = Array2::<i32>::from_elem((h, w), -1);

    for (ti, tri) in tris.iter().enumerate() {
        rasterize_cover(tri, h, w, |i, j, lam| {
            if mask_in[[i, j]] <= 0.5 {
                return;
            }
            let zeta = lam[0] / tri.z[0] + lam[1] / tri.z[1] + lam[2] / tri.z[2];
            if zeta <= 0.0 {
                return;
            }
            let z = 1.0 / zeta;
            if z <= cfg.near || z >= cfg.far {
                return;
            }
            if winner[[i, j]] < 0 || z < depth[[i, j]] {
                depth[[i, j]] = z;
                winner[[i, j]] = ti as i32;
            }
        });
    }

    Ok(DepthRender {
        depth,
        diagnostics: diag,
        winner,
        tris,
        n_vertices: mesh.vertices.len(),
        verts: mesh.vertices.clone(),
        cam: *cam,
    })
}

impl DepthRender {
    /// Map per-pixel cotangents `dL/d depth` to per-vertex 3D gradients.
    ///
    /// Gradients flow through the interpolated depth of the fixed winning
    /// triangle only; background pixels carry none. With barycentrics
    /// `lambda(u_i, v_i)` and `zeta_i = 1/Z_i`:
    ///
    /// `z = 1/w`, `w = sum lambda_i zeta_i`,
    /// `dz = -z^2 (sum lambda_i d zeta_i + (zeta_b - zeta_a) d lambda_b
    ///            + (zeta_c - zeta_a) d lambda_c)`.
    pub fn backward(&self, cotangent: &DepthMap) -> Vec<Vector3<f64>> {
        assert_eq!(cotangent.dim(), self.depth.dim());
        let mut grads = vec![Vector3::zeros(); self.n_vertices];
        let (h, w) = self.depth.dim();
        for i in 0..h {
            for j in 0..w {
                let ti = self.winner[[i, j]];
                let cot = cotangent[[i, j]];
                if ti < 0 || cot == 0.0 {
                    continue;
                }
                let tri = &self.tris[ti as usize];
                let p = [j as f64, i as f64];
                let z = self.depth[[i, j]];
                let gw = -z * z * cot;
                self.accumulate_tri(tri, p, gw, &mut grads);
            }
        }
        grads
    }

    fn accumulate_tri(
        &self,
        tri: &ScreenTri,
        p: [f64; 2],
        gw: f64,
        grads: &mut [Vector3<f64>],
    ) {
        let (a, b, c) = (tri.uv[0], tri.uv[1], tri.uv[2]);
        let den = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        let nb = (p[0] - a[0]) * (c[1] - a[1]) - (p[1] - a[1]) * (c[0] - a[0]);
        let nc = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        let (lb, lc) = (nb / den, nc / den);
        let la = 1.0 - lb - lc;
        let zeta = [1.0 / tri.z[0], 1.0 / tri.z[1], 1.0 / tri.z[2]];

        // Direct 1/Z path.
        let g_z3 = [
            gw * la * (-zeta[0] * zeta[0]),
            gw * lb * (-zeta[1] * zeta[1]),
            gw * lc * (-zeta[2] * zeta[2]),
        ];

        // Barycentric path: lambda_b = nb/den, lambda_c = nc/den.
        let g_lb = gw * (zeta[1] - zeta[0]);
        let g_lc = gw * (zeta[2] - zeta[0]);
        let g_nb = g_lb / den;
        let g_nc = g_lc / den;
        let g_den = -(g_lb * lb + g_lc * lc) / den;

        let mut g_uv = [[0.0f64; 2]; 3];
        // d nb
        g_uv[0][0] += g_nb * (p[1] - c[1]);
        g_uv[0][1] += g_nb * (c[0] - p[0]);
        g_uv[2][0] += g_nb * (a[1] - p[1]);
        g_uv[2][1] += g_nb * (p[0] - a[0]);
        // d nc
        g_uv[0][0] += g_nc * (b[1] - p[1]);
        g_uv[0][1] += g_nc * (p[0] - b[0]);
        g_uv[1][0] += g_nc * (p[1] - a[1]);
        g_uv[1][1] += g_nc * (a[0] - p[0]);
        // d den
        g_uv[0][0] += g_den * (b[1] - c[1]);
        g_uv[0][1] += g_den * (c[0] - b[0]);
        g_uv[1][0] += g_den * (c[1] - a[1]);
        g_uv[1][1] += g_den * (a[0] - c[0]);
        g_uv[2][0] += g_den * (a[1] - b[1]);
        g_uv[2][1] += g_den * (b[0] - a[0]);

        for k in 0..3 {
            let vi = tri.idx[k] as usize;
            let vp = self.verts[vi];
            let (ju, jv) = projection_jacobian(&self.cam, &vp);
            let (gu, gv) = (g_uv[k][0], g_uv[k][1]);
            grads[vi] += Vector3::new(
                gu * ju[0] + gv * jv[0],
                gu * ju[1] + gv * jv[1],
                gu * ju[2] + gv * jv[2] + g_z3[k],
            );
        }
    }
}

/// Visit each pixel whose center lies inside the projected triangle,
/// passing normalized barycentric coordinates `(la, lb, lc)`.
fn rasterize_cover<F: FnMut(usize, usize, [f64; 3])>(
    tri: &ScreenTri,
    h: usize,
    w: usize,
    mut visit: F,
) {
    let (a, b, c) = (tri.uv[0], tri.uv[1], tri.uv[2]);
    let xs = [a[0], b[0], c[0]];
    let ys = [a[1], b[1], c[1]];
    let x_min = xs.iter().fold(f64::INFINITY, |m, &v| m.min(v)).ceil().max(0.0) as isize;
    let x_max = xs.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)).floor().min((w - 1) as f64) as isize;
    let y_min = ys.iter().fold(f64::INFINITY, |m, &v| m.min(v)).ceil().max(0.0) as isize;
    let y_max = ys.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)).floor().min((h - 1) as f64) as isize;
    if x_min > x_max || y_min > y_max {
        return;
    }
    let den = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    for i in y_min..=y_max {
        for j in x_min..=x_max {
            let p = [j as f64, i as f64];
            let nb = (p[0] - a[0]) * (c[1] - a[1]) - (p[1] - a[1]) * (c[0] - a[0]);
            let nc = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
            let (lb, lc) = (nb / den, nc / den);
            let la = 1.0 - lb - lc;
            if la >= 0.0 && lb >= 0.0 && lc >= 0.0 {
                visit(i as usize, j as usize, [la, lb, lc]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cam() -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 100.0, 32.0, 32.0, 64, 64).unwrap()
    }

    fn quad_at(z: f64, half: f64) -> TriMesh {
        TriMesh::new(
            vec![
                Vector3::new(-half, -half, z),
                Vector3::new(half, -half, z),
                Vector3::new(half, half, z),
                Vector3::new(-half, half, z),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn frontoparallel_quad_fills_mask_with_constant_depth() {
        let c = cam();
        let mesh = quad_at(10.0, 5.0);
        let bg = Array2::from_elem((64, 64), 50.0);
        let mask = Array2::from_elem((64, 64), 1.0);
        let r = render_depth_composited(&mesh, &c, &bg, &mask, &RenderConfig::default()).unwrap();
        for v in r.depth.iter() {
            assert_relative_eq!(*v, 10.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn zero_mask_returns_background_exactly() {
        let c = cam();
        let mesh = quad_at(10.0, 5.0);
        let bg = Array2::from_shape_fn((64, 64), |(i, j)| 20.0 + (i * 64 + j) as f64 * 0.001);
        let mask = Array2::zeros((64, 64));
        let r = render_depth_composited(&mesh, &c, &bg, &mask, &RenderConfig::default()).unwrap();
        assert_eq!(r.depth, bg);
    }

    #[test]
    fn masked_pixels_missed_by_mesh_fall_back_to_background() {
        let c = cam();
        let mesh = quad_at(10.0, 0.2); // small quad
        let bg = Array2::from_elem((64, 64), 33.0);
        let mask = Array2::from_elem((64, 64), 1.0);
        let r = render_depth_composited(&mesh, &c, &bg, &mask, &RenderConfig::default()).unwrap();
        assert_relative_eq!(r.depth[[32, 32]], 10.0, epsilon = 1e-9);
        assert_eq!(r.depth[[0, 0]], 33.0);
    }

    #[test]
    fn tilted_plane_matches_ray_plane_intersection() {
        let c = cam();
        // Large tilted triangle spanning the view.
        let v0 = Vector3::new(-4.0, -4.0, 8.0);
        let v1 = Vector3::new(4.0, -4.0, 10.0);
        let v2 = Vector3::new(0.0, 5.0, 12.0);
        let mesh = TriMesh::new(vec![v0, v1, v2], vec![[0, 1, 2]]).unwrap();
        let zb = zbuffer(&mesh, &c, &RenderConfig::default());
        let n = (v1 - v0).cross(&(v2 - v0));
        let d0 = n.dot(&v0);
        let mut checked = 0;
        for i in 0..64 {
            for j in 0..64 {
                if zb.winner[[i, j]] >= 0 {
                    let dir = c.ray(j as f64, i as f64);
                    let z_true = d0 / n.dot(&dir);
                    assert_relative_eq!(zb.depth[[i, j]], z_true, epsilon = 1e-6);
                    checked += 1;
                }
            }
        }
        assert!(checked > 100);
    }

    #[test]
    fn nearer_triangle_wins() {
        let c = cam();
        let mesh = TriMesh::new(
            vec![
                Vector3::new(-2.0, -2.0, 10.0),
                Vector3::new(2.0, -2.0, 10.0),
                Vector3::new(0.0, 2.0, 10.0),
                Vector3::new(-2.0, -2.0, 6.0),
                Vector3::new(2.0, -2.0, 6.0),
                Vector3::new(0.0, 2.0, 6.0),
            ],
            vec![[0, 1, 2], [3, 4, 5]],
        )
        .unwrap();
        let zb = zbuffer(&mesh, &c, &RenderConfig::default());
        assert_relative_eq!(zb.depth[[32, 32]], 6.0, epsilon = 1e-9);
        assert_eq!(zb.winner[[32, 32]], 1);
    }

    #[test]
    fn depth_gradients_match_finite_differences_in_interior() {
        let c = cam();
        let cfg = RenderConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let bg = Array2::from_elem((64, 64), 40.0);
        let mask = Array2::from_elem((64, 64), 1.0);
        let mut checked = 0;
        for _ in 0..12 {
            let vs: Vec<Vector3<f64>> = (0..3)
                .map(|_| {
                    Vector3::new(
                        rng.random_range(-2.0..2.0),
                        rng.random_range(-2.0..2.0),
                        rng.random_range(6.0..12.0),
                    )
                })
                .collect();
            let mesh = TriMesh::new(vs, vec![[0, 1, 2]]).unwrap();
            let r = render_depth_composited(&mesh, &c, &bg, &mask, &cfg).unwrap();

            // Weight only pixels deep inside the triangle so finite
            // differences never cross the coverage boundary.
            let tri = &r.tris[0];
            let weights = Array2::from_shape_fn((64, 64), |(i, j)| {
                if r.winner[[i, j]] < 0 {
                    return 0.0;
                }
                let p = [j as f64, i as f64];
                let (a, b, cc) = (tri.uv[0], tri.uv[1], tri.uv[2]);
                let den = (b[0] - a[0]) * (cc[1] - a[1]) - (b[1] - a[1]) * (cc[0] - a[0]);
                let nb = (p[0] - a[0]) * (cc[1] - a[1]) - (p[1] - a[1]) * (cc[0] - a[0]);
                let nc = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
                let (lb, lc) = (nb / den, nc / den);
                let la = 1.0 - lb - lc;
                if [la, lb, lc].iter().all(|l| (0.1..=0.9).contains(l)) {
                    1.0 + 0.3 * (i as f64 * 0.21).sin()
                } else {
                    0.0
                }
            });
            if weights.sum() == 0.0 {
                continue;
            }
            let grads = r.backward(&weights);
            let eval = |m: &TriMesh| -> f64 {
                (&render_depth_composited(m, &c, &bg, &mask, &cfg).unwrap().depth * &weights)
                    .sum()
            };
            for vi in 0..3 {
                for axis in 0..3 {
                    let hstep = 1e-6;
                    let mut mp = mesh.clone();
                    mp.vertices[vi][axis] += hstep;
                    let mut mm = mesh.clone();
                    mm.vertices[vi][axis] -= hstep;
                    let fd = (eval(&mp) - eval(&mm)) / (2.0 * hstep);
                    let an = grads[vi][axis];
                    if fd.abs() > 1e-4 {
                        assert_relative_eq!(an, fd, max_relative = 1e-4, epsilon = 1e-6);
                        checked += 1;
                    }
                }
            }
        }
        assert!(checked >= 40, "too few comparisons: {checked}");
    }
}
