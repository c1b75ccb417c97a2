use meshfit_core::camera::CameraIntrinsics;
use meshfit_core::losses::{photometric_loss, FrameTriplet};
use meshfit_core::mesh::RigidMotion;
use nalgebra::{Matrix3, Vector3};
use ndarray::Array2;

fn main() {
    let c = CameraIntrinsics::new(100.0, 100.0, 32.0, 32.0, 64, 64).unwrap();
    let z_plane = 10.0;
    for (wl, amp, shift) in [(0.10, 0.2, 0.2), (0.10, 0.15, 0.2), (0.06, 0.25, 0.2), (0.06, 0.25, 0.3), (0.15, 0.15, 0.2)] {
        let world = |x: f64, y: f64| 0.5 + amp * ((x * wl).sin() * (y * wl * 0.8).cos() + 0.3*(x*wl*1.7 + 1.0).cos());
        let render_from = |cam_x: f64| -> Array2<f64> {
            Array2::from_shape_fn((64, 64), |(i, j)| {
                let x = (j as f64 - c.cx) / c.fx * z_plane + cam_x;
                let y = (i as f64 - c.cy) / c.fy * z_plane;
                world(x, y)
            })
        };
        let triplet = FrameTriplet {
            images: [render_from(-shift), render_from(0.0), render_from(shift)],
            ego: [
                RigidMotion::new(Matrix3::identity(), Vector3::new(shift, 0.0, 0.0)),
                RigidMotion::new(Matrix3::identity(), Vector3::new(-shift, 0.0, 0.0)),
            ],
            object: [RigidMotion::identity(), RigidMotion::identity()],
        };
        let mask = Array2::zeros((64, 64));
        let depth = Array2::from_elem((64, 64), z_plane);
        let (good, _) = photometric_loss(&triplet, &depth, &mask, &c, 8).unwrap();
        let depth_bad = Array2::from_elem((64, 64), z_plane * 1.2);
        let (bad, _) = photometric_loss(&triplet, &depth_bad, &mask, &c, 8).unwrap();
        println!("wl={wl} amp={amp} shift={shift}: good={good:.2e} bad={bad:.2e} ratio={:.1}", bad/good);
    }
}
