//! Vehicle pose and shape estimation from a depth map and an instance
//! segmentation mask, with no 3D bounding box labels.
//!
//! The pipeline back-projects the masked depth into an object point
//! cloud, represents the vehicle as a low-dimensional mesh manifold, and
//! fits position, yaw, and shape by gradient descent through a
//! differentiable renderer. Losses combine a multi-scale segmentation
//! term, a robust one-sided chamfer term evaluated at a gradient-isolated
//! auxiliary position, and an optional photometric term over frame
//! triplets. A small point-cloud encoder can be trained end-to-end
//! through the same losses.
//!
//! Synthetic oracle scenes, detection metrics (oriented BEV/3D IoU,
//! 40-point average precision), and KITTI-format label I/O round out the
//! evaluation side.

pub mod camera;
pub mod cloud;
pub mod error;
pub mod eval;
pub mod fit;
pub mod image;
pub mod imageio;
pub mod learner;
pub mod losses;
pub mod manifold;
pub mod mesh;
pub mod pipeline;
pub mod render;
pub mod runconfig;
pub mod synth;

pub use camera::{backproject, CameraIntrinsics};
pub use cloud::{extract_object_points, FilterConfig};
pub use error::{Error, Result};
pub use image::{DepthMap, GrayImage, SegMask};
pub use manifold::{builtin_car_manifold, ShapeCoeffs, ShapeManifold};
pub use mesh::{transform_mesh, ObjectPose, TriMesh};

/// Camera-frame 3D points in meters.
pub type PointCloud = Vec<nalgebra::Vector3<f64>>;
