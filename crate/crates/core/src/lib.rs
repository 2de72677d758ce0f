//! Point clouds to images a vision-language model can classify: mesh
//! ingestion, perspective depth maps (sparse splats and a voxel-based dense
//! variant), shaded point renders, a rate-limited chat-completions gateway
//! with answer parsing, and an evaluation harness.
//!
//! The numeric core is generic over [`scalar::Scalar`] (`f32` or `f64`);
//! the aliases below name the common instantiations.

// `!(x > 0)` is used on purpose so NaN falls into the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod camera;
pub mod depth;
pub mod eval;
pub mod geometry;
pub mod imagebuf;
pub mod mesh;
pub mod raster;
pub mod scalar;
pub mod splat;
pub mod vlm;

pub type Vec3f = geometry::Vec3<f32>;
pub type Vec3d = geometry::Vec3<f64>;
pub type PointCloudF32 = mesh::PointCloud<f32>;
pub type PointCloudF64 = mesh::PointCloud<f64>;
pub type TriangleMeshF64 = mesh::TriangleMesh<f64>;
pub type ViewCameraF32 = camera::ViewCamera<f32>;
pub type ViewCameraF64 = camera::ViewCamera<f64>;
pub type ImageF32 = imagebuf::ImageBuffer<f32>;
pub type ImageF64 = imagebuf::ImageBuffer<f64>;
pub type VoxelGridF64 = depth::VoxelGrid<f64>;
