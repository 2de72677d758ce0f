//! The three canonical views (top/front/side) and the perspective projection
//! shared by every visualization.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;
use crate::scalar::Scalar;

/// Default vertical field of view: 45 degrees.
pub const DEFAULT_FOV_DEG: f64 = 45.0;

/// Minimum camera-space depth for a projectable point.
pub const MIN_DEPTH: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum CameraError {
    #[error("up hint is parallel to the viewing direction (or origin equals target)")]
    DegenerateBasis,
    #[error("point is behind the camera (depth {0})")]
    BehindCamera(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ViewLabel {
    Front,
    Side,
    Top,
    /// Extra ring camera; the number is its 1-based position in the view set.
    Ring(u32),
}

impl fmt::Display for ViewLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViewLabel::Front => f.write_str("front"),
            ViewLabel::Side => f.write_str("side"),
            ViewLabel::Top => f.write_str("top"),
            ViewLabel::Ring(n) => write!(f, "view{n}"),
        }
    }
}

impl std::str::FromStr for ViewLabel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "front" => Ok(ViewLabel::Front),
            "side" => Ok(ViewLabel::Side),
            "top" => Ok(ViewLabel::Top),
            other => other
                .strip_prefix("view")
                .and_then(|n| n.parse().ok())
                .map(ViewLabel::Ring)
                .ok_or_else(|| format!("unknown view label {other:?}")),
        }
    }
}

impl Serialize for ViewLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ViewLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewCamera<T> {
    pub origin: Vec3<T>,
    pub target: Vec3<T>,
    pub up_hint: Vec3<T>,
    /// Radians.
    pub vertical_fov: T,
    pub label: ViewLabel,
}

/// Orthonormal camera frame. `forward` points from the camera to its target.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Basis<T> {
    pub right: Vec3<T>,
    pub up: Vec3<T>,
    pub forward: Vec3<T>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectedPoint<T> {
    pub u: T,
    pub v: T,
    pub cam_depth: T,
}

impl<T: Scalar> ViewCamera<T> {
    pub fn looking_at_origin(origin: Vec3<T>, up_hint: Vec3<T>, label: ViewLabel) -> Self {
        Self {
            origin,
            target: Vec3::zero(),
            up_hint,
            vertical_fov: T::lit(DEFAULT_FOV_DEG.to_radians()),
            label,
        }
    }

    pub fn with_fov(mut self, fov: T) -> Self {
        self.vertical_fov = fov;
        self
    }

    /// Distance from origin to target; the reference depth for splat scaling.
    pub fn reference_distance(&self) -> T {
        self.origin.distance(self.target)
    }
}

/// Top at (0,0,3), front at (3,0,1), side at (0,-3,1), all looking at the origin.
pub fn standard_views<T: Scalar>() -> [ViewCamera<T>; 3] {
    let z_up = Vec3::from_f64(0.0, 0.0, 1.0);
    [
        ViewCamera::looking_at_origin(
            Vec3::from_f64(0.0, 0.0, 3.0),
            Vec3::from_f64(0.0, 1.0, 0.0),
            ViewLabel::Top,
        ),
        ViewCamera::looking_at_origin(Vec3::from_f64(3.0, 0.0, 1.0), z_up, ViewLabel::Front),
        ViewCamera::looking_at_origin(Vec3::from_f64(0.0, -3.0, 1.0), z_up, ViewLabel::Side),
    ]
}

pub fn look_at_basis<T: Scalar>(cam: &ViewCamera<T>) -> Result<Basis<T>, CameraError> {
    let eps = T::lit(1e-12);
    let forward = (cam.target - cam.origin)
        .try_normalize(eps)
        .ok_or(CameraError::DegenerateBasis)?;
    let side = forward.cross(cam.up_hint);
    // Relative test so tiny but valid up hints are not rejected.
    if side.norm() <= T::lit(1e-9) * cam.up_hint.norm() || cam.up_hint.norm() <= eps {
        return Err(CameraError::DegenerateBasis);
    }
    let right = side.try_normalize(eps).ok_or(CameraError::DegenerateBasis)?;
    let up = right.cross(forward);
    Ok(Basis { right, up, forward })
}

/// A camera prepared for projecting many points into a fixed image size.
#[derive(Clone, Copy, Debug)]
pub struct Projector<T> {
    pub camera: ViewCamera<T>,
    pub basis: Basis<T>,
    pub width: usize,
    pub height: usize,
    focal: T,
}

impl<T: Scalar> Projector<T> {
    pub fn new(camera: &ViewCamera<T>, width: usize, height: usize) -> Result<Self, CameraError> {
        let basis = look_at_basis(camera)?;
        let half_h = T::from_usize_lossy(height) * T::lit(0.5);
        let focal = half_h / (camera.vertical_fov * T::lit(0.5)).tan();
        Ok(Self {
            camera: *camera,
            basis,
            width,
            height,
            focal,
        })
    }

    pub fn focal(&self) -> T {
        self.focal
    }

    /// Camera-frame coordinates `(right, up, forward)` of a world point.
    pub fn to_camera(&self, p: Vec3<T>) -> Vec3<T> {
        let d = p - self.camera.origin;
        Vec3::new(d.dot(self.basis.right), d.dot(self.basis.up), d.dot(self.basis.forward))
    }

    pub fn project(&self, p: Vec3<T>) -> Result<ProjectedPoint<T>, CameraError> {
        let c = self.to_camera(p);
        if !(c.z > T::lit(MIN_DEPTH)) {
            return Err(CameraError::BehindCamera(c.z.to_f64_lossy()));
        }
        let half = T::lit(0.5);
        let cx = T::from_usize_lossy(self.width) * half;
        let cy = T::from_usize_lossy(self.height) * half;
        Ok(ProjectedPoint {
            u: cx + self.focal * c.x / c.z,
            // image rows grow downward while camera up grows upward
            v: cy - self.focal * c.y / c.z,
            cam_depth: c.z,
        })
    }
}

pub fn project<T: Scalar>(
    cam: &ViewCamera<T>,
    p: Vec3<T>,
    width: usize,
    height: usize,
) -> Result<ProjectedPoint<T>, CameraError> {
    Projector::new(cam, width, height)?.project(p)
}
