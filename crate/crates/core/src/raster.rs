//! Shaded point-sphere rendering (gray and position-colored) and multi-view
//! composite tiling.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{CameraError, Projector, ViewCamera};
use crate::imagebuf::ImageBuffer;
use crate::mesh::PointCloud;
use crate::scalar::Scalar;
use crate::splat::{for_each_disc_pixel, splat_radius};

/// Uniform gray used for every point of the gray style.
pub const GRAY_LEVEL: f64 = 123.0 / 255.0;

/// Width of the black lines between composite tiles.
pub const SEPARATOR_PX: usize = 2;

#[derive(Debug, Error, PartialEq)]
pub enum RasterError {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("no images to compose")]
    EmptyList,
    #[error("image {index} is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    MixedDimensions {
        index: usize,
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },
    #[error("columns must be between 1 and the number of images ({0})")]
    BadColumns(usize),
    #[error(transparent)]
    Camera(#[from] CameraError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RenderStyle {
    Gray,
    Colored,
}

impl fmt::Display for RenderStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RenderStyle::Gray => "gray",
            RenderStyle::Colored => "colored",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderParams {
    pub width: usize,
    pub height: usize,
    pub r0: f64,
    pub r_max: usize,
    pub background: f64,
    /// Light direction in camera coordinates `(right, up, toward viewer)`.
    pub light: [f64; 3],
    /// Lower bound of the Lambertian factor.
    pub ambient: f64,
}

impl Default for RenderParams {
    fn default() -> Self {
        Self {
            width: 512,
            height: 512,
            r0: 5.0,
            r_max: 16,
            background: 1.0,
            light: [0.0, 0.0, 1.0],
            ambient: 0.2,
        }
    }
}

/// Base color before shading.
pub fn base_color<T: Scalar>(style: RenderStyle, p: crate::geometry::Vec3<T>) -> [T; 3] {
    match style {
        RenderStyle::Gray => [T::lit(GRAY_LEVEL); 3],
        RenderStyle::Colored => {
            let half = T::lit(0.5);
            let c = |v: T| ((v + T::one()) * half).max(T::zero()).min(T::one());
            [c(p.x), c(p.y), c(p.z)]
        }
    }
}

/// Lambertian factor `max(ambient, n·L)` for a disc offset `(ox, oy)` in
/// image axes (y down). The pseudo-normal bulges toward the viewer.
pub fn shade<T: Scalar>(ox: T, oy: T, light: [T; 3], ambient: T) -> T {
    let nz = (T::one() - ox * ox - oy * oy).max(T::zero()).sqrt();
    let ndotl = ox * light[0] - oy * light[1] + nz * light[2];
    ndotl.max(ambient)
}

pub fn render_points<T: Scalar>(
    pc: &PointCloud<T>,
    cam: &ViewCamera<T>,
    style: RenderStyle,
    params: &RenderParams,
) -> Result<ImageBuffer<T>, RasterError> {
    if pc.is_empty() {
        return Err(RasterError::EmptyCloud);
    }
    let (w, h) = (params.width, params.height);
    let proj = Projector::new(cam, w, h)?;
    let light = {
        let l = crate::geometry::Vec3::<T>::from_f64(params.light[0], params.light[1], params.light[2]);
        l.try_normalize(T::lit(1e-12))
            .unwrap_or_else(|| crate::geometry::Vec3::from_f64(0.0, 0.0, 1.0))
            .to_array()
    };
    let ambient = T::lit(params.ambient);
    let r0 = T::lit(params.r0);
    let d_ref = cam.reference_distance();

    let mut img = ImageBuffer::filled(w, h, T::lit(params.background));
    let mut zbuf = vec![T::infinity(); w * h];
    for &p in &pc.points {
        let Ok(pp) = proj.project(p) else { continue };
        let base = base_color(style, p);
        let r = splat_radius(r0, d_ref, pp.cam_depth, params.r_max);
        for_each_disc_pixel(pp.u, pp.v, r, w, h, |x, y, ox, oy| {
            let z = &mut zbuf[y * w + x];
            if pp.cam_depth < *z {
                *z = pp.cam_depth;
                let s = shade(ox, oy, light, ambient);
                img.set(x, y, [base[0] * s, base[1] * s, base[2] * s]);
            }
        });
    }
    Ok(img)
}

/// Row-major tiling into `ceil(N / columns)` rows with black separators;
/// unused trailing tiles stay white.
pub fn compose_grid<T: Scalar>(images: &[ImageBuffer<T>], columns: usize) -> Result<ImageBuffer<T>, RasterError> {
    let first = images.first().ok_or(RasterError::EmptyList)?;
    if columns == 0 || columns > images.len() {
        return Err(RasterError::BadColumns(images.len()));
    }
    let (tw, th) = (first.width(), first.height());
    for (index, img) in images.iter().enumerate() {
        if img.width() != tw || img.height() != th {
            return Err(RasterError::MixedDimensions {
                index,
                got_w: img.width(),
                got_h: img.height(),
                want_w: tw,
                want_h: th,
            });
        }
    }
    let rows = images.len().div_ceil(columns);
    let (ow, oh) = grid_dimensions(tw, th, columns, rows);
    let mut out = ImageBuffer::filled(ow, oh, T::zero());
    for slot in 0..rows * columns {
        let (row, col) = (slot / columns, slot % columns);
        let (x0, y0) = (col * (tw + SEPARATOR_PX), row * (th + SEPARATOR_PX));
        for y in 0..th {
            for x in 0..tw {
                let px = match images.get(slot) {
                    Some(img) => img.get(x, y),
                    None => [T::one(); 3],
                };
                out.set(x0 + x, y0 + y, px);
            }
        }
    }
    Ok(out)
}

pub fn grid_dimensions(tile_w: usize, tile_h: usize, columns: usize, rows: usize) -> (usize, usize) {
    (
        columns * tile_w + columns.saturating_sub(1) * SEPARATOR_PX,
        rows * tile_h + rows.saturating_sub(1) * SEPARATOR_PX,
    )
}

/// Columns used when N views are packed into one composite: two rows.
pub fn default_columns(n: usize) -> usize {
    n.div_ceil(2).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::standard_views;
    use crate::geometry::Vec3;

    fn one_point(x: f64, y: f64, z: f64) -> PointCloud<f64> {
        PointCloud::new(vec![Vec3::new(x, y, z)])
    }

    #[test]
    fn gray_center_pixel() {
        let top = standard_views::<f64>()[0];
        let params = RenderParams::default();
        let img = render_points(&one_point(0.0, 0.0, 0.0), &top, RenderStyle::Gray, &params).unwrap();
        // pixel (255, 255) has center offset (-0.5, -0.5) from (256, 256); radius 5
        let (ox, oy) = (-0.5 / 5.0, -0.5 / 5.0);
        let s: f64 = (1.0f64 - ox * ox - oy * oy).sqrt();
        let px = img.get(255, 255);
        assert!((px[0] - GRAY_LEVEL * s).abs() < 1e-12);
        assert_eq!(px[0], px[1]);
        assert_eq!(px[1], px[2]);
        // the headlight factor peaks at the disc center: s = 1
        assert_eq!(shade(0.0, 0.0, [0.0, 0.0, 1.0], 0.2), 1.0);
        assert_eq!(img.get(0, 0), [1.0; 3]);
    }

    #[test]
    fn oblique_light_center_factor() {
        let l = Vec3::new(1.0f64, -1.0, 2.0).try_normalize(1e-12).unwrap().to_array();
        let s = shade(0.0, 0.0, l, 0.2);
        assert!((s - 2.0 / 6f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn colored_base_color() {
        assert_eq!(
            base_color(RenderStyle::Colored, Vec3::new(1.0f64, 0.0, 0.0)),
            [1.0, 0.5, 0.5]
        );
        assert_eq!(
            base_color(RenderStyle::Gray, Vec3::new(1.0f64, 0.0, 0.0)),
            [GRAY_LEVEL; 3]
        );
    }

    #[test]
    fn empty_cloud() {
        let top = standard_views::<f64>()[0];
        let r = render_points(
            &PointCloud::default(),
            &top,
            RenderStyle::Gray,
            &RenderParams::default(),
        );
        assert_eq!(r, Err(RasterError::EmptyCloud));
    }

    #[test]
    fn nearer_point_occludes() {
        let top = standard_views::<f64>()[0];
        let pc = PointCloud::new(vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 0.5)]);
        let img = render_points(&pc, &top, RenderStyle::Colored, &RenderParams::default()).unwrap();
        let c = img.get(255, 255);
        // the z = 0.5 point has blue base 0.75
        assert!((c[2] / c[0] - 0.75 / 0.5).abs() < 1e-9);
    }

    #[test]
    fn grid_dimensions_for_ten_views() {
        let tiles = vec![ImageBuffer::<f32>::filled(512, 512, 0.5); 10];
        let g = compose_grid(&tiles, 5).unwrap();
        assert_eq!((g.width(), g.height()), (2568, 1026));
        // separator column between first and second tile
        assert_eq!(g.get(512, 10), [0.0; 3]);
        assert_eq!(g.get(514, 10), [0.5; 3]);
    }

    #[test]
    fn single_tile_identity() {
        let mut img = ImageBuffer::<f64>::filled(4, 3, 0.2);
        img.set(1, 2, [0.9, 0.1, 0.3]);
        assert_eq!(compose_grid(std::slice::from_ref(&img), 1).unwrap(), img);
    }

    #[test]
    fn trailing_tiles_white() {
        let tiles = vec![ImageBuffer::<f64>::filled(4, 4, 0.0); 3];
        let g = compose_grid(&tiles, 2).unwrap();
        assert_eq!((g.width(), g.height()), (10, 10));
        assert_eq!(g.get(7, 7), [1.0; 3]);
    }

    #[test]
    fn compose_errors() {
        let a = ImageBuffer::<f64>::filled(224, 224, 0.0);
        let b = ImageBuffer::<f64>::filled(512, 512, 0.0);
        assert!(matches!(
            compose_grid(&[a.clone(), b], 2),
            Err(RasterError::MixedDimensions { index: 1, .. })
        ));
        assert_eq!(compose_grid::<f64>(&[], 1), Err(RasterError::EmptyList));
        assert_eq!(compose_grid(&[a], 2), Err(RasterError::BadColumns(1)));
    }
}
