//! Turning one normalized cloud into the images sent for a style and view count.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::{standard_views, ViewCamera, ViewLabel};
use crate::depth::{dense_depth_map, sparse_depth_map, DepthParams};
use crate::geometry::Vec3;
use crate::imagebuf::{encode_png, ImageBuffer};
use crate::mesh::PointCloud;
use crate::raster::{compose_grid, default_columns, render_points, RenderParams, RenderStyle};
use crate::vlm::{VisualizationKind, MAX_IMAGES};

use super::EvalError;

/// View counts with a defined camera set.
pub const VIEW_COUNTS: [usize; 4] = [1, 3, 6, 10];

/// Elevation of the extra ring cameras, degrees.
pub const RING_ELEVATION_DEG: f64 = 30.0;
pub const RING_DISTANCE: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Style {
    #[serde(rename = "dm-sparse")]
    DmSparse,
    #[serde(rename = "dm-dense")]
    DmDense,
    #[serde(rename = "ri-colored")]
    RiColored,
    #[serde(rename = "ri-gray")]
    RiGray,
}

impl Style {
    pub const ALL: [Style; 4] = [Style::DmSparse, Style::DmDense, Style::RiColored, Style::RiGray];

    pub fn as_str(self) -> &'static str {
        match self {
            Style::DmSparse => "dm-sparse",
            Style::DmDense => "dm-dense",
            Style::RiColored => "ri-colored",
            Style::RiGray => "ri-gray",
        }
    }

    pub fn kind(self) -> VisualizationKind {
        match self {
            Style::DmSparse => VisualizationKind::SparseDepth,
            Style::DmDense => VisualizationKind::DenseDepth,
            Style::RiColored | Style::RiGray => VisualizationKind::Rendered,
        }
    }
}

impl fmt::Display for Style {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Style {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Style::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown style {s:?} (expected dm-sparse, dm-dense, ri-colored, ri-gray)"))
    }
}

/// Cameras for 1, 3, 6, or 10 views. One view is the front camera; six and
/// ten add 3 or 7 cameras on a ring at 30° elevation and distance 3 with
/// evenly spaced azimuths.
pub fn view_set(count: usize) -> Result<Vec<ViewCamera<f64>>, EvalError> {
    let [top, front, side] = standard_views::<f64>();
    match count {
        1 => Ok(vec![front]),
        3 => Ok(vec![top, front, side]),
        6 | 10 => {
            let extra = count - 3;
            let elev = RING_ELEVATION_DEG.to_radians();
            let mut cams = vec![top, front, side];
            for i in 0..extra {
                let az = std::f64::consts::TAU * i as f64 / extra as f64;
                let origin = Vec3::new(
                    RING_DISTANCE * elev.cos() * az.cos(),
                    RING_DISTANCE * elev.cos() * az.sin(),
                    RING_DISTANCE * elev.sin(),
                );
                cams.push(ViewCamera::looking_at_origin(
                    origin,
                    Vec3::new(0.0, 0.0, 1.0),
                    ViewLabel::Ring((4 + i) as u32),
                ));
            }
            Ok(cams)
        }
        n => Err(EvalError::UnsupportedCount(n)),
    }
}

pub fn render_view(
    pc: &PointCloud<f64>,
    cam: &ViewCamera<f64>,
    style: Style,
    depth: &DepthParams,
    render: &RenderParams,
) -> Result<ImageBuffer<f64>, EvalError> {
    let img = match style {
        Style::DmSparse => sparse_depth_map(pc, cam, depth)?,
        Style::DmDense => dense_depth_map(pc, cam, depth)?,
        Style::RiColored => render_points(pc, cam, RenderStyle::Colored, render)?,
        Style::RiGray => render_points(pc, cam, RenderStyle::Gray, render)?,
    };
    Ok(img)
}

/// One image per camera, rendered in parallel, in camera order.
pub fn render_views(
    pc: &PointCloud<f64>,
    cams: &[ViewCamera<f64>],
    style: Style,
    depth: &DepthParams,
    render: &RenderParams,
) -> Result<Vec<(ViewLabel, ImageBuffer<f64>)>, EvalError> {
    cams.par_iter()
        .map(|cam| render_view(pc, cam, style, depth, render).map(|img| (cam.label, img)))
        .collect()
}

/// A named PNG ready to send or write.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NamedPng {
    pub file_name: String,
    pub bytes: Vec<u8>,
}

pub fn view_file_name(sample: &str, style: Style, view: ViewLabel) -> String {
    format!("{sample}_{style}_{view}.png")
}

pub fn grid_file_name(sample: &str, style: Style, n: usize) -> String {
    format!("{sample}_{style}_grid{n}.png")
}

/// The images for one request: each view separately when they fit under the
/// per-request cap, otherwise a single two-row composite.
pub fn request_images(
    sample: &str,
    style: Style,
    views: Vec<(ViewLabel, ImageBuffer<f64>)>,
) -> Result<Vec<NamedPng>, EvalError> {
    if views.len() <= MAX_IMAGES {
        views
            .par_iter()
            .map(|(label, img)| {
                Ok(NamedPng {
                    file_name: view_file_name(sample, style, *label),
                    bytes: encode_png(img)?,
                })
            })
            .collect()
    } else {
        let n = views.len();
        let tiles: Vec<ImageBuffer<f64>> = views.into_iter().map(|(_, img)| img).collect();
        let grid = compose_grid(&tiles, default_columns(n))?;
        Ok(vec![NamedPng {
            file_name: grid_file_name(sample, style, n),
            bytes: encode_png(&grid)?,
        }])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        assert_eq!(view_set(1).unwrap()[0].label, ViewLabel::Front);
        let three = view_set(3).unwrap();
        assert_eq!(three[0].origin, Vec3::new(0.0, 0.0, 3.0));
        assert_eq!(three[1].origin, Vec3::new(3.0, 0.0, 1.0));
        assert_eq!(three[2].origin, Vec3::new(0.0, -3.0, 1.0));
        assert_eq!(view_set(6).unwrap().len(), 6);
        assert!(matches!(view_set(4), Err(EvalError::UnsupportedCount(4))));
    }

    #[test]
    fn ten_views_are_distinct() {
        let cams = view_set(10).unwrap();
        assert_eq!(cams.len(), 10);
        for i in 0..10 {
            for j in i + 1..10 {
                assert!(cams[i].origin.distance(cams[j].origin) > 0.1);
            }
            assert!(crate::camera::look_at_basis(&cams[i]).is_ok());
        }
        assert_eq!(cams[9].label.to_string(), "view10");
        // ring cameras keep distance 3
        assert!((cams[5].origin.norm() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn style_names() {
        for s in Style::ALL {
            assert_eq!(s.as_str().parse::<Style>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{s}\""));
        }
        assert!("ri-grey".parse::<Style>().is_err());
    }
}
