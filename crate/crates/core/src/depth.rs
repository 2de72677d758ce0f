//! Sparse and dense depth-map visualizations.
//!
//! The sparse map splats every point with a foreshortened disc. The dense map
//! runs voxelize → min-pool densify → Gaussian smooth → depth-axis compress on
//! a grid aligned with the viewing camera.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{look_at_basis, CameraError, Projector, ViewCamera};
use crate::imagebuf::ImageBuffer;
use crate::mesh::PointCloud;
use crate::scalar::Scalar;
use crate::splat::{for_each_disc_pixel, splat_radius};

#[derive(Debug, Error, PartialEq)]
pub enum DepthError {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error(transparent)]
    Camera(#[from] CameraError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Projection parameters for both depth styles. Every field is recorded in
/// run metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DepthParams {
    pub width: usize,
    pub height: usize,
    /// Sparse splat base radius (pixels) at the reference distance.
    pub r0: f64,
    pub r_max: usize,
    pub eps: f64,
    /// Dense grid resolution per axis.
    pub grid: usize,
    pub pool_window: usize,
    pub sigma: f64,
    /// Smoothed-occupancy threshold below which a cell becomes empty.
    pub occupancy_threshold: f64,
    /// Nearer = darker instead of nearer = brighter.
    pub invert: bool,
}

impl Default for DepthParams {
    fn default() -> Self {
        Self {
            width: 224,
            height: 224,
            r0: 4.0,
            r_max: 12,
            eps: 1e-6,
            grid: 64,
            pool_window: 3,
            sigma: 1.0,
            occupancy_threshold: 0.05,
            invert: false,
        }
    }
}

impl DepthParams {
    pub fn validate(&self) -> Result<(), DepthError> {
        let bad = |m: &str| Err(DepthError::InvalidParameter(m.into()));
        if self.width < 16 || self.height < 16 {
            return bad("image dimensions must be at least 16");
        }
        if self.grid < 8 {
            return bad("grid resolution must be at least 8");
        }
        if self.pool_window == 0 || self.pool_window.is_multiple_of(2) {
            return bad("pooling window must be odd");
        }
        if !(self.sigma > 0.0) {
            return bad("sigma must be positive");
        }
        if !(self.r0 > 0.0) || self.r_max == 0 {
            return bad("splat radius must be positive");
        }
        Ok(())
    }
}

fn invert_in_place<T: Scalar>(img: &mut ImageBuffer<T>) {
    for y in 0..img.height() {
        for x in 0..img.width() {
            let v = T::one() - img.get(x, y)[0];
            img.set(x, y, [v; 3]);
        }
    }
}

/// Perspective splat of every point; nearer points are brighter and larger,
/// background is 0.
pub fn sparse_depth_map<T: Scalar>(
    pc: &PointCloud<T>,
    cam: &ViewCamera<T>,
    params: &DepthParams,
) -> Result<ImageBuffer<T>, DepthError> {
    if pc.is_empty() {
        return Err(DepthError::EmptyCloud);
    }
    let (w, h) = (params.width, params.height);
    let proj = Projector::new(cam, w, h)?;
    let projected: Vec<_> = pc.points.iter().filter_map(|&p| proj.project(p).ok()).collect();

    let mut img = ImageBuffer::filled(w, h, T::zero());
    if projected.is_empty() {
        return Ok(img);
    }
    let d_min = projected.iter().map(|p| p.cam_depth).fold(T::infinity(), T::min);
    let d_max = projected.iter().map(|p| p.cam_depth).fold(T::neg_infinity(), T::max);
    let span = d_max - d_min + T::lit(params.eps);
    let (r0, d_ref) = (T::lit(params.r0), cam.reference_distance());

    let mut zbuf = vec![T::infinity(); w * h];
    for p in &projected {
        let intensity = T::one() - (p.cam_depth - d_min) / span;
        let r = splat_radius(r0, d_ref, p.cam_depth, params.r_max);
        for_each_disc_pixel(p.u, p.v, r, w, h, |x, y, _, _| {
            let z = &mut zbuf[y * w + x];
            if p.cam_depth < *z {
                *z = p.cam_depth;
                img.set(x, y, [intensity; 3]);
            }
        });
    }
    if params.invert {
        invert_in_place(&mut img);
    }
    Ok(img)
}

/// G³ grid in camera-aligned axes `(right, up, forward)`; `None` is an empty cell.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelGrid<T> {
    resolution: usize,
    cells: Vec<Option<T>>,
    /// Half extent of the cubic bounds around the camera target.
    half_extent: T,
}

impl<T: Scalar> VoxelGrid<T> {
    pub fn empty(resolution: usize) -> Self {
        Self {
            resolution,
            cells: vec![None; resolution * resolution * resolution],
            half_extent: T::one(),
        }
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn half_extent(&self) -> T {
        self.half_extent
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.resolution + j) * self.resolution + i
    }

    /// Cell at `(right, up, depth)` indices; depth 0 is nearest the camera.
    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> Option<T> {
        self.cells[self.index(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: Option<T>) {
        let idx = self.index(i, j, k);
        self.cells[idx] = v;
    }

    pub fn cells(&self) -> &[Option<T>] {
        &self.cells
    }

    pub fn occupied(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    pub fn scaled(&self, a: T) -> Self {
        Self {
            resolution: self.resolution,
            cells: self.cells.iter().map(|c| c.map(|v| v * a)).collect(),
            half_extent: self.half_extent,
        }
    }
}

fn cell_coord<T: Scalar>(c: T, g: usize) -> usize {
    let gf = T::from_usize_lossy(g);
    let f = ((c + T::one()) * T::lit(0.5) * gf).floor();
    if !(f > T::zero()) {
        0
    } else {
        f.to_usize().unwrap_or(g - 1).min(g - 1)
    }
}

/// Quantizes the cloud into a camera-aligned grid over `[-1, 1]³` around the
/// target. Each occupied cell keeps the smallest normalized depth in `[0, 1]`.
pub fn voxelize<T: Scalar>(pc: &PointCloud<T>, cam: &ViewCamera<T>, g: usize) -> Result<VoxelGrid<T>, DepthError> {
    if pc.is_empty() {
        return Err(DepthError::EmptyCloud);
    }
    if g < 2 {
        return Err(DepthError::InvalidParameter(
            "grid resolution must be at least 2".into(),
        ));
    }
    let basis = look_at_basis(cam)?;
    let mut grid = VoxelGrid::empty(g);
    let half = T::lit(0.5);
    for &p in &pc.points {
        let d = p - cam.target;
        let (cr, cu, cf) = (d.dot(basis.right), d.dot(basis.up), d.dot(basis.forward));
        let (i, j, k) = (cell_coord(cr, g), cell_coord(cu, g), cell_coord(cf, g));
        let depth = ((cf + T::one()) * half).max(T::zero()).min(T::one());
        let idx = grid.index(i, j, k);
        grid.cells[idx] = Some(match grid.cells[idx] {
            Some(old) if old <= depth => old,
            _ => depth,
        });
    }
    Ok(grid)
}

#[inline]
fn min_opt<T: Scalar>(a: Option<T>, b: Option<T>) -> Option<T> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

/// Minimum over the `window³` neighborhood, ignoring empty cells; a cell
/// stays empty only if its whole neighborhood is empty.
pub fn densify_min_pool<T: Scalar>(grid: &VoxelGrid<T>, window: usize) -> VoxelGrid<T> {
    assert!(window % 2 == 1, "pooling window must be odd");
    let r = window / 2;
    let g = grid.resolution;
    let mut cur = grid.clone();
    // a box minimum factors into three axis-aligned passes
    for axis in 0..3 {
        let mut next = cur.clone();
        for k in 0..g {
            for j in 0..g {
                for i in 0..g {
                    let c = [i, j, k][axis];
                    let (lo, hi) = (c.saturating_sub(r), (c + r).min(g - 1));
                    let mut m = None;
                    for t in lo..=hi {
                        let v = match axis {
                            0 => cur.get(t, j, k),
                            1 => cur.get(i, t, k),
                            _ => cur.get(i, j, t),
                        };
                        m = min_opt(m, v);
                    }
                    next.set(i, j, k, m);
                }
            }
        }
        cur = next;
    }
    cur
}

/// Normalized 1-D Gaussian truncated at `ceil(3σ)`.
pub fn gaussian_kernel<T: Scalar>(sigma: T) -> Vec<T> {
    let radius = (T::lit(3.0) * sigma).ceil().to_usize().unwrap_or(0);
    let two_s2 = T::lit(2.0) * sigma * sigma;
    let raw: Vec<T> = (0..=2 * radius)
        .map(|i| {
            let x = T::from_usize_lossy(i) - T::from_usize_lossy(radius);
            (-(x * x) / two_s2).exp()
        })
        .collect();
    let total: T = raw.iter().copied().sum();
    raw.into_iter().map(|w| w / total).collect()
}

fn convolve_axis<T: Scalar>(src: &[T], g: usize, axis: usize, kernel: &[T]) -> Vec<T> {
    let radius = kernel.len() / 2;
    let stride = [1, g, g * g][axis];
    let mut out = vec![T::zero(); src.len()];
    for k in 0..g {
        for j in 0..g {
            for i in 0..g {
                let c = [i, j, k][axis];
                let base = (k * g + j) * g + i - c * stride;
                let mut acc = T::zero();
                for (t, &w) in kernel.iter().enumerate() {
                    let pos = c + t;
                    if pos < radius || pos - radius >= g {
                        continue;
                    }
                    acc += w * src[base + (pos - radius) * stride];
                }
                out[(k * g + j) * g + i] = acc;
            }
        }
    }
    out
}

/// Separable Gaussian smoothing with empty cells read as 0. Occupancy is
/// smoothed alongside the values; a cell whose smoothed occupancy is zero or
/// below `threshold` becomes empty, otherwise it keeps its smoothed value
/// clamped to `[0, 1]`.
pub fn gaussian_smooth<T: Scalar>(grid: &VoxelGrid<T>, sigma: T, threshold: T) -> VoxelGrid<T> {
    assert!(sigma > T::zero(), "sigma must be positive");
    let g = grid.resolution;
    let kernel = gaussian_kernel(sigma);
    let mut values: Vec<T> = grid.cells.iter().map(|c| c.unwrap_or(T::zero())).collect();
    let mut mass: Vec<T> = grid
        .cells
        .iter()
        .map(|c| if c.is_some() { T::one() } else { T::zero() })
        .collect();
    for axis in 0..3 {
        values = convolve_axis(&values, g, axis, &kernel);
        mass = convolve_axis(&mass, g, axis, &kernel);
    }
    let cells = values
        .into_iter()
        .zip(mass)
        .map(|(v, m)| {
            if m <= T::zero() || m < threshold {
                None
            } else {
                Some(v.max(T::zero()).min(T::one()))
            }
        })
        .collect();
    VoxelGrid {
        resolution: g,
        cells,
        half_extent: grid.half_extent,
    }
}

/// Collapses the depth axis: each `(right, up)` pillar becomes one pixel with
/// intensity `1 - k/(g-1)` for its nearest occupied depth index `k`, 0 when
/// empty. The result is g×g with up mapped to the top row.
pub fn compress_depth<T: Scalar>(grid: &VoxelGrid<T>) -> ImageBuffer<T> {
    let g = grid.resolution;
    let denom = T::from_usize_lossy(g.saturating_sub(1).max(1));
    let mut img = ImageBuffer::filled(g, g, T::zero());
    for j in 0..g {
        for i in 0..g {
            if let Some(k) = (0..g).find(|&k| grid.get(i, j, k).is_some()) {
                let v = T::one() - T::from_usize_lossy(k) / denom;
                img.set(i, g - 1 - j, [v; 3]);
            }
        }
    }
    img
}

/// The full dense pipeline, upsampled bilinearly to the requested size.
pub fn dense_depth_map<T: Scalar>(
    pc: &PointCloud<T>,
    cam: &ViewCamera<T>,
    params: &DepthParams,
) -> Result<ImageBuffer<T>, DepthError> {
    if pc.is_empty() {
        return Err(DepthError::EmptyCloud);
    }
    params.validate()?;
    let grid = voxelize(pc, cam, params.grid)?;
    let pooled = densify_min_pool(&grid, params.pool_window);
    let smoothed = gaussian_smooth(&pooled, T::lit(params.sigma), T::lit(params.occupancy_threshold));
    let mut img = compress_depth(&smoothed).resize_bilinear(params.width, params.height);
    if params.invert {
        invert_in_place(&mut img);
    }
    Ok(img)
}
