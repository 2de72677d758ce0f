mod common;

use std::f64::consts::FRAC_PI_2;

use common::{random_cloud, rng};
use pointsight::camera::standard_views;
use pointsight::depth::voxelize;
use pointsight::geometry::Vec3;
use pointsight::imagebuf::ImageBuffer;
use pointsight::mesh::{normalize_unit_sphere, rotate_z, PointCloud};
use pointsight::raster::{render_points, RenderParams, RenderStyle};

fn cloud(seed: u64, n: usize) -> PointCloud<f64> {
    let pts = random_cloud(&mut rng(seed), n);
    normalize_unit_sphere(&PointCloud::new(
        pts.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect(),
    ))
}

fn agreement(a: &ImageBuffer<f64>, b: &ImageBuffer<f64>) -> f64 {
    let (a8, b8) = (a.to_rgb8(), b.to_rgb8());
    let ok = a8
        .chunks(3)
        .zip(b8.chunks(3))
        .filter(|(p, q)| p.iter().zip(q.iter()).all(|(x, y)| x.abs_diff(*y) <= 2))
        .count();
    ok as f64 / (a.width() * a.height()) as f64
}

fn rotation_agreement(params: &RenderParams, style: RenderStyle, seed: u64) -> f64 {
    let top = standard_views::<f64>()[0];
    let pc = cloud(seed, 1024);
    let turned = render_points(&rotate_z(&pc, FRAC_PI_2), &top, style, params).unwrap();
    let base = render_points(&pc, &top, style, params).unwrap().rotate_ccw90();
    agreement(&turned, &base)
}

#[test]
fn gray_top_render_commutes_with_z_rotation() {
    let params = RenderParams::default();
    for seed in 0..10 {
        let f = rotation_agreement(&params, RenderStyle::Gray, seed);
        assert!(f >= 0.98, "seed {seed}: {f}");
    }
}

#[test]
fn oblique_light_breaks_rotation_equivariance() {
    // a light with a lateral component rotates with the image but not with the scene
    let params = RenderParams {
        light: [1.0, -1.0, 2.0],
        ..RenderParams::default()
    };
    let f = rotation_agreement(&params, RenderStyle::Gray, 0);
    assert!(f < 0.98, "{f}");
}

#[test]
fn voxel_occupancy_commutes_with_z_rotation() {
    let top = standard_views::<f64>()[0];
    let g = 32;
    for seed in 0..5 {
        let pc = cloud(100 + seed, 1024);
        let a = voxelize(&rotate_z(&pc, FRAC_PI_2), &top, g).unwrap();
        let b = voxelize(&pc, &top, g).unwrap();
        // quarter turn about the view axis: (i, j) -> (g-1-j, i)
        let mut same = 0;
        let mut total = 0;
        for k in 0..g {
            for j in 0..g {
                for i in 0..g {
                    let lhs = a.get(g - 1 - j, i, k).is_some();
                    let rhs = b.get(i, j, k).is_some();
                    if lhs || rhs {
                        total += 1;
                        same += usize::from(lhs == rhs);
                    }
                }
            }
        }
        let f = same as f64 / total as f64;
        assert!(f >= 0.99, "seed {seed}: {f}");
    }
}
