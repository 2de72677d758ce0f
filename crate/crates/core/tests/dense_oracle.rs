mod common;

use common::{random_cloud, rng, BruteDense};
use pointsight::camera::standard_views;
use pointsight::depth::{dense_depth_map, DepthParams};
use pointsight::geometry::Vec3;
use pointsight::mesh::PointCloud;
use rand::Rng;

fn params(g: usize) -> DepthParams {
    DepthParams {
        width: g,
        height: g,
        grid: g,
        ..DepthParams::default()
    }
}

fn compare(g: usize, seed: u64, sigma: f64, window: usize, threshold: f64) {
    let mut r = rng(seed);
    let n = r.random_range(10..=50);
    let pts = random_cloud(&mut r, n);
    let cam = standard_views::<f64>()[r.random_range(0..3)];
    let pc = PointCloud::new(pts.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect());
    let p = DepthParams {
        sigma,
        pool_window: window,
        occupancy_threshold: threshold,
        ..params(g)
    };
    let got = dense_depth_map(&pc, &cam, &p).unwrap();
    let want = BruteDense {
        g,
        window,
        sigma,
        threshold,
    }
    .image(&pts, cam.origin.to_array(), cam.up_hint.to_array());
    for y in 0..g {
        for x in 0..g {
            let px = got.get(x, y);
            assert_eq!(px[0], px[1]);
            assert!(
                (px[0] - want[y * g + x]).abs() < 1e-12,
                "seed {seed} at ({x},{y}): {} vs {}",
                px[0],
                want[y * g + x]
            );
        }
    }
}

#[test]
fn staged_pipeline_matches_brute_force_at_16() {
    for seed in 0..20 {
        compare(16, seed, 1.0, 3, 0.05);
    }
}

#[test]
fn other_parameters_match_too() {
    compare(16, 100, 0.7, 1, 0.0);
    compare(16, 101, 1.5, 5, 0.2);
    compare(20, 102, 1.0, 3, 0.05);
}
