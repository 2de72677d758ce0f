//! Synthetic dataset trees in the benchmark layout, for smoke tests and demos
//! when the real meshes are not at hand.

use std::fs;
use std::path::Path;

use crate::geometry::Vec3;
use crate::mesh::{write_off, TriangleMesh};

use super::manifest::Split;
use super::EvalError;

/// Axis-aligned cuboid as 12 triangles.
pub fn cuboid(center: Vec3<f64>, half: Vec3<f64>) -> TriangleMesh<f64> {
    let mut vertices = Vec::with_capacity(8);
    for i in 0..8 {
        let s = |bit: usize| if i & bit != 0 { 1.0 } else { -1.0 };
        vertices.push(center + Vec3::new(s(1) * half.x, s(2) * half.y, s(4) * half.z));
    }
    let quads = [
        [0, 2, 3, 1],
        [4, 5, 7, 6],
        [0, 1, 5, 4],
        [2, 6, 7, 3],
        [0, 4, 6, 2],
        [1, 3, 7, 5],
    ];
    let faces = quads
        .iter()
        .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
        .collect();
    TriangleMesh { vertices, faces }
}

fn merge(parts: &[TriangleMesh<f64>]) -> TriangleMesh<f64> {
    let mut out = TriangleMesh {
        vertices: Vec::new(),
        faces: Vec::new(),
    };
    for p in parts {
        let base = out.vertices.len();
        out.vertices.extend_from_slice(&p.vertices);
        out.faces
            .extend(p.faces.iter().map(|f| [f[0] + base, f[1] + base, f[2] + base]));
    }
    out
}

/// A slab on top of a box whose proportions depend on the category index,
/// with a small per-instance variation.
pub fn synthetic_shape(category_index: usize, instance: usize) -> TriangleMesh<f64> {
    let c = category_index as f64;
    let jitter = 1.0 + 0.05 * ((instance % 7) as f64);
    let body = cuboid(
        Vec3::zero(),
        Vec3::new(0.3 + 0.07 * c * jitter, 0.4 + 0.03 * (c % 4.0), 0.2 + 0.05 * (c % 5.0)),
    );
    let top = cuboid(
        Vec3::new(0.0, 0.0, 0.35 + 0.05 * (c % 3.0)),
        Vec3::new(0.6 * jitter, 0.15 + 0.04 * (c % 6.0), 0.05),
    );
    merge(&[body, top])
}

/// Spreads `total` items over `n` buckets, earlier buckets taking the remainder.
pub fn distribute(total: usize, n: usize) -> Vec<usize> {
    (0..n).map(|i| total / n + usize::from(i < total % n)).collect()
}

/// Writes `<root>/<category>/<split>/<category>_<NNNN>.off`. With
/// `placeholders`, files hold only an `OFF` header (enough for indexing).
pub fn write_dataset(
    root: &Path,
    categories: &[&str],
    train_total: usize,
    test_total: usize,
    placeholders: bool,
) -> Result<(), EvalError> {
    let io = |e: std::io::Error| EvalError::Io(e.to_string());
    let train = distribute(train_total, categories.len());
    let test = distribute(test_total, categories.len());
    for (ci, cat) in categories.iter().enumerate() {
        let mut serial = 0;
        for (split, count) in [(Split::Train, train[ci]), (Split::Test, test[ci])] {
            let dir = root.join(cat).join(split.to_string());
            fs::create_dir_all(&dir).map_err(io)?;
            for _ in 0..count {
                serial += 1;
                let body = if placeholders {
                    "OFF\n".to_owned()
                } else {
                    write_off(&synthetic_shape(ci, serial))
                };
                fs::write(dir.join(format!("{cat}_{serial:04}.off")), body).map_err(io)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cuboid_area() {
        let m = cuboid(Vec3::zero(), Vec3::new(1.0, 1.0, 1.0));
        assert!((m.surface_area() - 24.0).abs() < 1e-12);
    }

    #[test]
    fn distribution() {
        assert_eq!(distribute(908, 10).iter().sum::<usize>(), 908);
        assert_eq!(distribute(7, 3), vec![3, 2, 2]);
    }
}
