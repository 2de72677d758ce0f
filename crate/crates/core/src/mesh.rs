//! Mesh ingestion: OFF parsing, area-weighted surface sampling, and
//! normalization into the unit-sphere object space used by every view.

use std::fmt::Write as _;

use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::Vec3;
use crate::scalar::Scalar;

/// Identifier of the generator behind [`sample_surface`], recorded in run metadata.
pub const SAMPLER_RNG: &str = "chacha8 (rand_chacha 0.9, seed_from_u64)";

/// Default number of points sampled per object.
pub const DEFAULT_POINTS: usize = 1024;

#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("malformed OFF header: {0}")]
    MalformedHeader(String),
    #[error("face {face} references vertex {index}, but the mesh has {vertex_count} vertices")]
    IndexOutOfRange {
        face: usize,
        index: usize,
        vertex_count: usize,
    },
    #[error("truncated file: expected {expected} {what}, found {found}")]
    TruncatedFile {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("mesh has zero total surface area")]
    DegenerateMesh,
    #[error("sample count must be at least 1")]
    ZeroSamples,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh<T> {
    pub vertices: Vec<Vec3<T>>,
    pub faces: Vec<[usize; 3]>,
}

impl<T: Scalar> TriangleMesh<T> {
    pub fn new(vertices: Vec<Vec3<T>>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        for (i, v) in vertices.iter().enumerate() {
            if !v.is_finite() {
                return Err(MeshError::Syntax {
                    line: 0,
                    msg: format!("vertex {i} has a non-finite coordinate"),
                });
            }
        }
        for (fi, f) in faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&idx| idx >= vertices.len()) {
                return Err(MeshError::IndexOutOfRange {
                    face: fi,
                    index: bad,
                    vertex_count: vertices.len(),
                });
            }
        }
        Ok(Self { vertices, faces })
    }

    pub fn triangle(&self, face: usize) -> [Vec3<T>; 3] {
        let [a, b, c] = self.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, face: usize) -> T {
        let [a, b, c] = self.triangle(face);
        (b - a).cross(c - a).norm() * T::lit(0.5)
    }

    pub fn surface_area(&self) -> T {
        (0..self.faces.len()).map(|f| self.triangle_area(f)).sum()
    }
}

/// K unoriented points. Pipeline stages reject an empty cloud with their own error.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud<T> {
    pub points: Vec<Vec3<T>>,
}

impl<T: Scalar> PointCloud<T> {
    pub fn new(points: Vec<Vec3<T>>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Vec3<T> {
        if self.points.is_empty() {
            return Vec3::zero();
        }
        let sum = self.points.iter().fold(Vec3::zero(), |acc, &p| acc + p);
        sum / T::from_usize_lossy(self.points.len())
    }

    pub fn max_norm(&self) -> T {
        self.points.iter().map(|p| p.norm()).fold(T::zero(), |a, b| a.max(b))
    }

    pub fn cast<U: Scalar>(&self) -> PointCloud<U> {
        PointCloud::new(self.points.iter().map(|p| p.cast()).collect())
    }
}

/// Strips `#` comments and surrounding whitespace; yields `(1-based line, content)`
/// for non-empty lines.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((i + 1, line))
    })
}

fn parse_num<N: std::str::FromStr>(tok: &str, line: usize) -> Result<N, MeshError> {
    tok.parse().map_err(|_| MeshError::Syntax {
        line,
        msg: format!("invalid number {tok:?}"),
    })
}

/// Parses an ASCII OFF mesh. Polygons are fan-triangulated; the ModelNet
/// malformation with the counts fused onto the `OFF` line is accepted.
pub fn parse_off<T: Scalar>(text: &str) -> Result<TriangleMesh<T>, MeshError> {
    let mut lines = content_lines(text);

    let (_, header) = lines
        .next()
        .ok_or_else(|| MeshError::MalformedHeader("empty input".into()))?;
    let rest = header
        .strip_prefix("OFF")
        .ok_or_else(|| MeshError::MalformedHeader(format!("expected OFF token, found {header:?}")))?;

    let mut count_tokens: Vec<String> = rest.split_whitespace().map(str::to_owned).collect();
    if count_tokens.is_empty() {
        let (_, l) = lines
            .next()
            .ok_or_else(|| MeshError::MalformedHeader("missing element counts".into()))?;
        count_tokens = l.split_whitespace().map(str::to_owned).collect();
    }
    if count_tokens.len() < 2 {
        return Err(MeshError::MalformedHeader(format!(
            "expected vertex and face counts, found {count_tokens:?}"
        )));
    }
    let count = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| MeshError::MalformedHeader(format!("invalid count {s:?}")))
    };
    let n_vertices = count(&count_tokens[0])?;
    let n_faces = count(&count_tokens[1])?;

    let mut vertices = Vec::with_capacity(n_vertices);
    for found in 0..n_vertices {
        let (ln, l) = lines.next().ok_or(MeshError::TruncatedFile {
            what: "vertices",
            expected: n_vertices,
            found,
        })?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() < 3 {
            return Err(MeshError::Syntax {
                line: ln,
                msg: "vertex needs three coordinates".into(),
            });
        }
        let c: [f64; 3] = [
            parse_num(toks[0], ln)?,
            parse_num(toks[1], ln)?,
            parse_num(toks[2], ln)?,
        ];
        if c.iter().any(|v| !v.is_finite()) {
            return Err(MeshError::Syntax {
                line: ln,
                msg: "non-finite vertex coordinate".into(),
            });
        }
        vertices.push(Vec3::from_f64(c[0], c[1], c[2]));
    }

    let mut faces = Vec::with_capacity(n_faces);
    for found in 0..n_faces {
        let (ln, l) = lines.next().ok_or(MeshError::TruncatedFile {
            what: "faces",
            expected: n_faces,
            found,
        })?;
        let mut toks = l.split_whitespace();
        let n: usize = parse_num(toks.next().unwrap_or(""), ln)?;
        if n < 3 {
            return Err(MeshError::Syntax {
                line: ln,
                msg: format!("face with {n} vertices"),
            });
        }
        let idx = toks
            .by_ref()
            .take(n)
            .map(|t| parse_num::<usize>(t, ln))
            .collect::<Result<Vec<_>, _>>()?;
        if idx.len() < n {
            return Err(MeshError::TruncatedFile {
                what: "face indices",
                expected: n,
                found: idx.len(),
            });
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= n_vertices) {
            return Err(MeshError::IndexOutOfRange {
                face: found,
                index: bad,
                vertex_count: n_vertices,
            });
        }
        for w in 1..n - 1 {
            faces.push([idx[0], idx[w], idx[w + 1]]);
        }
    }

    Ok(TriangleMesh { vertices, faces })
}

/// Serializes a triangle mesh as ASCII OFF. Coordinates use shortest
/// round-trip formatting, so [`parse_off`] restores them exactly.
pub fn write_off<T: Scalar>(mesh: &TriangleMesh<T>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "OFF\n{} {} 0", mesh.vertices.len(), mesh.faces.len());
    for v in &mesh.vertices {
        let _ = writeln!(
            out,
            "{} {} {}",
            v.x.to_f64_lossy(),
            v.y.to_f64_lossy(),
            v.z.to_f64_lossy()
        );
    }
    for f in &mesh.faces {
        let _ = writeln!(out, "3 {} {} {}", f[0], f[1], f[2]);
    }
    out
}

/// Reads a whitespace- or comma-separated point list, one point per line.
/// Columns after the first three (normals, colors) are ignored.
pub fn parse_xyz<T: Scalar>(text: &str) -> Result<PointCloud<T>, MeshError> {
    let mut points = Vec::new();
    for (ln, l) in content_lines(text) {
        let toks: Vec<&str> = l
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .collect();
        if toks.len() < 3 {
            return Err(MeshError::Syntax {
                line: ln,
                msg: "point needs three coordinates".into(),
            });
        }
        let c: [f64; 3] = [
            parse_num(toks[0], ln)?,
            parse_num(toks[1], ln)?,
            parse_num(toks[2], ln)?,
        ];
        if c.iter().any(|v| !v.is_finite()) {
            return Err(MeshError::Syntax {
                line: ln,
                msg: "non-finite coordinate".into(),
            });
        }
        points.push(Vec3::from_f64(c[0], c[1], c[2]));
    }
    if points.is_empty() {
        return Err(MeshError::TruncatedFile {
            what: "points",
            expected: 1,
            found: 0,
        });
    }
    Ok(PointCloud::new(points))
}

/// Draws `k` points: a triangle chosen with probability proportional to its
/// area, then a uniform point inside it. Deterministic for a fixed seed.
pub fn sample_surface<T: Scalar>(mesh: &TriangleMesh<T>, k: usize, seed: u64) -> Result<PointCloud<T>, MeshError> {
    if k == 0 {
        return Err(MeshError::ZeroSamples);
    }
    let areas: Vec<f64> = (0..mesh.faces.len())
        .map(|f| mesh.triangle_area(f).to_f64_lossy())
        .collect();
    let total: f64 = areas.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(MeshError::DegenerateMesh);
    }
    let picker = WeightedIndex::new(&areas).map_err(|_| MeshError::DegenerateMesh)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let points = (0..k)
        .map(|_| {
            let [a, b, c] = mesh.triangle(picker.sample(&mut rng));
            let r1: f64 = rng.random();
            let r2: f64 = rng.random();
            let s = r1.sqrt();
            let (wa, wb, wc) = (1.0 - s, s * (1.0 - r2), s * r2);
            a * T::lit(wa) + b * T::lit(wb) + c * T::lit(wc)
        })
        .collect();
    Ok(PointCloud::new(points))
}

/// Centers on the centroid and scales so the farthest point has norm 1.
/// A cloud with zero radius collapses onto the origin without scaling.
pub fn normalize_unit_sphere<T: Scalar>(pc: &PointCloud<T>) -> PointCloud<T> {
    let c = pc.centroid();
    let centered: Vec<Vec3<T>> = pc.points.iter().map(|&p| p - c).collect();
    let radius = centered.iter().map(|p| p.norm()).fold(T::zero(), |a, b| a.max(b));
    if radius > T::zero() {
        PointCloud::new(centered.into_iter().map(|p| p / radius).collect())
    } else {
        PointCloud::new(centered)
    }
}

/// Right-handed rotation about +z.
pub fn rotate_z<T: Scalar>(pc: &PointCloud<T>, angle: T) -> PointCloud<T> {
    let (s, c) = angle.sin_cos();
    PointCloud::new(
        pc.points
            .iter()
            .map(|p| Vec3::new(c * p.x - s * p.y, s * p.x + c * p.y, p.z))
            .collect(),
    )
}
