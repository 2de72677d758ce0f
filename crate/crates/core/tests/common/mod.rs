#![allow(dead_code)]

use std::path::Path;

use pointsight::vlm::{CategorySet, TranscriptRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

#[derive(Debug, Deserialize)]
pub struct ParserCase {
    pub set: String,
    pub response: String,
    pub expected: Option<String>,
}

pub fn parser_corpus() -> Vec<ParserCase> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/parser_corpus.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

pub fn category_set(name: &str) -> CategorySet {
    CategorySet::from_spec(name).unwrap()
}

pub fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<[f64; 3]> {
    (0..n)
        .map(|_| loop {
            let p = [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ];
            if p[0] * p[0] + p[1] * p[1] + p[2] * p[2] <= 1.0 {
                break p;
            }
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Straightforward dense depth image: every stage written as a direct
/// nested loop over the full neighborhood rather than separable passes.
/// Returns a g×g row-major intensity image (row 0 at the top).
pub struct BruteDense {
    pub g: usize,
    pub window: usize,
    pub sigma: f64,
    pub threshold: f64,
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn unit(a: [f64; 3]) -> [f64; 3] {
    let n = dot(a, a).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

impl BruteDense {
    pub fn image(&self, points: &[[f64; 3]], origin: [f64; 3], up_hint: [f64; 3]) -> Vec<f64> {
        let g = self.g;
        let forward = unit(sub([0.0; 3], origin));
        let right = unit(cross(forward, up_hint));
        let up = cross(right, forward);
        let cell = |c: f64| (((c + 1.0) / 2.0 * g as f64).floor().max(0.0) as usize).min(g - 1);

        let at = |i: usize, j: usize, k: usize| (i * g + j) * g + k;
        let mut vox: Vec<Option<f64>> = vec![None; g * g * g];
        for &p in points {
            let (cr, cu, cf) = (dot(p, right), dot(p, up), dot(p, forward));
            let d = ((cf + 1.0) / 2.0).clamp(0.0, 1.0);
            let slot = &mut vox[at(cell(cr), cell(cu), cell(cf))];
            *slot = Some(slot.map_or(d, |o: f64| o.min(d)));
        }

        let r = self.window as isize / 2;
        let inside = |v: isize| v >= 0 && v < g as isize;
        let mut pooled = vec![None; g * g * g];
        for i in 0..g {
            for j in 0..g {
                for k in 0..g {
                    let mut m: Option<f64> = None;
                    for a in -r..=r {
                        for b in -r..=r {
                            for c in -r..=r {
                                let (x, y, z) = (i as isize + a, j as isize + b, k as isize + c);
                                if inside(x) && inside(y) && inside(z) {
                                    if let Some(v) = vox[at(x as usize, y as usize, z as usize)] {
                                        m = Some(m.map_or(v, |o: f64| o.min(v)));
                                    }
                                }
                            }
                        }
                    }
                    pooled[at(i, j, k)] = m;
                }
            }
        }

        let kr = (3.0 * self.sigma).ceil() as isize;
        let w1: Vec<f64> = (-kr..=kr)
            .map(|x| (-(x * x) as f64 / (2.0 * self.sigma * self.sigma)).exp())
            .collect();
        let s: f64 = w1.iter().sum();
        let w1: Vec<f64> = w1.iter().map(|w| w / s).collect();

        let mut smooth = vec![None; g * g * g];
        for i in 0..g {
            for j in 0..g {
                for k in 0..g {
                    let (mut val, mut mass) = (0.0, 0.0);
                    for a in -kr..=kr {
                        for b in -kr..=kr {
                            for c in -kr..=kr {
                                let (x, y, z) = (i as isize + a, j as isize + b, k as isize + c);
                                if !(inside(x) && inside(y) && inside(z)) {
                                    continue;
                                }
                                if let Some(v) = pooled[at(x as usize, y as usize, z as usize)] {
                                    let w = w1[(a + kr) as usize] * w1[(b + kr) as usize] * w1[(c + kr) as usize];
                                    val += w * v;
                                    mass += w;
                                }
                            }
                        }
                    }
                    if mass > 0.0 && mass >= self.threshold {
                        smooth[at(i, j, k)] = Some(val.clamp(0.0, 1.0));
                    }
                }
            }
        }

        let mut img = vec![0.0; g * g];
        for i in 0..g {
            for j in 0..g {
                if let Some(k) = (0..g).find(|&k| smooth[at(i, j, k)].is_some()) {
                    img[(g - 1 - j) * g + i] = 1.0 - k as f64 / (g - 1) as f64;
                }
            }
        }
        img
    }
}

/// Transcript answering each sample with a fixed outcome: `Some(text)` is
/// a reply, `None` a persistent service failure.
pub fn scripted_records(plan: &[(String, Option<String>)]) -> Vec<TranscriptRecord> {
    plan.iter()
        .map(|(id, reply)| TranscriptRecord {
            sample_id: Some(id.clone()),
            response: reply.clone(),
            error: reply.is_none().then(|| "HTTP 503: upstream overloaded".to_owned()),
            latency: 3.0,
            ..Default::default()
        })
        .collect()
}
