//! The evaluation harness: manifest scanning, stratified subsetting, view
//! sets, the run loop with resume, and summaries.

pub mod manifest;
pub mod synthetic;
mod visualize;

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::camera::ViewCamera;
use crate::depth::{DepthError, DepthParams};
use crate::imagebuf::ImageError;
use crate::mesh::{normalize_unit_sphere, parse_off, parse_xyz, sample_surface, MeshError, PointCloud, DEFAULT_POINTS};
use crate::raster::{RasterError, RenderParams};
use crate::vlm::{
    build_prompt, parse_choice, CategorySet, Gateway, GatewayConfig, GatewayError, Outcome, ParsedChoice, PromptSpec,
    RequestMeta, TranscriptWriter, VlmBackend,
};

use manifest::{Manifest, ManifestEntry, Split};
pub use visualize::{
    grid_file_name, render_view, render_views, request_images, view_file_name, view_set, NamedPng, Style,
    RING_DISTANCE, RING_ELEVATION_DEG, VIEW_COUNTS,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("I/O: {0}")]
    Io(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("unsupported view count {0} (expected 1, 3, 6, or 10)")]
    UnsupportedCount(usize),
    #[error("requested {requested} samples but the split holds {available}")]
    NotEnoughSamples { requested: usize, available: usize },
    #[error("no non-errored records")]
    NoValidRecords,
    #[error("configuration: {0}")]
    Config(String),
    #[error("existing run in {0} used a different configuration; choose another output directory")]
    ConfigMismatch(PathBuf),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Depth(#[from] DepthError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Image(#[from] ImageError),
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> EvalError + '_ {
    move |e| EvalError::Io(format!("{}: {e}", path.display()))
}

/// Seed for one sample's surface sampling, independent of subset order.
pub fn sample_seed(seed: u64, id: &str) -> u64 {
    let digest = Sha256::digest(id.as_bytes());
    seed ^ u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Loads a shape file as a normalized cloud. Meshes are sampled with `points`
/// points; point files are used as they are.
pub fn load_cloud(path: &Path, points: usize, seed: u64) -> Result<PointCloud<f64>, EvalError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let ext = path
        .extension()
        .map(|e| e.to_string_lossy().to_lowercase())
        .unwrap_or_default();
    let pc = if ext == "off" {
        sample_surface(&parse_off::<f64>(&text)?, points, seed)?
    } else {
        parse_xyz::<f64>(&text)?
    };
    if pc.is_empty() {
        return Err(EvalError::Dataset(format!("{} holds no points", path.display())));
    }
    Ok(normalize_unit_sphere(&pc))
}

/// `n` test-split entries, drawn round-robin over the sorted categories from
/// independently shuffled per-category lists, so every category appears once
/// `n` reaches the category count.
pub fn sample_subset(manifest: &Manifest, n: usize, seed: u64) -> Result<Vec<ManifestEntry>, EvalError> {
    let mut by_cat: BTreeMap<&str, Vec<&ManifestEntry>> = BTreeMap::new();
    for e in manifest.split(Split::Test) {
        by_cat.entry(&e.category).or_default().push(e);
    }
    let available: usize = by_cat.values().map(Vec::len).sum();
    if available == 0 && n > 0 {
        return Err(EvalError::Dataset("test split is empty".into()));
    }
    if n > available {
        return Err(EvalError::NotEnoughSamples {
            requested: n,
            available,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut queues: Vec<std::vec::IntoIter<&ManifestEntry>> = by_cat
        .into_values()
        .map(|mut v| {
            v.sort_by(|a, b| a.id.cmp(&b.id));
            v.shuffle(&mut rng);
            v.into_iter()
        })
        .collect();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        for q in queues.iter_mut() {
            if out.len() == n {
                break;
            }
            if let Some(e) = q.next() {
                out.push(e.clone());
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordOutcome {
    Correct,
    Incorrect,
    Unparseable,
    Errored,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub sample_id: String,
    pub true_label: String,
    pub style: Style,
    pub view_count: usize,
    /// The parsed label; absent for unparseable and errored records.
    pub predicted: Option<String>,
    pub outcome: RecordOutcome,
    /// Seconds.
    pub latency: f64,
    #[serde(default)]
    pub retries: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl EvalRecord {
    fn base(sample_id: &str, true_label: &str, style: Style, view_count: usize) -> Self {
        Self {
            sample_id: sample_id.to_owned(),
            true_label: true_label.to_owned(),
            style,
            view_count,
            predicted: None,
            outcome: RecordOutcome::Errored,
            latency: 0.0,
            retries: 0,
            response: None,
            error: None,
        }
    }

    /// A record for a service reply, scored against the true label.
    pub fn answered(
        sample_id: &str,
        true_label: &str,
        style: Style,
        view_count: usize,
        parsed: ParsedChoice,
        latency: f64,
    ) -> Self {
        let mut r = Self::base(sample_id, true_label, style, view_count);
        r.latency = latency;
        match parsed {
            ParsedChoice::Label(l) => {
                r.outcome = if l == true_label {
                    RecordOutcome::Correct
                } else {
                    RecordOutcome::Incorrect
                };
                r.predicted = Some(l);
            }
            ParsedChoice::Unparseable => r.outcome = RecordOutcome::Unparseable,
        }
        r
    }

    pub fn errored(sample_id: &str, true_label: &str, style: Style, view_count: usize, error: String) -> Self {
        let mut r = Self::base(sample_id, true_label, style, view_count);
        r.error = Some(error);
        r
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub total: usize,
    pub errored: usize,
    pub correct: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub n_total: usize,
    pub n_errored: usize,
    pub n_unparseable: usize,
    pub n_correct: usize,
    /// Correct over non-errored; absent when every record errored.
    pub accuracy: Option<f64>,
    /// Mean seconds over non-errored records.
    pub mean_latency: Option<f64>,
    pub per_category: BTreeMap<String, CategoryStats>,
}

impl EvalSummary {
    pub fn from_records(records: &[EvalRecord]) -> Self {
        let mut per_category: BTreeMap<String, CategoryStats> = BTreeMap::new();
        let (mut n_errored, mut n_unparseable, mut n_correct) = (0, 0, 0);
        for r in records {
            let c = per_category.entry(r.true_label.clone()).or_default();
            c.total += 1;
            match r.outcome {
                RecordOutcome::Errored => {
                    n_errored += 1;
                    c.errored += 1;
                }
                RecordOutcome::Correct => {
                    n_correct += 1;
                    c.correct += 1;
                }
                RecordOutcome::Unparseable => n_unparseable += 1,
                RecordOutcome::Incorrect => {}
            }
        }
        let n_total = records.len();
        let valid = n_total - n_errored;
        Self {
            n_total,
            n_errored,
            n_unparseable,
            n_correct,
            accuracy: (valid > 0).then(|| n_correct as f64 / valid as f64),
            mean_latency: summarize_latency(records).ok(),
            per_category,
        }
    }

    pub fn n_valid(&self) -> usize {
        self.n_total - self.n_errored
    }

    /// Percent with one decimal and the counts, e.g. `72.7 (32/44)`.
    pub fn accuracy_text(&self) -> String {
        format_accuracy(self.n_correct, self.n_valid())
    }
}

pub fn format_accuracy(correct: usize, valid: usize) -> String {
    if valid == 0 {
        return format!("n/a ({correct}/{valid})");
    }
    format!("{:.1} ({correct}/{valid})", 100.0 * correct as f64 / valid as f64)
}

/// Mean latency in seconds over the records that did not error.
pub fn summarize_latency(records: &[EvalRecord]) -> Result<f64, EvalError> {
    let valid: Vec<f64> = records
        .iter()
        .filter(|r| r.outcome != RecordOutcome::Errored)
        .map(|r| r.latency)
        .collect();
    if valid.is_empty() {
        return Err(EvalError::NoValidRecords);
    }
    Ok(valid.iter().sum::<f64>() / valid.len() as f64)
}

pub fn format_latency(seconds: f64) -> String {
    format!("{seconds:.2}")
}

/// Everything that determines a run's outputs. Written to `config.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub dataset: PathBuf,
    /// `modelnet10`, `modelnet40`, or a comma list; defaults to the
    /// categories found in the dataset.
    pub categories: Option<String>,
    pub style: Style,
    pub views: usize,
    pub n: usize,
    pub seed: u64,
    pub points: usize,
    pub depth: DepthParams,
    pub render: RenderParams,
    pub gateway: GatewayConfig,
    pub keep_images: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::new(),
            categories: None,
            style: Style::RiGray,
            views: 3,
            n: 50,
            seed: 0,
            points: DEFAULT_POINTS,
            depth: DepthParams::default(),
            render: RenderParams::default(),
            gateway: GatewayConfig::default(),
            keep_images: true,
        }
    }
}

/// What `config.json` holds: the configuration plus the derived values a
/// reader would otherwise have to recompute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub config: EvalConfig,
    pub backend: String,
    pub cameras: Vec<ViewCamera<f64>>,
    pub sampler: String,
    pub prompt: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub style: Style,
    pub view_count: usize,
    pub backend: String,
    pub accuracy_text: String,
    pub summary: EvalSummary,
}

#[derive(Clone, Debug)]
pub struct EvalRun {
    pub records: Vec<EvalRecord>,
    pub summary: RunSummary,
    pub out_dir: PathBuf,
}

pub const CONFIG_FILE: &str = "config.json";
pub const RECORDS_FILE: &str = "records.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TRANSCRIPT_FILE: &str = "transcript.jsonl";
pub const IMAGES_DIR: &str = "images";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Reads a records file. A torn final line (from an interrupted write) is
/// dropped; malformed lines elsewhere are errors.
pub fn read_records(path: &Path) -> Result<Vec<EvalRecord>, EvalError> {
    let file = File::open(path).map_err(io_err(path))?;
    let lines: Vec<String> = BufReader::new(file)
        .lines()
        .collect::<Result<_, _>>()
        .map_err(io_err(path))?;
    let mut out = Vec::new();
    let last = lines.len().saturating_sub(1);
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => out.push(r),
            Err(_) if i == last => log::warn!("{}: dropping torn final line", path.display()),
            Err(e) => return Err(EvalError::Io(format!("{}:{}: {e}", path.display(), i + 1))),
        }
    }
    Ok(out)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), EvalError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| EvalError::Io(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

fn category_set(cfg: &EvalConfig, manifest: &Manifest) -> Result<CategorySet, EvalError> {
    let cats = match &cfg.categories {
        Some(spec) => CategorySet::from_spec(spec),
        None => CategorySet::new(manifest.categories()),
    }
    .map_err(|e| EvalError::Config(e.to_string()))?;
    if let Some(missing) = manifest.categories().into_iter().find(|c| !cats.contains(c)) {
        return Err(EvalError::Config(format!(
            "dataset category {missing:?} is not among the prompt options"
        )));
    }
    Ok(cats)
}

/// Scans the dataset, reusing a cached index in `out_dir` when present.
pub fn load_or_scan_manifest(dataset: &Path, out_dir: &Path) -> Result<Manifest, EvalError> {
    let cached = out_dir.join(MANIFEST_FILE);
    if cached.is_file() {
        let m = Manifest::load(&cached)?;
        if m.root == dataset {
            return Ok(m);
        }
    }
    let m = manifest::scan_dataset(dataset)?;
    if let Some(preset) = manifest::DatasetPreset::infer(&m) {
        for w in manifest::validate_counts(&m, preset) {
            log::warn!("{w}");
        }
    }
    m.save(&cached)?;
    Ok(m)
}

struct SampleContext<'a> {
    cfg: &'a EvalConfig,
    cams: &'a [ViewCamera<f64>],
    prompt: &'a str,
    categories: &'a CategorySet,
    gateway: &'a Gateway,
    image_dir: Option<&'a Path>,
}

fn run_sample(ctx: &SampleContext<'_>, manifest: &Manifest, entry: &ManifestEntry) -> EvalRecord {
    let cfg = ctx.cfg;
    let errored = |e: String| EvalRecord::errored(&entry.id, &entry.category, cfg.style, cfg.views, e);
    let images = (|| -> Result<Vec<NamedPng>, EvalError> {
        let pc = load_cloud(
            &manifest.absolute_path(entry),
            cfg.points,
            sample_seed(cfg.seed, &entry.id),
        )?;
        let views = render_views(&pc, ctx.cams, cfg.style, &cfg.depth, &cfg.render)?;
        request_images(&entry.id, cfg.style, views)
    })();
    let images = match images {
        Ok(i) => i,
        Err(e) => return errored(e.to_string()),
    };
    if let Some(dir) = ctx.image_dir {
        for img in &images {
            let path = dir.join(&img.file_name);
            if let Err(e) = fs::write(&path, &img.bytes) {
                return errored(format!("{}: {e}", path.display()));
            }
        }
    }
    let bytes: Vec<Vec<u8>> = images.into_iter().map(|i| i.bytes).collect();
    let meta = RequestMeta {
        sample_id: Some(&entry.id),
        label_hint: Some(&entry.category),
    };
    match ctx.gateway.classify(&bytes, ctx.prompt, meta) {
        Ok(resp) => match resp.outcome {
            Outcome::Answered(text) => {
                let parsed = parse_choice(&text, ctx.categories);
                let mut r =
                    EvalRecord::answered(&entry.id, &entry.category, cfg.style, cfg.views, parsed, resp.latency);
                r.retries = resp.retries;
                r.response = Some(text);
                r
            }
            Outcome::ServiceError(detail) => {
                let mut r = errored(detail);
                r.latency = resp.latency;
                r.retries = resp.retries;
                r
            }
        },
        Err(e) => errored(e.to_string()),
    }
}

/// Runs one configuration into `out_dir`. Records are appended as samples
/// finish; rerunning into the same directory skips samples already recorded.
pub fn run_eval(cfg: &EvalConfig, backend: Arc<dyn VlmBackend>, out_dir: &Path) -> Result<EvalRun, EvalError> {
    let cams = view_set(cfg.views)?;
    cfg.depth.validate()?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let manifest = load_or_scan_manifest(&cfg.dataset, out_dir)?;
    let categories = category_set(cfg, &manifest)?;
    let prompt = build_prompt(&PromptSpec::for_kind(cfg.style.kind(), categories.clone()));

    let meta = RunMetadata {
        config: cfg.clone(),
        backend: backend.identity(),
        cameras: cams.clone(),
        sampler: crate::mesh::SAMPLER_RNG.into(),
        prompt: prompt.clone(),
    };
    let config_path = out_dir.join(CONFIG_FILE);
    if config_path.is_file() {
        let text = fs::read_to_string(&config_path).map_err(io_err(&config_path))?;
        let previous: RunMetadata =
            serde_json::from_str(&text).map_err(|e| EvalError::Io(format!("{}: {e}", config_path.display())))?;
        if previous != meta {
            return Err(EvalError::ConfigMismatch(out_dir.to_path_buf()));
        }
    } else {
        write_json(&config_path, &meta)?;
    }

    let subset = sample_subset(&manifest, cfg.n, cfg.seed)?;
    let records_path = out_dir.join(RECORDS_FILE);
    let mut records = if records_path.is_file() {
        read_records(&records_path)?
    } else {
        Vec::new()
    };
    let wanted: HashSet<&str> = subset.iter().map(|e| e.id.as_str()).collect();
    records.retain(|r| wanted.contains(r.sample_id.as_str()));
    // rewrite so a torn tail does not linger before new appends
    {
        let mut f = File::create(&records_path).map_err(io_err(&records_path))?;
        for r in &records {
            writeln!(f, "{}", serde_json::to_string(r).unwrap()).map_err(io_err(&records_path))?;
        }
    }
    let done: HashSet<String> = records.iter().map(|r| r.sample_id.clone()).collect();
    let pending: Vec<&ManifestEntry> = subset.iter().filter(|e| !done.contains(&e.id)).collect();
    if !done.is_empty() {
        log::info!("resuming: {} recorded, {} to go", done.len(), pending.len());
    }

    let image_dir = out_dir.join(IMAGES_DIR);
    if cfg.keep_images {
        fs::create_dir_all(&image_dir).map_err(io_err(&image_dir))?;
    }
    let transcript_path = out_dir.join(TRANSCRIPT_FILE);
    let gateway =
        Gateway::new(backend.clone(), cfg.gateway.clone()).with_transcript(TranscriptWriter::append(&transcript_path)?);
    let ctx = SampleContext {
        cfg,
        cams: &cams,
        prompt: &prompt,
        categories: &categories,
        gateway: &gateway,
        image_dir: cfg.keep_images.then_some(image_dir.as_path()),
    };

    let mut sink = OpenOptions::new()
        .append(true)
        .open(&records_path)
        .map_err(io_err(&records_path))?;
    let batch = cfg.gateway.max_inflight.max(1);
    for chunk in pending.chunks(batch) {
        let results: Vec<EvalRecord> = std::thread::scope(|s| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|e| s.spawn(|| run_sample(&ctx, &manifest, e)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("sample worker panicked"))
                .collect()
        });
        for r in results {
            log::info!("{} -> {:?}", r.sample_id, r.outcome);
            writeln!(sink, "{}", serde_json::to_string(&r).unwrap()).map_err(io_err(&records_path))?;
            sink.flush().map_err(io_err(&records_path))?;
            records.push(r);
        }
    }

    // subset order regardless of which run produced each record
    let order: BTreeMap<&str, usize> = subset.iter().enumerate().map(|(i, e)| (e.id.as_str(), i)).collect();
    records.sort_by_key(|r| order[r.sample_id.as_str()]);

    let summary = EvalSummary::from_records(&records);
    let run_summary = RunSummary {
        seed: cfg.seed,
        style: cfg.style,
        view_count: cfg.views,
        backend: meta.backend,
        accuracy_text: summary.accuracy_text(),
        summary,
    };
    write_json(&out_dir.join(SUMMARY_FILE), &run_summary)?;
    Ok(EvalRun {
        records,
        summary: run_summary,
        out_dir: out_dir.to_path_buf(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(label: &str, outcome: RecordOutcome, latency: f64) -> EvalRecord {
        let predicted = match outcome {
            RecordOutcome::Correct => Some(label.to_owned()),
            RecordOutcome::Incorrect => Some("other".to_owned()),
            _ => None,
        };
        EvalRecord {
            sample_id: format!("{label}_{latency}"),
            true_label: label.into(),
            style: Style::RiGray,
            view_count: 3,
            predicted,
            outcome,
            latency,
            retries: 0,
            response: None,
            error: None,
        }
    }

    fn records(correct: usize, wrong: usize, errored: usize) -> Vec<EvalRecord> {
        let mut v = Vec::new();
        v.extend((0..correct).map(|_| rec("chair", RecordOutcome::Correct, 1.0)));
        v.extend((0..wrong).map(|_| rec("chair", RecordOutcome::Incorrect, 1.0)));
        v.extend((0..errored).map(|_| rec("chair", RecordOutcome::Errored, 1.0)));
        v
    }

    #[test]
    fn table_cells() {
        assert_eq!(
            EvalSummary::from_records(&records(32, 12, 6)).accuracy_text(),
            "72.7 (32/44)"
        );
        assert_eq!(
            EvalSummary::from_records(&records(6, 39, 5)).accuracy_text(),
            "13.3 (6/45)"
        );
        assert_eq!(format_accuracy(29, 41), "70.7 (29/41)");
        assert_eq!(format_accuracy(24, 46), "52.2 (24/46)");
        assert_eq!(format_accuracy(28, 46), "60.9 (28/46)");
    }

    #[test]
    fn errored_records_leave_accuracy_alone() {
        let mut v = records(3, 1, 0);
        let before = EvalSummary::from_records(&v).accuracy;
        v.push(rec("chair", RecordOutcome::Errored, 9.0));
        assert_eq!(EvalSummary::from_records(&v).accuracy, before);
        v.push(rec("chair", RecordOutcome::Unparseable, 1.0));
        assert!(EvalSummary::from_records(&v).accuracy < before);
    }

    #[test]
    fn latency_mean() {
        let v: Vec<EvalRecord> = [4.0, 5.0, 6.0, 5.0, 5.1]
            .iter()
            .map(|&l| rec("desk", RecordOutcome::Correct, l))
            .collect();
        assert_eq!(format_latency(summarize_latency(&v).unwrap()), "5.02");
        assert_eq!(
            summarize_latency(&[rec("desk", RecordOutcome::Incorrect, 0.167)]).unwrap(),
            0.167
        );
        assert!(matches!(
            summarize_latency(&records(0, 0, 2)),
            Err(EvalError::NoValidRecords)
        ));
    }

    #[test]
    fn answered_outcomes() {
        let r = EvalRecord::answered("a", "sofa", Style::DmDense, 1, ParsedChoice::Label("sofa".into()), 1.0);
        assert_eq!(r.outcome, RecordOutcome::Correct);
        let r = EvalRecord::answered("a", "sofa", Style::DmDense, 1, ParsedChoice::Unparseable, 1.0);
        assert_eq!((r.outcome, r.predicted), (RecordOutcome::Unparseable, None));
    }

    #[test]
    fn seeds_differ_per_sample() {
        assert_ne!(sample_seed(0, "chair_0001"), sample_seed(0, "chair_0002"));
        assert_eq!(sample_seed(7, "x"), sample_seed(7, "x"));
    }
}
