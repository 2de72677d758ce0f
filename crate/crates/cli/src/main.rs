mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use pointsight::eval::manifest::{scan_dataset, validate_counts, DatasetPreset};
use pointsight::eval::{
    format_latency, grid_file_name, load_cloud, render_views, request_images, run_eval, sample_seed, view_set,
    EvalConfig, EvalError, NamedPng, RecordOutcome, Style, MANIFEST_FILE,
};
use pointsight::imagebuf::encode_png;
use pointsight::mesh::DEFAULT_POINTS;
use pointsight::raster::{compose_grid, default_columns};
use pointsight::vlm::{
    build_prompt, parse_choice, read_transcript, CategorySet, Gateway, GatewayError, LiveBackend, LiveConfig,
    OracleMock, Outcome, ParsedChoice, PromptSpec, RequestMeta, ScriptedMock, TranscriptWriter, VlmBackend,
};

use config::FileConfig;

#[derive(Parser, Debug)]
#[command(
    name = "pointsight",
    version,
    about = "Zero-shot point cloud classification through rendered views"
)]
struct Cli {
    /// JSON settings file (a previous run's config.json also works)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a shape file into view images
    Render(RenderArgs),
    /// Ask the model for the category of one shape or a set of images
    Classify(ClassifyArgs),
    /// Evaluate a sampled subset of a dataset
    Eval(EvalArgs),
    /// Index a dataset tree and check its split sizes
    Manifest(ManifestArgs),
}

#[derive(Args, Debug)]
struct VisualArgs {
    /// dm-sparse, dm-dense, ri-colored, or ri-gray
    #[arg(long)]
    style: Option<Style>,
    /// 1, 3, 6, or 10
    #[arg(long, value_parser = parse_views)]
    views: Option<usize>,
    /// Points sampled from mesh surfaces
    #[arg(long)]
    points: Option<usize>,
}

#[derive(Args, Debug)]
struct BackendArgs {
    /// oracle, scripted:<transcript.jsonl>, or live
    #[arg(long)]
    backend: Option<String>,
    /// Chat-completions endpoint for the live backend
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
}

#[derive(Args, Debug)]
struct RenderArgs {
    input: PathBuf,
    #[command(flatten)]
    visual: VisualArgs,
    /// Also write one composite of all views
    #[arg(long)]
    grid: bool,
}

#[derive(Args, Debug)]
struct ClassifyArgs {
    /// Shape file to render and classify
    #[arg(required_unless_present = "image", conflicts_with = "image")]
    input: Option<PathBuf>,
    /// Pre-rendered PNGs to send as they are (at most 4)
    #[arg(long, num_args = 1..)]
    image: Vec<PathBuf>,
    #[command(flatten)]
    visual: VisualArgs,
    #[command(flatten)]
    backend: BackendArgs,
    /// modelnet10, modelnet40, or a comma-separated list
    #[arg(long)]
    categories: Option<String>,
    /// True label, for the oracle backend; guessed from the file name otherwise
    #[arg(long)]
    label: Option<String>,
    /// Append every attempt to this transcript
    #[arg(long)]
    transcript: Option<PathBuf>,
    /// Print the full response text
    #[arg(long, short)]
    verbose: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[command(flatten)]
    visual: VisualArgs,
    #[command(flatten)]
    backend: BackendArgs,
    #[arg(long)]
    categories: Option<String>,
    /// Samples drawn from the test split
    #[arg(long)]
    n: Option<usize>,
    /// Do not keep the rendered images
    #[arg(long)]
    no_images: bool,
}

#[derive(Args, Debug)]
struct ManifestArgs {
    dataset: PathBuf,
    /// modelnet10 or modelnet40; inferred from the category count otherwise
    #[arg(long, value_parser = parse_preset)]
    preset: Option<DatasetPreset>,
}

fn parse_views(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if pointsight::eval::VIEW_COUNTS.contains(&n) => Ok(n),
        _ => Err(format!("{s:?} is not one of 1, 3, 6, 10")),
    }
}

fn parse_preset(s: &str) -> Result<DatasetPreset, String> {
    match s.to_lowercase().as_str() {
        "modelnet10" => Ok(DatasetPreset::ModelNet10),
        "modelnet40" => Ok(DatasetPreset::ModelNet40),
        _ => Err(format!("unknown preset {s:?} (expected modelnet10 or modelnet40)")),
    }
}

/// Failures mapped to process exit codes.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
    Service(String),
    Unparseable,
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Runtime(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Service(_) => 3,
            Failure::Unparseable => 4,
        }
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<GatewayError> for Failure {
    fn from(e: GatewayError) -> Self {
        match e {
            GatewayError::TooManyImages(_) | GatewayError::NoImages => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Runtime(e.to_string())
}

struct Settings {
    file: FileConfig,
    seed: u64,
    out: Option<PathBuf>,
}

impl Settings {
    fn style(&self, v: &VisualArgs) -> Style {
        v.style.or(self.file.style).unwrap_or(Style::RiGray)
    }

    fn views(&self, v: &VisualArgs) -> Result<usize, Failure> {
        let n = v.views.or(self.file.views).unwrap_or(3);
        parse_views(&n.to_string()).map_err(Failure::Usage)
    }

    fn points(&self, v: &VisualArgs) -> usize {
        v.points.or(self.file.points).unwrap_or(DEFAULT_POINTS)
    }

    fn live(&self, b: &BackendArgs) -> LiveConfig {
        let mut live = self.file.live.clone();
        live.endpoint = b.endpoint.clone().or(live.endpoint);
        live.model = b.model.clone().or(live.model);
        live.with_env()
    }

    fn backend(&self, b: &BackendArgs) -> Result<Arc<dyn VlmBackend>, Failure> {
        let spec = b
            .backend
            .clone()
            .or_else(|| self.file.backend.clone())
            .unwrap_or_else(|| "live".into());
        make_backend(&spec, self.live(b))
    }
}

fn make_backend(spec: &str, live: LiveConfig) -> Result<Arc<dyn VlmBackend>, Failure> {
    if spec == "oracle" {
        return Ok(Arc::new(OracleMock::new()));
    }
    if spec == "live" {
        return Ok(Arc::new(LiveBackend::new(&live)?));
    }
    if let Some(path) = spec.strip_prefix("scripted:") {
        let records = read_transcript(Path::new(path))?;
        return Ok(Arc::new(ScriptedMock::new(path, records)));
    }
    Err(Failure::Usage(format!(
        "unknown backend {spec:?} (expected oracle, scripted:<file>, or live)"
    )))
}

fn write_pngs(dir: &Path, pngs: &[NamedPng]) -> Result<Vec<PathBuf>, Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
    pngs.iter()
        .map(|p| {
            let path = dir.join(&p.file_name);
            fs::write(&path, &p.bytes).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
            Ok(path)
        })
        .collect()
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "shape".into())
}

fn cmd_render(s: &Settings, a: &RenderArgs) -> Result<(), Failure> {
    let style = s.style(&a.visual);
    let cams = view_set(s.views(&a.visual)?)?;
    let id = stem(&a.input);
    let pc = load_cloud(&a.input, s.points(&a.visual), sample_seed(s.seed, &id))?;
    let views = render_views(
        &pc,
        &cams,
        style,
        &s.file.depth.clone().unwrap_or_default(),
        &s.file.render.clone().unwrap_or_default(),
    )?;
    let pngs = if a.grid {
        let tiles: Vec<_> = views.into_iter().map(|(_, img)| img).collect();
        let grid = compose_grid(&tiles, default_columns(tiles.len())).map_err(runtime)?;
        vec![NamedPng {
            file_name: grid_file_name(&id, style, tiles.len()),
            bytes: encode_png(&grid).map_err(runtime)?,
        }]
    } else {
        views
            .iter()
            .map(|(label, img)| {
                Ok(NamedPng {
                    file_name: pointsight::eval::view_file_name(&id, style, *label),
                    bytes: encode_png(img).map_err(runtime)?,
                })
            })
            .collect::<Result<_, Failure>>()?
    };
    let out = s.out.clone().unwrap_or_else(|| PathBuf::from("."));
    for p in write_pngs(&out, &pngs)? {
        println!("{}", p.display());
    }
    Ok(())
}

/// `chair_0001` → `chair`, when that is one of the categories.
fn guess_label(id: &str, cats: &CategorySet) -> Option<String> {
    let base = id.trim_end_matches(|c: char| c.is_ascii_digit()).trim_end_matches('_');
    let base = base.to_lowercase();
    cats.contains(&base).then_some(base)
}

fn cmd_classify(s: &Settings, a: &ClassifyArgs) -> Result<(), Failure> {
    let cats_spec = a
        .categories
        .clone()
        .or_else(|| s.file.categories.clone())
        .unwrap_or_else(|| "modelnet10".into());
    let cats = CategorySet::from_spec(&cats_spec).map_err(|e| Failure::Usage(e.to_string()))?;
    let style = s.style(&a.visual);
    let (id, images) = match &a.input {
        Some(input) => {
            let id = stem(input);
            let cams = view_set(s.views(&a.visual)?)?;
            let pc = load_cloud(input, s.points(&a.visual), sample_seed(s.seed, &id))?;
            let views = render_views(
                &pc,
                &cams,
                style,
                &s.file.depth.clone().unwrap_or_default(),
                &s.file.render.clone().unwrap_or_default(),
            )?;
            let pngs = request_images(&id, style, views)?;
            if let Some(out) = &s.out {
                write_pngs(out, &pngs)?;
            }
            (id, pngs.into_iter().map(|p| p.bytes).collect::<Vec<_>>())
        }
        None => {
            let bytes = a
                .image
                .iter()
                .map(|p| fs::read(p).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display()))))
                .collect::<Result<Vec<_>, _>>()?;
            (stem(&a.image[0]), bytes)
        }
    };
    let label = match &a.label {
        Some(l) => Some(l.to_lowercase()),
        None => guess_label(&id, &cats),
    };
    let prompt = build_prompt(&PromptSpec::for_kind(style.kind(), cats.clone()));
    let backend = s.backend(&a.backend)?;
    let mut gateway = Gateway::new(backend, s.file.gateway.clone().unwrap_or_default());
    if let Some(t) = &a.transcript {
        gateway = gateway.with_transcript(TranscriptWriter::append(t)?);
    }
    let meta = RequestMeta {
        sample_id: Some(&id),
        label_hint: label.as_deref(),
    };
    let resp = gateway.classify(&images, &prompt, meta)?;
    match resp.outcome {
        Outcome::Answered(text) => {
            let parsed = parse_choice(&text, &cats);
            match &parsed {
                ParsedChoice::Label(l) => println!("{l}"),
                ParsedChoice::Unparseable => println!("unparseable"),
            }
            if a.verbose {
                println!("response: {text}");
            }
            println!("latency: {} s", format_latency(resp.latency));
            match parsed {
                ParsedChoice::Label(_) => Ok(()),
                ParsedChoice::Unparseable => Err(Failure::Unparseable),
            }
        }
        Outcome::ServiceError(detail) => Err(Failure::Service(format!(
            "service error after {} retries: {detail}",
            resp.retries
        ))),
    }
}

fn eval_config(s: &Settings, a: &EvalArgs) -> Result<EvalConfig, Failure> {
    let f = &s.file;
    let d = EvalConfig::default();
    let dataset = a
        .dataset
        .clone()
        .or_else(|| f.dataset.clone())
        .ok_or_else(|| Failure::Usage("eval needs --dataset".into()))?;
    Ok(EvalConfig {
        dataset,
        categories: a.categories.clone().or_else(|| f.categories.clone()),
        style: s.style(&a.visual),
        views: s.views(&a.visual)?,
        n: a.n.or(f.n).unwrap_or(d.n),
        seed: s.seed,
        points: s.points(&a.visual),
        depth: f.depth.clone().unwrap_or(d.depth),
        render: f.render.clone().unwrap_or(d.render),
        gateway: f.gateway.clone().unwrap_or_default(),
        keep_images: if a.no_images {
            false
        } else {
            f.keep_images.unwrap_or(d.keep_images)
        },
    })
}

fn cmd_eval(s: &Settings, a: &EvalArgs) -> Result<(), Failure> {
    let cfg = eval_config(s, a)?;
    let backend = s.backend(&a.backend)?;
    let out = s.out.clone().unwrap_or_else(|| {
        PathBuf::from("runs").join(format!("{}_v{}_n{}_s{}", cfg.style, cfg.views, cfg.n, cfg.seed))
    });
    let run = run_eval(&cfg, backend, &out)?;
    let sm = &run.summary;
    let sum = &sm.summary;
    println!("style         {}", sm.style);
    println!("views         {}", sm.view_count);
    println!("backend       {}", sm.backend);
    println!("samples       {}", sum.n_total);
    println!("errored       {}", sum.n_errored);
    println!("unparseable   {}", sum.n_unparseable);
    println!("accuracy      {}", sm.accuracy_text);
    match sum.mean_latency {
        Some(l) => println!("mean latency  {} s", format_latency(l)),
        None => println!("mean latency  n/a"),
    }
    println!();
    println!("{:<14} {:>7} {:>7} {:>7}", "category", "total", "errored", "correct");
    for (cat, c) in &sum.per_category {
        println!("{cat:<14} {:>7} {:>7} {:>7}", c.total, c.errored, c.correct);
    }
    let errored = run
        .records
        .iter()
        .filter(|r| r.outcome == RecordOutcome::Errored)
        .count();
    if errored > 0 {
        eprintln!(
            "{errored} samples errored; see {}",
            run.out_dir.join("records.jsonl").display()
        );
    }
    println!();
    println!("results in {}", run.out_dir.display());
    Ok(())
}

fn cmd_manifest(s: &Settings, a: &ManifestArgs) -> Result<(), Failure> {
    let m = scan_dataset(&a.dataset)?;
    println!("{:<14} {:>7} {:>7}", "category", "train", "test");
    for (cat, c) in m.counts() {
        println!("{cat:<14} {:>7} {:>7}", c.train, c.test);
    }
    let t = m.totals();
    println!("{:<14} {:>7} {:>7}", "total", t.train, t.test);
    match a.preset.or_else(|| DatasetPreset::infer(&m)) {
        Some(preset) => {
            let warnings = validate_counts(&m, preset);
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            if warnings.is_empty() {
                println!("split sizes match {preset}");
            }
        }
        None => eprintln!("warning: {} categories match no known preset", m.counts().len()),
    }
    if let Some(out) = &s.out {
        fs::create_dir_all(out).map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))?;
        let path = out.join(MANIFEST_FILE);
        m.save(&path)?;
        println!("index written to {}", path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p).map_err(Failure::Runtime)?,
        None => FileConfig::default(),
    };
    let settings = Settings {
        seed: cli.seed.or(file.seed).unwrap_or(0),
        out: cli.out.clone().or_else(|| file.out.clone()),
        file,
    };
    match &cli.command {
        Command::Render(a) => cmd_render(&settings, a),
        Command::Classify(a) => cmd_classify(&settings, a),
        Command::Eval(a) => cmd_eval(&settings, a),
        Command::Manifest(a) => cmd_manifest(&settings, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(m) => eprintln!("error: {m}\n\nFor more information, try '--help'."),
                Failure::Runtime(m) | Failure::Service(m) => eprintln!("error: {m}"),
                Failure::Unparseable => eprintln!("error: no single category could be read from the response"),
            }
            ExitCode::from(f.code())
        }
    }
}
