//! Settings file handling. Flags override the file, the file overrides the
//! `VLM_*` environment, and the environment overrides built-in defaults.

use std::path::{Path, PathBuf};

use pointsight::depth::DepthParams;
use pointsight::eval::{RunMetadata, Style};
use pointsight::raster::RenderParams;
use pointsight::vlm::{GatewayConfig, LiveConfig};
use serde::Deserialize;

/// Every field is optional; unset fields fall through to the next source.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub dataset: Option<PathBuf>,
    pub categories: Option<String>,
    pub style: Option<Style>,
    pub views: Option<usize>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub points: Option<usize>,
    pub depth: Option<DepthParams>,
    pub render: Option<RenderParams>,
    pub gateway: Option<GatewayConfig>,
    pub keep_images: Option<bool>,
    pub backend: Option<String>,
    pub out: Option<PathBuf>,
    pub live: LiveConfig,
}

impl FileConfig {
    /// Reads a settings file, or the `config.json` left behind by an earlier
    /// `eval` run, which replays that run.
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        if value.get("config").is_some_and(|c| c.is_object()) {
            let run: RunMetadata = serde_json::from_value(value).map_err(|e| format!("{}: {e}", path.display()))?;
            let c = run.config;
            let backend = if run.backend.starts_with("live:") {
                "live".to_owned()
            } else {
                run.backend
            };
            return Ok(Self {
                dataset: Some(c.dataset),
                categories: c.categories,
                style: Some(c.style),
                views: Some(c.views),
                n: Some(c.n),
                seed: Some(c.seed),
                points: Some(c.points),
                depth: Some(c.depth),
                render: Some(c.render),
                gateway: Some(c.gateway),
                keep_images: Some(c.keep_images),
                backend: Some(backend),
                out: None,
                live: LiveConfig::default(),
            });
        }
        serde_json::from_value(value).map_err(|e| format!("{}: {e}", path.display()))
    }
}
