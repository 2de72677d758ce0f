//! Dataset index for `<root>/<category>/<split>/<name>.off` trees.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub category: String,
    pub split: Split,
    /// Relative to the manifest root.
    pub path: PathBuf,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub test: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

const SHAPE_EXTENSIONS: [&str; 3] = ["off", "xyz", "txt"];

fn sorted_dir(path: &Path) -> Result<Vec<PathBuf>, EvalError> {
    let mut out: Vec<PathBuf> = fs::read_dir(path)
        .map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    out.sort();
    Ok(out)
}

/// Scans the category/split tree. Unknown split directories and files with
/// other extensions are ignored.
pub fn scan_dataset(root: &Path) -> Result<Manifest, EvalError> {
    let mut entries = Vec::new();
    for cat_dir in sorted_dir(root)?.into_iter().filter(|p| p.is_dir()) {
        let category = cat_dir.file_name().unwrap().to_string_lossy().to_lowercase();
        for split_dir in sorted_dir(&cat_dir)?.into_iter().filter(|p| p.is_dir()) {
            let split = match split_dir.file_name().unwrap().to_string_lossy().as_ref() {
                "train" => Split::Train,
                "test" => Split::Test,
                _ => continue,
            };
            for file in sorted_dir(&split_dir)? {
                let ext_ok = file
                    .extension()
                    .map(|e| SHAPE_EXTENSIONS.contains(&e.to_string_lossy().to_lowercase().as_str()))
                    .unwrap_or(false);
                if !ext_ok || !file.is_file() {
                    continue;
                }
                let id = file.file_stem().unwrap().to_string_lossy().into_owned();
                entries.push(ManifestEntry {
                    id,
                    category: category.clone(),
                    split,
                    path: file.strip_prefix(root).unwrap_or(&file).to_path_buf(),
                });
            }
        }
    }
    if entries.is_empty() {
        return Err(EvalError::Dataset(format!(
            "no shapes found under {} (expected <category>/<train|test>/<name>.off)",
            root.display()
        )));
    }
    Ok(Manifest {
        root: root.to_path_buf(),
        entries,
    })
}

impl Manifest {
    pub fn counts(&self) -> BTreeMap<String, SplitCounts> {
        let mut out: BTreeMap<String, SplitCounts> = BTreeMap::new();
        for e in &self.entries {
            let c = out.entry(e.category.clone()).or_default();
            match e.split {
                Split::Train => c.train += 1,
                Split::Test => c.test += 1,
            }
        }
        out
    }

    pub fn totals(&self) -> SplitCounts {
        self.counts().values().fold(SplitCounts::default(), |a, c| SplitCounts {
            train: a.train + c.train,
            test: a.test + c.test,
        })
    }

    pub fn categories(&self) -> Vec<String> {
        self.counts().into_keys().collect()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn find(&self, split: Split, id: &str) -> Option<&ManifestEntry> {
        self.split(split).find(|e| e.id == id)
    }

    pub fn absolute_path(&self, e: &ManifestEntry) -> PathBuf {
        self.root.join(&e.path)
    }

    pub fn save(&self, path: &Path) -> Result<(), EvalError> {
        let json = serde_json::to_string_pretty(self).map_err(|e| EvalError::Io(e.to_string()))?;
        fs::write(path, json).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let text = fs::read_to_string(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))
    }
}

/// Published split sizes of the two benchmark variants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetPreset {
    ModelNet10,
    ModelNet40,
}

impl DatasetPreset {
    pub fn expected(self) -> SplitCounts {
        match self {
            DatasetPreset::ModelNet10 => SplitCounts { train: 3991, test: 908 },
            DatasetPreset::ModelNet40 => SplitCounts {
                train: 9840,
                test: 2468,
            },
        }
    }

    pub fn categories(self) -> usize {
        match self {
            DatasetPreset::ModelNet10 => 10,
            DatasetPreset::ModelNet40 => 40,
        }
    }

    pub fn infer(m: &Manifest) -> Option<Self> {
        match m.counts().len() {
            10 => Some(DatasetPreset::ModelNet10),
            40 => Some(DatasetPreset::ModelNet40),
            _ => None,
        }
    }
}

impl fmt::Display for DatasetPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetPreset::ModelNet10 => "ModelNet10",
            DatasetPreset::ModelNet40 => "ModelNet40",
        })
    }
}

/// Deviations from the published split sizes, as human-readable warnings.
pub fn validate_counts(m: &Manifest, preset: DatasetPreset) -> Vec<String> {
    let mut warnings = Vec::new();
    let (got, want) = (m.totals(), preset.expected());
    let n_cat = m.counts().len();
    if n_cat != preset.categories() {
        warnings.push(format!(
            "{preset}: found {n_cat} categories, expected {}",
            preset.categories()
        ));
    }
    if got.train != want.train {
        warnings.push(format!(
            "{preset}: found {} train shapes, expected {}",
            got.train, want.train
        ));
    }
    if got.test != want.test {
        warnings.push(format!(
            "{preset}: found {} test shapes, expected {}",
            got.test, want.test
        ));
    }
    warnings
}
