use std::fmt;

use serde::{Deserialize, Serialize};

use super::GatewayError;

pub const MODELNET10: [&str; 10] = [
    "bathtub",
    "bed",
    "chair",
    "desk",
    "dresser",
    "monitor",
    "night_stand",
    "sofa",
    "table",
    "toilet",
];

pub const MODELNET40: [&str; 40] = [
    "airplane",
    "bathtub",
    "bed",
    "bench",
    "bookshelf",
    "bottle",
    "bowl",
    "car",
    "chair",
    "cone",
    "cup",
    "curtain",
    "desk",
    "door",
    "dresser",
    "flower_pot",
    "glass_box",
    "guitar",
    "keyboard",
    "lamp",
    "laptop",
    "mantel",
    "monitor",
    "night_stand",
    "person",
    "piano",
    "plant",
    "radio",
    "range_hood",
    "sink",
    "sofa",
    "stairs",
    "stool",
    "table",
    "tent",
    "toilet",
    "tv_stand",
    "vase",
    "wardrobe",
    "xbox",
];

/// Ordered, distinct, lowercase category labels (C ≥ 2).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct CategorySet {
    names: Vec<String>,
}

impl CategorySet {
    pub fn new<S: AsRef<str>>(names: impl IntoIterator<Item = S>) -> Result<Self, GatewayError> {
        let names: Vec<String> = names.into_iter().map(|s| s.as_ref().trim().to_lowercase()).collect();
        if names.len() < 2 {
            return Err(GatewayError::InvalidCategories("need at least two categories".into()));
        }
        if let Some(empty) = names.iter().position(String::is_empty) {
            return Err(GatewayError::InvalidCategories(format!("category {empty} is empty")));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(GatewayError::InvalidCategories(format!("duplicate category {n:?}")));
            }
        }
        Ok(Self { names })
    }

    pub fn modelnet10() -> Self {
        Self::new(MODELNET10).expect("valid preset")
    }

    pub fn modelnet40() -> Self {
        Self::new(MODELNET40).expect("valid preset")
    }

    /// `modelnet10`, `modelnet40`, or a comma-separated list.
    pub fn from_spec(spec: &str) -> Result<Self, GatewayError> {
        match spec.trim().to_lowercase().as_str() {
            "modelnet10" => Ok(Self::modelnet10()),
            "modelnet40" => Ok(Self::modelnet40()),
            list => Self::new(list.split(',').filter(|s| !s.trim().is_empty())),
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.names.iter().any(|n| n == name)
    }
}

impl TryFrom<Vec<String>> for CategorySet {
    type Error = GatewayError;
    fn try_from(v: Vec<String>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<CategorySet> for Vec<String> {
    fn from(c: CategorySet) -> Self {
        c.names
    }
}

/// Human-readable form used in prompts: `night_stand` → `night stand`.
pub fn display_name(name: &str) -> String {
    name.replace('_', " ")
}

/// The three wordings for the kind of image being shown.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VisualizationKind {
    SparseDepth,
    DenseDepth,
    Rendered,
}

impl VisualizationKind {
    pub const ALL: [VisualizationKind; 3] = [Self::SparseDepth, Self::DenseDepth, Self::Rendered];

    pub fn phrase(self) -> &'static str {
        match self {
            Self::SparseDepth => "sparse depth map projected by point cloud",
            Self::DenseDepth => "dense depth map projected by point cloud",
            Self::Rendered => "point cloud visualization",
        }
    }

    pub fn from_phrase(phrase: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.phrase() == phrase)
    }
}

impl fmt::Display for VisualizationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.phrase())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptSpec {
    vis_type_phrase: String,
    categories: CategorySet,
}

impl PromptSpec {
    pub fn new(vis_type_phrase: &str, categories: CategorySet) -> Result<Self, GatewayError> {
        if VisualizationKind::from_phrase(vis_type_phrase).is_none() {
            return Err(GatewayError::InvalidPhrase(vis_type_phrase.to_owned()));
        }
        Ok(Self {
            vis_type_phrase: vis_type_phrase.to_owned(),
            categories,
        })
    }

    pub fn for_kind(kind: VisualizationKind, categories: CategorySet) -> Self {
        Self {
            vis_type_phrase: kind.phrase().to_owned(),
            categories,
        }
    }

    pub fn categories(&self) -> &CategorySet {
        &self.categories
    }
}

/// Fills the fixed question template. The double space after the first
/// question mark is part of the template.
pub fn build_prompt(spec: &PromptSpec) -> String {
    let list = spec
        .categories
        .names()
        .iter()
        .map(|n| display_name(n))
        .collect::<Vec<_>>()
        .join(", ");
    format!(
        "I will show you {} from three-view (front/side/top) of an object, can you help me recognize the category?  I will provide you {} options: {}. choose one. Focus on the shape and distinctive features. Please evaluate each possible class respectively.",
        spec.vis_type_phrase,
        spec.categories.len(),
        list
    )
}
