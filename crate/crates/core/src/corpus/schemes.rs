use std::collections::HashMap;
use std::sync::OnceLock;

use serde::Deserialize;

use super::Document;
use crate::error::{Error, Result};

/// Explicit "no type" label. Untyped mentions carry `entity_type == None`.
pub const NA: &str = "NA";

pub const COMMON_SCHEME: &str = "common";

const SCHEME_DATA: &str = include_str!("../../data/type_schemes.json");

#[derive(Deserialize)]
struct SchemeFile {
    version: u32,
    common: Vec<String>,
    schemes: Vec<SchemeEntry>,
}

#[derive(Deserialize)]
struct SchemeEntry {
    name: String,
    labels: Vec<LabelEntry>,
}

#[derive(Deserialize)]
struct LabelEntry {
    label: String,
    #[serde(default)]
    aliases: Vec<String>,
    common: String,
}

/// A named label inventory with its mapping onto the common types.
#[derive(Debug)]
pub struct TypeScheme {
    name: String,
    labels: Vec<String>,
    lookup: HashMap<String, usize>,
    common: Vec<String>,
}

struct Registry {
    version: u32,
    schemes: Vec<TypeScheme>,
}

fn registry() -> &'static Registry {
    static REGISTRY: OnceLock<Registry> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let file: SchemeFile =
            serde_json::from_str(SCHEME_DATA).expect("bundled type scheme table is valid JSON");
        let schemes = file
            .schemes
            .into_iter()
            .map(|entry| {
                let mut lookup = HashMap::new();
                let mut labels = Vec::new();
                let mut common = Vec::new();
                for (i, l) in entry.labels.into_iter().enumerate() {
                    assert!(file.common.contains(&l.common), "bad common label {}", l.common);
                    lookup.insert(l.label.clone(), i);
                    for alias in l.aliases {
                        lookup.insert(alias, i);
                    }
                    labels.push(l.label);
                    common.push(l.common);
                }
                TypeScheme {
                    name: entry.name,
                    labels,
                    lookup,
                    common,
                }
            })
            .collect();
        Registry {
            version: file.version,
            schemes,
        }
    })
}

impl TypeScheme {
    /// Version of the bundled mapping table.
    pub fn table_version() -> u32 {
        registry().version
    }

    pub fn all() -> &'static [TypeScheme] {
        &registry().schemes
    }

    pub fn by_name(name: &str) -> Result<&'static TypeScheme> {
        Self::all()
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::UnknownScheme(name.to_string()))
    }

    pub fn common() -> &'static TypeScheme {
        Self::by_name(COMMON_SCHEME).expect("common scheme is bundled")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Labels in table order, including `NA` where the corpus lists it.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn lists_na(&self) -> bool {
        self.labels.iter().any(|l| l == NA)
    }

    /// Labels a type classifier predicts over (NA excluded).
    pub fn class_labels(&self) -> Vec<&str> {
        self.labels
            .iter()
            .map(String::as_str)
            .filter(|l| *l != NA)
            .collect()
    }

    /// Canonical spelling of `label`, accepting aliases. `NA` is accepted by
    /// every scheme.
    pub fn canonical(&self, label: &str) -> Result<&str> {
        if label == NA {
            return Ok(NA);
        }
        self.lookup
            .get(label)
            .map(|&i| self.labels[i].as_str())
            .ok_or_else(|| Error::Scheme {
                label: label.to_string(),
                scheme: self.name.clone(),
            })
    }

    /// Number of rows a type embedding table needs: every label plus NA.
    pub fn embedding_rows(&self) -> usize {
        self.labels.len() + usize::from(!self.lists_na())
    }

    /// Embedding row of a (possibly absent) type.
    pub fn type_index(&self, label: Option<&str>) -> Result<usize> {
        let label = label.unwrap_or(NA);
        let canonical = self.canonical(label)?;
        Ok(self
            .labels
            .iter()
            .position(|l| l == canonical)
            .unwrap_or(self.labels.len()))
    }

    /// Index among `class_labels`, or `None` for NA.
    pub fn class_index(&self, label: Option<&str>) -> Result<Option<usize>> {
        match label {
            None => Ok(None),
            Some(l) => {
                let canonical = self.canonical(l)?;
                Ok(self.class_labels().iter().position(|c| *c == canonical))
            }
        }
    }
}

/// Maps a label of `source` onto one of PER, ORG, LOC, FAC, OTHER.
pub fn map_to_common(label: &str, source: &TypeScheme) -> Result<&'static str> {
    let canonical = source.canonical(label)?;
    if canonical == NA && !source.lists_na() {
        return Err(Error::Scheme {
            label: label.to_string(),
            scheme: source.name.clone(),
        });
    }
    let idx = source.lookup[canonical];
    let target = &source.common[idx];
    let common = TypeScheme::common();
    Ok(common
        .labels
        .iter()
        .find(|l| *l == target)
        .map(String::as_str)
        .expect("common target exists"))
}

/// Rewrites every mention type of `doc` into the common scheme. Untyped
/// mentions become OTHER when the source scheme lists NA, else stay untyped.
pub fn map_doc_to_common(doc: &Document, source: &TypeScheme) -> Result<Document> {
    let mut out = doc.clone();
    for m in &mut out.mentions {
        m.entity_type = match m.entity_type.as_deref() {
            Some(l) if l != NA => Some(map_to_common(l, source)?.to_string()),
            _ if source.lists_na() => Some(map_to_common(NA, source)?.to_string()),
            _ => None,
        };
    }
    Ok(out)
}
