//! Dataset manifests: `path,label_name` CSV files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IngestError;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    /// Class names; the index in this list is the class index.
    pub label_names: Vec<String>,
    /// Capture path (as written in the manifest) to class index.
    pub entries: Vec<(String, usize)>,
}

#[derive(Deserialize)]
struct Row {
    path: String,
    label_name: String,
}

impl Manifest {
    pub fn read(path: impl AsRef<Path>) -> Result<Self, IngestError> {
        let path = path.as_ref();
        if !path.is_file() {
            return Err(IngestError::ManifestNotFound(path.display().to_string()));
        }
        let text = fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Label names are assigned indices in order of first appearance.
    pub fn parse(text: &str) -> Result<Self, IngestError> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| IngestError::Manifest(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["path", "label_name"] {
            return Err(IngestError::Manifest(format!("expected header `path,label_name`, got {headers:?}")));
        }
        let mut m = Manifest::default();
        for row in reader.deserialize::<Row>() {
            let row = row.map_err(|e| IngestError::Manifest(e.to_string()))?;
            let idx = match m.label_names.iter().position(|n| *n == row.label_name) {
                Some(i) => i,
                None => {
                    m.label_names.push(row.label_name);
                    m.label_names.len() - 1
                }
            };
            m.entries.push((row.path, idx));
        }
        Ok(m)
    }

    /// Class of a capture, matching the manifest path against the path
    /// relative to `root`, the path as given, or the bare file name.
    pub fn label_for(&self, file: &Path, root: &Path) -> Option<usize> {
        let rel = file.strip_prefix(root).unwrap_or(file);
        let name = file.file_name().map(|n| n.to_string_lossy().into_owned());
        self.entries.iter().find_map(|(p, label)| {
            let p = Path::new(p);
            let hit = p == rel || p == file || name.as_deref().is_some_and(|n| p == Path::new(n));
            hit.then_some(*label)
        })
    }

    pub fn class_count(&self) -> usize {
        self.label_names.len()
    }

    /// `labels.json` content: label name to class index.
    pub fn labels_json(&self) -> String {
        let map: BTreeMap<&str, usize> =
            self.label_names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        serde_json::to_string_pretty(&map).expect("string map serialises")
    }
}
