//! Fold manifests.
//!
//! Plain text, one subject per line as `subject_id<TAB>class_label` (the
//! label may be omitted). Header comments:
//!
//! ```text
//! # fold: 3
//! # vocabulary: astrocytoma, ependymoma, hemangioblastoma, meningioma
//! sub-0001<TAB>astrocytoma
//! sub-0002<TAB>meningioma
//! ```
//!
//! Other `#` lines and blank lines are ignored.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub subject: String,
    pub class_label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FoldManifest {
    pub fold: Option<u8>,
    pub vocabulary: Option<Vec<String>>,
    pub subjects: Vec<ManifestEntry>,
}

impl FoldManifest {
    pub fn parse(text: &str) -> Result<Self> {
        let mut m = FoldManifest::default();
        let mut seen = HashSet::new();
        for (lineno, line) in text.lines().enumerate() {
            let lineno = lineno + 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                let Some((key, value)) = comment.split_once(':') else { continue };
                match key.trim() {
                    "fold" => {
                        let fold: u8 = value.trim().parse().map_err(|_| {
                            Error::Manifest(format!("line {lineno}: bad fold id {:?}", value.trim()))
                        })?;
                        if !(1..=5).contains(&fold) {
                            return Err(Error::Manifest(format!("line {lineno}: fold {fold} not in 1..=5")));
                        }
                        m.fold = Some(fold);
                    }
                    "vocabulary" => {
                        m.vocabulary = Some(
                            value.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
                        );
                    }
                    _ => {}
                }
                continue;
            }
            let mut parts = line.split('\t');
            let subject = parts.next().unwrap_or("").trim().to_string();
            let class_label = parts.next().map(|s| s.trim().to_string()).filter(|s| !s.is_empty());
            if subject.is_empty() || parts.next().is_some() {
                return Err(Error::Manifest(format!("line {lineno}: expected `subject<TAB>class`")));
            }
            if !seen.insert(subject.clone()) {
                return Err(Error::Manifest(format!("line {lineno}: duplicate subject {subject}")));
            }
            if let (Some(vocab), Some(label)) = (&m.vocabulary, &class_label) {
                if !vocab.contains(label) {
                    return Err(Error::Manifest(format!(
                        "line {lineno}: class {label:?} is not in the declared vocabulary"
                    )));
                }
            }
            m.subjects.push(ManifestEntry { subject, class_label });
        }
        Ok(m)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Subjects per class label; unlabeled subjects are not counted.
    pub fn counts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for label in self.subjects.iter().filter_map(|e| e.class_label.as_ref()) {
            *out.entry(label.clone()).or_insert(0) += 1;
        }
        out
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.subjects.iter().map(|e| e.subject.as_str())
    }
}
