//! Dataset manifests, label taxonomies, splits and edit metadata.
//!
//! A manifest is a JSON Lines file with one [`SampleRecord`] per line.
//! Relative image paths are resolved against the directory holding the
//! manifest.

mod edit;
mod synth;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pixelops::Image;

pub use edit::{composite, edit_bin, edit_ratio, freeform_mask, load_mask, synth_edited_corpus, EditBin};
pub use synth::{
    base_field, default_generators, identity_grade, render_sample, synth_corpus, texture_only_generators,
    NoiseKind, NoiseSpec, SplitCounts, SynthGeneratorSpec, Texture,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Taxonomy {
    #[default]
    Generator,
    Checkpoint,
    Scheduler,
    Steps,
    Seed,
}

impl fmt::Display for Taxonomy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Taxonomy::Generator => "generator",
            Taxonomy::Checkpoint => "checkpoint",
            Taxonomy::Scheduler => "scheduler",
            Taxonomy::Steps => "steps",
            Taxonomy::Seed => "seed",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptDomain {
    Natural,
    Creative,
    #[default]
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::validation(format!("unknown split '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EditInfo {
    pub editor: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edit_ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub image_path: String,
    pub class_label: String,
    #[serde(default)]
    pub taxonomy: Taxonomy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    #[serde(default)]
    pub prompt_domain: PromptDomain,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edit: Option<EditInfo>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub aux_maps: BTreeMap<String, String>,
}

impl SampleRecord {
    pub fn new(image_path: impl Into<String>, class_label: impl Into<String>, split: Split) -> Self {
        Self {
            image_path: image_path.into(),
            class_label: class_label.into(),
            taxonomy: Taxonomy::Generator,
            prompt: None,
            prompt_domain: PromptDomain::None,
            split,
            edit: None,
            aux_maps: BTreeMap::new(),
        }
    }

    fn check(&self) -> Result<()> {
        if self.image_path.is_empty() {
            return Err(Error::validation("image_path is empty"));
        }
        if let Some(r) = self.edit.as_ref().and_then(|e| e.edit_ratio) {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::validation(format!("edit_ratio {r} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Ordered records plus the sorted set of their class labels.
#[derive(Clone, Debug)]
pub struct Manifest {
    records: Vec<SampleRecord>,
    classes: Vec<String>,
    taxonomy: Taxonomy,
    root: Option<PathBuf>,
}

impl PartialEq for Manifest {
    fn eq(&self, other: &Self) -> bool {
        self.records == other.records && self.classes == other.classes && self.taxonomy == other.taxonomy
    }
}

impl Manifest {
    pub fn empty(taxonomy: Taxonomy) -> Self {
        Self {
            records: Vec::new(),
            classes: Vec::new(),
            taxonomy,
            root: None,
        }
    }

    /// Builds a manifest, rejecting duplicates and mixed taxonomies.
    pub fn from_records(records: Vec<SampleRecord>) -> Result<Self> {
        let taxonomy = records.first().map(|r| r.taxonomy).unwrap_or_default();
        let mut seen = HashSet::new();
        for (i, r) in records.iter().enumerate() {
            r.check().map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            if r.taxonomy != taxonomy {
                return Err(Error::TaxonomyConflict {
                    line: i + 1,
                    expected: taxonomy.to_string(),
                    found: r.taxonomy.to_string(),
                });
            }
            if !seen.insert((r.image_path.as_str(), r.taxonomy)) {
                return Err(Error::Duplicate {
                    path: r.image_path.clone(),
                    taxonomy: r.taxonomy.to_string(),
                });
            }
        }
        Ok(Self::from_records_unchecked(records, taxonomy, None))
    }

    fn from_records_unchecked(records: Vec<SampleRecord>, taxonomy: Taxonomy, root: Option<PathBuf>) -> Self {
        let classes: BTreeSet<&str> = records.iter().map(|r| r.class_label.as_str()).collect();
        let classes = classes.into_iter().map(str::to_owned).collect();
        Self {
            records,
            classes,
            taxonomy,
            root,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut records = Vec::new();
        let mut taxonomy = None;
        let mut seen = HashSet::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let record: SampleRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            record.check().map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            let expected = *taxonomy.get_or_insert(record.taxonomy);
            if record.taxonomy != expected {
                return Err(Error::TaxonomyConflict {
                    line: line_no,
                    expected: expected.to_string(),
                    found: record.taxonomy.to_string(),
                });
            }
            if !seen.insert((record.image_path.clone(), record.taxonomy)) {
                return Err(Error::Duplicate {
                    path: record.image_path,
                    taxonomy: record.taxonomy.to_string(),
                });
            }
            records.push(record);
        }
        Ok(Self::from_records_unchecked(records, taxonomy.unwrap_or_default(), None))
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn records(&self) -> &[SampleRecord] {
        &self.records
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn taxonomy(&self) -> Taxonomy {
        self.taxonomy
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    pub fn with_root(mut self, root: impl Into<PathBuf>) -> Self {
        self.root = Some(root.into());
        self
    }

    /// Resolves a manifest-relative path.
    pub fn resolve(&self, rel: &str) -> PathBuf {
        let p = Path::new(rel);
        match &self.root {
            Some(root) if p.is_relative() => root.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.binary_search_by(|c| c.as_str().cmp(label)).ok()
    }

    /// Keeps records matching `keep`; classes are recomputed.
    pub fn filter(&self, mut keep: impl FnMut(&SampleRecord) -> bool) -> Manifest {
        let records = self.records.iter().filter(|r| keep(r)).cloned().collect();
        Self::from_records_unchecked(records, self.taxonomy, self.root.clone())
    }

    /// Keeps the first `n` records of every class, in manifest order.
    pub fn limit_per_class(&self, n: usize) -> Manifest {
        let mut taken: BTreeMap<String, usize> = BTreeMap::new();
        self.filter(|r| {
            let c = taken.entry(r.class_label.clone()).or_default();
            *c += 1;
            *c <= n
        })
    }

    /// Replaces the record list, keeping root and taxonomy.
    pub fn map_records(&self, f: impl FnMut(&SampleRecord) -> SampleRecord) -> Result<Manifest> {
        let records: Vec<_> = self.records.iter().map(f).collect();
        let mut m = Manifest::from_records(records)?;
        if m.records.is_empty() {
            m.taxonomy = self.taxonomy;
        }
        m.root = self.root.clone();
        Ok(m)
    }

    /// Decodes every image, returning the records that fail.
    pub fn validate_images(&self) -> Vec<(usize, Error)> {
        self.records
            .iter()
            .enumerate()
            .filter_map(|(i, r)| Image::load(self.resolve(&r.image_path)).err().map(|e| (i, e)))
            .collect()
    }
}

/// Loads a JSON Lines manifest; relative paths resolve against its directory.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut m = Manifest::parse(&text)?;
    m.root = Some(
        path.parent()
            .map(Path::to_path_buf)
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or_else(|| PathBuf::from(".")),
    );
    Ok(m)
}

pub fn save_manifest(m: &Manifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, m.to_jsonl()).map_err(|e| Error::io(path, e))
}

pub fn filter_split(m: &Manifest, split: Split) -> Manifest {
    m.filter(|r| r.split == split)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(path: &str, label: &str, split: &str) -> String {
        format!(r#"{{"image_path":"{path}","class_label":"{label}","taxonomy":"generator","split":"{split}"}}"#)
    }

    #[test]
    fn classes_sorted_and_order_preserved() {
        let text = [line("x.png", "b", "train"), line("y.png", "a", "train"), line("z.png", "b", "test")].join("\n");
        let m = Manifest::parse(&text).unwrap();
        assert_eq!(m.classes(), ["a", "b"]);
        assert_eq!(m.len(), 3);
        assert_eq!(m.records()[0].image_path, "x.png");
        assert_eq!(m.class_index("b"), Some(1));
    }

    #[test]
    fn empty_file_is_empty_manifest() {
        let m = Manifest::parse("").unwrap();
        assert!(m.is_empty());
        assert!(m.classes().is_empty());
    }

    #[test]
    fn missing_image_path_names_the_line() {
        let text = format!(
            "{}\n{}\n",
            line("a.png", "a", "train"),
            r#"{"class_label":"a","taxonomy":"generator","split":"train"}"#
        );
        match Manifest::parse(&text) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("image_path"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_and_taxonomy_conflicts() {
        let dup = [line("a.png", "a", "train"), line("a.png", "b", "test")].join("\n");
        assert!(matches!(Manifest::parse(&dup), Err(Error::Duplicate { .. })));
        let mixed = format!(
            "{}\n{}",
            line("a.png", "a", "train"),
            r#"{"image_path":"b.png","class_label":"x","taxonomy":"seed","split":"train"}"#
        );
        assert!(matches!(
            Manifest::parse(&mixed),
            Err(Error::TaxonomyConflict { line: 2, .. })
        ));
    }

    #[test]
    fn rejects_edit_ratio_outside_unit_interval() {
        let text = r#"{"image_path":"a.png","class_label":"a","split":"test","edit":{"editor":"x","edit_ratio":1.5}}"#;
        assert!(matches!(Manifest::parse(text), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn bad_split_is_a_parse_error() {
        let text = r#"{"image_path":"a.png","class_label":"a","split":"holdout"}"#;
        assert!(matches!(Manifest::parse(text), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn filter_split_counts() {
        let text = [line("x.png", "a", "train"), line("y.png", "b", "train"), line("z.png", "b", "test")].join("\n");
        let m = Manifest::parse(&text).unwrap();
        let t = filter_split(&m, Split::Test);
        assert_eq!(t.len(), 1);
        assert_eq!(t.classes(), ["b"]);
        assert!(filter_split(&m, Split::Val).is_empty());
    }

    #[test]
    fn limit_per_class_keeps_first_records() {
        let text = [line("1", "a", "train"), line("2", "b", "train"), line("3", "a", "train"), line("4", "a", "train")].join("\n");
        let m = Manifest::parse(&text).unwrap().limit_per_class(2);
        let paths: Vec<_> = m.records().iter().map(|r| r.image_path.as_str()).collect();
        assert_eq!(paths, ["1", "2", "3"]);
    }

    #[test]
    fn file_roundtrip_and_resolution() {
        let dir = tempfile::tempdir().unwrap();
        let mut rec = SampleRecord::new("img/a.png", "gen_a", Split::Val);
        rec.prompt = Some("a corgi on a beach".into());
        rec.prompt_domain = PromptDomain::Natural;
        rec.edit = Some(EditInfo {
            editor: "inpaint".into(),
            mask_path: Some("masks/a.png".into()),
            edit_ratio: Some(0.2),
        });
        rec.aux_maps.insert("depth".into(), "depth/a.png".into());
        let m = Manifest::from_records(vec![rec, SampleRecord::new("/abs/b.png", "real", Split::Train)]).unwrap();
        let path = dir.path().join("m.jsonl");
        save_manifest(&m, &path).unwrap();
        let back = load_manifest(&path).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.resolve("img/a.png"), dir.path().join("img/a.png"));
        assert_eq!(back.resolve("/abs/b.png"), PathBuf::from("/abs/b.png"));
    }
}
