//! Dataset container, on-disk formats, and validation.
//!
//! A dataset directory holds:
//!
//! - `meta.jsonl`: one JSON object per instance, line `i` describes row `i`
//!   of both views.
//! - `view_token.emb`, `view_mask.emb`: `EMB1` matrices (see [`emb`]).
//! - `labels.json` (optional): the label space. When absent it is derived
//!   from the metadata.

pub mod checkpoint;
pub mod emb;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const META_FILE: &str = "meta.jsonl";
pub const LABELS_FILE: &str = "labels.json";
pub const TOKEN_VIEW_FILE: &str = "view_token.emb";
pub const MASK_VIEW_FILE: &str = "view_mask.emb";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewId {
    Token,
    Mask,
}

impl ViewId {
    pub const ALL: [ViewId; 2] = [ViewId::Token, ViewId::Mask];

    pub fn name(self) -> &'static str {
        match self {
            ViewId::Token => "token",
            ViewId::Mask => "mask",
        }
    }

    pub fn file_name(self) -> &'static str {
        match self {
            ViewId::Token => TOKEN_VIEW_FILE,
            ViewId::Mask => MASK_VIEW_FILE,
        }
    }

    pub fn other(self) -> ViewId {
        match self {
            ViewId::Token => ViewId::Mask,
            ViewId::Mask => ViewId::Token,
        }
    }
}

impl fmt::Display for ViewId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ViewId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "token" => Ok(ViewId::Token),
            "mask" => Ok(ViewId::Mask),
            other => Err(Error::Config(format!(
                "unknown view {other:?}, expected \"token\" or \"mask\""
            ))),
        }
    }
}

/// One relation or event mention.
///
/// `gold` is an evaluation-only field: the true type of an unknown instance
/// when it is available (synthetic data, annotated test sets). Training never
/// reads it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub label: Option<String>,
    pub known: bool,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<String>,
}

impl Instance {
    /// The type used for scoring: the label for known instances, `gold` otherwise.
    pub fn gold_type(&self) -> Option<&str> {
        self.label.as_deref().or(self.gold.as_deref())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpace {
    pub known_types: Vec<String>,
    pub num_unknown: usize,
}

impl LabelSpace {
    pub fn new(known_types: Vec<String>, num_unknown: usize) -> Result<Self> {
        let ls = Self {
            known_types,
            num_unknown,
        };
        ls.validate()?;
        Ok(ls)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for t in &self.known_types {
            if !seen.insert(t.as_str()) {
                return Err(Error::LabelSpace(format!("duplicate known type {t:?}")));
            }
        }
        if self.num_unknown < 2 {
            return Err(Error::LabelSpace(format!(
                "num_unknown must be at least 2, got {}",
                self.num_unknown
            )));
        }
        Ok(())
    }

    pub fn num_known(&self) -> usize {
        self.known_types.len()
    }

    pub fn known_index(&self, label: &str) -> Option<usize> {
        self.known_types.iter().position(|t| t == label)
    }
}

/// Per-instance embeddings for one view, row `i` belongs to instance `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewMatrix {
    pub view: ViewId,
    pub rows: Array2<f32>,
}

impl ViewMatrix {
    pub fn new(view: ViewId, rows: Array2<f32>) -> Self {
        Self { view, rows }
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    fn check_finite(&self) -> Result<()> {
        for ((row, col), v) in self.rows.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    view: self.view,
                    row,
                    col,
                });
            }
        }
        Ok(())
    }

    /// Gathers the given rows as f64.
    pub fn gather(&self, indices: &[usize]) -> Array2<f64> {
        let mut out = Array2::zeros((indices.len(), self.dim()));
        for (dst, &src) in out.axis_iter_mut(Axis(0)).zip(indices) {
            let row = self.rows.row(src);
            for (d, s) in dst.into_iter().zip(row.iter()) {
                *d = f64::from(*s);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub instances: Vec<Instance>,
    pub labels: LabelSpace,
    pub token: ViewMatrix,
    pub mask: ViewMatrix,
}

/// Index lists used by training and evaluation. Known test instances appear
/// in none of them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Partition {
    pub labeled_train: Vec<usize>,
    pub unlabeled_train: Vec<usize>,
    pub unlabeled_test: Vec<usize>,
}

impl Dataset {
    pub fn new(
        instances: Vec<Instance>,
        labels: LabelSpace,
        token: ViewMatrix,
        mask: ViewMatrix,
    ) -> Result<Self> {
        let d = Self {
            instances,
            labels,
            token,
            mask,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn view(&self, id: ViewId) -> &ViewMatrix {
        match id {
            ViewId::Token => &self.token,
            ViewId::Mask => &self.mask,
        }
    }

    pub fn view_mut(&mut self, id: ViewId) -> &mut ViewMatrix {
        match id {
            ViewId::Token => &mut self.token,
            ViewId::Mask => &mut self.mask,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.labels.validate()?;
        validate_instances(&self.instances, Some(&self.labels))?;
        for id in ViewId::ALL {
            let v = self.view(id);
            if v.view != id {
                return Err(Error::Shape(format!(
                    "view slot {id} holds a {} matrix",
                    v.view
                )));
            }
            if v.len() != self.instances.len() {
                return Err(Error::RowCountMismatch {
                    view: id,
                    expected: self.instances.len(),
                    found: v.len(),
                });
            }
            v.check_finite()?;
        }
        Ok(())
    }

    pub fn partition(&self) -> Partition {
        let mut p = Partition::default();
        for (i, inst) in self.instances.iter().enumerate() {
            match (inst.known, inst.split) {
                (true, Split::Train) => p.labeled_train.push(i),
                (false, Split::Train) => p.unlabeled_train.push(i),
                (false, Split::Test) => p.unlabeled_test.push(i),
                (true, Split::Test) => {}
            }
        }
        p
    }

    /// Known-class index of each listed instance. Panics if one is unlabeled.
    pub fn known_targets(&self, indices: &[usize]) -> Vec<usize> {
        indices
            .iter()
            .map(|&i| {
                let label = self.instances[i]
                    .label
                    .as_deref()
                    .expect("known_targets called on an unlabeled instance");
                self.labels
                    .known_index(label)
                    .expect("validated labels are in the label space")
            })
            .collect()
    }

    /// Gold type names for the listed instances, if every one carries one.
    pub fn gold_types(&self, indices: &[usize]) -> Option<Vec<String>> {
        indices
            .iter()
            .map(|&i| self.instances[i].gold_type().map(str::to_owned))
            .collect()
    }
}

fn validate_instances(instances: &[Instance], labels: Option<&LabelSpace>) -> Result<()> {
    let mut ids = HashSet::with_capacity(instances.len());
    for (row, inst) in instances.iter().enumerate() {
        if !ids.insert(inst.id.as_str()) {
            return Err(Error::DuplicateId {
                row,
                id: inst.id.clone(),
            });
        }
        match (&inst.label, inst.known) {
            (None, true) => return Err(Error::KnownWithoutLabel { row }),
            (Some(label), false) => {
                return Err(Error::LabelWithoutKnown {
                    row,
                    label: label.clone(),
                })
            }
            (Some(label), true) => {
                if let Some(ls) = labels {
                    if ls.known_index(label).is_none() {
                        return Err(Error::UnknownLabel {
                            row,
                            label: label.clone(),
                        });
                    }
                }
            }
            (None, false) => {}
        }
    }
    Ok(())
}

/// Label space implied by the metadata alone: known types in order of first
/// appearance, and one unknown type per distinct gold value (at least 2).
pub fn derive_label_space(instances: &[Instance]) -> LabelSpace {
    let mut known_types: Vec<String> = Vec::new();
    let mut gold = HashSet::new();
    for inst in instances {
        if let Some(label) = &inst.label {
            if !known_types.contains(label) {
                known_types.push(label.clone());
            }
        } else if let Some(g) = &inst.gold {
            gold.insert(g.as_str());
        }
    }
    LabelSpace {
        known_types,
        num_unknown: gold.len().max(2),
    }
}

pub fn read_meta(path: &Path) -> Result<Vec<Instance>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let inst: Instance = serde_json::from_str(&line).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?;
        out.push(inst);
    }
    Ok(out)
}

pub fn write_meta(path: &Path, instances: &[Instance]) -> Result<()> {
    let mut buf = Vec::new();
    for inst in instances {
        serde_json::to_writer(&mut buf, inst).expect("instance serializes");
        buf.push(b'\n');
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Loads and validates a dataset from explicit file paths.
///
/// `labels.json` is looked up next to `meta_path`.
pub fn load_dataset(meta_path: &Path, view_paths: [&Path; 2]) -> Result<Dataset> {
    let instances = read_meta(meta_path)?;
    let labels_path = meta_path
        .parent()
        .map(|p| p.join(LABELS_FILE))
        .unwrap_or_else(|| PathBuf::from(LABELS_FILE));
    let labels = if labels_path.exists() {
        let text = fs::read_to_string(&labels_path).map_err(|e| Error::io(&labels_path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: labels_path.clone(),
            line: 0,
            source,
        })?
    } else {
        validate_instances(&instances, None)?;
        derive_label_space(&instances)
    };
    let token = ViewMatrix::new(ViewId::Token, emb::read_emb(view_paths[0])?);
    let mask = ViewMatrix::new(ViewId::Mask, emb::read_emb(view_paths[1])?);
    Dataset::new(instances, labels, token, mask)
}

/// Loads `meta.jsonl`, `view_token.emb` and `view_mask.emb` from `dir`.
pub fn load_dir(dir: &Path) -> Result<Dataset> {
    load_dataset(
        &dir.join(META_FILE),
        [&dir.join(TOKEN_VIEW_FILE), &dir.join(MASK_VIEW_FILE)],
    )
}

pub fn write_dataset(d: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_meta(&dir.join(META_FILE), &d.instances)?;
    let labels_path = dir.join(LABELS_FILE);
    let mut f = fs::File::create(&labels_path).map_err(|e| Error::io(&labels_path, e))?;
    serde_json::to_writer_pretty(&mut f, &d.labels).expect("label space serializes");
    f.write_all(b"\n").map_err(|e| Error::io(&labels_path, e))?;
    for id in ViewId::ALL {
        emb::write_emb(&dir.join(id.file_name()), d.view(id).rows.view())?;
    }
    Ok(())
}

/// Reassigns `split` so that `fraction` of each type's instances (rounded,
/// seeded) become test instances. Known instances group by label, unknown
/// ones by gold type when present, otherwise all together.
pub fn split_instances(instances: &mut [Instance], fraction: f64, seed: u64) -> Result<()> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("split fraction must be in (0, 1), got {fraction}")));
    }
    let mut groups: BTreeMap<(bool, Option<&str>), Vec<usize>> = BTreeMap::new();
    for (i, inst) in instances.iter().enumerate() {
        let key = if inst.known { inst.label.as_deref() } else { inst.gold.as_deref() };
        groups.entry((inst.known, key)).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test = vec![false; instances.len()];
    for members in groups.values_mut() {
        members.shuffle(&mut rng);
        let n = (fraction * members.len() as f64).round() as usize;
        for &i in members.iter().take(n) {
            test[i] = true;
        }
    }
    for (inst, t) in instances.iter_mut().zip(test) {
        inst.split = if t { Split::Test } else { Split::Train };
    }
    Ok(())
}

/// Convenience for tests and examples: f64 rows to an f32 view.
pub fn view_from_f64(view: ViewId, rows: ArrayView2<'_, f64>) -> ViewMatrix {
    ViewMatrix::new(view, rows.mapv(|v| v as f32))
}
