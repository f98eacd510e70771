//! Dataset ingestion and preparation.
//!
//! Rows with missing values are dropped first, then exact duplicate feature
//! vectors (first occurrence kept). Features are rescaled to `[0, 1]` by
//! [`normalize`]; the values as loaded stay available through
//! [`Dataset::raw_row`] for display.

pub mod synthetic;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng;

/// An instance matrix with optional class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    name: String,
    n_features: usize,
    values: Vec<f64>,
    raw: Vec<f64>,
    labels: Option<Vec<usize>>,
    class_names: Vec<String>,
    feature_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from in-memory rows, applying the same cleaning as
    /// [`load_dataset`]: rows with a non-finite value are dropped, then exact
    /// duplicates.
    pub fn from_rows(
        name: impl Into<String>,
        rows: Vec<Vec<f64>>,
        labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        if let Some(labels) = &labels {
            if labels.len() != rows.len() {
                return Err(Error::InvalidArgument(format!(
                    "{} labels for {} rows",
                    labels.len(),
                    rows.len()
                )));
            }
        }
        let n_classes = labels
            .as_ref()
            .and_then(|l| l.iter().max())
            .map_or(0, |m| m + 1);
        let class_names = (0..n_classes).map(|c| c.to_string()).collect();
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                let label = labels.as_ref().map(|l| l[i]);
                let clean = r.iter().all(|v| v.is_finite());
                (clean.then_some(r), label)
            })
            .collect();
        Self::assemble(name.into(), rows, class_names, Vec::new())
    }

    fn assemble(
        name: String,
        rows: Vec<(Option<Vec<f64>>, Option<usize>)>,
        class_names: Vec<String>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let mut seen: HashSet<Vec<u64>> = HashSet::new();
        let mut values = Vec::new();
        let mut labels = Vec::new();
        let mut n_features = None;
        let mut has_labels = None;
        for (row, label) in rows {
            let Some(row) = row else { continue };
            match n_features {
                None => n_features = Some(row.len()),
                Some(f) if f != row.len() => {
                    return Err(Error::RaggedRow {
                        row: labels.len(),
                        expected: f,
                        found: row.len(),
                    })
                }
                _ => {}
            }
            has_labels.get_or_insert(label.is_some());
            let key: Vec<u64> = row.iter().map(|v| v.to_bits()).collect();
            if !seen.insert(key) {
                continue;
            }
            values.extend_from_slice(&row);
            labels.push(label);
        }
        let n_features = n_features.ok_or(Error::EmptyDataset)?;
        if labels.is_empty() || n_features == 0 {
            return Err(Error::EmptyDataset);
        }
        let labels = if has_labels == Some(true) {
            Some(labels.into_iter().map(|l| l.unwrap_or(0)).collect())
        } else {
            None
        };
        let feature_names = if feature_names.len() == n_features {
            feature_names
        } else {
            (0..n_features).map(|j| format!("x{j}")).collect()
        };
        Ok(Self {
            name,
            n_features,
            raw: values.clone(),
            values,
            labels,
            class_names,
            feature_names,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.n_features
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_features..(i + 1) * self.n_features]
    }

    /// Feature values as loaded, before normalization.
    pub fn raw_row(&self, i: usize) -> &[f64] {
        &self.raw[i * self.n_features..(i + 1) * self.n_features]
    }

    /// Row-major instance matrix.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_features)
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_classes(&self) -> usize {
        self.labels.as_ref().map_or(0, |l| {
            l.iter().collect::<HashSet<_>>().len()
        })
    }

    pub fn sq_dist(&self, i: usize, j: usize) -> f64 {
        sq_euclidean(self.row(i), self.row(j))
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.sq_dist(i, j).sqrt()
    }

    /// Content hash over the current values and labels.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.len() as u64).to_le_bytes());
        h.update((self.n_features as u64).to_le_bytes());
        for v in &self.values {
            h.update(v.to_bits().to_le_bytes());
        }
        if let Some(labels) = &self.labels {
            for l in labels {
                h.update((*l as u64).to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

pub(crate) fn sq_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Which CSV column carries the class label.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

impl FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.to_string()),
        })
    }
}

impl fmt::Display for LabelColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelColumn::Index(i) => write!(f, "{i}"),
            LabelColumn::Name(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct LoadOptions {
    pub label: Option<LabelColumn>,
    /// `None` detects a header: the first record is a header when one of its
    /// feature cells is not a number.
    pub header: Option<bool>,
    pub name: Option<String>,
}

impl LoadOptions {
    pub fn labeled(label: LabelColumn) -> Self {
        Self {
            label: Some(label),
            ..Self::default()
        }
    }
}

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || c == "?" || c.eq_ignore_ascii_case("na") || c.eq_ignore_ascii_case("nan")
}

/// Loads a comma-delimited numeric table.
pub fn load_dataset(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    let mut opts = opts.clone();
    if opts.name.is_none() {
        opts.name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned());
    }
    read_dataset(file, &opts)
}

/// Parses a dataset from any reader of CSV text.
pub fn read_dataset(reader: impl Read, opts: &LoadOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let records: Vec<csv::StringRecord> = rdr
        .records()
        .filter(|r| r.as_ref().map_or(true, |r| !(r.len() == 1 && r[0].is_empty())))
        .collect::<std::result::Result<_, _>>()?;
    let Some(first) = records.first() else {
        return Err(Error::EmptyDataset);
    };
    let width = first.len();

    let header = match (opts.header, &opts.label) {
        (Some(h), _) => h,
        (None, Some(LabelColumn::Name(_))) => true,
        (None, label) => {
            let label_idx = match label {
                Some(LabelColumn::Index(i)) => Some(*i),
                _ => None,
            };
            first
                .iter()
                .enumerate()
                .any(|(j, c)| Some(j) != label_idx && !is_missing(c) && c.parse::<f64>().is_err())
        }
    };
    let label_idx = match &opts.label {
        None => None,
        Some(LabelColumn::Index(i)) if *i < width => Some(*i),
        Some(LabelColumn::Name(name)) if header => Some(
            first
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::LabelColumnMissing(name.clone()))?,
        ),
        Some(other) => return Err(Error::LabelColumnMissing(other.to_string())),
    };
    let feature_names: Vec<String> = if header {
        first
            .iter()
            .enumerate()
            .filter(|(j, _)| Some(*j) != label_idx)
            .map(|(_, c)| c.to_string())
            .collect()
    } else {
        Vec::new()
    };

    let mut class_index: HashMap<String, usize> = HashMap::new();
    let mut class_names = Vec::new();
    let mut rows = Vec::with_capacity(records.len());
    let body = if header { &records[1..] } else { &records[..] };
    for (r, rec) in body.iter().enumerate() {
        let line = r + 1 + usize::from(header);
        if rec.len() != width {
            return Err(Error::RaggedRow {
                row: line,
                expected: width,
                found: rec.len(),
            });
        }
        if rec.iter().any(is_missing) {
            rows.push((None, None));
            continue;
        }
        let mut feats = Vec::with_capacity(width);
        let mut label = None;
        for (j, cell) in rec.iter().enumerate() {
            if Some(j) == label_idx {
                let next = class_index.len();
                let id = *class_index.entry(cell.to_string()).or_insert_with(|| {
                    class_names.push(cell.to_string());
                    next
                });
                label = Some(id);
            } else {
                let v: f64 = cell.parse().map_err(|_| Error::NonNumeric {
                    row: line,
                    column: j,
                    value: cell.to_string(),
                })?;
                if !v.is_finite() {
                    return Err(Error::NonNumeric {
                        row: line,
                        column: j,
                        value: cell.to_string(),
                    });
                }
                feats.push(v);
            }
        }
        rows.push((Some(feats), label));
    }
    let name = opts.name.clone().unwrap_or_else(|| "dataset".to_string());
    Dataset::assemble(name, rows, class_names, feature_names)
}

/// Rescales every feature to `[0, 1]`; constant features become 0.
pub fn normalize(d: &Dataset) -> Dataset {
    let f = d.n_features;
    let mut lo = vec![f64::INFINITY; f];
    let mut hi = vec![f64::NEG_INFINITY; f];
    for row in d.rows() {
        for (j, &v) in row.iter().enumerate() {
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }
    let mut out = d.clone();
    for row in out.values.chunks_exact_mut(f) {
        for (j, v) in row.iter_mut().enumerate() {
            let span = hi[j] - lo[j];
            *v = if span > 0.0 { (*v - lo[j]) / span } else { 0.0 };
        }
    }
    out
}

/// Extreme pairwise Euclidean distances; `min_d` ignores zero distances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceStats {
    pub min_d: f64,
    pub max_d: f64,
}

pub fn distance_stats(d: &Dataset) -> Result<DistanceStats> {
    let n = d.len();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "distance statistics need at least two instances".into(),
        ));
    }
    let mut min_d = f64::INFINITY;
    let mut max_d: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let dist = d.dist(i, j);
            if dist > 0.0 {
                min_d = min_d.min(dist);
            }
            max_d = max_d.max(dist);
        }
    }
    if !min_d.is_finite() {
        min_d = 0.0;
    }
    Ok(DistanceStats { min_d, max_d })
}

/// Seeded 70/30 partition of the instance indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupervisionSplit {
    pub supervision: Vec<usize>,
    pub leftout: Vec<usize>,
    pub seed: u64,
}

/// `round(0.7 * n)`, halves rounded up.
pub fn supervision_size(n: usize) -> usize {
    (7 * n + 5) / 10
}

pub fn split_supervision(d: &Dataset, seed: u64) -> Result<SupervisionSplit> {
    if d.labels().is_none() {
        return Err(Error::Unlabeled);
    }
    let n = d.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::rng(seed));
    let cut = supervision_size(n);
    let mut supervision = idx[..cut].to_vec();
    let mut leftout = idx[cut..].to_vec();
    supervision.sort_unstable();
    leftout.sort_unstable();
    Ok(SupervisionSplit {
        supervision,
        leftout,
        seed,
    })
}
