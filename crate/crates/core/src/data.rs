//! Datasets: CSV ingestion, synthetic generators, standardization and
//! train/test splitting.
//!
//! A [`Dataset`] stores its feature matrix as `d x n` (one column per
//! sample) even though CSV files hold one sample per row.

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name of the optional label column in CSV files.
pub const LABEL_COLUMN: &str = "label";

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: DMatrix<f64>,
    labels: Option<Vec<usize>>,
    class_count: Option<usize>,
    feature_names: Option<Vec<String>>,
}

impl Dataset {
    /// Validates and wraps a `d x n` feature matrix.
    ///
    /// When `class_count` is `None` and labels are given, it is inferred as
    /// `max(label) + 1` and every class below it must occur.
    pub fn new(
        features: DMatrix<f64>,
        labels: Option<Vec<usize>>,
        class_count: Option<usize>,
        feature_names: Option<Vec<String>>,
    ) -> Result<Self> {
        let (d, n) = features.shape();
        if d < 1 {
            return Err(Error::InvalidArgument("dataset needs at least one feature".into()));
        }
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "dataset needs at least two samples, got {n}"
            )));
        }
        if let Some((idx, _)) = features.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite value for feature {} of sample {}",
                idx % d,
                idx / d
            )));
        }
        if let Some(names) = &feature_names {
            if names.len() != d {
                return Err(Error::Dimension(format!(
                    "{} feature names for {d} features",
                    names.len()
                )));
            }
        }
        let class_count = match &labels {
            None => class_count,
            Some(labels) => {
                if labels.len() != n {
                    return Err(Error::Dimension(format!(
                        "{} labels for {n} samples",
                        labels.len()
                    )));
                }
                let max = labels.iter().copied().max().unwrap_or(0);
                match class_count {
                    Some(c) if max >= c => {
                        return Err(Error::InvalidArgument(format!(
                            "label {max} outside declared class range [0, {c})"
                        )))
                    }
                    Some(c) => Some(c),
                    None => {
                        let present: BTreeSet<usize> = labels.iter().copied().collect();
                        if present.len() != max + 1 {
                            return Err(Error::InvalidArgument(format!(
                                "labels skip classes below {max}; declare the class count explicitly"
                            )));
                        }
                        Some(max + 1)
                    }
                }
            }
        };
        if class_count == Some(0) {
            return Err(Error::InvalidArgument("class count must be positive".into()));
        }
        Ok(Self {
            features,
            labels,
            class_count,
            feature_names,
        })
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn class_count(&self) -> Option<usize> {
        self.class_count
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    /// Name of feature `i`, falling back to `f{i}`.
    pub fn feature_name(&self, i: usize) -> String {
        self.feature_names
            .as_ref()
            .map(|names| names[i].clone())
            .unwrap_or_else(|| format!("f{i}"))
    }

    pub fn n_features(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.features.ncols()
    }

    /// Keeps the listed feature rows, in the given order.
    pub fn select_features(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n_features()) {
            return Err(Error::InvalidArgument(format!(
                "feature index {bad} out of range for d = {}",
                self.n_features()
            )));
        }
        let features = self.features.select_rows(indices);
        let names = self
            .feature_names
            .as_ref()
            .map(|names| indices.iter().map(|&i| names[i].clone()).collect());
        Self::new(features, self.labels.clone(), self.class_count, names)
    }

    /// Keeps the listed samples, in the given order.
    pub fn select_samples(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n_samples()) {
            return Err(Error::InvalidArgument(format!(
                "sample index {bad} out of range for n = {}",
                self.n_samples()
            )));
        }
        let features = self.features.select_columns(indices);
        let labels = self
            .labels
            .as_ref()
            .map(|labels| indices.iter().map(|&i| labels[i]).collect());
        Self::new(features, labels, self.class_count, self.feature_names.clone())
    }
}

/// Reads a CSV file with a header row and one sample per row.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file)
}

/// Parses CSV text from any reader; see [`load_dataset`].
pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::Format("empty file: missing header row".into()));
    }
    let label_col = header.iter().position(|h| h == LABEL_COLUMN);
    let feature_cols: Vec<usize> = (0..header.len()).filter(|&c| Some(c) != label_col).collect();
    if feature_cols.is_empty() {
        return Err(Error::Format("no feature columns in header".into()));
    }

    let mut values: Vec<f64> = Vec::new();
    let mut raw_labels: Vec<usize> = Vec::new();
    let mut n = 0usize;
    for (idx, record) in rdr.records().enumerate() {
        let record = record?;
        // header is line 1
        let line = idx + 2;
        if record.len() != header.len() {
            return Err(Error::Parse {
                row: line,
                column: format!("{} fields", record.len()),
                message: format!("expected {} fields", header.len()),
            });
        }
        for &c in &feature_cols {
            let cell = record[c].trim();
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: line,
                column: header[c].clone(),
                message: format!("non-numeric value {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: line,
                    column: header[c].clone(),
                    message: format!("non-finite value {cell:?}"),
                });
            }
            values.push(v);
        }
        if let Some(c) = label_col {
            let cell = record[c].trim();
            let label: usize = cell.parse().map_err(|_| Error::Parse {
                row: line,
                column: LABEL_COLUMN.to_string(),
                message: format!("label {cell:?} is not a nonnegative integer"),
            })?;
            raw_labels.push(label);
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::Format("file has a header but no data rows".into()));
    }

    let d = feature_cols.len();
    // values are sample-major, which is exactly column-major for d x n
    let features = DMatrix::from_vec(d, n, values);
    let names = feature_cols.iter().map(|&c| header[c].clone()).collect();
    let labels = label_col.map(|_| densify_labels(raw_labels));
    Dataset::new(features, labels, None, Some(names))
}

/// Maps label values onto `0..c` by rank when some class index is unused,
/// e.g. 1-based label files.
fn densify_labels(labels: Vec<usize>) -> Vec<usize> {
    let distinct: Vec<usize> = labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if distinct.last().map(|&m| m + 1) == Some(distinct.len()) {
        return labels;
    }
    log::warn!(
        "label values {:?} are not contiguous from 0; remapping by rank",
        distinct
    );
    labels
        .into_iter()
        .map(|l| distinct.binary_search(&l).expect("label present"))
        .collect()
}

/// Writes the dataset in the same layout [`load_dataset`] reads.
pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(ds, file)
}

pub fn write_csv<W: std::io::Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (0..ds.n_features()).map(|i| ds.feature_name(i)).collect();
    if ds.labels().is_some() {
        header.push(LABEL_COLUMN.to_string());
    }
    wtr.write_record(&header)?;
    for j in 0..ds.n_samples() {
        let mut record: Vec<String> = ds.features().column(j).iter().map(|v| v.to_string()).collect();
        if let Some(labels) = ds.labels() {
            record.push(labels[j].to_string());
        }
        wtr.write_record(&record)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    /// Two concentric rings (a two-class dartboard).
    TwoRings,
    /// Two interleaved half-moons.
    TwoBananas,
    /// Three isotropic Gaussian blobs.
    GaussianBlobs,
}

impl SyntheticKind {
    pub fn class_count(self) -> usize {
        match self {
            SyntheticKind::TwoRings | SyntheticKind::TwoBananas => 2,
            SyntheticKind::GaussianBlobs => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub samples_per_class: usize,
    pub noise_features: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.samples_per_class < 1 {
            return Err(Error::InvalidArgument(
                "samples_per_class must be at least 1".into(),
            ));
        }
        if !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise_sigma must be positive, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

const RING_RADII: [f64; 2] = [1.0, 3.0];
const RING_JITTER: f64 = 0.1;
const MOON_SCALE: f64 = 3.0;
const MOON_JITTER: f64 = 0.3;
const BLOB_RADIUS: f64 = 3.0;
const BLOB_STD: f64 = 0.5;

/// Generates a labeled dataset whose features 0 and 1 carry the class
/// structure and whose remaining `noise_features` rows are i.i.d.
/// `N(0, noise_sigma^2)`. Samples are grouped by class.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let classes = spec.kind.class_count();
    let n = classes * spec.samples_per_class;
    let d = 2 + spec.noise_features;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    let mut features = DMatrix::zeros(d, n);
    let mut labels = Vec::with_capacity(n);
    #[allow(clippy::needless_range_loop)]
    for class in 0..classes {
        for i in 0..spec.samples_per_class {
            let col = class * spec.samples_per_class + i;
            let (x, y) = match spec.kind {
                SyntheticKind::TwoRings => {
                    let angle = rng.random_range(0.0..std::f64::consts::TAU);
                    let r = RING_RADII[class] + RING_JITTER * unit.sample(&mut rng);
                    (r * angle.cos(), r * angle.sin())
                }
                SyntheticKind::TwoBananas => {
                    let t = rng.random_range(0.0..std::f64::consts::PI);
                    let (x, y) = if class == 0 {
                        (t.cos(), t.sin())
                    } else {
                        (1.0 - t.cos(), 0.5 - t.sin())
                    };
                    (
                        MOON_SCALE * x + MOON_JITTER * unit.sample(&mut rng),
                        MOON_SCALE * y + MOON_JITTER * unit.sample(&mut rng),
                    )
                }
                SyntheticKind::GaussianBlobs => {
                    let angle = std::f64::consts::TAU * class as f64 / classes as f64;
                    (
                        BLOB_RADIUS * angle.cos() + BLOB_STD * unit.sample(&mut rng),
                        BLOB_RADIUS * angle.sin() + BLOB_STD * unit.sample(&mut rng),
                    )
                }
            };
            features[(0, col)] = x;
            features[(1, col)] = y;
            labels.push(class);
        }
    }
    let noise = Normal::new(0.0, spec.noise_sigma).expect("validated sigma");
    // noise drawn after the informative block so it never perturbs features 0 and 1
    for col in 0..n {
        for row in 2..d {
            features[(row, col)] = noise.sample(&mut rng);
        }
    }
    Dataset::new(features, Some(labels), Some(classes), None)
}

/// Z-scores every feature row (population variance); constant rows become zero.
pub fn standardize(ds: &Dataset) -> Dataset {
    let mut features = ds.features().clone();
    let n = features.ncols() as f64;
    for mut row in features.row_iter_mut() {
        let mean = row.sum() / n;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        if std <= 1e-12 * mean.abs().max(1.0) {
            row.fill(0.0);
        } else {
            for v in row.iter_mut() {
                *v = (*v - mean) / std;
            }
        }
    }
    Dataset {
        features,
        ..ds.clone()
    }
}

/// Partitions sample indices into (train, test), both sorted ascending.
///
/// Stratified by class when every class has at least two members; otherwise
/// a plain shuffle is used.
pub fn split_indices(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train_fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let labels = ds
        .labels()
        .ok_or_else(|| Error::InvalidArgument("split requires labels".into()))?;
    let n = labels.len();
    let n_train = (train_fraction * n as f64).round() as usize;
    if n_train < 2 || n - n_train < 2 {
        return Err(Error::InvalidArgument(format!(
            "train_fraction {train_fraction} leaves fewer than two samples on one side of n = {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = ds.class_count().unwrap_or(0);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    let stratify = members.iter().filter(|m| !m.is_empty()).all(|m| m.len() >= 2);

    let mut train = Vec::with_capacity(n_train);
    if stratify {
        // largest-remainder allocation so per-class quotas sum to n_train
        let quotas: Vec<f64> = members
            .iter()
            .map(|m| train_fraction * m.len() as f64)
            .collect();
        let mut take: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
        let mut remaining = n_train - take.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..classes).collect();
        order.sort_by(|&a, &b| {
            let ra = quotas[a] - quotas[a].floor();
            let rb = quotas[b] - quotas[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for &c in order.iter().cycle().take(2 * classes) {
            if remaining == 0 {
                break;
            }
            if take[c] < members[c].len() {
                take[c] += 1;
                remaining -= 1;
            }
        }
        for (c, mut m) in members.into_iter().enumerate() {
            m.shuffle(&mut rng);
            train.extend_from_slice(&m[..take[c]]);
        }
    } else {
        log::warn!("a class has fewer than two members; falling back to an unstratified split");
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        train.extend_from_slice(&all[..n_train]);
    }
    train.sort_unstable();
    let in_train: BTreeSet<usize> = train.iter().copied().collect();
    let test = (0..n).filter(|i| !in_train.contains(i)).collect();
    Ok((train, test))
}

/// Splits a labeled dataset; see [`split_indices`].
pub fn split(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(ds, train_fraction, seed)?;
    Ok((ds.select_samples(&train)?, ds.select_samples(&test)?))
}
