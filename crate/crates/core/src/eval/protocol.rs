//! Repeat-and-average evaluation over a list of feature counts.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{acc, kmeans, knn_classify, nmi};
use crate::data::{split, Dataset};
use crate::error::{Error, Result};
use crate::selection::{reduce, FeatureRanking};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Metric {
    Acc,
    Nmi,
    ClsAcc,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Acc => "ACC",
            Metric::Nmi => "NMI",
            Metric::ClsAcc => "CLS_ACC",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub feature_count: usize,
    pub metric: Metric,
    pub mean: f64,
    pub std: f64,
    pub repeats: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    /// CSV with columns `feature_count,metric,mean,std,repeats`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["feature_count", "metric", "mean", "std", "repeats"])?;
        for row in &self.rows {
            wtr.write_record([
                row.feature_count.to_string(),
                row.metric.as_str().to_string(),
                row.mean.to_string(),
                row.std.to_string(),
                row.repeats.to_string(),
            ])?;
        }
        wtr.flush().map_err(|e| Error::io("<report writer>", e))?;
        Ok(())
    }

    pub fn mean_of(&self, feature_count: usize, metric: Metric) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.feature_count == feature_count && r.metric == metric)
            .map(|r| r.mean)
    }
}

/// Plain-text table of `metric` as `mean±std` percentages, one line per
/// named report and one column per feature count.
pub fn format_table(reports: &[(&str, &EvalReport)], metric: Metric) -> String {
    let mut counts: Vec<usize> = reports
        .iter()
        .flat_map(|(_, r)| r.rows.iter().filter(|row| row.metric == metric).map(|row| row.feature_count))
        .collect();
    counts.sort_unstable();
    counts.dedup();
    let width = reports.iter().map(|(name, _)| name.len()).max().unwrap_or(0).max(6);
    let mut out = format!("{:<width$}", metric.as_str());
    for m in &counts {
        out.push_str(&format!(" | {:>13}", format!("m={m}")));
    }
    out.push('\n');
    for (name, report) in reports {
        out.push_str(&format!("{name:<width$}"));
        for &m in &counts {
            let cell = report
                .rows
                .iter()
                .find(|row| row.metric == metric && row.feature_count == m)
                .map_or_else(|| "-".to_string(), |row| format!("{:.2}±{:.2}", 100.0 * row.mean, 100.0 * row.std));
            out.push_str(&format!(" | {cell:>13}"));
        }
        out.push('\n');
    }
    out
}

/// Anything that can rank features for a requested subset size.
pub trait FeatureSelector: Sync {
    fn rank(&self, ds: &Dataset, m: usize) -> Result<FeatureRanking>;
}

impl<F> FeatureSelector for F
where
    F: Fn(&Dataset, usize) -> Result<FeatureRanking> + Sync,
{
    fn rank(&self, ds: &Dataset, m: usize) -> Result<FeatureRanking> {
        self(ds, m)
    }
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn check_counts(ds: &Dataset, feature_counts: &[usize]) -> Result<()> {
    if feature_counts.is_empty() {
        return Err(Error::InvalidArgument("no feature counts given".into()));
    }
    if let Some(&m) = feature_counts.iter().find(|&&m| m == 0 || m > ds.n_features()) {
        return Err(Error::InvalidArgument(format!(
            "feature count {m} outside [1, {}]",
            ds.n_features()
        )));
    }
    Ok(())
}

fn labels_and_classes(ds: &Dataset) -> Result<(&[usize], usize)> {
    let truth = ds
        .labels()
        .ok_or_else(|| Error::InvalidArgument("evaluation requires labels".into()))?;
    let classes = ds.class_count().expect("labeled datasets carry a class count");
    Ok((truth, classes))
}

/// ACC and NMI of k-means (one run per seed) on the top-`m` features, for
/// every `m` in `feature_counts`.
pub fn clustering_protocol(
    ds: &Dataset,
    selector: &dyn FeatureSelector,
    feature_counts: &[usize],
    seeds: &[u64],
) -> Result<EvalReport> {
    check_counts(ds, feature_counts)?;
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("at least one seed is required".into()));
    }
    let (truth, classes) = labels_and_classes(ds)?;
    let mut rows = Vec::with_capacity(2 * feature_counts.len());
    for &m in feature_counts {
        let ranking = selector.rank(ds, m)?;
        let reduced = reduce(ds, &ranking, m)?;
        let mut accs = Vec::with_capacity(seeds.len());
        let mut nmis = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let pred = kmeans(reduced.features(), classes, seed)?;
            accs.push(acc(&pred, truth)?);
            nmis.push(nmi(truth, &pred)?);
        }
        for (metric, values) in [(Metric::Acc, &accs), (Metric::Nmi, &nmis)] {
            let (mean, std) = mean_std(values);
            rows.push(EvalRow {
                feature_count: m,
                metric,
                mean,
                std,
                repeats: values.len(),
            });
        }
    }
    Ok(EvalReport { rows })
}

/// k-NN test accuracy over `splits` random partitions (seeds
/// `seed, seed + 1, ...`) on the top-`m` features.
pub fn classification_protocol(
    ds: &Dataset,
    selector: &dyn FeatureSelector,
    feature_counts: &[usize],
    splits: usize,
    train_fraction: f64,
    knn_k: usize,
    seed: u64,
) -> Result<EvalReport> {
    check_counts(ds, feature_counts)?;
    if splits == 0 {
        return Err(Error::InvalidArgument("at least one split is required".into()));
    }
    labels_and_classes(ds)?;
    let mut rows = Vec::with_capacity(feature_counts.len());
    for &m in feature_counts {
        let ranking = selector.rank(ds, m)?;
        let reduced = reduce(ds, &ranking, m)?;
        let scores = (0..splits as u64)
            .map(|r| {
                let (train, test) = split(&reduced, train_fraction, seed.wrapping_add(r))?;
                knn_classify(&train, &test, knn_k)
            })
            .collect::<Result<Vec<f64>>>()?;
        let (mean, std) = mean_std(&scores);
        rows.push(EvalRow {
            feature_count: m,
            metric: Metric::ClsAcc,
            mean,
            std,
            repeats: splits,
        });
    }
    Ok(EvalReport { rows })
}
