//! Run configuration: one flat JSON object.
//!
//! Only `dataset` and `s` are required. `dataset` is either a CSV path
//! (relative paths are taken from the config file's directory) or a
//! synthetic-data spec object.

use std::path::{Path, PathBuf};

use blufs::data::{gen_synthetic, load_dataset, SyntheticSpec};
use blufs::solver::{BlufsConfig, SparsityMode};
use blufs::{Dataset, Sigma};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetSource {
    Synthetic(SyntheticSpec),
    Path(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Blufs,
    Lapscore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSource,
    pub s: usize,
    pub method: Method,
    pub standardize: bool,
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
    pub k: usize,
    /// Number of pseudo-label columns; defaults to the dataset's class count.
    pub clusters: Option<usize>,
    pub tau1: f64,
    pub tau2: f64,
    pub tau3: f64,
    pub theta: f64,
    pub rho: Option<f64>,
    pub sigma: Sigma,
    pub outer_max_iter: usize,
    pub outer_tol: f64,
    pub inner_max_iter: usize,
    pub inner_tol: f64,
    pub seed: u64,
    /// Defaults to {10, 20, ..., 100} capped at the feature count.
    pub feature_counts: Option<Vec<usize>>,
    /// Defaults to the length of `seeds`, or 10.
    pub repeats: Option<usize>,
    /// Defaults to `seed, seed + 1, ...`.
    pub seeds: Option<Vec<u64>>,
    pub split_fraction: f64,
    pub splits: usize,
    pub knn_k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let solver = BlufsConfig::new(0, 0);
        Self {
            dataset: DatasetSource::Path(PathBuf::new()),
            s: 0,
            method: Method::Blufs,
            standardize: true,
            lambda: solver.lambda,
            alpha: solver.alpha,
            beta: solver.beta,
            mu: solver.mu,
            k: solver.k,
            clusters: None,
            tau1: solver.tau1,
            tau2: solver.tau2,
            tau3: solver.tau3,
            theta: solver.theta,
            rho: None,
            sigma: solver.sigma,
            outer_max_iter: solver.outer_max_iter,
            outer_tol: solver.outer_tol,
            inner_max_iter: solver.inner_max_iter,
            inner_tol: solver.inner_tol,
            seed: 0,
            feature_counts: None,
            repeats: None,
            seeds: None,
            split_fraction: 0.5,
            splits: 50,
            knn_k: 1,
            output_dir: None,
        }
    }
}

const REQUIRED: [&str; 2] = ["dataset", "s"];
const DEFAULT_REPEATS: usize = 10;

fn config_error(key: &str, message: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("`{key}`: {message}"))
}

/// Reads and validates a config file. Relative dataset paths are resolved
/// against the file's directory.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut cfg = parse_config_str(&text)?;
    if let DatasetSource::Path(p) = &cfg.dataset {
        if p.is_relative() {
            let base = path.parent().unwrap_or(Path::new(""));
            cfg.dataset = DatasetSource::Path(base.join(p));
        }
    }
    Ok(cfg)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?;
    let object = value
        .as_object()
        .ok_or_else(|| CliError::Config("top level must be a JSON object".into()))?;
    if let Some(key) = REQUIRED.iter().find(|k| !object.contains_key(**k)) {
        return Err(config_error(key, "missing required key"));
    }
    let cfg: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            CliError::Config(inner.to_string())
        } else {
            config_error(&path, inner)
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    /// Range checks that do not need the data.
    pub fn validate(&self) -> Result<()> {
        if self.s == 0 {
            return Err(config_error("s", "must be a positive integer"));
        }
        if self.k == 0 {
            return Err(config_error("k", "must be a positive integer"));
        }
        if let DatasetSource::Synthetic(spec) = &self.dataset {
            spec.validate().map_err(|e| config_error("dataset", e))?;
        }
        self.solver_config(self.clusters.unwrap_or(2))
            .validate(None)
            .map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(counts) = &self.feature_counts {
            if counts.is_empty() || counts.contains(&0) {
                return Err(config_error("feature_counts", "must be a nonempty list of positive integers"));
            }
        }
        match (self.repeats, &self.seeds) {
            (Some(0), _) => return Err(config_error("repeats", "must be at least 1")),
            (_, Some(seeds)) if seeds.is_empty() => return Err(config_error("seeds", "must not be empty")),
            (Some(r), Some(seeds)) if r != seeds.len() => {
                return Err(config_error(
                    "repeats",
                    format!("is {r} but `seeds` lists {} values", seeds.len()),
                ))
            }
            _ => {}
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(config_error("split_fraction", "must lie strictly between 0 and 1"));
        }
        if self.splits == 0 {
            return Err(config_error("splits", "must be at least 1"));
        }
        if self.knn_k == 0 {
            return Err(config_error("knn_k", "must be a positive integer"));
        }
        Ok(())
    }

    /// Solver parameters with the given number of pseudo-label columns.
    pub fn solver_config(&self, clusters: usize) -> BlufsConfig {
        BlufsConfig {
            lambda: self.lambda,
            alpha: self.alpha,
            beta: self.beta,
            mu: self.mu,
            s: self.s,
            k: self.k,
            clusters,
            tau1: self.tau1,
            tau2: self.tau2,
            tau3: self.tau3,
            theta: self.theta,
            rho: self.rho,
            sigma: self.sigma,
            outer_max_iter: self.outer_max_iter,
            outer_tol: self.outer_tol,
            inner_max_iter: self.inner_max_iter,
            inner_tol: self.inner_tol,
            seed: self.seed,
            freeze_labels: false,
            sparsity: SparsityMode::InLoop,
        }
    }

    /// Fills every data-dependent default so the config can be replayed
    /// verbatim, and checks the bounds that depend on `ds`.
    pub fn resolve(&self, ds: &Dataset) -> Result<RunConfig> {
        let mut out = self.clone();
        let (d, n) = (ds.n_features(), ds.n_samples());
        if self.s > d {
            return Err(config_error("s", format!("is {} but the dataset has {d} features", self.s)));
        }
        if self.k >= n {
            return Err(config_error("k", format!("is {} but the dataset has only {n} samples", self.k)));
        }
        let clusters = match (self.clusters, ds.class_count()) {
            (Some(c), _) => c,
            (None, Some(c)) => c,
            (None, None) => return Err(config_error("clusters", "required when the dataset has no labels")),
        };
        out.clusters = Some(clusters);
        let counts = match &self.feature_counts {
            Some(counts) => {
                if let Some(&m) = counts.iter().find(|&&m| m > d) {
                    return Err(config_error("feature_counts", format!("{m} exceeds the {d} available features")));
                }
                counts.clone()
            }
            None => {
                let grid: Vec<usize> = (1..=10).map(|i| 10 * i).filter(|&m| m <= d).collect();
                if grid.is_empty() {
                    vec![self.s]
                } else {
                    grid
                }
            }
        };
        out.feature_counts = Some(counts);
        let seeds = match &self.seeds {
            Some(seeds) => seeds.clone(),
            None => {
                let repeats = self.repeats.unwrap_or(DEFAULT_REPEATS) as u64;
                (0..repeats).map(|r| self.seed.wrapping_add(r)).collect()
            }
        };
        out.repeats = Some(seeds.len());
        out.seeds = Some(seeds);
        out.output_dir = None;
        Ok(out)
    }

    /// Solver parameters after [`RunConfig::resolve`].
    pub fn resolved_solver(&self) -> BlufsConfig {
        self.solver_config(self.clusters.expect("config resolved"))
    }

    pub fn resolved_counts(&self) -> &[usize] {
        self.feature_counts.as_deref().expect("config resolved")
    }

    pub fn resolved_seeds(&self) -> &[u64] {
        self.seeds.as_deref().expect("config resolved")
    }
}

/// Loads or generates the dataset, returning it with a display name.
pub fn load_source(source: &DatasetSource) -> Result<(Dataset, String)> {
    match source {
        DatasetSource::Synthetic(spec) => {
            let name = serde_json::to_value(spec.kind)
                .ok()
                .and_then(|v| v.as_str().map(str::to_owned))
                .unwrap_or_else(|| "synthetic".into());
            Ok((gen_synthetic(spec)?, format!("{name}-seed{}", spec.seed)))
        }
        DatasetSource::Path(path) => {
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string());
            Ok((load_dataset(path)?, name))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config_str(r#"{"dataset": "data.csv", "s": 5}"#).unwrap();
        assert_eq!(cfg.s, 5);
        assert_eq!(cfg.k, 10);
        assert_eq!(cfg.lambda, 1.0);
        assert_eq!(cfg.method, Method::Blufs);
        assert!(cfg.standardize);
        assert_eq!(cfg.dataset, DatasetSource::Path("data.csv".into()));
    }

    #[test]
    fn errors_name_the_key() {
        let msg = |text: &str| parse_config_str(text).unwrap_err().to_string();
        assert!(msg(r#"{"dataset": "a.csv", "s": 0}"#).contains("`s`"));
        assert!(msg(r#"{"dataset": "a.csv", "s": 2, "foo": 1}"#).contains("foo"));
        assert!(msg(r#"{"dataset": "a.csv"}"#).contains("`s`"));
        assert!(msg(r#"{"dataset": "a.csv", "s": "two"}"#).contains("`s`"));
        assert!(msg(r#"{"dataset": "a.csv", "s": 2, "mu": -1}"#).contains("mu"));
        assert!(msg(r#"{"dataset": "a.csv", "s": 2, "split_fraction": 1.0}"#).contains("split_fraction"));
        assert!(msg(r#"{"dataset": "a.csv", "s": 2, "repeats": 3, "seeds": [1]}"#).contains("repeats"));
        assert!(msg("[1, 2]").contains("object"));
    }

    #[test]
    fn synthetic_source_is_parsed() {
        let cfg = parse_config_str(
            r#"{"dataset": {"kind": "two_rings", "samples_per_class": 10, "noise_features": 3, "noise_sigma": 1.0, "seed": 4}, "s": 2, "sigma": 0.5}"#,
        )
        .unwrap();
        assert!(matches!(cfg.dataset, DatasetSource::Synthetic(_)));
        assert_eq!(cfg.sigma, Sigma::Fixed(0.5));
        let (ds, name) = load_source(&cfg.dataset).unwrap();
        assert_eq!(ds.n_features(), 5);
        assert_eq!(name, "two_rings-seed4");
    }

    #[test]
    fn resolution_fills_data_defaults() {
        let cfg = parse_config_str(
            r#"{"dataset": {"kind": "gaussian_blobs", "samples_per_class": 10, "noise_features": 20, "noise_sigma": 1.0, "seed": 0}, "s": 3, "seed": 7, "repeats": 2}"#,
        )
        .unwrap();
        let (ds, _) = load_source(&cfg.dataset).unwrap();
        let resolved = cfg.resolve(&ds).unwrap();
        assert_eq!(resolved.clusters, Some(3));
        assert_eq!(resolved.feature_counts, Some(vec![10, 20]));
        assert_eq!(resolved.seeds, Some(vec![7, 8]));
        // resolved configs parse back to themselves
        let text = serde_json::to_string(&resolved).unwrap();
        assert_eq!(parse_config_str(&text).unwrap(), resolved);
    }

    #[test]
    fn resolution_checks_data_bounds() {
        let cfg = parse_config_str(
            r#"{"dataset": {"kind": "two_bananas", "samples_per_class": 5, "noise_features": 1, "noise_sigma": 1.0, "seed": 0}, "s": 4}"#,
        )
        .unwrap();
        let (ds, _) = load_source(&cfg.dataset).unwrap();
        assert!(cfg.resolve(&ds).unwrap_err().to_string().contains("`s`"));
    }
}
