//! Command execution. Every command computes its artifacts in memory and
//! writes them, plus a `<command>.meta.json`, in one pass at the end.

use std::fmt;
use std::path::{Path, PathBuf};

use blufs::data::{standardize, write_csv};
use blufs::eval::{
    acc, classification_protocol, clustering_protocol, format_table, kmeans, mean_std, nmi, EvalReport, Metric,
};
use blufs::graph::{build_similarity, normalize_affinity};
use blufs::selection::{feature_ranking, lapscore, reduce};
use blufs::solver::{run_pam, BlufsConfig, SolverState};
use blufs::{Dataset, FeatureRanking};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{load_source, DatasetSource, Method, RunConfig};
use crate::error::{CliError, Result};

/// The 8-point log grid `{1e-4, ..., 1e3}` used by `grid`.
pub const GRID: [f64; 8] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Synth,
    Select,
    EvalCluster,
    EvalClassify,
    Grid { coarse: bool },
    Trace,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Select => "select",
            Command::EvalCluster => "eval-cluster",
            Command::EvalClassify => "eval-classify",
            Command::Grid { .. } => "grid",
            Command::Trace => "trace",
        }
    }

    fn from_metadata(meta: &Metadata) -> Option<Self> {
        Some(match meta.command.as_str() {
            "synth" => Command::Synth,
            "select" => Command::Select,
            "eval-cluster" => Command::EvalCluster,
            "eval-classify" => Command::EvalClassify,
            "grid" => Command::Grid { coarse: meta.coarse },
            "trace" => Command::Trace,
            _ => return None,
        })
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything needed to replay a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub command: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub coarse: bool,
    pub dataset_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_sha256: Option<String>,
    pub config_sha256: String,
    pub config: RunConfig,
    pub artifacts: Vec<String>,
}

pub fn version_string() -> String {
    format!("blufs {}", env!("CARGO_PKG_VERSION"))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Run-wide options that do not change any output.
#[derive(Debug, Clone, Default)]
pub struct Options {
    pub workers: Option<usize>,
}

struct Artifact {
    name: String,
    bytes: Vec<u8>,
}

fn csv_artifact(name: &str, write: impl FnOnce(&mut Vec<u8>) -> blufs::Result<()>) -> Result<Artifact> {
    let mut bytes = Vec::new();
    write(&mut bytes)?;
    Ok(Artifact {
        name: name.to_string(),
        bytes,
    })
}

fn json_artifact(name: &str, value: &impl Serialize) -> Artifact {
    let mut bytes = serde_json::to_vec_pretty(value).expect("artifacts serialize");
    bytes.push(b'\n');
    Artifact {
        name: name.to_string(),
        bytes,
    }
}

/// Runs `cmd` and writes its artifacts into `out`. Returns the written paths.
pub fn execute(cmd: Command, cfg: &RunConfig, out: &Path, opts: &Options) -> Result<Vec<PathBuf>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("`--workers`: {e}")))?;
    let (raw, dataset_name) = load_source(&cfg.dataset)?;
    let dataset_sha256 = match &cfg.dataset {
        DatasetSource::Path(path) => Some(sha256_hex(&std::fs::read(path).map_err(|e| CliError::io(path, e))?)),
        DatasetSource::Synthetic(_) => None,
    };

    let ds = if cmd == Command::Synth {
        if !matches!(cfg.dataset, DatasetSource::Synthetic(_)) {
            return Err(CliError::Config("`dataset`: synth needs a synthetic spec, not a path".into()));
        }
        raw
    } else if cfg.standardize {
        standardize(&raw)
    } else {
        raw
    };
    let resolved = if cmd == Command::Synth {
        RunConfig {
            output_dir: None,
            ..cfg.clone()
        }
    } else {
        cfg.resolve(&ds)?
    };
    let config_sha256 = sha256_hex(&serde_json::to_vec(&resolved).expect("config serializes"));
    let artifacts = pool.install(|| match cmd {
        Command::Synth => Ok(vec![csv_artifact("dataset.csv", |buf| write_csv(&ds, buf))?]),
        Command::Select => select(&ds, &resolved),
        Command::Trace => trace(&ds, &resolved),
        Command::EvalCluster => eval_cluster(&ds, &resolved, &dataset_name, &config_sha256),
        Command::EvalClassify => eval_classify(&ds, &resolved, &dataset_name, &config_sha256),
        Command::Grid { coarse } => grid(&ds, &resolved, coarse, &dataset_name, &config_sha256),
    })?;

    let meta = Metadata {
        tool: "blufs".into(),
        version: version_string(),
        command: cmd.name().into(),
        coarse: matches!(cmd, Command::Grid { coarse: true }),
        dataset_name,
        dataset_sha256,
        config_sha256,
        config: resolved,
        artifacts: artifacts.iter().map(|a| a.name.clone()).collect(),
    };
    let meta_name = format!("{}.meta.json", cmd.name());
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let mut written = Vec::with_capacity(artifacts.len() + 1);
    for artifact in artifacts.iter().chain(std::iter::once(&json_artifact(&meta_name, &meta))) {
        let path = out.join(&artifact.name);
        std::fs::write(&path, &artifact.bytes).map_err(|e| CliError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Reads a metadata file and replays its command into `out`.
pub fn rerun(metadata: &Path, out: &Path, opts: &Options) -> Result<Vec<PathBuf>> {
    let text = std::fs::read_to_string(metadata).map_err(|e| CliError::io(metadata, e))?;
    let meta: Metadata = serde_json::from_str(&text).map_err(|e| CliError::Metadata {
        path: metadata.to_path_buf(),
        message: e.to_string(),
    })?;
    let cmd = Command::from_metadata(&meta).ok_or_else(|| CliError::Metadata {
        path: metadata.to_path_buf(),
        message: format!("unknown command `{}`", meta.command),
    })?;
    if meta.version != version_string() {
        log::warn!("metadata was written by {}, replaying with {}", meta.version, version_string());
    }
    meta.config.validate()?;
    execute(cmd, &meta.config, out, opts)
}

fn solve(ds: &Dataset, cfg: &BlufsConfig) -> blufs::Result<SolverState> {
    let graph = build_similarity(ds.features(), cfg.k, cfg.sigma)?;
    let s_hat = normalize_affinity(&graph)?;
    run_pam(ds.features(), &s_hat, cfg)
}

fn rank(ds: &Dataset, cfg: &RunConfig, m: usize) -> blufs::Result<FeatureRanking> {
    let mut solver = cfg.resolved_solver();
    solver.s = m;
    match cfg.method {
        Method::Blufs => Ok(feature_ranking(&solve(ds, &solver)?.w)),
        Method::Lapscore => {
            let graph = build_similarity(ds.features(), solver.k, solver.sigma)?;
            lapscore(ds.features(), &graph, m)
        }
    }
}

fn ranking_artifact(ds: &Dataset, ranking: &FeatureRanking) -> Result<Artifact> {
    csv_artifact("ranking.csv", |buf| ranking.write_csv(|i| ds.feature_name(i), buf))
}

fn select(ds: &Dataset, cfg: &RunConfig) -> Result<Vec<Artifact>> {
    match cfg.method {
        Method::Blufs => {
            let state = solve(ds, &cfg.resolved_solver())?;
            let ranking = feature_ranking(&state.w);
            log::info!("selected features {:?} after {} iterations", ranking.selected, state.iter);
            Ok(vec![
                ranking_artifact(ds, &ranking)?,
                csv_artifact("trace.csv", |buf| state.write_trace(buf))?,
            ])
        }
        Method::Lapscore => Ok(vec![ranking_artifact(ds, &rank(ds, cfg, cfg.s)?)?]),
    }
}

fn trace(ds: &Dataset, cfg: &RunConfig) -> Result<Vec<Artifact>> {
    if cfg.method != Method::Blufs {
        return Err(CliError::Config("`method`: trace needs the blufs solver".into()));
    }
    let state = solve(ds, &cfg.resolved_solver())?;
    Ok(vec![csv_artifact("trace.csv", |buf| state.write_trace(buf))?])
}

#[derive(Serialize)]
struct ReportDocument<'a> {
    version: String,
    dataset_name: &'a str,
    config_sha256: &'a str,
    method: Method,
    report: &'a EvalReport,
}

fn report_artifacts(
    stem: &str,
    report: &EvalReport,
    cfg: &RunConfig,
    dataset_name: &str,
    config_sha: &str,
) -> Result<Vec<Artifact>> {
    let doc = ReportDocument {
        version: version_string(),
        dataset_name,
        config_sha256: config_sha,
        method: cfg.method,
        report,
    };
    Ok(vec![
        csv_artifact(&format!("{stem}.csv"), |buf| report.write_csv(buf))?,
        json_artifact(&format!("{stem}.json"), &doc),
    ])
}

/// Runs one protocol per feature count on the worker pool and concatenates
/// the rows in count order.
fn per_count(
    cfg: &RunConfig,
    protocol: impl Fn(usize) -> blufs::Result<EvalReport> + Sync,
) -> Result<EvalReport> {
    let parts = cfg
        .resolved_counts()
        .par_iter()
        .map(|&m| protocol(m))
        .collect::<blufs::Result<Vec<_>>>()?;
    Ok(EvalReport {
        rows: parts.into_iter().flat_map(|r| r.rows).collect(),
    })
}

fn eval_cluster(ds: &Dataset, cfg: &RunConfig, name: &str, sha: &str) -> Result<Vec<Artifact>> {
    let selector = |d: &Dataset, m: usize| rank(d, cfg, m);
    let report = per_count(cfg, |m| clustering_protocol(ds, &selector, &[m], cfg.resolved_seeds()))?;
    log::info!("\n{}", format_table(&[(name, &report)], Metric::Acc));
    report_artifacts("eval_cluster", &report, cfg, name, sha)
}

fn eval_classify(ds: &Dataset, cfg: &RunConfig, name: &str, sha: &str) -> Result<Vec<Artifact>> {
    let selector = |d: &Dataset, m: usize| rank(d, cfg, m);
    let report = per_count(cfg, |m| {
        classification_protocol(ds, &selector, &[m], cfg.splits, cfg.split_fraction, cfg.knn_k, cfg.seed)
    })?;
    report_artifacts("eval_classify", &report, cfg, name, sha)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct GridCell {
    lambda: f64,
    alpha: f64,
    beta: f64,
    mu: f64,
    acc_mean: f64,
    acc_std: f64,
    nmi_mean: f64,
    nmi_std: f64,
}

fn grid_cell(ds: &Dataset, cfg: &RunConfig, (lambda, alpha, beta, mu): (f64, f64, f64, f64)) -> blufs::Result<GridCell> {
    let mut solver = cfg.resolved_solver();
    solver.lambda = lambda;
    solver.alpha = alpha;
    solver.beta = beta;
    solver.mu = mu;
    let ranking = feature_ranking(&solve(ds, &solver)?.w);
    let reduced = reduce(ds, &ranking, cfg.s)?;
    let truth = ds
        .labels()
        .ok_or_else(|| blufs::Error::InvalidArgument("grid search needs a labeled dataset".into()))?;
    let classes = ds.class_count().expect("labeled datasets carry a class count");
    let mut accs = Vec::new();
    let mut nmis = Vec::new();
    for &seed in cfg.resolved_seeds() {
        let pred = kmeans(reduced.features(), classes, seed)?;
        accs.push(acc(&pred, truth)?);
        nmis.push(nmi(truth, &pred)?);
    }
    let (acc_mean, acc_std) = mean_std(&accs);
    let (nmi_mean, nmi_std) = mean_std(&nmis);
    Ok(GridCell {
        lambda,
        alpha,
        beta,
        mu,
        acc_mean,
        acc_std,
        nmi_mean,
        nmi_std,
    })
}

fn run_cells(ds: &Dataset, cfg: &RunConfig, cells: &[(f64, f64, f64, f64)]) -> blufs::Result<Vec<GridCell>> {
    cells.par_iter().map(|&p| grid_cell(ds, cfg, p)).collect()
}

/// Highest mean ACC, earliest cell on ties.
fn best_cell(cells: &[GridCell]) -> &GridCell {
    cells
        .iter()
        .reduce(|best, c| if c.acc_mean > best.acc_mean { c } else { best })
        .expect("grid is nonempty")
}

fn grid(ds: &Dataset, cfg: &RunConfig, coarse: bool, name: &str, sha: &str) -> Result<Vec<Artifact>> {
    if cfg.method != Method::Blufs {
        return Err(CliError::Config("`method`: grid tunes the blufs solver".into()));
    }
    let pairs: Vec<(f64, f64)> = GRID.iter().flat_map(|&a| GRID.iter().map(move |&b| (a, b))).collect();
    let cells = if coarse {
        // (alpha, beta) with mu = lambda = 1, then (mu, lambda) at the best pair
        let first: Vec<_> = pairs.iter().map(|&(alpha, beta)| (1.0, alpha, beta, 1.0)).collect();
        let mut cells = run_cells(ds, cfg, &first)?;
        let (alpha, beta) = {
            let best = best_cell(&cells);
            (best.alpha, best.beta)
        };
        let second: Vec<_> = pairs.iter().map(|&(mu, lambda)| (lambda, alpha, beta, mu)).collect();
        cells.extend(run_cells(ds, cfg, &second)?);
        cells
    } else {
        let all: Vec<_> = pairs
            .iter()
            .flat_map(|&(lambda, alpha)| pairs.iter().map(move |&(beta, mu)| (lambda, alpha, beta, mu)))
            .collect();
        run_cells(ds, cfg, &all)?
    };

    let mut table = Vec::new();
    {
        let mut wtr = csv::Writer::from_writer(&mut table);
        for cell in &cells {
            wtr.serialize(cell).map_err(blufs::Error::from)?;
        }
        wtr.flush().map_err(|e| CliError::io("grid.csv", e))?;
    }
    #[derive(Serialize)]
    struct Best<'a> {
        version: String,
        dataset_name: &'a str,
        config_sha256: &'a str,
        feature_count: usize,
        cells: usize,
        best: &'a GridCell,
    }
    let best = Best {
        version: version_string(),
        dataset_name: name,
        config_sha256: sha,
        feature_count: cfg.s,
        cells: cells.len(),
        best: best_cell(&cells),
    };
    Ok(vec![
        Artifact {
            name: "grid.csv".into(),
            bytes: table,
        },
        json_artifact("grid_best.json", &best),
    ])
}
