//! Clustering and classification evaluation.

mod kmeans;
mod knn;
mod metrics;
mod protocol;

pub use kmeans::{kmeans, kmeans_with_inertia};
pub use knn::{knn_classify, knn_predict};
pub use metrics::{acc, hungarian_max, nmi};
pub use protocol::{
    classification_protocol, clustering_protocol, format_table, mean_std, EvalReport, EvalRow, FeatureSelector, Metric,
};
