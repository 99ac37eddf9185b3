//! Evaluation metrics: transport errors against Gaussian oracles, clustering
//! agreement and quality indices, and nearest-prototype classification.

pub mod classification;
pub mod clustering;
pub mod transport;

pub use classification::{classification_report, classify_nearest_prototype, ClassificationReport};
pub use clustering::{ari, calinski_harabasz, nmi, silhouette, ContingencyTable};
pub use transport::{semidiscrete_w2, stability_gap, MonteCarloEstimate, StabilityCheck};
