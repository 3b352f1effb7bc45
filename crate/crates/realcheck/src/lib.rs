//! realcheck: statistical checks for predictive-uncertainty realism.
//!
//! For regression, the headline test asks whether squared Mahalanobis
//! distances of ground truths under the predicted Gaussians follow a
//! chi-squared law; orientation and tail behavior get their own checks.
//! For classification, uncertainty scores from softmax samples are judged by
//! how well they rank misclassifications (AUROC/AUPRC, rejection analysis).
//! A seeded simulator produces fixtures with known calibration defects.

pub mod classification;
pub mod dataset;
pub mod error;
pub mod linalg;
pub mod regression;
pub mod report;
pub mod simulate;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
