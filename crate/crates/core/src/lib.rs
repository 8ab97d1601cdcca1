//! Clinical trajectory analysis with elastic principal trees.
//!
//! The crate covers the whole path from a raw mixed-type clinical table to
//! branching trajectories with pseudotime and attached statistics:
//!
//! * [`dataset`]: schema-driven CSV ingestion, z-scores, PCA dimension estimate
//! * [`quantify`]: ordinal quantification, optimal scaling, dummy coding
//! * [`impute`]: missingness filters and SVD-based imputers
//! * [`pca`]: linear pre-reduction before tree fitting
//! * [`elpigraph`]: elastic principal tree fitting, pruning, leaf extension, projection
//! * [`treeanalysis`]: segments, root selection, pseudotime, trajectories
//! * [`stats`]: segment association tests and pseudotime regression
//! * [`survival`]: Nelson–Aalen hazards, Cox regression, log-rank
//! * [`layout`]: Kamada–Kawai layout, point scattering, SVG
//! * [`pipeline`]: the staged pipeline behind the `clintraj` binary

// comparisons are written so that NaN fails them
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dataset;
pub mod elpigraph;
pub mod error;
pub mod impute;
pub mod layout;
pub mod linalg;
pub mod pca;
pub mod pipeline;
pub mod quantify;
pub mod stats;
pub mod survival;
pub mod treeanalysis;

pub use error::{Error, Result};
