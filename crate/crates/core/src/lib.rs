//! Sparse-view cone-beam CT reconstruction baselines (FDK, SART, ASD-POCS)
//! and an anatomy-aware evaluation suite (DSC, NSD, clDice) built around a
//! synthetic labeled phantom.

pub mod bench;
pub mod diffusion;
pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod phantom;
pub mod recon;
pub mod stats;
pub mod volume;

pub use error::{Error, Result};
pub use volume::{binary_mask, window_normalize, Category, Grid, LabelInfo, LabelTable, LabelVolume, Mask3, Volume3};
