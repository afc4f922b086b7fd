//! Pixel-wise and anatomy-aware evaluation metrics.

mod overlap;
mod pixel;
mod surface;
mod topology;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use overlap::{cl_dice, dsc, topology_precision_sensitivity};
pub use pixel::{psnr, ssim, SsimParams};
pub use surface::{extract_surface, nsd, squared_distance, surface_overlap_counts, PointIndex, SurfacePointSet};
pub use topology::{
    count_background_components, count_components, is_simple, label_components, skeletonize, Connectivity,
};

/// Scores for comparisons where a mask is empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmptyPolicy {
    pub both_empty: f64,
    pub one_empty: f64,
}

impl Default for EmptyPolicy {
    fn default() -> Self {
        EmptyPolicy {
            both_empty: 1.0,
            one_empty: 0.0,
        }
    }
}

impl EmptyPolicy {
    pub fn resolve(&self, p_empty: bool, g_empty: bool) -> Option<f64> {
        match (p_empty, g_empty) {
            (true, true) => Some(self.both_empty),
            (true, false) | (false, true) => Some(self.one_empty),
            (false, false) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricParams {
    pub nsd_tau_mm: f64,
    pub ssim: SsimParams,
    pub empty_policy: EmptyPolicy,
}

impl Default for MetricParams {
    fn default() -> Self {
        MetricParams {
            nsd_tau_mm: 2.0,
            ssim: SsimParams::default(),
            empty_policy: EmptyPolicy::default(),
        }
    }
}

impl MetricParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.nsd_tau_mm > 0.0) || !self.nsd_tau_mm.is_finite() {
            return Err(Error::param(format!("nsd_tau_mm must be positive, got {}", self.nsd_tau_mm)));
        }
        Ok(())
    }
}
