//! Classical reconstruction baselines: FDK, SART and ASD-POCS.

mod asd_pocs;
mod fdk;
mod sart;
mod tv;

pub use asd_pocs::{asd_pocs, AsdPocsDiagnostics, AsdPocsParams, IterationDiagnostics};
pub use fdk::fdk;
pub use sart::{data_residual, sart, sart_with_residuals, view_sequence, SartParams, ViewOrder, SART_ZERO_GUARD};
pub use tv::{total_variation, tv_gradient, TV_EPSILON};
