//! Cosine pre-weighting and ramp filtering of cone-beam projections.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::ProjectionStack;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Apodization {
    #[default]
    None,
    Hann,
}

pub fn next_pow2(n: usize) -> usize {
    n.max(1).next_power_of_two()
}

/// Ramp filter applied by frequency-domain multiplication on a zero-padded row.
///
/// The frequency response is the sampled ramp `|k| / (N·τ)`, which equals
/// circular convolution with the N-periodic discrete Ram-Lak kernel times the
/// sample spacing τ. Its DC gain is exactly zero.
pub struct RampFilter {
    len: usize,
    padded: usize,
    response: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl RampFilter {
    /// Filter for rows of `len` samples spaced `spacing` apart, padded to the
    /// next power of two ≥ 2·len.
    pub fn new(len: usize, spacing: f64, apodization: Apodization) -> Self {
        let padded = next_pow2(2 * len);
        let response = (0..padded)
            .map(|k| {
                let kw = if k <= padded / 2 { k } else { padded - k } as f64;
                let ramp = kw / (padded as f64 * spacing);
                let window = match apodization {
                    Apodization::None => 1.0,
                    Apodization::Hann => {
                        0.5 * (1.0 + (std::f64::consts::TAU * kw / padded as f64).cos())
                    }
                };
                ramp * window
            })
            .collect();
        let mut planner = FftPlanner::new();
        RampFilter {
            len,
            padded,
            response,
            fwd: planner.plan_fft_forward(padded),
            inv: planner.plan_fft_inverse(padded),
        }
    }

    pub fn padded_len(&self) -> usize {
        self.padded
    }

    /// Full padded-length output of the circular convolution.
    pub fn apply_padded(&self, row: &[f64]) -> Vec<f64> {
        assert_eq!(row.len(), self.len, "row length does not match filter");
        let mut buf: Vec<Complex<f64>> = (0..self.padded)
            .map(|i| Complex::new(if i < self.len { row[i] } else { 0.0 }, 0.0))
            .collect();
        self.fwd.process(&mut buf);
        for (b, h) in buf.iter_mut().zip(&self.response) {
            *b *= *h;
        }
        self.inv.process(&mut buf);
        let scale = 1.0 / self.padded as f64;
        buf.iter().map(|c| c.re * scale).collect()
    }

    /// Filters `row` in place, keeping the first `len` output samples.
    pub fn apply(&self, row: &mut [f64]) {
        let out = self.apply_padded(row);
        row.copy_from_slice(&out[..self.len]);
    }
}

/// Cosine-weights every detector pixel by `sdd / √(sdd² + u² + v²)` and ramp
/// filters each detector row along u.
///
/// The ramp sample spacing is the detector pitch scaled to the isocenter
/// (`du · sod / sdd`), which is the convention the FDK backprojector expects.
pub fn fdk_filter(p: &ProjectionStack, apodization: Apodization) -> Result<ProjectionStack> {
    let g = p.geometry().clone();
    g.validate()?;
    let nu = g.nu();
    let nv = g.nv();
    let tau = g.det_spacing_mm[0] * g.sod_mm / g.sdd_mm;
    let filter = RampFilter::new(nu, tau, apodization);
    let sdd2 = g.sdd_mm * g.sdd_mm;
    let mut out = vec![0.0f32; p.data().len()];
    out.par_chunks_mut(nu)
        .zip(p.data().par_chunks(nu))
        .enumerate()
        .for_each(|(row_idx, (dst, src))| {
            let v = g.v_mm(row_idx % nv);
            let mut row: Vec<f64> = src
                .iter()
                .enumerate()
                .map(|(iu, &x)| {
                    let u = g.u_mm(iu);
                    x as f64 * g.sdd_mm / (sdd2 + u * u + v * v).sqrt()
                })
                .collect();
            filter.apply(&mut row);
            for (d, r) in dst.iter_mut().zip(&row) {
                *d = *r as f32;
            }
        });
    ProjectionStack::new(g, out)
}
