//! Pixel-wise image quality: PSNR and slice-wise SSIM.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::Volume3;

/// Peak signal-to-noise ratio in dB, `10·log10(range² / MSE)`.
/// Identical volumes yield `f64::INFINITY`.
pub fn psnr(reference: &Volume3, test: &Volume3, data_range: f64) -> Result<f64> {
    reference.grid().ensure_same(test.grid(), "psnr")?;
    if !(data_range > 0.0) || !data_range.is_finite() {
        return Err(Error::param(format!("data range must be positive, got {data_range}")));
    }
    let sq: f64 = reference
        .data()
        .iter()
        .zip(test.data())
        .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
        .sum();
    let mse = sq / reference.data().len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (data_range * data_range / mse).log10())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub data_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        SsimParams {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            data_range: 1.0,
        }
    }
}

impl SsimParams {
    /// Normalized 1-D Gaussian window.
    pub fn kernel(&self) -> Vec<f64> {
        let c = (self.window as f64 - 1.0) * 0.5;
        let w: Vec<f64> = (0..self.window)
            .map(|i| (-(i as f64 - c).powi(2) / (2.0 * self.sigma * self.sigma)).exp())
            .collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    }
}

/// Valid-mode separable filtering of an `nx × ny` slice.
fn filter_valid(img: &[f64], nx: usize, ny: usize, kernel: &[f64]) -> Vec<f64> {
    let w = kernel.len();
    let (ox, oy) = (nx + 1 - w, ny + 1 - w);
    let mut rows = vec![0.0; ox * ny];
    for j in 0..ny {
        for i in 0..ox {
            rows[j * ox + i] = (0..w).map(|t| kernel[t] * img[j * nx + i + t]).sum();
        }
    }
    let mut out = vec![0.0; ox * oy];
    for j in 0..oy {
        for i in 0..ox {
            out[j * ox + i] = (0..w).map(|t| kernel[t] * rows[(j + t) * ox + i]).sum();
        }
    }
    out
}

fn ssim_slice(a: &[f64], b: &[f64], nx: usize, ny: usize, params: &SsimParams, kernel: &[f64]) -> f64 {
    let c1 = (params.k1 * params.data_range).powi(2);
    let c2 = (params.k2 * params.data_range).powi(2);
    let aa: Vec<f64> = a.iter().map(|x| x * x).collect();
    let bb: Vec<f64> = b.iter().map(|x| x * x).collect();
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    let mu_a = filter_valid(a, nx, ny, kernel);
    let mu_b = filter_valid(b, nx, ny, kernel);
    let e_aa = filter_valid(&aa, nx, ny, kernel);
    let e_bb = filter_valid(&bb, nx, ny, kernel);
    let e_ab = filter_valid(&ab, nx, ny, kernel);
    let n = mu_a.len();
    let total: f64 = (0..n)
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .sum();
    total / n as f64
}

/// Structural similarity with a Gaussian window, evaluated on each axial
/// (z) slice over the positions where the window fits, then averaged over slices.
pub fn ssim(reference: &Volume3, test: &Volume3, params: &SsimParams) -> Result<f64> {
    reference.grid().ensure_same(test.grid(), "ssim")?;
    let [nx, ny, nz] = reference.grid().dims;
    if params.window == 0 || nx < params.window || ny < params.window {
        return Err(Error::param(format!(
            "slice {nx}×{ny} is smaller than the {}-pixel SSIM window",
            params.window
        )));
    }
    if !(params.sigma > 0.0 && params.data_range > 0.0) {
        return Err(Error::param("SSIM sigma and data range must be positive"));
    }
    let kernel = params.kernel();
    let slice = nx * ny;
    let mut acc = 0.0;
    for k in 0..nz {
        let a: Vec<f64> = reference.data()[k * slice..(k + 1) * slice].iter().map(|&v| v as f64).collect();
        let b: Vec<f64> = test.data()[k * slice..(k + 1) * slice].iter().map(|&v| v as f64).collect();
        acc += ssim_slice(&a, &b, nx, ny, params, &kernel);
    }
    Ok(acc / nz as f64)
}
