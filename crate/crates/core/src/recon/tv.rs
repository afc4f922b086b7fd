//! Isotropic total variation with a smoothed gradient magnitude.

use crate::volume::Grid;

/// Smoothing added under the square root so flat regions stay differentiable.
pub const TV_EPSILON: f64 = 1e-8;

#[inline]
fn forward_diffs(x: &[f64], grid: &Grid, i: usize, j: usize, k: usize) -> [f64; 3] {
    let [nx, ny, nz] = grid.dims;
    let idx = grid.index(i, j, k);
    let v = x[idx];
    [
        if i + 1 < nx { x[idx + 1] - v } else { 0.0 },
        if j + 1 < ny { x[idx + nx] - v } else { 0.0 },
        if k + 1 < nz { x[idx + nx * ny] - v } else { 0.0 },
    ]
}

/// `Σ √(dx² + dy² + dz² + ε)` over all voxels, forward differences with
/// replicated boundary.
pub fn total_variation(x: &[f64], grid: &Grid) -> f64 {
    let mut tv = 0.0;
    for idx in 0..grid.len() {
        let [i, j, k] = grid.coords(idx);
        let d = forward_diffs(x, grid, i, j, k);
        tv += (d[0] * d[0] + d[1] * d[1] + d[2] * d[2] + TV_EPSILON).sqrt();
    }
    tv
}

/// Gradient of [`total_variation`] with respect to every voxel.
pub fn tv_gradient(x: &[f64], grid: &Grid) -> Vec<f64> {
    let [nx, ny, _] = grid.dims;
    let mut grad = vec![0.0; grid.len()];
    for idx in 0..grid.len() {
        let [i, j, k] = grid.coords(idx);
        let d = forward_diffs(x, grid, i, j, k);
        let m = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2] + TV_EPSILON).sqrt();
        let (gx, gy, gz) = (d[0] / m, d[1] / m, d[2] / m);
        grad[idx] -= gx + gy + gz;
        if d[0] != 0.0 {
            grad[idx + 1] += gx;
        }
        if d[1] != 0.0 {
            grad[idx + nx] += gy;
        }
        if d[2] != 0.0 {
            grad[idx + nx * ny] += gz;
        }
    }
    grad
}
