//! Exact ray/voxel intersection lengths (Siddon traversal) and the matched adjoint.

use rayon::prelude::*;

use super::{ConeBeamGeometry, ProjectionStack};
use crate::error::Result;
use crate::volume::{Grid, Volume3};

/// Upper bound on backprojection accumulators alive at once. The reduction
/// order depends only on this constant and the view count, never on the
/// thread pool size.
const MAX_BACKPROJECT_GROUPS: usize = 8;

/// Walks the segment `src → dst` through the voxel grid, calling
/// `visit(voxel_index, chord_length_mm)` for every voxel crossed with
/// positive length, in order along the ray.
pub fn trace_ray(grid: &Grid, src: [f64; 3], dst: [f64; 3], mut visit: impl FnMut(usize, f64)) {
    let dir = [dst[0] - src[0], dst[1] - src[1], dst[2] - src[2]];
    let length = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
    if length == 0.0 {
        return;
    }

    let mut lo = [0.0; 3];
    let mut alpha_in: f64 = 0.0;
    let mut alpha_out: f64 = 1.0;
    for a in 0..3 {
        lo[a] = grid.origin_mm[a] - 0.5 * grid.spacing_mm[a];
        let hi = lo[a] + grid.dims[a] as f64 * grid.spacing_mm[a];
        if dir[a] == 0.0 {
            if src[a] < lo[a] || src[a] > hi {
                return;
            }
            continue;
        }
        let t0 = (lo[a] - src[a]) / dir[a];
        let t1 = (hi - src[a]) / dir[a];
        alpha_in = alpha_in.max(t0.min(t1));
        alpha_out = alpha_out.min(t0.max(t1));
    }
    if alpha_in >= alpha_out {
        return;
    }

    let mut idx = [0isize; 3];
    let mut next = [f64::INFINITY; 3];
    let mut step = [0isize; 3];
    for a in 0..3 {
        let n = grid.dims[a] as isize;
        let s = grid.spacing_mm[a];
        let f = (src[a] + alpha_in * dir[a] - lo[a]) / s;
        let i = if dir[a] > 0.0 {
            f.floor() as isize
        } else if dir[a] < 0.0 {
            f.ceil() as isize - 1
        } else {
            f.floor() as isize
        };
        idx[a] = i.clamp(0, n - 1);
        if dir[a] > 0.0 {
            step[a] = 1;
            next[a] = (lo[a] + (idx[a] + 1) as f64 * s - src[a]) / dir[a];
        } else if dir[a] < 0.0 {
            step[a] = -1;
            next[a] = (lo[a] + idx[a] as f64 * s - src[a]) / dir[a];
        }
    }

    let [nx, ny, nz] = grid.dims.map(|d| d as isize);
    let mut alpha = alpha_in;
    loop {
        let a = if next[0] <= next[1] && next[0] <= next[2] {
            0
        } else if next[1] <= next[2] {
            1
        } else {
            2
        };
        let end = next[a].min(alpha_out);
        if end > alpha {
            let voxel = (idx[0] + nx * (idx[1] + ny * idx[2])) as usize;
            visit(voxel, (end - alpha) * length);
            alpha = end;
        }
        if next[a] >= alpha_out {
            break;
        }
        idx[a] += step[a];
        if idx[a] < 0 || idx[a] >= [nx, ny, nz][a] {
            break;
        }
        let plane = if step[a] > 0 { idx[a] + 1 } else { idx[a] };
        next[a] = (lo[a] + plane as f64 * grid.spacing_mm[a] - src[a]) / dir[a];
    }
}

/// Line integral through `vol` plus the total chord length of the ray.
#[inline]
fn integrate<T: Copy + Into<f64>>(grid: &Grid, src: [f64; 3], dst: [f64; 3], vol: &[T]) -> (f64, f64) {
    let mut sum = 0.0;
    let mut len = 0.0;
    trace_ray(grid, src, dst, |i, l| {
        sum += vol[i].into() * l;
        len += l;
    });
    (sum, len)
}

/// Ray-driven forward projection: each detector pixel receives the exact line
/// integral of the piecewise-constant volume along the source → pixel ray.
pub fn forward_project(v: &Volume3, g: &ConeBeamGeometry) -> Result<ProjectionStack> {
    g.validate()?;
    let grid = *v.grid();
    let nu = g.nu();
    let ppv = g.pixels_per_view();
    let mut data = vec![0.0f32; g.data_len()];
    let hits: usize = data
        .par_chunks_mut(nu)
        .enumerate()
        .map(|(row, out)| {
            let view = row / g.nv();
            let iv = row % g.nv();
            let src = g.source(view);
            let mut hit = 0;
            for (iu, o) in out.iter_mut().enumerate() {
                let (sum, len) = integrate(&grid, src, g.pixel_position(view, iu, iv), v.data());
                *o = sum as f32;
                hit += usize::from(len > 0.0);
            }
            hit
        })
        .sum();
    debug_assert_eq!(data.len(), g.n_views * ppv);
    let mut stack = ProjectionStack::new(g.clone(), data)?;
    if hits == 0 {
        log::warn!("volume lies entirely outside the field of view; all projections are zero");
        stack.set_out_of_fov(true);
    }
    Ok(stack)
}

/// Single-view forward projection into `out` (nv × nu), also returning per-ray
/// chord lengths through the grid (the row sums of the system matrix).
pub(crate) fn project_view_with_lengths<T: Copy + Into<f64> + Sync>(
    vol: &[T],
    grid: &Grid,
    g: &ConeBeamGeometry,
    view: usize,
    out: &mut [f64],
    lengths: &mut [f64],
) {
    let nu = g.nu();
    let src = g.source(view);
    out.par_chunks_mut(nu)
        .zip(lengths.par_chunks_mut(nu))
        .enumerate()
        .for_each(|(iv, (o_row, l_row))| {
            for iu in 0..nu {
                let (sum, len) = integrate(grid, src, g.pixel_position(view, iu, iv), vol);
                o_row[iu] = sum;
                l_row[iu] = len;
            }
        });
}

/// Single-view adjoint: `num += Aᵥᵀ values`, `den += Aᵥᵀ 1`.
pub(crate) fn backproject_view_weighted(
    values: &[f64],
    grid: &Grid,
    g: &ConeBeamGeometry,
    view: usize,
    num: &mut [f64],
    den: &mut [f64],
) {
    let src = g.source(view);
    for iv in 0..g.nv() {
        for iu in 0..g.nu() {
            let y = values[iv * g.nu() + iu];
            trace_ray(grid, src, g.pixel_position(view, iu, iv), |i, l| {
                num[i] += y * l;
                den[i] += l;
            });
        }
    }
}

fn backproject_views_into(p: &ProjectionStack, grid: &Grid, views: std::ops::Range<usize>, acc: &mut [f64]) {
    let g = p.geometry();
    for view in views {
        let src = g.source(view);
        let data = p.view(view);
        for iv in 0..g.nv() {
            for iu in 0..g.nu() {
                let y = data[iv * g.nu() + iu] as f64;
                if y == 0.0 {
                    continue;
                }
                trace_ray(grid, src, g.pixel_position(view, iu, iv), |i, l| acc[i] += y * l);
            }
        }
    }
}

/// Unweighted adjoint of [`forward_project`]: scatters each projection value
/// along its ray with the same intersection lengths.
pub fn backproject(p: &ProjectionStack, grid: &Grid) -> Result<Volume3> {
    grid.validate()?;
    p.geometry().validate()?;
    let n_views = p.geometry().n_views;
    let groups = n_views.min(MAX_BACKPROJECT_GROUPS);
    let per = n_views.div_ceil(groups);
    let partials: Vec<Vec<f64>> = (0..groups)
        .into_par_iter()
        .map(|gi| {
            let mut acc = vec![0.0f64; grid.len()];
            let start = (gi * per).min(n_views);
            let end = ((gi + 1) * per).min(n_views);
            backproject_views_into(p, grid, start..end, &mut acc);
            acc
        })
        .collect();
    // summed in group order for bit-reproducibility
    let mut total = vec![0.0f64; grid.len()];
    for part in &partials {
        for (t, v) in total.iter_mut().zip(part) {
            *t += v;
        }
    }
    Volume3::from_f64(*grid, &total)
}
