use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{fdk_filter, Apodization, ConeBeamGeometry, ProjectionStack};
use crate::volume::{Grid, Volume3};

/// Bilinear sample of one filtered view at continuous pixel coordinates; zero outside.
#[inline]
fn bilinear(view: &[f32], nu: usize, nv: usize, fu: f64, fv: f64) -> f64 {
    if fu < 0.0 || fv < 0.0 || fu > (nu - 1) as f64 || fv > (nv - 1) as f64 {
        return 0.0;
    }
    let iu = (fu.floor() as usize).min(nu.saturating_sub(2));
    let iv = (fv.floor() as usize).min(nv.saturating_sub(2));
    let au = fu - iu as f64;
    let av = fv - iv as f64;
    let at = |u: usize, v: usize| -> f64 {
        if u < nu && v < nv {
            view[v * nu + u] as f64
        } else {
            0.0
        }
    };
    (1.0 - av) * ((1.0 - au) * at(iu, iv) + au * at(iu + 1, iv))
        + av * ((1.0 - au) * at(iu, iv + 1) + au * at(iu + 1, iv + 1))
}

/// Feldkamp-Davis-Kress reconstruction for a circular orbit.
///
/// Projections are cosine-weighted and ramp filtered, then backprojected voxel
/// by voxel with the `(sod / (sod − s))²` distance weight, where `s` is the
/// voxel's depth toward the source, and the per-view angular step. The ½
/// factor accounts for every ray being measured twice over a full turn.
pub fn fdk(p: &ProjectionStack, grid: &Grid, apodization: Apodization) -> Result<Volume3> {
    grid.validate()?;
    let g: &ConeBeamGeometry = p.geometry();
    if g.n_views < 2 {
        return Err(Error::param(format!("FDK needs at least 2 views, got {}", g.n_views)));
    }
    let filtered = fdk_filter(p, apodization)?;
    let steps = g.angular_steps();
    let trig: Vec<(f64, f64)> = g.angles_rad.iter().map(|a| a.sin_cos()).collect();
    let (nu, nv) = (g.nu(), g.nv());
    let cu = (nu as f64 - 1.0) * 0.5;
    let cv = (nv as f64 - 1.0) * 0.5;
    let [nx, ny, _] = grid.dims;
    let slice = nx * ny;

    let mut out = vec![0.0f32; grid.len()];
    out.par_chunks_mut(slice).enumerate().for_each(|(k, plane)| {
        let z = grid.origin_mm[2] + k as f64 * grid.spacing_mm[2];
        for j in 0..ny {
            let y = grid.origin_mm[1] + j as f64 * grid.spacing_mm[1];
            for i in 0..nx {
                let x = grid.origin_mm[0] + i as f64 * grid.spacing_mm[0];
                let mut acc = 0.0;
                for (view, &(s, c)) in trig.iter().enumerate() {
                    let depth = g.sod_mm - x * s + y * c;
                    if depth <= 0.0 {
                        continue;
                    }
                    let lateral = x * c + y * s;
                    let mag = g.sdd_mm / depth;
                    let fu = (lateral * mag - g.det_offset_mm[0]) / g.det_spacing_mm[0] + cu;
                    let fv = (z * mag - g.det_offset_mm[1]) / g.det_spacing_mm[1] + cv;
                    let w = g.sod_mm / depth;
                    acc += steps[view] * w * w * bilinear(filtered.view(view), nu, nv, fu, fv);
                }
                plane[j * nx + i] = (0.5 * acc) as f32;
            }
        }
    });
    Volume3::new(*grid, out)
}
