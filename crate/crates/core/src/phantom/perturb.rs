use crate::error::{Error, Result};
use crate::volume::{LabelVolume, Mask3, Volume3};

/// Shell thickness (voxels) sampled for a structure's surrounding tissue.
const SHELL_VOXELS: isize = 2;

/// Mean intensity of label-0 voxels within a 2-voxel ball around the structure.
/// Returns 0 when the structure has no such neighbours.
pub fn local_background(v: &Volume3, lv: &LabelVolume, label: u16) -> Result<f64> {
    v.grid().ensure_same(lv.grid(), "local background")?;
    lv.info(label)?;
    let grid = *lv.grid();
    let [nx, ny, nz] = grid.dims.map(|d| d as isize);
    let mut in_shell = vec![false; grid.len()];
    for (idx, &l) in lv.labels().iter().enumerate() {
        if l != label {
            continue;
        }
        let [i, j, k] = grid.coords(idx).map(|c| c as isize);
        for dk in -SHELL_VOXELS..=SHELL_VOXELS {
            for dj in -SHELL_VOXELS..=SHELL_VOXELS {
                for di in -SHELL_VOXELS..=SHELL_VOXELS {
                    if di * di + dj * dj + dk * dk > SHELL_VOXELS * SHELL_VOXELS {
                        continue;
                    }
                    let (a, b, c) = (i + di, j + dj, k + dk);
                    if a >= 0 && b >= 0 && c >= 0 && a < nx && b < ny && c < nz {
                        let n = grid.index(a as usize, b as usize, c as usize);
                        if lv.labels()[n] == 0 {
                            in_shell[n] = true;
                        }
                    }
                }
            }
        }
    }
    let (sum, count) = in_shell
        .iter()
        .zip(v.data())
        .filter(|(&s, _)| s)
        .fold((0.0, 0usize), |(s, c), (_, &x)| (s + x as f64, c + 1));
    Ok(if count == 0 { 0.0 } else { sum / count as f64 })
}

/// Replaces one structure's voxels with its surrounding background intensity.
pub fn ablate_structure(v: &Volume3, lv: &LabelVolume, label: u16) -> Result<Volume3> {
    if label == 0 {
        return Err(Error::param("label 0 is background and cannot be ablated"));
    }
    let fill = local_background(v, lv, label)? as f32;
    let mut out = v.clone();
    for (x, &l) in out.data_mut().iter_mut().zip(lv.labels()) {
        if l == label {
            *x = fill;
        }
    }
    Ok(out)
}

/// A requested millimetre offset snapped to whole voxels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOffset {
    pub voxels: [i64; 3],
    /// Requested minus applied offset, in mm.
    pub rounding_mm: [f64; 3],
}

/// Translates a mask by the nearest whole-voxel offset; content shifted past
/// the border is dropped.
pub fn shift_mask(m: &Mask3, offset_mm: [f64; 3]) -> (Mask3, GridOffset) {
    let grid = *m.grid();
    let voxels = [0, 1, 2].map(|a| (offset_mm[a] / grid.spacing_mm[a]).round() as i64);
    let rounding_mm = [0, 1, 2].map(|a| offset_mm[a] - voxels[a] as f64 * grid.spacing_mm[a]);
    let dims = grid.dims.map(|d| d as i64);
    let mut out = Mask3::empty(grid);
    for idx in 0..grid.len() {
        if !m.bits()[idx] {
            continue;
        }
        let c = grid.coords(idx);
        let t = [0, 1, 2].map(|a| c[a] as i64 + voxels[a]);
        if (0..3).all(|a| t[a] >= 0 && t[a] < dims[a]) {
            out.set(t[0] as usize, t[1] as usize, t[2] as usize, true);
        }
    }
    (out, GridOffset { voxels, rounding_mm })
}

/// Morphological dilation by a Euclidean ball of radius `delta_mm`
/// (voxel-center distances). Non-positive radii return the mask unchanged.
pub fn dilate_mask(m: &Mask3, delta_mm: f64) -> Mask3 {
    if !(delta_mm > 0.0) {
        return m.clone();
    }
    let grid = *m.grid();
    let reach = grid.spacing_mm.map(|s| (delta_mm / s).floor() as isize);
    let mut ball = Vec::new();
    for dk in -reach[2]..=reach[2] {
        for dj in -reach[1]..=reach[1] {
            for di in -reach[0]..=reach[0] {
                let d2 = (di as f64 * grid.spacing_mm[0]).powi(2)
                    + (dj as f64 * grid.spacing_mm[1]).powi(2)
                    + (dk as f64 * grid.spacing_mm[2]).powi(2);
                if d2 <= delta_mm * delta_mm {
                    ball.push([di, dj, dk]);
                }
            }
        }
    }
    let dims = grid.dims.map(|d| d as isize);
    let mut out = m.clone();
    for idx in 0..grid.len() {
        if !m.bits()[idx] {
            continue;
        }
        let [i, j, k] = grid.coords(idx).map(|c| c as isize);
        // the nearest foreground voxel to any outside point lies on the boundary
        let interior = [[-1, 0, 0], [1, 0, 0], [0, -1, 0], [0, 1, 0], [0, 0, -1], [0, 0, 1]]
            .iter()
            .all(|d| m.get_signed(i + d[0], j + d[1], k + d[2]));
        if interior {
            continue;
        }
        for d in &ball {
            let (a, b, c) = (i + d[0], j + d[1], k + d[2]);
            if a >= 0 && b >= 0 && c >= 0 && a < dims[0] && b < dims[1] && c < dims[2] {
                out.set(a as usize, b as usize, c as usize, true);
            }
        }
    }
    out
}
