//! Boundary-face surfaces and normalized surface dice.

use std::collections::HashMap;

use super::EmptyPolicy;
use crate::error::{Error, Result};
use crate::volume::{Grid, Mask3};

/// Centers of the voxel faces separating foreground from background.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfacePointSet {
    pub points: Vec<[f64; 3]>,
    pub grid: Grid,
}

impl SurfacePointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

const FACES: [([isize; 3], usize, f64); 6] = [
    ([-1, 0, 0], 0, -0.5),
    ([1, 0, 0], 0, 0.5),
    ([0, -1, 0], 1, -0.5),
    ([0, 1, 0], 1, 0.5),
    ([0, 0, -1], 2, -0.5),
    ([0, 0, 1], 2, 0.5),
];

/// One point per exposed face (6-connectivity; the grid border counts as background).
pub fn extract_surface(m: &Mask3) -> SurfacePointSet {
    let grid = *m.grid();
    let mut points = Vec::new();
    for idx in 0..grid.len() {
        if !m.bits()[idx] {
            continue;
        }
        let [i, j, k] = grid.coords(idx);
        let c = grid.center_mm(i, j, k);
        for (d, axis, half) in FACES {
            if !m.get_signed(i as isize + d[0], j as isize + d[1], k as isize + d[2]) {
                let mut p = c;
                p[axis] += half * grid.spacing_mm[axis];
                points.push(p);
            }
        }
    }
    SurfacePointSet { points, grid }
}

/// Uniform-bucket spatial index answering exact "any point within τ" queries.
pub struct PointIndex<'a> {
    points: &'a [[f64; 3]],
    cell: f64,
    buckets: HashMap<[i64; 3], Vec<u32>>,
}

impl<'a> PointIndex<'a> {
    pub fn new(points: &'a [[f64; 3]], cell: f64) -> Self {
        assert!(cell > 0.0);
        let mut buckets: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
        for (n, p) in points.iter().enumerate() {
            buckets.entry(Self::key(p, cell)).or_default().push(n as u32);
        }
        PointIndex { points, cell, buckets }
    }

    fn key(p: &[f64; 3], cell: f64) -> [i64; 3] {
        p.map(|c| (c / cell).floor() as i64)
    }

    /// Whether some indexed point lies at Euclidean distance ≤ `tau` from `q`.
    /// Compares squared distances, so results match a brute-force scan exactly.
    pub fn any_within(&self, q: &[f64; 3], tau: f64) -> bool {
        let tau2 = tau * tau;
        let reach = (tau / self.cell).ceil() as i64;
        let k = Self::key(q, self.cell);
        for dz in -reach..=reach {
            for dy in -reach..=reach {
                for dx in -reach..=reach {
                    if let Some(ids) = self.buckets.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        for &id in ids {
                            if squared_distance(&self.points[id as usize], q) <= tau2 {
                                return true;
                            }
                        }
                    }
                }
            }
        }
        false
    }
}

#[inline]
pub fn squared_distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

/// Counts of surface points within τ of the opposing surface: `(hits_p, |S_P|, hits_g, |S_G|)`.
pub fn surface_overlap_counts(sp: &SurfacePointSet, sg: &SurfacePointSet, tau_mm: f64) -> (usize, usize, usize, usize) {
    let within = |from: &SurfacePointSet, to: &SurfacePointSet| -> usize {
        if to.is_empty() {
            return 0;
        }
        let index = PointIndex::new(&to.points, tau_mm);
        from.points.iter().filter(|q| index.any_within(q, tau_mm)).count()
    };
    (within(sp, sg), sp.len(), within(sg, sp), sg.len())
}

/// Normalized surface dice at tolerance τ (mm): the fraction of both surfaces
/// lying within τ of the other one.
pub fn nsd(p: &Mask3, g: &Mask3, tau_mm: f64, policy: EmptyPolicy) -> Result<f64> {
    p.grid().ensure_same(g.grid(), "nsd")?;
    if !(tau_mm > 0.0) || !tau_mm.is_finite() {
        return Err(Error::param(format!("NSD tolerance must be positive, got {tau_mm}")));
    }
    if let Some(v) = policy.resolve(p.is_empty(), g.is_empty()) {
        return Ok(v);
    }
    let sp = extract_surface(p);
    let sg = extract_surface(g);
    let (hp, np, hg, ng) = surface_overlap_counts(&sp, &sg, tau_mm);
    Ok((hp + hg) as f64 / (np + ng) as f64)
}
