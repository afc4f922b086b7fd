//! Seeded synthetic labeled abdomen phantom and the perturbations used to
//! probe metric sensitivity.

mod perturb;
mod shapes;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{Category, Grid, LabelInfo, LabelTable, LabelVolume, Volume3};

pub use perturb::{ablate_structure, dilate_mask, local_background, shift_mask, GridOffset};
pub use shapes::{Capsule, Shape, Solid};

/// Number of the 8 sub-samples per voxel that must fall inside a shape.
pub const SUBSAMPLE_MAJORITY: usize = 5;

const DEFAULT_SPEC: &str = include_str!("../../data/phantom_default.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodySpec {
    pub center_mm: [f64; 3],
    pub radii_mm: [f64; 3],
    pub attenuation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureSpec {
    pub name: String,
    pub category: Category,
    pub attenuation: f64,
    pub shape: Shape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub seed: u64,
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    /// Background tissue (label 0); voxels outside it are air (0).
    #[serde(default)]
    pub body: Option<BodySpec>,
    pub structures: Vec<StructureSpec>,
}

impl PhantomSpec {
    /// The shipped 64³, 1 mm abdomen layout.
    pub fn default_spec() -> Self {
        serde_json::from_str(DEFAULT_SPEC).expect("shipped default phantom spec parses")
    }

    pub fn default_json() -> &'static str {
        DEFAULT_SPEC
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::param(format!("invalid phantom spec: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, format!("invalid phantom spec: {e}")))
    }

    /// Centered grid on which the phantom is rasterized.
    pub fn grid(&self) -> Result<Grid> {
        Grid::centered(self.dims, self.spacing_mm)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        if self.structures.len() >= u16::MAX as usize {
            return Err(Error::param("too many structures for 16-bit labels"));
        }
        if let Some(body) = &self.body {
            if !body.radii_mm.iter().all(|r| *r > 0.0) || !body.attenuation.is_finite() {
                return Err(Error::param("body needs positive radii and a finite attenuation"));
            }
        }
        let mut names = std::collections::BTreeSet::new();
        for s in &self.structures {
            if !names.insert(s.name.as_str()) {
                return Err(Error::param(format!("duplicate structure name '{}'", s.name)));
            }
            if !s.attenuation.is_finite() {
                return Err(Error::param(format!("structure '{}' has a non-finite attenuation", s.name)));
            }
            s.shape.validate().map_err(|e| Error::param(format!("structure '{}': {e}", s.name)))?;
        }
        Ok(())
    }

    pub fn label_table(&self) -> LabelTable {
        self.structures
            .iter()
            .enumerate()
            .map(|(n, s)| {
                (
                    n as u16 + 1,
                    LabelInfo {
                        name: s.name.clone(),
                        category: s.category,
                    },
                )
            })
            .collect()
    }

    /// Continuous solid of structure `index`, as rasterized by [`make_phantom`].
    pub fn structure_solid(&self, index: usize) -> Result<Solid> {
        let s = self
            .structures
            .get(index)
            .ok_or_else(|| Error::param(format!("no structure at index {index}")))?;
        Ok(s.shape.solid(structure_seed(self.seed, index)))
    }
}

fn structure_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

struct Placed {
    solid: Solid,
    lo: [f64; 3],
    hi: [f64; 3],
}

impl Placed {
    fn new(solid: Solid) -> Self {
        let (lo, hi) = solid.bounds();
        Placed { solid, lo, hi }
    }

    /// Majority vote over the 2×2×2 sub-sample points of the voxel at `c`.
    fn covers(&self, c: [f64; 3], quarter: [f64; 3]) -> bool {
        if (0..3).any(|a| c[a] + 2.0 * quarter[a] < self.lo[a] || c[a] - 2.0 * quarter[a] > self.hi[a]) {
            return false;
        }
        let mut hits = 0;
        for s in 0..8 {
            let p = [0, 1, 2].map(|a| c[a] + if s >> a & 1 == 1 { quarter[a] } else { -quarter[a] });
            if self.solid.contains(p) {
                hits += 1;
                if hits >= SUBSAMPLE_MAJORITY {
                    return true;
                }
            }
        }
        false
    }
}

/// Rasterizes the spec into an intensity volume and a label volume.
/// Structures are labeled 1.. in spec order; any voxel claimed by two
/// structures is an error naming the first colliding pair in scan order.
pub fn make_phantom(spec: &PhantomSpec) -> Result<(Volume3, LabelVolume)> {
    spec.validate()?;
    let grid = spec.grid()?;
    let body = spec.body.as_ref().map(|b| {
        Placed::new(Solid::Ellipsoid {
            center: b.center_mm,
            radii: b.radii_mm,
        })
    });
    let solids: Vec<Placed> = (0..spec.structures.len())
        .map(|n| spec.structure_solid(n).map(Placed::new))
        .collect::<Result<_>>()?;
    let quarter = spec.spacing_mm.map(|s| 0.25 * s);
    let [nx, ny, nz] = grid.dims;
    let slice = nx * ny;

    type SliceResult = std::result::Result<(Vec<f32>, Vec<u16>), (usize, usize)>;
    let slices: Vec<SliceResult> = (0..nz)
        .into_par_iter()
        .map(|k| {
            let mut intensity = vec![0f32; slice];
            let mut labels = vec![0u16; slice];
            for j in 0..ny {
                for i in 0..nx {
                    let c = grid.center_mm(i, j, k);
                    let at = i + nx * j;
                    let mut owner: Option<usize> = None;
                    for (n, s) in solids.iter().enumerate() {
                        if s.covers(c, quarter) {
                            if let Some(first) = owner {
                                return Err((first, n));
                            }
                            owner = Some(n);
                        }
                    }
                    if let Some(n) = owner {
                        labels[at] = n as u16 + 1;
                        intensity[at] = spec.structures[n].attenuation as f32;
                    } else if let (Some(b), Some(bs)) = (&body, &spec.body) {
                        if b.covers(c, quarter) {
                            intensity[at] = bs.attenuation as f32;
                        }
                    }
                }
            }
            Ok((intensity, labels))
        })
        .collect();

    let mut intensity = Vec::with_capacity(grid.len());
    let mut labels = Vec::with_capacity(grid.len());
    for s in slices {
        match s {
            Ok((v, l)) => {
                intensity.extend(v);
                labels.extend(l);
            }
            Err((a, b)) => {
                return Err(Error::Overlap {
                    first: spec.structures[a].name.clone(),
                    second: spec.structures[b].name.clone(),
                })
            }
        }
    }
    Ok((
        Volume3::new(grid, intensity)?,
        LabelVolume::new(grid, labels, spec.label_table())?,
    ))
}
