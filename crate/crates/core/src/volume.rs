//! Voxel grids: scalar volumes, label volumes and binary masks.
//!
//! All grids store voxels x-fastest, then y, then z. `origin_mm` is the world
//! position of the center of voxel (0, 0, 0).

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape and placement of a voxel grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub origin_mm: [f64; 3],
}

impl Grid {
    pub fn new(dims: [usize; 3], spacing_mm: [f64; 3], origin_mm: [f64; 3]) -> Result<Self> {
        let g = Grid {
            dims,
            spacing_mm,
            origin_mm,
        };
        g.validate()?;
        Ok(g)
    }

    /// Grid whose geometric center sits at the world origin.
    pub fn centered(dims: [usize; 3], spacing_mm: [f64; 3]) -> Result<Self> {
        let origin_mm = [0, 1, 2].map(|a| -((dims[a] as f64 - 1.0) * 0.5) * spacing_mm[a]);
        Grid::new(dims, spacing_mm, origin_mm)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|&d| d == 0) {
            return Err(Error::param(format!("grid dims must be positive, got {:?}", self.dims)));
        }
        if self.spacing_mm.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::param(format!(
                "grid spacing must be positive and finite, got {:?}",
                self.spacing_mm
            )));
        }
        if self.origin_mm.iter().any(|o| !o.is_finite()) {
            return Err(Error::param("grid origin must be finite"));
        }
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let j = (idx / self.dims[0]) % self.dims[1];
        let k = idx / (self.dims[0] * self.dims[1]);
        [i, j, k]
    }

    /// World position (mm) of a voxel center.
    #[inline]
    pub fn center_mm(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [
            self.origin_mm[0] + i as f64 * self.spacing_mm[0],
            self.origin_mm[1] + j as f64 * self.spacing_mm[1],
            self.origin_mm[2] + k as f64 * self.spacing_mm[2],
        ]
    }

    pub fn voxel_volume_mm3(&self) -> f64 {
        self.spacing_mm.iter().product()
    }

    /// Checks that two grids describe the same lattice.
    pub fn ensure_same(&self, other: &Grid, what: &str) -> Result<()> {
        if self != other {
            return Err(Error::param(format!(
                "{what}: grid mismatch ({:?} vs {:?})",
                self.dims, other.dims
            )));
        }
        Ok(())
    }
}

/// Scalar voxel volume (CT attenuation, reconstruction output).
#[derive(Debug, Clone, PartialEq)]
pub struct Volume3 {
    grid: Grid,
    data: Vec<f32>,
}

impl Volume3 {
    pub fn new(grid: Grid, data: Vec<f32>) -> Result<Self> {
        grid.validate()?;
        if data.len() != grid.len() {
            return Err(Error::param(format!(
                "volume data length {} does not match dims {:?}",
                data.len(),
                grid.dims
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("volume contains non-finite values"));
        }
        Ok(Volume3 { grid, data })
    }

    pub fn zeros(grid: Grid) -> Self {
        Volume3 {
            data: vec![0.0; grid.len()],
            grid,
        }
    }

    pub fn filled(grid: Grid, value: f32) -> Self {
        Volume3 {
            data: vec![value; grid.len()],
            grid,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f32 {
        self.data[self.grid.index(i, j, k)]
    }

    /// Builds a volume from f64 values, rounding to f32 storage.
    pub fn from_f64(grid: Grid, data: &[f64]) -> Result<Self> {
        Volume3::new(grid, data.iter().map(|&v| v as f32).collect())
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64).collect()
    }
}

/// Clamp-and-rescale intensities into `[0, 1]`: `clamp((x - lo) / (hi - lo), 0, 1)`.
pub fn window_normalize(v: &Volume3, lo: f64, hi: f64) -> Result<Volume3> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::param(format!("window requires lo < hi, got [{lo}, {hi}]")));
    }
    let width = hi - lo;
    let data = v
        .data
        .iter()
        .map(|&x| ((x as f64 - lo) / width).clamp(0.0, 1.0) as f32)
        .collect();
    Ok(Volume3 {
        grid: v.grid,
        data,
    })
}

/// Anatomical category of a labeled structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    LargeOrgan,
    SmallOrgan,
    Intestine,
    Vessel,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::LargeOrgan,
        Category::SmallOrgan,
        Category::Intestine,
        Category::Vessel,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Category::LargeOrgan => "LargeOrgan",
            Category::SmallOrgan => "SmallOrgan",
            Category::Intestine => "Intestine",
            Category::Vessel => "Vessel",
        }
    }

    /// Tubular structures are scored by centerline overlap, compact ones by surface distance.
    pub fn is_tubular(&self) -> bool {
        matches!(self, Category::Intestine | Category::Vessel)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::param(format!("unknown category '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelInfo {
    pub name: String,
    pub category: Category,
}

pub type LabelTable = BTreeMap<u16, LabelInfo>;

/// Integer anatomy labels (0 = background) on a voxel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVolume {
    grid: Grid,
    labels: Vec<u16>,
    table: LabelTable,
}

impl LabelVolume {
    pub fn new(grid: Grid, labels: Vec<u16>, table: LabelTable) -> Result<Self> {
        grid.validate()?;
        if labels.len() != grid.len() {
            return Err(Error::param(format!(
                "label data length {} does not match dims {:?}",
                labels.len(),
                grid.dims
            )));
        }
        if table.contains_key(&0) {
            return Err(Error::param("label 0 is reserved for background"));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l != 0 && !table.contains_key(&l)) {
            return Err(Error::UnknownLabel(bad));
        }
        Ok(LabelVolume {
            grid,
            labels,
            table,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn table(&self) -> &LabelTable {
        &self.table
    }

    pub fn info(&self, label: u16) -> Result<&LabelInfo> {
        self.table.get(&label).ok_or(Error::UnknownLabel(label))
    }

    pub fn voxel_count(&self, label: u16) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }
}

/// Voxels where `labels == label`. Label 0 selects the background.
pub fn binary_mask(lv: &LabelVolume, label: u16) -> Result<Mask3> {
    if label != 0 && !lv.table.contains_key(&label) {
        return Err(Error::UnknownLabel(label));
    }
    Ok(Mask3 {
        grid: lv.grid,
        bits: lv.labels.iter().map(|&l| l == label).collect(),
    })
}

/// One boolean per voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask3 {
    grid: Grid,
    bits: Vec<bool>,
}

impl Mask3 {
    pub fn new(grid: Grid, bits: Vec<bool>) -> Result<Self> {
        grid.validate()?;
        if bits.len() != grid.len() {
            return Err(Error::param(format!(
                "mask length {} does not match dims {:?}",
                bits.len(),
                grid.dims
            )));
        }
        Ok(Mask3 { grid, bits })
    }

    pub fn empty(grid: Grid) -> Self {
        Mask3 {
            bits: vec![false; grid.len()],
            grid,
        }
    }

    /// Mask of all voxel centers satisfying `inside(world_mm)`.
    pub fn from_fn(grid: Grid, inside: impl Fn([f64; 3]) -> bool) -> Self {
        let mut bits = vec![false; grid.len()];
        for (idx, b) in bits.iter_mut().enumerate() {
            let [i, j, k] = grid.coords(idx);
            *b = inside(grid.center_mm(i, j, k));
        }
        Mask3 { grid, bits }
    }

    /// Mask of all voxel indices `[i, j, k]` satisfying `inside`.
    pub fn from_index_fn(grid: Grid, inside: impl Fn([usize; 3]) -> bool) -> Self {
        let bits = (0..grid.len()).map(|idx| inside(grid.coords(idx))).collect();
        Mask3 { grid, bits }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn bits_mut(&mut self) -> &mut [bool] {
        &mut self.bits
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.bits[self.grid.index(i, j, k)]
    }

    /// Out-of-grid coordinates read as background.
    #[inline]
    pub fn get_signed(&self, i: isize, j: isize, k: isize) -> bool {
        let [nx, ny, nz] = self.grid.dims;
        if i < 0 || j < 0 || k < 0 || i as usize >= nx || j as usize >= ny || k as usize >= nz {
            return false;
        }
        self.bits[self.grid.index(i as usize, j as usize, k as usize)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, value: bool) {
        let idx = self.grid.index(i, j, k);
        self.bits[idx] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn intersection_count(&self, other: &Mask3) -> usize {
        self.bits
            .iter()
            .zip(&other.bits)
            .filter(|(&a, &b)| a && b)
            .count()
    }

    pub fn union(&self, other: &Mask3) -> Mask3 {
        Mask3 {
            grid: self.grid,
            bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| a || b).collect(),
        }
    }

    pub fn and_not(&self, other: &Mask3) -> Mask3 {
        Mask3 {
            grid: self.grid,
            bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| a && !b).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(n: usize) -> Grid {
        Grid::centered([n, n, n], [1.0; 3]).unwrap()
    }

    fn table(entries: &[(u16, &str, Category)]) -> LabelTable {
        entries
            .iter()
            .map(|&(l, n, c)| {
                (
                    l,
                    LabelInfo {
                        name: n.to_string(),
                        category: c,
                    },
                )
            })
            .collect()
    }

    #[test]
    fn rejects_bad_grids_and_lengths() {
        assert!(Grid::new([0, 1, 1], [1.0; 3], [0.0; 3]).is_err());
        assert!(Grid::new([1, 1, 1], [1.0, 0.0, 1.0], [0.0; 3]).is_err());
        assert!(Volume3::new(grid(2), vec![0.0; 7]).is_err());
        assert!(Volume3::new(grid(1), vec![f32::NAN]).is_err());
    }

    #[test]
    fn index_roundtrip_is_x_fastest() {
        let g = Grid::new([3, 4, 5], [1.0; 3], [0.0; 3]).unwrap();
        assert_eq!(g.index(1, 0, 0), 1);
        assert_eq!(g.index(0, 1, 0), 3);
        assert_eq!(g.index(0, 0, 1), 12);
        for idx in 0..g.len() {
            let [i, j, k] = g.coords(idx);
            assert_eq!(g.index(i, j, k), idx);
        }
    }

    #[test]
    fn binary_mask_of_background_volume_is_empty() {
        let lv = LabelVolume::new(grid(4), vec![0; 64], table(&[(1, "a", Category::Vessel)])).unwrap();
        assert!(binary_mask(&lv, 1).unwrap().is_empty());
    }

    #[test]
    fn binary_mask_single_voxel() {
        let mut labels = vec![0u16; 64];
        labels[21] = 3;
        let lv = LabelVolume::new(grid(4), labels, table(&[(3, "x", Category::SmallOrgan)])).unwrap();
        let m = binary_mask(&lv, 3).unwrap();
        assert_eq!(m.count(), 1);
        assert!(m.bits()[21]);
    }

    #[test]
    fn binary_mask_unknown_label() {
        let lv = LabelVolume::new(grid(2), vec![0; 8], LabelTable::new()).unwrap();
        assert!(matches!(binary_mask(&lv, 9), Err(Error::UnknownLabel(9))));
        assert!(LabelVolume::new(grid(2), vec![4; 8], LabelTable::new()).is_err());
    }

    #[test]
    fn window_examples() {
        let g = grid(2);
        let lo = -0.5;
        let hi = 1.5;
        let at_lo = window_normalize(&Volume3::filled(g, lo as f32), lo, hi).unwrap();
        assert!(at_lo.data().iter().all(|&v| v == 0.0));
        let at_hi = window_normalize(&Volume3::filled(g, hi as f32), lo, hi).unwrap();
        assert!(at_hi.data().iter().all(|&v| v == 1.0));
        let mid = window_normalize(&Volume3::filled(g, 0.5), lo, hi).unwrap();
        assert!(mid.data().iter().all(|&v| v == 0.5));
        assert!(window_normalize(&at_lo, 1.0, 1.0).is_err());
        assert!(window_normalize(&at_lo, 2.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn window_is_bounded_and_monotone(a in -10.0f32..10.0, b in -10.0f32..10.0) {
            let v = Volume3::new(Grid::new([2, 1, 1], [1.0; 3], [0.0; 3]).unwrap(), vec![a, b]).unwrap();
            let w = window_normalize(&v, -1.0, 3.0).unwrap();
            let (wa, wb) = (w.data()[0], w.data()[1]);
            prop_assert!((0.0..=1.0).contains(&wa) && (0.0..=1.0).contains(&wb));
            if a <= b { prop_assert!(wa <= wb); } else { prop_assert!(wa >= wb); }
        }

        #[test]
        fn masks_partition_nonzero_voxels(labels in proptest::collection::vec(0u16..4, 27)) {
            let t = table(&[(1, "a", Category::LargeOrgan), (2, "b", Category::SmallOrgan), (3, "c", Category::Vessel)]);
            let lv = LabelVolume::new(grid(3), labels.clone(), t.clone()).unwrap();
            let masks: Vec<Mask3> = t.keys().map(|&l| binary_mask(&lv, l).unwrap()).collect();
            for idx in 0..27 {
                let hits = masks.iter().filter(|m| m.bits()[idx]).count();
                prop_assert_eq!(hits, usize::from(labels[idx] != 0));
            }
        }
    }
}
