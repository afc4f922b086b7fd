//! On-disk formats.
//!
//! Every array is a raw little-endian payload (`<name>.f32` or `<name>.u16`)
//! next to a JSON sidecar `<name>.json` describing its shape.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ConeBeamGeometry, ProjectionStack};
use crate::volume::{Grid, LabelInfo, LabelTable, LabelVolume, Volume3};

pub const FORMAT_VERSION: &str = "sparsect-raw/1";

/// Appends an extension to a base path without replacing dots already in the name.
pub fn with_suffix(base: &Path, ext: &str) -> PathBuf {
    let mut s: OsString = base.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

#[derive(Debug, Serialize, Deserialize)]
struct VolumeSidecar {
    format_version: String,
    kind: String,
    dtype: String,
    dims: [usize; 3],
    spacing_mm: [f64; 3],
    origin_mm: [f64; 3],
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelEntry {
    label: u16,
    name: String,
    category: crate::volume::Category,
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelSidecar {
    format_version: String,
    kind: String,
    dtype: String,
    dims: [usize; 3],
    spacing_mm: [f64; 3],
    origin_mm: [f64; 3],
    labels: Vec<LabelEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ProjectionSidecar {
    format_version: String,
    kind: String,
    dtype: String,
    /// Row-major order of the payload, slowest axis first.
    layout: String,
    geometry: ConeBeamGeometry,
    out_of_fov: bool,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::format(path, "sidecar not found"),
        _ => Error::io(path, e),
    })?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

fn check_header(path: &Path, version: &str, kind: &str, want_kind: &str) -> Result<()> {
    if version != FORMAT_VERSION {
        return Err(Error::format(path, format!("unsupported format version '{version}'")));
    }
    if kind != want_kind {
        return Err(Error::format(path, format!("expected kind '{want_kind}', found '{kind}'")));
    }
    Ok(())
}

fn write_f32(path: &Path, data: &[f32]) -> Result<()> {
    let mut bytes = Vec::with_capacity(data.len() * 4);
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_f32(path: &Path, expected_len: usize) -> Result<Vec<f32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != expected_len * 4 {
        return Err(Error::Integrity {
            path: path.to_owned(),
            expected: expected_len * 4,
            found: bytes.len(),
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

/// Writes `<base>.f32` and `<base>.json`.
pub fn save_volume(v: &Volume3, base: &Path) -> Result<()> {
    let g = v.grid();
    write_f32(&with_suffix(base, "f32"), v.data())?;
    write_json(
        &with_suffix(base, "json"),
        &VolumeSidecar {
            format_version: FORMAT_VERSION.into(),
            kind: "volume".into(),
            dtype: "f32le".into(),
            dims: g.dims,
            spacing_mm: g.spacing_mm,
            origin_mm: g.origin_mm,
        },
    )
}

pub fn load_volume(base: &Path) -> Result<Volume3> {
    let side_path = with_suffix(base, "json");
    let side: VolumeSidecar = read_json(&side_path)?;
    check_header(&side_path, &side.format_version, &side.kind, "volume")?;
    let grid = Grid::new(side.dims, side.spacing_mm, side.origin_mm)
        .map_err(|e| Error::format(&side_path, e.to_string()))?;
    let data = read_f32(&with_suffix(base, "f32"), grid.len())?;
    Volume3::new(grid, data).map_err(|e| Error::format(with_suffix(base, "f32"), e.to_string()))
}

/// Writes `<base>.u16` and `<base>.json` (including the label table).
pub fn save_labels(lv: &LabelVolume, base: &Path) -> Result<()> {
    let g = lv.grid();
    let raw_path = with_suffix(base, "u16");
    let mut bytes = Vec::with_capacity(lv.labels().len() * 2);
    for l in lv.labels() {
        bytes.extend_from_slice(&l.to_le_bytes());
    }
    fs::write(&raw_path, bytes).map_err(|e| Error::io(&raw_path, e))?;
    write_json(
        &with_suffix(base, "json"),
        &LabelSidecar {
            format_version: FORMAT_VERSION.into(),
            kind: "labels".into(),
            dtype: "u16le".into(),
            dims: g.dims,
            spacing_mm: g.spacing_mm,
            origin_mm: g.origin_mm,
            labels: lv
                .table()
                .iter()
                .map(|(&label, info)| LabelEntry {
                    label,
                    name: info.name.clone(),
                    category: info.category,
                })
                .collect(),
        },
    )
}

pub fn load_labels(base: &Path) -> Result<LabelVolume> {
    let side_path = with_suffix(base, "json");
    let side: LabelSidecar = read_json(&side_path)?;
    check_header(&side_path, &side.format_version, &side.kind, "labels")?;
    let grid = Grid::new(side.dims, side.spacing_mm, side.origin_mm)
        .map_err(|e| Error::format(&side_path, e.to_string()))?;
    let raw_path = with_suffix(base, "u16");
    let bytes = fs::read(&raw_path).map_err(|e| Error::io(&raw_path, e))?;
    if bytes.len() != grid.len() * 2 {
        return Err(Error::Integrity {
            path: raw_path,
            expected: grid.len() * 2,
            found: bytes.len(),
        });
    }
    let labels = bytes
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect();
    let table: LabelTable = side
        .labels
        .into_iter()
        .map(|e| {
            (
                e.label,
                LabelInfo {
                    name: e.name,
                    category: e.category,
                },
            )
        })
        .collect();
    LabelVolume::new(grid, labels, table).map_err(|e| Error::format(&side_path, e.to_string()))
}

/// Writes `<base>.f32` (views × v × u) and `<base>.json` embedding the geometry.
pub fn save_projections(p: &ProjectionStack, base: &Path) -> Result<()> {
    write_f32(&with_suffix(base, "f32"), p.data())?;
    write_json(
        &with_suffix(base, "json"),
        &ProjectionSidecar {
            format_version: FORMAT_VERSION.into(),
            kind: "projections".into(),
            dtype: "f32le".into(),
            layout: "view,v,u".into(),
            geometry: p.geometry().clone(),
            out_of_fov: p.out_of_fov(),
        },
    )
}

pub fn load_projections(base: &Path) -> Result<ProjectionStack> {
    let side_path = with_suffix(base, "json");
    let side: ProjectionSidecar = read_json(&side_path)?;
    check_header(&side_path, &side.format_version, &side.kind, "projections")?;
    side.geometry
        .validate()
        .map_err(|e| Error::format(&side_path, e.to_string()))?;
    let data = read_f32(&with_suffix(base, "f32"), side.geometry.data_len())?;
    let mut stack = ProjectionStack::new(side.geometry, data)
        .map_err(|e| Error::format(with_suffix(base, "f32"), e.to_string()))?;
    stack.set_out_of_fov(side.out_of_fov);
    Ok(stack)
}
