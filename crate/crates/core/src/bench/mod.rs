//! Staged benchmark pipeline: phantom, projection, reconstruction,
//! evaluation and reporting, plus the pixel-metric pitfall experiment.

mod config;
mod evaluate;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{forward_project, ProjectionStack};
use crate::io::{load_labels, load_projections, load_volume, save_labels, save_projections, save_volume, with_suffix};
use crate::phantom::{ablate_structure, make_phantom};
use crate::recon::{asd_pocs, fdk, sart, AsdPocsDiagnostics};
use crate::stats::{
    aggregate_category, compare_groups, pearson, read_records, write_long_summary, write_records, write_summary_table,
    Metric, MetricRecord,
};
use crate::volume::{Category, Grid, LabelVolume, Volume3};

pub use config::{BenchConfig, GeometryConfig, GroupRef, Method, PitfallConfig};
pub use evaluate::{anatomy_metric, evaluate_volume, AnatomyOracle, Measurement, StructureReference};

/// File layout under the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn scan_id(scan: usize) -> String {
        format!("scan_{scan:03}")
    }

    pub fn scan_dir(&self, scan: usize) -> PathBuf {
        self.root.join(Self::scan_id(scan))
    }

    pub fn ground_truth(&self, scan: usize) -> PathBuf {
        self.scan_dir(scan).join("ground_truth")
    }

    pub fn labels(&self, scan: usize) -> PathBuf {
        self.scan_dir(scan).join("labels")
    }

    pub fn projections(&self, scan: usize, views: usize) -> PathBuf {
        self.scan_dir(scan).join(format!("proj_v{views:03}"))
    }

    pub fn reconstruction(&self, scan: usize, method: Method, views: usize) -> PathBuf {
        self.scan_dir(scan).join(format!("{method}_v{views:03}"))
    }

    pub fn diagnostics(&self, scan: usize, views: usize) -> PathBuf {
        self.scan_dir(scan).join(format!("asdpocs_v{views:03}_diagnostics.csv"))
    }

    pub fn records(&self) -> PathBuf {
        self.root.join("records.csv")
    }

    pub fn summary(&self) -> PathBuf {
        self.root.join("summary.csv")
    }

    pub fn summary_long(&self) -> PathBuf {
        self.root.join("summary_long.csv")
    }

    pub fn scatter(&self) -> PathBuf {
        self.root.join("scatter.json")
    }

    pub fn significance(&self) -> PathBuf {
        self.root.join("significance.csv")
    }

    pub fn pitfall(&self) -> PathBuf {
        self.root.join("pitfall.csv")
    }
}

fn require(path: PathBuf) -> Result<PathBuf> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(Error::MissingArtifact(path))
    }
}

/// Checks both halves of a raw array before loading it.
fn require_array(base: &Path, ext: &str) -> Result<()> {
    require(with_suffix(base, "json"))?;
    require(with_suffix(base, ext))?;
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn create_file(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn noise_seed(seed: u64, scan: usize, views: usize) -> u64 {
    let mut z = seed ^ (scan as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (views as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn project(cfg: &BenchConfig, gt: &Volume3, scan: usize, views: usize) -> Result<ProjectionStack> {
    let mut p = forward_project(gt, &cfg.geometry.build(views)?)?;
    if p.out_of_fov() {
        log::warn!("no ray of the {views}-view geometry meets the volume");
    }
    p.add_gaussian_noise(cfg.noise_sigma, noise_seed(cfg.seed, scan, views))?;
    Ok(p)
}

pub fn reconstruct(
    cfg: &BenchConfig,
    method: Method,
    p: &ProjectionStack,
    grid: &Grid,
) -> Result<(Volume3, Option<AsdPocsDiagnostics>)> {
    match method {
        Method::Fdk => Ok((fdk(p, grid, cfg.fdk_apodization)?, None)),
        Method::Sart => Ok((sart(p, grid, &cfg.sart, None)?, None)),
        Method::AsdPocs => {
            let (v, d) = asd_pocs(p, grid, &cfg.asd_pocs)?;
            Ok((v, Some(d)))
        }
    }
}

/// Writes the ground-truth volume and labels of every scan.
pub fn cmd_phantom(cfg: &BenchConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.out_dir);
    let mut written = Vec::new();
    for scan in 0..cfg.scans {
        let spec = cfg.phantom_spec(scan)?;
        log::info!("phantom {}: seed {}, dims {:?}", Layout::scan_id(scan), spec.seed, spec.dims);
        let (gt, labels) = make_phantom(&spec)?;
        create_dir(&layout.scan_dir(scan))?;
        save_volume(&gt, &layout.ground_truth(scan))?;
        save_labels(&labels, &layout.labels(scan))?;
        written.push(layout.ground_truth(scan));
        written.push(layout.labels(scan));
    }
    Ok(written)
}

fn load_ground_truth(layout: &Layout, scan: usize) -> Result<Volume3> {
    let base = layout.ground_truth(scan);
    require_array(&base, "f32")?;
    load_volume(&base)
}

fn load_label_volume(layout: &Layout, scan: usize) -> Result<LabelVolume> {
    let base = layout.labels(scan);
    require_array(&base, "u16")?;
    load_labels(&base)
}

/// Forward projects every ground truth at every view count.
pub fn cmd_project(cfg: &BenchConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.out_dir);
    let mut written = Vec::new();
    for scan in 0..cfg.scans {
        let gt = load_ground_truth(&layout, scan)?;
        for &views in &cfg.views {
            log::info!("project {} at {views} views", Layout::scan_id(scan));
            let p = project(cfg, &gt, scan, views)?;
            let base = layout.projections(scan, views);
            save_projections(&p, &base)?;
            written.push(base);
        }
    }
    Ok(written)
}

/// Reconstructs every projection stack with every configured method.
pub fn cmd_reconstruct(cfg: &BenchConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let methods = cfg.parsed_methods()?;
    let layout = Layout::new(&cfg.out_dir);
    let mut written = Vec::new();
    for scan in 0..cfg.scans {
        let grid = *load_ground_truth(&layout, scan)?.grid();
        for &views in &cfg.views {
            let proj_base = layout.projections(scan, views);
            require_array(&proj_base, "f32")?;
            let p = load_projections(&proj_base)?;
            for &method in &methods {
                log::info!("reconstruct {} with {method} at {views} views", Layout::scan_id(scan));
                let (v, diagnostics) = reconstruct(cfg, method, &p, &grid)?;
                let base = layout.reconstruction(scan, method, views);
                save_volume(&v, &base)?;
                written.push(base);
                if let Some(d) = diagnostics {
                    let path = layout.diagnostics(scan, views);
                    let mut w = create_file(&path)?;
                    d.write_csv(&mut w).map_err(|e| Error::io(&path, e))?;
                    finish(w, &path)?;
                    written.push(path);
                }
            }
        }
    }
    Ok(written)
}

/// Scores every reconstruction against its ground truth and writes `records.csv`.
pub fn cmd_evaluate(cfg: &BenchConfig) -> Result<Vec<MetricRecord>> {
    cfg.validate()?;
    let methods = cfg.parsed_methods()?;
    let layout = Layout::new(&cfg.out_dir);
    let mut records = Vec::new();
    for scan in 0..cfg.scans {
        let gt = load_ground_truth(&layout, scan)?;
        let labels = load_label_volume(&layout, scan)?;
        let oracle = AnatomyOracle::new(&gt, &labels).map_err(|e| Error::Evaluation(e.to_string()))?;
        for &method in &methods {
            for &views in &cfg.views {
                let base = layout.reconstruction(scan, method, views);
                require_array(&base, "f32")?;
                let recon = load_volume(&base)?;
                log::info!("evaluate {} {method} at {views} views", Layout::scan_id(scan));
                for m in evaluate_volume(&gt, &oracle, &recon, &cfg.metrics, cfg.window)? {
                    records.push(MetricRecord {
                        scan_id: Layout::scan_id(scan),
                        method: method.to_string(),
                        views,
                        structure: m.structure,
                        category: m.category,
                        metric: m.metric,
                        value: m.value,
                    });
                }
            }
        }
    }
    let path = layout.records();
    create_dir(layout.root())?;
    let w = create_file(&path)?;
    write_records(&records, w)?;
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatterPoint {
    pub scan_id: String,
    pub method: String,
    pub views: usize,
    /// Mean of the per-category anatomy scores (large and small organ NSD,
    /// intestine and vessel clDice) present for this reconstruction.
    pub anatomy_score: f64,
    pub ssim: f64,
    /// `null` when the reconstruction is exact.
    pub psnr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatterData {
    pub points: Vec<ScatterPoint>,
    pub r_anatomy_ssim: Option<f64>,
    pub r_anatomy_psnr: Option<f64>,
}

fn correlation(x: &[f64], y: &[f64], what: &str) -> Option<f64> {
    match pearson(x, y) {
        Ok(r) => Some(r),
        Err(e) => {
            log::warn!("{what} correlation omitted: {e}");
            None
        }
    }
}

/// Per reconstruction: the mean anatomy score and the pixel-wise scores.
pub fn scatter_data(records: &[MetricRecord]) -> ScatterData {
    type Key = (String, String, usize);
    let mut per_category: BTreeMap<(Key, &str), Vec<f64>> = BTreeMap::new();
    let mut pixel: BTreeMap<(Key, Metric), f64> = BTreeMap::new();
    for r in records {
        let key = (r.scan_id.clone(), r.method.clone(), r.views);
        match r.metric {
            Metric::Psnr | Metric::Ssim => {
                pixel.insert((key, r.metric), r.value);
            }
            metric => {
                if let Ok(c) = r.category.parse::<Category>() {
                    if anatomy_metric(c) == metric {
                        per_category.entry((key, c.as_str())).or_default().push(r.value);
                    }
                }
            }
        }
    }
    let mut groups: BTreeMap<Key, Vec<f64>> = BTreeMap::new();
    for ((key, _), values) in per_category {
        groups.entry(key).or_default().push(values.iter().sum::<f64>() / values.len() as f64);
    }
    let mut points = Vec::new();
    for (key, means) in groups {
        let (Some(&ssim), Some(&psnr)) = (pixel.get(&(key.clone(), Metric::Ssim)), pixel.get(&(key.clone(), Metric::Psnr)))
        else {
            continue;
        };
        points.push(ScatterPoint {
            anatomy_score: means.iter().sum::<f64>() / means.len() as f64,
            ssim,
            psnr: psnr.is_finite().then_some(psnr),
            scan_id: key.0,
            method: key.1,
            views: key.2,
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.anatomy_score).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.ssim).collect();
    let (xp, yp): (Vec<f64>, Vec<f64>) = points.iter().filter_map(|p| p.psnr.map(|v| (p.anatomy_score, v))).unzip();
    ScatterData {
        r_anatomy_ssim: correlation(&xs, &ys, "anatomy/SSIM"),
        r_anatomy_psnr: correlation(&xp, &yp, "anatomy/PSNR"),
        points,
    }
}

/// Writes `summary.csv`, `summary_long.csv`, `scatter.json` and, when two
/// groups are configured for comparison, `significance.csv`.
pub fn cmd_report(cfg: &BenchConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.out_dir);
    let records_path = require(layout.records())?;
    let file = File::open(&records_path).map_err(|e| Error::io(&records_path, e))?;
    let records = read_records(BufReader::new(file))?;
    report_records(cfg, &records)
}

pub fn report_records(cfg: &BenchConfig, records: &[MetricRecord]) -> Result<Vec<PathBuf>> {
    let layout = Layout::new(&cfg.out_dir);
    create_dir(layout.root())?;
    let summaries = aggregate_category(records, cfg.aggregation)?;
    let mut written = Vec::new();

    let path = layout.summary();
    write_summary_table(&summaries, create_file(&path)?)?;
    written.push(path);

    let path = layout.summary_long();
    write_long_summary(&summaries, create_file(&path)?)?;
    written.push(path);

    let path = layout.scatter();
    let mut text = serde_json::to_string_pretty(&scatter_data(records)).map_err(|e| Error::format(&path, e.to_string()))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    written.push(path);

    if let Some([a, b]) = &cfg.compare {
        let comparisons = compare_groups(records, (&a.method, a.views), (&b.method, b.views))?;
        let path = layout.significance();
        let mut w = csv::Writer::from_writer(create_file(&path)?);
        w.write_record(["group_a", "group_b", "category", "metric", "u", "p", "method", "significant"])?;
        for c in &comparisons {
            w.write_record([
                format!("{}@{}", a.method, a.views),
                format!("{}@{}", b.method, b.views),
                c.category.clone(),
                c.metric.to_string(),
                c.test.u.to_string(),
                c.test.p.to_string(),
                format!("{:?}", c.test.method).to_lowercase(),
                c.significant.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Scores of one pitfall variant against the intact ground truth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PitfallRow {
    pub variant: String,
    pub psnr: f64,
    pub ssim: f64,
    /// The ablated structure's anatomy metric.
    pub structure_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PitfallReport {
    pub structure: String,
    pub category: Category,
    pub metric: Metric,
    pub method: String,
    pub views: usize,
    /// Whether the structure was actually removed.
    pub ablated: bool,
    pub rows: [PitfallRow; 2],
}

/// Index (into the oracle's structures) of the pitfall target and whether to ablate it.
fn pitfall_target(target: &str, structures: &[StructureReference]) -> Result<(usize, bool)> {
    let pick = |category: Category, largest: bool| {
        let candidates = structures.iter().enumerate().filter(|(_, s)| s.category == category);
        let best = if largest {
            candidates.max_by_key(|(n, s)| (s.mask.count(), std::cmp::Reverse(*n)))
        } else {
            candidates.min_by_key(|(n, s)| (s.mask.count(), *n))
        };
        best.map(|(n, _)| n)
            .ok_or_else(|| Error::param(format!("phantom has no {category} structure")))
    };
    match target {
        "smallest_small_organ" => Ok((pick(Category::SmallOrgan, false)?, true)),
        "largest_organ" => Ok((pick(Category::LargeOrgan, true)?, true)),
        "none" => Ok((pick(Category::SmallOrgan, false)?, false)),
        name => structures
            .iter()
            .position(|s| s.name == name)
            .map(|n| (n, true))
            .ok_or_else(|| Error::param(format!("unknown pitfall structure '{name}'"))),
    }
}

/// Reconstructs the intact phantom and a copy with one structure replaced by
/// its surrounding tissue, scores both against the intact ground truth and
/// writes the two-row `pitfall.csv`.
pub fn cmd_pitfall(cfg: &BenchConfig) -> Result<PitfallReport> {
    cfg.validate()?;
    let method: Method = cfg.pitfall.method.parse()?;
    let views = cfg.pitfall.views;
    let spec = cfg.phantom_spec(0)?;
    let (gt, labels) = make_phantom(&spec)?;
    let oracle = AnatomyOracle::new(&gt, &labels)?;
    let (index, ablate) = pitfall_target(&cfg.pitfall.ablate, oracle.structures())?;
    let target = &oracle.structures()[index];
    let modified = if ablate {
        ablate_structure(&gt, &labels, target.label)?
    } else {
        gt.clone()
    };
    let metric = anatomy_metric(target.category);
    let mut rows = Vec::new();
    for (variant, volume) in [("intact", &gt), ("ablated", &modified)] {
        log::info!("pitfall: {variant} phantom, {method} at {views} views");
        let p = project(cfg, volume, 0, views)?;
        let (recon, _) = reconstruct(cfg, method, &p, gt.grid())?;
        let scores = evaluate_volume(&gt, &oracle, &recon, &cfg.metrics, cfg.window)?;
        let find = |structure: &str, metric: Metric| {
            scores
                .iter()
                .find(|m| m.structure == structure && m.metric == metric)
                .map(|m| m.value)
                .expect("evaluation covers every structure")
        };
        rows.push(PitfallRow {
            variant: variant.into(),
            psnr: find(crate::stats::WHOLE_VOLUME, Metric::Psnr),
            ssim: find(crate::stats::WHOLE_VOLUME, Metric::Ssim),
            structure_value: find(&target.name, metric),
        });
    }
    let report = PitfallReport {
        structure: target.name.clone(),
        category: target.category,
        metric,
        method: method.to_string(),
        views,
        ablated: ablate,
        rows: [rows[0].clone(), rows[1].clone()],
    };
    let layout = Layout::new(&cfg.out_dir);
    create_dir(layout.root())?;
    let path = layout.pitfall();
    let mut w = csv::Writer::from_writer(create_file(&path)?);
    w.write_record(["variant", "method", "views", "psnr", "ssim", "structure", "metric", "value"])?;
    for r in &report.rows {
        w.write_record([
            r.variant.clone(),
            report.method.clone(),
            views.to_string(),
            r.psnr.to_string(),
            r.ssim.to_string(),
            report.structure.clone(),
            metric.to_string(),
            r.structure_value.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(report)
}

/// All stages in order.
pub fn run_all(cfg: &BenchConfig) -> Result<Vec<PathBuf>> {
    let mut written = cmd_phantom(cfg)?;
    written.extend(cmd_project(cfg)?);
    written.extend(cmd_reconstruct(cfg)?);
    cmd_evaluate(cfg)?;
    written.push(Layout::new(&cfg.out_dir).records());
    written.extend(cmd_report(cfg)?);
    Ok(written)
}
