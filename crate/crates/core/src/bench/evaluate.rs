use crate::error::{Error, Result};
use crate::metrics::{cl_dice, dsc, nsd, psnr, ssim, MetricParams};
use crate::phantom::{dilate_mask, local_background};
use crate::stats::{Metric, WHOLE_VOLUME};
use crate::volume::{binary_mask, window_normalize, Category, LabelVolume, Mask3, Volume3};

/// Voxels within this many voxel spacings of a structure are eligible for its label.
const SEARCH_VOXELS: f64 = 2.0;

/// Per-structure reference intensities read off the ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureReference {
    pub label: u16,
    pub name: String,
    pub category: Category,
    pub intensity: f64,
    pub background: f64,
    pub mask: Mask3,
}

/// Stand-in for a trained segmentator: labels a voxel as a structure when
/// it lies near that structure's true extent and its intensity is closer to
/// the structure's ground-truth intensity than to the surrounding tissue.
#[derive(Debug, Clone)]
pub struct AnatomyOracle {
    structures: Vec<StructureReference>,
    search: Vec<Mask3>,
}

impl AnatomyOracle {
    pub fn new(gt: &Volume3, labels: &LabelVolume) -> Result<Self> {
        gt.grid().ensure_same(labels.grid(), "anatomy oracle")?;
        let mut structures = Vec::new();
        for (&label, info) in labels.table() {
            let mask = binary_mask(labels, label)?;
            let count = mask.count();
            let intensity = if count == 0 {
                0.0
            } else {
                mask.bits()
                    .iter()
                    .zip(gt.data())
                    .filter(|(&b, _)| b)
                    .map(|(_, &x)| x as f64)
                    .sum::<f64>()
                    / count as f64
            };
            structures.push(StructureReference {
                label,
                name: info.name.clone(),
                category: info.category,
                intensity,
                background: local_background(gt, labels, label)?,
                mask,
            });
        }
        let reach = SEARCH_VOXELS * gt.grid().spacing_mm.iter().copied().fold(0.0, f64::max);
        let search = structures
            .iter()
            .map(|s| {
                let others = Mask3::new(
                    *labels.grid(),
                    labels.labels().iter().map(|&l| l != 0 && l != s.label).collect(),
                )?;
                Ok(dilate_mask(&s.mask, reach).and_not(&others))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AnatomyOracle { structures, search })
    }

    pub fn structures(&self) -> &[StructureReference] {
        &self.structures
    }

    /// Predicted mask of structure `index` (position in [`Self::structures`]).
    pub fn segment(&self, recon: &Volume3, index: usize) -> Result<Mask3> {
        let s = &self.structures[index];
        recon.grid().ensure_same(s.mask.grid(), "segmentation")?;
        let bits = self.search[index]
            .bits()
            .iter()
            .zip(recon.data())
            .map(|(&eligible, &x)| {
                let x = x as f64;
                eligible && (x - s.intensity).abs() < (x - s.background).abs()
            })
            .collect();
        Mask3::new(*recon.grid(), bits)
    }
}

/// One measurement before it is tagged with scan, method and views.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub structure: String,
    pub category: String,
    pub metric: Metric,
    pub value: f64,
}

/// Anatomy metric used for a category: centerline overlap for tubular
/// structures, surface agreement for compact ones.
pub fn anatomy_metric(category: Category) -> Metric {
    if category.is_tubular() {
        Metric::ClDice
    } else {
        Metric::Nsd
    }
}

/// Whole-volume PSNR and SSIM after windowing, then DSC plus the category's
/// anatomy metric for every structure in label order.
pub fn evaluate_volume(
    gt: &Volume3,
    oracle: &AnatomyOracle,
    recon: &Volume3,
    params: &MetricParams,
    window: [f64; 2],
) -> Result<Vec<Measurement>> {
    gt.grid()
        .ensure_same(recon.grid(), "evaluation")
        .map_err(|e| Error::Evaluation(e.to_string()))?;
    let reference = window_normalize(gt, window[0], window[1])?;
    let test = window_normalize(recon, window[0], window[1])?;
    let whole = |metric, value| Measurement {
        structure: WHOLE_VOLUME.into(),
        category: WHOLE_VOLUME.into(),
        metric,
        value,
    };
    let mut out = vec![
        whole(Metric::Psnr, psnr(&reference, &test, 1.0)?),
        whole(Metric::Ssim, ssim(&reference, &test, &params.ssim)?),
    ];
    for (n, s) in oracle.structures().iter().enumerate() {
        let predicted = oracle.segment(recon, n)?;
        let category = s.category.as_str().to_owned();
        out.push(Measurement {
            structure: s.name.clone(),
            category: category.clone(),
            metric: Metric::Dsc,
            value: dsc(&predicted, &s.mask, params.empty_policy)?,
        });
        let metric = anatomy_metric(s.category);
        let value = match metric {
            Metric::ClDice => cl_dice(&predicted, &s.mask, params.empty_policy)?,
            _ => nsd(&predicted, &s.mask, params.nsd_tau_mm, params.empty_policy)?,
        };
        out.push(Measurement {
            structure: s.name.clone(),
            category,
            metric,
            value,
        });
    }
    Ok(out)
}
