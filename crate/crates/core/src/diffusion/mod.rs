//! Numeric kernel of the completeness-aware latent diffusion objective:
//! forward noising, one-step inversion, latent conditioning and the composite
//! loss. Networks enter only as caller-supplied functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Latent tensor of shape `(h, w, c)`, channel-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentGrid {
    shape: [usize; 3],
    data: Vec<f64>,
}

impl LatentGrid {
    pub fn new(h: usize, w: usize, c: usize, data: Vec<f64>) -> Result<Self> {
        if h == 0 || w == 0 || c == 0 {
            return Err(Error::param(format!("latent shape ({h}, {w}, {c}) has a zero axis")));
        }
        if data.len() != h * w * c {
            return Err(Error::param(format!(
                "latent data has {} entries, shape ({h}, {w}, {c}) needs {}",
                data.len(),
                h * w * c
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("latent data must be finite"));
        }
        Ok(LatentGrid { shape: [h, w, c], data })
    }

    pub fn filled(h: usize, w: usize, c: usize, value: f64) -> Result<Self> {
        Self::new(h, w, c, vec![value; h * w * c])
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, y: usize, x: usize, ch: usize) -> f64 {
        let [_, w, c] = self.shape;
        self.data[(y * w + x) * c + ch]
    }

    fn ensure_same_shape(&self, other: &LatentGrid, what: &str) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::param(format!(
                "{what}: latent shapes {:?} and {:?} differ",
                self.shape, other.shape
            )));
        }
        Ok(())
    }
}

/// Cumulative signal fractions ᾱ_1..ᾱ_T of a variance-preserving schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    alpha_bar: Vec<f64>,
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self::linear(1000, 1e-4, 2e-2).expect("default schedule is valid")
    }
}

impl NoiseSchedule {
    /// ᾱ_t = ∏_{s≤t} (1 − β_s) with β linear from `beta_start` to `beta_end`.
    pub fn linear(steps: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::param("noise schedule needs at least one step"));
        }
        if !(beta_start > 0.0 && beta_end < 1.0 && beta_start <= beta_end) {
            return Err(Error::param(format!(
                "betas must satisfy 0 < start ≤ end < 1, got {beta_start} and {beta_end}"
            )));
        }
        let mut acc = 1.0;
        let alpha_bar = (0..steps)
            .map(|s| {
                let frac = if steps == 1 { 0.0 } else { s as f64 / (steps - 1) as f64 };
                acc *= 1.0 - (beta_start + (beta_end - beta_start) * frac);
                acc
            })
            .collect();
        Self::from_alpha_bar(alpha_bar)
    }

    pub fn from_alpha_bar(alpha_bar: Vec<f64>) -> Result<Self> {
        if alpha_bar.is_empty() {
            return Err(Error::param("noise schedule needs at least one step"));
        }
        if alpha_bar.iter().any(|&a| !(a > 0.0 && a <= 1.0)) {
            return Err(Error::param("every ᾱ_t must lie in (0, 1]"));
        }
        if alpha_bar.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::param("ᾱ_t must be strictly decreasing in t"));
        }
        Ok(NoiseSchedule { alpha_bar })
    }

    pub fn steps(&self) -> usize {
        self.alpha_bar.len()
    }

    /// ᾱ_t for `t` in `1..=T`.
    pub fn alpha_bar(&self, t: usize) -> Result<f64> {
        if t == 0 || t > self.steps() {
            return Err(Error::param(format!("timestep {t} outside 1..={}", self.steps())));
        }
        Ok(self.alpha_bar[t - 1])
    }
}

/// z_t = √ᾱ_t·z₀ + √(1−ᾱ_t)·ε
pub fn add_noise(z0: &LatentGrid, eps: &LatentGrid, t: usize, sched: &NoiseSchedule) -> Result<LatentGrid> {
    z0.ensure_same_shape(eps, "add_noise")?;
    let a = sched.alpha_bar(t)?;
    let (s, n) = (a.sqrt(), (1.0 - a).sqrt());
    let data = z0.data.iter().zip(&eps.data).map(|(z, e)| s * z + n * e).collect();
    Ok(LatentGrid { shape: z0.shape, data })
}

/// ẑ₀ = (z_t − √(1−ᾱ_t)·ε̂) / √ᾱ_t
pub fn recover_z0(zt: &LatentGrid, eps_hat: &LatentGrid, t: usize, sched: &NoiseSchedule) -> Result<LatentGrid> {
    zt.ensure_same_shape(eps_hat, "recover_z0")?;
    let a = sched.alpha_bar(t)?;
    let (s, n) = (a.sqrt(), (1.0 - a).sqrt());
    let data = zt.data.iter().zip(&eps_hat.data).map(|(z, e)| (z - n * e) / s).collect();
    LatentGrid::new(zt.shape[0], zt.shape[1], zt.shape[2], data)
}

/// Stacks `z_rec` after `zt` along the channel axis.
pub fn concat_latents(zt: &LatentGrid, z_rec: &LatentGrid) -> Result<LatentGrid> {
    let ([h, w, ca], [h2, w2, cb]) = (zt.shape, z_rec.shape);
    if (h, w) != (h2, w2) {
        return Err(Error::param(format!(
            "cannot concatenate latents of spatial size {h}×{w} and {h2}×{w2}"
        )));
    }
    let mut data = Vec::with_capacity(h * w * (ca + cb));
    for (a, b) in zt.data.chunks_exact(ca).zip(z_rec.data.chunks_exact(cb)) {
        data.extend_from_slice(a);
        data.extend_from_slice(b);
    }
    Ok(LatentGrid { shape: [h, w, ca + cb], data })
}

/// Mean squared error between true and predicted noise.
pub fn noise_loss(eps: &LatentGrid, eps_hat: &LatentGrid) -> Result<f64> {
    eps.ensure_same_shape(eps_hat, "noise loss")?;
    let n = eps.data.len() as f64;
    Ok(eps.data.iter().zip(&eps_hat.data).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n)
}

/// Mean absolute error between a decoded image and the reference.
pub fn pixel_loss(x_hat: &[f64], x_gt: &[f64]) -> Result<f64> {
    if x_hat.len() != x_gt.len() || x_hat.is_empty() {
        return Err(Error::param(format!(
            "pixel loss needs equal nonempty images, got {} and {} pixels",
            x_hat.len(),
            x_gt.len()
        )));
    }
    if x_hat.iter().chain(x_gt).any(|v| !v.is_finite()) {
        return Err(Error::param("pixel loss inputs must be finite"));
    }
    Ok(x_hat.iter().zip(x_gt).map(|(a, b)| (a - b).abs()).sum::<f64>() / x_hat.len() as f64)
}

/// Mean categorical cross entropy of per-voxel class scores against labels.
/// `seg_logits` holds `labels.len()` rows of `classes` unnormalized scores.
pub fn anatomy_loss(seg_logits: &[f64], classes: usize, labels: &[usize]) -> Result<f64> {
    if classes == 0 || labels.is_empty() {
        return Err(Error::param("anatomy loss needs at least one class and one voxel"));
    }
    if seg_logits.len() != classes * labels.len() {
        return Err(Error::param(format!(
            "{} scores cannot hold {} voxels of {classes} classes",
            seg_logits.len(),
            labels.len()
        )));
    }
    if seg_logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("segmentation scores must be finite"));
    }
    let mut total = 0.0;
    for (row, &label) in seg_logits.chunks_exact(classes).zip(labels) {
        if label >= classes {
            return Err(Error::param(format!("class id {label} outside 0..{classes}")));
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = max + row.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
        total += log_sum - row[label];
    }
    Ok(total / labels.len() as f64)
}

/// Weights of the pixel and anatomy terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CareWeights {
    pub lambda_p: f64,
    pub lambda_s: f64,
}

impl Default for CareWeights {
    fn default() -> Self {
        CareWeights {
            lambda_p: 1.0,
            lambda_s: 0.001,
        }
    }
}

/// l_n + λ_p·l_p + λ_s·l_s
pub fn care_loss(l_n: f64, l_p: f64, l_s: f64, lambda_p: f64, lambda_s: f64) -> Result<f64> {
    for (name, v) in [("l_n", l_n), ("l_p", l_p), ("l_s", l_s), ("lambda_p", lambda_p), ("lambda_s", lambda_s)] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::param(format!("{name} must be finite and nonnegative, got {v}")));
        }
    }
    Ok(l_n + lambda_p * l_p + lambda_s * l_s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CareTerms {
    pub noise: f64,
    pub pixel: f64,
    pub anatomy: f64,
    pub total: f64,
}

/// Segmentation scores for an image: `(scores, classes)` laid out as in
/// [`anatomy_loss`].
pub type Segmentation = (Vec<f64>, usize);

/// Stand-ins for the trained networks.
pub struct Oracles<'a> {
    /// ε̂ from the channel-concatenated input and the timestep.
    pub denoiser: &'a dyn Fn(&LatentGrid, usize) -> LatentGrid,
    pub decoder: &'a dyn Fn(&LatentGrid) -> Vec<f64>,
    pub segmentator: &'a dyn Fn(&[f64]) -> Segmentation,
}

/// One evaluation of the composite objective. The anatomy target is the
/// segmentator's arg-max labelling of the reference image.
#[allow(clippy::too_many_arguments)]
pub fn care_objective(
    z0: &LatentGrid,
    eps: &LatentGrid,
    z_rec: &LatentGrid,
    t: usize,
    sched: &NoiseSchedule,
    x_gt: &[f64],
    oracles: &Oracles<'_>,
    weights: CareWeights,
) -> Result<CareTerms> {
    let zt = add_noise(z0, eps, t, sched)?;
    let eps_hat = (oracles.denoiser)(&concat_latents(&zt, z_rec)?, t);
    let noise = noise_loss(eps, &eps_hat)?;
    let z0_hat = recover_z0(&zt, &eps_hat, t, sched)?;
    let x_hat = (oracles.decoder)(&z0_hat);
    let pixel = pixel_loss(&x_hat, x_gt)?;
    let (pred, classes) = (oracles.segmentator)(&x_hat);
    let (reference, ref_classes) = (oracles.segmentator)(x_gt);
    if ref_classes != classes || classes == 0 {
        return Err(Error::param("segmentator returned inconsistent class counts"));
    }
    let labels: Vec<usize> = reference
        .chunks_exact(classes)
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (k, &s)| if s > best.1 { (k, s) } else { best })
                .0
        })
        .collect();
    let anatomy = anatomy_loss(&pred, classes, &labels)?;
    let total = care_loss(noise, pixel, anatomy, weights.lambda_p, weights.lambda_s)?;
    Ok(CareTerms {
        noise,
        pixel,
        anatomy,
        total,
    })
}
