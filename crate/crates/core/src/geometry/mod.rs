//! Circular cone-beam acquisition geometry and projection data.
//!
//! Coordinates: the rotation axis is world z through the isocenter (0, 0, 0).
//! At gantry angle θ the source sits at `sod · (sin θ, −cos θ, 0)` and the flat
//! detector is centered at `−(sdd − sod) · (sin θ, −cos θ, 0)`, with its u axis
//! along `(cos θ, sin θ, 0)` and its v axis along world z.

mod filter;
mod siddon;

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use filter::{fdk_filter, next_pow2, Apodization, RampFilter};
pub use siddon::{backproject, forward_project, trace_ray};
pub(crate) use siddon::{backproject_view_weighted, project_view_with_lengths};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeBeamGeometry {
    pub n_views: usize,
    pub angles_rad: Vec<f64>,
    pub sod_mm: f64,
    pub sdd_mm: f64,
    /// Detector pixel counts (nu, nv).
    pub det_size: [usize; 2],
    pub det_spacing_mm: [f64; 2],
    pub det_offset_mm: [f64; 2],
}

impl ConeBeamGeometry {
    /// `n_views` angles equally spaced over [0, 2π), no detector offset.
    pub fn circular(
        n_views: usize,
        sod_mm: f64,
        sdd_mm: f64,
        det_size: [usize; 2],
        det_spacing_mm: [f64; 2],
    ) -> Result<Self> {
        let g = ConeBeamGeometry {
            n_views,
            angles_rad: (0..n_views).map(|i| TAU * i as f64 / n_views as f64).collect(),
            sod_mm,
            sdd_mm,
            det_size,
            det_spacing_mm,
            det_offset_mm: [0.0, 0.0],
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_views == 0 || self.angles_rad.len() != self.n_views {
            return Err(Error::param(format!(
                "geometry needs n_views > 0 angles, got n_views={} with {} angles",
                self.n_views,
                self.angles_rad.len()
            )));
        }
        if !(self.sod_mm > 0.0 && self.sdd_mm > self.sod_mm) || !self.sdd_mm.is_finite() {
            return Err(Error::param(format!(
                "geometry requires sdd > sod > 0, got sod={} sdd={}",
                self.sod_mm, self.sdd_mm
            )));
        }
        if self.det_size.iter().any(|&n| n == 0) {
            return Err(Error::param("detector pixel counts must be positive"));
        }
        if self.det_spacing_mm.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
            return Err(Error::param("detector spacing must be positive"));
        }
        if self.det_offset_mm.iter().any(|o| !o.is_finite()) {
            return Err(Error::param("detector offset must be finite"));
        }
        let mut prev = -1.0;
        for &a in &self.angles_rad {
            if !(0.0..TAU).contains(&a) || a <= prev {
                return Err(Error::param(
                    "angles must be strictly increasing within [0, 2π)",
                ));
            }
            prev = a;
        }
        Ok(())
    }

    pub fn nu(&self) -> usize {
        self.det_size[0]
    }

    pub fn nv(&self) -> usize {
        self.det_size[1]
    }

    pub fn pixels_per_view(&self) -> usize {
        self.det_size[0] * self.det_size[1]
    }

    pub fn data_len(&self) -> usize {
        self.n_views * self.pixels_per_view()
    }

    pub fn source(&self, view: usize) -> [f64; 3] {
        let (s, c) = self.angles_rad[view].sin_cos();
        [self.sod_mm * s, -self.sod_mm * c, 0.0]
    }

    /// Detector-plane u coordinate (mm) of pixel column `iu`.
    #[inline]
    pub fn u_mm(&self, iu: usize) -> f64 {
        (iu as f64 - (self.det_size[0] as f64 - 1.0) * 0.5) * self.det_spacing_mm[0] + self.det_offset_mm[0]
    }

    #[inline]
    pub fn v_mm(&self, iv: usize) -> f64 {
        (iv as f64 - (self.det_size[1] as f64 - 1.0) * 0.5) * self.det_spacing_mm[1] + self.det_offset_mm[1]
    }

    /// World position of the center of detector pixel (iu, iv) at `view`.
    pub fn pixel_position(&self, view: usize, iu: usize, iv: usize) -> [f64; 3] {
        let (s, c) = self.angles_rad[view].sin_cos();
        let back = self.sdd_mm - self.sod_mm;
        let u = self.u_mm(iu);
        [-back * s + u * c, back * c + u * s, self.v_mm(iv)]
    }

    /// Angular weight per view (half the span to the neighbouring views, cyclic).
    pub fn angular_steps(&self) -> Vec<f64> {
        let n = self.n_views;
        if n == 1 {
            return vec![TAU];
        }
        (0..n)
            .map(|i| {
                let prev = if i == 0 { self.angles_rad[n - 1] - TAU } else { self.angles_rad[i - 1] };
                let next = if i + 1 == n { self.angles_rad[0] + TAU } else { self.angles_rad[i + 1] };
                0.5 * (next - prev)
            })
            .collect()
    }
}

/// Line integrals for every view, laid out view × v × u (u fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionStack {
    geometry: ConeBeamGeometry,
    data: Vec<f32>,
    out_of_fov: bool,
}

impl ProjectionStack {
    pub fn new(geometry: ConeBeamGeometry, data: Vec<f32>) -> Result<Self> {
        geometry.validate()?;
        if data.len() != geometry.data_len() {
            return Err(Error::param(format!(
                "projection data length {} does not match {} views × {} × {}",
                data.len(),
                geometry.n_views,
                geometry.nv(),
                geometry.nu()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("projection data contains non-finite values"));
        }
        Ok(ProjectionStack {
            geometry,
            data,
            out_of_fov: false,
        })
    }

    pub fn zeros(geometry: ConeBeamGeometry) -> Result<Self> {
        let len = geometry.data_len();
        ProjectionStack::new(geometry, vec![0.0; len])
    }

    pub fn geometry(&self) -> &ConeBeamGeometry {
        &self.geometry
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn view(&self, v: usize) -> &[f32] {
        let n = self.geometry.pixels_per_view();
        &self.data[v * n..(v + 1) * n]
    }

    /// Set when no ray of any view intersected the volume.
    pub fn out_of_fov(&self) -> bool {
        self.out_of_fov
    }

    pub(crate) fn set_out_of_fov(&mut self, flag: bool) {
        self.out_of_fov = flag;
    }

    /// Adds zero-mean Gaussian noise of standard deviation `sigma` (seeded).
    pub fn add_gaussian_noise(&mut self, sigma: f64, seed: u64) -> Result<()> {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::param("noise sigma must be finite and ≥ 0"));
        }
        if sigma == 0.0 {
            return Ok(());
        }
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::param(e.to_string()))?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for v in &mut self.data {
            *v = (*v as f64 + normal.sample(&mut rng)) as f32;
        }
        Ok(())
    }
}
