use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Apodization, ConeBeamGeometry};
use crate::metrics::MetricParams;
use crate::phantom::PhantomSpec;
use crate::recon::{AsdPocsParams, SartParams, ViewOrder};
use crate::stats::AggregationPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Fdk,
    Sart,
    AsdPocs,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Fdk, Method::Sart, Method::AsdPocs];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Fdk => "fdk",
            Method::Sart => "sart",
            Method::AsdPocs => "asdpocs",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| {
            let valid: Vec<&str> = Method::ALL.iter().map(|m| m.as_str()).collect();
            Error::param(format!("unknown method '{s}' (valid methods: {})", valid.join(", ")))
        })
    }
}

/// Circular orbit shared by every view count; angles are spread over a full turn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub sod_mm: f64,
    pub sdd_mm: f64,
    pub det_size: [usize; 2],
    pub det_spacing_mm: [f64; 2],
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            sod_mm: 200.0,
            sdd_mm: 400.0,
            det_size: [96, 96],
            det_spacing_mm: [2.0, 2.0],
        }
    }
}

impl GeometryConfig {
    pub fn build(&self, views: usize) -> Result<ConeBeamGeometry> {
        ConeBeamGeometry::circular(views, self.sod_mm, self.sdd_mm, self.det_size, self.det_spacing_mm)
    }
}

/// Two (method, views) groups compared with the rank-sum test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupRef {
    pub method: String,
    pub views: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PitfallConfig {
    /// `smallest_small_organ`, `largest_organ`, `none`, or a structure name.
    pub ablate: String,
    pub views: usize,
    pub method: String,
}

impl Default for PitfallConfig {
    fn default() -> Self {
        PitfallConfig {
            ablate: "smallest_small_organ".into(),
            views: 360,
            method: "fdk".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Phantom spec file; the shipped abdomen layout when absent.
    pub phantom: Option<PathBuf>,
    pub geometry: GeometryConfig,
    pub views: Vec<usize>,
    pub methods: Vec<String>,
    pub metrics: MetricParams,
    pub out_dir: PathBuf,
    /// Phantom seed of the first scan; scan `s` uses `seed + s`.
    pub seed: u64,
    pub scans: usize,
    /// Standard deviation of additive Gaussian noise on every projection value.
    pub noise_sigma: f64,
    /// Intensity window mapped to [0, 1] before pixel-wise metrics.
    pub window: [f64; 2],
    pub aggregation: AggregationPolicy,
    pub fdk_apodization: Apodization,
    pub sart: SartParams,
    pub asd_pocs: AsdPocsParams,
    pub compare: Option<[GroupRef; 2]>,
    pub pitfall: PitfallConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        let sart = SartParams {
            view_order: ViewOrder::GoldenAngle(0),
            ..SartParams::default()
        };
        BenchConfig {
            phantom: None,
            geometry: GeometryConfig::default(),
            views: vec![50, 100, 200, 360],
            methods: Method::ALL.iter().map(|m| m.as_str().to_owned()).collect(),
            metrics: MetricParams::default(),
            out_dir: PathBuf::from("bench_out"),
            seed: 7,
            scans: 1,
            noise_sigma: 0.0,
            window: [0.0, 2.0],
            aggregation: AggregationPolicy::Mean,
            fdk_apodization: Apodization::None,
            sart,
            asd_pocs: AsdPocsParams {
                sart_inner: SartParams {
                    iterations: 1,
                    ..sart
                },
                ..AsdPocsParams::default()
            },
            compare: None,
            pitfall: PitfallConfig::default(),
        }
    }
}

impl BenchConfig {
    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::format(origin, format!("invalid bench config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::format(path, "config file not found"),
            _ => Error::io(path, e),
        })?;
        Self::from_json(&text, path)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn parsed_methods(&self) -> Result<Vec<Method>> {
        self.methods.iter().map(|m| m.parse()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::param("at least one reconstruction method is required"));
        }
        self.parsed_methods()?;
        if self.views.is_empty() || self.views.iter().any(|&v| v == 0) {
            return Err(Error::param("views must be a nonempty list of positive counts"));
        }
        if self.scans == 0 {
            return Err(Error::param("scans must be positive"));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::param(format!("noise_sigma must be finite and ≥ 0, got {}", self.noise_sigma)));
        }
        if !(self.window[0] < self.window[1]) || self.window.iter().any(|w| !w.is_finite()) {
            return Err(Error::param(format!("window must satisfy lo < hi, got {:?}", self.window)));
        }
        self.metrics.validate()?;
        self.sart.validate()?;
        self.asd_pocs.validate()?;
        self.geometry.build(1)?;
        self.pitfall.method.parse::<Method>()?;
        if self.pitfall.views == 0 {
            return Err(Error::param("pitfall views must be positive"));
        }
        if let Some(groups) = &self.compare {
            for g in groups {
                g.method.parse::<Method>()?;
            }
        }
        if let Some(p) = &self.phantom {
            if !p.is_file() {
                return Err(Error::param(format!("phantom spec {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    /// Phantom spec of scan `scan`.
    pub fn phantom_spec(&self, scan: usize) -> Result<PhantomSpec> {
        let mut spec = match &self.phantom {
            Some(p) => PhantomSpec::load(p)?,
            None => PhantomSpec::default_spec(),
        };
        spec.seed = self.seed.wrapping_add(scan as u64);
        Ok(spec)
    }
}
