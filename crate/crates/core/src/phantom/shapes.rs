//! Analytic shapes and the seeded branching-tree generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn add_scaled(a: Vec3, b: Vec3, s: f64) -> Vec3 {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn normalize(a: Vec3) -> Option<Vec3> {
    let n = dot(a, a).sqrt();
    (n > 1e-12).then(|| a.map(|c| c / n))
}

/// Rodrigues rotation of `v` about the unit axis `k`.
fn rotate(v: Vec3, k: Vec3, angle: f64) -> Vec3 {
    let (s, c) = angle.sin_cos();
    let kxv = cross(k, v);
    let kv = dot(k, v);
    [0, 1, 2].map(|a| v[a] * c + kxv[a] * s + k[a] * kv * (1.0 - c))
}

/// Segment with a round cross-section and hemispherical caps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capsule {
    pub a: Vec3,
    pub b: Vec3,
    pub radius: f64,
}

impl Capsule {
    pub fn contains(&self, p: Vec3) -> bool {
        let ab = sub(self.b, self.a);
        let ap = sub(p, self.a);
        let len2 = dot(ab, ab);
        let t = if len2 > 0.0 { (dot(ap, ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
        let d = sub(ap, ab.map(|c| c * t));
        dot(d, d) <= self.radius * self.radius
    }

    fn bounds(&self) -> (Vec3, Vec3) {
        let lo = [0, 1, 2].map(|i| self.a[i].min(self.b[i]) - self.radius);
        let hi = [0, 1, 2].map(|i| self.a[i].max(self.b[i]) + self.radius);
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Ellipsoid {
        center_mm: Vec3,
        radii_mm: Vec3,
    },
    /// Union of capsules along a polyline.
    Tube {
        polyline_mm: Vec<Vec3>,
        radius_mm: f64,
    },
    /// Recursively bifurcating capsules; each level is shorter and thinner by `taper`.
    BranchingTree {
        root_mm: Vec3,
        direction: Vec3,
        length_mm: f64,
        depth: usize,
        root_radius_mm: f64,
        #[serde(default = "default_taper")]
        taper: f64,
        #[serde(default = "default_branch_angle")]
        branch_angle_deg: f64,
        #[serde(default = "default_jitter")]
        jitter_deg: f64,
    },
}

fn default_taper() -> f64 {
    0.75
}

fn default_branch_angle() -> f64 {
    35.0
}

fn default_jitter() -> f64 {
    8.0
}

/// A shape resolved into an inside test plus a bounding box (mm).
#[derive(Debug, Clone)]
pub enum Solid {
    Ellipsoid { center: Vec3, radii: Vec3 },
    Capsules(Vec<Capsule>),
}

impl Solid {
    pub fn contains(&self, p: Vec3) -> bool {
        match self {
            Solid::Ellipsoid { center, radii } => {
                let q: f64 = (0..3).map(|a| ((p[a] - center[a]) / radii[a]).powi(2)).sum();
                q <= 1.0
            }
            Solid::Capsules(caps) => caps.iter().any(|c| c.contains(p)),
        }
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        match self {
            Solid::Ellipsoid { center, radii } => (
                [0, 1, 2].map(|a| center[a] - radii[a]),
                [0, 1, 2].map(|a| center[a] + radii[a]),
            ),
            Solid::Capsules(caps) => caps.iter().fold(([f64::INFINITY; 3], [f64::NEG_INFINITY; 3]), |(lo, hi), c| {
                let (l, h) = c.bounds();
                ([0, 1, 2].map(|a| lo[a].min(l[a])), [0, 1, 2].map(|a| hi[a].max(h[a])))
            }),
        }
    }
}

fn finite3(v: &Vec3) -> bool {
    v.iter().all(|c| c.is_finite())
}

impl Shape {
    pub fn validate(&self) -> Result<()> {
        match self {
            Shape::Ellipsoid { center_mm, radii_mm } => {
                if !finite3(center_mm) || !radii_mm.iter().all(|r| *r > 0.0 && r.is_finite()) {
                    return Err(Error::param("ellipsoid needs a finite center and positive radii"));
                }
            }
            Shape::Tube { polyline_mm, radius_mm } => {
                if polyline_mm.len() < 2 || !polyline_mm.iter().all(finite3) {
                    return Err(Error::param("tube polyline needs at least two finite points"));
                }
                if !(*radius_mm > 0.0) || !radius_mm.is_finite() {
                    return Err(Error::param("tube radius must be positive"));
                }
            }
            Shape::BranchingTree {
                root_mm,
                direction,
                length_mm,
                depth,
                root_radius_mm,
                taper,
                branch_angle_deg,
                jitter_deg,
            } => {
                if !finite3(root_mm) || normalize(*direction).is_none() || !finite3(direction) {
                    return Err(Error::param("tree needs a finite root and a nonzero direction"));
                }
                if *depth == 0 || !(*length_mm > 0.0) || !(*root_radius_mm > 0.0) {
                    return Err(Error::param("tree depth, length and radius must be positive"));
                }
                if !(*taper > 0.0 && *taper <= 1.0) {
                    return Err(Error::param(format!("tree taper must lie in (0, 1], got {taper}")));
                }
                if !branch_angle_deg.is_finite() || !(*jitter_deg >= 0.0) {
                    return Err(Error::param("tree angles must be finite and jitter ≥ 0"));
                }
            }
        }
        Ok(())
    }

    /// Resolves the shape; trees draw their jitter from `seed`.
    pub fn solid(&self, seed: u64) -> Solid {
        match self {
            Shape::Ellipsoid { center_mm, radii_mm } => Solid::Ellipsoid {
                center: *center_mm,
                radii: *radii_mm,
            },
            Shape::Tube { polyline_mm, radius_mm } => Solid::Capsules(
                polyline_mm
                    .windows(2)
                    .map(|w| Capsule {
                        a: w[0],
                        b: w[1],
                        radius: *radius_mm,
                    })
                    .collect(),
            ),
            Shape::BranchingTree {
                root_mm,
                direction,
                length_mm,
                depth,
                root_radius_mm,
                taper,
                branch_angle_deg,
                jitter_deg,
            } => {
                let dir = normalize(*direction).expect("validated direction");
                let helper = if dir[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
                let normal = normalize(cross(dir, helper)).expect("helper is not parallel");
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut caps = Vec::new();
                let tree = TreeParams {
                    depth: *depth,
                    taper: *taper,
                    angle: branch_angle_deg.to_radians(),
                    jitter: jitter_deg.to_radians(),
                };
                grow(&tree, &mut rng, &mut caps, *root_mm, dir, normal, *length_mm, *root_radius_mm, 0);
                Solid::Capsules(caps)
            }
        }
    }
}

struct TreeParams {
    depth: usize,
    taper: f64,
    angle: f64,
    jitter: f64,
}

/// Emits one segment and recurses into two children that split in the plane
/// orthogonal to `normal`; grandchildren split in the perpendicular plane.
#[allow(clippy::too_many_arguments)]
fn grow(
    t: &TreeParams,
    rng: &mut ChaCha8Rng,
    caps: &mut Vec<Capsule>,
    start: Vec3,
    dir: Vec3,
    normal: Vec3,
    length: f64,
    radius: f64,
    level: usize,
) {
    let end = add_scaled(start, dir, length);
    caps.push(Capsule { a: start, b: end, radius });
    if level + 1 >= t.depth {
        return;
    }
    for side in [-1.0, 1.0] {
        let jitter = if t.jitter > 0.0 { rng.random_range(-t.jitter..=t.jitter) } else { 0.0 };
        let child = rotate(dir, normal, side * (t.angle + jitter));
        let child_normal = normalize(cross(child, normal)).unwrap_or(normal);
        grow(
            t,
            rng,
            caps,
            end,
            child,
            child_normal,
            length * t.taper,
            radius * t.taper,
            level + 1,
        );
    }
}
