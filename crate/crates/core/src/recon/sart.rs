use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{backproject_view_weighted, project_view_with_lengths, ProjectionStack};
use crate::volume::{Grid, Volume3};

/// Row or column sums below this contribute no update.
pub const SART_ZERO_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "seed")]
pub enum ViewOrder {
    #[default]
    Sequential,
    /// Views visited in golden-ratio steps around the orbit from a seeded start.
    GoldenAngle(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SartParams {
    pub iterations: usize,
    /// Relaxation λ ∈ (0, 2).
    pub relaxation: f64,
    pub view_order: ViewOrder,
    pub nonneg_clip: bool,
}

impl Default for SartParams {
    fn default() -> Self {
        SartParams {
            iterations: 20,
            relaxation: 0.7,
            view_order: ViewOrder::Sequential,
            nonneg_clip: true,
        }
    }
}

impl SartParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.relaxation > 0.0 && self.relaxation < 2.0) {
            return Err(Error::param(format!(
                "SART relaxation must lie in (0, 2), got {}",
                self.relaxation
            )));
        }
        Ok(())
    }
}

/// Visiting order of the views for one SART sweep.
pub fn view_sequence(n_views: usize, order: ViewOrder) -> Vec<usize> {
    match order {
        ViewOrder::Sequential => (0..n_views).collect(),
        ViewOrder::GoldenAngle(seed) => {
            let golden = 0.5 * (5f64.sqrt() - 1.0);
            let start: f64 = rand_chacha::ChaCha8Rng::seed_from_u64(seed).random();
            let mut used = vec![false; n_views];
            let mut seq = Vec::with_capacity(n_views);
            for step in 0..n_views {
                let target = ((start + step as f64 * golden).fract() * n_views as f64).floor() as usize;
                // nearest unused view, searching forward around the orbit
                let pick = (0..n_views)
                    .map(|d| (target + d) % n_views)
                    .find(|&v| !used[v])
                    .expect("fewer steps than views");
                used[pick] = true;
                seq.push(pick);
            }
            seq
        }
    }
}

/// Reusable buffers for per-view SART updates.
pub(crate) struct SartWorkspace {
    order: Vec<usize>,
    fwd: Vec<f64>,
    lengths: Vec<f64>,
    num: Vec<f64>,
    den: Vec<f64>,
}

impl SartWorkspace {
    pub(crate) fn new(p: &ProjectionStack, grid: &Grid, order: ViewOrder) -> Self {
        let g = p.geometry();
        SartWorkspace {
            order: view_sequence(g.n_views, order),
            fwd: vec![0.0; g.pixels_per_view()],
            lengths: vec![0.0; g.pixels_per_view()],
            num: vec![0.0; grid.len()],
            den: vec![0.0; grid.len()],
        }
    }

    /// One sweep over all views, updating `x` in place.
    pub(crate) fn sweep(&mut self, x: &mut [f64], p: &ProjectionStack, grid: &Grid, params: &SartParams) {
        let g = p.geometry();
        for &view in &self.order {
            project_view_with_lengths(x, grid, g, view, &mut self.fwd, &mut self.lengths);
            let measured = p.view(view);
            for ((r, &len), &m) in self.fwd.iter_mut().zip(&self.lengths).zip(measured) {
                *r = if len < SART_ZERO_GUARD { 0.0 } else { (m as f64 - *r) / len };
            }
            self.num.fill(0.0);
            self.den.fill(0.0);
            backproject_view_weighted(&self.fwd, grid, g, view, &mut self.num, &mut self.den);
            for ((xi, &n), &d) in x.iter_mut().zip(&self.num).zip(&self.den) {
                if d >= SART_ZERO_GUARD {
                    *xi += params.relaxation * n / d;
                    if params.nonneg_clip && *xi < 0.0 {
                        *xi = 0.0;
                    }
                }
            }
        }
    }
}

pub(crate) fn init_vector(grid: &Grid, init: Option<&Volume3>) -> Result<Vec<f64>> {
    match init {
        Some(v) => {
            v.grid().ensure_same(grid, "SART initial volume")?;
            Ok(v.to_f64())
        }
        None => Ok(vec![0.0; grid.len()]),
    }
}

/// Simultaneous algebraic reconstruction, one additive update per view:
/// `x ← x + λ · Aᵥᵀ((pᵥ − Aᵥx) ⊘ Aᵥ1) ⊘ Aᵥᵀ1`.
pub fn sart(p: &ProjectionStack, grid: &Grid, params: &SartParams, init: Option<&Volume3>) -> Result<Volume3> {
    run_sart(p, grid, params, init, false).map(|(v, _)| v)
}

/// [`sart`] that also returns the data residual `‖A x − p‖₂` after every sweep.
pub fn sart_with_residuals(
    p: &ProjectionStack,
    grid: &Grid,
    params: &SartParams,
    init: Option<&Volume3>,
) -> Result<(Volume3, Vec<f64>)> {
    run_sart(p, grid, params, init, true)
}

fn run_sart(
    p: &ProjectionStack,
    grid: &Grid,
    params: &SartParams,
    init: Option<&Volume3>,
    track: bool,
) -> Result<(Volume3, Vec<f64>)> {
    params.validate()?;
    grid.validate()?;
    let mut x = init_vector(grid, init)?;
    let mut residuals = Vec::new();
    if params.iterations > 0 {
        let mut ws = SartWorkspace::new(p, grid, params.view_order);
        for _ in 0..params.iterations {
            ws.sweep(&mut x, p, grid, params);
            if track {
                residuals.push(data_residual(&x, p, grid));
            }
        }
    }
    Ok((Volume3::from_f64(*grid, &x)?, residuals))
}

/// `‖A x − p‖₂` over the whole stack.
pub fn data_residual(x: &[f64], p: &ProjectionStack, grid: &Grid) -> f64 {
    let g = p.geometry();
    let mut fwd = vec![0.0; g.pixels_per_view()];
    let mut len = vec![0.0; g.pixels_per_view()];
    let mut sq = 0.0;
    for view in 0..g.n_views {
        project_view_with_lengths(x, grid, g, view, &mut fwd, &mut len);
        sq += fwd
            .iter()
            .zip(p.view(view))
            .map(|(&a, &m)| (a - m as f64).powi(2))
            .sum::<f64>();
    }
    sq.sqrt()
}
