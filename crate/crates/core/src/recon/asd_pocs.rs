use std::io::Write;

use serde::{Deserialize, Serialize};

use super::sart::{data_residual, SartParams, SartWorkspace};
use super::tv::{total_variation, tv_gradient};
use crate::error::{Error, Result};
use crate::geometry::ProjectionStack;
use crate::volume::{Grid, Volume3};

/// Halvings tried before a TV descent step is abandoned.
const MAX_BACKTRACK: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsdPocsParams {
    pub iterations: usize,
    pub tv_steps_per_iter: usize,
    /// Initial TV step as a fraction of the first data-consistency step.
    pub alpha: f64,
    /// Factor applied to the TV step whenever it outgrows the data step.
    pub alpha_red: f64,
    /// Largest tolerated ratio of TV-step to data-step size.
    pub r_max: f64,
    pub sart_inner: SartParams,
}

impl Default for AsdPocsParams {
    fn default() -> Self {
        AsdPocsParams {
            iterations: 20,
            tv_steps_per_iter: 20,
            alpha: 0.2,
            alpha_red: 0.95,
            r_max: 0.95,
            sart_inner: SartParams {
                iterations: 1,
                ..SartParams::default()
            },
        }
    }
}

impl AsdPocsParams {
    pub fn validate(&self) -> Result<()> {
        self.sart_inner.validate()?;
        if self.iterations == 0 {
            return Err(Error::param("ASD-POCS iterations must be positive"));
        }
        if self.sart_inner.iterations == 0 {
            return Err(Error::param("ASD-POCS inner SART iterations must be positive"));
        }
        if !(self.alpha_red > 0.0 && self.alpha_red < 1.0) {
            return Err(Error::param(format!("alpha_red must lie in (0, 1), got {}", self.alpha_red)));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::param(format!("alpha must be finite and ≥ 0, got {}", self.alpha)));
        }
        if !(self.r_max > 0.0) || !self.r_max.is_finite() {
            return Err(Error::param(format!("r_max must be positive, got {}", self.r_max)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationDiagnostics {
    pub iteration: usize,
    /// `‖A x − p‖₂` right after the data-consistency pass.
    pub residual: f64,
    /// TV at the end of the iteration.
    pub tv: f64,
    /// TV step length in effect during this iteration.
    pub tv_step: f64,
    /// TV before the descent and after every descent step.
    pub tv_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AsdPocsDiagnostics {
    pub iterations: Vec<IterationDiagnostics>,
}

impl AsdPocsDiagnostics {
    /// CSV with header `iteration,residual,tv`.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "iteration,residual,tv")?;
        for it in &self.iterations {
            writeln!(w, "{},{},{}", it.iteration, it.residual, it.tv)?;
        }
        Ok(())
    }
}

fn l2_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Adaptive steepest descent / projection onto convex sets.
///
/// Each iteration runs a SART data-consistency pass (with the inner params'
/// positivity clip) and then `tv_steps_per_iter` normalized gradient-descent
/// steps on isotropic TV. The TV step starts at `alpha` times the first data
/// step and shrinks by `alpha_red` whenever the TV move exceeds `r_max` times
/// the data move while the data residual is nonzero.
pub fn asd_pocs(p: &ProjectionStack, grid: &Grid, params: &AsdPocsParams) -> Result<(Volume3, AsdPocsDiagnostics)> {
    params.validate()?;
    grid.validate()?;
    let mut x = vec![0.0f64; grid.len()];
    let mut ws = SartWorkspace::new(p, grid, params.sart_inner.view_order);
    let mut diag = AsdPocsDiagnostics::default();
    let mut tv_step = 0.0;

    for iteration in 0..params.iterations {
        let before = x.clone();
        for _ in 0..params.sart_inner.iterations {
            ws.sweep(&mut x, p, grid, &params.sart_inner);
        }
        let residual = data_residual(&x, p, grid);
        let data_step = l2_diff(&x, &before);
        if iteration == 0 {
            tv_step = params.alpha * data_step;
        }

        let tv_start = x.clone();
        let mut tv_now = total_variation(&x, grid);
        let mut tv_trace = vec![tv_now];
        let step_used = tv_step;
        if params.tv_steps_per_iter > 0 && tv_step > 0.0 {
            for _ in 0..params.tv_steps_per_iter {
                let grad = tv_gradient(&x, grid);
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if !(norm > 0.0) {
                    tv_trace.push(tv_now);
                    continue;
                }
                // backtrack so that no descent step increases TV
                let mut step = tv_step / norm;
                let mut accepted = None;
                for _ in 0..MAX_BACKTRACK {
                    let trial: Vec<f64> = x.iter().zip(&grad).map(|(xi, gi)| xi - step * gi).collect();
                    let tv_trial = total_variation(&trial, grid);
                    if tv_trial <= tv_now {
                        accepted = Some((trial, tv_trial));
                        break;
                    }
                    step *= 0.5;
                }
                if let Some((trial, tv_trial)) = accepted {
                    x = trial;
                    tv_now = tv_trial;
                }
                tv_trace.push(tv_now);
            }
            let tv_move = l2_diff(&x, &tv_start);
            if tv_move > params.r_max * data_step && residual > 0.0 {
                tv_step *= params.alpha_red;
            }
        }

        diag.iterations.push(IterationDiagnostics {
            iteration,
            residual,
            tv: tv_now,
            tv_step: step_used,
            tv_trace,
        });
    }
    Ok((Volume3::from_f64(*grid, &x)?, diag))
}
