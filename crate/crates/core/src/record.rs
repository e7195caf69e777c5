//! Per-iteration traces of reconstruction runs.

use serde::{Deserialize, Serialize};

use crate::geometry::Image;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Basic,
    Conventional,
    Adaptive,
    Pnp,
    Postprocess,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Basic => "basic",
            Variant::Conventional => "conventional",
            Variant::Adaptive => "adaptive",
            Variant::Pnp => "pnp",
            Variant::Postprocess => "postprocess",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Stopped because the proximity dropped below ε.
    EpsilonCompatible,
    /// Hit the outer-iteration safety cap without reaching ε.
    SafetyCap,
    /// Ran a fixed number of iterations (no stopping target).
    IterationBudget,
}

/// State after outer iteration `k` (1-based) has produced its iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub k: usize,
    /// Schedule counter after this iteration; −1 before any step was emitted.
    pub ell: i64,
    /// Sum of step sizes applied during this iteration.
    pub beta: f64,
    /// Penalty of the new iterate.
    pub phi: f64,
    pub proximity: f64,
    /// Whether a perturbation was computed this iteration.
    pub gate_fired: bool,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
}

/// One applied (or attempted) perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationEvent {
    /// 0-based outer iteration in which the step was taken.
    pub k: usize,
    /// Inner index for the conventional driver, 0 otherwise.
    pub n: usize,
    pub ell: Option<i64>,
    pub beta: f64,
    /// Norm of the direction vector; 0 when the step was skipped.
    pub direction_norm: f64,
    /// Penalty value the acceptance test compares against (φ(x^k)).
    pub phi_reference: f64,
    /// Penalty of the perturbed point.
    pub phi_perturbed: f64,
    /// Adaptive driver: level α_k in force for this step.
    pub level: Option<f64>,
    /// Adaptive driver: desirability number ζ_k.
    pub desirability: Option<f64>,
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub variant: Variant,
    pub rows: Vec<IterationRow>,
    pub perturbations: Vec<PerturbationEvent>,
    pub image: Image,
    pub termination: Termination,
    pub epsilon: Option<f64>,
    /// Initial step size α, once known (PnP may resolve it during the run).
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    /// Iterates `x^1, x^2, …` when requested through [`TraceOptions`].
    pub iterates: Vec<Image>,
}

impl RunRecord {
    pub fn iterations(&self) -> usize {
        self.rows.len()
    }

    pub fn final_proximity(&self) -> Option<f64> {
        self.rows.last().map(|r| r.proximity)
    }

    pub fn beta_sum(&self) -> f64 {
        self.perturbations.iter().map(|p| p.beta).sum()
    }

    /// `Σβ ≤ α/(1−γ) + tol`, vacuous for schedules without (α, γ).
    pub fn is_summable(&self, tol: f64) -> bool {
        match (self.alpha, self.gamma) {
            (Some(a), Some(g)) => self.beta_sum() <= a / (1.0 - g) + tol,
            (None, Some(_)) => self.beta_sum() == 0.0,
            _ => true,
        }
    }

    /// True when the run stopped normally with proximity strictly below ε.
    pub fn is_epsilon_compatible(&self) -> bool {
        match (self.termination, self.epsilon, self.final_proximity()) {
            (Termination::EpsilonCompatible, Some(eps), Some(p)) => p < eps,
            _ => false,
        }
    }

    pub fn final_image(&self) -> &Image {
        &self.image
    }
}

/// What to log while a driver runs.
#[derive(Clone, Copy)]
pub struct TraceOptions<'a> {
    /// Ground truth for per-iteration PSNR/SSIM.
    pub reference: Option<&'a Image>,
    pub psnr_peak: crate::metrics::PsnrPeak,
    /// Keep every iterate in [`RunRecord::iterates`].
    pub keep_iterates: bool,
}

impl Default for TraceOptions<'_> {
    fn default() -> Self {
        TraceOptions {
            reference: None,
            psnr_peak: crate::metrics::PsnrPeak::Linear,
            keep_iterates: false,
        }
    }
}

impl TraceOptions<'_> {
    pub(crate) fn quality(&self, x: &Image) -> (Option<f64>, Option<f64>) {
        match self.reference {
            Some(y) => (
                crate::metrics::psnr(x, y, self.psnr_peak).ok(),
                crate::metrics::ssim_default(x, y).ok(),
            ),
            None => (None, None),
        }
    }
}
