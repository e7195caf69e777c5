//! Smoothed isotropic total variation and the penalty-function interface.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Image;

/// A differentiable secondary criterion steered downward by superiorization.
pub trait Penalty: Sync {
    fn value(&self, x: &Image) -> f64;
    fn gradient(&self, x: &Image) -> Image;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TvConfig {
    /// Smoothing term inside the square root; keeps φ differentiable.
    #[serde(default = "default_eps_tv")]
    pub eps_tv: f64,
}

fn default_eps_tv() -> f64 {
    1e-6
}

impl TvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eps_tv > 0.0 && self.eps_tv.is_finite() {
            Ok(())
        } else {
            Err(Error::param(format!("eps_tv must be positive, got {}", self.eps_tv)))
        }
    }
}

impl Default for TvConfig {
    fn default() -> Self {
        TvConfig { eps_tv: default_eps_tv() }
    }
}

/// Forward differences at pixel (m, n); a difference that would cross the
/// image edge is zero (replicate-edge boundary).
#[inline]
fn forward_diffs(x: &Image, m: usize, n: usize) -> (f64, f64) {
    let side = x.side();
    let v = x.get(m, n);
    let dm = if m + 1 < side { x.get(m + 1, n) - v } else { 0.0 };
    let dn = if n + 1 < side { x.get(m, n + 1) - v } else { 0.0 };
    (dm, dn)
}

/// φ(x) = Σ_{m,n} √((x_{m+1,n} − x_{m,n})² + (x_{m,n+1} − x_{m,n})² + ε²)
pub fn tv_value(x: &Image, cfg: &TvConfig) -> f64 {
    let side = x.side();
    let eps2 = cfg.eps_tv * cfg.eps_tv;
    let mut total = 0.0;
    for m in 0..side {
        for n in 0..side {
            let (dm, dn) = forward_diffs(x, m, n);
            total += (dm * dm + dn * dn + eps2).sqrt();
        }
    }
    total
}

/// Exact gradient of [`tv_value`].
pub fn tv_gradient(x: &Image, cfg: &TvConfig) -> Image {
    let side = x.side();
    let eps2 = cfg.eps_tv * cfg.eps_tv;
    let mut g = Image::zeros(side);
    for m in 0..side {
        for n in 0..side {
            let (dm, dn) = forward_diffs(x, m, n);
            let s = (dm * dm + dn * dn + eps2).sqrt();
            let (wm, wn) = (dm / s, dn / s);
            // The term at (m, n) depends on x[m,n], x[m+1,n] and x[m,n+1].
            let here = g.get(m, n);
            g.set(m, n, here - wm - wn);
            if m + 1 < side {
                let below = g.get(m + 1, n);
                g.set(m + 1, n, below + wm);
            }
            if n + 1 < side {
                let right = g.get(m, n + 1);
                g.set(m, n + 1, right + wn);
            }
        }
    }
    g
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TotalVariation {
    pub cfg: TvConfig,
}

impl TotalVariation {
    pub fn new(cfg: TvConfig) -> Self {
        TotalVariation { cfg }
    }
}

impl Penalty for TotalVariation {
    fn value(&self, x: &Image) -> f64 {
        tv_value(x, &self.cfg)
    }

    fn gradient(&self, x: &Image) -> Image {
        tv_gradient(x, &self.cfg)
    }
}
