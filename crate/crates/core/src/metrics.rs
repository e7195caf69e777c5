//! Image quality metrics: PSNR, global SSIM and relative TV error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Image;
use crate::penalty::{tv_value, TvConfig};

/// Numerator convention for PSNR.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsnrPeak {
    /// `10·log10(y_max / MSE)`
    #[default]
    Linear,
    /// `10·log10(y_max² / MSE)`, the usual textbook form.
    Squared,
}

/// PSNR of `x` against the reference `y`, in dB. Identical images give
/// `f64::INFINITY`.
pub fn psnr(x: &Image, y: &Image, peak: PsnrPeak) -> Result<f64> {
    x.check_same_shape(y)?;
    let y_max = y.max();
    if y.data.iter().all(|&v| v == 0.0) {
        return Err(Error::param("PSNR reference image is identically zero"));
    }
    let mse = x
        .data
        .iter()
        .zip(&y.data)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / x.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    let numerator = match peak {
        PsnrPeak::Linear => y_max,
        PsnrPeak::Squared => y_max * y_max,
    };
    Ok(10.0 * (numerator / mse).log10())
}

/// Stabilising constants `(C₁, C₂) = ((0.01 L)², (0.03 L)²)` with `L = y_max`.
pub fn default_ssim_constants(y: &Image) -> (f64, f64) {
    let l = y.max();
    ((0.01 * l).powi(2), (0.03 * l).powi(2))
}

/// SSIM from whole-image moments (population variances).
pub fn ssim(x: &Image, y: &Image, c1: f64, c2: f64) -> Result<f64> {
    x.check_same_shape(y)?;
    let n = x.len() as f64;
    let mx = x.data.iter().sum::<f64>() / n;
    let my = y.data.iter().sum::<f64>() / n;
    let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.data.iter().zip(&y.data) {
        let (da, db) = (a - mx, b - my);
        vx += da * da;
        vy += db * db;
        cxy += da * db;
    }
    vx /= n;
    vy /= n;
    cxy /= n;
    Ok(((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2)))
}

/// SSIM with [`default_ssim_constants`].
pub fn ssim_default(x: &Image, y: &Image) -> Result<f64> {
    let (c1, c2) = default_ssim_constants(y);
    ssim(x, y, c1, c2)
}

/// `(φ(y) − φ(x)) / φ(y) × 100`; negative when `x` has more TV than `y`.
pub fn delta_tv_percent(x: &Image, y: &Image, cfg: &TvConfig) -> Result<f64> {
    x.check_same_shape(y)?;
    let ty = tv_value(y, cfg);
    let tx = tv_value(x, cfg);
    Ok((ty - tx) / ty * 100.0)
}

/// One row of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub psnr: f64,
    pub ssim: f64,
    pub delta_tv_percent: f64,
    pub proximity: f64,
    pub iterations: usize,
    pub runtime: f64,
}

impl MetricReport {
    pub fn evaluate(
        x: &Image,
        reference: &Image,
        tv: &TvConfig,
        peak: PsnrPeak,
        proximity: f64,
        iterations: usize,
        runtime: f64,
    ) -> Result<Self> {
        Ok(MetricReport {
            psnr: psnr(x, reference, peak)?,
            ssim: ssim_default(x, reference)?,
            delta_tv_percent: delta_tv_percent(x, reference, tv)?,
            proximity,
            iterations,
            runtime,
        })
    }
}
