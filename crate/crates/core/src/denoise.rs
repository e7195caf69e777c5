//! Black-box image-to-image procedures usable as plug-and-play perturbations.
//!
//! Non-local means stands in for BM3D; a trained network would implement
//! the same [`Denoiser`] trait.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Image;

/// A deterministic, reentrant map from images to same-shape images.
pub trait Denoiser: Sync {
    fn denoise(&self, x: &Image) -> Image;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DenoiserSpec {
    Identity,
    /// Separable Gaussian blur; `sigma` in pixels.
    Gaussian { sigma: f64 },
    /// Median over a `(2·radius + 1)²` window.
    Median { radius: usize },
    /// Non-local means; `patch` and `window` are odd side lengths in pixels,
    /// `h` is the filtering strength in image units (cm⁻¹).
    Nlm { patch: usize, window: usize, h: f64 },
}

impl DenoiserSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DenoiserSpec::Identity => Ok(()),
            DenoiserSpec::Gaussian { sigma } if sigma > 0.0 && sigma.is_finite() => Ok(()),
            DenoiserSpec::Gaussian { sigma } => Err(Error::param(format!("gaussian sigma must be positive, got {sigma}"))),
            DenoiserSpec::Median { radius } if radius >= 1 => Ok(()),
            DenoiserSpec::Median { .. } => Err(Error::param("median radius must be at least 1")),
            DenoiserSpec::Nlm { patch, window, h } => {
                for (name, v) in [("patch", patch), ("window", window)] {
                    if v < 3 || v % 2 == 0 {
                        return Err(Error::param(format!("nlm {name} must be odd and >= 3, got {v}")));
                    }
                }
                if !(h > 0.0 && h.is_finite()) {
                    return Err(Error::param(format!("nlm h must be positive, got {h}")));
                }
                Ok(())
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DenoiserSpec::Identity => "identity",
            DenoiserSpec::Gaussian { .. } => "gaussian",
            DenoiserSpec::Median { .. } => "median",
            DenoiserSpec::Nlm { .. } => "nlm",
        }
    }
}

impl Denoiser for DenoiserSpec {
    fn denoise(&self, x: &Image) -> Image {
        match *self {
            DenoiserSpec::Identity => x.clone(),
            DenoiserSpec::Gaussian { sigma } => gaussian(x, sigma),
            DenoiserSpec::Median { radius } => median(x, radius),
            DenoiserSpec::Nlm { patch, window, h } => nlm(x, patch, window, h),
        }
    }
}

/// Validate `spec` and apply it.
pub fn denoise(x: &Image, spec: &DenoiserSpec) -> Result<Image> {
    spec.validate()?;
    Ok(spec.denoise(x))
}

#[inline]
fn clamp_index(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

fn gaussian(x: &Image, sigma: f64) -> Image {
    let n = x.side();
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= total);

    let mut tmp = Image::zeros(n);
    for r in 0..n {
        for c in 0..n {
            let v = kernel
                .iter()
                .zip(-radius..=radius)
                .map(|(k, d)| k * x.get(r, clamp_index(c as isize + d, n)))
                .sum();
            tmp.set(r, c, v);
        }
    }
    let mut out = Image::zeros(n);
    for r in 0..n {
        for c in 0..n {
            let v = kernel
                .iter()
                .zip(-radius..=radius)
                .map(|(k, d)| k * tmp.get(clamp_index(r as isize + d, n), c))
                .sum();
            out.set(r, c, v);
        }
    }
    out
}

fn median(x: &Image, radius: usize) -> Image {
    let n = x.side();
    let rad = radius as isize;
    let mut out = Image::zeros(n);
    let mut window = Vec::with_capacity((2 * radius + 1).pow(2));
    for r in 0..n {
        for c in 0..n {
            window.clear();
            for dr in -rad..=rad {
                for dc in -rad..=rad {
                    window.push(x.get(clamp_index(r as isize + dr, n), clamp_index(c as isize + dc, n)));
                }
            }
            let mid = window.len() / 2;
            let (_, m, _) = window.select_nth_unstable_by(mid, f64::total_cmp);
            out.set(r, c, *m);
        }
    }
    out
}

fn nlm(x: &Image, patch: usize, window: usize, h: f64) -> Image {
    let n = x.side();
    let pr = (patch / 2) as isize;
    let wr = (window / 2) as isize;
    // Gaussian weighting of squared differences inside a patch.
    let sigma_p = 0.5 * pr as f64;
    let mut pw = Vec::with_capacity(patch * patch);
    for dr in -pr..=pr {
        for dc in -pr..=pr {
            pw.push((-((dr * dr + dc * dc) as f64) / (2.0 * sigma_p * sigma_p)).exp());
        }
    }
    let pw_total: f64 = pw.iter().sum();
    pw.iter_mut().for_each(|w| *w /= pw_total);

    // Replicate-padded copy so patch lookups need no bounds checks.
    let pad = pr + wr;
    let np = n + 2 * pad as usize;
    let padded: Vec<f64> = (0..np * np)
        .map(|i| {
            let (r, c) = ((i / np) as isize - pad, (i % np) as isize - pad);
            x.get(clamp_index(r, n), clamp_index(c, n))
        })
        .collect();
    let at = |r: isize, c: isize| padded[((r + pad) as usize) * np + (c + pad) as usize];
    let inv_h2 = 1.0 / (h * h);

    let mut out = Image::zeros(n);
    out.data.par_chunks_mut(n).enumerate().for_each(|(r, row)| {
        let r = r as isize;
        for (c, o) in row.iter_mut().enumerate() {
            let c = c as isize;
            let (mut acc, mut norm) = (0.0, 0.0);
            for sr in r - wr..=r + wr {
                for sc in c - wr..=c + wr {
                    let mut dist = 0.0;
                    let mut k = 0;
                    for dr in -pr..=pr {
                        for dc in -pr..=pr {
                            let d = at(r + dr, c + dc) - at(sr + dr, sc + dc);
                            dist += pw[k] * d * d;
                            k += 1;
                        }
                    }
                    let w = (-dist * inv_h2).exp();
                    acc += w * at(sr, sc);
                    norm += w;
                }
            }
            *o = acc / norm;
        }
    });
    out
}
