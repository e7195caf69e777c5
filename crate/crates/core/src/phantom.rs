//! Synthetic phantoms and dose-dependent acquisition simulation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Image, Sinogram};

/// Default peak attenuation, cm⁻¹.
pub const DEFAULT_SCALE: f64 = 0.3;

/// Means below this are sampled exactly by inversion; above it a rounded
/// normal approximation is used.
const POISSON_INVERSION_LIMIT: f64 = 30.0;

/// Ellipse in normalised coordinates ([-1, 1]², y up).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub value: f64,
    pub semi_x: f64,
    pub semi_y: f64,
    pub centre_x: f64,
    pub centre_y: f64,
    /// Rotation in degrees, counter-clockwise.
    pub angle: f64,
}

impl Ellipse {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.angle.to_radians().sin_cos();
        let dx = x - self.centre_x;
        let dy = y - self.centre_y;
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / self.semi_x).powi(2) + (v / self.semi_y).powi(2) <= 1.0
    }

    /// Axis-aligned bounding box `(x_min, x_max, y_min, y_max)`.
    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        let (s, c) = self.angle.to_radians().sin_cos();
        let hx = ((self.semi_x * c).powi(2) + (self.semi_y * s).powi(2)).sqrt();
        let hy = ((self.semi_x * s).powi(2) + (self.semi_y * c).powi(2)).sqrt();
        (
            self.centre_x - hx,
            self.centre_x + hx,
            self.centre_y - hy,
            self.centre_y + hy,
        )
    }
}

/// The ten ellipses of the modified (higher-contrast) Shepp-Logan head phantom.
pub const SHEPP_LOGAN: [Ellipse; 10] = [
    ell(1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    ell(-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    ell(-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    ell(-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    ell(0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    ell(0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    ell(0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    ell(0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    ell(0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    ell(0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
];

/// Whether `SHEPP_LOGAN[i]` has a left-right mirror image in the table
/// (itself, when centred on the vertical axis and unrotated).
pub fn has_mirror_partner(ellipses: &[Ellipse], i: usize) -> bool {
    let e = &ellipses[i];
    ellipses.iter().any(|o| {
        o.value == e.value
            && o.semi_x == e.semi_x
            && o.semi_y == e.semi_y
            && o.centre_x == -e.centre_x
            && o.centre_y == e.centre_y
            && (o.angle == -e.angle || (o.angle % 180.0 == 0.0 && e.angle % 180.0 == 0.0))
    })
}

const fn ell(value: f64, semi_x: f64, semi_y: f64, centre_x: f64, centre_y: f64, angle: f64) -> Ellipse {
    Ellipse {
        value,
        semi_x,
        semi_y,
        centre_x,
        centre_y,
        angle,
    }
}

/// Normalised coordinates of the centre of pixel (row, col).
pub fn pixel_centre(side: usize, row: usize, col: usize) -> (f64, f64) {
    let half = 0.5 * (side as f64 - 1.0);
    let scale = 2.0 / side as f64;
    ((col as f64 - half) * scale, (half - row as f64) * scale)
}

/// Sum of ellipse values at every pixel centre.
pub fn rasterize(side: usize, ellipses: &[Ellipse]) -> Image {
    let mut img = Image::zeros(side);
    for r in 0..side {
        for c in 0..side {
            let (x, y) = pixel_centre(side, r, c);
            let v: f64 = ellipses
                .iter()
                .filter(|e| e.contains(x, y))
                .map(|e| e.value)
                .sum();
            img.set(r, c, v);
        }
    }
    img
}

fn check_side(side: usize) -> Result<()> {
    if side < 16 {
        return Err(Error::param(format!("phantom side must be at least 16, got {side}")));
    }
    Ok(())
}

/// Shepp-Logan head phantom sampled at pixel centres, scaled so its maximum
/// equals `scale`.
pub fn shepp_logan(side: usize, scale: f64) -> Result<Image> {
    check_side(side)?;
    if !(scale > 0.0) {
        return Err(Error::param("phantom scale must be positive"));
    }
    let mut img = rasterize(side, &SHEPP_LOGAN);
    let peak = img.max();
    for v in &mut img.data {
        *v = (*v * scale / peak).max(0.0);
    }
    Ok(img)
}

/// Seeded phantom of overlapping ellipses inside a soft-tissue body,
/// clipped to be nonnegative and zero outside the support circle.
pub fn random_ellipse_phantom(side: usize, num_ellipses: usize, seed: u64) -> Result<Image> {
    check_side(side)?;
    if num_ellipses == 0 {
        return Err(Error::param("num_ellipses must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let body = ell(
        0.2 * DEFAULT_SCALE,
        rng.random_range(0.7..0.9),
        rng.random_range(0.6..0.9),
        0.0,
        0.0,
        rng.random_range(-30.0..30.0),
    );
    let mut ellipses = vec![body];
    for _ in 0..num_ellipses {
        let r = rng.random_range(0.0..0.6f64).sqrt() * 0.85;
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let value = if rng.random_bool(0.3) {
            -rng.random_range(0.02..0.06)
        } else {
            rng.random_range(0.02..0.25)
        };
        ellipses.push(ell(
            value,
            rng.random_range(0.04..0.3),
            rng.random_range(0.04..0.3),
            r * theta.cos(),
            r * theta.sin(),
            rng.random_range(0.0..180.0),
        ));
    }
    let mut img = rasterize(side, &ellipses);
    for r in 0..side {
        for c in 0..side {
            let (x, y) = pixel_centre(side, r, c);
            let v = if x * x + y * y < 1.0 {
                img.get(r, c).clamp(0.0, DEFAULT_SCALE)
            } else {
                0.0
            };
            img.set(r, c, v);
        }
    }
    Ok(img)
}

/// Expected or sampled photon counts, laid out like a [`Sinogram`].
#[derive(Debug, Clone, PartialEq)]
pub struct CountsSinogram(pub Sinogram);

/// Beam intensity and sampling protocol for one acquisition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoseProtocol {
    pub intensity_i0: f64,
    pub num_views: usize,
    pub rng_seed: u64,
}

/// Grid side and view count of the full-size acquisition that nominal
/// intensities refer to.
pub const REFERENCE_SIDE: usize = 512;
pub const REFERENCE_VIEWS: usize = 900;

/// Intensity giving a `side`² grid with `num_views` views the same
/// reconstructed pixel noise as `i0` on the reference acquisition.
///
/// Filtered back-projection pixel variance goes as `1/(I0·views·Δu²)`, and
/// the bin width Δu here scales with the pixel size at a fixed field of view.
pub fn equivalent_intensity(i0: f64, side: usize, num_views: usize) -> f64 {
    let s = side as f64 / REFERENCE_SIDE as f64;
    i0 * (REFERENCE_VIEWS as f64 / num_views as f64) * s * s
}

/// Photon counts `Poisson(I0·exp(−p))` per entry. With `noiseless` the
/// expectation is returned unrounded.
///
/// Each entry draws from its own ChaCha stream keyed by the entry index, so
/// results do not depend on the thread count.
pub fn simulate_counts(line_integrals: &Sinogram, i0: f64, seed: u64, noiseless: bool) -> Result<CountsSinogram> {
    if !(i0 > 0.0 && i0.is_finite()) {
        return Err(Error::param(format!("I0 must be positive, got {i0}")));
    }
    let data: Vec<f64> = line_integrals
        .data
        .par_iter()
        .enumerate()
        .map(|(i, &p)| {
            let mean = i0 * (-p).exp();
            if noiseless {
                mean
            } else {
                let mut rng = entry_rng(seed, i as u64);
                sample_poisson(mean, &mut rng)
            }
        })
        .collect();
    Ok(CountsSinogram(Sinogram::from_vec(
        line_integrals.num_views(),
        line_integrals.num_bins(),
        data,
    )?))
}

pub(crate) fn entry_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One Poisson draw: sequential inversion for small means, rounded normal
/// approximation above [`POISSON_INVERSION_LIMIT`].
pub fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    if mean < POISSON_INVERSION_LIMIT {
        let u: f64 = rng.random();
        let mut k = 0u64;
        let mut p = (-mean).exp();
        let mut cdf = p;
        while u > cdf && p > 0.0 {
            k += 1;
            p *= mean / k as f64;
            cdf += p;
        }
        k as f64
    } else {
        let z: f64 = rng.sample(StandardNormal);
        (mean + mean.sqrt() * z).round().max(0.0)
    }
}

/// `b = ln(I0 / max(c, 1))`: zero counts are clamped to one photon.
pub fn log_transform(counts: &CountsSinogram, i0: f64) -> Result<Sinogram> {
    if !(i0 > 0.0) {
        return Err(Error::param(format!("I0 must be positive, got {i0}")));
    }
    let s = &counts.0;
    let data = s.data.iter().map(|&c| (i0 / c.max(1.0)).ln()).collect();
    Sinogram::from_vec(s.num_views(), s.num_bins(), data)
}

/// Keep views `0, k, 2k, …`.
pub fn subsample_views(sino: &Sinogram, keep_every: usize) -> Result<Sinogram> {
    if keep_every == 0 || sino.num_views() % keep_every != 0 {
        return Err(Error::param(format!(
            "keep_every = {keep_every} does not divide {} views",
            sino.num_views()
        )));
    }
    let views: Vec<usize> = (0..sino.num_views()).step_by(keep_every).collect();
    sino.select_views(&views)
}
