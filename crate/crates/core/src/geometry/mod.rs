//! Fan-beam acquisition geometry and the matrix-free projector pair.
//!
//! Rays are traced with a Joseph-style driver: for a ray whose direction is
//! mostly along x, the image is sampled once per pixel column with linear
//! interpolation between the two nearest rows (and symmetrically for
//! y-major rays). Forward and back projection visit exactly the same
//! `(pixel, weight)` pairs, so the back projector is the exact transpose.

mod dense;
mod grid;

pub use dense::DenseMatrix;
pub use grid::{Image, Sinogram};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pixel sizes are in mm, attenuation in cm⁻¹.
const MM_TO_CM: f64 = 0.1;

/// Views per work item in the parallel back projector. Fixed so that the
/// summation order does not depend on the thread count.
const BACK_PROJECT_CHUNK: usize = 8;

/// Field of view of the default geometry: 512 pixels of 0.568 mm.
const DEFAULT_FOV_MM: f64 = 512.0 * 0.568;

/// A linear operator mapping images to view-organised sinograms.
///
/// `views` lists the sinogram rows (views) to compute, in order; the
/// corresponding data block is `views.len() * num_bins()` long. The
/// unchecked methods assume the caller has validated lengths and indices.
pub trait Projector: Sync {
    fn num_views(&self) -> usize;
    fn num_bins(&self) -> usize;
    fn num_pixels(&self) -> usize;

    /// `out = A_views x`
    fn forward_views(&self, x: &[f64], views: &[usize], out: &mut [f64]);

    /// `out = (A_views)^T y`
    fn back_views(&self, y: &[f64], views: &[usize], out: &mut [f64]);

    fn all_views(&self) -> Vec<usize> {
        (0..self.num_views()).collect()
    }

    fn check_views(&self, views: &[usize]) -> Result<()> {
        match views.iter().find(|&&v| v >= self.num_views()) {
            Some(&index) => Err(Error::ViewOutOfRange {
                index,
                num_views: self.num_views(),
            }),
            None => Ok(()),
        }
    }

    /// Checked `A_views x`.
    fn forward(&self, x: &[f64], views: &[usize]) -> Result<Vec<f64>> {
        if x.len() != self.num_pixels() {
            return Err(Error::dims(self.num_pixels(), x.len()));
        }
        self.check_views(views)?;
        let mut out = vec![0.0; views.len() * self.num_bins()];
        self.forward_views(x, views, &mut out);
        Ok(out)
    }

    /// Checked `(A_views)^T y`.
    fn back(&self, y: &[f64], views: &[usize]) -> Result<Vec<f64>> {
        if y.len() != views.len() * self.num_bins() {
            return Err(Error::dims(views.len() * self.num_bins(), y.len()));
        }
        self.check_views(views)?;
        let mut out = vec![0.0; self.num_pixels()];
        self.back_views(y, views, &mut out);
        Ok(out)
    }

    /// `A_views · 1`
    fn row_sums(&self, views: &[usize]) -> Result<Vec<f64>> {
        self.forward(&vec![1.0; self.num_pixels()], views)
    }

    /// `(A_views)^T · 1`
    fn col_sums(&self, views: &[usize]) -> Result<Vec<f64>> {
        self.back(&vec![1.0; views.len() * self.num_bins()], views)
    }
}

/// Flat-detector fan-beam scanner rotating about the image centre.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FanBeamGeometry {
    pub num_pixels_per_side: usize,
    pub pixel_size: f64,
    pub num_views: usize,
    pub angular_range: f64,
    pub num_detector_bins: usize,
    pub detector_bin_size: f64,
    pub source_to_center: f64,
    pub source_to_detector: f64,
}

impl FanBeamGeometry {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        num_pixels_per_side: usize,
        pixel_size: f64,
        num_views: usize,
        angular_range: f64,
        num_detector_bins: usize,
        detector_bin_size: f64,
        source_to_center: f64,
        source_to_detector: f64,
    ) -> Result<Self> {
        let geom = FanBeamGeometry {
            num_pixels_per_side,
            pixel_size,
            num_views,
            angular_range,
            num_detector_bins,
            detector_bin_size,
            source_to_center,
            source_to_detector,
        };
        geom.validate()?;
        Ok(geom)
    }

    /// Default scanner for a `side`×`side` grid: 600/1200 mm radii, a
    /// ~29 cm field of view, 1.5·side detector bins and a bin pitch that
    /// makes the fan cover the support circle with 2% margin.
    pub fn with_defaults(side: usize, num_views: usize) -> Result<Self> {
        if side == 0 {
            return Err(Error::InvalidGeometry("image side must be positive".into()));
        }
        let pixel_size = DEFAULT_FOV_MM / side as f64;
        let num_bins = (3 * side).div_ceil(2).max(2);
        Self::with_radii(side, pixel_size, num_views, num_bins, 600.0, 1200.0)
    }

    /// Geometry whose detector pitch is derived from the other parameters.
    pub fn with_radii(
        side: usize,
        pixel_size: f64,
        num_views: usize,
        num_detector_bins: usize,
        source_to_center: f64,
        source_to_detector: f64,
    ) -> Result<Self> {
        if num_detector_bins < 2 {
            return Err(Error::InvalidGeometry(
                "at least two detector bins are needed to span the fan".into(),
            ));
        }
        let radius = 0.5 * side as f64 * pixel_size;
        if !(radius < source_to_center) {
            return Err(Error::InvalidGeometry(format!(
                "support radius {radius} mm does not fit inside source radius {source_to_center} mm"
            )));
        }
        let half_angle = (radius / source_to_center).asin();
        let half_width = 1.02 * source_to_detector * half_angle.tan();
        let bin_size = 2.0 * half_width / (num_detector_bins - 1) as f64;
        Self::new(
            side,
            pixel_size,
            num_views,
            360.0,
            num_detector_bins,
            bin_size,
            source_to_center,
            source_to_detector,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidGeometry(msg));
        if self.num_pixels_per_side == 0 {
            return bad("image side must be positive".into());
        }
        if self.num_views == 0 {
            return bad("num_views must be at least 1".into());
        }
        if self.num_detector_bins == 0 {
            return bad("num_detector_bins must be at least 1".into());
        }
        for (name, v) in [
            ("pixel_size", self.pixel_size),
            ("angular_range", self.angular_range),
            ("detector_bin_size", self.detector_bin_size),
            ("source_to_center", self.source_to_center),
            ("source_to_detector", self.source_to_detector),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be finite and positive, got {v}"));
            }
        }
        if self.source_to_detector <= self.source_to_center {
            return bad(format!(
                "source_to_detector ({}) must exceed source_to_center ({})",
                self.source_to_detector, self.source_to_center
            ));
        }
        let radius = self.support_radius();
        if radius >= self.source_to_center {
            return bad(format!(
                "support radius {radius} mm reaches the source orbit {} mm",
                self.source_to_center
            ));
        }
        let needed = (radius / self.source_to_center).asin();
        let outer = 0.5 * (self.num_detector_bins as f64 - 1.0) * self.detector_bin_size;
        let covered = (outer / self.source_to_detector).atan();
        if covered <= needed {
            return bad(format!(
                "fan half-angle {:.4}° does not cover the support circle (needs > {:.4}°)",
                covered.to_degrees(),
                needed.to_degrees()
            ));
        }
        Ok(())
    }

    /// Radius of the circle inscribed in the image square, in mm.
    pub fn support_radius(&self) -> f64 {
        0.5 * self.num_pixels_per_side as f64 * self.pixel_size
    }

    pub fn num_pixels(&self) -> usize {
        self.num_pixels_per_side * self.num_pixels_per_side
    }

    pub fn view_angle(&self, view: usize) -> f64 {
        (view as f64 * self.angular_range / self.num_views as f64).to_radians()
    }

    pub fn source_position(&self, view: usize) -> [f64; 2] {
        let (s, c) = self.view_angle(view).sin_cos();
        [self.source_to_center * c, self.source_to_center * s]
    }

    /// Source position and unit direction of the ray hitting the centre of `bin`.
    pub fn ray(&self, view: usize, bin: usize) -> ([f64; 2], [f64; 2]) {
        let (s, c) = self.view_angle(view).sin_cos();
        let source = [self.source_to_center * c, self.source_to_center * s];
        let det_dist = self.source_to_detector - self.source_to_center;
        let u = (bin as f64 - 0.5 * (self.num_detector_bins as f64 - 1.0)) * self.detector_bin_size;
        let target = [-det_dist * c - u * s, -det_dist * s + u * c];
        let d = [target[0] - source[0], target[1] - source[1]];
        let len = d[0].hypot(d[1]);
        (source, [d[0] / len, d[1] / len])
    }

    /// Visit every `(pixel index, weight)` pair of the line through `source`
    /// along the unit vector `dir`. Weights are path lengths in cm.
    pub fn trace_ray(&self, source: [f64; 2], dir: [f64; 2], mut visit: impl FnMut(usize, f64)) {
        let n = self.num_pixels_per_side;
        let ps = self.pixel_size;
        let half = 0.5 * (n as f64 - 1.0);
        let nf = n as f64;
        // x-major rays step through columns and interpolate between rows; the
        // y-major case swaps the roles of rows and columns.
        let x_major = dir[0].abs() >= dir[1].abs();
        let (along, across) = if x_major { (0, 1) } else { (1, 0) };
        let weight = ps / dir[along].abs() * MM_TO_CM;
        for step in 0..n {
            // Coordinate of this column (or row) centre along the marching axis.
            let coord = if x_major {
                (step as f64 - half) * ps
            } else {
                (half - step as f64) * ps
            };
            let t = (coord - source[along]) / dir[along];
            let other = source[across] + t * dir[across];
            let frac_index = if x_major { half - other / ps } else { other / ps + half };
            if frac_index <= -1.0 || frac_index >= nf {
                continue;
            }
            let lo = frac_index.floor();
            let f = frac_index - lo;
            let lo = lo as isize;
            let mut emit = |idx: isize, w: f64| {
                if idx >= 0 && (idx as usize) < n && w != 0.0 {
                    let pixel = if x_major {
                        idx as usize * n + step
                    } else {
                        step * n + idx as usize
                    };
                    visit(pixel, w);
                }
            };
            emit(lo, weight * (1.0 - f));
            emit(lo + 1, weight * f);
        }
    }

    /// Explicit weights of one ray (one row of the system matrix).
    pub fn ray_weights(&self, view: usize, bin: usize) -> Vec<(usize, f64)> {
        let (source, dir) = self.ray(view, bin);
        let mut out = Vec::with_capacity(2 * self.num_pixels_per_side);
        self.trace_ray(source, dir, |p, w| out.push((p, w)));
        out
    }

    pub fn check_image(&self, image: &Image) -> Result<()> {
        if image.side() != self.num_pixels_per_side {
            return Err(Error::dims(
                format!("{0}x{0} image", self.num_pixels_per_side),
                format!("{0}x{0} image", image.side()),
            ));
        }
        Ok(())
    }

    fn forward_view(&self, x: &[f64], view: usize, out: &mut [f64]) {
        for (bin, o) in out.iter_mut().enumerate() {
            let (source, dir) = self.ray(view, bin);
            let mut acc = 0.0;
            self.trace_ray(source, dir, |p, w| acc += w * x[p]);
            *o = acc;
        }
    }

    fn back_view(&self, y: &[f64], view: usize, out: &mut [f64]) {
        for (bin, &yb) in y.iter().enumerate() {
            if yb == 0.0 {
                continue;
            }
            let (source, dir) = self.ray(view, bin);
            self.trace_ray(source, dir, |p, w| out[p] += w * yb);
        }
    }
}

impl Projector for FanBeamGeometry {
    fn num_views(&self) -> usize {
        self.num_views
    }

    fn num_bins(&self) -> usize {
        self.num_detector_bins
    }

    fn num_pixels(&self) -> usize {
        self.num_pixels_per_side * self.num_pixels_per_side
    }

    fn forward_views(&self, x: &[f64], views: &[usize], out: &mut [f64]) {
        let nb = self.num_detector_bins;
        out.par_chunks_mut(nb)
            .zip(views.par_iter())
            .for_each(|(row, &v)| self.forward_view(x, v, row));
    }

    fn back_views(&self, y: &[f64], views: &[usize], out: &mut [f64]) {
        let nb = self.num_detector_bins;
        let np = out.len();
        let partials: Vec<Vec<f64>> = views
            .par_chunks(BACK_PROJECT_CHUNK)
            .zip(y.par_chunks(BACK_PROJECT_CHUNK * nb))
            .map(|(vs, ys)| {
                let mut acc = vec![0.0; np];
                for (&v, yv) in vs.iter().zip(ys.chunks(nb)) {
                    self.back_view(yv, v, &mut acc);
                }
                acc
            })
            .collect();
        out.iter_mut().for_each(|o| *o = 0.0);
        for part in &partials {
            for (o, p) in out.iter_mut().zip(part) {
                *o += p;
            }
        }
    }
}

fn resolve_views(geom: &FanBeamGeometry, views: Option<&[usize]>) -> Result<Vec<usize>> {
    match views {
        Some(v) => {
            geom.check_views(v)?;
            Ok(v.to_vec())
        }
        None => Ok(geom.all_views()),
    }
}

/// `A x`, or `A_s x` when a view subset is given.
pub fn forward_project(image: &Image, geom: &FanBeamGeometry, views: Option<&[usize]>) -> Result<Sinogram> {
    geom.check_image(image)?;
    let views = resolve_views(geom, views)?;
    let data = geom.forward(&image.data, &views)?;
    Sinogram::from_vec(views.len(), geom.num_detector_bins, data)
}

/// `A^T y`, or `(A_s)^T y`; the sinogram rows correspond to `views` in order.
pub fn back_project(sino: &Sinogram, geom: &FanBeamGeometry, views: Option<&[usize]>) -> Result<Image> {
    let views = resolve_views(geom, views)?;
    if sino.num_views() != views.len() || sino.num_bins() != geom.num_detector_bins {
        return Err(Error::dims(
            format!("{}x{} sinogram", views.len(), geom.num_detector_bins),
            format!("{}x{} sinogram", sino.num_views(), sino.num_bins()),
        ));
    }
    let data = geom.back(&sino.data, &views)?;
    Image::from_vec(geom.num_pixels_per_side, data)
}

/// Row sums `A·1` and column sums `A^T·1`, the reciprocals of which form the
/// SIRT weights M and D.
pub fn row_col_sums(geom: &FanBeamGeometry, views: Option<&[usize]>) -> Result<(Sinogram, Image)> {
    geom.validate()?;
    let views = resolve_views(geom, views)?;
    let rows = geom.row_sums(&views)?;
    let cols = geom.col_sums(&views)?;
    Ok((
        Sinogram::from_vec(views.len(), geom.num_detector_bins, rows)?,
        Image::from_vec(geom.num_pixels_per_side, cols)?,
    ))
}
