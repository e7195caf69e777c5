use super::{FanBeamGeometry, Projector};
use crate::error::{Error, Result};

/// Largest grid side for which a dense system matrix may be assembled.
pub const MAX_DENSE_SIDE: usize = 64;

/// Explicit row-major system matrix, for small reference problems only.
///
/// Rows are grouped into consecutive blocks of `bins_per_view` rows, one
/// block per view, so the same subset machinery applies as for the
/// matrix-free projector.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    bins_per_view: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn from_rows(rows: &[Vec<f64>], bins_per_view: usize) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || cols == 0 {
            return Err(Error::param("dense matrix must be non-empty"));
        }
        if bins_per_view == 0 || rows.len() % bins_per_view != 0 {
            return Err(Error::param(format!(
                "{} rows cannot be grouped into views of {bins_per_view}",
                rows.len()
            )));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::dims(cols, r.len()));
        }
        Ok(DenseMatrix {
            rows: rows.len(),
            cols,
            bins_per_view,
            data: rows.concat(),
        })
    }

    /// Assemble the system matrix of `geom` ray by ray.
    pub fn from_geometry(geom: &FanBeamGeometry) -> Result<Self> {
        geom.validate()?;
        if geom.num_pixels_per_side > MAX_DENSE_SIDE {
            return Err(Error::param(format!(
                "dense backend limited to {MAX_DENSE_SIDE}x{MAX_DENSE_SIDE} grids"
            )));
        }
        let cols = geom.num_pixels();
        let nb = geom.num_detector_bins;
        let rows = geom.num_views * nb;
        let mut data = vec![0.0; rows * cols];
        for v in 0..geom.num_views {
            for b in 0..nb {
                let row = &mut data[(v * nb + b) * cols..(v * nb + b + 1) * cols];
                for (p, w) in geom.ray_weights(v, b) {
                    row[p] += w;
                }
            }
        }
        Ok(DenseMatrix {
            rows,
            cols,
            bins_per_view: nb,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }
}

impl Projector for DenseMatrix {
    fn num_views(&self) -> usize {
        self.rows / self.bins_per_view
    }

    fn num_bins(&self) -> usize {
        self.bins_per_view
    }

    fn num_pixels(&self) -> usize {
        self.cols
    }

    fn forward_views(&self, x: &[f64], views: &[usize], out: &mut [f64]) {
        let nb = self.bins_per_view;
        for (k, &v) in views.iter().enumerate() {
            for b in 0..nb {
                let row = self.row(v * nb + b);
                out[k * nb + b] = row.iter().zip(x).map(|(a, xi)| a * xi).sum();
            }
        }
    }

    fn back_views(&self, y: &[f64], views: &[usize], out: &mut [f64]) {
        let nb = self.bins_per_view;
        out.iter_mut().for_each(|o| *o = 0.0);
        for (k, &v) in views.iter().enumerate() {
            for b in 0..nb {
                let yb = y[k * nb + b];
                for (o, a) in out.iter_mut().zip(self.row(v * nb + b)) {
                    *o += a * yb;
                }
            }
        }
    }
}
