use crate::error::{Error, Result};

/// Square attenuation map in cm⁻¹, stored row-major with row 0 at the top.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    side: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn zeros(side: usize) -> Self {
        Image {
            side,
            data: vec![0.0; side * side],
        }
    }

    pub fn filled(side: usize, value: f64) -> Self {
        Image {
            side,
            data: vec![value; side * side],
        }
    }

    pub fn from_vec(side: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != side * side {
            return Err(Error::dims(
                format!("{} values for side {side}", side * side),
                data.len(),
            ));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::param(format!("non-finite pixel value {v}")));
        }
        Ok(Image { side, data })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.side + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.side + col] = value;
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Projection onto the nonnegative orthant.
    pub fn clamp_nonnegative(&mut self) {
        for v in &mut self.data {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
    }

    /// Left-right mirror image.
    pub fn mirrored(&self) -> Image {
        let n = self.side;
        let mut out = Image::zeros(n);
        for r in 0..n {
            for c in 0..n {
                out.set(r, c, self.get(r, n - 1 - c));
            }
        }
        out
    }

    pub fn check_same_shape(&self, other: &Image) -> Result<()> {
        if self.side != other.side {
            return Err(Error::dims(
                format!("{0}x{0} image", self.side),
                format!("{0}x{0} image", other.side),
            ));
        }
        Ok(())
    }
}

/// View-major line-integral data: `num_views` rows of `num_bins` detector readings.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    num_views: usize,
    num_bins: usize,
    pub data: Vec<f64>,
}

impl Sinogram {
    pub fn zeros(num_views: usize, num_bins: usize) -> Self {
        Sinogram {
            num_views,
            num_bins,
            data: vec![0.0; num_views * num_bins],
        }
    }

    pub fn from_vec(num_views: usize, num_bins: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != num_views * num_bins {
            return Err(Error::dims(
                format!("{num_views}x{num_bins} sinogram"),
                format!("{} values", data.len()),
            ));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::param(format!("non-finite sinogram value {v}")));
        }
        Ok(Sinogram {
            num_views,
            num_bins,
            data,
        })
    }

    pub fn num_views(&self) -> usize {
        self.num_views
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn view(&self, v: usize) -> &[f64] {
        &self.data[v * self.num_bins..(v + 1) * self.num_bins]
    }

    pub fn view_mut(&mut self, v: usize) -> &mut [f64] {
        &mut self.data[v * self.num_bins..(v + 1) * self.num_bins]
    }

    /// Rows for the listed views, concatenated in list order.
    pub fn select_views(&self, views: &[usize]) -> Result<Sinogram> {
        let mut data = Vec::with_capacity(views.len() * self.num_bins);
        for &v in views {
            if v >= self.num_views {
                return Err(Error::ViewOutOfRange {
                    index: v,
                    num_views: self.num_views,
                });
            }
            data.extend_from_slice(self.view(v));
        }
        Ok(Sinogram {
            num_views: views.len(),
            num_bins: self.num_bins,
            data,
        })
    }
}
