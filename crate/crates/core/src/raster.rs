//! Raw little-endian `f32` raster files with a 16-byte header:
//!
//! ```text
//! offset  size  field
//!      0     4  magic "SSRT"
//!      4     2  version (u16, currently 1)
//!      6     4  rows (u32)
//!     10     4  cols (u32)
//!     14     2  padding (zero)
//! ```
//!
//! Images are stored as `side × side`, sinograms as `views × bins`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Image, Sinogram};

pub const MAGIC: &[u8; 4] = b"SSRT";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Raster {
    pub fn encode(&self) -> Result<Vec<u8>> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::dims(self.rows * self.cols, self.data.len()));
        }
        let rows = u32::try_from(self.rows).map_err(|_| Error::Format("too many rows".into()))?;
        let cols = u32::try_from(self.cols).map_err(|_| Error::Format("too many cols".into()))?;
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&rows.to_le_bytes());
        out.extend_from_slice(&cols.to_le_bytes());
        out.extend_from_slice(&[0, 0]);
        for &v in &self.data {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Raster> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format(format!("{} bytes is shorter than the header", bytes.len())));
        }
        if &bytes[0..4] != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let rows = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        let cols = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
        let body = &bytes[HEADER_LEN..];
        if body.len() != 4 * rows * cols {
            return Err(Error::Format(format!(
                "{rows}x{cols} raster needs {} data bytes, found {}",
                4 * rows * cols,
                body.len()
            )));
        }
        let data = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        Ok(Raster { rows, cols, data })
    }

    pub fn read(path: &Path) -> Result<Raster> {
        Raster::decode(&fs::read(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.encode()?)
    }
}

impl From<&Image> for Raster {
    fn from(img: &Image) -> Self {
        Raster {
            rows: img.side(),
            cols: img.side(),
            data: img.data.clone(),
        }
    }
}

impl From<&Sinogram> for Raster {
    fn from(s: &Sinogram) -> Self {
        Raster {
            rows: s.num_views(),
            cols: s.num_bins(),
            data: s.data.clone(),
        }
    }
}

impl TryFrom<Raster> for Image {
    type Error = Error;

    fn try_from(r: Raster) -> Result<Image> {
        if r.rows != r.cols {
            return Err(Error::dims("square raster", format!("{}x{}", r.rows, r.cols)));
        }
        Image::from_vec(r.rows, r.data)
    }
}

impl TryFrom<Raster> for Sinogram {
    type Error = Error;

    fn try_from(r: Raster) -> Result<Sinogram> {
        Sinogram::from_vec(r.rows, r.cols, r.data)
    }
}

/// Write to a sibling temporary file, then rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
