//! Fan-beam CT simulation and superiorized iterative reconstruction.
//!
//! The crate is organised around a feasibility-seeking basic algorithm
//! (block-iterative SART over ordered view subsets) and three drivers that
//! interleave bounded, summable perturbations with it:
//!
//! * [`superiorize::superiorize_conventional`]: normalized negative-gradient
//!   steps of a differentiable penalty with a geometric step schedule,
//! * [`superiorize::superiorize_adaptive`]: level-based step sizes driven by
//!   the desirability number,
//! * [`superiorize::superiorize_pnp`]: perturbations produced by an arbitrary
//!   image-to-image procedure such as a denoiser.
//!
//! All projections are matrix-free; [`geometry::DenseMatrix`] exists for
//! small reference problems.

pub mod denoise;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod metrics;
pub mod penalty;
pub mod phantom;
pub mod raster;
pub mod recon;
pub mod record;
pub mod superiorize;

pub use error::{Error, Result};
pub use geometry::{FanBeamGeometry, Image, Projector, Sinogram};
