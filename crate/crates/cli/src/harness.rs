//! Simulation and reconstruction of a phantom batch.

use std::time::Instant;

use rayon::prelude::*;
use ssrt_core::geometry::forward_project;
use ssrt_core::metrics::MetricReport;
use ssrt_core::penalty::{Penalty, TotalVariation};
use ssrt_core::phantom::{
    log_transform, random_ellipse_phantom, shepp_logan, simulate_counts, subsample_views, CountsSinogram,
};
use ssrt_core::recon::{run_basic, BasicAlgorithm, BiSart};
use ssrt_core::record::{IterationRow, RunRecord, Termination, TraceOptions, Variant};
use ssrt_core::superiorize::{postprocess, superiorize_adaptive, superiorize_conventional, superiorize_pnp, StopRule};
use ssrt_core::{Image, Sinogram};

use crate::config::{EpsilonSource, PhantomKind, RunConfig};
use crate::error::{HarnessError, Result};

/// Everything simulated for one phantom of the batch.
#[derive(Debug, Clone)]
pub struct SimulatedCell {
    pub index: usize,
    pub phantom: Image,
    /// Noiseless line integrals over all acquired views.
    pub clean: Sinogram,
    pub counts: CountsSinogram,
    /// Log-transformed data on the views kept for reconstruction.
    pub sinogram: Sinogram,
}

/// Outcome of one (phantom, method) reconstruction.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub index: usize,
    pub record: RunRecord,
    pub report: MetricReport,
}

/// Values are stored as f32 on disk; rounding here keeps in-memory runs
/// identical to runs that reload the files.
fn quantize(data: &mut [f64]) {
    for v in data {
        *v = *v as f32 as f64;
    }
}

pub fn phantom(cfg: &RunConfig, index: usize) -> Result<Image> {
    let p = &cfg.phantom;
    let side = cfg.geometry.side;
    let random = |i: usize| -> Result<Image> {
        let mut img = random_ellipse_phantom(side, p.num_ellipses, p.seed.wrapping_add(i as u64))?;
        let s = p.scale / ssrt_core::phantom::DEFAULT_SCALE;
        img.data.iter_mut().for_each(|v| *v *= s);
        Ok(img)
    };
    let mut img = match (p.kind, index) {
        (PhantomKind::SheppLogan, 0) | (PhantomKind::Suite, 0) => shepp_logan(side, p.scale)?,
        (PhantomKind::Suite, i) => random(i - 1)?,
        (PhantomKind::RandomEllipses, i) => random(i)?,
        (PhantomKind::SheppLogan, i) => {
            return Err(HarnessError::Input(format!("phantom index {i} outside a single-phantom batch")))
        }
    };
    quantize(&mut img.data);
    Ok(img)
}

pub fn simulate_cell(cfg: &RunConfig, index: usize) -> Result<SimulatedCell> {
    let phantom = phantom(cfg, index)?;
    let geom = cfg.acquisition_geometry()?;
    let clean = forward_project(&phantom, &geom, None)?;
    let i0 = cfg.effective_i0();
    let seed = cfg.dose.seed.wrapping_add(index as u64);
    let mut counts = simulate_counts(&clean, i0, seed, cfg.dose.noiseless)?;
    quantize(&mut counts.0.data);
    let mut sinogram = subsample_views(&log_transform(&counts, i0)?, cfg.dose.keep_every)?;
    quantize(&mut sinogram.data);
    Ok(SimulatedCell {
        index,
        phantom,
        clean,
        counts,
        sinogram,
    })
}

pub fn simulate(cfg: &RunConfig) -> Result<Vec<SimulatedCell>> {
    (0..cfg.batch_size())
        .into_par_iter()
        .map(|i| simulate_cell(cfg, i))
        .collect()
}

/// Run the configured variant on one phantom's data.
pub fn reconstruct_cell(cfg: &RunConfig, index: usize, phantom: &Image, sinogram: &Sinogram) -> Result<CellResult> {
    let geom = cfg.recon_geometry()?;
    let alg = BiSart::new(&geom, &sinogram.data, cfg.basic_config())?;
    let a = &cfg.algorithm;
    let tv = TotalVariation::new(a.tv);
    let trace = TraceOptions {
        reference: Some(phantom),
        psnr_peak: a.psnr_peak,
        keep_iterates: false,
    };
    let x0 = Image::zeros(cfg.geometry.side);
    let basic = |trace| run_basic(&x0, &alg, a.iterations, &tv, trace);
    let epsilon = || -> Result<f64> {
        match a.epsilon {
            EpsilonSource::Value(v) => Ok(v),
            EpsilonSource::Baseline => Ok(basic(TraceOptions::default())?
                .final_proximity()
                .expect("at least one iteration")),
        }
    };
    let stop = |eps| StopRule {
        epsilon: eps,
        max_outer_iterations: a.max_outer_iterations,
    };

    let (record, runtime) = match a.variant {
        Variant::Basic => timed(|| Ok(basic(trace)?))?,
        Variant::Postprocess => {
            let start = Instant::now();
            let mut rec = basic(trace)?;
            let image = postprocess(&rec.image, &a.denoiser)?;
            let runtime = start.elapsed().as_secs_f64();
            let (psnr, ssim) = quality(&image, phantom, a.psnr_peak);
            rec.epsilon = rec.final_proximity();
            rec.rows.push(IterationRow {
                k: rec.rows.len() + 1,
                ell: -1,
                beta: 0.0,
                phi: tv.value(&image),
                proximity: alg.proximity(&image.data),
                gate_fired: true,
                psnr,
                ssim,
            });
            rec.image = image;
            rec.variant = Variant::Postprocess;
            (rec, runtime)
        }
        Variant::Conventional => {
            let s = stop(epsilon()?);
            timed(|| Ok(superiorize_conventional(&x0, &alg, &tv, &a.conventional, &s, trace)?))?
        }
        Variant::Adaptive => {
            let s = stop(epsilon()?);
            let levels = a.adaptive.resolve(&alg, &tv, cfg.geometry.side)?;
            timed(|| Ok(superiorize_adaptive(&x0, &alg, &tv, &levels, &s, trace)?))?
        }
        Variant::Pnp => {
            let s = stop(epsilon()?);
            timed(|| Ok(superiorize_pnp(&x0, &alg, &a.denoiser, &a.pnp, &s, &tv, trace)?))?
        }
    };
    let proximity = record.final_proximity().expect("runs record at least one row");
    let report = MetricReport::evaluate(
        &record.image,
        phantom,
        &a.tv,
        a.psnr_peak,
        proximity,
        record.iterations(),
        runtime,
    )?;
    Ok(CellResult { index, record, report })
}

fn timed(f: impl FnOnce() -> Result<RunRecord>) -> Result<(RunRecord, f64)> {
    let start = Instant::now();
    let rec = f()?;
    Ok((rec, start.elapsed().as_secs_f64()))
}

fn quality(x: &Image, y: &Image, peak: ssrt_core::metrics::PsnrPeak) -> (Option<f64>, Option<f64>) {
    (
        ssrt_core::metrics::psnr(x, y, peak).ok(),
        ssrt_core::metrics::ssim_default(x, y).ok(),
    )
}

/// Reconstruct every cell of the batch; results are in phantom order.
pub fn reconstruct(cfg: &RunConfig, cells: &[SimulatedCell]) -> Result<Vec<CellResult>> {
    cells
        .par_iter()
        .map(|c| reconstruct_cell(cfg, c.index, &c.phantom, &c.sinogram))
        .collect()
}

/// Runs that ended at the safety cap.
pub fn count_incompatible(results: &[CellResult]) -> usize {
    results
        .iter()
        .filter(|r| r.record.termination == Termination::SafetyCap)
        .count()
}

/// Contract checks every emitted record must pass.
pub fn check_record(record: &RunRecord) -> Result<()> {
    if !record.is_summable(1e-9) {
        return Err(HarnessError::Input(format!(
            "{} run violates summability: sum of beta {} exceeds alpha/(1-gamma)",
            record.variant,
            record.beta_sum()
        )));
    }
    if record.termination == Termination::EpsilonCompatible && !record.is_epsilon_compatible() {
        return Err(HarnessError::Input(format!(
            "{} run reports epsilon-compatibility but its proximity is not below epsilon",
            record.variant
        )));
    }
    Ok(())
}
