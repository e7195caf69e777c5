//! The subcommands, as library functions writing into an output directory.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use ssrt_core::metrics::{delta_tv_percent, psnr, ssim_default, PsnrPeak};
use ssrt_core::penalty::TvConfig;
use ssrt_core::raster::Raster;
use ssrt_core::{Image, Sinogram};

use crate::config::RunConfig;
use crate::error::{HarnessError, Result};
use crate::harness::{self, CellResult, SimulatedCell};
use crate::report::{self, ComparisonRow, SummaryRow};

pub const SIMULATION_SNAPSHOT: &str = "simulate.toml";

pub fn phantom_path(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("phantom_{i:02}.ssrt"))
}
pub fn clean_path(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("clean_{i:02}.ssrt"))
}
pub fn counts_path(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("counts_{i:02}.ssrt"))
}
pub fn sinogram_path(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("sinogram_{i:02}.ssrt"))
}
pub fn record_path(dir: &Path, label: &str, i: usize) -> PathBuf {
    dir.join(format!("{label}_record_{i:02}.csv"))
}
pub fn image_path(dir: &Path, label: &str, i: usize) -> PathBuf {
    dir.join(format!("{label}_image_{i:02}.ssrt"))
}
pub fn summary_path(dir: &Path, label: &str) -> PathBuf {
    dir.join(format!("{label}_summary.csv"))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

fn write_raster(path: &Path, raster: &Raster) -> Result<()> {
    raster.write(path).map_err(|e| match e {
        ssrt_core::Error::Io(io) => HarnessError::io(path, io),
        other => other.into(),
    })
}

fn read_raster(path: &Path) -> Result<Raster> {
    Raster::read(path).map_err(|e| match e {
        ssrt_core::Error::Io(io) => HarnessError::io(path, io),
        ssrt_core::Error::Format(msg) => HarnessError::Input(format!("{}: {msg}", path.display())),
        other => other.into(),
    })
}

fn png(path: &Path, raster: &Raster, window: Option<[f64; 2]>) -> Result<()> {
    let w = window.unwrap_or_else(|| report::auto_window(&raster.data));
    report::export_png(&path.with_extension("png"), raster.rows, raster.cols, &raster.data, w)
}

/// All configurations in one invocation must describe the same data.
fn check_same_data(configs: &[RunConfig]) -> Result<&RunConfig> {
    let first = configs
        .first()
        .ok_or_else(|| HarnessError::Config("no configuration given".into()))?;
    if let Some(other) = configs.iter().find(|c| c.data_key() != first.data_key()) {
        return Err(HarnessError::Config(format!(
            "{} and {} describe different phantom sets (geometry, phantom and dose blocks must match)",
            first.label(),
            other.label()
        )));
    }
    Ok(first)
}

/// Write phantoms, clean sinograms, counts and noisy log sinograms.
pub fn simulate(configs: &[RunConfig], out: &Path) -> Result<Vec<SimulatedCell>> {
    let cfg = check_same_data(configs)?;
    ensure_dir(out)?;
    let cells = harness::simulate(cfg)?;
    cells.par_iter().try_for_each(|c| -> Result<()> {
        let i = c.index;
        let items: [(PathBuf, Raster, Option<[f64; 2]>); 4] = [
            (phantom_path(out, i), Raster::from(&c.phantom), Some(cfg.output.window)),
            (clean_path(out, i), Raster::from(&c.clean), None),
            (counts_path(out, i), Raster::from(&c.counts.0), None),
            (sinogram_path(out, i), Raster::from(&c.sinogram), None),
        ];
        for (path, raster, window) in &items {
            write_raster(path, raster)?;
            if cfg.output.export_png {
                png(path, raster, *window)?;
            }
        }
        Ok(())
    })?;
    report::write_bytes(&out.join(SIMULATION_SNAPSHOT), cfg.to_toml().as_bytes())?;
    Ok(cells)
}

/// Load the phantom/sinogram pairs written by [`simulate`].
pub fn load_simulation(cfg: &RunConfig, dir: &Path) -> Result<Vec<(Image, Sinogram)>> {
    let snapshot = dir.join(SIMULATION_SNAPSHOT);
    let simulated = RunConfig::load(&snapshot).map_err(|e| match e {
        HarnessError::Io { .. } => HarnessError::Input(format!(
            "no simulation found in {} (run `ssrt simulate` with the same config first)",
            dir.display()
        )),
        other => other,
    })?;
    if simulated.data_key() != cfg.data_key() {
        return Err(HarnessError::Input(format!(
            "{} was simulated with different geometry, phantom or dose settings",
            dir.display()
        )));
    }
    let geom = cfg.recon_geometry()?;
    (0..cfg.batch_size())
        .map(|i| {
            let phantom = Image::try_from(read_raster(&phantom_path(dir, i))?)?;
            let sinogram = Sinogram::try_from(read_raster(&sinogram_path(dir, i))?)?;
            if phantom.side() != cfg.geometry.side
                || sinogram.num_views() != geom.num_views
                || sinogram.num_bins() != geom.num_detector_bins
            {
                return Err(HarnessError::Input(format!(
                    "artifact {i} in {} does not match the configured geometry",
                    dir.display()
                )));
            }
            Ok((phantom, sinogram))
        })
        .collect()
}

/// Write records, final images and the summary for one method.
pub fn write_results(cfg: &RunConfig, out: &Path, results: &[CellResult]) -> Result<Vec<SummaryRow>> {
    let label = cfg.label();
    for r in results {
        harness::check_record(&r.record)?;
        report::write_record(&record_path(out, &label, r.index), &r.record)?;
        let path = image_path(out, &label, r.index);
        let raster = Raster::from(&r.record.image);
        write_raster(&path, &raster)?;
        if cfg.output.export_png {
            png(&path, &raster, Some(cfg.output.window))?;
        }
    }
    let rows: Vec<SummaryRow> = results.iter().map(|r| SummaryRow::new(&label, r)).collect();
    let path = summary_path(out, &label);
    report::write_summary(&path, &rows)?;
    report::write_bytes(&out.join(format!("{label}.toml")), cfg.to_toml().as_bytes())?;
    // Re-read so what is on disk is what gets verified.
    report::read_summary(&path)
}

fn incompatible(results: &[Vec<CellResult>]) -> Result<()> {
    let failed: usize = results.iter().map(|r| harness::count_incompatible(r)).sum();
    let total: usize = results.iter().map(Vec::len).sum();
    if failed > 0 {
        Err(HarnessError::NotCompatible { failed, total })
    } else {
        Ok(())
    }
}

fn run_methods(configs: &[RunConfig], data: &[(Image, Sinogram)]) -> Result<Vec<Vec<CellResult>>> {
    configs
        .par_iter()
        .map(|cfg| {
            data.par_iter()
                .enumerate()
                .map(|(i, (phantom, sino))| harness::reconstruct_cell(cfg, i, phantom, sino))
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

/// Reconstruct from previously simulated artifacts in `out`.
pub fn reconstruct(configs: &[RunConfig], out: &Path) -> Result<Vec<Vec<SummaryRow>>> {
    let cfg = check_same_data(configs)?;
    let data = load_simulation(cfg, out)?;
    let results = run_methods(configs, &data)?;
    let summaries = configs
        .iter()
        .zip(&results)
        .map(|(c, r)| write_results(c, out, r))
        .collect::<Result<Vec<_>>>()?;
    incompatible(&results)?;
    Ok(summaries)
}

/// Simulate once, run every method, and tabulate.
pub fn compare(configs: &[RunConfig], out: &Path) -> Result<Vec<ComparisonRow>> {
    if configs.len() < 2 {
        return Err(HarnessError::Config("compare needs at least two configurations".into()));
    }
    let mut labels: Vec<String> = configs.iter().map(RunConfig::label).collect();
    labels.sort();
    if labels.windows(2).any(|w| w[0] == w[1]) {
        return Err(HarnessError::Config(
            "compared configurations need distinct names".into(),
        ));
    }
    let cells = simulate(configs, out)?;
    let data: Vec<(Image, Sinogram)> = cells.into_iter().map(|c| (c.phantom, c.sinogram)).collect();
    let results = run_methods(configs, &data)?;
    let summaries = configs
        .iter()
        .zip(&results)
        .map(|(c, r)| write_results(c, out, r))
        .collect::<Result<Vec<_>>>()?;
    let rows = report::compare(&summaries)?;
    report::write_bytes(&out.join("compare.csv"), &report::comparison_csv(&rows)?)?;
    report::write_bytes(&out.join("compare.txt"), report::comparison_table(&rows).as_bytes())?;
    incompatible(&results)?;
    Ok(rows)
}

/// PSNR, SSIM and ΔTV% of one image file against a reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageMetrics {
    pub psnr: f64,
    pub ssim: f64,
    pub delta_tv_percent: f64,
}

pub fn metrics(image: &Path, reference: &Path, peak: PsnrPeak, tv: &TvConfig) -> Result<ImageMetrics> {
    let x = Image::try_from(read_raster(image)?)?;
    let y = Image::try_from(read_raster(reference)?)?;
    Ok(ImageMetrics {
        psnr: psnr(&x, &y, peak)?,
        ssim: ssim_default(&x, &y)?,
        delta_tv_percent: delta_tv_percent(&x, &y, tv)?,
    })
}
