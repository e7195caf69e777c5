//! CSV records, comparison tables and PNG export.

use std::path::Path;

use serde::{Deserialize, Serialize};
use ssrt_core::raster::write_atomic;
use ssrt_core::record::{RunRecord, Termination};

use crate::error::{HarnessError, Result};
use crate::harness::CellResult;

/// One line of a per-iteration record file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub variant: String,
    pub k: usize,
    pub ell: i64,
    pub beta: f64,
    pub phi: f64,
    pub proximity: f64,
    pub gate_fired: bool,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
}

/// One line of a per-method summary: the final metrics for one phantom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub phantom: usize,
    pub method: String,
    pub variant: String,
    pub termination: Termination,
    pub psnr: f64,
    pub ssim: f64,
    pub delta_tv_percent: f64,
    pub proximity: f64,
    pub epsilon: Option<f64>,
    pub iterations: usize,
    pub beta_sum: f64,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub runtime: f64,
}

impl SummaryRow {
    pub fn new(method: &str, cell: &CellResult) -> Self {
        let r = &cell.record;
        SummaryRow {
            phantom: cell.index,
            method: method.to_string(),
            variant: r.variant.to_string(),
            termination: r.termination,
            psnr: cell.report.psnr,
            ssim: cell.report.ssim,
            delta_tv_percent: cell.report.delta_tv_percent,
            proximity: cell.report.proximity,
            epsilon: r.epsilon,
            iterations: cell.report.iterations,
            beta_sum: r.beta_sum(),
            alpha: r.alpha,
            gamma: r.gamma,
            runtime: cell.report.runtime,
        }
    }

    /// Summability and ε-compatibility, from the stored columns alone.
    pub fn verify(&self) -> Result<()> {
        if let (Some(a), Some(g)) = (self.alpha, self.gamma) {
            if self.beta_sum > a / (1.0 - g) + 1e-9 {
                return Err(HarnessError::Input(format!(
                    "{} phantom {}: sum of beta {} exceeds alpha/(1-gamma) = {}",
                    self.method,
                    self.phantom,
                    self.beta_sum,
                    a / (1.0 - g)
                )));
            }
        }
        if self.termination == Termination::EpsilonCompatible {
            match self.epsilon {
                Some(eps) if self.proximity < eps => {}
                _ => {
                    return Err(HarnessError::Input(format!(
                        "{} phantom {}: marked epsilon-compatible but proximity {} is not below epsilon {:?}",
                        self.method, self.phantom, self.proximity, self.epsilon
                    )))
                }
            }
        }
        Ok(())
    }
}

fn to_csv<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| HarnessError::Input(format!("csv buffer: {e}")))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, bytes).map_err(|e| match e {
        ssrt_core::Error::Io(io) => HarnessError::io(path, io),
        other => other.into(),
    })
}

pub fn record_rows(record: &RunRecord) -> Vec<RecordRow> {
    record
        .rows
        .iter()
        .map(|r| RecordRow {
            variant: record.variant.to_string(),
            k: r.k,
            ell: r.ell,
            beta: r.beta,
            phi: r.phi,
            proximity: r.proximity,
            gate_fired: r.gate_fired,
            psnr: r.psnr,
            ssim: r.ssim,
        })
        .collect()
}

pub fn record_csv(record: &RunRecord) -> Result<Vec<u8>> {
    to_csv(record_rows(record))
}

pub fn write_record(path: &Path, record: &RunRecord) -> Result<()> {
    write(path, &record_csv(record)?)
}

pub fn summary_csv(rows: &[SummaryRow]) -> Result<Vec<u8>> {
    to_csv(rows)
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    write(path, &summary_csv(rows)?)
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut rows = Vec::new();
    for row in csv::Reader::from_reader(file).deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

pub fn read_record(path: &Path) -> Result<Vec<RecordRow>> {
    let rows: Vec<RecordRow> = read_csv(path)?;
    if rows.windows(2).any(|w| w[1].k <= w[0].k) {
        return Err(HarnessError::Input(format!("{}: rows are not ordered by k", path.display())));
    }
    Ok(rows)
}

/// Read a summary file and re-check every row's contracts.
pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let rows: Vec<SummaryRow> = read_csv(path)?;
    for row in &rows {
        row.verify()?;
    }
    Ok(rows)
}

/// Per-method statistics over the phantom batch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub method: String,
    pub phantoms: usize,
    pub psnr_mean: f64,
    /// Sample (n − 1) standard deviation; empty for a single phantom.
    pub psnr_std: Option<f64>,
    pub ssim_mean: f64,
    pub ssim_std: Option<f64>,
    pub delta_tv_mean: f64,
    pub iterations_mean: f64,
    pub proximity_mean: f64,
    pub epsilon_mean: Option<f64>,
    pub runtime_mean: f64,
    /// Metrics on which this method is best: highest PSNR and SSIM, smallest |ΔTV%|.
    pub best: String,
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn sample_std(v: &[f64]) -> Option<f64> {
    if v.len() < 2 {
        return None;
    }
    let m = mean(v);
    Some((v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt())
}

/// Aggregate the summaries of several methods run on the same phantoms.
pub fn compare(methods: &[Vec<SummaryRow>]) -> Result<Vec<ComparisonRow>> {
    if methods.len() < 2 {
        return Err(HarnessError::Input("comparison needs at least two methods".into()));
    }
    let ids = |rows: &[SummaryRow]| rows.iter().map(|r| r.phantom).collect::<Vec<_>>();
    let first = ids(&methods[0]);
    if first.is_empty() {
        return Err(HarnessError::Input("comparison needs at least one phantom".into()));
    }
    for rows in &methods[1..] {
        if ids(rows) != first {
            return Err(HarnessError::Input(format!(
                "method {} was run on a different phantom set",
                rows.first().map(|r| r.method.as_str()).unwrap_or("?")
            )));
        }
    }
    let mut out: Vec<ComparisonRow> = methods
        .iter()
        .map(|rows| {
            let col = |f: fn(&SummaryRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
            let psnr = col(|r| r.psnr);
            let ssim = col(|r| r.ssim);
            let eps: Vec<f64> = rows.iter().filter_map(|r| r.epsilon).collect();
            ComparisonRow {
                method: rows[0].method.clone(),
                phantoms: rows.len(),
                psnr_mean: mean(&psnr),
                psnr_std: sample_std(&psnr),
                ssim_mean: mean(&ssim),
                ssim_std: sample_std(&ssim),
                delta_tv_mean: mean(&col(|r| r.delta_tv_percent)),
                iterations_mean: mean(&col(|r| r.iterations as f64)),
                proximity_mean: mean(&col(|r| r.proximity)),
                epsilon_mean: (eps.len() == rows.len()).then(|| mean(&eps)),
                runtime_mean: mean(&col(|r| r.runtime)),
                best: String::new(),
            }
        })
        .collect();
    let best_by = |key: fn(&ComparisonRow) -> f64| {
        let top = out.iter().map(key).fold(f64::NEG_INFINITY, f64::max);
        out.iter().map(|r| key(r) == top).collect::<Vec<_>>()
    };
    let marks = [
        ("psnr", best_by(|r| r.psnr_mean)),
        ("ssim", best_by(|r| r.ssim_mean)),
        ("dtv", best_by(|r| -r.delta_tv_mean.abs())),
    ];
    for (i, row) in out.iter_mut().enumerate() {
        row.best = marks
            .iter()
            .filter(|(_, m)| m[i])
            .map(|(name, _)| *name)
            .collect::<Vec<_>>()
            .join("+");
    }
    Ok(out)
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> Result<Vec<u8>> {
    to_csv(rows)
}

/// Aligned plain-text rendering; `*` marks the best value in a column.
pub fn comparison_table(rows: &[ComparisonRow]) -> String {
    let pm = |m: f64, s: Option<f64>, p: usize| match s {
        Some(s) => format!("{m:.p$} ± {s:.p$}"),
        None => format!("{m:.p$}"),
    };
    let star = |row: &ComparisonRow, key: &str| if row.best.split('+').any(|b| b == key) { "*" } else { "" };
    let header = ["method", "PSNR (dB)", "SSIM", "ΔTV%", "iterations", "proximity", "ε", "t (s)"];
    let body: Vec<[String; 8]> = rows
        .iter()
        .map(|r| {
            [
                r.method.clone(),
                format!("{}{}", pm(r.psnr_mean, r.psnr_std, 2), star(r, "psnr")),
                format!("{}{}", pm(r.ssim_mean, r.ssim_std, 4), star(r, "ssim")),
                format!("{:.2}{}", r.delta_tv_mean, star(r, "dtv")),
                format!("{:.1}", r.iterations_mean),
                format!("{:.4}", r.proximity_mean),
                r.epsilon_mean.map(|e| format!("{e:.4}")).unwrap_or_else(|| "-".into()),
                format!("{:.2}", r.runtime_mean),
            ]
        })
        .collect();
    let mut widths = header.map(|h| h.chars().count());
    for line in &body {
        for (w, cell) in widths.iter_mut().zip(line) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let render = |cells: &[String]| {
        let mut s = String::new();
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            let pad = w - cell.chars().count();
            if i == 0 {
                s.push_str(cell);
                s.push_str(&" ".repeat(pad));
            } else {
                s.push_str("  ");
                s.push_str(&" ".repeat(pad));
                s.push_str(cell);
            }
        }
        s.trim_end().to_string()
    };
    let mut out = render(&header.map(String::from));
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    out.push('\n');
    for line in &body {
        out.push_str(&render(line));
        out.push('\n');
    }
    out
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    write(path, bytes)
}

/// 8-bit grayscale PNG of a row-major raster, linearly windowed to `[lo, hi]`.
pub fn export_png(path: &Path, rows: usize, cols: usize, data: &[f64], window: [f64; 2]) -> Result<()> {
    let [lo, hi] = window;
    let pixels: Vec<u8> = data
        .iter()
        .map(|&v| (((v - lo) / (hi - lo)).clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let img = image::GrayImage::from_raw(cols as u32, rows as u32, pixels)
        .ok_or_else(|| HarnessError::Input("raster size does not match its data".into()))?;
    let mut bytes = std::io::Cursor::new(Vec::new());
    img.write_to(&mut bytes, image::ImageFormat::Png)?;
    write(path, &bytes.into_inner())
}

/// Window spanning the finite range of `data`, for images without a natural display range.
pub fn auto_window(data: &[f64]) -> [f64; 2] {
    let lo = data.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        [lo, hi]
    } else {
        [lo, lo + 1.0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: &str, phantom: usize, psnr: f64) -> SummaryRow {
        SummaryRow {
            phantom,
            method: method.into(),
            variant: "basic".into(),
            termination: Termination::IterationBudget,
            psnr,
            ssim: 0.9,
            delta_tv_percent: -1.0,
            proximity: 1.0,
            epsilon: None,
            iterations: 12,
            beta_sum: 0.0,
            alpha: None,
            gamma: None,
            runtime: 0.1,
        }
    }

    #[test]
    fn std_matches_textbook_example() {
        // 2, 4, 4, 4, 5, 5, 7, 9: mean 5, sum of squares 32, sample variance 32/7.
        let v = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0];
        assert_eq!(mean(&v), 5.0);
        assert!((sample_std(&v).unwrap() - (32.0f64 / 7.0).sqrt()).abs() < 1e-15);
        assert_eq!(sample_std(&[1.0]), None);
    }

    #[test]
    fn identical_methods_give_identical_rows() {
        let a: Vec<_> = (0..3).map(|i| row("a", i, 30.0 + i as f64)).collect();
        let rows = compare(&[a.clone(), a]).unwrap();
        let mut second = rows[1].clone();
        second.method = rows[0].method.clone();
        assert_eq!(rows[0], second);
        assert_eq!(rows[0].best, "psnr+ssim+dtv");
    }

    #[test]
    fn mismatched_phantoms_are_rejected() {
        let a: Vec<_> = (0..3).map(|i| row("a", i, 30.0)).collect();
        let b: Vec<_> = (1..4).map(|i| row("b", i, 30.0)).collect();
        assert!(compare(&[a.clone(), b]).is_err());
        assert!(compare(&[a]).is_err());
    }

    #[test]
    fn table_marks_the_best_method() {
        let a: Vec<_> = (0..2).map(|i| row("basic", i, 30.0)).collect();
        let b: Vec<_> = (0..2).map(|i| row("pnp", i, 32.0 + i as f64)).collect();
        let rows = compare(&[a, b]).unwrap();
        assert_eq!(rows[1].best, "psnr+ssim+dtv");
        assert_eq!(rows[0].best, "ssim+dtv");
        let table = comparison_table(&rows);
        assert!(table.contains("32.50 ± 0.71*"), "{table}");
        let lines: Vec<_> = table.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[2].chars().count(), lines[3].chars().count());
    }

    #[test]
    fn summary_round_trip_and_verification() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let mut r = row("pnp", 0, 31.0);
        r.termination = Termination::EpsilonCompatible;
        r.epsilon = Some(2.0);
        r.alpha = Some(1.0);
        r.gamma = Some(0.5);
        r.beta_sum = 1.5;
        write_summary(&path, &[r.clone()]).unwrap();
        assert_eq!(read_summary(&path).unwrap(), vec![r.clone()]);
        r.beta_sum = 2.5;
        write_summary(&path, &[r]).unwrap();
        assert!(read_summary(&path).is_err());
    }
}
