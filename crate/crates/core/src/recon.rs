//! The basic algorithm: block-iterative SART (OS-SIRT) with projection onto
//! the nonnegative orthant, and the residual-norm proximity function.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Image, Projector, Sinogram};
use crate::linalg::{norm, reciprocal_or_zero};
use crate::penalty::Penalty;
use crate::record::{IterationRow, RunRecord, Termination, TraceOptions, Variant};

/// Views split into `W` interleaved subsets: subset `w` holds views
/// `w, w + W, w + 2W, …` (0-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetPartition {
    pub num_views: usize,
    pub subsets: Vec<Vec<usize>>,
}

impl SubsetPartition {
    pub fn num_subsets(&self) -> usize {
        self.subsets.len()
    }
}

pub fn partition_subsets(num_views: usize, num_subsets: usize) -> Result<SubsetPartition> {
    if num_subsets == 0 || num_subsets > num_views {
        return Err(Error::param(format!(
            "number of subsets must be in 1..={num_views}, got {num_subsets}"
        )));
    }
    let subsets = (0..num_subsets)
        .map(|w| (w..num_views).step_by(num_subsets).collect())
        .collect();
    Ok(SubsetPartition { num_views, subsets })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasicAlgorithmConfig {
    /// Relaxation ω ∈ (0, 2), constant over the run.
    #[serde(default = "default_relaxation")]
    pub relaxation: f64,
    #[serde(default = "default_subsets")]
    pub num_subsets: usize,
    #[serde(default = "default_true")]
    pub nonneg_projection: bool,
}

fn default_relaxation() -> f64 {
    1.0
}
fn default_subsets() -> usize {
    10
}
fn default_true() -> bool {
    true
}

impl Default for BasicAlgorithmConfig {
    fn default() -> Self {
        BasicAlgorithmConfig {
            relaxation: default_relaxation(),
            num_subsets: default_subsets(),
            nonneg_projection: true,
        }
    }
}

impl BasicAlgorithmConfig {
    pub fn validate(&self, num_views: usize) -> Result<()> {
        if !(self.relaxation > 0.0 && self.relaxation < 2.0) {
            return Err(Error::param(format!(
                "relaxation must lie in (0, 2), got {}",
                self.relaxation
            )));
        }
        if self.num_subsets == 0 || self.num_subsets > num_views {
            return Err(Error::param(format!(
                "num_subsets must be in 1..={num_views}, got {}",
                self.num_subsets
            )));
        }
        Ok(())
    }
}

/// A feasibility-seeking operator `P_T` together with its proximity function.
pub trait BasicAlgorithm: Sync {
    fn num_pixels(&self) -> usize;

    /// `x ← P_T(x)`
    fn apply(&self, x: &mut [f64]);

    /// `Pr_T(x)`
    fn proximity(&self, x: &[f64]) -> f64;
}

/// Per-subset data and SIRT weights, computed once per run.
struct SubsetBlock {
    views: Vec<usize>,
    data: Vec<f64>,
    /// Reciprocal row sums (M).
    row_weights: Vec<f64>,
    /// Reciprocal column sums (D); zero for pixels no ray in the subset touches.
    col_weights: Vec<f64>,
}

/// BI-SART: `P_T(x) = Proj_{R+} B_W ⋯ B_1 (x)` with
/// `B_w(x) = x − ω D_w A_wᵀ M_w (A_w x − b_w)`.
pub struct BiSart<'a, P: Projector + ?Sized> {
    op: &'a P,
    data: Vec<f64>,
    cfg: BasicAlgorithmConfig,
    partition: SubsetPartition,
    blocks: Vec<SubsetBlock>,
}

impl<'a, P: Projector + ?Sized> BiSart<'a, P> {
    pub fn new(op: &'a P, data: &[f64], cfg: BasicAlgorithmConfig) -> Result<Self> {
        cfg.validate(op.num_views())?;
        let partition = partition_subsets(op.num_views(), cfg.num_subsets)?;
        Self::with_partition(op, data, cfg, partition)
    }

    pub fn with_partition(
        op: &'a P,
        data: &[f64],
        cfg: BasicAlgorithmConfig,
        partition: SubsetPartition,
    ) -> Result<Self> {
        cfg.validate(op.num_views())?;
        let expected = op.num_views() * op.num_bins();
        if data.len() != expected {
            return Err(Error::dims(format!("{expected} sinogram values"), data.len()));
        }
        if partition.num_views != op.num_views() {
            return Err(Error::dims(
                format!("partition of {} views", op.num_views()),
                partition.num_views,
            ));
        }
        let nb = op.num_bins();
        let blocks = partition
            .subsets
            .iter()
            .map(|views| {
                let block_data = views
                    .iter()
                    .flat_map(|&v| data[v * nb..(v + 1) * nb].iter().copied())
                    .collect();
                Ok(SubsetBlock {
                    row_weights: reciprocal_or_zero(&op.row_sums(views)?),
                    col_weights: reciprocal_or_zero(&op.col_sums(views)?),
                    views: views.clone(),
                    data: block_data,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BiSart {
            op,
            data: data.to_vec(),
            cfg,
            partition,
            blocks,
        })
    }

    pub fn partition(&self) -> &SubsetPartition {
        &self.partition
    }

    pub fn config(&self) -> &BasicAlgorithmConfig {
        &self.cfg
    }

    /// One block update `B_w` (no nonnegativity projection).
    pub fn apply_block(&self, w: usize, x: &mut [f64]) {
        let block = &self.blocks[w];
        let mut resid = vec![0.0; block.data.len()];
        self.op.forward_views(x, &block.views, &mut resid);
        for ((r, b), m) in resid.iter_mut().zip(&block.data).zip(&block.row_weights) {
            *r = (*r - b) * m;
        }
        let mut grad = vec![0.0; x.len()];
        self.op.back_views(&resid, &block.views, &mut grad);
        let omega = self.cfg.relaxation;
        for ((xi, g), d) in x.iter_mut().zip(&grad).zip(&block.col_weights) {
            *xi -= omega * d * g;
        }
    }

    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let views = self.op.all_views();
        let mut r = vec![0.0; self.data.len()];
        self.op.forward_views(x, &views, &mut r);
        for (ri, b) in r.iter_mut().zip(&self.data) {
            *ri -= b;
        }
        r
    }
}

impl<P: Projector + ?Sized> BasicAlgorithm for BiSart<'_, P> {
    fn num_pixels(&self) -> usize {
        self.op.num_pixels()
    }

    fn apply(&self, x: &mut [f64]) {
        for w in 0..self.blocks.len() {
            self.apply_block(w, x);
        }
        if self.cfg.nonneg_projection {
            for v in x.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
    }

    fn proximity(&self, x: &[f64]) -> f64 {
        norm(&self.residual(x))
    }
}

fn check_sinogram<P: Projector + ?Sized>(op: &P, data: &Sinogram) -> Result<()> {
    if data.num_views() != op.num_views() || data.num_bins() != op.num_bins() {
        return Err(Error::dims(
            format!("{}x{} sinogram", op.num_views(), op.num_bins()),
            format!("{}x{} sinogram", data.num_views(), data.num_bins()),
        ));
    }
    Ok(())
}

/// One BI-SART sweep from `x`.
pub fn bisart_apply<P: Projector + ?Sized>(
    x: &Image,
    op: &P,
    data: &Sinogram,
    cfg: &BasicAlgorithmConfig,
) -> Result<Image> {
    check_sinogram(op, data)?;
    if x.len() != op.num_pixels() {
        return Err(Error::dims(op.num_pixels(), x.len()));
    }
    let alg = BiSart::new(op, &data.data, *cfg)?;
    let mut out = x.clone();
    alg.apply(&mut out.data);
    Ok(out)
}

/// `‖A x − b‖₂`
pub fn proximity<P: Projector + ?Sized>(x: &Image, op: &P, data: &Sinogram) -> Result<f64> {
    check_sinogram(op, data)?;
    let ax = op.forward(&x.data, &op.all_views())?;
    Ok(norm(&crate::linalg::sub(&ax, &data.data)))
}

/// Iterate the basic algorithm a fixed number of times. The final proximity
/// is the natural ε for a superiorized run on the same data.
pub fn run_basic(
    x0: &Image,
    basic: &dyn BasicAlgorithm,
    iterations: usize,
    penalty: &dyn Penalty,
    trace: TraceOptions<'_>,
) -> Result<RunRecord> {
    if iterations == 0 {
        return Err(Error::param("run_basic needs at least one iteration"));
    }
    if x0.len() != basic.num_pixels() {
        return Err(Error::dims(basic.num_pixels(), x0.len()));
    }
    let mut x = x0.clone();
    let mut rows = Vec::with_capacity(iterations);
    let mut iterates = Vec::new();
    for k in 1..=iterations {
        basic.apply(&mut x.data);
        let (psnr, ssim) = trace.quality(&x);
        rows.push(IterationRow {
            k,
            ell: -1,
            beta: 0.0,
            phi: penalty.value(&x),
            proximity: basic.proximity(&x.data),
            gate_fired: false,
            psnr,
            ssim,
        });
        if trace.keep_iterates {
            iterates.push(x.clone());
        }
    }
    Ok(RunRecord {
        variant: Variant::Basic,
        rows,
        perturbations: Vec::new(),
        image: x,
        termination: Termination::IterationBudget,
        epsilon: None,
        alpha: None,
        gamma: None,
        iterates,
    })
}
