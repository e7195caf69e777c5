//! Superiorized versions of a basic algorithm.
//!
//! Every driver alternates a perturbation step `x ← x + β ν` with one
//! application of the basic algorithm `P_T` and stops at the first iterate
//! whose proximity is strictly below ε. The conventional and plug-and-play
//! drivers draw their step bounds from a geometric schedule `α γ^ℓ` with a
//! monotone counter `ℓ`, so the applied step sizes are summable.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::denoise::Denoiser;
use crate::error::{Error, Result};
use crate::geometry::Image;
use crate::linalg::{axpy, norm};
use crate::penalty::Penalty;
use crate::recon::BasicAlgorithm;
use crate::record::{IterationRow, PerturbationEvent, RunRecord, Termination, TraceOptions, Variant};

pub const DEFAULT_MAX_OUTER_ITERATIONS: usize = 2000;
pub const DEFAULT_MAX_TRIALS: usize = 500;

/// Geometric step-size generator `β = α γ^ℓ` with `ℓ` starting at −1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationSchedule {
    alpha: f64,
    gamma: f64,
    ell: i64,
}

impl PerturbationSchedule {
    pub fn new(alpha: f64, gamma: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::param(format!("alpha must be positive, got {alpha}")));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::param(format!("gamma must lie in (0, 1), got {gamma}")));
        }
        Ok(PerturbationSchedule { alpha, gamma, ell: -1 })
    }

    /// Advance `ℓ` and return `α γ^ℓ`.
    pub fn next_step(&mut self) -> f64 {
        self.ell += 1;
        self.current()
    }

    /// `α γ^ℓ` for the current `ℓ` (α when nothing has been emitted yet).
    pub fn current(&self) -> f64 {
        self.alpha * self.gamma.powi(self.ell.max(0) as i32)
    }

    pub fn ell(&self) -> i64 {
        self.ell
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Upper bound on the sum of all emitted steps, `α / (1 − γ)`.
    pub fn bound(&self) -> f64 {
        self.alpha / (1.0 - self.gamma)
    }
}

/// A parameter that is either given or derived from the run itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Setting {
    Auto,
    Value(f64),
}

impl Serialize for Setting {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Setting::Auto => s.serialize_str("auto"),
            Setting::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Setting {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Int(i64),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Setting::Value(v)),
            Raw::Int(v) => Ok(Setting::Value(v as f64)),
            Raw::Word(w) if w == "auto" => Ok(Setting::Auto),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "expected a number or \"auto\", got \"{w}\""
            ))),
        }
    }
}

/// Stopping rule shared by all drivers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub epsilon: f64,
    pub max_outer_iterations: usize,
}

impl StopRule {
    pub fn new(epsilon: f64) -> Self {
        StopRule {
            epsilon,
            max_outer_iterations: DEFAULT_MAX_OUTER_ITERATIONS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::param(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_outer_iterations == 0 {
            return Err(Error::param("max_outer_iterations must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConventionalConfig {
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "default_tv_gamma")]
    pub gamma: f64,
    /// Perturbations per outer iteration (N).
    #[serde(default = "default_inner_steps")]
    pub inner_steps: usize,
    /// Step-size trials before a perturbation is abandoned.
    #[serde(default = "default_max_trials")]
    pub max_trials: usize,
}

fn one() -> f64 {
    1.0
}
fn default_tv_gamma() -> f64 {
    0.9995
}
fn default_inner_steps() -> usize {
    20
}
fn default_max_trials() -> usize {
    DEFAULT_MAX_TRIALS
}

impl ConventionalConfig {
    pub fn validate(&self) -> Result<()> {
        PerturbationSchedule::new(self.alpha, self.gamma)?;
        if self.inner_steps == 0 {
            return Err(Error::param("inner_steps (N) must be at least 1"));
        }
        if self.max_trials == 0 {
            return Err(Error::param("max_trials must be at least 1"));
        }
        Ok(())
    }
}

impl Default for ConventionalConfig {
    fn default() -> Self {
        ConventionalConfig {
            alpha: 1.0,
            gamma: default_tv_gamma(),
            inner_steps: default_inner_steps(),
            max_trials: DEFAULT_MAX_TRIALS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptiveConfig {
    /// Initial level α₀; `auto` = φ(x̃)/2 with x̃ one basic sweep from zero.
    #[serde(default = "auto")]
    pub alpha0: Setting,
    /// Minimum level increment ϵ; `auto` = φ(x̃)/200.
    #[serde(default = "auto")]
    pub epsilon_inc: Setting,
    /// Noisy data: `α ← α + max{ϵ, −ζα}`; noiseless: `α ← α + max{ϵ, ζα}`.
    #[serde(default = "yes")]
    pub noisy: bool,
}

fn auto() -> Setting {
    Setting::Auto
}
fn yes() -> bool {
    true
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        AdaptiveConfig {
            alpha0: Setting::Auto,
            epsilon_inc: Setting::Auto,
            noisy: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PnpConfig {
    /// Initial step bound α; `auto` gives the first real perturbation a full step.
    #[serde(default = "auto")]
    pub alpha: Setting,
    #[serde(default = "default_pnp_gamma")]
    pub gamma: f64,
    /// First iteration at which the procedure is applied.
    #[serde(default)]
    pub k_min: usize,
    /// Iterations between applications.
    #[serde(default = "default_k_step")]
    pub k_step: usize,
}

fn default_pnp_gamma() -> f64 {
    0.95
}
fn default_k_step() -> usize {
    1
}

impl Default for PnpConfig {
    fn default() -> Self {
        PnpConfig {
            alpha: Setting::Auto,
            gamma: default_pnp_gamma(),
            k_min: 0,
            k_step: 1,
        }
    }
}

impl PnpConfig {
    /// `(k ≥ k_min) ∧ ((k − k_min) mod k_step = 0)`
    pub fn gate(&self, k: usize) -> bool {
        k >= self.k_min && (k - self.k_min) % self.k_step == 0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::param(format!("gamma must lie in (0, 1), got {}", self.gamma)));
        }
        if self.k_step == 0 {
            return Err(Error::param("k_step must be at least 1"));
        }
        if let Setting::Value(a) = self.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::param(format!("alpha must be positive, got {a}")));
            }
        }
        Ok(())
    }
}

fn check_start(x0: &Image, basic: &dyn BasicAlgorithm, stop: &StopRule) -> Result<()> {
    stop.validate()?;
    if x0.len() != basic.num_pixels() {
        return Err(Error::dims(basic.num_pixels(), x0.len()));
    }
    Ok(())
}

/// Shared bookkeeping: rows, events and the optional iterate history.
struct Recorder<'a> {
    variant: Variant,
    trace: TraceOptions<'a>,
    rows: Vec<IterationRow>,
    events: Vec<PerturbationEvent>,
    iterates: Vec<Image>,
}

impl<'a> Recorder<'a> {
    fn new(variant: Variant, trace: TraceOptions<'a>) -> Self {
        Recorder {
            variant,
            trace,
            rows: Vec::new(),
            events: Vec::new(),
            iterates: Vec::new(),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn row(&mut self, x: &Image, ell: i64, beta: f64, phi: f64, proximity: f64, gate_fired: bool) {
        let (psnr, ssim) = self.trace.quality(x);
        self.rows.push(IterationRow {
            k: self.rows.len() + 1,
            ell,
            beta,
            phi,
            proximity,
            gate_fired,
            psnr,
            ssim,
        });
        if self.trace.keep_iterates {
            self.iterates.push(x.clone());
        }
    }

    fn finish(
        self,
        image: Image,
        termination: Termination,
        epsilon: f64,
        alpha: Option<f64>,
        gamma: Option<f64>,
    ) -> RunRecord {
        RunRecord {
            variant: self.variant,
            rows: self.rows,
            perturbations: self.events,
            image,
            termination,
            epsilon: Some(epsilon),
            alpha,
            gamma,
            iterates: self.iterates,
        }
    }
}

/// Conventional superiorization: `N` normalized negative-gradient steps per
/// outer iteration, each shrunk along the schedule until the penalty drops
/// strictly below its value at the outer iterate `x^k`.
///
/// A zero gradient skips the step. A step that fails `max_trials` times is
/// abandoned (the schedule keeps the advanced `ℓ`).
pub fn superiorize_conventional(
    x0: &Image,
    basic: &dyn BasicAlgorithm,
    penalty: &dyn Penalty,
    cfg: &ConventionalConfig,
    stop: &StopRule,
    trace: TraceOptions<'_>,
) -> Result<RunRecord> {
    check_start(x0, basic, stop)?;
    cfg.validate()?;
    let mut schedule = PerturbationSchedule::new(cfg.alpha, cfg.gamma)?;
    let mut rec = Recorder::new(Variant::Conventional, trace);
    let mut x = x0.clone();

    for k in 0..stop.max_outer_iterations {
        let phi_k = penalty.value(&x);
        let mut inner = x.clone();
        let mut beta_total = 0.0;
        for n in 0..cfg.inner_steps {
            let grad = penalty.gradient(&inner);
            let gnorm = norm(&grad.data);
            let skipped_event = |ell| PerturbationEvent {
                k,
                n,
                ell: Some(ell),
                beta: 0.0,
                direction_norm: 0.0,
                phi_reference: phi_k,
                phi_perturbed: phi_k,
                level: None,
                desirability: None,
                skipped: true,
            };
            if !(gnorm > 0.0 && gnorm.is_finite()) {
                rec.events.push(skipped_event(schedule.ell()));
                continue;
            }
            let direction: Vec<f64> = grad.data.iter().map(|g| -g / gnorm).collect();
            let mut accepted = None;
            for _ in 0..cfg.max_trials {
                let beta = schedule.next_step();
                let mut z = inner.clone();
                axpy(beta, &direction, &mut z.data);
                let phi_z = penalty.value(&z);
                if phi_z < phi_k {
                    accepted = Some((z, beta, phi_z));
                    break;
                }
            }
            match accepted {
                Some((z, beta, phi_z)) => {
                    rec.events.push(PerturbationEvent {
                        k,
                        n,
                        ell: Some(schedule.ell()),
                        beta,
                        direction_norm: norm(&direction),
                        phi_reference: phi_k,
                        phi_perturbed: phi_z,
                        level: None,
                        desirability: None,
                        skipped: false,
                    });
                    beta_total += beta;
                    inner = z;
                }
                None => rec.events.push(skipped_event(schedule.ell())),
            }
        }
        x = inner;
        basic.apply(&mut x.data);
        let prox = basic.proximity(&x.data);
        rec.row(&x, schedule.ell(), beta_total, penalty.value(&x), prox, true);
        if prox < stop.epsilon {
            return Ok(rec.finish(
                x,
                Termination::EpsilonCompatible,
                stop.epsilon,
                Some(cfg.alpha),
                Some(cfg.gamma),
            ));
        }
    }
    Ok(rec.finish(x, Termination::SafetyCap, stop.epsilon, Some(cfg.alpha), Some(cfg.gamma)))
}

/// Level parameters for [`superiorize_adaptive`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveLevels {
    pub alpha0: f64,
    pub epsilon_inc: f64,
    pub noisy: bool,
}

/// `(φ(x̃)/2, φ(x̃)/200)` where `x̃` is one basic sweep from zero.
pub fn adaptive_initialization(basic: &dyn BasicAlgorithm, penalty: &dyn Penalty, side: usize) -> (f64, f64) {
    let mut x = Image::zeros(side);
    basic.apply(&mut x.data);
    let phi = penalty.value(&x);
    (phi / 2.0, phi / 200.0)
}

impl AdaptiveConfig {
    /// Fill in `auto` settings from one basic sweep.
    pub fn resolve(&self, basic: &dyn BasicAlgorithm, penalty: &dyn Penalty, side: usize) -> Result<AdaptiveLevels> {
        let init = match (self.alpha0, self.epsilon_inc) {
            (Setting::Value(_), Setting::Value(_)) => None,
            _ => Some(adaptive_initialization(basic, penalty, side)),
        };
        let pick = |s: Setting, auto: Option<f64>| match s {
            Setting::Value(v) => v,
            Setting::Auto => auto.unwrap_or(f64::NAN),
        };
        let levels = AdaptiveLevels {
            alpha0: pick(self.alpha0, init.map(|i| i.0)),
            epsilon_inc: pick(self.epsilon_inc, init.map(|i| i.1)),
            noisy: self.noisy,
        };
        levels.validate()?;
        Ok(levels)
    }
}

impl AdaptiveLevels {
    fn validate(&self) -> Result<()> {
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return Err(Error::param(format!("alpha0 must be positive, got {}", self.alpha0)));
        }
        if !(self.epsilon_inc > 0.0 && self.epsilon_inc.is_finite()) {
            return Err(Error::param(format!(
                "epsilon_inc must be positive, got {}",
                self.epsilon_inc
            )));
        }
        Ok(())
    }
}

/// Step size of the adaptive rule: zero below the level, otherwise the
/// distance to the level set along the linearization.
pub fn adaptive_step(phi: f64, level: f64, grad_norm: f64) -> f64 {
    if phi < level || !(grad_norm > 0.0) {
        0.0
    } else {
        (phi - level) / grad_norm
    }
}

/// `ζ = (Pr(z) − Pr(x)) / Pr(x)`
pub fn desirability(prox_perturbed: f64, prox_current: f64) -> f64 {
    (prox_perturbed - prox_current) / prox_current
}

/// Next level: `α + max{ϵ, −ζα}` for noisy data, `α + max{ϵ, ζα}` otherwise.
pub fn next_level(level: f64, zeta: f64, epsilon_inc: f64, noisy: bool) -> f64 {
    let signed = if noisy { -zeta * level } else { zeta * level };
    level + epsilon_inc.max(signed)
}

/// Superiorization with adaptive, level-driven step sizes (one perturbation
/// per outer iteration, no inner loop).
pub fn superiorize_adaptive(
    x0: &Image,
    basic: &dyn BasicAlgorithm,
    penalty: &dyn Penalty,
    levels: &AdaptiveLevels,
    stop: &StopRule,
    trace: TraceOptions<'_>,
) -> Result<RunRecord> {
    check_start(x0, basic, stop)?;
    levels.validate()?;
    let mut rec = Recorder::new(Variant::Adaptive, trace);
    let mut x = x0.clone();
    let mut level = levels.alpha0;
    let mut prox_x = basic.proximity(&x.data);

    for k in 0..stop.max_outer_iterations {
        if prox_x == 0.0 {
            // Already consistent: ζ would divide by zero.
            if rec.rows.is_empty() {
                let phi = penalty.value(&x);
                rec.row(&x, -1, 0.0, phi, 0.0, false);
            }
            return Ok(rec.finish(x, Termination::EpsilonCompatible, stop.epsilon, None, None));
        }
        let phi = penalty.value(&x);
        let grad = penalty.gradient(&x);
        let gnorm = norm(&grad.data);
        let beta = adaptive_step(phi, level, gnorm);
        let mut z = x.clone();
        if beta > 0.0 {
            axpy(-beta / gnorm, &grad.data, &mut z.data);
        }
        let prox_z = if beta > 0.0 { basic.proximity(&z.data) } else { prox_x };
        let zeta = desirability(prox_z, prox_x);
        rec.events.push(PerturbationEvent {
            k,
            n: 0,
            ell: None,
            beta,
            direction_norm: if beta > 0.0 { 1.0 } else { 0.0 },
            phi_reference: phi,
            phi_perturbed: if beta > 0.0 { penalty.value(&z) } else { phi },
            level: Some(level),
            desirability: Some(zeta),
            skipped: beta == 0.0,
        });
        level = next_level(level, zeta, levels.epsilon_inc, levels.noisy);

        x = z;
        basic.apply(&mut x.data);
        prox_x = basic.proximity(&x.data);
        rec.row(&x, -1, beta, penalty.value(&x), prox_x, beta > 0.0);
        if prox_x < stop.epsilon {
            return Ok(rec.finish(x, Termination::EpsilonCompatible, stop.epsilon, None, None));
        }
    }
    Ok(rec.finish(x, Termination::SafetyCap, stop.epsilon, None, None))
}

/// Plug-and-play superiorization: the displacement `v = Ψ(x) − x` produced
/// by a black-box procedure is used as the perturbation, damped to
/// `β = min{α γ^ℓ, ‖v‖}`. The procedure only runs on iterations passing
/// [`PnpConfig::gate`]; each gated iteration advances `ℓ`, including those
/// where `v = 0` and nothing is applied.
///
/// With `alpha = auto`, α is fixed at the first gated iteration with
/// `v ≠ 0` so that this first step is a full step (`α γ^ℓ = ‖v‖`).
pub fn superiorize_pnp(
    x0: &Image,
    basic: &dyn BasicAlgorithm,
    denoiser: &dyn Denoiser,
    cfg: &PnpConfig,
    stop: &StopRule,
    penalty: &dyn Penalty,
    trace: TraceOptions<'_>,
) -> Result<RunRecord> {
    check_start(x0, basic, stop)?;
    cfg.validate()?;
    let mut rec = Recorder::new(Variant::Pnp, trace);
    let mut alpha = match cfg.alpha {
        Setting::Value(a) => Some(a),
        Setting::Auto => None,
    };
    let mut ell: i64 = -1;
    let mut x = x0.clone();

    for k in 0..stop.max_outer_iterations {
        let gated = cfg.gate(k);
        let mut beta = 0.0;
        if gated {
            let z = denoiser.denoise(&x);
            if z.side() != x.side() {
                return Err(Error::dims(format!("{0}x{0} image", x.side()), format!("{0}x{0} image", z.side())));
            }
            let v: Vec<f64> = z.data.iter().zip(&x.data).map(|(a, b)| a - b).collect();
            ell += 1;
            let vnorm = norm(&v);
            let phi_x = penalty.value(&x);
            if vnorm > 0.0 && vnorm.is_finite() {
                let a = *alpha.get_or_insert_with(|| vnorm / cfg.gamma.powi(ell as i32));
                let bound = a * cfg.gamma.powi(ell as i32);
                beta = bound.min(vnorm);
                if beta >= vnorm {
                    x = z;
                } else {
                    axpy(beta / vnorm, &v, &mut x.data);
                }
                let unit: Vec<f64> = v.iter().map(|vi| vi / vnorm).collect();
                rec.events.push(PerturbationEvent {
                    k,
                    n: 0,
                    ell: Some(ell),
                    beta,
                    direction_norm: norm(&unit),
                    phi_reference: phi_x,
                    phi_perturbed: penalty.value(&x),
                    level: None,
                    desirability: None,
                    skipped: false,
                });
            } else {
                rec.events.push(PerturbationEvent {
                    k,
                    n: 0,
                    ell: Some(ell),
                    beta: 0.0,
                    direction_norm: 0.0,
                    phi_reference: phi_x,
                    phi_perturbed: phi_x,
                    level: None,
                    desirability: None,
                    skipped: true,
                });
            }
        }
        basic.apply(&mut x.data);
        let prox = basic.proximity(&x.data);
        rec.row(&x, ell, beta, penalty.value(&x), prox, gated);
        if prox < stop.epsilon {
            return Ok(rec.finish(x, Termination::EpsilonCompatible, stop.epsilon, alpha, Some(cfg.gamma)));
        }
    }
    Ok(rec.finish(x, Termination::SafetyCap, stop.epsilon, alpha, Some(cfg.gamma)))
}

/// Apply the procedure once to a finished reconstruction. No proximity
/// guarantee is made for the result.
pub fn postprocess(x: &Image, denoiser: &dyn Denoiser) -> Result<Image> {
    let y = denoiser.denoise(x);
    x.check_same_shape(&y)?;
    Ok(y)
}
