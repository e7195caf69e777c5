//! Run configuration: a TOML tree with strict schema validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ssrt_core::denoise::DenoiserSpec;
use ssrt_core::metrics::PsnrPeak;
use ssrt_core::penalty::TvConfig;
use ssrt_core::phantom::equivalent_intensity;
use ssrt_core::recon::BasicAlgorithmConfig;
use ssrt_core::record::Variant;
use ssrt_core::superiorize::{
    AdaptiveConfig, ConventionalConfig, PnpConfig, Setting, StopRule, DEFAULT_MAX_OUTER_ITERATIONS,
};
use ssrt_core::FanBeamGeometry;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Label used in file names and comparison tables; defaults to the variant.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub phantom: PhantomConfig,
    #[serde(default)]
    pub dose: DoseConfig,
    #[serde(default)]
    pub algorithm: AlgorithmConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub side: usize,
    /// Views acquired over 360° before any subsampling.
    pub views: usize,
    /// Pixel pitch in mm; defaults to a 290.8 mm field of view.
    #[serde(default)]
    pub pixel_size: Option<f64>,
    /// Detector bins; defaults to 1.5·side.
    #[serde(default)]
    pub bins: Option<usize>,
    #[serde(default = "default_dsc")]
    pub source_to_center: f64,
    #[serde(default = "default_dsd")]
    pub source_to_detector: f64,
}

fn default_dsc() -> f64 {
    600.0
}
fn default_dsd() -> f64 {
    1200.0
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            side: 64,
            views: 900,
            pixel_size: None,
            bins: None,
            source_to_center: default_dsc(),
            source_to_detector: default_dsd(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhantomKind {
    SheppLogan,
    RandomEllipses,
    /// Shepp-Logan followed by `count` random-ellipse phantoms.
    Suite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomConfig {
    pub kind: PhantomKind,
    #[serde(default)]
    pub seed: u64,
    /// Random phantoms in the batch (ignored for a lone Shepp-Logan).
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "default_num_ellipses")]
    pub num_ellipses: usize,
    #[serde(default = "default_scale")]
    pub scale: f64,
}

fn default_count() -> usize {
    10
}
fn default_num_ellipses() -> usize {
    8
}
fn default_scale() -> f64 {
    ssrt_core::phantom::DEFAULT_SCALE
}

impl Default for PhantomConfig {
    fn default() -> Self {
        PhantomConfig {
            kind: PhantomKind::SheppLogan,
            seed: 0,
            count: default_count(),
            num_ellipses: default_num_ellipses(),
            scale: default_scale(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DoseConfig {
    /// Photons per ray at the reference 512² / 900-view acquisition.
    pub i0: f64,
    #[serde(default)]
    pub noiseless: bool,
    /// Convert `i0` to the intensity giving the same pixel noise on this grid.
    #[serde(default = "yes")]
    pub equivalent: bool,
    #[serde(default = "one")]
    pub keep_every: usize,
    #[serde(default)]
    pub seed: u64,
}

fn yes() -> bool {
    true
}
fn one() -> usize {
    1
}

impl Default for DoseConfig {
    fn default() -> Self {
        DoseConfig {
            i0: 1e6,
            noiseless: false,
            equivalent: true,
            keep_every: 1,
            seed: 0,
        }
    }
}

/// Stopping target for superiorized variants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonSource {
    /// Final proximity of a basic run of `iterations` sweeps.
    Baseline,
    Value(f64),
}

impl Serialize for EpsilonSource {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            EpsilonSource::Baseline => s.serialize_str("baseline"),
            EpsilonSource::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for EpsilonSource {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(EpsilonSource::Value(v)),
            Raw::Word(w) if w == "baseline" => Ok(EpsilonSource::Baseline),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "expected a number or \"baseline\", got \"{w}\""
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub variant: Variant,
    #[serde(default = "default_relaxation")]
    pub relaxation: f64,
    #[serde(default = "default_subsets")]
    pub subsets: usize,
    /// Sweeps of the basic algorithm, for `basic`, `postprocess` and the ε baseline.
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "baseline")]
    pub epsilon: EpsilonSource,
    #[serde(default = "default_cap")]
    pub max_outer_iterations: usize,
    #[serde(default)]
    pub psnr_peak: PsnrPeak,
    #[serde(default)]
    pub tv: TvConfig,
    #[serde(default)]
    pub conventional: ConventionalConfig,
    #[serde(default)]
    pub adaptive: AdaptiveConfig,
    #[serde(default)]
    pub pnp: PnpConfig,
    #[serde(default = "default_denoiser")]
    pub denoiser: DenoiserSpec,
}

fn default_relaxation() -> f64 {
    1.0
}
fn default_subsets() -> usize {
    10
}
fn default_iterations() -> usize {
    12
}
fn baseline() -> EpsilonSource {
    EpsilonSource::Baseline
}
fn default_cap() -> usize {
    DEFAULT_MAX_OUTER_ITERATIONS
}
pub(crate) fn default_denoiser() -> DenoiserSpec {
    DenoiserSpec::Nlm {
        patch: 7,
        window: 21,
        h: 0.02,
    }
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        AlgorithmConfig {
            variant: Variant::Basic,
            relaxation: default_relaxation(),
            subsets: default_subsets(),
            iterations: default_iterations(),
            epsilon: EpsilonSource::Baseline,
            max_outer_iterations: default_cap(),
            psnr_peak: PsnrPeak::Linear,
            tv: TvConfig::default(),
            conventional: ConventionalConfig::default(),
            adaptive: AdaptiveConfig::default(),
            pnp: PnpConfig::default(),
            denoiser: default_denoiser(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub directory: PathBuf,
    #[serde(default)]
    pub export_png: bool,
    /// Display window for PNG export, in cm⁻¹.
    #[serde(default = "default_window")]
    pub window: [f64; 2],
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_window() -> [f64; 2] {
    [0.0, 0.3]
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: default_dir(),
            export_png: false,
            window: default_window(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            HarnessError::Config(msg) => HarnessError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Label for file names and tables.
    pub fn label(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| self.algorithm.variant.as_str().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, e: ssrt_core::Error| HarnessError::Config(format!("{name}: {e}"));
        if let Some(name) = &self.name {
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
                return Err(HarnessError::Config(format!(
                    "name: \"{name}\" must be non-empty and use only [A-Za-z0-9._-]"
                )));
            }
        }
        self.acquisition_geometry().map_err(|e| field("geometry", e))?;
        let g = &self.geometry;
        if g.side < 16 {
            return Err(HarnessError::Config(format!("geometry.side: must be at least 16, got {}", g.side)));
        }
        let p = &self.phantom;
        if p.count == 0 && p.kind != PhantomKind::SheppLogan {
            return Err(HarnessError::Config("phantom.count: must be at least 1".into()));
        }
        if p.num_ellipses == 0 {
            return Err(HarnessError::Config("phantom.num_ellipses: must be at least 1".into()));
        }
        if !(p.scale > 0.0 && p.scale.is_finite()) {
            return Err(HarnessError::Config(format!("phantom.scale: must be positive, got {}", p.scale)));
        }
        let d = &self.dose;
        if !(d.i0 > 0.0 && d.i0.is_finite()) {
            return Err(HarnessError::Config(format!("dose.i0: must be positive, got {}", d.i0)));
        }
        if d.keep_every == 0 || g.views % d.keep_every != 0 {
            return Err(HarnessError::Config(format!(
                "dose.keep_every: {} does not divide geometry.views = {}",
                d.keep_every, g.views
            )));
        }
        let a = &self.algorithm;
        self.basic_config()
            .validate(self.recon_views())
            .map_err(|e| field("algorithm", e))?;
        if a.iterations == 0 {
            return Err(HarnessError::Config("algorithm.iterations: must be at least 1".into()));
        }
        if let EpsilonSource::Value(v) = a.epsilon {
            if !(v > 0.0 && v.is_finite()) {
                return Err(HarnessError::Config(format!("algorithm.epsilon: must be positive, got {v}")));
            }
        }
        StopRule { epsilon: 1.0, max_outer_iterations: a.max_outer_iterations }
            .validate()
            .map_err(|e| field("algorithm.max_outer_iterations", e))?;
        a.tv.validate().map_err(|e| field("algorithm.tv", e))?;
        a.conventional.validate().map_err(|e| field("algorithm.conventional", e))?;
        for (name, s) in [("alpha0", a.adaptive.alpha0), ("epsilon_inc", a.adaptive.epsilon_inc)] {
            if let Setting::Value(v) = s {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(HarnessError::Config(format!("algorithm.adaptive.{name}: must be positive, got {v}")));
                }
            }
        }
        a.pnp.validate().map_err(|e| field("algorithm.pnp", e))?;
        a.denoiser.validate().map_err(|e| field("algorithm.denoiser", e))?;
        if !(self.output.window[0] < self.output.window[1]) {
            return Err(HarnessError::Config("output.window: lower bound must be below upper".into()));
        }
        Ok(())
    }

    /// Scanner used to acquire the full set of views.
    pub fn acquisition_geometry(&self) -> ssrt_core::Result<FanBeamGeometry> {
        self.geometry_with_views(self.geometry.views)
    }

    /// Scanner restricted to the views kept for reconstruction.
    pub fn recon_geometry(&self) -> ssrt_core::Result<FanBeamGeometry> {
        self.geometry_with_views(self.recon_views())
    }

    pub fn recon_views(&self) -> usize {
        self.geometry.views / self.dose.keep_every.max(1)
    }

    fn geometry_with_views(&self, views: usize) -> ssrt_core::Result<FanBeamGeometry> {
        let g = &self.geometry;
        let defaults = FanBeamGeometry::with_defaults(g.side, views)?;
        if g.pixel_size.is_none()
            && g.bins.is_none()
            && g.source_to_center == defaults.source_to_center
            && g.source_to_detector == defaults.source_to_detector
        {
            return Ok(defaults);
        }
        FanBeamGeometry::with_radii(
            g.side,
            g.pixel_size.unwrap_or(defaults.pixel_size),
            views,
            g.bins.unwrap_or(defaults.num_detector_bins),
            g.source_to_center,
            g.source_to_detector,
        )
    }

    /// Photons per ray actually simulated.
    pub fn effective_i0(&self) -> f64 {
        if self.dose.equivalent {
            equivalent_intensity(self.dose.i0, self.geometry.side, self.geometry.views)
        } else {
            self.dose.i0
        }
    }

    pub fn basic_config(&self) -> BasicAlgorithmConfig {
        BasicAlgorithmConfig {
            relaxation: self.algorithm.relaxation,
            num_subsets: self.algorithm.subsets,
            nonneg_projection: true,
        }
    }

    /// Number of phantoms in the batch.
    pub fn batch_size(&self) -> usize {
        match self.phantom.kind {
            PhantomKind::SheppLogan => 1,
            PhantomKind::RandomEllipses => self.phantom.count,
            PhantomKind::Suite => self.phantom.count + 1,
        }
    }

    /// The parts of the config that determine the phantoms and their data.
    pub fn data_key(&self) -> (GeometryConfig, PhantomConfig, DoseConfig) {
        (self.geometry.clone(), self.phantom.clone(), self.dose.clone())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.phantom.seed = seed;
        self.dose.seed = seed;
        self
    }
}
