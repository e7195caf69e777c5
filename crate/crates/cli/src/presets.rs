//! Shipped configurations for the sparse-view and low-dose experiment suites.
//!
//! A suite name (`sparse`, `lowdose-25k`, ...) expands to one configuration
//! per method; `<suite>-<method>` selects a single one.

use ssrt_core::denoise::DenoiserSpec;
use ssrt_core::record::Variant;
use ssrt_core::superiorize::{ConventionalConfig, PnpConfig, Setting};

use crate::config::{PhantomKind, RunConfig};
use crate::error::{HarnessError, Result};

pub const METHODS: [&str; 5] = ["basic", "tv", "tva", "pnp", "post"];

struct Suite {
    name: &'static str,
    i0: f64,
    keep_every: usize,
    basic_iterations: usize,
    pnp: PnpConfig,
    nlm_h: f64,
}

fn suites() -> [Suite; 4] {
    let lowdose = |name, i0, iters, k_min, k_step, h| Suite {
        name,
        i0,
        keep_every: 1,
        basic_iterations: iters,
        pnp: PnpConfig {
            alpha: Setting::Auto,
            gamma: 0.75,
            k_min,
            k_step,
        },
        nlm_h: h,
    };
    [
        Suite {
            name: "sparse",
            i0: 1e6,
            keep_every: 15,
            basic_iterations: 12,
            pnp: PnpConfig {
                alpha: Setting::Auto,
                gamma: 0.95,
                k_min: 0,
                k_step: 1,
            },
            nlm_h: 0.02,
        },
        lowdose("lowdose-50k", 5e4, 18, 15, 5, 0.02),
        lowdose("lowdose-25k", 2.5e4, 12, 10, 5, 0.025),
        lowdose("lowdose-10k", 1e4, 8, 5, 4, 0.03),
    ]
}

fn base(name: String) -> RunConfig {
    let mut cfg = RunConfig {
        name: Some(name),
        ..Default::default()
    };
    cfg.geometry.side = 64;
    cfg.geometry.views = 900;
    cfg.phantom.kind = PhantomKind::RandomEllipses;
    cfg.phantom.count = 10;
    cfg
}

fn method(suite: &Suite, method: &str) -> RunConfig {
    let mut cfg = base(format!("{}-{method}", suite.name));
    cfg.dose.i0 = suite.i0;
    cfg.dose.keep_every = suite.keep_every;
    let a = &mut cfg.algorithm;
    a.iterations = suite.basic_iterations;
    a.conventional = ConventionalConfig {
        alpha: 1.0,
        gamma: 0.9995,
        inner_steps: 20,
        ..Default::default()
    };
    a.pnp = suite.pnp;
    a.denoiser = DenoiserSpec::Nlm {
        patch: 7,
        window: 21,
        h: suite.nlm_h,
    };
    a.variant = match method {
        "basic" => Variant::Basic,
        "tv" => Variant::Conventional,
        "tva" => Variant::Adaptive,
        "pnp" => Variant::Pnp,
        "post" => Variant::Postprocess,
        _ => unreachable!("method list is fixed"),
    };
    cfg
}

/// Normal-dose, full-view reconstruction of the Shepp-Logan phantom.
fn baseline() -> RunConfig {
    let mut cfg = base("baseline".into());
    cfg.phantom.kind = PhantomKind::SheppLogan;
    cfg.dose.i0 = 1e6;
    cfg
}

/// Every name accepted by [`preset`].
pub fn preset_names() -> Vec<String> {
    let mut names = vec!["baseline".to_string()];
    for s in suites() {
        names.push(s.name.to_string());
        names.extend(METHODS.iter().map(|m| format!("{}-{m}", s.name)));
    }
    names
}

/// Configurations for a suite or a single method.
pub fn preset(name: &str) -> Result<Vec<RunConfig>> {
    if name == "baseline" {
        return Ok(vec![baseline()]);
    }
    for s in suites() {
        if name == s.name {
            return Ok(METHODS.iter().map(|m| method(&s, m)).collect());
        }
        if let Some(m) = name.strip_prefix(s.name).and_then(|rest| rest.strip_prefix('-')) {
            if METHODS.contains(&m) {
                return Ok(vec![method(&s, m)]);
            }
        }
    }
    Err(HarnessError::Config(format!(
        "unknown preset \"{name}\"; available: {}",
        preset_names().join(", ")
    )))
}
