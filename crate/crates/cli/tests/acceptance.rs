//! Acceptance gate: twelve end-to-end criteria, one PASS/FAIL line each.
//!
//! `cargo test --test acceptance` runs all of them; numeric arguments after
//! `--` select a subset, e.g. `cargo test --test acceptance -- 7 12`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssrt_cli::config::{PhantomKind, RunConfig};
use ssrt_cli::harness::{self, CellResult, SimulatedCell};
use ssrt_cli::report::mean;
use ssrt_core::denoise::DenoiserSpec;
use ssrt_core::geometry::{forward_project, DenseMatrix};
use ssrt_core::linalg::{dot, max_abs_diff, norm, sub};
use ssrt_core::metrics::{delta_tv_percent, psnr, ssim, ssim_default, PsnrPeak};
use ssrt_core::penalty::{tv_gradient, tv_value, TotalVariation, TvConfig};
use ssrt_core::phantom::{log_transform, random_ellipse_phantom, shepp_logan, simulate_counts};
use ssrt_core::recon::{run_basic, BasicAlgorithm, BasicAlgorithmConfig, BiSart};
use ssrt_core::record::{RunRecord, Termination, TraceOptions, Variant};
use ssrt_core::superiorize::{
    superiorize_adaptive, superiorize_conventional, superiorize_pnp, AdaptiveConfig, ConventionalConfig, PnpConfig,
    StopRule,
};
use ssrt_core::{FanBeamGeometry, Image, Projector, Sinogram};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn random_image(rng: &mut ChaCha8Rng, side: usize) -> Image {
    Image::from_vec(side, (0..side * side).map(|_| rng.random_range(0.0..0.3)).collect()).unwrap()
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    norm(&sub(a, b)) / norm(b).max(f64::MIN_POSITIVE)
}

/// Noiseless or noisy data for one phantom on `views` views.
fn data(phantom: &Image, views: usize, i0: Option<f64>, seed: u64) -> (FanBeamGeometry, Sinogram) {
    let geom = FanBeamGeometry::with_defaults(phantom.side(), views).unwrap();
    let clean = forward_project(phantom, &geom, None).unwrap();
    let b = match i0 {
        None => clean,
        Some(i0) => log_transform(&simulate_counts(&clean, i0, seed, false).unwrap(), i0).unwrap(),
    };
    (geom, b)
}

fn epsilon_of(alg: &dyn BasicAlgorithm, side: usize, iterations: usize) -> f64 {
    run_basic(&Image::zeros(side), alg, iterations, &TotalVariation::default(), TraceOptions::default())
        .unwrap()
        .final_proximity()
        .unwrap()
}

// 1 ---------------------------------------------------------------------------

fn adjoint() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut pairs = 0;
    for (side, views) in [(32, 30), (64, 60)] {
        let geom = FanBeamGeometry::with_defaults(side, views).unwrap();
        let all = geom.all_views();
        let mut r = rng(side as u64);
        for _ in 0..100 {
            let x = random_vec(&mut r, geom.num_pixels());
            let y = random_vec(&mut r, views * geom.num_detector_bins);
            let ax = geom.forward(&x, &all).unwrap();
            let aty = geom.back(&y, &all).unwrap();
            worst = worst.max((dot(&ax, &y) - dot(&x, &aty)).abs() / (norm(&ax) * norm(&y)));
            pairs += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-6 && secs < 10.0,
        format!("{pairs} pairs, worst |<Ax,y>-<x,A^T y>|/(|Ax||y|) = {worst:.2e}, {secs:.2} s"),
    )
}

// 2 ---------------------------------------------------------------------------

fn dense_oracle() -> Outcome {
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let side = r.random_range(8..=24);
        let views = r.random_range(4..=16);
        let geom = FanBeamGeometry::with_defaults(side, views).unwrap();
        let dense = DenseMatrix::from_geometry(&geom).unwrap();
        let all = geom.all_views();
        let x = random_vec(&mut r, geom.num_pixels());
        let y = random_vec(&mut r, views * geom.num_detector_bins);
        worst = worst.max(rel(&geom.forward(&x, &all).unwrap(), &dense.forward(&x, &all).unwrap()));
        worst = worst.max(rel(&geom.back(&y, &all).unwrap(), &dense.back(&y, &all).unwrap()));

        let truth = random_image(&mut r, side);
        let b = forward_project(&truth, &geom, None).unwrap();
        let cfg = BasicAlgorithmConfig {
            relaxation: r.random_range(0.5..1.5),
            num_subsets: r.random_range(1..=views.min(5)),
            nonneg_projection: true,
        };
        let free = BiSart::new(&geom, &b.data, cfg).unwrap();
        let mat = BiSart::new(&dense, &b.data, cfg).unwrap();
        let (mut xf, mut xm) = (vec![0.0; side * side], vec![0.0; side * side]);
        for _ in 0..3 {
            free.apply(&mut xf);
            mat.apply(&mut xm);
            worst = worst.max(rel(&xf, &xm));
            let (pf, pm) = (free.proximity(&xf), mat.proximity(&xm));
            worst = worst.max((pf - pm).abs() / pm);
        }
    }
    outcome(worst <= 1e-8, format!("20 cases, worst relative difference {worst:.2e}"))
}

// 3 ---------------------------------------------------------------------------

fn tv_gradient_check() -> Outcome {
    let cfg = TvConfig::default();
    let mut r = rng(3);
    let (mut worst_fd, mut worst_dir): (f64, f64) = (0.0, 0.0);
    for _ in 0..50 {
        let x = random_image(&mut r, 16);
        let g = tv_gradient(&x, &cfg);
        let h = 1e-5;
        let fd: Vec<f64> = (0..x.len())
            .map(|j| {
                let (mut p, mut m) = (x.clone(), x.clone());
                p.data[j] += h;
                m.data[j] -= h;
                (tv_value(&p, &cfg) - tv_value(&m, &cfg)) / (2.0 * h)
            })
            .collect();
        worst_fd = worst_fd.max(rel(&g.data, &fd));

        let mut d = random_vec(&mut r, x.len());
        let dn = norm(&d);
        d.iter_mut().for_each(|v| *v /= dn);
        let hd = 1e-6;
        let shift = |s: f64| Image::from_vec(16, x.data.iter().zip(&d).map(|(a, b)| a + s * b).collect()).unwrap();
        let numeric = (tv_value(&shift(hd), &cfg) - tv_value(&shift(-hd), &cfg)) / (2.0 * hd);
        let analytic = dot(&g.data, &d);
        worst_dir = worst_dir.max(((analytic - numeric) / analytic).abs());
    }
    outcome(
        worst_fd < 1e-4 && worst_dir < 1e-5,
        format!("50 images, finite differences {worst_fd:.2e}, directional {worst_dir:.2e}"),
    )
}

// 4 ---------------------------------------------------------------------------

fn identity_reduction() -> Outcome {
    let truth = shepp_logan(64, 0.3).unwrap();
    let (geom, b) = data(&truth, 60, None, 0);
    let alg = BiSart::new(&geom, &b.data, BasicAlgorithmConfig::default()).unwrap();
    let tv = TotalVariation::default();
    let keep = TraceOptions {
        keep_iterates: true,
        ..Default::default()
    };
    let x0 = Image::zeros(64);
    let basic = run_basic(&x0, &alg, 30, &tv, keep).unwrap();
    let stop = StopRule {
        epsilon: 1e-300,
        max_outer_iterations: 30,
    };
    let pnp = superiorize_pnp(&x0, &alg, &DenoiserSpec::Identity, &PnpConfig::default(), &stop, &tv, keep).unwrap();
    let worst = basic
        .iterates
        .iter()
        .zip(&pnp.iterates)
        .map(|(a, b)| max_abs_diff(&a.data, &b.data))
        .fold(0.0, f64::max);
    let n = basic.iterates.len().min(pnp.iterates.len());
    outcome(
        n == 30 && worst <= 1e-12,
        format!("{n} iterates compared, max per-pixel difference {worst:.2e}"),
    )
}

// 5, 6 ------------------------------------------------------------------------

/// Superiorized runs over a few instances and variants.
fn superiorized_runs(conventional_only: bool) -> Vec<RunRecord> {
    let tv = TotalVariation::default();
    let sl = shepp_logan(64, 0.3).unwrap();
    let blobs = random_ellipse_phantom(64, 8, 11).unwrap();
    let instances = [
        (sl.clone(), 36, None),
        (blobs, 90, Some(ssrt_core::phantom::equivalent_intensity(5e4, 64, 90))),
        (sl, 120, Some(ssrt_core::phantom::equivalent_intensity(2.5e4, 64, 120))),
    ];
    let mut records = Vec::new();
    for (i, (phantom, views, i0)) in instances.iter().enumerate() {
        let (geom, b) = data(phantom, *views, *i0, i as u64);
        let alg = BiSart::new(&geom, &b.data, BasicAlgorithmConfig::default()).unwrap();
        let x0 = Image::zeros(64);
        let stop = StopRule::new(epsilon_of(&alg, 64, 12));
        let trace = TraceOptions::default();
        records.push(superiorize_conventional(&x0, &alg, &tv, &ConventionalConfig::default(), &stop, trace).unwrap());
        if conventional_only {
            continue;
        }
        let levels = AdaptiveConfig {
            noisy: i0.is_some(),
            ..Default::default()
        }
        .resolve(&alg, &tv, 64)
        .unwrap();
        records.push(superiorize_adaptive(&x0, &alg, &tv, &levels, &stop, trace).unwrap());
        let gated = PnpConfig {
            gamma: 0.75,
            k_min: 4,
            k_step: 3,
            ..Default::default()
        };
        for (spec, cfg) in [
            (DenoiserSpec::Nlm { patch: 5, window: 11, h: 0.02 }, PnpConfig::default()),
            (DenoiserSpec::Gaussian { sigma: 0.8 }, gated),
            (DenoiserSpec::Median { radius: 1 }, gated),
        ] {
            records.push(superiorize_pnp(&x0, &alg, &spec, &cfg, &stop, &tv, trace).unwrap());
        }
    }
    records
}

fn summability() -> Outcome {
    let records = superiorized_runs(false);
    let normal: Vec<_> = records
        .iter()
        .filter(|r| r.termination == Termination::EpsilonCompatible)
        .collect();
    let bad_sum = normal.iter().filter(|r| !r.is_summable(1e-9)).count();
    let bad_eps = normal.iter().filter(|r| !r.is_epsilon_compatible()).count();
    let capped = records.len() - normal.len();
    outcome(
        !normal.is_empty() && bad_sum == 0 && bad_eps == 0,
        format!(
            "{} runs terminated normally ({capped} at the safety cap): {bad_sum} summability and {bad_eps} epsilon violations",
            normal.len()
        ),
    )
}

fn monotonicity() -> Outcome {
    let records = superiorized_runs(true);
    let accepted: Vec<_> = records
        .iter()
        .flat_map(|r| r.perturbations.iter())
        .filter(|e| !e.skipped)
        .collect();
    let violations = accepted
        .iter()
        .filter(|e| !(e.phi_perturbed < e.phi_reference))
        .count();
    outcome(
        !accepted.is_empty() && violations == 0,
        format!("{} accepted perturbations, {violations} with phi(z) >= phi(x^k)", accepted.len()),
    )
}

// 7, 8, 9 ---------------------------------------------------------------------

fn trend_config(views: usize) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.geometry.side = 64;
    cfg.geometry.views = views;
    cfg.phantom.kind = PhantomKind::Suite;
    cfg.phantom.count = 5;
    cfg.algorithm.iterations = 12;
    cfg.algorithm.subsets = 10;
    cfg
}

fn run_variant(cfg: &RunConfig, cells: &[SimulatedCell], variant: Variant) -> Vec<CellResult> {
    let mut cfg = cfg.clone();
    cfg.algorithm.variant = variant;
    cfg.validate().unwrap();
    harness::reconstruct(&cfg, cells).unwrap()
}

fn means(results: &[CellResult]) -> (f64, f64) {
    let psnr: Vec<f64> = results.iter().map(|r| r.report.psnr).collect();
    let ssim: Vec<f64> = results.iter().map(|r| r.report.ssim).collect();
    (mean(&psnr), mean(&ssim))
}

fn all_compatible(results: &[CellResult]) -> bool {
    results.iter().all(|r| r.record.is_epsilon_compatible())
}

fn sparse_trend() -> Outcome {
    let start = Instant::now();
    let mut cfg = trend_config(360);
    cfg.dose.noiseless = true;
    cfg.dose.keep_every = 10;
    cfg.algorithm.conventional = ConventionalConfig {
        gamma: 0.9995,
        inner_steps: 20,
        ..Default::default()
    };
    cfg.algorithm.pnp = PnpConfig {
        gamma: 0.95,
        ..Default::default()
    };
    let cells = harness::simulate(&cfg).unwrap();
    let basic = run_variant(&cfg, &cells, Variant::Basic);
    let tv = run_variant(&cfg, &cells, Variant::Conventional);
    let pnp = run_variant(&cfg, &cells, Variant::Pnp);
    let secs = start.elapsed().as_secs_f64();
    let (bp, bs) = means(&basic);
    let (tp, ts) = means(&tv);
    let (pp, ps) = means(&pnp);
    let pass = all_compatible(&tv)
        && all_compatible(&pnp)
        && tp - bp >= 1.0
        && pp - bp >= 1.0
        && ts - bs >= 0.01
        && ps - bs >= 0.01
        && secs < 300.0;
    outcome(
        pass,
        format!(
            "{} phantoms, 36 views: basic {bp:.2} dB / {bs:.4}; tv {:+.2} dB / {:+.4}; pnp-nlm {:+.2} dB / {:+.4}; {secs:.0} s",
            cells.len(),
            tp - bp,
            ts - bs,
            pp - bp,
            ps - bs
        ),
    )
}

fn lowdose_trend() -> Outcome {
    let mut cfg = trend_config(180);
    cfg.dose.i0 = 2.5e4;
    cfg.algorithm.pnp = PnpConfig {
        gamma: 0.75,
        k_min: 10,
        k_step: 5,
        ..Default::default()
    };
    cfg.algorithm.denoiser = DenoiserSpec::Nlm {
        patch: 7,
        window: 21,
        h: 0.025,
    };
    let cells = harness::simulate(&cfg).unwrap();
    let basic = run_variant(&cfg, &cells, Variant::Basic);
    let pnp = run_variant(&cfg, &cells, Variant::Pnp);
    let tva = run_variant(&cfg, &cells, Variant::Adaptive);
    let post = run_variant(&cfg, &cells, Variant::Postprocess);
    let (bp, _) = means(&basic);
    let (pp, _) = means(&pnp);
    let (ap, _) = means(&tva);
    let within = |runs: &[CellResult]| {
        runs.iter()
            .zip(&basic)
            .all(|(r, b)| r.report.proximity <= b.report.proximity)
    };
    let post_above = post
        .iter()
        .zip(&basic)
        .filter(|(p, b)| p.report.proximity > b.report.proximity)
        .count();
    let pass = all_compatible(&pnp)
        && all_compatible(&tva)
        && pp >= bp
        && ap >= bp
        && within(&pnp)
        && within(&tva)
        && post_above == post.len();
    outcome(
        pass,
        format!(
            "{} phantoms, 180 views: basic {bp:.2} dB, pnp-nlm {pp:.2} dB, tva {ap:.2} dB; postprocess above epsilon on {post_above}/{}",
            cells.len(),
            post.len()
        ),
    )
}

fn semiconvergence() -> Outcome {
    let mut cfg = trend_config(180);
    cfg.phantom.kind = PhantomKind::SheppLogan;
    cfg.dose.i0 = 1e4;
    cfg.algorithm.iterations = 60;
    let mut peaks = Vec::new();
    for seed in 0..10 {
        cfg.dose.seed = seed;
        let cells = harness::simulate(&cfg).unwrap();
        let run = &run_variant(&cfg, &cells, Variant::Basic)[0];
        let (k, _) = run
            .record
            .rows
            .iter()
            .map(|r| (r.k, r.psnr.unwrap()))
            .fold((0, f64::NEG_INFINITY), |best, row| if row.1 > best.1 { row } else { best });
        peaks.push(k);
    }
    let early = peaks.iter().filter(|&&k| k < 50).count();
    outcome(early >= 8, format!("PSNR peak iteration per seed {peaks:?}; {early}/10 before 50"))
}

// 10 --------------------------------------------------------------------------

fn adaptive_noiseless() -> Outcome {
    let truth = shepp_logan(64, 0.3).unwrap();
    let (geom, b) = data(&truth, 90, None, 0);
    let alg = BiSart::new(&geom, &b.data, BasicAlgorithmConfig::default()).unwrap();
    let tv = TotalVariation::default();
    let eps = epsilon_of(&alg, 64, 12);
    let levels = AdaptiveConfig {
        noisy: false,
        ..Default::default()
    }
    .resolve(&alg, &tv, 64)
    .unwrap();
    let mut ok = 0;
    let mut zero_steps = 0;
    let mut iterations = Vec::new();
    for factor in [1.0, 2.0, 5.0] {
        let rec = superiorize_adaptive(&Image::zeros(64), &alg, &tv, &levels, &StopRule::new(factor * eps), TraceOptions::default())
            .unwrap();
        ok += rec.is_epsilon_compatible() as usize;
        iterations.push(rec.iterations());
        zero_steps += rec
            .perturbations
            .iter()
            .filter(|e| e.beta == 0.0 && e.level.is_some_and(|lvl| e.phi_reference < lvl))
            .count();
    }
    outcome(
        ok == 3 && zero_steps > 0,
        format!("epsilon x1, x2, x5: {ok}/3 compatible in {iterations:?} iterations; beta = 0 branch fired {zero_steps} times"),
    )
}

// 11 --------------------------------------------------------------------------

fn naive_tv(x: &Image, eps: f64) -> f64 {
    let n = x.side();
    let mut sum = 0.0;
    for m in 0..n {
        for k in 0..n {
            let v = x.data[m * n + k];
            let down = if m + 1 < n { x.data[(m + 1) * n + k] - v } else { 0.0 };
            let right = if k + 1 < n { x.data[m * n + k + 1] - v } else { 0.0 };
            sum += (down * down + right * right + eps * eps).sqrt();
        }
    }
    sum
}

fn naive_metrics(x: &Image, y: &Image) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mut se = 0.0;
    let mut y_max = f64::NEG_INFINITY;
    for (a, b) in x.data.iter().zip(&y.data) {
        se += (a - b) * (a - b);
        y_max = y_max.max(*b);
    }
    let psnr = 10.0 * (y_max / (se / n)).log10();

    let mut mx = 0.0;
    let mut my = 0.0;
    for (a, b) in x.data.iter().zip(&y.data) {
        mx += a;
        my += b;
    }
    mx /= n;
    my /= n;
    let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.data.iter().zip(&y.data) {
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
        cxy += (a - mx) * (b - my);
    }
    vx /= n;
    vy /= n;
    cxy /= n;
    let c1 = (0.01 * y_max) * (0.01 * y_max);
    let c2 = (0.03 * y_max) * (0.03 * y_max);
    let ssim = (2.0 * mx * my + c1) * (2.0 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));

    let ty = naive_tv(y, 1e-6);
    let dtv = (ty - naive_tv(x, 1e-6)) / ty * 100.0;
    (psnr, ssim, dtv)
}

fn metric_oracles() -> Outcome {
    let mut r = rng(11);
    let cfg = TvConfig::default();
    let mut worst: f64 = 0.0;
    let mut exact = true;
    for _ in 0..100 {
        let side = r.random_range(8..=32);
        let y = random_image(&mut r, side);
        let noise = r.random_range(0.001..0.1);
        let x = Image::from_vec(side, y.data.iter().map(|v| v + noise * r.random_range(-1.0..1.0)).collect()).unwrap();
        let (p, s, d) = naive_metrics(&x, &y);
        worst = worst
            .max((psnr(&x, &y, PsnrPeak::Linear).unwrap() - p).abs())
            .max((ssim_default(&x, &y).unwrap() - s).abs())
            .max((delta_tv_percent(&x, &y, &cfg).unwrap() - d).abs());
        let (c1, c2) = ssrt_core::metrics::default_ssim_constants(&y);
        exact &= ssim(&x, &x, c1, c2).unwrap() == 1.0 && delta_tv_percent(&x, &x, &cfg).unwrap() == 0.0;
    }
    outcome(
        worst <= 1e-10 && exact,
        format!("100 pairs, worst deviation from naive oracles {worst:.2e}; ssim(x,x) = 1 and dTV%(x,x) = 0 exactly: {exact}"),
    )
}

// 12 --------------------------------------------------------------------------

fn run_cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ssrt"))
        .args(args)
        .output()
        .expect("ssrt binary runs")
}

/// CSV text with the `runtime` column dropped.
fn without_runtime(text: &str) -> String {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let drop = header.iter().position(|h| *h == "runtime");
    std::iter::once(text.lines().next().unwrap_or(""))
        .chain(lines)
        .map(|line| {
            line.split(',')
                .enumerate()
                .filter(|(i, _)| Some(*i) != drop)
                .map(|(_, f)| f)
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn csv_files(dir: &Path) -> Vec<(String, String)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| {
            let text = std::fs::read_to_string(&p).unwrap();
            (p.file_name().unwrap().to_string_lossy().into_owned(), without_runtime(&text))
        })
        .collect();
    files.sort();
    files
}

/// Small superiorized runs written as config files, one per variant.
fn determinism_configs(dir: &Path) -> Vec<String> {
    let mut base = trend_config(360);
    base.phantom.count = 2;
    base.dose.i0 = 1e5;
    base.dose.keep_every = 6;
    base.algorithm.pnp = PnpConfig {
        gamma: 0.75,
        k_min: 2,
        k_step: 3,
        ..Default::default()
    };
    base.algorithm.denoiser = DenoiserSpec::Nlm { patch: 5, window: 11, h: 0.02 };
    [("tv", Variant::Conventional), ("tva", Variant::Adaptive), ("pnp", Variant::Pnp)]
        .into_iter()
        .map(|(name, variant)| {
            let mut cfg = base.clone();
            cfg.name = Some(name.into());
            cfg.algorithm.variant = variant;
            let path = dir.join(format!("{name}.toml"));
            std::fs::write(&path, cfg.to_toml()).unwrap();
            path.to_string_lossy().into_owned()
        })
        .collect()
}

fn determinism() -> Outcome {
    let configs = tempfile::tempdir().unwrap();
    let files = determinism_configs(configs.path());
    let config_args: Vec<&str> = files.iter().flat_map(|f| ["--config", f.as_str()]).collect();
    let sources: [(&str, Vec<&str>); 3] = [
        ("baseline", vec!["--preset", "baseline"]),
        ("sparse-basic", vec!["--preset", "sparse-basic"]),
        ("tv/tva/pnp", config_args),
    ];
    let mut compared = 0;
    let mut differing = Vec::new();
    for (name, source) in &sources {
        let mut runs = Vec::new();
        for threads in ["1", "3"] {
            let dir = tempfile::tempdir().unwrap();
            let out = dir.path().to_str().unwrap();
            for cmd in ["simulate", "reconstruct"] {
                let mut args = vec!["--threads", threads, cmd, "--seed", "7", "--out", out];
                args.extend(source);
                let o = run_cli(&args);
                if !o.status.success() {
                    return outcome(false, format!("{cmd} {name} failed: {}", String::from_utf8_lossy(&o.stderr)));
                }
            }
            runs.push(csv_files(dir.path()));
        }
        compared += runs[0].len();
        if runs[0] != runs[1] {
            differing.push(*name);
        }
    }
    outcome(
        differing.is_empty() && compared > 0,
        format!("baseline and sparse-basic presets, tv/tva/pnp configs, run with 1 and 3 threads: {compared} CSV files compared, differing {differing:?}"),
    )
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 12] = [
        (1, "adjoint correctness", adjoint),
        (2, "dense oracle equivalence", dense_oracle),
        (3, "TV gradient", tv_gradient_check),
        (4, "identity-denoiser reduction", identity_reduction),
        (5, "summability and epsilon-compatibility", summability),
        (6, "conventional monotonicity", monotonicity),
        (7, "sparse-view trend", sparse_trend),
        (8, "low-dose trend", lowdose_trend),
        (9, "semiconvergence", semiconvergence),
        (10, "adaptive noiseless behaviour", adaptive_noiseless),
        (11, "metric oracles", metric_oracles),
        (12, "determinism", determinism),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (n, name, check) in criteria {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let verdict = if result.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {n:>2} {verdict} {name}: {} [{:.1} s]",
            result.detail,
            start.elapsed().as_secs_f64()
        );
        if !result.pass {
            failed.push(n);
        }
    }
    if !failed.is_empty() {
        println!("acceptance: criteria {failed:?} failed");
        std::process::exit(1);
    }
    println!("acceptance: all selected criteria passed");
}
