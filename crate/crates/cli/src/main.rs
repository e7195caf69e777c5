use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ssrt_cli::commands;
use ssrt_cli::presets::{preset, preset_names};
use ssrt_cli::{HarnessError, Result, RunConfig};
use ssrt_core::metrics::PsnrPeak;
use ssrt_core::penalty::TvConfig;

/// Superiorized fan-beam CT reconstruction experiments.
#[derive(Parser)]
#[command(name = "ssrt", version)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Run configuration (TOML); repeat to run several methods on the same data.
    #[arg(long)]
    config: Vec<PathBuf>,
    /// Shipped configuration or suite (see `ssrt presets`).
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Phantom and noise seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate phantoms and simulated sinograms.
    Simulate(RunArgs),
    /// Reconstruct previously simulated data.
    Reconstruct(RunArgs),
    /// Simulate, run several methods and tabulate mean ± std metrics.
    Compare(RunArgs),
    /// Compare an image file with a reference image file.
    Metrics {
        image: PathBuf,
        reference: PathBuf,
        /// Use max² instead of max in the PSNR numerator.
        #[arg(long)]
        psnr_peak_squared: bool,
        #[arg(long, default_value_t = 1e-6)]
        eps_tv: f64,
    },
    /// List presets, or print one as TOML.
    Presets { name: Option<String> },
}

fn configs(args: &RunArgs) -> Result<(Vec<RunConfig>, PathBuf)> {
    let mut configs = match (&args.preset, args.config.is_empty()) {
        (Some(name), _) => preset(name)?,
        (None, false) => args
            .config
            .iter()
            .map(|p| RunConfig::load(p))
            .collect::<Result<Vec<_>>>()?,
        (None, true) => return Err(HarnessError::Config("pass --config or --preset".into())),
    };
    if let Some(seed) = args.seed {
        configs = configs.into_iter().map(|c| c.with_seed(seed)).collect();
    }
    let out = match &args.out {
        Some(dir) => dir.clone(),
        None => configs[0].output.directory.clone(),
    };
    Ok((configs, out))
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| HarnessError::Config(format!("--threads: {e}")))?;
    }
    match cli.command {
        Command::Simulate(args) => {
            let (configs, out) = configs(&args)?;
            let cells = commands::simulate(&configs, &out)?;
            println!("simulated {} phantom(s) into {}", cells.len(), out.display());
        }
        Command::Reconstruct(args) => {
            let (configs, out) = configs(&args)?;
            let result = commands::reconstruct(&configs, &out);
            for cfg in &configs {
                print_summary(&commands::summary_path(&out, &cfg.label()));
            }
            result?;
        }
        Command::Compare(args) => {
            let (configs, out) = configs(&args)?;
            let result = commands::compare(&configs, &out);
            if let Ok(table) = std::fs::read_to_string(out.join("compare.txt")) {
                print!("{table}");
            }
            result?;
        }
        Command::Metrics {
            image,
            reference,
            psnr_peak_squared,
            eps_tv,
        } => {
            let peak = if psnr_peak_squared { PsnrPeak::Squared } else { PsnrPeak::Linear };
            let tv = TvConfig { eps_tv };
            tv.validate().map_err(|e| HarnessError::Config(format!("--eps-tv: {e}")))?;
            let m = commands::metrics(&image, &reference, peak, &tv)?;
            println!("psnr {:.4}\nssim {:.6}\ndelta_tv_percent {:.4}", m.psnr, m.ssim, m.delta_tv_percent);
        }
        Command::Presets { name: None } => {
            for name in preset_names() {
                println!("{name}");
            }
        }
        Command::Presets { name: Some(name) } => {
            for cfg in preset(&name)? {
                println!("# {}\n{}", cfg.label(), cfg.to_toml());
            }
        }
    }
    Ok(())
}

fn print_summary(path: &Path) {
    if let Ok(rows) = ssrt_cli::report::read_summary(path) {
        for r in rows {
            println!(
                "{} phantom {:>2}: psnr {:.2} ssim {:.4} iterations {} proximity {:.4} ({:?})",
                r.method, r.phantom, r.psnr, r.ssim, r.iterations, r.proximity, r.termination
            );
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
