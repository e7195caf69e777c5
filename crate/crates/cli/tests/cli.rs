use std::path::Path;
use std::process::{Command, Output};

use ssrt_cli::report::{read_record, read_summary, sample_std};
use ssrt_core::record::Termination;

fn ssrt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssrt")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, algorithm: &str) -> String {
    let text = format!(
        r#"name = "{name}"

[geometry]
side = 32
views = 60

[phantom]
kind = "suite"
count = 2

[dose]
i0 = 1e5

[algorithm]
iterations = 6
{algorithm}
"#
    );
    let path = dir.join(format!("{name}.toml"));
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn simulate_then_reconstruct() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let cfg = write_config(dir.path(), "tv", "variant = \"conventional\"");

    let o = ssrt(&["reconstruct", "--config", &cfg, "--out", out]);
    assert_eq!(o.status.code(), Some(4), "reconstruct before simulate: {}", stderr(&o));

    let o = ssrt(&["simulate", "--config", &cfg, "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = Path::new(out);
    for file in ["phantom_00.ssrt", "sinogram_01.ssrt", "counts_00.ssrt", "simulate.toml"] {
        assert!(out.join(file).exists(), "{file}");
    }

    let o = ssrt(&["reconstruct", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = read_summary(&out.join("tv_summary.csv")).unwrap();
    assert_eq!(summary.len(), 3, "Shepp-Logan plus two random phantoms");
    for (i, row) in summary.iter().enumerate() {
        assert_eq!(row.termination, Termination::EpsilonCompatible);
        assert!(row.proximity < row.epsilon.unwrap());
        let record = read_record(&out.join(format!("tv_record_{i:02}.csv"))).unwrap();
        assert_eq!(record.len(), row.iterations);
        assert!(record.iter().all(|r| r.variant == "conventional"));
    }
    assert!(out.join("tv_image_01.ssrt").exists());

    let image = out.join("tv_image_00.ssrt");
    let o = ssrt(&["metrics", image.to_str().unwrap(), out.join("phantom_00.ssrt").to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8_lossy(&o.stdout);
    let psnr: f64 = text.lines().next().unwrap().split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!((psnr - summary[0].psnr).abs() < 1e-3, "{text}");
}

#[test]
fn configuration_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let typo = write_config(dir.path(), "typo", "relaxaton = 1.0");
    let o = ssrt(&["simulate", "--config", &typo, "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("relaxaton"), "{}", stderr(&o));

    let bad = write_config(dir.path(), "bad", "relaxation = 2.5");
    assert_eq!(ssrt(&["simulate", "--config", &bad, "--out", out]).status.code(), Some(2));
    assert_eq!(ssrt(&["simulate", "--preset", "nonsense", "--out", out]).status.code(), Some(2));
    assert_eq!(ssrt(&["simulate", "--out", out]).status.code(), Some(2));
}

#[test]
fn safety_cap_exits_with_3_after_writing_records() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(
        dir.path(),
        "capped",
        "variant = \"conventional\"\nmax_outer_iterations = 1",
    );
    let out_s = out.to_str().unwrap();
    assert!(ssrt(&["simulate", "--config", &cfg, "--out", out_s]).status.success());
    let o = ssrt(&["reconstruct", "--config", &cfg, "--out", out_s]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let summary = read_summary(&out.join("capped_summary.csv")).unwrap();
    assert!(summary.iter().all(|r| r.termination == Termination::SafetyCap && r.iterations == 1));
}

#[test]
fn missing_and_malformed_inputs_exit_with_4() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.ssrt");
    let garbage = dir.path().join("garbage.ssrt");
    std::fs::write(&garbage, b"not a raster").unwrap();
    let m = missing.to_str().unwrap();
    let g = garbage.to_str().unwrap();
    assert_eq!(ssrt(&["metrics", m, m]).status.code(), Some(4));
    assert_eq!(ssrt(&["metrics", g, g]).status.code(), Some(4));
    let cfg = dir.path().join("nope.toml");
    assert_eq!(ssrt(&["simulate", "--config", cfg.to_str().unwrap()]).status.code(), Some(4));
}

#[test]
fn presets_list_and_print() {
    let o = ssrt(&["presets"]);
    assert!(o.status.success());
    let list = String::from_utf8_lossy(&o.stdout);
    for name in ["baseline", "sparse", "lowdose-10k-pnp", "lowdose-50k-post"] {
        assert!(list.lines().any(|l| l.trim() == name), "{name} missing from\n{list}");
    }
    let o = ssrt(&["presets", "sparse-pnp"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("variant = \"pnp\""), "{text}");
}

#[test]
fn compare_tabulates_every_method() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let basic = write_config(dir.path(), "basic", "");
    let post = write_config(
        dir.path(),
        "post",
        "variant = \"postprocess\"\n\n[algorithm.denoiser]\nkind = \"median\"\nradius = 1",
    );
    let o = ssrt(&["compare", "--config", &basic, "--config", &post, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = std::fs::read_to_string(out.join("compare.txt")).unwrap();
    assert!(table.contains("basic") && table.contains("post"), "{table}");

    let mut reader = csv::Reader::from_path(out.join("compare.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    let psnr_std = headers.iter().position(|h| h == "psnr_std").unwrap();
    let method = headers.iter().position(|h| h == "method").unwrap();
    let summaries = [
        read_summary(&out.join("basic_summary.csv")).unwrap(),
        read_summary(&out.join("post_summary.csv")).unwrap(),
    ];
    for record in reader.records() {
        let record = record.unwrap();
        let rows = summaries.iter().find(|s| s[0].method == record[method]).unwrap();
        let psnr: Vec<f64> = rows.iter().map(|r| r.psnr).collect();
        // Sample standard deviation, computed directly.
        let m = psnr.iter().sum::<f64>() / psnr.len() as f64;
        let naive = (psnr.iter().map(|p| (p - m) * (p - m)).sum::<f64>() / (psnr.len() - 1) as f64).sqrt();
        let got: f64 = record[psnr_std].parse().unwrap();
        assert!((got - naive).abs() <= 1e-9 * naive.max(1.0), "{got} vs {naive}");
        assert!((sample_std(&psnr).unwrap() - naive).abs() <= 1e-12 * naive.max(1.0));
    }

    // The same name twice is rejected.
    let o = ssrt(&["compare", "--config", &basic, "--config", &basic, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
