//! End-to-end tests of the `parallax` binary: subcommands, exit codes,
//! artifacts and determinism.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use parallax::io::{save_pgm, PnmEncoding};
use parallax::synth;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_parallax"))
}

fn run(args: &[&str]) -> Output {
    binary().args(args).output().expect("spawn parallax")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("exit code")
}

/// Writes a small translated pair and returns (template, reference) paths.
fn write_pair(dir: &Path, seed: u64, dx: i32, dy: i32) -> (PathBuf, PathBuf) {
    let base = synth::default_texture(72, 60, seed);
    let (template, reference) = synth::translated_pair(&base, dx, dy);
    let t_path = dir.join("template.pgm");
    let r_path = dir.join("reference.pgm");
    save_pgm(&template, &t_path, 255, PnmEncoding::Binary).unwrap();
    save_pgm(&reference, &r_path, 255, PnmEncoding::Binary).unwrap();
    (t_path, r_path)
}

fn read_kv(path: &Path) -> BTreeMap<String, String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter_map(|line| {
            line.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
        })
        .collect()
}

#[test]
fn match_on_identical_pair_reports_perfect_alignment() {
    let dir = tempfile::tempdir().unwrap();
    let img = synth::default_texture(64, 56, 3);
    let path = dir.path().join("same.pgm");
    save_pgm(&img, &path, 255, PnmEncoding::Binary).unwrap();
    let out_dir = dir.path().join("out");

    let output = run(&[
        "match",
        "--template",
        path.to_str().unwrap(),
        "--reference",
        path.to_str().unwrap(),
        "--block",
        "7",
        "--overlap",
        "0",
        "--u-min",
        "-2",
        "--u-max",
        "2",
        "--v-min",
        "-2",
        "--v-max",
        "2",
        "--output-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 0, "{}", stderr(&output));

    let kv = read_kv(&out_dir.join("report.kv"));
    let post: f64 = kv["correlation_post"].parse().unwrap();
    assert!((post - 1.0).abs() < 1e-9, "post {post}");

    let csv = fs::read_to_string(out_dir.join("disparity.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "cell_x,cell_y,px_x,px_y,dx,dy,score,valid"
    );
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[4], "0", "{line}");
        assert_eq!(fields[5], "0", "{line}");
        assert_eq!(fields[7], "true", "{line}");
    }
}

#[test]
fn match_recovers_translation_via_flags_only() {
    let dir = tempfile::tempdir().unwrap();
    let (template, reference) = write_pair(dir.path(), 9, 3, 1);
    let out_dir = dir.path().join("out");
    let output = run(&[
        "match",
        "--template",
        template.to_str().unwrap(),
        "--reference",
        reference.to_str().unwrap(),
        "--variant",
        "diagonal-ncc",
        "--block",
        "8",
        "--overlap",
        "0",
        "--margin",
        "6",
        "--u-min",
        "-5",
        "--u-max",
        "5",
        "--v-min",
        "-5",
        "--v-max",
        "5",
        "--output-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 0, "{}", stderr(&output));
    let csv = fs::read_to_string(out_dir.join("disparity.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!((fields[4], fields[5]), ("3", "1"), "{line}");
    }
}

#[test]
fn every_listed_artifact_exists() {
    let dir = tempfile::tempdir().unwrap();
    let (template, reference) = write_pair(dir.path(), 5, 2, 0);
    let out_dir = dir.path().join("artifacts");
    let output = run(&[
        "match",
        "--template",
        template.to_str().unwrap(),
        "--reference",
        reference.to_str().unwrap(),
        "--block",
        "6",
        "--u-min",
        "-3",
        "--u-max",
        "3",
        "--v-min",
        "-1",
        "--v-max",
        "1",
        "--overlap",
        "2",
        "--output-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 0, "{}", stderr(&output));
    let kv = read_kv(&out_dir.join("report.kv"));
    let artifact_keys: Vec<&String> = kv.keys().filter(|k| k.starts_with("artifact_")).collect();
    assert_eq!(artifact_keys.len(), 8);
    for key in artifact_keys {
        // Artifact paths are relative to the report's directory.
        let path = out_dir.join(&kv[key]);
        assert!(path.is_file(), "{key} -> {} missing", kv[key]);
    }
}

#[test]
fn config_file_with_env_root_and_validate_config() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    fs::create_dir_all(&data).unwrap();
    write_pair(&data, 21, 1, 0);

    let config_path = dir.path().join("exp.toml");
    fs::write(
        &config_path,
        "template = \"template.pgm\"\nreference = \"reference.pgm\"\nblock = 6\noverlap = 2\n\
         [search]\nu_min = -2\nu_max = 2\nv_min = -1\nv_max = 1\n",
    )
    .unwrap();

    let output = binary()
        .args(["validate-config", "--config", config_path.to_str().unwrap()])
        .env("PARALLAX_DATA_DIR", &data)
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 0, "{}", stderr(&output));
    let normalized = stdout(&output);
    assert!(normalized.contains("template.pgm"), "{normalized}");
    assert!(normalized.contains("block = 6"), "{normalized}");

    // Without the env root the relative paths do not exist.
    let output = run(&["validate-config", "--config", config_path.to_str().unwrap()]);
    assert_eq!(exit_code(&output), 1);
    assert!(stderr(&output).contains("template"), "{}", stderr(&output));

    let out_dir = dir.path().join("out");
    let output = binary()
        .args([
            "match",
            "--config",
            config_path.to_str().unwrap(),
            "--output-dir",
            out_dir.to_str().unwrap(),
        ])
        .env("PARALLAX_DATA_DIR", &data)
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 0, "{}", stderr(&output));
    assert!(out_dir.join("report.kv").is_file());
}

#[test]
fn usage_config_and_data_errors_use_distinct_exit_codes() {
    // Usage: match without inputs.
    let output = run(&["match"]);
    assert_eq!(exit_code(&output), 1);

    // Usage: unknown flag (clap).
    let output = run(&["match", "--nonsense"]);
    assert_eq!(exit_code(&output), 1);

    // Config: unknown key names the key.
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("bad.toml");
    fs::write(&config_path, "template = \"t\"\nreference = \"r\"\nblocc = 3\n").unwrap();
    let output = run(&["validate-config", "--config", config_path.to_str().unwrap()]);
    assert_eq!(exit_code(&output), 1);
    assert!(stderr(&output).contains("blocc"), "{}", stderr(&output));

    // Config: constraint violation via flags.
    let (template, reference) = write_pair(dir.path(), 2, 1, 0);
    let output = run(&[
        "match",
        "--template",
        template.to_str().unwrap(),
        "--reference",
        reference.to_str().unwrap(),
        "--block",
        "5",
        "--overlap",
        "5",
    ]);
    assert_eq!(exit_code(&output), 1);
    assert!(stderr(&output).contains("overlap"), "{}", stderr(&output));

    // Data: unreadable image content.
    let garbage = dir.path().join("garbage.pgm");
    fs::write(&garbage, b"P5\n9 9\n255\nshort").unwrap();
    let output = run(&[
        "match",
        "--template",
        garbage.to_str().unwrap(),
        "--reference",
        reference.to_str().unwrap(),
        "--block",
        "5",
        "--overlap",
        "0",
    ]);
    assert_eq!(exit_code(&output), 2, "{}", stderr(&output));

    // Data: block larger than the image.
    let output = run(&[
        "match",
        "--template",
        template.to_str().unwrap(),
        "--reference",
        reference.to_str().unwrap(),
        "--block",
        "64",
        "--overlap",
        "0",
        "--margin",
        "1",
    ]);
    assert_eq!(exit_code(&output), 2, "{}", stderr(&output));
}

#[test]
fn sweep_writes_manifest_rows_and_continues_past_failures() {
    let dir = tempfile::tempdir().unwrap();
    let (template, reference) = write_pair(dir.path(), 31, 1, 0);
    let out_dir = dir.path().join("sweep");
    let output = run(&[
        "sweep",
        "--template",
        template.to_str().unwrap(),
        "--reference",
        reference.to_str().unwrap(),
        "--variant",
        "sad",
        "--u-min",
        "-2",
        "--u-max",
        "2",
        "--v-min",
        "-1",
        "--v-max",
        "1",
        "--sweep-block",
        "5,7",
        "--sweep-overlap",
        "all",
        "--output-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 0, "{}", stderr(&output));

    let manifest = fs::read_to_string(out_dir.join("manifest.txt")).unwrap();
    assert_eq!(manifest.lines().count(), 5 + 7);

    let csv = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 1 + 12);
    assert!(lines[0].starts_with("run,status,variant,block,overlap"));
    for line in &lines[1..] {
        assert!(line.contains(",ok,"), "{line}");
    }
    // Per-run artifact directories exist.
    assert!(out_dir.join("run_000_b5_o0").join("report.kv").is_file());
    assert!(out_dir.join("run_011_b7_o6").join("report.kv").is_file());

    // A sweep with an oversized block still completes, recording the failure.
    let out_dir2 = dir.path().join("sweep2");
    let output = run(&[
        "sweep",
        "--template",
        template.to_str().unwrap(),
        "--reference",
        reference.to_str().unwrap(),
        "--variant",
        "sad",
        "--u-min",
        "-1",
        "--u-max",
        "1",
        "--v-min",
        "0",
        "--v-max",
        "0",
        "--margin",
        "1",
        "--sweep-block",
        "5,64",
        "--sweep-overlap",
        "0",
        "--output-dir",
        out_dir2.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 0, "{}", stderr(&output));
    let csv = fs::read_to_string(out_dir2.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].contains(",ok,"));
    assert!(lines[2].contains("error"), "{}", lines[2]);
}

#[test]
fn sweepless_sweep_behaves_like_match() {
    let dir = tempfile::tempdir().unwrap();
    let (template, reference) = write_pair(dir.path(), 41, 2, 1);
    let args_common = [
        "--template",
        template.to_str().unwrap(),
        "--reference",
        reference.to_str().unwrap(),
        "--variant",
        "sad",
        "--block",
        "6",
        "--overlap",
        "2",
        "--u-min",
        "-3",
        "--u-max",
        "3",
        "--v-min",
        "-2",
        "--v-max",
        "2",
    ];

    let match_dir = dir.path().join("match_out");
    let mut args: Vec<&str> = vec!["match"];
    args.extend_from_slice(&args_common);
    args.extend_from_slice(&["--output-dir", match_dir.to_str().unwrap()]);
    assert_eq!(exit_code(&run(&args)), 0);

    let sweep_dir = dir.path().join("sweep_out");
    let mut args: Vec<&str> = vec!["sweep"];
    args.extend_from_slice(&args_common);
    args.extend_from_slice(&["--output-dir", sweep_dir.to_str().unwrap()]);
    assert_eq!(exit_code(&run(&args)), 0);

    let single = fs::read_to_string(match_dir.join("disparity.csv")).unwrap();
    let swept = fs::read_to_string(sweep_dir.join("run_000").join("disparity.csv")).unwrap();
    assert_eq!(single, swept);
    let csv = fs::read_to_string(sweep_dir.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn power_output_and_errors() {
    let output = run(&["power", "--channels", "64"]);
    assert_eq!(exit_code(&output), 0);
    let table = stdout(&output);
    for expected in ["lpf", "summer", "multiplier", "integrator", "215.15"] {
        assert!(table.contains(expected), "missing {expected}:\n{table}");
    }

    let output = run(&["power", "--channels", "0"]);
    assert_eq!(exit_code(&output), 0);
    assert!(stdout(&output).contains("total"));

    // 128 channels doubles every 64-channel subtotal.
    let output = run(&["power", "--channels", "128"]);
    let table = stdout(&output);
    for expected in ["358.4", "70.27", "0.117", "1.53"] {
        assert!(table.contains(expected), "missing {expected}:\n{table}");
    }

    let output = run(&["power", "--channels", "7"]);
    assert_eq!(exit_code(&output), 1);
}

#[test]
fn reruns_are_byte_identical_including_reports() {
    let dir = tempfile::tempdir().unwrap();
    let (template, reference) = write_pair(dir.path(), 77, 2, 1);
    let run_once = |out: &Path| {
        let output = run(&[
            "match",
            "--template",
            template.to_str().unwrap(),
            "--reference",
            reference.to_str().unwrap(),
            "--variant",
            "sad",
            "--block",
            "5",
            "--overlap",
            "3",
            "--u-min",
            "-3",
            "--u-max",
            "3",
            "--v-min",
            "-2",
            "--v-max",
            "2",
            "--noise-multiplier-pct",
            "0.05",
            "--noise-integrator-pct",
            "0.05",
            "--noise-seed",
            "99",
            "--output-dir",
            out.to_str().unwrap(),
        ]);
        assert_eq!(exit_code(&output), 0, "{}", stderr(&output));
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_once(&a);
    run_once(&b);
    for file in ["disparity.csv", "report.kv", "report.txt", "disparity_x.pgm"] {
        let left = fs::read(a.join(file)).unwrap();
        let right = fs::read(b.join(file)).unwrap();
        assert_eq!(left, right, "{file} differs between reruns");
    }
}

#[test]
fn noise_rms_source_is_selectable() {
    let dir = tempfile::tempdir().unwrap();
    let (template, reference) = write_pair(dir.path(), 83, 1, 0);
    let run_with = |source: &str, out: &Path| -> BTreeMap<String, String> {
        let output = run(&[
            "match",
            "--template",
            template.to_str().unwrap(),
            "--reference",
            reference.to_str().unwrap(),
            "--variant",
            "sad",
            "--block",
            "6",
            "--overlap",
            "0",
            "--u-min",
            "-2",
            "--u-max",
            "2",
            "--v-min",
            "-1",
            "--v-max",
            "1",
            "--noise-multiplier-pct",
            "0.05",
            "--noise-seed",
            "3",
            "--noise-rms-source",
            source,
            "--output-dir",
            out.to_str().unwrap(),
        ]);
        assert_eq!(exit_code(&output), 0, "{}", stderr(&output));
        read_kv(&out.join("report.kv"))
    };
    let from_template = run_with("template", &dir.path().join("t"));
    let from_reference = run_with("reference", &dir.path().join("r"));
    assert_eq!(from_template["noise_rms_source"], "template");
    assert_eq!(from_reference["noise_rms_source"], "reference");
    // The two images differ, so the cached RMS differs too.
    assert_ne!(from_template["signal_rms"], from_reference["signal_rms"]);
}
