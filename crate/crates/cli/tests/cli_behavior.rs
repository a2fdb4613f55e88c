//! Behavior tests for the `tagprint` binary: argument handling, exit codes,
//! error-line formats, and the file sets each subcommand produces.
//!
//! All runs use deliberately small configs so the whole file stays fast.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn tool() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tagprint"))
}

/// Fresh scratch directory under the system temp root.
fn scratch_dir(name: &str) -> PathBuf {
    let dir =
        std::env::temp_dir().join(format!("tagprint-cli-{}-{name}", std::process::id()));
    if dir.exists() {
        std::fs::remove_dir_all(&dir).expect("clear scratch dir");
    }
    std::fs::create_dir_all(&dir).expect("create scratch dir");
    dir
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.toml");
    std::fs::write(&path, body).expect("write config");
    path.to_str().unwrap().to_string()
}

fn run(args: &[&str]) -> Output {
    tool().args(args).output().expect("binary runs")
}

fn assert_ok(output: &Output) {
    assert!(
        output.status.success(),
        "expected success, got {:?}: {}",
        output.status.code(),
        String::from_utf8_lossy(&output.stderr)
    );
}

fn assert_fails(output: &Output, code: i32, stderr_prefix: &str) {
    assert_eq!(
        output.status.code(),
        Some(code),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let stderr = String::from_utf8_lossy(&output.stderr);
    let last = stderr.lines().last().unwrap_or_default();
    assert!(
        last.starts_with(stderr_prefix),
        "final stderr line {last:?} does not start with {stderr_prefix:?}"
    );
}

fn file_names(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .expect("read dir")
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).expect("read csv");
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .expect("csv has a header")
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    (header, rows)
}

fn column<'a>(header: &[String], rows: &'a [Vec<String>], name: &str) -> Vec<&'a str> {
    let idx = header
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("column {name} missing from {header:?}"));
    rows.iter().map(|r| r[idx].as_str()).collect()
}

#[test]
fn out_of_grid_position_is_a_validation_error() {
    let dir = scratch_dir("grid");
    let config = write_config(&dir, "positions = [[30.0, 20.0], [70.0, 10.0]]\n");
    let out = run(&["simulate", "--config", &config, "--out", dir.to_str().unwrap()]);
    assert_fails(&out, 1, "error: validation:");
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("outside"),
        "message should name the grid bound"
    );
}

#[test]
fn zero_averages_is_a_validation_error() {
    let dir = scratch_dir("averages");
    let config = write_config(&dir, "averages = 0\n");
    let out = run(&["spectrum", "--config", &config, "--out", dir.to_str().unwrap()]);
    assert_fails(&out, 1, "error: validation:");
}

#[test]
fn unknown_classifier_is_a_validation_error() {
    let out = run(&["study", "--classifiers", "svm,bogus"]);
    assert_fails(&out, 1, "error: validation:");
}

#[test]
fn malformed_config_is_a_validation_error() {
    let dir = scratch_dir("badtoml");
    let config = write_config(&dir, "master_seed = \"not a number\"\n");
    let out = run(&["simulate", "--config", &config, "--out", dir.to_str().unwrap()]);
    assert_fails(&out, 1, "error: validation:");
}

#[test]
fn missing_config_file_is_a_validation_error() {
    let out = run(&["simulate", "--config", "/nonexistent/config.toml"]);
    assert_fails(&out, 1, "error: validation:");
}

#[test]
fn scenario_flag_is_rejected_outside_simulate_and_pca() {
    let out = run(&["study", "--scenario", "large"]);
    assert_fails(&out, 1, "error: validation:");
    let out = run(&["spectrum", "--scenario", "static"]);
    assert_fails(&out, 1, "error: validation:");
}

#[test]
fn classifier_flag_is_rejected_outside_study() {
    let out = run(&["simulate", "--classifiers", "svm"]);
    assert_fails(&out, 1, "error: validation:");
}

#[test]
fn unknown_flag_is_a_validation_error() {
    let out = run(&["simulate", "--frobnicate"]);
    assert_fails(&out, 1, "error: validation:");
}

#[test]
fn unwritable_output_directory_is_a_runtime_error() {
    let dir = scratch_dir("unwritable");
    let blocker = dir.join("blocker");
    std::fs::write(&blocker, "file, not a directory").unwrap();
    let target = blocker.join("sub");
    let out = run(&["constellation", "--out", target.to_str().unwrap()]);
    assert_fails(&out, 2, "error: runtime:");
}

#[test]
fn single_device_clean_channel_yields_four_annotated_peaks() {
    let dir = scratch_dir("one-device");
    let config = write_config(
        &dir,
        "device_seeds = [5]\nmultipath_strength = 0.0\nsnr_db = 150.0\naverages = 4\n",
    );
    let out_dir = dir.join("out");
    let out = run(&["spectrum", "--config", &config, "--out", out_dir.to_str().unwrap()]);
    assert_ok(&out);
    assert_eq!(
        file_names(&out_dir),
        vec![
            "config.toml",
            "devices.toml",
            "manifest.json",
            "peaks_tag-1.csv",
            "spectrum_tag-1.csv",
        ],
        "one device means no difference series"
    );
    let (header, rows) = read_csv(&out_dir.join("peaks_tag-1.csv"));
    assert_eq!(rows.len(), 4, "exactly four annotated peaks");
    let bins: Vec<&str> = column(&header, &rows, "bin");
    assert_eq!(bins, vec!["74", "78", "82", "86"]);
}

#[test]
fn difference_series_peaks_at_an_intermodulation_bin() {
    let dir = scratch_dir("difference");
    let config = write_config(&dir, "averages = 60\n");
    let out_dir = dir.join("out");
    let out = run(&["spectrum", "--config", &config, "--out", out_dir.to_str().unwrap()]);
    assert_ok(&out);

    let (peak_header, peak_rows) = read_csv(&out_dir.join("peaks_tag-1.csv"));
    let peak_bins: Vec<usize> = column(&peak_header, &peak_rows, "bin")
        .iter()
        .map(|b| b.parse().unwrap())
        .collect();
    assert_eq!(peak_bins, vec![74, 78, 82, 86]);

    let (header, rows) = read_csv(&out_dir.join("difference.csv"));
    let bins: Vec<usize> = column(&header, &rows, "bin")
        .iter()
        .map(|b| b.parse().unwrap())
        .collect();
    let diffs: Vec<f64> = column(&header, &rows, "difference_db")
        .iter()
        .map(|d| d.parse().unwrap())
        .collect();
    let at = |bin: usize| {
        let idx = bins.iter().position(|&b| b == bin).expect("bin present");
        diffs[idx].abs()
    };
    let (argmax, _) = peak_bins
        .iter()
        .map(|&b| (b, at(b)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    assert!(
        argmax == 74 || argmax == 86,
        "largest peak-bin difference at bin {argmax}, expected an intermodulation bin"
    );
}

#[test]
fn classifier_subset_restricts_the_study_grid() {
    let dir = scratch_dir("subset");
    let config = write_config(
        &dir,
        "samples_per_position = 30\nincreased_per_class = 20\naverages = 5\n",
    );
    let out_dir = dir.join("out");
    let out = run(&[
        "study",
        "--config",
        &config,
        "--classifiers",
        "perceptron,svm",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_ok(&out);

    let (header, rows) = read_csv(&out_dir.join("report.csv"));
    assert_eq!(
        header,
        vec![
            "regime",
            "classifier",
            "test_scenario",
            "accuracy",
            "true0_pred0",
            "true0_pred1",
            "true1_pred0",
            "true1_pred1",
        ]
    );
    assert_eq!(rows.len(), 18, "2 classifiers x 3 regimes x 3 scenarios");
    let classifiers = column(&header, &rows, "classifier");
    assert!(classifiers
        .iter()
        .all(|c| *c == "perceptron" || *c == "svm_linear"));

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap())
            .unwrap();
    assert_eq!(json["cells"].as_array().unwrap().len(), 18);
    assert_eq!(json["regimes"].as_array().unwrap().len(), 3);
}

#[test]
fn full_study_emits_63_cells_and_projection_files() {
    let dir = scratch_dir("fullgrid");
    let config = write_config(
        &dir,
        "samples_per_position = 30\nincreased_per_class = 20\naverages = 5\n",
    );
    let out_dir = dir.join("out");
    let out = run(&["study", "--config", &config, "--out", out_dir.to_str().unwrap()]);
    assert_ok(&out);
    let (_, rows) = read_csv(&out_dir.join("report.csv"));
    assert_eq!(rows.len(), 63, "7 classifiers x 3 regimes x 3 scenarios");
    for name in [
        "pca_static_only.csv",
        "pca_increased.csv",
        "pca_combined.csv",
        "spectrum_tag-1.csv",
        "spectrum_tag-2.csv",
        "peaks_tag-1.csv",
        "peaks_tag-2.csv",
    ] {
        assert!(out_dir.join(name).exists(), "{name} missing");
    }
}

#[test]
fn scenario_flag_narrows_simulate_outputs() {
    let dir = scratch_dir("narrow");
    let config = write_config(&dir, "samples_per_position = 5\n");
    let out_dir = dir.join("out");
    let out = run(&[
        "simulate",
        "--config",
        &config,
        "--scenario",
        "large",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_ok(&out);
    assert_eq!(
        file_names(&out_dir),
        vec!["config.toml", "dataset_large.csv", "devices.toml", "manifest.json"]
    );
}

#[test]
fn position_override_shapes_the_large_dataset() {
    let dir = scratch_dir("positions");
    let config = write_config(
        &dir,
        "samples_per_position = 6\npositions = [[10.0, 10.0], [50.0, 50.0]]\n",
    );
    let out_dir = dir.join("out");
    let out = run(&[
        "simulate",
        "--config",
        &config,
        "--scenario",
        "large",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_ok(&out);
    let (header, rows) = read_csv(&out_dir.join("dataset_large.csv"));
    assert_eq!(rows.len(), 24, "2 positions x 2 devices x 6 captures");
    let positions = column(&header, &rows, "position");
    assert!(positions.iter().all(|p| *p == "0" || *p == "1"));
    let synthetic = column(&header, &rows, "is_synthetic");
    assert!(synthetic.iter().all(|s| *s == "0"));
}

#[test]
fn manifest_hashes_match_file_bytes() {
    let dir = scratch_dir("manifest");
    let config = write_config(&dir, "samples_per_position = 5\naverages = 3\n");
    let out_dir = dir.join("out");
    let out = run(&["simulate", "--config", &config, "--out", out_dir.to_str().unwrap()]);
    assert_ok(&out);

    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out_dir.join("manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["master_seed"], 42);

    let hash = |bytes: &[u8]| {
        let digest = Sha256::digest(bytes);
        digest.iter().map(|b| format!("{b:02x}")).collect::<String>()
    };
    let files = manifest["files"].as_array().unwrap();
    assert!(!files.is_empty());
    for entry in files {
        let name = entry["path"].as_str().unwrap();
        let bytes = std::fs::read(out_dir.join(name)).unwrap();
        assert_eq!(
            entry["sha256"].as_str().unwrap(),
            hash(&bytes),
            "hash mismatch for {name}"
        );
    }
    let config_bytes = std::fs::read(out_dir.join("config.toml")).unwrap();
    assert_eq!(
        manifest["config_sha256"].as_str().unwrap(),
        hash(&config_bytes),
        "manifest config hash must equal the emitted config.toml hash"
    );
}

#[test]
fn empty_config_file_matches_built_in_defaults() {
    let dir = scratch_dir("defaults");
    let config = write_config(&dir, "");
    let with_file = dir.join("with-file");
    let without = dir.join("without");
    assert_ok(&run(&["spectrum", "--config", &config, "--out", with_file.to_str().unwrap()]));
    assert_ok(&run(&["spectrum", "--out", without.to_str().unwrap()]));
    assert_eq!(file_names(&with_file), file_names(&without));
    for name in file_names(&with_file) {
        assert_eq!(
            std::fs::read(with_file.join(&name)).unwrap(),
            std::fs::read(without.join(&name)).unwrap(),
            "{name} differs between empty config and defaults"
        );
    }
}

#[test]
fn seed_flag_changes_the_generated_data() {
    let dir = scratch_dir("seeds");
    let config = write_config(&dir, "samples_per_position = 5\n");
    let a = dir.join("a");
    let b = dir.join("b");
    assert_ok(&run(&[
        "simulate", "--config", &config, "--scenario", "static", "--seed", "1", "--out",
        a.to_str().unwrap(),
    ]));
    assert_ok(&run(&[
        "simulate", "--config", &config, "--scenario", "static", "--seed", "2", "--out",
        b.to_str().unwrap(),
    ]));
    assert_ne!(
        std::fs::read(a.join("dataset_static.csv")).unwrap(),
        std::fs::read(b.join("dataset_static.csv")).unwrap(),
        "different seeds must change the captures"
    );
}

#[test]
fn snr_override_reaches_the_synthesis_chain() {
    let dir = scratch_dir("snr");
    let config = write_config(&dir, "averages = 3\n");
    let a = dir.join("a");
    let b = dir.join("b");
    assert_ok(&run(&["spectrum", "--config", &config, "--out", a.to_str().unwrap()]));
    assert_ok(&run(&[
        "spectrum", "--config", &config, "--snr-db", "150", "--out", b.to_str().unwrap(),
    ]));
    let (header, rows_a) = read_csv(&a.join("spectrum_tag-1.csv"));
    let (_, rows_b) = read_csv(&b.join("spectrum_tag-1.csv"));
    // Bin 10 sits far from every tone: pure noise floor, so 120 dB more SNR
    // must push it down by tens of dB.
    let floor = |rows: &[Vec<String>]| -> f64 {
        column(&header, rows, "magnitude_db")[10].parse().unwrap()
    };
    assert!(
        floor(&rows_b) < floor(&rows_a) - 20.0,
        "noise floor did not drop with higher SNR: {} vs {}",
        floor(&rows_a),
        floor(&rows_b)
    );
}

#[test]
fn pca_command_writes_projection_and_variance_tables() {
    let dir = scratch_dir("pca");
    let config = write_config(&dir, "samples_per_position = 10\n");
    let out_dir = dir.join("out");
    let out = run(&[
        "pca",
        "--config",
        &config,
        "--scenario",
        "large",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_ok(&out);
    let (header, rows) = read_csv(&out_dir.join("pca_large.csv"));
    assert_eq!(
        header,
        vec!["pc1", "pc2", "label", "device_id", "position", "x_cm", "y_cm"]
    );
    assert_eq!(rows.len(), 10 * 2 * 5, "captures x devices x positions");
    let (_, variance_rows) = read_csv(&out_dir.join("pca_variance.csv"));
    assert_eq!(variance_rows.len(), 2);
}

#[test]
fn constellation_command_writes_sixteen_distorted_symbols() {
    let dir = scratch_dir("constellation");
    let out_dir = dir.join("out");
    let out = run(&["constellation", "--out", out_dir.to_str().unwrap()]);
    assert_ok(&out);
    for device in ["tag-1", "tag-2"] {
        let (header, rows) = read_csv(&out_dir.join(format!("constellation_{device}.csv")));
        assert_eq!(rows.len(), 16);
        // The corner symbols compress: distorted radius below ideal radius.
        let ideal_i: Vec<f64> = column(&header, &rows, "ideal_i")
            .iter()
            .map(|v| v.parse().unwrap())
            .collect();
        let ideal_q: Vec<f64> = column(&header, &rows, "ideal_q")
            .iter()
            .map(|v| v.parse().unwrap())
            .collect();
        let dist_i: Vec<f64> = column(&header, &rows, "distorted_i")
            .iter()
            .map(|v| v.parse().unwrap())
            .collect();
        let dist_q: Vec<f64> = column(&header, &rows, "distorted_q")
            .iter()
            .map(|v| v.parse().unwrap())
            .collect();
        let corner = (0..16)
            .max_by(|&a, &b| {
                let ra = ideal_i[a].hypot(ideal_q[a]);
                let rb = ideal_i[b].hypot(ideal_q[b]);
                ra.total_cmp(&rb)
            })
            .unwrap();
        assert!(
            dist_i[corner].hypot(dist_q[corner]) < ideal_i[corner].hypot(ideal_q[corner]),
            "{device}: corner symbol should compress inward"
        );
    }
}

#[test]
fn help_and_version_exit_cleanly() {
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("simulate"));
    let out = run(&["--version"]);
    assert_eq!(out.status.code(), Some(0));
}
