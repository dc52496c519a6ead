use std::path::Path;
use std::process::{Command, Output};

use bfsnet::cli::{manifest_path, Manifest};
use bfsnet::spectra::{add_noise, synth_spectrum, FrequencyGrid, LorentzianParams, NoiseSpec};

fn bgs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bgs"))
        .args(args)
        .output()
        .expect("bgs runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_spectrum(path: &Path, step: f64, range: f64, bfs: f64) {
    let grid = FrequencyGrid::from_range(0.0, step, range).unwrap();
    let s = synth_spectrum(&LorentzianParams::new(1.0, bfs, 30.0).unwrap(), &grid);
    add_noise(&s, &NoiseSpec::new(30.0, 1).unwrap()).write_csv(path).unwrap();
}

#[test]
fn missing_required_flag_is_a_usage_error() {
    let o = bgs(&["infer", "--model", "m.fnn"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--in"));
}

#[test]
fn unknown_flag_is_a_usage_error_with_help() {
    let o = bgs(&["fit", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn unreadable_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = bgs(&["fit", "--in", p(&dir.path().join("absent.csv"))]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn fit_and_resample_report_absolute_frequencies() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("s.csv");
    write_spectrum(&spec, 4.0, 200.0, 120.0);
    let o = bgs(&["fit", "--in", p(&spec)]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let bfs: f64 = text.split_whitespace().nth(3).unwrap().parse().unwrap();
    assert!((bfs - 120.0).abs() < 1.0, "{text}");

    let win = dir.path().join("w.csv");
    let o = bgs(&["resample", "--in", p(&spec), "--out", p(&win)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&win).unwrap().lines().count(), 158);
    assert!(manifest_path(&win).exists());
}

#[test]
fn generated_data_replays_to_identical_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.bin");
    let o = bgs(&["gen-data", "--out", p(&a), "--seed", "11", "--workers", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("4284 columns"));

    let first = Manifest::load(&manifest_path(&a)).unwrap();
    assert_eq!(first.seed, Some(11));
    assert_eq!(first.outputs.len(), 1);
    assert!(first.outputs[0].path.exists());

    let o = bgs(&["gen-data", "--out", p(&a), "--seed", "11", "--workers", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let second = Manifest::load(&manifest_path(&a)).unwrap();
    assert_eq!(
        Manifest {
            unix_time: 0,
            ..first.clone()
        },
        Manifest {
            unix_time: 0,
            ..second
        }
    );

    std::fs::remove_file(&a).unwrap();
    let m = dir.path().join("replay.json");
    std::fs::copy(manifest_path(&a), &m).unwrap();
    let o = bgs(&["replay", "--from", p(&m)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("ok"));
}

#[test]
fn config_file_values_yield_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.bin");
    assert_eq!(bgs(&["gen-data", "--out", p(&train)]).status.code(), Some(0));
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 4\n[train]\nhidden = [3]\niters = 9\npatience = 0\n").unwrap();
    let model = dir.path().join("m.fnn");
    let log = dir.path().join("log.csv");
    let o = bgs(&[
        "train", "--config", p(&cfg), "--data", p(&train), "--iters", "2", "--out", p(&model),
        "--log", p(&log),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("iterations 2 "), "{}", stdout(&o));
    let m = Manifest::load(&manifest_path(&model)).unwrap();
    assert_eq!(m.seed, Some(4));
    assert!(m.resolved_args.iter().any(|a| a == "--hidden"));

    let o = bgs(&["replay", "--from", p(&manifest_path(&model))]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let spec = dir.path().join("s.csv");
    write_spectrum(&spec, 1.0, 156.0, 70.0);
    let o = bgs(&["infer", "--model", p(&model), "--in", p(&spec)]);
    assert_eq!(o.status.code(), Some(0));
    let bfs: f64 = stdout(&o).trim().parse().unwrap();
    assert!(bfs.is_finite());

    let o = bgs(&["eval", "--model", p(&model), "--data", p(&train)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("mse "));
}

#[test]
fn trace_commands_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let profile = dir.path().join("fiber.toml");
    std::fs::write(
        &profile,
        r#"
[fiber]
length_km = 1.2
spatial_step_m = 20.0
heated_segments = [{ start_km = 1.0, end_km = 1.1, delta_temp_c = 10.0, c_t_mhz_per_c = 1.0 }]

[[fiber.sections]]
start_km = 0.0
end_km = 1.2
base_bfs_mhz = 80.0
linewidth_mhz = 30.0
gain = 1.0
snr_db = 30.0

[scan]
step_mhz = 2
range_mhz = 160.0
"#,
    )
    .unwrap();
    let before = dir.path().join("b.bin");
    let after = dir.path().join("a.bin");
    for (out, heated) in [(&before, false), (&after, true)] {
        let mut args = vec!["simulate-trace", "--profile", p(&profile), "--out", p(out), "--seed", "3"];
        if heated {
            args.push("--heated");
        }
        let o = bgs(&args);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let train = dir.path().join("train.bin");
    let model = dir.path().join("m.fnn");
    assert_eq!(bgs(&["gen-data", "--out", p(&train)]).status.code(), Some(0));
    let o = bgs(&["train", "--data", p(&train), "--hidden", "4", "--iters", "2", "--out", p(&model)]);
    assert_eq!(o.status.code(), Some(0));
    let report = dir.path().join("report");
    let o = bgs(&[
        "analyze", "--profile", p(&profile), "--before", p(&before), "--after", p(&after), "--model", p(&model),
        "--region-km", "0.8", "--out-dir", p(&report),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("lcf uncertainty_c"));
    assert!(report.join("deviation.csv").exists());
}
