use rotorqc_cli::record::ResultRecord;
use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

const READOUT: &str = r#"{
  "name": "small-readout",
  "seed": 11,
  "scenario": { "kind": "readout", "repetitions": 3, "molecule_pulse_infidelity": 0.01,
                "detection": { "bright_mean": 8.0, "dark_mean": 0.5, "threshold": 3 },
                "trials": 3000, "example_shots": 2 }
}"#;

const RABI: &str = r#"{
  "name": "small-rabi",
  "scenario": { "kind": "rabi", "rabi_hz": 1e6, "j_max": 4, "samples": 40,
                "secular_cutoff_hz": 1e10 }
}"#;

fn rotorqc(args: &[&str], env: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rotorqc"));
    cmd.args(args).env_remove("ROTORQC_PRESET_DIR");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn payload(path: &Path) -> Value {
    let r: ResultRecord = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    r.payload()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn runs_are_reproducible_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "r.json", READOUT);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    ok(&rotorqc(&["run", &cfg, "--out", a.to_str().unwrap(), "--threads", "1"], &[]));
    ok(&rotorqc(&["run", &cfg, "--out", b.to_str().unwrap(), "--threads", "3"], &[]));
    let (pa, pb) = (payload(&a.join("small-readout.json")), payload(&b.join("small-readout.json")));
    assert_eq!(serde_json::to_string(&pa).unwrap(), serde_json::to_string(&pb).unwrap());
    let raw: Value = serde_json::from_str(&std::fs::read_to_string(a.join("small-readout.json")).unwrap()).unwrap();
    assert!(raw["provenance"]["timestamp"].is_string());
}

#[test]
fn seed_override_changes_results_and_is_echoed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "r.json", READOUT);
    let out = tmp.path().join("o");
    ok(&rotorqc(&["run", &cfg, "--out", out.to_str().unwrap(), "--seed", "99"], &[]));
    let r: ResultRecord = serde_json::from_str(&std::fs::read_to_string(out.join("small-readout.json")).unwrap()).unwrap();
    assert_eq!(r.provenance.seed, 99);
    assert_eq!(r.config.seed, 99);
}

#[test]
fn echoed_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "r.json", READOUT);
    let first = tmp.path().join("first");
    ok(&rotorqc(&["run", &cfg, "--out", first.to_str().unwrap()], &[]));
    let r: ResultRecord = serde_json::from_str(&std::fs::read_to_string(first.join("small-readout.json")).unwrap()).unwrap();
    let echo = write(tmp.path(), "echo.json", &serde_json::to_string_pretty(&r.config).unwrap());
    let second = tmp.path().join("second");
    ok(&rotorqc(&["run", &echo, "--out", second.to_str().unwrap()], &[]));
    assert_eq!(payload(&first.join("small-readout.json")), payload(&second.join("small-readout.json")));
}

#[test]
fn csv_series_are_stamped_with_fixed_headers() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "rabi.json", RABI);
    let out = tmp.path().join("o");
    ok(&rotorqc(&["run", &cfg, "--out", out.to_str().unwrap(), "--format", "csv"], &[]));
    let csv = std::fs::read_to_string(out.join("small-rabi.populations.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "# rotorqc-series v1 populations");
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header[0], "time_s");
    assert!(header.contains(&"population_J0M0") && header.contains(&"population_J2M0"));
    assert_eq!(lines.count(), 40);
    let json: Value = serde_json::from_str(&std::fs::read_to_string(out.join("small-rabi.json")).unwrap()).unwrap();
    assert_eq!(json["series"], Value::Array(vec![]));
    assert_eq!(json["series_files"][0], "small-rabi.populations.csv");

    let rcfg = write(tmp.path(), "r.json", READOUT);
    ok(&rotorqc(&["run", &rcfg, "--out", out.to_str().unwrap(), "--format", "csv"], &[]));
    let rounds = std::fs::read_to_string(out.join("small-readout.rounds.csv")).unwrap();
    let header = rounds.lines().nth(1).unwrap();
    assert!(header.contains("round") && header.contains("photon_count"));
}

#[test]
fn bad_configs_exit_2_and_write_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let cases = [
        ("syntax.json", "{ \"name\": "),
        ("unknown.json", r#"{"name": "x", "scenario": {"kind": "rabi", "rabi_hz": 1e6, "colour": 1}}"#),
        ("physics.json", r#"{"name": "x", "scenario": {"kind": "readout", "molecule_pulse_infidelity": 1.5}}"#),
        ("kind.json", r#"{"name": "x", "scenario": {"kind": "teleport"}}"#),
    ];
    for (file, text) in cases {
        let cfg = write(tmp.path(), file, text);
        let r = rotorqc(&["run", &cfg, "--out", out.to_str().unwrap()], &[]);
        assert_eq!(r.status.code(), Some(2), "{file}: {}", String::from_utf8_lossy(&r.stderr));
        let v = rotorqc(&["validate", &cfg], &[]);
        assert_eq!(v.status.code(), Some(2), "{file}");
    }
    assert_eq!(rotorqc(&["run", "no-such-preset-or-file"], &[]).status.code(), Some(2));
    assert!(!out.exists() || std::fs::read_dir(&out).unwrap().next().is_none());
}

#[test]
fn invariant_violations_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "t.json",
        r#"{"name": "trunc", "scenario": {"kind": "rabi", "rabi_hz": 1e9, "j_max": 4,
            "samples": 16, "duration_s": 2e-9, "tolerance": 1e-6}}"#,
    );
    let out = tmp.path().join("o");
    let r = rotorqc(&["run", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(r.status.code(), Some(3), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(!out.join("trunc.json").exists());
}

#[test]
fn unwritable_output_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "r.json", READOUT);
    let blocker = write(tmp.path(), "blocker", "not a directory");
    let r = rotorqc(&["run", &cfg, "--out", &format!("{blocker}/sub")], &[]);
    assert_eq!(r.status.code(), Some(4), "{}", String::from_utf8_lossy(&r.stderr));
}

#[test]
fn presets_list_validate_and_override() {
    let list = rotorqc(&["presets"], &[]);
    ok(&list);
    let text = String::from_utf8(list.stdout).unwrap();
    for name in ["ns2-rabi", "cz-cnot", "sm-thermal", "readout-99.94", "decoherence-gaussian"] {
        assert!(text.contains(name), "{name} missing from\n{text}");
        ok(&rotorqc(&["validate", name], &[]));
    }
    let tmp = tempfile::tempdir().unwrap();
    let custom = RABI.replace("small-rabi", "ns2-rabi");
    write(tmp.path(), "ns2-rabi.json", &custom);
    write(tmp.path(), "extra.json", &RABI.replace("small-rabi", "extra"));
    let shown = rotorqc(&["presets", "--show", "ns2-rabi"], &[("ROTORQC_PRESET_DIR", tmp.path())]);
    ok(&shown);
    assert_eq!(String::from_utf8(shown.stdout).unwrap(), custom);
    let listed = rotorqc(&["presets"], &[("ROTORQC_PRESET_DIR", tmp.path())]);
    assert!(String::from_utf8(listed.stdout).unwrap().contains("extra"));
    let exported = tmp.path().join("export");
    ok(&rotorqc(&["presets", "--export", exported.to_str().unwrap()], &[]));
    assert!(exported.join("sm-thermal.json").is_file());
}

#[test]
fn sweeps_resume_from_markers() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "s.json",
        r#"{"name": "reps", "seed": 5, "scenario": {"kind": "sweep",
            "base": {"kind": "readout", "trials": 2000, "example_shots": 0,
                     "detection": {"bright_mean": 6.0, "dark_mean": 0.5, "threshold": 2}},
            "axes": [{"parameter": "repetitions", "values": [1, 3, 5]}]}}"#,
    );
    let out = tmp.path().join("o");
    let o = out.to_str().unwrap();
    ok(&rotorqc(&["sweep", &cfg, "--out", o], &[]));
    let first = payload(&out.join("reps.json"));
    let markers = out.join("reps.points");
    assert_eq!(std::fs::read_dir(&markers).unwrap().count(), 3);
    std::fs::remove_file(markers.join("p0001.json")).unwrap();
    let again = rotorqc(&["sweep", &cfg, "--out", o], &[]);
    ok(&again);
    assert!(String::from_utf8_lossy(&again.stderr).contains("resumed 2 of 3"));
    assert_eq!(payload(&out.join("reps.json")), first);

    let table = &first["series"][0];
    assert_eq!(table["columns"][0], "repetitions");
    let fid = table["columns"].as_array().unwrap().iter().position(|c| c == "fidelity").unwrap();
    let f: Vec<f64> = table["rows"].as_array().unwrap().iter().map(|r| r[fid].as_f64().unwrap()).collect();
    assert!(f[0] < f[1] && f[1] < f[2], "{f:?}");

    // a non-sweep config is rejected by the sweep subcommand
    let plain = write(tmp.path(), "r.json", READOUT);
    assert_eq!(rotorqc(&["sweep", &plain, "--out", o], &[]).status.code(), Some(2));
}
