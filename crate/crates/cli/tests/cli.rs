use std::path::Path;
use std::process::{Command, Output};

fn chainwave(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chainwave")).args(args).arg("--out").arg(out).output().unwrap()
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = chainwave(&["transmit", "--no-such-flag"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = chainwave(&["dispersion", "--k-points", "many"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_configuration_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "n_atoms = 10\nlattice_const = -0.1\ndelta_shift = 1.0\nmixing_angle = 0.0\ncontrol_wavevector = 0.5\n")
        .unwrap();
    let out = chainwave(&["dispersion", "--config", cfg.to_str().unwrap()], &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(3));
    std::fs::write(&cfg, "n_atoms = 10\nunknown = 1\n").unwrap();
    let out = chainwave(&["dispersion", "--config", cfg.to_str().unwrap()], &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(3));
    let out = chainwave(&["evolve", "--n-atoms", "1"], &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn missing_files_exit_four() {
    let dir = tempfile::tempdir().unwrap();
    let out = chainwave(&["replay", "--manifest", "/nonexistent/manifest.json"], dir.path());
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn dispersion_self_test_passes_for_both_angles() {
    let dir = tempfile::tempdir().unwrap();
    for theta in ["0", "0.7853981633974483"] {
        let out = chainwave(&["dispersion", "--self-test", "--mixing-angle", theta], dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let bands = std::fs::read_to_string(dir.path().join("bands.csv")).unwrap();
    assert!(bands.starts_with("k,re_upper,im_upper,re_lower,im_lower,pol_weight_upper"));
    assert_eq!(bands.lines().count(), 1025);
}

#[test]
fn manifest_lists_outputs_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = chainwave(&["transmit", "--n-atoms", "12", "--n-points", "30", "--format", "json"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "transmit");
    assert_eq!(manifest["config"]["chain"]["n_atoms"], 12);
    for f in manifest["outputs"].as_array().unwrap() {
        assert!(dir.path().join(f.as_str().unwrap()).exists());
    }
    let rows: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("transmit.json")).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 30);
    assert!(rows[0].get("T_forward").is_some());
}

#[test]
fn verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = chainwave(&["verify"], dir.path());
    assert!(out.status.success());
    assert!(!String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}
