use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_eh-otafl"))
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(str::to_string).collect()
}

#[test]
fn simulate_writes_one_row_per_round() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(bin().args(["simulate", "--scenario", "eh_ota", "--seed", "4", "--override", "rounds=37"]).arg("--out-dir").arg(dir.path()));
    let lines = rows(&dir.path().join("eh_ota.csv"));
    assert_eq!(lines.len(), 38);
    assert_eq!(lines[0], "t,participants,C_t,loss,accuracy,sig_power,int_power,noise_power,skipped");
    let manifest = fs::read_to_string(dir.path().join("eh_ota.manifest")).unwrap();
    assert!(manifest.contains("seed = 4"));
    assert!(manifest.contains("rounds = 37"));
    assert!(manifest.contains("antennas = 200"));
}

#[test]
fn manifest_reproduces_the_run() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_ok(bin().args(["simulate", "--override", "rounds=25 tau=2 batch=16", "--seed", "9"]).arg("--out-dir").arg(a.path()));
    run_ok(bin().args(["simulate", "--config"]).arg(a.path().join("eh_ota.manifest")).arg("--out-dir").arg(b.path()));
    assert_eq!(fs::read(a.path().join("eh_ota.csv")).unwrap(), fs::read(b.path().join("eh_ota.csv")).unwrap());
}

#[test]
fn sweep_covers_every_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# small sweep\nrounds = 12\ndevices = 8\n").unwrap();
    let out = run_ok(bin().args(["sweep", "--config"]).arg(&cfg).arg("--out-dir").arg(dir.path()));
    assert_eq!(out.lines().count(), 5);
    for name in ["conventional_fl", "ota_full_energy", "eh_error_free", "eh_error_free_unweighted", "eh_ota"] {
        assert_eq!(rows(&dir.path().join(format!("{name}.csv"))).len(), 13);
    }
}

#[test]
fn sweep_can_vary_a_key() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_ok(bin().args(["sweep", "--override", "rounds=5 devices=4", "--vary", "antennas=4,8"]).arg("--out-dir").arg(dir.path()));
    assert_eq!(out.lines().count(), 10);
    assert!(dir.path().join("antennas=8").join("eh_ota.csv").exists());
}

#[test]
fn bound_emits_three_curves() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(bin().args(["bound", "--override", "rounds=50"]).arg("--out-dir").arg(dir.path()));
    let lines = rows(&dir.path().join("bound.csv"));
    assert_eq!(lines[0], "scenario,t,X,Y,bound_dist,bound_loss");
    assert_eq!(lines.len(), 1 + 3 * 51);
    let mut names: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    names.dedup();
    assert_eq!(names, ["conventional", "eh_error_free", "eh_ota"]);
    assert!(dir.path().join("bound_minus.csv").exists());
}

#[test]
fn invalid_input_fails_with_the_field_name() {
    let out = bin().args(["simulate", "--override", "scenario=bogus"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("scenario"));

    let out = bin().args(["simulate", "--override", "colour=red"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));

    let out = bin().args(["simulate", "--scenario", "bogus"]).output().unwrap();
    assert!(!out.status.success());
}
