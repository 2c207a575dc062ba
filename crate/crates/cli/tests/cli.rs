use std::path::Path;
use std::process::{Command, Output};

const SMALL: &[&str] = &[
    "--set",
    "sim.num_uavs=2",
    "--set",
    "sim.episode_duration=2",
    "--set",
    "rl.batch_size=32",
];

fn uavsim(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uavsim"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("UAVSIM_SEED")
        .output()
        .expect("binary runs")
}

fn ok(o: &Output) {
    assert!(
        o.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        o.status.code(),
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
}

fn body_rows(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(str::to_string)
        .collect()
}

#[test]
fn train_writes_curve_and_checkpoint_reproducibly() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [&["train", "--policy", "dql", "--episodes", "50", "--seed", "1"], SMALL].concat();
    ok(&uavsim(&args, a.path()));
    ok(&uavsim(&args, b.path()));
    assert_eq!(body_rows(&a.path().join("convergence.csv")).len(), 50);
    for f in ["convergence.csv", "training_log.csv", "checkpoint.txt"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
    let meta = std::fs::read_to_string(a.path().join("convergence.csv")).unwrap();
    assert!(meta.contains("# master_seed 1"));
}

#[test]
fn heuristics_cannot_be_trained() {
    let d = tempfile::tempdir().unwrap();
    let o = uavsim(&["train", "--policy", "rr"], d.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("learning policy"));
}

#[test]
fn unknown_config_key_is_named() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("bad.toml");
    std::fs::write(&cfg, "[sim]\nnum_uavz = 3\n").unwrap();
    let o = uavsim(&["evaluate", "--policy", "rr", "--config", cfg.to_str().unwrap()], d.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("num_uavz"));
}

#[test]
fn evaluate_heuristic_over_ten_seeds() {
    let d = tempfile::tempdir().unwrap();
    ok(&uavsim(&["evaluate", "--policy", "rr", "--seeds", "10", "--set", "sim.episode_duration=3"], d.path()));
    assert_eq!(body_rows(&d.path().join("battery.csv")).len(), 40);
    assert_eq!(body_rows(&d.path().join("violations.csv")).len(), 50);
    assert_eq!(body_rows(&d.path().join("summary.csv")).len(), 1);
}

#[test]
fn learned_policy_needs_a_checkpoint() {
    let d = tempfile::tempdir().unwrap();
    let o = uavsim(&["evaluate", "--policy", "qlearning"], d.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("--checkpoint"));
    assert!(!d.path().join("battery.csv").exists());
    let o = uavsim(&["evaluate", "--checkpoint", "/nonexistent/ck.txt"], d.path());
    assert!(!o.status.success());
}

#[test]
fn checkpoint_evaluation_and_inspection() {
    let d = tempfile::tempdir().unwrap();
    let train = [&["train", "--policy", "qlearning", "--episodes", "5", "--checkpoint-every", "2"], SMALL].concat();
    ok(&uavsim(&train, d.path()));
    assert!(d.path().join("checkpoint_ep2.txt").exists());
    assert!(d.path().join("checkpoint_ep4.txt").exists());
    let ck = d.path().join("checkpoint.txt");
    let e1 = d.path().join("e1");
    let e2 = d.path().join("e2");
    let eval = [&["evaluate", "--checkpoint", ck.to_str().unwrap(), "--seeds", "3", "--event-log"], SMALL].concat();
    ok(&uavsim(&eval, &e1));
    ok(&uavsim(&eval, &e2));
    assert_eq!(
        std::fs::read(e1.join("violations.csv")).unwrap(),
        std::fs::read(e2.join("violations.csv")).unwrap()
    );
    assert!(e1.join("events_qlearning_seed2_ep0.csv").exists());

    let o = uavsim(&["inspect-checkpoint", ck.to_str().unwrap()], d.path());
    ok(&o);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("policy        qlearning"));
    assert!(text.contains("episodes      5"));
}

#[test]
fn layout_and_target_network_flags() {
    let d = tempfile::tempdir().unwrap();
    let args = [
        &["train", "--policy", "dql", "--episodes", "2", "--state-layout", "extended", "--target-network", "on"],
        SMALL,
    ]
    .concat();
    ok(&uavsim(&args, d.path()));
    let o = uavsim(&["inspect-checkpoint", d.path().join("checkpoint.txt").to_str().unwrap()], d.path());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("[9, 32, 32, 3]"), "{text}");
    let meta = std::fs::read_to_string(d.path().join("convergence.csv")).unwrap();
    assert!(meta.contains("state_layout extended target_network on"));
}

#[test]
fn compare_ranks_every_policy() {
    let d = tempfile::tempdir().unwrap();
    let args = [&["compare", "--seeds", "3", "--episodes", "3"], SMALL].concat();
    ok(&uavsim(&args, d.path()));
    let rows = body_rows(&d.path().join("summary.csv"));
    assert_eq!(rows.len(), 5);
    assert!(rows[0].starts_with("1,"));
    assert!(d.path().join("convergence_qlearning.csv").exists());
}

#[test]
fn environment_overrides() {
    let d = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_uavsim"))
        .args(["evaluate", "--seeds", "1"])
        .arg("--out")
        .arg(d.path())
        .env("UAVSIM_POLICY", "qhef")
        .env("UAVSIM_SEED", "77")
        .env("UAVSIM__SIM__NUM_UAVS", "3")
        .env("UAVSIM__SIM__EPISODE_DURATION", "2.5")
        .output()
        .unwrap();
    ok(&o);
    let text = std::fs::read_to_string(d.path().join("battery.csv")).unwrap();
    assert!(text.contains("# master_seed 77"));
    assert_eq!(body_rows(&d.path().join("battery.csv")).len(), 3);
    assert!(body_rows(&d.path().join("battery.csv"))[0].starts_with("qhef,0,0,"));
}
