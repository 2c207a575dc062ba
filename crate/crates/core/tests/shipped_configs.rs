use std::path::PathBuf;

use uavsim_core::Config;

fn config_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn default_file_matches_builtin_defaults() {
    let cfg = Config::load(&config_dir().join("default.toml")).unwrap();
    assert_eq!(cfg, Config::default());
}

#[test]
fn desk_file_loads() {
    let cfg = Config::load(&config_dir().join("desk.toml")).unwrap();
    assert_eq!(cfg.sim.num_uavs, 2);
    assert_eq!(cfg.experiment.train_episodes_dql, 300);
}
