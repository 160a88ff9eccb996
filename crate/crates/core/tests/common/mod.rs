use std::path::{Path, PathBuf};

pub fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(rel)
}

/// Scenario whose engine map overflows the drive torque once the throttle
/// opens at 1 s, so the run diverges part way through.
pub fn divergent_scenario(dir: &Path) -> PathBuf {
    let params = std::fs::read_to_string(data("nominal_lcv.params"))
        .unwrap()
        .replace("engine_map = nominal_engine.csv", "engine_map = huge.csv");
    std::fs::write(dir.join("huge.params"), params).unwrap();
    std::fs::write(dir.join("huge.csv"), "rpm,0,1\n0,0,1e308\n10000,0,1e308\n").unwrap();
    let scenario = dir.join("diverge.ini");
    std::fs::write(
        &scenario,
        "[scenario]\nkind = open-loop-replay\nduration = 3\n[ego]\nparams = huge.params\nspeed = 10\n\
         [replay]\nthrottle = 0:0, 1:0, 1.01:1\n",
    )
    .unwrap();
    scenario
}
