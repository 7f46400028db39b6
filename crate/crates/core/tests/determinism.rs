//! Two identical runs must produce byte-identical reports.

use std::fs;
use std::path::PathBuf;

use splash2d::commands::cmd_simulate;
use splash2d::config::RunConfig;

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("splash2d-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    dir
}

#[test]
fn simulate_reports_are_reproducible() {
    let toml_text = r#"
[geometry]
kind = "sector"
center = [0.0, 0.0]
r0 = 0.6
r1 = 1.4
theta0 = -0.9
theta1 = 0.9
n1 = 12
n2 = 18

[[initial.sides]]
width_in = 0.05
width_out = 0.85

[initial.sides.frame]
kind = "circle"
center = [0.0, 0.0]
radius = 1.96
theta0 = 0.0
outward = true

[[initial.sides.bumps]]
center = 0.0
width = 1.4
amp = 0.1

[window]
horizon = 0.06
k_levels = 6
windows = 2
"#;
    let cfg: RunConfig = toml::from_str(toml_text).unwrap();
    let a = scratch("det-a");
    let b = scratch("det-b");
    cmd_simulate(&cfg, &a).unwrap();
    cmd_simulate(&cfg, &b).unwrap();
    for name in ["gaps.csv", "windows.csv", "summary.json", "config_used.toml"] {
        let ba = fs::read(a.join(name)).unwrap();
        let bb = fs::read(b.join(name)).unwrap();
        assert_eq!(ba, bb, "{name} differs between identical runs");
        assert!(!ba.is_empty(), "{name} is empty");
    }
    let _ = fs::remove_dir_all(&a);
    let _ = fs::remove_dir_all(&b);
}
