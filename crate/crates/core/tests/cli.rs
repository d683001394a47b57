use std::path::Path;
use std::process::Command;

const CONFIG: &str = r#"
protocols = ["es", "conventional"]
seeds = [4, 5]

[system]
ues = 1
elements = 2
max_iterations = 4

[sweep]
axis = "ap_power"
values = ["0.5 W", "30 dBm"]

[solver]
tau0_step = "200 ms"
"#;

fn starmec(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_starmec")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn run_writes_csv_and_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.toml", CONFIG);
    let out = dir.path().join("out/a.csv");
    let o = starmec(&["run", &cfg, "--out", out.to_str().unwrap(), "--jobs", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    // Header, then per value and protocol two seeds plus a summary.
    assert_eq!(lines.len(), 1 + 2 * 2 * 3);
    assert!(lines[0].starts_with("kind,protocol,axis,value,seed,"));
    assert!(lines[1].starts_with("run,es,ap_power,0.5,4,"));
    assert!(lines[3].starts_with("summary,es,ap_power,0.5,,"));
    let plot = std::fs::read_to_string(dir.path().join("out/a.plot.csv")).unwrap();
    let rows: Vec<&str> = plot.lines().collect();
    assert_eq!(rows[0], "ap_power,es_mean,es_std,conventional_mean,conventional_std");
    assert_eq!(rows.len(), 3);
    assert!(rows[2].starts_with("1.0,"), "{}", rows[2]);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.toml", CONFIG);
    let a = starmec(&["run", &cfg, "--out", "-", "--jobs", "1"]);
    let b = starmec(&["run", &cfg, "--out", "-", "--jobs", "3"]);
    assert!(a.status.success());
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn seed_offset_shifts_every_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.toml", CONFIG);
    let o = starmec(&["run", &cfg, "--out", "-", "--seed-offset", "10"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("run,es,ap_power,0.5,14,"));
}

#[test]
fn oracle_and_curve_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.toml", &CONFIG.replace(r#"["es", "conventional"]"#, r#"["ts"]"#));
    let o = starmec(&["oracle", &cfg, "--out", "-"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let first = text.lines().nth(1).unwrap();
    assert!(first.starts_with("oracle,ts,"));
    let gap: f64 = first.rsplit(',').next().unwrap().parse().unwrap();
    assert!(gap > -0.02, "{first}");

    let o = starmec(&["curve", &cfg, "--out", "-"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    // Two values, four charging times, two seeds plus a summary each.
    assert_eq!(text.lines().count(), 1 + 2 * 4 * 3);
}

#[test]
fn invalid_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    for (text, field) in [
        (CONFIG.replace("\"0.5 W\"", "\"0.5 MHz\""), "sweep.values[0]"),
        (CONFIG.replace("elements = 2", "elements = 3"), "protocols"),
        (CONFIG.replace("seeds = [4, 5]", "seeds = []"), "seeds"),
    ] {
        let cfg = write(dir.path(), "bad.toml", &text);
        let o = starmec(&["run", &cfg]);
        assert!(!o.status.success());
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(field), "{field}: {err}");
    }
    let o = starmec(&["run", dir.path().join("missing.toml").to_str().unwrap()]);
    assert!(!o.status.success());
}
