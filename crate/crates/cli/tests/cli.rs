use std::path::Path;
use std::process::{Command, Output};

fn sparsect(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparsect"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bench.json");
    std::fs::write(&cfg, r#"{"views": [20, 40], "seed": 3, "methods": ["sart"]}"#).unwrap();
    let out = sparsect(&["--config", cfg.to_str().unwrap(), "config", "--views", "30"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let compact: String = text.split_whitespace().collect();
    assert!(compact.contains(r#""views":[30]"#), "{text}");
    assert!(compact.contains(r#""seed":3"#), "{text}");
    assert!(compact.contains(r#""methods":["sart"]"#), "{text}");
}

#[test]
fn errors_carry_category_and_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();

    let out = sparsect(&["reconstruct", "--methods", "fdk,art", "--out-dir", out_dir]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.starts_with("error[parameter]"), "{err}");
    assert!(err.contains("fdk, sart, asdpocs"), "{err}");

    let out = sparsect(&["project", "--out-dir", out_dir]);
    assert_eq!(out.status.code(), Some(7));
    let err = stderr(&out);
    assert!(err.starts_with("error[pipeline]") && err.contains("ground_truth"), "{err}");

    let missing = dir.path().join("nope.json");
    let out = sparsect(&["--config", missing.to_str().unwrap(), "report"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).starts_with("error[format]"));
}

#[test]
fn staged_commands_produce_the_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let common = ["--out-dir", out_dir, "--views", "10", "--methods", "fdk"];
    for stage in ["phantom", "project", "reconstruct", "evaluate", "report"] {
        let mut args = vec![stage];
        args.extend(common);
        let out = sparsect(&args);
        assert!(out.status.success(), "{stage}: {}", stderr(&out));
    }
    for f in ["records.csv", "summary.csv", "summary_long.csv", "scatter.json"] {
        assert!(Path::new(out_dir).join(f).is_file(), "{f} missing");
    }
    let records = std::fs::read_to_string(dir.path().join("records.csv")).unwrap();
    assert!(records.starts_with("scan_id,method,views,structure,category,metric,value\n"));
}

#[test]
fn pitfall_without_ablation_prints_identical_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = sparsect(&[
        "pitfall",
        "--ablate",
        "none",
        "--pitfall-views",
        "24",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let rows: Vec<&str> = text.lines().filter(|l| l.starts_with("intact") || l.starts_with("ablated")).collect();
    assert_eq!(rows.len(), 2, "{text}");
    assert_eq!(rows[0].split_once(',').unwrap().1, rows[1].split_once(',').unwrap().1);
}
