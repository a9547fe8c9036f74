use std::process::Command;

fn helmcond(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_helmcond"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn norms_circle_csv() {
    let (code, out, _) = helmcond(&["norms", "--shape", "circle", "--k", "5,10"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("shape,k,eta_strategy,eta,n,norm_s"));
    let cells: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(cells[0], "circle");
    assert_eq!(cells[4], "50");
    let s: f64 = cells[5].parse().unwrap();
    assert!((s / 0.5240 - 1.0).abs() < 0.02);
}

#[test]
fn norms_param_override_and_md() {
    let (code, out, _) = helmcond(&[
        "norms",
        "--shape",
        "circle",
        "--param",
        "r=2",
        "--k",
        "2.5",
        "--quantities",
        "s",
        "--format",
        "md",
    ]);
    assert_eq!(code, 0);
    assert!(out.starts_with("| shape | k |"));
    assert_eq!(out.lines().count(), 3);
}

#[test]
fn norms_json_to_file_is_deterministic() {
    let dir = std::env::temp_dir().join(format!("helmcond-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let a = dir.join("a.json");
    let mut runs = Vec::new();
    for p in [&a, &a] {
        let (code, out, _) = helmcond(&[
            "norms",
            "--shape",
            "crack",
            "--k",
            "5,10",
            "--format",
            "json",
            "--out",
            p.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        assert!(out.is_empty());
        runs.push(std::fs::read(p).unwrap());
    }
    let ta = runs[0].clone();
    assert_eq!(ta, runs[1]);
    let v: serde_json::Value = serde_json::from_slice(&ta).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn hard_failures_exit_one() {
    assert_eq!(helmcond(&["norms", "--shape", "blob"]).0, 1);
    assert_eq!(
        helmcond(&["norms", "--shape", "circle", "--k", "10,5"]).0,
        1
    );
    assert_eq!(
        helmcond(&["norms", "--shape", "circle", "--param", "side=3"]).0,
        1
    );
    assert_eq!(
        helmcond(&["norms", "--shape", "circle", "--format", "xml"]).0,
        1
    );
    assert_eq!(helmcond(&["lowk", "--shape", "crack"]).0, 1);
    assert_eq!(helmcond(&["modes", "--a1", "0.5", "--a2", "1"]).0, 1);
    assert_eq!(helmcond(&["frobnicate"]).0, 1);
    let (code, out, _) = helmcond(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("norms"));
}

#[test]
fn modes_and_convergence() {
    let (code, out, _) = helmcond(&["modes", "--m", "1"]);
    assert_eq!(code, 0);
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    let k: f64 = row[2].parse().unwrap();
    assert!((k - 9.977).abs() < 0.01);
    assert_eq!(row[4], "1");

    let (code, out, _) = helmcond(&["convergence", "--shape", "circle"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 3);
}

#[test]
fn lowk_small_mesh() {
    let (code, out, _) = helmcond(&[
        "lowk",
        "--shape",
        "square",
        "--k",
        "1e-2,1e-3",
        "--min-per-arc",
        "10",
    ]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert!(lines[0].starts_with("k,n,eta_k"));
    // sorted ascending
    assert!(lines[1].starts_with("0.001,40,"));
}
