use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn aggvision(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aggvision"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_stdout(o: &Output) -> serde_json::Value {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

const CUBE_OBJ: &str = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1\n\
f 1 3 2\nf 1 4 3\nf 5 6 7\nf 5 7 8\nf 1 2 6\nf 1 6 5\nf 2 3 7\nf 2 7 6\nf 3 4 8\nf 3 8 7\nf 4 1 5\nf 4 5 8\n";

/// Every file under `dir`, keyed by relative path.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn morph3d_of_a_cube() {
    let dir = tempfile::tempdir().unwrap();
    let cube = dir.path().join("cube.obj");
    fs::write(&cube, CUBE_OBJ).unwrap();
    let v = json_stdout(&aggvision(&["morph3d", cube.to_str().unwrap()]));
    let (a, b, c) = (v["a"].as_f64().unwrap(), v["b"].as_f64().unwrap(), v["c"].as_f64().unwrap());
    assert!((a - 1.0).abs() < 1e-6 && (b - 1.0).abs() < 1e-6 && (c - 1.0).abs() < 1e-6);
    assert!((v["fer3d"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert!((v["sphericity"].as_f64().unwrap() - 0.806).abs() < 0.001);

    let stats = json_stdout(&aggvision(&["mesh-stats", cube.to_str().unwrap()]));
    assert_eq!(stats["watertight"], true);
    assert!((stats["volume"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn exit_codes() {
    assert_eq!(aggvision(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(aggvision(&["morph3d"]).status.code(), Some(2));
    assert_eq!(aggvision(&["morph3d", "/nonexistent/rock.obj"]).status.code(), Some(1));
    assert_eq!(aggvision(&["gen-stockpile"]).status.code(), Some(2), "missing --out");
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"n_g": 3, "colour": "red"}"#).unwrap();
    let out = dir.path().join("o");
    let o = aggvision(&["gen-stockpile", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
    assert_eq!(aggvision(&["--help"]).status.code(), Some(0));
}

#[test]
fn gen_stockpile_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(
        &cfg,
        r#"{"preset": "rr3", "n_g": 3, "l_min": 2, "l_max": 3, "d": 0.08, "library_size": 4, "rock_subdivision": 2}"#,
    )
    .unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = aggvision(&["gen-stockpile", "--config", cfg.to_str().unwrap(), "--seed", "7", "--out", out.to_str().unwrap()]);
        let summary = json_stdout(&o);
        (snapshot(&out), summary)
    };
    let (a, summary) = run("a");
    let (b, _) = run("b");
    assert_eq!(a.keys().collect::<Vec<_>>(), ["cloud.csv", "cloud.ply", "manifest.json", "run.json"]);
    assert!(a == b, "runs differ");
    assert!(summary["points"].as_u64().unwrap() > 0);
    let run_cfg: serde_json::Value = serde_json::from_slice(&a["run.json"]).unwrap();
    assert_eq!(run_cfg["seed"], 7);
    assert_eq!(run_cfg["params"]["seed"], 7);
    assert_eq!(run_cfg["params"]["n_g"], 3);
}

#[test]
fn gen_pairs_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("p.json");
    fs::write(
        &cfg,
        r#"{"orientations": 2, "subset_sizes": [3, 9], "partial_n": 128, "complete_n": 512, "arc_spacing": 0.01, "ring_spacing": 0.01}"#,
    )
    .unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = aggvision(&["gen-pairs", "--synthetic", "2", "--config", cfg.to_str().unwrap(), "--seed", "3", "--out", out.to_str().unwrap()]);
        let v = json_stdout(&o);
        assert_eq!(v["pairs"], 8);
        snapshot(&out)
    };
    let a = run("a");
    assert!(a.contains_key("model_0001/orient_01/vis_9/partial.ply"));
    assert!(a == run("b"));
    assert_eq!(aggvision(&["gen-pairs", "--out", dir.path().join("c").to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn cluster_then_score_and_chamfer() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"n_g": 2, "l_min": 1, "l_max": 1, "d": 0.05, "library_size": 3, "rock_subdivision": 2}"#).unwrap();
    let scene = dir.path().join("scene");
    json_stdout(&aggvision(&["gen-stockpile", "--config", cfg.to_str().unwrap(), "--out", scene.to_str().unwrap()]));
    let cloud = scene.join("cloud.ply");

    let truth = aggvision(&["eval-seg", "--truth", cloud.to_str().unwrap(), "--pred", cloud.to_str().unwrap()]);
    let v = json_stdout(&truth);
    assert_eq!((v["completeness"].as_f64(), v["iou_ap"].as_f64()), (Some(100.0), Some(100.0)));

    let clusters = dir.path().join("clusters");
    let v = json_stdout(&aggvision(&["cluster", cloud.to_str().unwrap(), "--radius", "0.03", "--out", clusters.to_str().unwrap()]));
    assert!(v["instances"].as_u64().unwrap() >= 1);
    let pred = clusters.join("clusters.ply");
    let v = json_stdout(&aggvision(&["eval-seg", "--truth", cloud.to_str().unwrap(), "--pred", pred.to_str().unwrap()]));
    assert!((0.0..=100.0).contains(&v["completeness"].as_f64().unwrap()));

    let v = json_stdout(&aggvision(&["eval-cd", cloud.to_str().unwrap(), pred.to_str().unwrap()]));
    assert_eq!(v["chamfer_l1"].as_f64(), Some(0.0));

    let sp_out = dir.path().join("sp");
    let v = json_stdout(&aggvision(&["sp", cloud.to_str().unwrap(), "--threshold", "50", "--out", sp_out.to_str().unwrap()]));
    assert!(v["instances"].as_u64().unwrap() >= 1);
    assert!(sp_out.join("sp.csv").exists());
}

#[test]
fn triview_from_a_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let cube = dir.path().join("cube.obj");
    fs::write(&cube, CUBE_OBJ).unwrap();
    let o = aggvision(&["triview", "--mesh", cube.to_str().unwrap(), "--cell", "0.01", "--ball-diameter", "0.2"]);
    let v = json_stdout(&o);
    let raw = v["report"]["raw_volume"].as_f64().unwrap();
    assert!((1.0..1.1).contains(&raw), "{raw}");
}
