use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use serde_json::Value;

const TINY: &str = r#"{"arch":{"mlp_widths":[9,32,32,2],"value":{"input_width":8,"block_widths":[16,16]}},"sac":{"batch_size":32,"value_batch_size":8}}"#;

fn blockmind(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blockmind"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = blockmind(args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect()
}

/// A small network trained once on the default corpus and shared by the
/// deployment tests.
fn trained() -> &'static (tempfile::TempDir, PathBuf) {
    static RUN: OnceLock<(tempfile::TempDir, PathBuf)> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let (data, run) = (dir.path().join("data"), dir.path().join("run"));
        ok(&["generate", "--out", s(&data)]);
        ok(&[
            "train", "--data", s(&data), "--out", s(&run), "--episodes", "300", "--config", TINY,
        ]);
        let ckpt = run.join("checkpoints/checkpoint-300.ckpt");
        assert!(ckpt.is_file());
        (dir, ckpt)
    })
}

fn write_shape(dir: &Path, id: &str, vertices: &[(f64, f64)]) -> PathBuf {
    let path = dir.join(format!("{id}.json"));
    let v: Vec<[f64; 2]> = vertices.iter().map(|&(x, y)| [x, y]).collect();
    fs::write(&path, serde_json::json!({"id": id, "vertices": v}).to_string()).unwrap();
    path
}

#[test]
fn generate_default_corpus_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let stdout = ok(&["generate", "--seed", "7", "--out", s(&a)]);
    assert!(stdout.contains("manifest.json"));
    ok(&["generate", "--seed", "7", "--out", s(&b)]);
    let fa = files(&a);
    assert_eq!(fa.len(), 49 + 1);
    assert_eq!(fa, files(&b));
}

#[test]
fn generate_custom_split_sizes() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["generate", "--train", "2", "--test", "1", "--out", s(dir.path())]);
    let manifest: Value = serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["train"].as_array().unwrap().len(), 2);
    assert_eq!(manifest["test"].as_array().unwrap().len(), 1);
    assert_eq!(files(dir.path()).len(), 4);
}

#[test]
fn zero_episodes_writes_initial_checkpoint_only() {
    let dir = tempfile::tempdir().unwrap();
    let (data, run) = (dir.path().join("data"), dir.path().join("run"));
    ok(&["generate", "--train", "2", "--test", "1", "--out", s(&data)]);
    ok(&["train", "--data", s(&data), "--out", s(&run), "--episodes", "0", "--config", TINY]);
    let ckpts: Vec<String> = files(&run.join("checkpoints")).into_keys().filter(|n| n.ends_with(".ckpt")).collect();
    assert_eq!(ckpts, ["checkpoint-0.ckpt"]);
    let eval = fs::read_to_string(run.join("logs/eval.csv")).unwrap();
    assert_eq!(eval.lines().count(), 1);
    assert_eq!(fs::read_to_string(run.join("logs/train.csv")).unwrap().lines().count(), 1);
    let stored: Value = serde_json::from_slice(&fs::read(run.join("config.json")).unwrap()).unwrap();
    assert_eq!(stored["arch"]["mlp_widths"], serde_json::json!([9, 32, 32, 2]));

    // An empty run still yields a valid report.
    ok(&["report", "--run", s(&run)]);
    let csv = fs::read_to_string(run.join("report/report.csv")).unwrap();
    assert_eq!(csv, "series,episode,reward,moving_average\n");
    assert!(fs::read_to_string(run.join("report/report.svg")).unwrap().ends_with("</svg>\n"));
}

#[test]
fn training_is_deterministic_and_resumable() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["generate", "--train", "3", "--test", "2", "--out", s(&data)]);
    let run = |name: &str, episodes: &str, resume: bool| {
        let out = dir.path().join(name);
        let mut args = vec![
            "train", "--data", s(&data), "--out", s(&out), "--episodes", episodes, "--eval-every", "2", "--config", TINY,
        ];
        if resume {
            args.push("--resume");
        }
        ok(&args);
        fs::read(out.join("logs/eval.csv")).unwrap()
    };
    let a = run("a", "6", false);
    let b = run("b", "6", false);
    assert_eq!(a, b);
    assert_eq!(String::from_utf8_lossy(&a).lines().count(), 1 + 3);

    run("c", "3", false);
    let c = run("c", "6", true);
    assert_eq!(a, c);

    let again = blockmind(&["train", "--data", s(&data), "--out", s(&dir.path().join("a")), "--episodes", "1"]);
    assert!(!again.status.success());
}

#[test]
fn decompose_quad_is_identity() {
    let (_, ckpt) = trained();
    let dir = tempfile::tempdir().unwrap();
    let shape = write_shape(dir.path(), "quad", &[(0., 0.), (3., 0.), (3., 1.), (0., 1.)]);
    ok(&["decompose", "--checkpoint", s(ckpt), "--shape", s(&shape), "--out", s(dir.path())]);
    let rec: Value = serde_json::from_slice(&fs::read(dir.path().join("quad.decomposition.json")).unwrap()).unwrap();
    assert_eq!(rec["status"], "Complete");
    assert_eq!(rec["cuts"].as_array().unwrap().len(), 0);
    assert_eq!(rec["blocks"].as_array().unwrap().len(), 1);
}

/// Edge use counts straight from a VTK file, independent of the library.
fn vtk_audit(text: &str) -> (Vec<(f64, f64)>, Vec<[usize; 4]>) {
    let mut lines = text.lines();
    let mut points = Vec::new();
    let mut cells = Vec::new();
    while let Some(line) = lines.next() {
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.first() {
            Some(&"POINTS") => {
                for _ in 0..parts[1].parse::<usize>().unwrap() {
                    let v: Vec<f64> = lines.next().unwrap().split_whitespace().map(|t| t.parse().unwrap()).collect();
                    points.push((v[0], v[1]));
                }
            }
            Some(&"CELLS") => {
                for _ in 0..parts[1].parse::<usize>().unwrap() {
                    let v: Vec<usize> = lines.next().unwrap().split_whitespace().map(|t| t.parse().unwrap()).collect();
                    assert_eq!(v[0], 4);
                    cells.push([v[1], v[2], v[3], v[4]]);
                }
            }
            Some(&"CELL_TYPES") => {
                assert!(lines.all(|l| l.trim() == "9"));
                break;
            }
            _ => {}
        }
    }
    (points, cells)
}

#[test]
fn decompose_l_shape_and_mesh() {
    let (_, ckpt) = trained();
    let dir = tempfile::tempdir().unwrap();
    let shape = write_shape(dir.path(), "L", &[(0., 0.), (2., 0.), (2., 1.), (1., 1.), (1., 2.), (0., 2.)]);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&["decompose", "--checkpoint", s(ckpt), "--shape", s(&shape), "--out", s(out), "--mesh", "0.25"]);
    }
    assert_eq!(files(&a), files(&b));

    let rec: Value = serde_json::from_slice(&fs::read(a.join("L.decomposition.json")).unwrap()).unwrap();
    assert_eq!(rec["status"], "Complete");
    let svg = fs::read_to_string(a.join("L.decomposition.svg")).unwrap();
    assert_eq!(svg.matches("<polygon").count(), 2);
    assert_eq!(svg.matches("<line").count(), 1);

    let (points, cells) = vtk_audit(&fs::read_to_string(a.join("L.mesh.vtk")).unwrap());
    let mut uses: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut area = 0.0;
    for c in &cells {
        for k in 0..4 {
            let (i, j) = (c[k], c[(k + 1) % 4]);
            *uses.entry((i.min(j), i.max(j))).or_default() += 1;
            let (p, q, r) = (points[c[(k + 3) % 4]], points[i], points[j]);
            assert!((q.0 - p.0) * (r.1 - q.1) - (q.1 - p.1) * (r.0 - q.0) > 0.0);
            area += 0.5 * (q.0 * r.1 - r.0 * q.1);
        }
    }
    assert!((area - 3.0).abs() < 1e-9 * 3.0);
    let on_boundary = |(x, y): (f64, f64)| {
        x == 0.0 || y == 0.0 || (x == 2.0 && y <= 1.0) || (y == 1.0 && x >= 1.0) || (x == 1.0 && y >= 1.0) || (y == 2.0 && x <= 1.0)
    };
    for (&(i, j), &n) in &uses {
        let mid = ((points[i].0 + points[j].0) / 2.0, (points[i].1 + points[j].1) / 2.0);
        match n {
            2 => {}
            1 => assert!(on_boundary(mid), "dangling edge at {mid:?}"),
            _ => panic!("edge used {n} times"),
        }
    }
}

#[test]
fn failures_emit_an_error_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = blockmind(&["decompose", "--checkpoint", s(&dir.path().join("none.ckpt")), "--shape", "x.json"]);
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    let line: Value = serde_json::from_str(stderr.lines().last().unwrap()).unwrap();
    assert_eq!(line["error"], "io");

    let (_, ckpt) = trained();
    let mut bytes = fs::read(ckpt).unwrap();
    let key = b"\"format_version\":1";
    let pos = bytes.windows(key.len()).position(|w| w == key).unwrap();
    bytes[pos + key.len() - 1] = b'7';
    let bad = dir.path().join("old.ckpt");
    fs::write(&bad, bytes).unwrap();
    let out = blockmind(&["decompose", "--checkpoint", s(&bad), "--shape", "x.json"]);
    assert!(!out.status.success());
    let line: Value = serde_json::from_str(String::from_utf8(out.stderr).unwrap().lines().last().unwrap()).unwrap();
    assert_eq!(line["error"], "checkpoint_version_mismatch");

    let out = blockmind(&["train", "--config", "{\"sac\":{\"gama\":0.5}}", "--out", s(&dir.path().join("r"))]);
    let line: Value = serde_json::from_str(String::from_utf8(out.stderr).unwrap().lines().last().unwrap()).unwrap();
    assert_eq!(line["error"], "config");
}
