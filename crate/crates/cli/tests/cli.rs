use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn trisplat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trisplat")).args(args).output().expect("spawn trisplat")
}

fn ok(args: &[&str]) -> String {
    let out = trisplat(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn error_line(out: &Output) -> String {
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr.clone()).unwrap();
    let lines: Vec<&str> = err.lines().collect();
    assert_eq!(lines.len(), 1, "expected one error line, got {err:?}");
    lines[0].to_string()
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.insert(p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap());
            }
        }
    }
    files
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn pipeline_runs_end_to_end_without_touching_the_scene() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = tmp.path().join("scene");
    ok(&["gen-synthetic", "--kind", "two-box", "--seed", "3", "--out", s(&scene), "--size", "24", "--views", "6", "--points", "80"]);
    assert!(scene.join("cameras.txt").exists() && scene.join("gt.ply").exists());
    let before = snapshot(&scene);

    let cfg = tmp.path().join("train.cfg");
    fs::write(&cfg, "coarse_iters=6\nfine_iters=6\nprune_interval=3\nsplit_interval=3\nentropy_window=3\n").unwrap();
    let ckpt = tmp.path().join("soup.ckpt");
    ok(&["train", "--scene", s(&scene), "--stage", "both", "--config", s(&cfg), "--out", s(&ckpt)]);
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("soup.ckpt.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["coarse_iters"], 6);
    assert!(manifest["run"].is_object());

    let depth = tmp.path().join("d.pfm");
    let normal = tmp.path().join("n.pfm");
    let rgb = tmp.path().join("c.png");
    ok(&["render", "--scene", s(&scene), "--checkpoint", s(&ckpt), "--camera-id", "0", "--out-depth", s(&depth), "--out-normal", s(&normal), "--out-rgb", s(&rgb)]);
    assert!(fs::read(&depth).unwrap().starts_with(b"Pf\n24 24\n"));
    assert!(fs::read(&normal).unwrap().starts_with(b"PF\n24 24\n"));
    assert!(rgb.exists());

    let dense = tmp.path().join("dense.ckpt");
    ok(&["densify", "--checkpoint", s(&ckpt), "--field-from-appearance", "--out", s(&dense)]);
    let pruned = tmp.path().join("pruned.ckpt");
    ok(&["prune", "--checkpoint", s(&dense), "--scene", s(&scene), "--out", s(&pruned)]);
    let oriented = tmp.path().join("oriented.ckpt");
    ok(&["orient-normals", "--checkpoint", s(&pruned), "--scene", s(&scene), "--out", s(&oriented)]);

    let ply = tmp.path().join("planes.ply");
    let listing = ok(&["extract-planes", "--checkpoint", s(&oriented), "--lod", "0", "--out", s(&ply)]);
    assert!(listing.starts_with("lod 0\n"));
    assert_eq!(fs::read_to_string(tmp.path().join("planes.ply.txt")).unwrap(), listing);
    assert!(fs::read(&ply).unwrap().starts_with(b"ply\n"));

    let report = tmp.path().join("report.txt");
    let text = ok(&["eval", "--scene", s(&scene), "--checkpoint", s(&oriented), "--report", s(&report), "--samples", "2000"]);
    assert_eq!(fs::read_to_string(&report).unwrap(), text);
    assert!(text.contains("chamfer_soup_cm") && text.contains("lod2 planes"));
    let json: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("report.txt.json")).unwrap()).unwrap();
    assert_eq!(json["lods"].as_array().unwrap().len(), 3);

    assert_eq!(snapshot(&scene), before);
}

#[test]
fn training_twice_gives_identical_checkpoints() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = tmp.path().join("scene");
    ok(&["gen-synthetic", "--kind", "textured-plane", "--seed", "1", "--out", s(&scene), "--size", "16", "--views", "4", "--points", "40"]);
    let cfg = tmp.path().join("c.cfg");
    fs::write(&cfg, "coarse_iters=4\nfine_iters=0\n").unwrap();
    let (a, b) = (tmp.path().join("a.ckpt"), tmp.path().join("b.ckpt"));
    for out in [&a, &b] {
        ok(&["--threads", "1", "train", "--scene", s(&scene), "--stage", "coarse", "--config", s(&cfg), "--out", s(out)]);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn failures_are_one_classified_line() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nowhere");
    let out = trisplat(&["eval", "--scene", s(&missing), "--checkpoint", "x", "--report", "y"]);
    assert!(error_line(&out).starts_with("ERROR MissingFile: "));

    let bad = tmp.path().join("bad.ckpt");
    fs::write(&bad, b"not a checkpoint").unwrap();
    let out = trisplat(&["densify", "--checkpoint", s(&bad), "--out", s(&tmp.path().join("o.ckpt"))]);
    let line = error_line(&out);
    assert!(line.starts_with("ERROR ") && line.contains(": "), "{line}");
    assert!(!tmp.path().join("o.ckpt").exists());

    let out = trisplat(&["gen-synthetic", "--kind", "teapot", "--out", s(&tmp.path().join("t"))]);
    assert!(error_line(&out).starts_with("ERROR "));

    let cfg = tmp.path().join("c.cfg");
    fs::write(&cfg, "no_such_key=1\n").unwrap();
    let scene = tmp.path().join("scene");
    ok(&["gen-synthetic", "--kind", "two-box", "--out", s(&scene), "--size", "8", "--views", "2", "--points", "10"]);
    let out = trisplat(&["train", "--scene", s(&scene), "--config", s(&cfg), "--out", s(&tmp.path().join("o.ckpt"))]);
    assert!(error_line(&out).starts_with("ERROR "));

    let out = trisplat(&["extract-planes", "--checkpoint", "x", "--lod", "3", "--out", "y"]);
    assert!(error_line(&out).starts_with("ERROR Usage: "));
    assert_eq!(out.status.code(), Some(2));

    let out = trisplat(&["render", "--scene", s(&scene), "--checkpoint", s(&bad), "--camera-id", "0"]);
    assert!(error_line(&out).starts_with("ERROR "));
}
