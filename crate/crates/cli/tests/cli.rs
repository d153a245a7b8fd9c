use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use froxpvs::froxel::FroxelGrid;
use froxpvs::scenegen::Manifest;

fn froxpvs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_froxpvs"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = froxpvs(&["eval", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(froxpvs(&[]).status.code(), Some(1));
    assert_eq!(froxpvs(&["--help"]).status.code(), Some(0));
}

#[test]
fn empty_dataset_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ds");
    let o = froxpvs(&["gen-dataset", "--frames", "0", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = Manifest::load(out.join("manifest.txt")).unwrap();
    assert!(m.entries.is_empty());
    assert!(m.header.iter().any(|(k, v)| k == "dims" && v == "32x32x32"));
}

#[test]
fn exit_codes_separate_io_from_validation() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.fpvs");
    let csv = dir.path().join("m.csv");
    let o = froxpvs(&["eval", "--pred", p(&missing), "--gt", p(&missing), "--out", p(&csv)]);
    assert_eq!(o.status.code(), Some(2));
    let o = froxpvs(&["bench", "--alpha", "1.5"]);
    assert_eq!(o.status.code(), Some(3));
    let o = froxpvs(&["bench", "--d", "3"]);
    assert_eq!(o.status.code(), Some(3));
    let o = froxpvs(&["bench", "--set", "nonsense=1"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# desk overrides\ndims=8\nviewpoints = 4\nalpha=5\n").unwrap();
    let out = dir.path().join("ds");
    let o = froxpvs(&["gen-dataset", "--config", p(&cfg), "--frames", "1", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(3), "alpha from the file is validated");
    let o = froxpvs(&[
        "gen-dataset",
        "--config",
        p(&cfg),
        "--alpha",
        "0.3",
        "--dims",
        "16",
        "--frames",
        "2",
        "--out",
        p(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = Manifest::load(out.join("manifest.txt")).unwrap();
    let header = |k: &str| m.header.iter().find(|h| h.0 == k).unwrap().1.clone();
    assert_eq!(header("dims"), "16x16x16");
    assert_eq!(header("viewpoints"), "4");
    assert_eq!(m.entries.len(), 2);
}

const ROOM: &str = "\
g wall
v -10 -5 -8
v 10 -5 -8
v 10 5 -8
v -10 5 -8
f 1 2 3
f 1 3 4
g box
v -1 -1 -12
v 1 -1 -12
v 1 1 -12
v -1 1 -12
f 5 6 7
f 5 7 8
";

#[test]
fn gt_from_an_obj_scene() {
    let dir = tempfile::tempdir().unwrap();
    let obj = dir.path().join("room.obj");
    fs::write(&obj, ROOM).unwrap();
    let motion = dir.path().join("room.motion");
    fs::write(&motion, "box 1 0 0\n").unwrap();
    let gt = dir.path().join("gt.fpvs");
    let geom = dir.path().join("geom.fpvs");
    let o = froxpvs(&[
        "gt",
        "--scene",
        p(&obj),
        "--motion",
        p(&motion),
        "--center",
        "0,0,0",
        "--yaw",
        "-0",
        "--dims",
        "16",
        "--viewpoints",
        "8",
        "--out",
        p(&gt),
        "--geometry-out",
        p(&geom),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let gt = FroxelGrid::load(&gt).unwrap();
    let geom = FroxelGrid::load(&geom).unwrap();
    assert!(gt.count_ones() > 0);
    assert!(gt.is_subset_of(&geom).unwrap());

    let bad = dir.path().join("bad.obj");
    fs::write(&bad, "v 0 0 0\nf 1 2 3\n").unwrap();
    let o = froxpvs(&["gt", "--scene", p(&bad), "--dims", "16", "--out", p(&dir.path().join("x"))]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn bench_reports_every_stage() {
    let o = froxpvs(&["bench", "--set", "bench_repeats=2"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = String::from_utf8(o.stdout).unwrap();
    let stages: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(stages, ["froxelize", "interleave", "forward", "deinterleave", "total"]);
}
