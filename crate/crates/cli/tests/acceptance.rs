//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails. Extra arguments filter criteria by
//! substring.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use froxpvs::evalrt::{pixel_error_rate, tbv_build, tbv_test};
use froxpvs::froxel::{froxel_id_map, froxelize, quantize, FroxelGrid, FroxelizeConfig, GridDims, GridRole};
use froxpvs::geom::{build_viewcell_frustum, Aabb, Basis, Camera, SceneObject, TriScene, Vec3, ViewCell};
use froxpvs::interleave::{deinterleave_threshold, interleave};
use froxpvs::neural::gradcheck::{check_network, random_problem};
use froxpvs::neural::{
    combined_loss, dice_loss, evaluate, rvl_loss, samples_from_pairs, train, ModelConfig, Network, Sample,
    TrainConfig,
};
use froxpvs::oracle::{compute_gt_pvs, gt_from_cameras, ray_cast_pvs, sample_viewpoints, OracleConfig};
use froxpvs::scenegen::{generate_dataset, generate_frame, load_pairs, DatasetConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, start: Instant, detail: String) -> Check {
    let t = start.elapsed();
    ensure(t < limit, format!("{detail}; {:.2?} of {:.0?} allowed", t, limit))
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// --- scenes -----------------------------------------------------------------

type Tris = Vec<[Vec3<f64>; 3]>;

fn to_scene(tris: &[[Vec3<f64>; 3]]) -> TriScene<f64> {
    let verts: Vec<_> = tris.iter().flatten().copied().collect();
    let idx = (0..tris.len() as u32).map(|i| [3 * i, 3 * i + 1, 3 * i + 2]).collect();
    TriScene::from_parts(verts, idx, (0..tris.len() as u32).collect(), vec![]).unwrap()
}

fn quad(z: f64, x: (f64, f64), y: (f64, f64)) -> Tris {
    let p = |a, b| Vec3::new(a, b, z);
    vec![[p(x.0, y.0), p(x.1, y.0), p(x.1, y.1)], [p(x.0, y.0), p(x.1, y.1), p(x.0, y.1)]]
}

fn cuboid(b: &Aabb<f64>) -> Tris {
    let (lo, hi) = (b.min, b.max);
    let v = |i: usize, j: usize, k: usize| {
        Vec3::new([lo.x, hi.x][i], [lo.y, hi.y][j], [lo.z, hi.z][k])
    };
    let faces = [
        [v(0, 0, 1), v(1, 0, 1), v(1, 1, 1), v(0, 1, 1)],
        [v(1, 0, 0), v(0, 0, 0), v(0, 1, 0), v(1, 1, 0)],
        [v(0, 0, 0), v(0, 0, 1), v(0, 1, 1), v(0, 1, 0)],
        [v(1, 0, 1), v(1, 0, 0), v(1, 1, 0), v(1, 1, 1)],
        [v(0, 1, 1), v(1, 1, 1), v(1, 1, 0), v(0, 1, 0)],
        [v(0, 0, 0), v(1, 0, 0), v(1, 0, 1), v(0, 0, 1)],
    ];
    faces.iter().flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]]).collect()
}

fn boxed(c: Vec3<f64>, half: Vec3<f64>) -> Aabb<f64> {
    Aabb::new(c - half, c + half)
}

fn desk_cell() -> ViewCell<f64> {
    ViewCell::new(Vec3::new(0.0, 1.5, 0.0), Basis::from_yaw_deg(0.0), 0.3, 60.0, 15.0, 0.3, 30.0).unwrap()
}

/// A partial occluder in front of a few boxes and a back wall.
fn single_occluder_scene(seed: u64) -> TriScene<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Vec::new();
    let oc = Vec3::new(rng.random_range(-2.0..2.0), rng.random_range(0.5..2.5), rng.random_range(-7.0..-4.0));
    let half = Vec3::new(rng.random_range(1.0..2.5), rng.random_range(0.5..1.5), 0.3);
    t.extend(cuboid(&boxed(oc, half)));
    for _ in 0..4 {
        let c = Vec3::new(rng.random_range(-6.0..6.0), rng.random_range(0.0..3.0), rng.random_range(-16.0..-9.0));
        t.extend(cuboid(&boxed(c, Vec3::splat(rng.random_range(0.4..1.2)))));
    }
    t.extend(quad(-25.0, (-40.0, 40.0), (-40.0, 40.0)));
    to_scene(&t)
}

fn desk_oracle() -> (GridDims, OracleConfig) {
    let dims = GridDims::cube(32);
    (dims, OracleConfig::for_dims(dims))
}

// --- criteria ---------------------------------------------------------------

fn interleave_round_trip() -> Check {
    let start = Instant::now();
    let dims = GridDims::cube(32);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut checked = 0;
    for _ in 0..100 {
        let mut g = FroxelGrid::new(dims, GridRole::Geometry).map_err(err)?;
        let p = rng.random_range(0.0..0.5);
        for i in 0..dims.len() {
            if rng.random_bool(p) {
                g.set_linear(i);
            }
        }
        for d in [2, 4, 8] {
            let t = interleave::<f32>(&g, d).map_err(err)?;
            let back = deinterleave_threshold(&t, d, 0.5, GridRole::Geometry).map_err(err)?;
            if back.bytes() != g.bytes() {
                return Err(format!("grid {checked} differs after d={d}"));
            }
        }
        checked += 1;
    }
    within(Duration::from_secs(1), start, format!("{checked} grids x d in {{2,4,8}} bit-exact"))
}

fn gradient_checks() -> Check {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut runs = 0;
    for seed in 0..5 {
        let (net, x, t, alpha, lambda) = random_problem(seed, 8).map_err(err)?;
        // pure dice and pure RVL on the first two seeds, the sampled mix after
        let lambda = [1.0, 0.0].get(seed as usize).copied().unwrap_or(lambda);
        let r = check_network(&net, &x, &t, alpha, lambda, 1e-4).map_err(err)?;
        worst = worst.max(r.max_error());
        runs += r.blocks.len();
    }
    let detail = format!("5 seeds, {runs} parameter/input blocks, max relative error {worst:.2e}");
    if worst >= 1e-4 {
        return Err(detail);
    }
    within(Duration::from_secs(60), start, detail)
}

fn loss_anchors() -> Check {
    let gt = [1.0f64, 0.0, 1.0, 0.0];
    let same = dice_loss(&gt, &gt, 0.5).map_err(err)?.value;
    let zero = dice_loss(&[0.0; 4], &gt, 0.5).map_err(err)?.value;
    let third = dice_loss(&[1.0, 1.0, 0.0], &[1.0, 0.0, 1.0], 0.5).map_err(err)?.value;
    let mut g = vec![0.0f64; 1000];
    g[..10].iter_mut().for_each(|v| *v = 1.0);
    let rvl = rvl_loss(&vec![1.0; 1000], &g).map_err(err)?.value;
    let mix = combined_loss(&[1.0, 1.0, 0.0], &[1.0, 0.0, 1.0], 0.5, 1.0).map_err(err)?.value;
    ensure(
        same == 0.0 && zero == 1.0 && third == 1.0 / 3.0 && rvl == 99.0 && mix == third,
        format!("dice {same} / {zero} / {third:?}, rvl {rvl}"),
    )
}

fn oracle_soundness() -> Check {
    let cfg = DatasetConfig::default();
    let mut strict_outside = 0;
    let mut visible = 0;
    for k in 0..20 {
        let (scene, cell, pair) = generate_frame(&cfg, k).map_err(err)?;
        if !pair.gt.is_subset_of(&pair.geometry).map_err(err)? {
            return Err(format!("frame {k}: gt not inside the dataset geometry grid"));
        }
        let frustum = build_viewcell_frustum(&cell).map_err(err)?;
        let raw = froxelize(&scene, &frustum, cfg.dims, &cfg.froxel).map_err(err)?;
        strict_outside += pair.gt.count_and_not(&raw).map_err(err)?;
        visible += pair.gt.count_ones();
    }
    Ok(format!(
        "20 scenes at 32^3, M=128: gt inside geometry; {strict_outside} of {visible} gt froxels outside the bare froxelization"
    ))
}

fn oracle_cross_validation() -> Check {
    let start = Instant::now();
    let (dims, ocfg) = desk_oracle();
    let rays = ocfg.resolution.0 / dims.nx;
    let mut worst = 1.0f64;
    for seed in 0..10 {
        let s = single_occluder_scene(seed);
        let gt = compute_gt_pvs(&s, &desk_cell(), dims, &ocfg, &FroxelizeConfig::default()).map_err(err)?;
        let rc = ray_cast_pvs(&s, &desk_cell(), dims, rays, &ocfg).map_err(err)?;
        worst = worst.min(gt.jaccard(&rc).map_err(err)?);
    }
    let detail = format!("10 scenes, min Jaccard {worst:.4}");
    if worst < 0.95 {
        return Err(detail);
    }
    within(Duration::from_secs(300), start, detail)
}

fn occlusion() -> Check {
    let (dims, ocfg) = desk_oracle();
    let cell = desk_cell();
    let mut t = quad(-8.0, (-200.0, 200.0), (-200.0, 200.0));
    t.extend(cuboid(&boxed(Vec3::new(0.0, 1.0, -15.0), Vec3::new(2.0, 1.0, 1.0))));
    t.extend(cuboid(&boxed(Vec3::new(3.0, 0.0, -20.0), Vec3::new(1.0, 3.0, 1.0))));
    let scene = to_scene(&t);
    let f = build_viewcell_frustum(&cell).map_err(err)?;
    let layer = quantize(f.project_to_ndc(Vec3::new(0.0, 1.5, -8.0)).unwrap(), dims)[2];
    let gt = compute_gt_pvs(&scene, &cell, dims, &ocfg, &FroxelizeConfig::default()).map_err(err)?;
    let behind = gt.iter_ones().filter(|&i| dims.coords(i)[2] > layer).count();
    ensure(
        behind == 0 && !gt.is_empty(),
        format!("{behind} of {} gt froxels behind occluder layer {layer}", gt.count_ones()),
    )
}

fn monotonicity() -> Check {
    let (dims, ocfg) = desk_oracle();
    let cell = desk_cell();
    let f = build_viewcell_frustum(&cell).map_err(err)?;
    let cams = sample_viewpoints(&cell, &ocfg);
    for seed in 0..10 {
        let s = single_occluder_scene(100 + seed);
        let mut prev: Option<FroxelGrid> = None;
        for m in [1, 16, 64, 128] {
            let g = gt_from_cameras(&s, &f, &cams[..m], ocfg.resolution, dims).map_err(err)?;
            if let Some(p) = &prev {
                if !p.is_subset_of(&g).map_err(err)? {
                    return Err(format!("scene {seed}: PVS for {m} viewpoints misses froxels of a subset"));
                }
            }
            prev = Some(g);
        }
    }
    Ok("10 scenes, viewpoint prefixes 1 < 16 < 64 < 128 nested".into())
}

fn training_smoke(dir: &Path) -> Check {
    let start = Instant::now();
    let cfg = DatasetConfig::default();
    generate_dataset(&cfg, 200, dir).map_err(err)?;
    let (_, pairs) = load_pairs(dir.join("manifest.txt")).map_err(err)?;
    let samples: Vec<Sample<f32>> = samples_from_pairs(&pairs, 4).map_err(err)?;
    let (train_set, held) = samples.split_at(180);
    let tcfg = TrainConfig {
        epochs: 25,
        ..TrainConfig::default()
    };
    let mut net = Network::<f32>::init(ModelConfig::desk(4), 0).map_err(err)?;
    train(&mut net, train_set, held, &tcfg).map_err(err)?;
    let c = evaluate(&net, held, tcfg.tau).map_err(err)?;
    let detail = format!(
        "25 epochs, 180 train / 20 held-out: FNR {:.4}, FPR {:.4}",
        c.fnr(),
        c.fpr()
    );
    if !(c.fnr() <= 0.05 && c.fpr() <= 0.6) {
        return Err(detail);
    }
    within(Duration::from_secs(1800), start, detail)
}

fn memorization(dir: &Path) -> Check {
    let start = Instant::now();
    let (_, _, pair) = generate_frame(&DatasetConfig::default(), 0).map_err(err)?;
    let sample = Sample::<f32>::from_pair(&pair.geometry, &pair.gt, 4).map_err(err)?;
    let samples = [sample];
    let tcfg = TrainConfig {
        lr: 2e-4,
        alpha: 0.3,
        lambda: 1.0,
        batch: 1,
        epochs: 500,
        max_steps: Some(500),
        ..TrainConfig::default()
    };
    let model = ModelConfig::with_hidden(4, &[96, 96], 3).gated();
    let mut net = Network::<f32>::init(model, 0).map_err(err)?;
    train(&mut net, &samples, &[], &tcfg).map_err(err)?;
    let c = evaluate(&net, &samples, tcfg.tau).map_err(err)?;

    // the same check through `infer` and `eval`
    fs::create_dir_all(dir).map_err(err)?;
    let p = |s: &str| dir.join(s).to_str().unwrap().to_string();
    net.save(p("m.fpvw")).map_err(err)?;
    pair.geometry.save(p("geom.fpvs")).map_err(err)?;
    pair.gt.save(p("gt.fpvs")).map_err(err)?;
    run_cli(&["infer", "--model", &p("m.fpvw"), "--geometry", &p("geom.fpvs"), "--out", &p("pred.fpvs")])?;
    run_cli(&["eval", "--pred", &p("pred.fpvs"), "--gt", &p("gt.fpvs"), "--out", &p("m.csv")])?;
    let csv = fs::read_to_string(p("m.csv")).map_err(err)?;
    let row: Vec<&str> = csv.lines().nth(1).ok_or("empty metrics CSV")?.split(',').collect();
    let (fnr, fpr): (f64, f64) = (row[1].parse().map_err(err)?, row[2].parse().map_err(err)?);

    let detail = format!(
        "500 steps on frame 0: FNR {:.4}, FPR {:.4}; CLI infer+eval FNR {fnr:.4}, FPR {fpr:.4}",
        c.fnr(),
        c.fpr()
    );
    if !(c.fnr() <= 0.01 && c.fpr() <= 0.01 && fnr <= 0.01 && fpr <= 0.01) {
        return Err(detail);
    }
    within(Duration::from_secs(300), start, detail)
}

fn per_correctness() -> Check {
    // 90° camera: the near quad's edges fall on pixel boundaries of a 64×64
    // image, covering columns 16..32 and rows 32..40.
    let mut t = quad(-20.0, (-40.0, 40.0), (-40.0, 40.0));
    t.extend(quad(-10.0, (-5.0, 0.0), (0.0, 2.5)));
    let scene = to_scene(&t);
    let cam = Camera::new(Vec3::zero(), Basis::from_yaw_deg(0.0), 90.0, 1.0, 30.0).map_err(err)?;
    let dims = GridDims::cube(16);
    let frustum = cam.frustum();
    let fcfg = FroxelizeConfig::default();
    let ids = froxel_id_map(&scene, &frustum, dims, &fcfg).map_err(err)?;
    let geometry = froxelize(&scene, &frustum, dims, &fcfg).map_err(err)?;
    let near: Vec<u32> = ids.pairs().iter().filter(|p| p.1 >= 2).map(|p| p.0).collect();
    let mut pvs = FroxelGrid::new(dims, GridRole::PredictedPvs).map_err(err)?;
    geometry
        .iter_ones()
        .filter(|i| !near.contains(&(*i as u32)))
        .for_each(|i| pvs.set_linear(i));
    let res = (64, 64);
    let full = pixel_error_rate(&scene, &cam, &geometry, &ids, res).map_err(err)?;
    let per = pixel_error_rate(&scene, &cam, &pvs, &ids, res).map_err(err)?;
    let k = 16.0 * 8.0;
    ensure(
        full == 0.0 && per == k / 4096.0,
        format!("PER {per} with the quad culled (expected {k}/4096), {full} with everything kept"),
    )
}

fn tbv() -> Check {
    let cell = ViewCell::new(Vec3::zero(), Basis::from_yaw_deg(0.0), 0.5, 60.0, 10.0, 0.5, 30.0).map_err(err)?;
    let frustum = build_viewcell_frustum(&cell).map_err(err)?;
    let (dims, ocfg) = desk_oracle();
    let start = Aabb::new(Vec3::new(-3.0, -0.5, -15.0), Vec3::new(-2.0, 0.5, -14.0));
    let v = Vec3::new(2.0, 0.0, 0.0);
    let tbv = tbv_build(0, start, v, 0.0, 3.0).map_err(err)?;
    let mut seen = BTreeMap::new();
    for occluded in [true, false] {
        let mut t = cuboid(&start);
        let n = t.len();
        t.extend(quad(-20.0, (-40.0, 40.0), (-30.0, 30.0)));
        if occluded {
            t.extend(quad(-8.0, (-30.0, 30.0), (-20.0, 20.0)));
        }
        let verts: Vec<_> = t.iter().flatten().copied().collect();
        let idx = (0..t.len() as u32).map(|i| [3 * i, 3 * i + 1, 3 * i + 2]).collect();
        let obj = SceneObject {
            name: "mover".into(),
            triangles: 0..n,
            velocity: Some(v),
        };
        let scene = TriScene::from_parts(verts, idx, (0..t.len() as u32).collect(), vec![obj]).map_err(err)?;
        let gt = compute_gt_pvs(&scene, &cell, dims, &ocfg, &FroxelizeConfig::default()).map_err(err)?;
        let rc = ray_cast_pvs(&scene, &cell, dims, 2, &ocfg).map_err(err)?;
        seen.insert(occluded, (tbv_test(&tbv, &frustum, &gt), tbv_test(&tbv, &frustum, &rc)));
    }
    let contained = (0..100).all(|k| {
        let dt = (tbv.t1 - tbv.t0) * (k as f64 / 99.0);
        tbv.aabb.contains_box(&start.translated(v * dt))
    });
    ensure(
        seen[&true] == (false, false) && seen[&false] == (true, true) && contained,
        format!(
            "occluded visible (gt, ray cast) = {:?}, unoccluded = {:?}, 100 sampled boxes contained: {contained}",
            seen[&true], seen[&false]
        ),
    )
}

fn run_cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let o = Command::new(env!("CARGO_BIN_EXE_froxpvs"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(err)?;
    if !o.status.success() {
        return Err(format!("`{}` failed: {}", args.join(" "), String::from_utf8_lossy(&o.stderr)));
    }
    Ok(o.stdout)
}

fn pipeline(root: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let p = |s: &str| root.join(s).to_str().unwrap().to_string();
    let common = ["--dims", "16", "--viewpoints", "16", "--seed", "5", "--d", "2", "--deterministic"];
    let with = |args: &[&str]| -> Vec<String> {
        args.iter().map(|s| s.to_string()).chain(common.iter().map(|s| s.to_string())).collect()
    };
    let steps: Vec<Vec<String>> = vec![
        with(&["gen-dataset", "--frames", "8", "--out", &p("ds")]),
        with(&["gt", "--frame", "3", "--out", &p("gt3.fpvs"), "--geometry-out", &p("geom3.fpvs")]),
        with(&["train", "--dataset", &p("ds/manifest.txt"), "--epochs", "2", "--out", &p("model.fpvw")]),
        with(&["infer", "--model", &p("model.fpvw"), "--geometry", &p("geom3.fpvs"), "--out", &p("pred3.fpvs")]),
        with(&["infer", "--model", &p("model.fpvw"), "--dataset", &p("ds/manifest.txt"), "--out", &p("preds")]),
        with(&["eval", "--pred", &p("pred3.fpvs"), "--gt", &p("gt3.fpvs"), "--out", &p("eval3.csv")]),
        with(&["eval", "--model", &p("model.fpvw"), "--dataset", &p("ds/manifest.txt"), "--out", &p("eval.csv")]),
    ];
    for s in &steps {
        let args: Vec<&str> = s.iter().map(String::as_str).collect();
        run_cli(&args)?;
    }
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).map_err(err)? {
            let path = e.map_err(err)?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                files.insert(rel, fs::read(&path).map_err(err)?);
            }
        }
    }
    Ok(files)
}

fn determinism(dir: &Path) -> Check {
    let (a, b) = (dir.join("a"), dir.join("b"));
    fs::create_dir_all(&a).map_err(err)?;
    fs::create_dir_all(&b).map_err(err)?;
    let fa = pipeline(&a)?;
    let fb = pipeline(&b)?;
    if fa.keys().ne(fb.keys()) {
        return Err("runs wrote different file sets".into());
    }
    let differing: Vec<&String> = fa.keys().filter(|k| fa[*k] != fb[*k]).collect();
    ensure(
        differing.is_empty(),
        format!("{} artifacts from gen/gt/train/infer/eval, differing: {differing:?}", fa.len()),
    )
}

fn bench() -> Check {
    let out = run_cli(&["bench"])?;
    let text = String::from_utf8(out).map_err(err)?;
    let rows: BTreeMap<String, f64> = text
        .lines()
        .skip(1)
        .filter_map(|l| l.split_once(','))
        .map(|(k, v)| Ok((k.to_string(), v.parse::<f64>().map_err(err)?)))
        .collect::<Result<_, String>>()?;
    let stages = ["froxelize", "interleave", "forward", "deinterleave"];
    let nonzero = stages.iter().all(|s| rows.get(*s).is_some_and(|&ms| ms > 0.0));
    let total = rows.get("total").copied().unwrap_or(f64::INFINITY);
    ensure(
        nonzero && total < 500.0,
        format!(
            "32^3, d=4: {} ; total {total:.2} ms",
            stages.map(|s| format!("{s} {:.3}", rows.get(s).copied().unwrap_or(0.0))).join(", ")
        ),
    )
}

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let scratch = tempfile::tempdir().expect("temp dir");
    let smoke_dir = scratch.path().join("smoke");
    let det_dir = scratch.path().join("determinism");
    let mem_dir = scratch.path().join("memorization");
    let criteria: Vec<(&str, Box<dyn FnOnce() -> Check>)> = vec![
        ("interleave round-trip", Box::new(interleave_round_trip)),
        ("gradient correctness", Box::new(gradient_checks)),
        ("loss anchors", Box::new(loss_anchors)),
        ("oracle soundness", Box::new(oracle_soundness)),
        ("oracle cross-validation", Box::new(oracle_cross_validation)),
        ("occlusion correctness", Box::new(occlusion)),
        ("monotonicity", Box::new(monotonicity)),
        ("training smoke", Box::new(move || training_smoke(&smoke_dir))),
        ("memorization", Box::new(move || memorization(&mem_dir))),
        ("PER correctness", Box::new(per_correctness)),
        ("TBV", Box::new(tbv)),
        ("determinism", Box::new(move || determinism(&det_dir))),
        ("bench report", Box::new(bench)),
    ];
    let mut failed = 0;
    let mut ran = 0;
    for (name, check) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let t = Instant::now();
        let r = check();
        let secs = t.elapsed().as_secs_f64();
        match r {
            Ok(d) => println!("PASS  {name}: {d} [{secs:.1}s]"),
            Err(d) => {
                failed += 1;
                println!("FAIL  {name}: {d} [{secs:.1}s]");
            }
        }
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
