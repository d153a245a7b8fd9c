use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::time::Instant;

use froxpvs::evalrt::{
    cull, far_field_merge, froxel_metrics, pixel_error_rate_of, write_metrics_csv, MetricsRecord, MetricsSummary,
};
use froxpvs::froxel::{froxelize, FroxelGrid, GridRole};
use froxpvs::geom::{build_viewcell_frustum, Basis, ViewCell};
use froxpvs::interleave::{deinterleave_threshold, interleave};
use froxpvs::neural::{predict_pvs, samples_from_pairs, train as fit, ConfusionCounts};
use froxpvs::oracle::{compute_training_pair, training_id_map, TrainingPair};
use froxpvs::scenegen::{generate_dataset, generate_frame, generate_scene, load_pairs, Manifest};
use froxpvs::{Net, NetReal, Scene, Vec3f};

use crate::config::RunConfig;
use crate::Failure;

pub enum SceneSource {
    Obj {
        path: PathBuf,
        motion: Option<PathBuf>,
        center: Vec3f,
        yaw: f64,
    },
    Frame(usize),
}

pub fn parse_vec3(s: &str) -> Result<Vec3f, Failure> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::Usage(format!("expected `x,y,z`, got `{s}`")))?;
    match v[..] {
        [x, y, z] => Ok(Vec3f::new(x, y, z)),
        _ => Err(Failure::Usage(format!("expected `x,y,z`, got `{s}`"))),
    }
}

pub fn parse_range(s: &str) -> Result<Range<usize>, Failure> {
    let bad = || Failure::Usage(format!("expected a range `a..b`, got `{s}`"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    Ok(a.trim().parse().map_err(|_| bad())?..b.trim().parse().map_err(|_| bad())?)
}

/// `path` with `suffix` appended to its file name.
pub fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut name: OsString = path.file_name().map(OsString::from).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn timed<R>(f: impl FnOnce() -> R) -> (R, f64) {
    let t = Instant::now();
    let r = f();
    (r, t.elapsed().as_secs_f64() * 1e3)
}

fn tau(cfg: &RunConfig) -> NetReal {
    cfg.train.tau as NetReal
}

pub fn gen_dataset(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    let (manifest, stats) = generate_dataset(&cfg.dataset, cfg.frames, out)?;
    log::info!(
        "{} frames in {}: geometry occupancy {:.4}, visible fraction {:.4}, {} in band",
        manifest.entries.len(),
        out.display(),
        stats.mean_geometry_occupancy,
        stats.mean_visible_fraction,
        stats.in_band
    );
    Ok(())
}

pub fn gt(cfg: &RunConfig, source: &SceneSource, out: &Path, geometry_out: Option<&Path>) -> Result<(), Failure> {
    let d = &cfg.dataset;
    let pair: TrainingPair = match source {
        SceneSource::Frame(k) => generate_frame(d, *k)?.2,
        SceneSource::Obj {
            path,
            motion,
            center,
            yaw,
        } => {
            let mut scene = Scene::from_obj_str(&read_text(path)?)?;
            if let Some(m) = motion {
                scene.apply_motion_table(&read_text(m)?)?;
            }
            let s = &d.scene;
            let cell = ViewCell::new(
                *center,
                Basis::from_yaw_deg(*yaw),
                s.radius,
                s.fov_deg,
                s.beta_deg,
                s.near,
                s.far,
            )?;
            compute_training_pair(&scene, &cell, d.dims, &d.oracle, &d.froxel)?
        }
    };
    if !pair.gt.is_subset_of(&pair.geometry)? {
        return Err(Failure::Invalid("ground truth is not contained in the geometry grid".into()));
    }
    pair.gt.save(out)?;
    if let Some(g) = geometry_out {
        pair.geometry.save(g)?;
    }
    log::info!(
        "{} visible of {} occupied froxels",
        pair.gt.count_ones(),
        pair.geometry.count_ones()
    );
    Ok(())
}

pub fn train(cfg: &RunConfig, dataset: &Path, out: &Path, log_path: &Path, resume: Option<&Path>) -> Result<(), Failure> {
    let (_, pairs) = load_pairs(dataset)?;
    let mut net = match resume {
        Some(p) => Net::load(p)?,
        None => Net::init(cfg.model(), cfg.train.seed)?,
    };
    let n = pairs.len();
    let held = cfg.held_out.unwrap_or(n / 10);
    if held >= n {
        return Err(Failure::Invalid(format!("holding out {held} of {n} frames leaves nothing to train on")));
    }
    let samples = samples_from_pairs::<NetReal>(&pairs, net.config().d)?;
    let (train_set, held_set) = samples.split_at(n - held);
    log::info!(
        "training {} parameters on {} frames, {} held out",
        net.config().param_count(),
        train_set.len(),
        held_set.len()
    );
    let report = fit(&mut net, train_set, held_set, &cfg.train)?;
    net.save(out)?;
    write_file(log_path, report.to_csv())?;
    write_file(&with_suffix(out, ".config"), cfg.to_text())?;
    if let Some(last) = report.last() {
        log::info!("final loss {:.5}, train FNR {:.4}, FPR {:.4}", last.loss, last.fnr, last.fpr);
    }
    Ok(())
}

pub fn infer(
    cfg: &RunConfig,
    model: &Path,
    geometry: Option<&Path>,
    dataset: Option<&Path>,
    out: &Path,
) -> Result<(), Failure> {
    let net = Net::load(model)?;
    match (geometry, dataset) {
        (Some(g), _) => {
            let grid = FroxelGrid::load(g)?;
            predict_pvs(&grid, &net, tau(cfg))?.save(out)?;
        }
        (None, Some(d)) => {
            let (manifest, pairs) = load_pairs(d)?;
            fs::create_dir_all(out).map_err(|e| Failure::Io(format!("{}: {e}", out.display())))?;
            for (e, (geom, _)) in manifest.entries.iter().zip(&pairs) {
                predict_pvs(geom, &net, tau(cfg))?.save(out.join(format!("frame_{:05}_pred.fpvs", e.index)))?;
            }
            log::info!("{} predictions in {}", pairs.len(), out.display());
        }
        (None, None) => return Err(Failure::Usage("infer needs --geometry or --dataset".into())),
    }
    Ok(())
}

fn write_metrics(cfg: &RunConfig, records: &[MetricsRecord], out: &Path) -> Result<(), Failure> {
    let mut buf = Vec::new();
    write_metrics_csv(&mut buf, records).map_err(|e| Failure::Io(e.to_string()))?;
    write_file(out, buf)?;
    write_file(&with_suffix(out, ".config"), cfg.to_text())?;
    let s = MetricsSummary::of(records);
    log::info!(
        "{} frames ({} rated): mean FNR {:.5}, FPR {:.5}{}",
        s.frames,
        s.rated_frames,
        s.mean_fnr,
        s.mean_fpr,
        s.mean_per.map(|p| format!(", PER {p:.6}")).unwrap_or_default()
    );
    Ok(())
}

pub fn eval_grids(cfg: &RunConfig, pred: &Path, gt: &Path, out: &Path) -> Result<(), Failure> {
    let m = froxel_metrics(&FroxelGrid::load(pred)?, &FroxelGrid::load(gt)?)?;
    write_metrics(cfg, &[m], out)
}

pub fn eval_dataset(
    cfg: &RunConfig,
    model: &Path,
    dataset: &Path,
    range: Option<Range<usize>>,
    with_per: bool,
    out: &Path,
) -> Result<(), Failure> {
    let net = Net::load(model)?;
    let manifest = Manifest::load(dataset)?;
    let dcfg = manifest.config()?;
    let (_, pairs) = load_pairs(dataset)?;
    let range = range.unwrap_or(0..pairs.len());
    if range.end > pairs.len() || range.start > range.end {
        return Err(Failure::Invalid(format!("frame range {range:?} outside 0..{}", pairs.len())));
    }
    let clock = |ms: f64| if cfg.deterministic { 0.0 } else { ms };
    let mut records = Vec::with_capacity(range.len());
    for i in range {
        let index = manifest.entries[i].index;
        let (geom, gt) = &pairs[i];
        let (pred, infer_ms) = timed(|| predict_pvs(geom, &net, tau(cfg)));
        let pred = pred?;
        let mut rec = MetricsRecord::from_counts(index, &ConfusionCounts::from_grids(&pred, gt)?);
        rec.infer_ms = clock(infer_ms);
        if with_per {
            let (scene, cell) = generate_scene::<f64>(&dcfg.frame_scene(index))?;
            let (ids, oracle_ms) = timed(|| training_id_map(&scene, &cell, dcfg.dims, &dcfg.oracle, &dcfg.froxel));
            rec.oracle_ms = clock(oracle_ms);
            let mut kept = cull(&scene, &pred, &ids?, cfg.include_dynamic)?;
            if let Some(t) = cfg.threshold_distance {
                kept = far_field_merge(&scene, &cell, &kept, t, cfg.eval_resolution)?;
            }
            rec.per = Some(pixel_error_rate_of(&scene, &cell.center_camera(), &kept, cfg.eval_resolution));
        }
        log::debug!("frame {index}: FNR {:.4} FPR {:.4}", rec.fnr, rec.fpr);
        records.push(rec);
    }
    write_metrics(cfg, &records, out)
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

pub fn bench(cfg: &RunConfig, model: Option<&Path>, frame: usize, out: Option<&Path>) -> Result<(), Failure> {
    let net = match model {
        Some(p) => Net::load(p)?,
        None => Net::init(cfg.model(), cfg.train.seed)?,
    };
    let d = net.config().d;
    let dcfg = &cfg.dataset;
    let (scene, cell) = generate_scene::<f64>(&dcfg.frame_scene(frame))?;
    let frustum = build_viewcell_frustum(&cell)?;
    let stage = |f: &mut dyn FnMut() -> froxpvs::Result<()>| -> Result<f64, Failure> {
        f()?;
        let mut ts = Vec::with_capacity(cfg.bench_repeats);
        for _ in 0..cfg.bench_repeats {
            let (r, ms) = timed(&mut *f);
            r?;
            ts.push(ms);
        }
        Ok(median(ts))
    };
    let grid = froxelize(&scene, &frustum, dcfg.dims, &dcfg.froxel)?;
    let x = interleave::<NetReal>(&grid, d)?;
    let y = net.forward(&x)?;
    let rows = [
        ("froxelize", stage(&mut || froxelize(&scene, &frustum, dcfg.dims, &dcfg.froxel).map(drop))?),
        ("interleave", stage(&mut || interleave::<NetReal>(&grid, d).map(drop))?),
        ("forward", stage(&mut || net.forward(&x).map(drop))?),
        (
            "deinterleave",
            stage(&mut || deinterleave_threshold(&y, d, tau(cfg), GridRole::PredictedPvs).map(drop))?,
        ),
    ];
    let total: f64 = rows.iter().map(|r| r.1).sum();
    let mut csv = String::from("stage,ms\n");
    for (name, ms) in rows.iter().copied().chain([("total", total)]) {
        let ms = if cfg.deterministic { 0.0 } else { ms };
        csv.push_str(&format!("{name},{ms:.4}\n"));
    }
    match out {
        Some(p) => write_file(p, &csv)?,
        None => std::io::stdout()
            .write_all(csv.as_bytes())
            .map_err(|e| Failure::Io(e.to_string()))?,
    }
    log::info!("{} dims, d={d}: forward path {total:.2} ms", dcfg.dims);
    Ok(())
}
