use froxpvs::froxel::{FroxelGrid, GridDims, GridRole};
use froxpvs::geom::{build_viewcell_frustum, Basis, Camera, Ndc, Vec3};
use froxpvs::interleave::{deinterleave_threshold, interleave};
use froxpvs::neural::{evaluate, predict_pvs, samples_from_pairs, train, ModelConfig, Network, TrainConfig};
use froxpvs::oracle::OracleConfig;
use froxpvs::scenegen::{generate_dataset, generate_frame, load_pairs, DatasetConfig, Manifest};
use proptest::prelude::*;

fn small_config() -> DatasetConfig {
    let dims = GridDims::cube(16);
    DatasetConfig {
        dims,
        oracle: OracleConfig {
            viewpoints: 16,
            ..OracleConfig::for_dims(dims)
        },
        ..DatasetConfig::default()
    }
}

#[test]
fn written_dataset_matches_regenerated_frames() {
    let cfg = small_config();
    let dir = tempfile::tempdir().unwrap();
    let (manifest, stats) = generate_dataset(&cfg, 4, dir.path()).unwrap();
    assert_eq!(stats.frames, 4);
    assert_eq!(manifest.config().unwrap(), cfg);
    let (loaded, pairs) = load_pairs(dir.path().join("manifest.txt")).unwrap();
    assert_eq!(loaded, manifest);
    assert_eq!(Manifest::parse(&manifest.to_text()).unwrap(), manifest);
    for (k, (geometry, gt)) in pairs.iter().enumerate() {
        let (_, _, pair) = generate_frame(&cfg, k).unwrap();
        assert_eq!(geometry, &pair.geometry);
        assert_eq!(gt, &pair.gt);
        assert!(gt.is_subset_of(geometry).unwrap());
        assert_eq!(gt.role(), GridRole::GtPvs);
    }
}

#[test]
fn generated_geometry_survives_interleaving() {
    let cfg = small_config();
    let (_, _, pair) = generate_frame(&cfg, 3).unwrap();
    for d in [2, 4, 8] {
        let t = interleave::<f32>(&pair.geometry, d).unwrap();
        let back = deinterleave_threshold(&t, d, 0.5, GridRole::Geometry).unwrap();
        assert_eq!(back.bytes(), pair.geometry.bytes());
    }
}

#[test]
fn trained_checkpoint_predicts_the_same_after_reload() {
    let cfg = small_config();
    let dir = tempfile::tempdir().unwrap();
    generate_dataset(&cfg, 3, dir.path()).unwrap();
    let (_, pairs) = load_pairs(dir.path().join("manifest.txt")).unwrap();
    let samples = samples_from_pairs::<f32>(&pairs, 2).unwrap();
    let tcfg = TrainConfig {
        epochs: 2,
        batch: 1,
        ..TrainConfig::default()
    };
    let mut net = Network::<f32>::init(ModelConfig::with_hidden(2, &[8], 3), 4).unwrap();
    let report = train(&mut net, &samples[..2], &samples[2..], &tcfg).unwrap();
    assert!(report.epochs.iter().all(|e| e.loss.is_finite()));
    let path = dir.path().join("m.fpvw");
    net.save(&path).unwrap();
    let back = Network::<f32>::load(&path).unwrap();
    let (geometry, gt) = &pairs[2];
    let p = predict_pvs(geometry, &back, 0.5).unwrap();
    assert_eq!(p, predict_pvs(geometry, &net, 0.5).unwrap());
    assert_eq!(p.dims(), gt.dims());
    let c = evaluate(&back, &samples[2..], 0.5).unwrap();
    assert_eq!(c.tp as usize, p.count_and(gt).unwrap());
}

#[test]
fn saved_grids_load_back_identically() {
    let (_, _, pair) = generate_frame(&small_config(), 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("g.fpvs");
    pair.geometry.save(&p).unwrap();
    let back = FroxelGrid::load(&p).unwrap();
    assert_eq!(back, pair.geometry);
    std::fs::write(&p, &std::fs::read(&p).unwrap()[..10]).unwrap();
    assert!(FroxelGrid::load(&p).is_err());
}

proptest! {
    #[test]
    fn projection_round_trips(
        u in 0.0f64..1.0, v in 0.0f64..1.0, w in 0.0f64..1.0,
        yaw in -180.0f64..180.0, fov in 20.0f64..120.0,
        ox in -5.0f64..5.0, oz in -5.0f64..5.0,
    ) {
        let cam = Camera::new(Vec3::new(ox, 1.0, oz), Basis::from_yaw_deg(yaw), fov, 0.2, 40.0).unwrap();
        let f = cam.frustum();
        let p = f.unproject(Ndc { u, v, w });
        let n = f.project_to_ndc(p).unwrap();
        prop_assert!((n.u - u).abs() < 1e-9 && (n.v - v).abs() < 1e-9 && (n.w - w).abs() < 1e-9);
    }

    #[test]
    fn viewcell_frustum_contains_every_corner_view(frame in 0usize..50) {
        let cfg = small_config();
        let (_, cell, _) = generate_frame(&cfg, frame).unwrap();
        let big = build_viewcell_frustum(&cell).unwrap();
        let cam = cell.center_camera();
        let inner = cam.frustum();
        for (u, v) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (0.5, 0.5)] {
            let p = inner.unproject(Ndc { u, v, w: 0.5 });
            prop_assert!(big.project_to_ndc(p).is_some());
        }
    }
}
