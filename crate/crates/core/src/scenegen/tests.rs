use super::*;
use crate::froxel::GridDims;
use crate::oracle::{compute_gt_pvs, OracleConfig};

fn scene_bytes(cfg: &SceneGenConfig) -> String {
    let (s, c) = generate_scene::<f64>(cfg).unwrap();
    format!("{}{:?}", s.to_obj_string(), c)
}

#[test]
fn same_seed_same_scene() {
    let cfg = SceneGenConfig {
        seed: 42,
        ..SceneGenConfig::default()
    };
    assert_eq!(scene_bytes(&cfg), scene_bytes(&cfg));
}

#[test]
fn distinct_seeds_differ() {
    let all: Vec<String> = (0..10)
        .map(|seed| {
            scene_bytes(&SceneGenConfig {
                seed,
                ..SceneGenConfig::default()
            })
        })
        .collect();
    for i in 0..all.len() {
        for j in i + 1..all.len() {
            assert_ne!(all[i], all[j]);
        }
    }
}

#[test]
fn object_count_in_range() {
    for seed in 0..100 {
        let cfg = SceneGenConfig {
            seed,
            object_count: (3, 7),
            ..SceneGenConfig::default()
        };
        let (s, _) = generate_scene::<f64>(&cfg).unwrap();
        let placed = s
            .objects()
            .iter()
            .filter(|o| !matches!(o.name.as_str(), "floor" | "wall" | "ceiling"))
            .count();
        assert!((3..=7).contains(&placed), "seed {seed}: {placed}");
        assert_eq!(s.dropped_degenerate(), 0);
    }
}

#[test]
fn viewcell_is_clear_and_above_floor() {
    for seed in 0..20 {
        let cfg = SceneGenConfig {
            seed,
            ..SceneGenConfig::default()
        };
        let (_, cell) = generate_scene::<f64>(&cfg).unwrap();
        assert!(cell.center.y >= cfg.viewcell_height.0 && cell.center.y <= cfg.viewcell_height.1);
        assert_eq!(cell.radius, cfg.radius);
    }
}

#[test]
fn floor_makes_gt_nonempty() {
    let dims = GridDims::cube(16);
    let ocfg = OracleConfig {
        viewpoints: 8,
        ..OracleConfig::for_dims(dims)
    };
    for seed in 0..5 {
        let cfg = SceneGenConfig {
            seed,
            floor_prob: 1.0,
            ..SceneGenConfig::default()
        };
        let (s, c) = generate_scene::<f64>(&cfg).unwrap();
        let gt = compute_gt_pvs(&s, &c, dims, &ocfg, &Default::default()).unwrap();
        assert!(!gt.is_empty(), "seed {seed}");
    }
}

#[test]
fn invalid_config_rejected() {
    let mut cfg = SceneGenConfig {
        object_count: (5, 2),
        ..SceneGenConfig::default()
    };
    assert!(generate_scene::<f64>(&cfg).is_err());
    cfg.object_count = (1, 2);
    cfg.scale_range = (-1.0, 2.0);
    assert!(cfg.validate().is_err());
    cfg.scale_range = (0.5, 4.0);
    cfg.class_weights = [0.0; PrimitiveKind::ALL.len()];
    assert!(cfg.validate().is_err());
}

#[test]
fn config_pairs_round_trip() {
    let mut cfg = DatasetConfig::default();
    cfg.scene.seed = 9;
    cfg.scene.wall_prob = 0.25;
    cfg.oracle.viewpoints = 17;
    cfg.dims = GridDims::new(16, 8, 24);
    cfg.oracle.resolution = (64, 32);
    let mut back = DatasetConfig::default();
    for (k, v) in cfg.to_pairs() {
        assert!(back.set(&k, &v).unwrap(), "{k}");
    }
    assert_eq!(back, cfg);
    assert!(!back.set("bogus", "1").unwrap());
    assert!(back.set("viewpoints", "many").is_err());
}

#[test]
fn frame_seeds_are_distinct() {
    let seeds: std::collections::BTreeSet<u64> = (0..1000).map(|i| frame_seed(7, i)).collect();
    assert_eq!(seeds.len(), 1000);
}

fn tiny_config() -> DatasetConfig {
    let dims = GridDims::cube(16);
    DatasetConfig {
        dims,
        oracle: OracleConfig {
            viewpoints: 8,
            ..OracleConfig::for_dims(dims)
        },
        ..DatasetConfig::default()
    }
}

#[test]
fn zero_frames_no_grid_files() {
    let dir = tempfile::tempdir().unwrap();
    let (m, stats) = generate_dataset(&tiny_config(), 0, dir.path()).unwrap();
    assert!(m.entries.is_empty());
    assert_eq!(stats.frames, 0);
    let files: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(files, vec![std::ffi::OsString::from(MANIFEST_NAME)]);
}

#[test]
fn dataset_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config();
    let (m, _) = generate_dataset(&cfg, 3, dir.path()).unwrap();
    assert_eq!(m.entries.len(), 3);
    let (loaded, pairs) = load_pairs(dir.path().join(MANIFEST_NAME)).unwrap();
    assert_eq!(loaded, m);
    assert_eq!(loaded.config().unwrap(), cfg);
    for (g, t) in &pairs {
        assert!(t.is_subset_of(g).unwrap());
    }
    let (_, _, again) = generate_frame(&cfg, 1).unwrap();
    assert_eq!(again.gt.bytes(), pairs[1].1.bytes());
}

#[test]
fn io_failure_names_the_frame() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("frame_00000_gt.fpvs");
    std::fs::create_dir(&blocker).unwrap();
    let err = generate_dataset(&tiny_config(), 2, dir.path()).unwrap_err();
    assert!(err.is_io());
    assert!(matches!(err, crate::PvsError::Frame { index: 0, .. }), "{err}");
}

#[test]
fn manifest_rejects_garbage() {
    assert!(Manifest::parse("0 1 a.fpvs").is_err());
    assert!(Manifest::parse("x 1 a b").is_err());
    let m = Manifest::parse("# dims=16\n\n3 5 a b\n").unwrap();
    assert_eq!(m.header, vec![("dims".into(), "16".into())]);
    assert_eq!(m.entries[0].index, 3);
}
