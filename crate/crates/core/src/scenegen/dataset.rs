use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::generate::{generate_scene, SceneGenConfig};
use crate::error::{PvsError, Result};
use crate::froxel::{FroxelGrid, FroxelizeConfig, GridDims, ProjectionMode};
use crate::geom::{TriScene, ViewCell};
use crate::oracle::{compute_training_pair, OracleConfig, SamplingMode, TrainingPair};
use crate::GeomReal;

pub const MANIFEST_NAME: &str = "manifest.txt";
pub const DEFAULT_FRAMES: usize = 200;

/// Everything needed to regenerate a frame from its index.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetConfig {
    pub scene: SceneGenConfig,
    pub dims: GridDims,
    pub oracle: OracleConfig,
    pub froxel: FroxelizeConfig,
    /// Expected fraction of visible froxels per ground-truth grid.
    pub visible_band: (f64, f64),
}

impl Default for DatasetConfig {
    fn default() -> Self {
        let dims = GridDims::cube(32);
        Self {
            scene: SceneGenConfig::default(),
            dims,
            oracle: OracleConfig::for_dims(dims),
            froxel: FroxelizeConfig::default(),
            visible_band: (0.005, 0.10),
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        self.dims.validate_packed()?;
        self.oracle.validate(self.dims)?;
        self.froxel.validate()
    }

    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("dims".to_string(), self.dims.to_string()),
            ("supersample".into(), self.froxel.supersample.to_string()),
            ("projection".into(), self.froxel.mode.name().into()),
            ("viewpoints".into(), self.oracle.viewpoints.to_string()),
            ("sampling".into(), self.oracle.mode.name().into()),
            ("oracle_seed".into(), self.oracle.seed.to_string()),
            (
                "resolution".into(),
                format!("{}x{}", self.oracle.resolution.0, self.oracle.resolution.1),
            ),
            (
                "visible_band".into(),
                format!("{},{}", self.visible_band.0, self.visible_band.1),
            ),
        ];
        out.extend(self.scene.to_pairs());
        out
    }

    /// Applies one `key=value` setting. Unknown keys return `Ok(false)`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        let int = |v: &str| -> Result<usize> {
            v.trim()
                .parse()
                .map_err(|_| PvsError::invalid(format!("`{key}`: expected an integer, got `{v}`")))
        };
        match key {
            "dims" => {
                let dims: GridDims = value.parse()?;
                let rescale = self.oracle.resolution == OracleConfig::for_dims(self.dims).resolution;
                self.dims = dims;
                if rescale {
                    self.oracle.resolution = OracleConfig::for_dims(dims).resolution;
                }
            }
            "supersample" => self.froxel.supersample = int(value)?,
            "projection" => self.froxel.mode = ProjectionMode::parse(value.trim())?,
            "viewpoints" => self.oracle.viewpoints = int(value)?,
            "sampling" => self.oracle.mode = SamplingMode::parse(value.trim())?,
            "oracle_seed" => {
                self.oracle.seed = value
                    .trim()
                    .parse()
                    .map_err(|_| PvsError::invalid(format!("`oracle_seed`: expected an integer, got `{value}`")))?
            }
            "resolution" => {
                let bad = || PvsError::invalid(format!("`resolution`: expected `WxH`, got `{value}`"));
                let (w, h) = value.trim().split_once('x').ok_or_else(bad)?;
                self.oracle.resolution = (w.parse().map_err(|_| bad())?, h.parse().map_err(|_| bad())?);
            }
            "visible_band" => {
                let (a, b) = value
                    .split_once(',')
                    .ok_or_else(|| PvsError::invalid(format!("`visible_band`: expected `lo,hi`, got `{value}`")))?;
                let num = |v: &str| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| PvsError::invalid(format!("`visible_band`: bad number `{v}`")))
                };
                self.visible_band = (num(a)?, num(b)?);
            }
            _ => return self.scene.set(key, value),
        }
        Ok(true)
    }

    /// Scene configuration of frame `index`.
    pub fn frame_scene(&self, index: usize) -> SceneGenConfig {
        SceneGenConfig {
            seed: frame_seed(self.scene.seed, index),
            ..self.scene.clone()
        }
    }
}

/// Per-frame seed from the base seed, by one SplitMix64 step over
/// `base + index·γ`. Each frame's seed depends only on its index, so frames
/// can be generated in any order.
pub fn frame_seed(base: u64, index: usize) -> u64 {
    let mut z = base.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Scene, viewcell and grids of frame `index`.
pub fn generate_frame(
    cfg: &DatasetConfig,
    index: usize,
) -> Result<(TriScene<GeomReal>, ViewCell<GeomReal>, TrainingPair)> {
    let (scene, cell) = generate_scene::<GeomReal>(&cfg.frame_scene(index))?;
    let pair = compute_training_pair(&scene, &cell, cfg.dims, &cfg.oracle, &cfg.froxel)?;
    if !pair.gt.is_subset_of(&pair.geometry)? {
        return Err(PvsError::invalid("ground truth is not contained in the geometry grid"));
    }
    Ok((scene, cell, pair))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub index: usize,
    pub seed: u64,
    /// Paths relative to the manifest's directory.
    pub geometry: String,
    pub gt: String,
}

/// Line-oriented dataset index. Header lines are `# key=value`; each record
/// is `index seed geometry_path gt_path`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Manifest {
    pub header: Vec<(String, String)>,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.header {
            let _ = writeln!(s, "# {k}={v}");
        }
        for e in &self.entries {
            let _ = writeln!(s, "{} {} {} {}", e.index, e.seed, e.geometry, e.gt);
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut m = Manifest::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.trim().split_once('=') {
                    m.header.push((k.trim().to_string(), v.trim().to_string()));
                }
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let bad = || PvsError::format("manifest", format!("line {}: `{line}`", n + 1));
            if f.len() != 4 {
                return Err(bad());
            }
            m.entries.push(ManifestEntry {
                index: f[0].parse().map_err(|_| bad())?,
                seed: f[1].parse().map_err(|_| bad())?,
                geometry: f[2].to_string(),
                gt: f[3].to_string(),
            });
        }
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&fs::read_to_string(path).map_err(|e| PvsError::io(path, e))?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| PvsError::io(path, e))
    }

    /// Rebuilds the dataset configuration from the header.
    pub fn config(&self) -> Result<DatasetConfig> {
        let mut cfg = DatasetConfig::default();
        for (k, v) in &self.header {
            if !cfg.set(k, v)? {
                log::warn!("ignoring unknown manifest key `{k}`");
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Summary statistics of a generated set.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetStats {
    pub frames: usize,
    pub mean_geometry_occupancy: f64,
    pub mean_visible_fraction: f64,
    /// Frames whose visible fraction lies inside the configured band.
    pub in_band: usize,
}

/// Writes `n_frames` geometry/ground-truth pairs and the manifest to
/// `out_dir`. Frames are generated in parallel; files only depend on the
/// frame index, so the output matches a serial run.
pub fn generate_dataset(cfg: &DatasetConfig, n_frames: usize, out_dir: impl AsRef<Path>) -> Result<(Manifest, DatasetStats)> {
    cfg.validate()?;
    let out = out_dir.as_ref();
    fs::create_dir_all(out).map_err(|e| PvsError::io(out, e))?;
    let results: Vec<Result<(ManifestEntry, f64, f64)>> = (0..n_frames)
        .into_par_iter()
        .map(|index| {
            write_frame(cfg, index, out).map_err(|e| PvsError::Frame {
                index,
                source: Box::new(e),
            })
        })
        .collect();
    let mut manifest = Manifest {
        header: cfg.to_pairs(),
        entries: Vec::with_capacity(n_frames),
    };
    let mut stats = DatasetStats {
        frames: n_frames,
        ..DatasetStats::default()
    };
    for r in results {
        let (entry, occ, vis) = r?;
        stats.mean_geometry_occupancy += occ;
        stats.mean_visible_fraction += vis;
        if vis >= cfg.visible_band.0 && vis <= cfg.visible_band.1 {
            stats.in_band += 1;
        } else {
            log::warn!("frame {}: visible fraction {vis:.4} outside band", entry.index);
        }
        manifest.entries.push(entry);
    }
    if n_frames > 0 {
        stats.mean_geometry_occupancy /= n_frames as f64;
        stats.mean_visible_fraction /= n_frames as f64;
    }
    manifest.save(out.join(MANIFEST_NAME))?;
    Ok((manifest, stats))
}

pub fn frame_file_names(index: usize) -> (String, String) {
    (format!("frame_{index:05}_geom.fpvs"), format!("frame_{index:05}_gt.fpvs"))
}

fn write_frame(cfg: &DatasetConfig, index: usize, out: &Path) -> Result<(ManifestEntry, f64, f64)> {
    let (_, _, pair) = generate_frame(cfg, index)?;
    let (g, t) = frame_file_names(index);
    pair.geometry.save(out.join(&g))?;
    pair.gt.save(out.join(&t))?;
    Ok((
        ManifestEntry {
            index,
            seed: cfg.frame_scene(index).seed,
            geometry: g,
            gt: t,
        },
        pair.geometry.occupancy(),
        pair.gt.occupancy(),
    ))
}

/// Loads every `(geometry, gt)` pair listed in the manifest at `path`.
pub fn load_pairs(path: impl AsRef<Path>) -> Result<(Manifest, Vec<(FroxelGrid, FroxelGrid)>)> {
    let path = path.as_ref();
    let manifest = Manifest::load(path)?;
    let dir: PathBuf = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let pairs = manifest
        .entries
        .iter()
        .map(|e| {
            let load = |p: &str| FroxelGrid::load(dir.join(p));
            Ok((load(&e.geometry)?, load(&e.gt)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, pairs))
}
