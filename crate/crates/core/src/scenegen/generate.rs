use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::primitives::{primitive_mesh, Mesh, PrimitiveKind};
use crate::error::{PvsError, Result};
use crate::geom::{Basis, SceneObject, TriScene, Vec3, ViewCell};
use crate::Real;

/// Scene and viewcell distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneGenConfig {
    pub seed: u64,
    /// Inclusive range of placed objects, excluding base planes.
    pub object_count: (usize, usize),
    /// Relative frequency of each kind, indexed like [`PrimitiveKind::ALL`].
    pub class_weights: [f64; PrimitiveKind::ALL.len()],
    /// Per-axis scale, sampled log-uniformly.
    pub scale_range: (f64, f64),
    pub wall_stretch_prob: f64,
    /// Extra factor on two axes for stretched objects, sampled log-uniformly.
    pub wall_stretch_range: (f64, f64),
    /// Objects are placed with their centers in `[-extent, extent]` horizontally.
    pub extent: f64,
    /// Range of object center heights above the floor.
    pub object_height: (f64, f64),
    pub floor_prob: f64,
    pub wall_prob: f64,
    pub ceiling_prob: f64,
    /// Range of viewcell center heights above the floor.
    pub viewcell_height: (f64, f64),
    /// Objects keep at least this gap to the viewcell disc.
    pub clearance: f64,
    pub radius: f64,
    pub fov_deg: f64,
    pub beta_deg: f64,
    pub near: f64,
    pub far: f64,
}

impl Default for SceneGenConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            object_count: (4, 14),
            class_weights: [1.0; PrimitiveKind::ALL.len()],
            scale_range: (0.5, 4.0),
            wall_stretch_prob: 0.1,
            wall_stretch_range: (5.0, 20.0),
            extent: 20.0,
            object_height: (0.0, 4.0),
            floor_prob: 1.0,
            wall_prob: 0.25,
            ceiling_prob: 0.0,
            viewcell_height: (0.5, 2.5),
            clearance: 0.5,
            radius: 0.3,
            fov_deg: 60.0,
            beta_deg: 15.0,
            near: 0.3,
            far: 30.0,
        }
    }
}

impl SceneGenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PvsError::invalid(m));
        let (lo, hi) = self.object_count;
        if lo > hi {
            return bad(format!("empty object count range {lo}..={hi}"));
        }
        for (name, (a, b)) in [
            ("scale", self.scale_range),
            ("wall stretch", self.wall_stretch_range),
        ] {
            if !(a > 0.0 && a <= b && b.is_finite()) {
                return bad(format!("{name} range ({a}, {b}) must be positive and ordered"));
            }
        }
        for (name, (a, b)) in [("object height", self.object_height), ("viewcell height", self.viewcell_height)] {
            if !(a <= b && a.is_finite() && b.is_finite()) {
                return bad(format!("{name} range ({a}, {b}) must be ordered"));
            }
        }
        if self.class_weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) || self.class_weights.iter().sum::<f64>() <= 0.0 {
            return bad("class weights must be non-negative with a positive sum".into());
        }
        for (name, p) in [
            ("wall stretch", self.wall_stretch_prob),
            ("floor", self.floor_prob),
            ("wall", self.wall_prob),
            ("ceiling", self.ceiling_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} probability {p} outside [0, 1]"));
            }
        }
        if !(self.extent > 0.0 && self.clearance >= 0.0) {
            return bad("extent must be positive and clearance non-negative".into());
        }
        self.viewcell_template().validate()
    }

    fn viewcell_template(&self) -> ViewCell<f64> {
        ViewCell {
            center: Vec3::zero(),
            basis: Basis::from_yaw_deg(0.0),
            radius: self.radius,
            fov_deg: self.fov_deg,
            beta_deg: self.beta_deg,
            near: self.near,
            far: self.far,
        }
    }

    /// `key=value` lines describing every field.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let pair = |(a, b): (f64, f64)| format!("{a},{b}");
        let weights = self.class_weights.map(|w| w.to_string()).join(",");
        vec![
            ("seed".into(), self.seed.to_string()),
            ("object_count".into(), format!("{},{}", self.object_count.0, self.object_count.1)),
            ("class_weights".into(), weights),
            ("scale_range".into(), pair(self.scale_range)),
            ("wall_stretch_prob".into(), self.wall_stretch_prob.to_string()),
            ("wall_stretch_range".into(), pair(self.wall_stretch_range)),
            ("extent".into(), self.extent.to_string()),
            ("object_height".into(), pair(self.object_height)),
            ("floor_prob".into(), self.floor_prob.to_string()),
            ("wall_prob".into(), self.wall_prob.to_string()),
            ("ceiling_prob".into(), self.ceiling_prob.to_string()),
            ("viewcell_height".into(), pair(self.viewcell_height)),
            ("clearance".into(), self.clearance.to_string()),
            ("radius".into(), self.radius.to_string()),
            ("fov".into(), self.fov_deg.to_string()),
            ("beta".into(), self.beta_deg.to_string()),
            ("near".into(), self.near.to_string()),
            ("far".into(), self.far.to_string()),
        ]
    }

    /// Applies one `key=value` setting. Unknown keys return `Ok(false)`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        let num = |v: &str| -> Result<f64> {
            v.trim()
                .parse::<f64>()
                .map_err(|_| PvsError::invalid(format!("`{key}`: expected a number, got `{v}`")))
        };
        let pair = |v: &str| -> Result<(f64, f64)> {
            let (a, b) = v
                .split_once(',')
                .ok_or_else(|| PvsError::invalid(format!("`{key}`: expected `a,b`, got `{v}`")))?;
            Ok((num(a)?, num(b)?))
        };
        match key {
            "seed" => {
                self.seed = value
                    .trim()
                    .parse()
                    .map_err(|_| PvsError::invalid(format!("`seed`: expected an integer, got `{value}`")))?
            }
            "object_count" => {
                let (a, b) = pair(value)?;
                if a < 0.0 || b < 0.0 || a.fract() != 0.0 || b.fract() != 0.0 {
                    return Err(PvsError::invalid(format!("`object_count`: expected integers, got `{value}`")));
                }
                self.object_count = (a as usize, b as usize);
            }
            "class_weights" => {
                let w: Vec<f64> = value.split(',').map(num).collect::<Result<_>>()?;
                self.class_weights = w.try_into().map_err(|w: Vec<f64>| {
                    PvsError::invalid(format!("`class_weights`: expected {} values, got {}", PrimitiveKind::ALL.len(), w.len()))
                })?;
            }
            "scale_range" => self.scale_range = pair(value)?,
            "wall_stretch_prob" => self.wall_stretch_prob = num(value)?,
            "wall_stretch_range" => self.wall_stretch_range = pair(value)?,
            "extent" => self.extent = num(value)?,
            "object_height" => self.object_height = pair(value)?,
            "floor_prob" => self.floor_prob = num(value)?,
            "wall_prob" => self.wall_prob = num(value)?,
            "ceiling_prob" => self.ceiling_prob = num(value)?,
            "viewcell_height" => self.viewcell_height = pair(value)?,
            "clearance" => self.clearance = num(value)?,
            "radius" => self.radius = num(value)?,
            "fov" => self.fov_deg = num(value)?,
            "beta" => self.beta_deg = num(value)?,
            "near" => self.near = num(value)?,
            "far" => self.far = num(value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, (a, b): (f64, f64)) -> f64 {
    if a == b {
        return a;
    }
    (rng.random_range(a.ln()..b.ln())).exp()
}

fn range(rng: &mut ChaCha8Rng, (a, b): (f64, f64)) -> f64 {
    if a == b {
        a
    } else {
        rng.random_range(a..b)
    }
}

fn pick_kind(rng: &mut ChaCha8Rng, weights: &[f64]) -> PrimitiveKind {
    let total: f64 = weights.iter().sum();
    let mut x = rng.random_range(0.0..total);
    for (k, &w) in PrimitiveKind::ALL.iter().zip(weights) {
        if x < w {
            return *k;
        }
        x -= w;
    }
    *PrimitiveKind::ALL.iter().zip(weights).rev().find(|(_, &w)| w > 0.0).expect("positive weight").0
}

/// Rotation matrix rows for yaw about y, pitch about x, roll about z.
fn rotation(yaw: f64, pitch: f64, roll: f64) -> [[f64; 3]; 3] {
    let (sy, cy) = yaw.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let (sr, cr) = roll.sin_cos();
    let ry = [[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]];
    let rx = [[1.0, 0.0, 0.0], [0.0, cp, -sp], [0.0, sp, cp]];
    let rz = [[cr, -sr, 0.0], [sr, cr, 0.0], [0.0, 0.0, 1.0]];
    mat_mul(ry, mat_mul(rx, rz))
}

fn mat_mul(a: [[f64; 3]; 3], b: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// Distance from `p` to the oriented box a unit primitive occupies after
/// [`place`].
fn box_distance(p: [f64; 3], scale: [f64; 3], rot: [[f64; 3]; 3], at: [f64; 3]) -> f64 {
    let d = [p[0] - at[0], p[1] - at[1], p[2] - at[2]];
    (0..3)
        .map(|k| {
            let local: f64 = (0..3).map(|i| rot[i][k] * d[i]).sum();
            (local.abs() - 0.5 * scale[k]).max(0.0).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

/// Scales, rotates and translates `mesh` into `out`.
fn place(out: &mut Mesh, mesh: &Mesh, scale: [f64; 3], rot: [[f64; 3]; 3], at: [f64; 3]) {
    let base = out.vertices.len() as u32;
    for v in &mesh.vertices {
        let s = [v[0] * scale[0], v[1] * scale[1], v[2] * scale[2]];
        let mut p = at;
        for (i, row) in rot.iter().enumerate() {
            p[i] += row[0] * s[0] + row[1] * s[1] + row[2] * s[2];
        }
        out.vertices.push(p);
    }
    out.triangles.extend(mesh.triangles.iter().map(|t| t.map(|k| k + base)));
}

/// Random scene and its viewcell, fully determined by `cfg`.
///
/// The viewcell sits above the origin at a random height with a random
/// heading. Objects whose bounding sphere would reach into the viewcell are
/// re-drawn. Base planes span the whole placement area so they stay in view.
pub fn generate_scene<T: Real>(cfg: &SceneGenConfig) -> Result<(TriScene<T>, ViewCell<T>)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let height = range(&mut rng, cfg.viewcell_height);
    let yaw = rng.random_range(0.0..360.0);
    let center = [0.0, height, 0.0];

    let mut mesh = Mesh::default();
    let mut objects: Vec<(String, std::ops::Range<usize>)> = Vec::new();
    let mut add = |mesh: &mut Mesh, name: String, part: &Mesh, scale, rot, at| {
        let start = mesh.triangles.len();
        place(mesh, part, scale, rot, at);
        objects.push((name, start..mesh.triangles.len()));
    };

    let count = rng.random_range(cfg.object_count.0..=cfg.object_count.1);
    let tau = std::f64::consts::TAU;
    for i in 0..count {
        let mut placed = None;
        for _ in 0..64 {
            let kind = pick_kind(&mut rng, &cfg.class_weights);
            let mut scale = [0.0; 3].map(|_| log_uniform(&mut rng, cfg.scale_range));
            if rng.random_bool(cfg.wall_stretch_prob) {
                let keep = rng.random_range(0..3);
                for (k, s) in scale.iter_mut().enumerate() {
                    if k != keep {
                        *s *= log_uniform(&mut rng, cfg.wall_stretch_range);
                    }
                }
            }
            let rot = rotation(rng.random_range(0.0..tau), rng.random_range(0.0..tau), rng.random_range(0.0..tau));
            let at = [
                rng.random_range(-cfg.extent..cfg.extent),
                range(&mut rng, cfg.object_height),
                rng.random_range(-cfg.extent..cfg.extent),
            ];
            if box_distance(center, scale, rot, at) > cfg.radius + cfg.clearance {
                placed = Some((kind, scale, rot, at));
                break;
            }
        }
        let (kind, scale, rot, at) = placed.unwrap_or_else(|| {
            let s = cfg.scale_range.0;
            (PrimitiveKind::Cube, [s; 3], rotation(0.0, 0.0, 0.0), [cfg.extent, s, cfg.extent])
        });
        add(&mut mesh, format!("{kind}_{i}"), &primitive_mesh(kind), scale, rot, at);
    }

    let plane = primitive_mesh(PrimitiveKind::Plane);
    let span = 2.0 * cfg.extent + 4.0;
    let flat = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    if rng.random_bool(cfg.floor_prob) {
        add(&mut mesh, "floor".into(), &plane, [span, 1.0, span], flat, [0.0, 0.0, 0.0]);
    }
    if rng.random_bool(cfg.ceiling_prob) {
        let h = height + rng.random_range(2.0..6.0);
        add(&mut mesh, "ceiling".into(), &plane, [span, 1.0, span], flat, [0.0, h, 0.0]);
    }
    if rng.random_bool(cfg.wall_prob) {
        // upright plane facing the viewcell somewhere inside the view range
        let dist = rng.random_range(0.3..0.9) * cfg.far;
        let heading = (yaw + rng.random_range(-cfg.fov_deg / 2.0..cfg.fov_deg / 2.0)).to_radians();
        let dir = [-heading.sin(), 0.0, -heading.cos()];
        let rot = mat_mul(rotation(heading, 0.0, 0.0), [[1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]]);
        let at = [dir[0] * dist, span / 4.0, dir[2] * dist];
        add(&mut mesh, "wall".into(), &plane, [span, 1.0, span / 2.0], rot, at);
    }

    let vertices = mesh.vertices.iter().map(|v| Vec3::from_f64(v[0], v[1], v[2])).collect();
    let n = mesh.triangles.len();
    let objects = objects
        .into_iter()
        .map(|(name, triangles)| SceneObject {
            name,
            triangles,
            velocity: None,
        })
        .collect();
    let scene = TriScene::from_parts(vertices, mesh.triangles, (0..n as u32).collect(), objects)?;
    let cell = ViewCell::new(
        Vec3::from_f64(center[0], center[1], center[2]),
        Basis::from_yaw_deg(T::lit(yaw)),
        T::lit(cfg.radius),
        T::lit(cfg.fov_deg),
        T::lit(cfg.beta_deg),
        T::lit(cfg.near),
        T::lit(cfg.far),
    )?;
    Ok((scene, cell))
}
