use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{PvsError, Result};
use crate::froxel::GridDims;
use crate::geom::{Camera, Vec3, ViewCell};
use crate::Real;

/// Depth-buffer resolution per grid cross-section cell.
pub const DEFAULT_RESOLUTION_FACTOR: usize = 4;
pub const DEFAULT_VIEWPOINTS: usize = 128;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SamplingMode {
    /// Low-discrepancy sequence over the disc and the yaw interval.
    #[default]
    UniformGrid,
    /// Seeded uniform samples.
    UniformRandom,
}

impl SamplingMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "grid" | "uniform-grid" => Ok(Self::UniformGrid),
            "random" | "uniform-random" => Ok(Self::UniformRandom),
            other => Err(PvsError::invalid(format!("unknown sampling mode `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::UniformGrid => "grid",
            Self::UniformRandom => "random",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleConfig {
    pub viewpoints: usize,
    pub mode: SamplingMode,
    pub seed: u64,
    /// Depth-buffer width and height in pixels.
    pub resolution: (usize, usize),
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self::for_dims(GridDims::cube(32))
    }
}

impl OracleConfig {
    /// Defaults with the depth buffer at four pixels per froxel column.
    pub fn for_dims(dims: GridDims) -> Self {
        Self {
            viewpoints: DEFAULT_VIEWPOINTS,
            mode: SamplingMode::UniformGrid,
            seed: 0,
            resolution: (dims.nx * DEFAULT_RESOLUTION_FACTOR, dims.ny * DEFAULT_RESOLUTION_FACTOR),
        }
    }

    pub fn validate(&self, dims: GridDims) -> Result<()> {
        if self.viewpoints == 0 {
            return Err(PvsError::invalid("viewpoint count must be at least 1"));
        }
        let (w, h) = self.resolution;
        if w < dims.nx || h < dims.ny {
            return Err(PvsError::invalid(format!(
                "depth-buffer resolution {w}x{h} is coarser than the {dims} grid"
            )));
        }
        Ok(())
    }
}

/// Radical inverse of `i` in `base`.
fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let (mut f, mut r) = (inv, 0.0);
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// Disc offset `(along right, along forward)` as fractions of the radius and
/// yaw as a fraction of `beta`, for sample `i`.
fn grid_sample(i: usize) -> (f64, f64, f64) {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let rho = radical_inverse(i as u64, 2).sqrt();
    let phi = i as f64 * golden;
    let yaw = 2.0 * (0.5 + radical_inverse(i as u64, 3)).fract() - 1.0;
    (rho * phi.cos(), rho * phi.sin(), yaw)
}

/// Cameras spread over the viewcell. Sample 0 is always the center camera
/// with zero yaw, and both modes are prefix-stable: the first `k` cameras for
/// `M` viewpoints equal the cameras for `k` viewpoints.
pub fn sample_viewpoints<T: Real>(cell: &ViewCell<T>, cfg: &OracleConfig) -> Vec<Camera<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.viewpoints)
        .map(|i| {
            let (a, b, yaw) = match (i, cfg.mode) {
                (0, _) => (0.0, 0.0, 0.0),
                (_, SamplingMode::UniformGrid) => grid_sample(i),
                (_, SamplingMode::UniformRandom) => {
                    let rho = rng.random::<f64>().sqrt();
                    let phi = std::f64::consts::TAU * rng.random::<f64>();
                    let yaw = rng.random_range(-1.0..=1.0);
                    (rho * phi.cos(), rho * phi.sin(), yaw)
                }
            };
            viewpoint(cell, T::lit(a), T::lit(b), T::lit(yaw))
        })
        .collect()
}

/// Camera at disc offset `(a, b)` (radius fractions) and yaw `yaw·β`.
pub fn viewpoint<T: Real>(cell: &ViewCell<T>, a: T, b: T, yaw: T) -> Camera<T> {
    let offset: Vec3<T> = cell.basis.right * (a * cell.radius) + cell.basis.forward * (b * cell.radius);
    Camera {
        position: cell.center + offset,
        basis: cell.basis.yawed(yaw * cell.beta_deg),
        fov_deg: cell.fov_deg,
        near: cell.near,
        // reaches the shared far plane from anywhere in the disc
        far: cell.far + cell.radius * T::lit(2.0),
    }
}
