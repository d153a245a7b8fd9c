//! Conservative rasterization of triangle scenes into froxel grids.

use std::collections::BTreeSet;

use crate::error::{PvsError, Result};
use crate::froxel::{FroxelGrid, GridDims, GridRole};
use crate::geom::{Frustum, Ndc, TriScene, Vec3};
use crate::raster::{interpolate, rasterize, rasterize_perspective};
use crate::Real;

/// Resolution multiplier applied on top of `s` for the three orthographic
/// views, whose samples are spread uniformly over the frustum's bounding box
/// instead of concentrating near the apex.
pub const ORTHO_OVERSAMPLE: usize = 2;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ProjectionMode {
    /// Rasterize through the frustum's own projection at `(sN_x, sN_y)`.
    #[default]
    Perspective,
    /// Rasterize three axis-aligned orthographic views of the frustum's
    /// bounding box and reproject every sample into the frustum.
    OrthographicReproject,
}

impl ProjectionMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "perspective" => Ok(Self::Perspective),
            "ortho" | "orthographic-reproject" => Ok(Self::OrthographicReproject),
            other => Err(PvsError::invalid(format!("unknown projection mode `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Perspective => "perspective",
            Self::OrthographicReproject => "orthographic-reproject",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FroxelizeConfig {
    pub supersample: usize,
    pub mode: ProjectionMode,
}

impl Default for FroxelizeConfig {
    fn default() -> Self {
        Self {
            supersample: 4,
            mode: ProjectionMode::Perspective,
        }
    }
}

impl FroxelizeConfig {
    pub fn new(supersample: usize, mode: ProjectionMode) -> Self {
        Self { supersample, mode }
    }

    pub fn validate(&self) -> Result<()> {
        if self.supersample == 0 || self.supersample > u8::MAX as usize {
            return Err(PvsError::invalid(format!(
                "supersampling factor {} not in 1..=255",
                self.supersample
            )));
        }
        Ok(())
    }
}

/// Maps NDC to froxel coordinates `(⌊u·N_x⌋, ⌊v·N_y⌋, ⌊w·N_z⌋)`, clamping
/// the upper boundary `1.0` into the last froxel.
#[inline]
pub fn quantize<T: Real>(ndc: Ndc<T>, dims: GridDims) -> [usize; 3] {
    [
        quantize_axis(ndc.u, dims.nx),
        quantize_axis(ndc.v, dims.ny),
        quantize_axis(ndc.w, dims.nz),
    ]
}

#[inline]
pub(crate) fn quantize_axis<T: Real>(t: T, n: usize) -> usize {
    let f = (t * T::lit(n as f64)).floor();
    if f <= T::zero() {
        0
    } else {
        f.to_usize().unwrap_or(usize::MAX).min(n - 1)
    }
}

/// Receives the fragments produced by a froxelization pass.
pub trait FragmentSink {
    fn emit(&mut self, froxel: [usize; 3], primitive: u32);
}

impl FragmentSink for FroxelGrid {
    #[inline]
    fn emit(&mut self, f: [usize; 3], _primitive: u32) {
        self.set_unchecked(f[0], f[1], f[2]);
    }
}

/// Fans one fragment stream out to two sinks.
pub struct Tee<'a, A: ?Sized, B: ?Sized>(pub &'a mut A, pub &'a mut B);

impl<A: FragmentSink + ?Sized, B: FragmentSink + ?Sized> FragmentSink for Tee<'_, A, B> {
    #[inline]
    fn emit(&mut self, f: [usize; 3], p: u32) {
        self.0.emit(f, p);
        self.1.emit(f, p);
    }
}

/// Which primitives touch each froxel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FroxelIdMap {
    dims: GridDims,
    /// `(linear froxel index, primitive id)`, sorted and deduplicated once
    /// [`FroxelIdMap::finish`] has run.
    pairs: Vec<(u32, u32)>,
}

impl FragmentSink for FroxelIdMap {
    #[inline]
    fn emit(&mut self, f: [usize; 3], primitive: u32) {
        let i = self.dims.linear(f[0], f[1], f[2]) as u32;
        self.pairs.push((i, primitive));
    }
}

impl FroxelIdMap {
    pub fn new(dims: GridDims) -> Self {
        Self {
            dims,
            pairs: Vec::new(),
        }
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn finish(&mut self) {
        self.pairs.sort_unstable();
        self.pairs.dedup();
    }

    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    pub fn merge(&mut self, other: &FroxelIdMap) -> Result<()> {
        if self.dims != other.dims {
            return Err(PvsError::DimMismatch {
                expected: self.dims.to_string(),
                actual: other.dims.to_string(),
            });
        }
        self.pairs.extend_from_slice(&other.pairs);
        self.finish();
        Ok(())
    }

    /// Primitive ids recorded for the froxel at `coords`, ascending.
    pub fn ids_at(&self, coords: [usize; 3]) -> impl Iterator<Item = u32> + '_ {
        let i = self.dims.linear(coords[0], coords[1], coords[2]) as u32;
        let lo = self.pairs.partition_point(|&(f, _)| f < i);
        let hi = self.pairs.partition_point(|&(f, _)| f <= i);
        self.pairs[lo..hi].iter().map(|&(_, p)| p)
    }

    /// Froxels with at least one primitive, as a grid.
    pub fn occupied(&self, role: GridRole) -> Result<FroxelGrid> {
        let mut g = FroxelGrid::new(self.dims, role)?;
        for &(f, _) in &self.pairs {
            g.set_linear(f as usize);
        }
        Ok(g)
    }

    /// Ids of primitives that touch at least one froxel set in `pvs`.
    pub fn primitives_in(&self, pvs: &FroxelGrid) -> Result<BTreeSet<u32>> {
        if pvs.dims() != self.dims {
            return Err(PvsError::DimMismatch {
                expected: self.dims.to_string(),
                actual: pvs.dims().to_string(),
            });
        }
        Ok(self
            .pairs
            .iter()
            .filter(|&&(f, _)| pvs.get_linear(f as usize))
            .map(|&(_, p)| p)
            .collect())
    }
}

/// Runs the froxelization traversal, handing every fragment to `sink`.
pub fn froxelize_into<T: Real, S: FragmentSink + ?Sized>(
    scene: &TriScene<T>,
    frustum: &Frustum<T>,
    dims: GridDims,
    cfg: &FroxelizeConfig,
    sink: &mut S,
) -> Result<()> {
    dims.validate_packed()?;
    cfg.validate()?;
    match cfg.mode {
        ProjectionMode::Perspective => perspective_pass(scene, frustum, dims, cfg.supersample, sink),
        ProjectionMode::OrthographicReproject => ortho_pass(scene, frustum, dims, cfg.supersample, sink),
    }
    Ok(())
}

fn perspective_pass<T: Real, S: FragmentSink + ?Sized>(
    scene: &TriScene<T>,
    frustum: &Frustum<T>,
    dims: GridDims,
    s: usize,
    sink: &mut S,
) {
    let (w, h) = (dims.nx * s, dims.ny * s);
    for i in 0..scene.len() {
        let tri = scene.triangle(i);
        if frustum.excludes_triangle(&tri) {
            continue;
        }
        let id = scene.primitive_id(i);
        let local = tri.map(|v| frustum.to_local(v));
        rasterize_perspective(local, frustum.tan_half_fov(), frustum.near(), w, h, |px, py, z| {
            let depth_w = frustum.depth_to_w(z);
            if depth_w > T::one() {
                return;
            }
            // sample centers never fall on a froxel boundary, so integer
            // division equals ⌊u·N_x⌋
            let iz = quantize_axis(depth_w, dims.nz);
            sink.emit([px / s, py / s, iz], id);
        });
    }
}

fn ortho_pass<T: Real, S: FragmentSink + ?Sized>(
    scene: &TriScene<T>,
    frustum: &Frustum<T>,
    dims: GridDims,
    s: usize,
    sink: &mut S,
) {
    let bounds = frustum.aabb();
    let ext = bounds.extent();
    let res = (s * dims.max_dim() * ORTHO_OVERSAMPLE) as f64;
    let spacing = ext.x.max(ext.y).max(ext.z) / T::lit(res);
    let cells = |e: T| -> usize { (e / spacing).ceil().to_usize().unwrap_or(1).max(1) };

    for i in 0..scene.len() {
        let tri = scene.triangle(i);
        if frustum.excludes_triangle(&tri) {
            continue;
        }
        let id = scene.primitive_id(i);
        for axis in 0..3 {
            let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
            let (wa, wb) = (cells(ext[a]), cells(ext[b]));
            let pts = tri.map(|v| [(v[a] - bounds.min[a]) / spacing, (v[b] - bounds.min[b]) / spacing]);
            rasterize(pts, wa, wb, |_, _, bary| {
                let p = Vec3::new(
                    interpolate(bary, tri.map(|v| v.x)),
                    interpolate(bary, tri.map(|v| v.y)),
                    interpolate(bary, tri.map(|v| v.z)),
                );
                if let Some(ndc) = frustum.project_to_ndc(p) {
                    sink.emit(quantize(ndc, dims), id);
                }
            });
        }
    }
}

/// Binary occupancy of `scene` inside `frustum`.
pub fn froxelize<T: Real>(
    scene: &TriScene<T>,
    frustum: &Frustum<T>,
    dims: GridDims,
    cfg: &FroxelizeConfig,
) -> Result<FroxelGrid> {
    let mut grid = FroxelGrid::new(dims, GridRole::Geometry)?;
    grid.set_supersample(cfg.supersample.min(255) as u8);
    froxelize_into(scene, frustum, dims, cfg, &mut grid)?;
    Ok(grid)
}

/// Same traversal as [`froxelize`], recording primitive ids per froxel.
pub fn froxel_id_map<T: Real>(
    scene: &TriScene<T>,
    frustum: &Frustum<T>,
    dims: GridDims,
    cfg: &FroxelizeConfig,
) -> Result<FroxelIdMap> {
    let mut map = FroxelIdMap::new(dims);
    froxelize_into(scene, frustum, dims, cfg, &mut map)?;
    map.finish();
    Ok(map)
}
