use rayon::prelude::*;

use super::depth::render_depth;
use super::sampling::{sample_viewpoints, OracleConfig};
use crate::error::Result;
use crate::froxel::{
    froxelize_into, quantize, FragmentSink, FroxelGrid, FroxelIdMap, FroxelizeConfig, GridDims, GridRole,
};
use crate::geom::{build_viewcell_frustum, Camera, Frustum, TriScene, Vec3, ViewCell};
use crate::Real;

/// Renders one viewpoint and hands every visible fragment, reprojected into
/// `frustum`, to `sink`. Fragments that leave the frustum are skipped.
pub fn splat_viewpoint<T: Real, S: FragmentSink + ?Sized>(
    scene: &TriScene<T>,
    frustum: &Frustum<T>,
    camera: &Camera<T>,
    resolution: (usize, usize),
    dims: GridDims,
    sink: &mut S,
) {
    let buf = render_depth(scene, camera, resolution);
    let (w, h) = resolution;
    let t = (camera.fov_deg.to_radians() * T::lit(0.5)).tan();
    let ndc = |i: usize, n: usize| (T::lit(2.0) * (T::lit(i as f64) + T::lit(0.5)) / T::lit(n as f64) - T::one()) * t;
    let xs: Vec<Vec3<T>> = (0..w).map(|px| camera.basis.right * ndc(px, w)).collect();
    for py in 0..h {
        let row: Vec3<T> = camera.basis.up * ndc(py, h) + camera.basis.forward;
        for (px, &x) in xs.iter().enumerate() {
            let Some((z, id)) = buf.get(px, py) else { continue };
            let p = camera.position + (x + row) * z;
            if let Some(n) = frustum.project_to_ndc(p) {
                sink.emit(quantize(n, dims), id);
            }
        }
    }
}

fn empty_gt(dims: GridDims, s: usize) -> FroxelGrid {
    let mut g = FroxelGrid::new(dims, GridRole::GtPvs).expect("dims validated by caller");
    g.set_supersample(s.min(255) as u8);
    g
}

/// OR of the visible fragments of every camera. Each camera fills a private
/// grid; the merge is order independent, so the result does not depend on
/// the parallel schedule.
pub fn gt_from_cameras<T: Real>(
    scene: &TriScene<T>,
    frustum: &Frustum<T>,
    cameras: &[Camera<T>],
    resolution: (usize, usize),
    dims: GridDims,
) -> Result<FroxelGrid> {
    dims.validate_packed()?;
    Ok(cameras
        .par_iter()
        .map(|cam| {
            let mut g = empty_gt(dims, 0);
            splat_viewpoint(scene, frustum, cam, resolution, dims, &mut g);
            g
        })
        .reduce(
            || empty_gt(dims, 0),
            |mut a, b| {
                a.union_with(&b).expect("same dims");
                a
            },
        ))
}

/// Froxel → primitive-id pairs of every visible fragment.
pub fn gt_id_map_from_cameras<T: Real>(
    scene: &TriScene<T>,
    frustum: &Frustum<T>,
    cameras: &[Camera<T>],
    resolution: (usize, usize),
    dims: GridDims,
) -> Result<FroxelIdMap> {
    dims.validate_packed()?;
    let mut map = cameras
        .par_iter()
        .map(|cam| {
            let mut m = FroxelIdMap::new(dims);
            splat_viewpoint(scene, frustum, cam, resolution, dims, &mut m);
            m.finish();
            m
        })
        .reduce(
            || FroxelIdMap::new(dims),
            |mut a, b| {
                a.merge(&b).expect("same dims");
                a
            },
        );
    map.finish();
    Ok(map)
}

/// Sampled from-region ground truth for `cell`.
pub fn compute_gt_pvs<T: Real>(
    scene: &TriScene<T>,
    cell: &ViewCell<T>,
    dims: GridDims,
    ocfg: &OracleConfig,
    fcfg: &FroxelizeConfig,
) -> Result<FroxelGrid> {
    ocfg.validate(dims)?;
    fcfg.validate()?;
    let frustum = build_viewcell_frustum(cell)?;
    let cameras = sample_viewpoints(cell, ocfg);
    let mut gt = gt_from_cameras(scene, &frustum, &cameras, ocfg.resolution, dims)?;
    gt.set_supersample(fcfg.supersample.min(255) as u8);
    Ok(gt)
}

/// Network input and target for one viewcell.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingPair {
    pub geometry: FroxelGrid,
    pub gt: FroxelGrid,
}

/// Geometry grid and ground truth. Every ground-truth fragment is also set in
/// the geometry grid, which makes `gt ⊆ geometry` hold exactly even where the
/// two projection paths disagree at froxel boundaries.
pub fn compute_training_pair<T: Real>(
    scene: &TriScene<T>,
    cell: &ViewCell<T>,
    dims: GridDims,
    ocfg: &OracleConfig,
    fcfg: &FroxelizeConfig,
) -> Result<TrainingPair> {
    let gt = compute_gt_pvs(scene, cell, dims, ocfg, fcfg)?;
    let frustum = build_viewcell_frustum(cell)?;
    let mut geometry = FroxelGrid::new(dims, GridRole::Geometry)?;
    geometry.set_supersample(fcfg.supersample.min(255) as u8);
    froxelize_into(scene, &frustum, dims, fcfg, &mut geometry)?;
    geometry.union_with(&gt)?;
    Ok(TrainingPair { geometry, gt })
}

/// Froxel → primitive-id map covering both the geometry traversal and the
/// ground-truth fragments, so every geometry froxel resolves to primitives.
pub fn training_id_map<T: Real>(
    scene: &TriScene<T>,
    cell: &ViewCell<T>,
    dims: GridDims,
    ocfg: &OracleConfig,
    fcfg: &FroxelizeConfig,
) -> Result<FroxelIdMap> {
    ocfg.validate(dims)?;
    let frustum = build_viewcell_frustum(cell)?;
    let mut map = FroxelIdMap::new(dims);
    froxelize_into(scene, &frustum, dims, fcfg, &mut map)?;
    map.finish();
    let cameras = sample_viewpoints(cell, ocfg);
    map.merge(&gt_id_map_from_cameras(scene, &frustum, &cameras, ocfg.resolution, dims)?)?;
    Ok(map)
}
