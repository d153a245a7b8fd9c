use rayon::prelude::*;

use super::sampling::{sample_viewpoints, OracleConfig};
use crate::error::{PvsError, Result};
use crate::froxel::{quantize, FragmentSink, FroxelGrid, GridDims, GridRole};
use crate::geom::{build_viewcell_frustum, Camera, Frustum, TriScene, Vec3, ViewCell};
use crate::Real;

/// Möller–Trumbore intersection. Returns the ray parameter of the hit.
pub fn intersect_triangle<T: Real>(origin: Vec3<T>, dir: Vec3<T>, tri: &[Vec3<T>; 3]) -> Option<T> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(e2);
    let det = e1.dot(p);
    if det == T::zero() || !det.is_finite() {
        return None;
    }
    let inv = T::one() / det;
    let s = origin - tri[0];
    let u = s.dot(p) * inv;
    if u < T::zero() || u > T::one() {
        return None;
    }
    let q = s.cross(e1);
    let v = dir.dot(q) * inv;
    if v < T::zero() || u + v > T::one() {
        return None;
    }
    Some(e2.dot(q) * inv)
}

/// Nearest hit along a camera ray whose forward component is 1, so the ray
/// parameter equals view depth. Hits outside `[near, far]` are ignored.
fn nearest_hit<T: Real>(tris: &[[Vec3<T>; 3]], origin: Vec3<T>, dir: Vec3<T>, near: T, far: T) -> Option<T> {
    let mut best: Option<T> = None;
    for tri in tris {
        if let Some(t) = intersect_triangle(origin, dir, tri) {
            if t >= near && t <= far && best.is_none_or(|b| t < b) {
                best = Some(t);
            }
        }
    }
    best
}

fn cast_viewpoint<T: Real>(
    scene: &TriScene<T>,
    frustum: &Frustum<T>,
    cam: &Camera<T>,
    rays: (usize, usize),
    dims: GridDims,
    grid: &mut FroxelGrid,
) {
    let view = cam.frustum();
    let tris: Vec<[Vec3<T>; 3]> = (0..scene.len())
        .map(|i| scene.triangle(i))
        .filter(|t| !view.excludes_triangle(t))
        .collect();
    let t = view.tan_half_fov();
    let (w, h) = rays;
    for py in 0..h {
        for px in 0..w {
            let (u, v) = Camera::<T>::pixel_uv(px, py, w, h);
            let x = (T::lit(2.0) * u - T::one()) * t;
            let y = (T::lit(2.0) * v - T::one()) * t;
            let dir = cam.basis.right * x + cam.basis.up * y + cam.basis.forward;
            if let Some(z) = nearest_hit(&tris, cam.position, dir, cam.near, cam.far) {
                if let Some(n) = frustum.project_to_ndc(cam.position + dir * z) {
                    grid.emit(quantize(n, dims), 0);
                }
            }
        }
    }
}

/// Brute-force ground truth: for every sampled viewpoint, cast
/// `rays_per_froxel_face` rays per froxel column along each image axis,
/// keep the nearest hit and mark its froxel.
pub fn ray_cast_pvs<T: Real>(
    scene: &TriScene<T>,
    cell: &ViewCell<T>,
    dims: GridDims,
    rays_per_froxel_face: usize,
    ocfg: &OracleConfig,
) -> Result<FroxelGrid> {
    if rays_per_froxel_face == 0 {
        return Err(PvsError::invalid("rays per froxel face must be positive"));
    }
    dims.validate_packed()?;
    if ocfg.viewpoints == 0 {
        return Err(PvsError::invalid("viewpoint count must be at least 1"));
    }
    let frustum = build_viewcell_frustum(cell)?;
    let rays = (dims.nx * rays_per_froxel_face, dims.ny * rays_per_froxel_face);
    let cameras = sample_viewpoints(cell, ocfg);
    let empty = || FroxelGrid::new(dims, GridRole::GtPvs).expect("dims validated");
    Ok(cameras
        .par_iter()
        .map(|cam| {
            let mut g = empty();
            cast_viewpoint(scene, &frustum, cam, rays, dims, &mut g);
            g
        })
        .reduce(empty, |mut a, b| {
            a.union_with(&b).expect("same dims");
            a
        }))
}
