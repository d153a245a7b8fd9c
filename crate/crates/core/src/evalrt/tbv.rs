use std::ops::RangeInclusive;

use crate::error::{PvsError, Result};
use crate::froxel::{quantize_axis, FroxelGrid, GridDims};
use crate::geom::{Aabb, Frustum, TriScene, Vec3};
use crate::Real;

/// Temporal bounding volume: a box holding a moving object for every
/// `t ∈ [t0, t1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tbv<T> {
    pub object: usize,
    pub t0: T,
    pub t1: T,
    pub aabb: Aabb<T>,
}

/// Sweeps `aabb0` (the box at `t0`) with constant `velocity` until `t1`.
pub fn tbv_build<T: Real>(object: usize, aabb0: Aabb<T>, velocity: Vec3<T>, t0: T, t1: T) -> Result<Tbv<T>> {
    if !(t1 >= t0) {
        return Err(PvsError::invalid(format!("time span [{t0}, {t1}] is reversed")));
    }
    if aabb0.is_empty() || !velocity.is_finite() {
        return Err(PvsError::invalid("empty box or non-finite velocity"));
    }
    let end = aabb0.translated(velocity * (t1 - t0));
    Ok(Tbv {
        object,
        t0,
        t1,
        aabb: aabb0.union(end),
    })
}

/// TBV of scene object `object`, whose triangles sit at their `t0` position.
/// Static objects get their own box.
pub fn object_tbv<T: Real>(scene: &TriScene<T>, object: usize, t0: T, t1: T) -> Result<Tbv<T>> {
    let o = scene
        .objects()
        .get(object)
        .ok_or_else(|| PvsError::invalid(format!("no object {object}")))?;
    tbv_build(object, scene.object_aabb(object), o.velocity.unwrap_or_else(Vec3::zero), t0, t1)
}

/// Froxel index ranges a box may influence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Footprint {
    pub x: RangeInclusive<usize>,
    pub y: RangeInclusive<usize>,
    pub z: RangeInclusive<usize>,
}

/// Conservative froxel footprint of `aabb`: the screen rectangle of its
/// projected corners, from its nearest depth back to the far plane. The
/// depth extension also covers surfaces the box would hide, which is what a
/// surface-only PVS marks behind an object moving through empty space.
/// `None` when the box is outside the frustum.
pub fn tbv_footprint<T: Real>(aabb: &Aabb<T>, frustum: &Frustum<T>, dims: GridDims) -> Option<Footprint> {
    let corners = aabb.corners();
    if frustum
        .planes()
        .iter()
        .any(|p| corners.iter().all(|&c| p.signed_distance(c) < T::zero()))
    {
        return None;
    }
    let local = corners.map(|c| frustum.to_local(c));
    let full = |n: usize| 0..=n - 1;
    let zmin = local.iter().map(|l| l.z).fold(T::infinity(), T::min);
    let iz = quantize_axis(frustum.depth_to_w(zmin).max(T::zero()), dims.nz)..=dims.nz - 1;
    if !(zmin > T::zero()) {
        return Some(Footprint {
            x: full(dims.nx),
            y: full(dims.ny),
            z: iz,
        });
    }
    let half = T::lit(0.5);
    let range = |coord: fn(&Vec3<T>) -> T, n: usize| {
        let (lo, hi) = local.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), l| {
            let u = half + coord(l) * half / (l.z * frustum.tan_half_fov());
            (lo.min(u), hi.max(u))
        });
        quantize_axis(lo, n)..=quantize_axis(hi, n)
    };
    Some(Footprint {
        x: range(|l| l.x, dims.nx),
        y: range(|l| l.y, dims.ny),
        z: iz,
    })
}

/// True when any froxel of the TBV footprint is marked in `pvs`.
pub fn tbv_test<T: Real>(tbv: &Tbv<T>, frustum: &Frustum<T>, pvs: &FroxelGrid) -> bool {
    let Some(f) = tbv_footprint(&tbv.aabb, frustum, pvs.dims()) else {
        return false;
    };
    f.z.clone()
        .any(|z| f.y.clone().any(|y| f.x.clone().any(|x| pvs.get_unchecked(x, y, z))))
}
