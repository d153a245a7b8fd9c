use std::collections::BTreeSet;

use crate::error::{PvsError, Result};
use crate::froxel::{FroxelGrid, FroxelIdMap};
use crate::geom::{Camera, TriScene, ViewCell};
use crate::oracle::{render_depth, render_depth_filtered, DepthBuffer, EMPTY_ID};
use crate::Real;

/// Primitive ids of every object with a velocity.
pub fn dynamic_primitive_ids<T: Real>(scene: &TriScene<T>) -> BTreeSet<u32> {
    scene
        .objects()
        .iter()
        .filter(|o| o.is_dynamic())
        .flat_map(|o| o.triangles.clone().map(|i| scene.primitive_id(i)))
        .collect()
}

/// Primitives touching at least one froxel marked in `pvs`. With
/// `include_dynamic` every moving object is kept as well.
pub fn cull<T: Real>(
    scene: &TriScene<T>,
    pvs: &FroxelGrid,
    id_map: &FroxelIdMap,
    include_dynamic: bool,
) -> Result<BTreeSet<u32>> {
    let mut kept = id_map.primitives_in(pvs)?;
    if include_dynamic {
        kept.extend(dynamic_primitive_ids(scene));
    }
    Ok(kept)
}

/// Pixels whose visible primitive differs between two renders.
pub fn id_mismatches<T: Real>(a: &DepthBuffer<T>, b: &DepthBuffer<T>) -> usize {
    a.ids().iter().zip(b.ids()).filter(|(x, y)| x != y).count()
}

/// Fraction of pixels showing a different primitive (or background) once
/// the scene is reduced to `kept`.
pub fn pixel_error_rate_of<T: Real>(
    scene: &TriScene<T>,
    camera: &Camera<T>,
    kept: &BTreeSet<u32>,
    resolution: (usize, usize),
) -> f64 {
    let (w, h) = resolution;
    if w * h == 0 {
        return 0.0;
    }
    let full = render_depth(scene, camera, resolution);
    let culled = render_depth_filtered(scene, camera, resolution, |id| kept.contains(&id));
    id_mismatches(&full, &culled) as f64 / (w * h) as f64
}

/// PER of the primitive set [`cull`] keeps for `pvs`.
pub fn pixel_error_rate<T: Real>(
    scene: &TriScene<T>,
    camera: &Camera<T>,
    pvs: &FroxelGrid,
    id_map: &FroxelIdMap,
    resolution: (usize, usize),
) -> Result<f64> {
    let kept = cull(scene, pvs, id_map, false)?;
    Ok(pixel_error_rate_of(scene, camera, &kept, resolution))
}

/// Adds whatever a single render over the enlarged frustum shows beyond
/// `threshold` (view depth from the frustum apex) to `near_set`.
pub fn far_field_merge<T: Real>(
    scene: &TriScene<T>,
    cell: &ViewCell<T>,
    near_set: &BTreeSet<u32>,
    threshold: T,
    resolution: (usize, usize),
) -> Result<BTreeSet<u32>> {
    let frustum = crate::geom::build_viewcell_frustum(cell)?;
    if !(threshold > frustum.near() && threshold < frustum.far()) {
        return Err(PvsError::invalid(format!(
            "far-field threshold {threshold} outside ({}, {})",
            frustum.near(),
            frustum.far()
        )));
    }
    let cam = Camera::new(
        frustum.origin(),
        *frustum.basis(),
        frustum.fov_deg(),
        frustum.near(),
        frustum.far(),
    )?;
    let buf = render_depth(scene, &cam, resolution);
    let mut out = near_set.clone();
    out.extend(
        buf.depths()
            .iter()
            .zip(buf.ids())
            .filter(|&(&z, &id)| id != EMPTY_ID && z > threshold)
            .map(|(_, &id)| id),
    );
    Ok(out)
}
