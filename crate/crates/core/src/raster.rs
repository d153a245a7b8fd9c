//! Scalar triangle rasterization shared by froxelization and depth rendering.
//!
//! Samples sit at pixel centers `(i + ½, j + ½)`. Edges use a top-left style
//! tie rule so two triangles sharing an edge never both cover a sample on it.

use crate::geom::Vec3;
use crate::Real;

#[inline]
fn edge<T: Real>(a: [T; 2], b: [T; 2], p: [T; 2]) -> T {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

#[inline]
fn owns_ties<T: Real>(a: [T; 2], b: [T; 2]) -> bool {
    let dx = b[0] - a[0];
    let dy = b[1] - a[1];
    dy > T::zero() || (dy == T::zero() && dx < T::zero())
}

/// Calls `emit(px, py, bary)` for every pixel center covered by the
/// triangle `pts` (pixel units). Barycentrics sum to one with the last
/// weight computed as the remainder.
pub(crate) fn rasterize<T: Real>(
    pts: [[T; 2]; 3],
    width: usize,
    height: usize,
    mut emit: impl FnMut(usize, usize, [T; 3]),
) {
    let mut p = pts;
    let mut area = edge(p[0], p[1], p[2]);
    if !(area.abs() > T::epsilon()) || !area.is_finite() {
        return;
    }
    let mut swapped = false;
    if area < T::zero() {
        p.swap(1, 2);
        area = -area;
        swapped = true;
    }
    let half = T::lit(0.5);
    let lo_x = p.iter().map(|q| q[0]).fold(T::infinity(), T::min);
    let hi_x = p.iter().map(|q| q[0]).fold(T::neg_infinity(), T::max);
    let lo_y = p.iter().map(|q| q[1]).fold(T::infinity(), T::min);
    let hi_y = p.iter().map(|q| q[1]).fold(T::neg_infinity(), T::max);
    // pixel i has center i + 0.5: covered range is ceil(lo - 0.5) ..= floor(hi - 0.5)
    let clamp_lo = |v: T| -> usize { (v - half).ceil().max(T::zero()).to_usize().unwrap_or(0) };
    let clamp_hi = |v: T, n: usize| -> Option<usize> {
        let f = (v - half).floor();
        if f < T::zero() {
            None
        } else {
            Some(f.to_usize().unwrap_or(usize::MAX).min(n - 1))
        }
    };
    if width == 0 || height == 0 {
        return;
    }
    let x0 = clamp_lo(lo_x);
    let y0 = clamp_lo(lo_y);
    let (Some(x1), Some(y1)) = (clamp_hi(hi_x, width), clamp_hi(hi_y, height)) else {
        return;
    };
    let ties = [owns_ties(p[1], p[2]), owns_ties(p[2], p[0]), owns_ties(p[0], p[1])];
    let inv_area = T::one() / area;
    for py in y0..=y1 {
        let cy = T::lit(py as f64) + half;
        for px in x0..=x1 {
            let c = [T::lit(px as f64) + half, cy];
            let w = [edge(p[1], p[2], c), edge(p[2], p[0], c), edge(p[0], p[1], c)];
            let inside = (0..3).all(|k| w[k] > T::zero() || (w[k] == T::zero() && ties[k]));
            if !inside {
                continue;
            }
            let b0 = w[0] * inv_area;
            let b1 = w[1] * inv_area;
            let mut b = [b0, b1, T::one() - b0 - b1];
            if swapped {
                b.swap(1, 2);
            }
            emit(px, py, b);
        }
    }
}

/// Interpolates a per-vertex attribute as `a2 + b0(a0-a2) + b1(a1-a2)`, which
/// is exact when all three attributes are equal.
#[inline]
pub(crate) fn interpolate<T: Real>(b: [T; 3], a: [T; 3]) -> T {
    a[2] + b[0] * (a[0] - a[2]) + b[1] * (a[1] - a[2])
}

/// Clips a local-space triangle against `z >= z_min`, returning the 0, 1 or
/// 2 triangles of the fan that remain.
pub(crate) fn clip_near<T: Real>(tri: [Vec3<T>; 3], z_min: T) -> ([[Vec3<T>; 3]; 2], usize) {
    let inside = tri.map(|v| v.z >= z_min);
    let n_in = inside.iter().filter(|&&b| b).count();
    let empty = [[Vec3::zero(); 3]; 2];
    match n_in {
        0 => (empty, 0),
        3 => ([tri, tri], 1),
        _ => {
            let mut poly: [Vec3<T>; 4] = [Vec3::zero(); 4];
            let mut n = 0;
            for i in 0..3 {
                let a = tri[i];
                let b = tri[(i + 1) % 3];
                if inside[i] {
                    poly[n] = a;
                    n += 1;
                }
                if inside[i] != inside[(i + 1) % 3] {
                    let t = (z_min - a.z) / (b.z - a.z);
                    let mut q = a + (b - a) * t;
                    q.z = z_min;
                    poly[n] = q;
                    n += 1;
                }
            }
            if n == 3 {
                ([[poly[0], poly[1], poly[2]], [poly[0], poly[1], poly[2]]], 1)
            } else {
                ([[poly[0], poly[1], poly[2]], [poly[0], poly[2], poly[3]]], 2)
            }
        }
    }
}

/// Rasterizes a local-space triangle through a square pinhole projection
/// (`tan_half` = tan of half the field of view) into a `width × height`
/// image, emitting `(px, py, view_depth)` with perspective-correct depth.
/// Geometry in front of `near` is clipped away.
pub(crate) fn rasterize_perspective<T: Real>(
    local: [Vec3<T>; 3],
    tan_half: T,
    near: T,
    width: usize,
    height: usize,
    mut emit: impl FnMut(usize, usize, T),
) {
    let (tris, n) = clip_near(local, near);
    let half = T::lit(0.5);
    let (wf, hf) = (T::lit(width as f64), T::lit(height as f64));
    for tri in &tris[..n] {
        let screen = tri.map(|v| {
            let s = half / (v.z * tan_half);
            [(half + v.x * s) * wf, (half + v.y * s) * hf]
        });
        let z = tri.map(|v| v.z);
        let inv_z = z.map(|zi| T::one() / zi);
        let zmin = z[0].min(z[1]).min(z[2]);
        let zmax = z[0].max(z[1]).max(z[2]);
        rasterize(screen, width, height, |px, py, b| {
            let wq = [b[0] * inv_z[0], b[1] * inv_z[1], b[2] * inv_z[2]];
            let sum = wq[0] + wq[1] + wq[2];
            let pb = [wq[0] / sum, wq[1] / sum, T::zero()];
            let depth = interpolate(pb, z).max(zmin).min(zmax);
            emit(px, py, depth);
        });
    }
}
