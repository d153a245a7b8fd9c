use std::io::{self, Write};

use crate::geom::{Camera, TriScene};
use crate::raster::rasterize_perspective;
use crate::Real;

/// Primitive id stored in pixels no triangle covers.
pub const EMPTY_ID: u32 = u32::MAX;

/// Nearest view depth and primitive id per pixel. Row 0 is the bottom of the
/// image (`v` grows upward).
#[derive(Clone, Debug, PartialEq)]
pub struct DepthBuffer<T> {
    width: usize,
    height: usize,
    depth: Vec<T>,
    ids: Vec<u32>,
}

impl<T: Real> DepthBuffer<T> {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            depth: vec![T::infinity(); width * height],
            ids: vec![EMPTY_ID; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn depths(&self) -> &[T] {
        &self.depth
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    /// `(depth, id)` of the pixel, or `None` when empty.
    pub fn get(&self, px: usize, py: usize) -> Option<(T, u32)> {
        let i = py * self.width + px;
        (self.ids[i] != EMPTY_ID).then(|| (self.depth[i], self.ids[i]))
    }

    pub fn covered(&self) -> usize {
        self.ids.iter().filter(|&&id| id != EMPTY_ID).count()
    }

    /// Depth test: a fragment replaces the stored one only when strictly
    /// nearer, so ties keep the earlier triangle.
    #[inline]
    fn test_and_set(&mut self, px: usize, py: usize, z: T, id: u32) {
        let i = py * self.width + px;
        if z < self.depth[i] {
            self.depth[i] = z;
            self.ids[i] = id;
        }
    }

    /// Writes a little-endian single-channel PFM with empty pixels as 0.
    pub fn write_pfm<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "Pf\n{} {}\n-1.0\n", self.width, self.height)?;
        let mut buf = Vec::with_capacity(self.depth.len() * 4);
        for (&z, &id) in self.depth.iter().zip(&self.ids) {
            let v = if id == EMPTY_ID { 0.0 } else { z.to_f32_lossy() };
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)
    }

    /// Writes the id buffer as a binary PPM with one hashed color per id.
    pub fn write_id_ppm<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "P6\n{} {}\n255\n", self.width, self.height)?;
        let mut buf = Vec::with_capacity(self.ids.len() * 3);
        for row in (0..self.height).rev() {
            for &id in &self.ids[row * self.width..(row + 1) * self.width] {
                buf.extend_from_slice(&id_color(id));
            }
        }
        w.write_all(&buf)
    }
}

pub(crate) fn id_color(id: u32) -> [u8; 3] {
    if id == EMPTY_ID {
        return [0, 0, 0];
    }
    let h = id.wrapping_add(1).wrapping_mul(0x9E37_79B9);
    [(h >> 24) as u8 | 0x20, (h >> 16) as u8 | 0x20, (h >> 8) as u8 | 0x20]
}

/// Rasterizes `scene` from `camera` with a z-test.
pub fn render_depth<T: Real>(scene: &TriScene<T>, camera: &Camera<T>, resolution: (usize, usize)) -> DepthBuffer<T> {
    render_depth_filtered(scene, camera, resolution, |_| true)
}

/// [`render_depth`] restricted to triangles whose primitive id passes `keep`.
pub fn render_depth_filtered<T: Real>(
    scene: &TriScene<T>,
    camera: &Camera<T>,
    resolution: (usize, usize),
    keep: impl Fn(u32) -> bool,
) -> DepthBuffer<T> {
    let (w, h) = resolution;
    let mut buf = DepthBuffer::new(w, h);
    let frustum = camera.frustum();
    let tan_half = frustum.tan_half_fov();
    let far = camera.far;
    for i in 0..scene.len() {
        let id = scene.primitive_id(i);
        if !keep(id) {
            continue;
        }
        let tri = scene.triangle(i);
        if frustum.excludes_triangle(&tri) {
            continue;
        }
        let local = tri.map(|v| frustum.to_local(v));
        rasterize_perspective(local, tan_half, camera.near, w, h, |px, py, z| {
            if z <= far {
                buf.test_and_set(px, py, z, id);
            }
        });
    }
    buf
}
