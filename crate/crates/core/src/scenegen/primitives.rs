use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::fmt;

use crate::error::{PvsError, Result};
use crate::geom::{SceneObject, TriScene, Vec3};
use crate::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PrimitiveKind {
    Cube,
    Cone,
    Pyramid,
    Cylinder,
    Dodecahedron,
    Icosahedron,
    Arch,
    DoorWall,
    WindowCube,
    Plane,
    /// Fixed genus-4 voxel shape standing in for organic models.
    Blob,
}

impl PrimitiveKind {
    pub const ALL: [PrimitiveKind; 11] = [
        Self::Cube,
        Self::Cone,
        Self::Pyramid,
        Self::Cylinder,
        Self::Dodecahedron,
        Self::Icosahedron,
        Self::Arch,
        Self::DoorWall,
        Self::WindowCube,
        Self::Plane,
        Self::Blob,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Cube => "cube",
            Self::Cone => "cone",
            Self::Pyramid => "pyramid",
            Self::Cylinder => "cylinder",
            Self::Dodecahedron => "dodecahedron",
            Self::Icosahedron => "icosahedron",
            Self::Arch => "arch",
            Self::DoorWall => "door-wall",
            Self::WindowCube => "window-cube",
            Self::Plane => "plane",
            Self::Blob => "blob",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| PvsError::invalid(format!("unknown primitive kind `{s}`")))
    }
}

impl fmt::Display for PrimitiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Indexed mesh in f64 used while building primitives.
#[derive(Clone, Debug, Default)]
pub(crate) struct Mesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[u32; 3]>,
}

impl Mesh {
    fn push(&mut self, v: [f64; 3]) -> u32 {
        self.vertices.push(v);
        (self.vertices.len() - 1) as u32
    }

    fn quad(&mut self, a: u32, b: u32, c: u32, d: u32) {
        self.triangles.push([a, b, c]);
        self.triangles.push([a, c, d]);
    }

    /// Merges vertices with identical coordinates.
    fn welded(self) -> Self {
        let mut index: HashMap<[u64; 3], u32> = HashMap::new();
        let mut out = Mesh::default();
        let remap: Vec<u32> = self
            .vertices
            .iter()
            .map(|v| *index.entry(v.map(|c| (c + 0.0).to_bits())).or_insert_with(|| out.push(*v)))
            .collect();
        out.triangles = self.triangles.iter().map(|t| t.map(|k| remap[k as usize])).collect();
        out
    }

    /// Recenters on the bounding box center and scales the largest extent to 1.
    fn normalized(mut self) -> Self {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        let ext = (0..3).map(|k| hi[k] - lo[k]).fold(0.0, f64::max);
        for v in &mut self.vertices {
            for k in 0..3 {
                v[k] = (v[k] - 0.5 * (lo[k] + hi[k])) / ext;
            }
        }
        self
    }

    pub fn to_scene<T: Real>(&self, name: &str) -> TriScene<T> {
        let vertices = self.vertices.iter().map(|v| Vec3::from_f64(v[0], v[1], v[2])).collect();
        let n = self.triangles.len();
        TriScene::from_parts(
            vertices,
            self.triangles.clone(),
            (0..n as u32).collect(),
            vec![SceneObject {
                name: name.to_string(),
                triangles: 0..n,
                velocity: None,
            }],
        )
        .expect("primitive meshes are well formed")
    }
}

/// Unit-sized mesh of `kind` centered at the origin.
pub fn make_primitive<T: Real>(kind: PrimitiveKind) -> TriScene<T> {
    primitive_mesh(kind).to_scene(kind.name())
}

pub(crate) fn primitive_mesh(kind: PrimitiveKind) -> Mesh {
    const SEGMENTS: usize = 16;
    match kind {
        PrimitiveKind::Cube => voxel_mesh([1, 1, 1], |_, _, _| true),
        PrimitiveKind::Cone => lathe(&[(0.5, -0.5), (0.0, 0.5)], SEGMENTS),
        PrimitiveKind::Pyramid => lathe(&[(0.5, -0.5), (0.0, 0.5)], 4),
        PrimitiveKind::Cylinder => lathe(&[(0.5, -0.5), (0.5, 0.5)], SEGMENTS),
        PrimitiveKind::Dodecahedron => {
            let phi = (1.0 + 5f64.sqrt()) / 2.0;
            let mut pts = Vec::new();
            for &x in &[-1.0, 1.0] {
                for &y in &[-1.0, 1.0] {
                    for &z in &[-1.0, 1.0] {
                        pts.push([x, y, z]);
                    }
                }
            }
            for &a in &[-1.0 / phi, 1.0 / phi] {
                for &b in &[-phi, phi] {
                    pts.push([0.0, a, b]);
                    pts.push([a, b, 0.0]);
                    pts.push([b, 0.0, a]);
                }
            }
            convex_hull(pts)
        }
        PrimitiveKind::Icosahedron => {
            let phi = (1.0 + 5f64.sqrt()) / 2.0;
            let mut pts = Vec::new();
            for &a in &[-1.0, 1.0] {
                for &b in &[-phi, phi] {
                    pts.push([0.0, a, b]);
                    pts.push([a, b, 0.0]);
                    pts.push([b, 0.0, a]);
                }
            }
            convex_hull(pts)
        }
        PrimitiveKind::Arch => arch(8, 0.3),
        PrimitiveKind::DoorWall => {
            let m = voxel_mesh([5, 5, 1], |x, y, _| !(x == 2 && y < 4));
            scale_axes(m, [1.0, 1.0, 0.1])
        }
        PrimitiveKind::WindowCube => voxel_mesh([3, 3, 3], |x, y, _| !(x == 1 && y == 1)),
        PrimitiveKind::Plane => Mesh {
            vertices: vec![[-0.5, 0.0, -0.5], [0.5, 0.0, -0.5], [0.5, 0.0, 0.5], [-0.5, 0.0, 0.5]],
            triangles: vec![[0, 3, 2], [0, 2, 1]],
        },
        PrimitiveKind::Blob => voxel_mesh([5, 5, 5], |x, y, z| {
            // four tunnels along z plus one along x through the middle slab
            let z_tunnel = x % 2 == 1 && y % 2 == 1;
            let x_tunnel = y == 2 && z == 2 && x > 0 && x < 4;
            !(z_tunnel || x_tunnel)
        }),
    }
}

fn scale_axes(mut m: Mesh, s: [f64; 3]) -> Mesh {
    for v in &mut m.vertices {
        for k in 0..3 {
            v[k] *= s[k];
        }
    }
    m
}

/// Surface of revolution about +y from a `(radius, y)` profile, with a
/// vertex shared at zero radius and fan-triangulated flat caps.
fn lathe(profile: &[(f64, f64)], segments: usize) -> Mesh {
    let mut m = Mesh::default();
    let ring = |m: &mut Mesh, r: f64, y: f64| -> Vec<u32> {
        if r == 0.0 {
            let i = m.push([0.0, y, 0.0]);
            return vec![i; segments];
        }
        (0..segments)
            .map(|k| {
                let a = TAU * k as f64 / segments as f64 + PI / segments as f64;
                m.push([r * a.cos(), y, -r * a.sin()])
            })
            .collect()
    };
    let rings: Vec<Vec<u32>> = profile.iter().map(|&(r, y)| ring(&mut m, r, y)).collect();
    for w in rings.windows(2) {
        let (lo, hi) = (&w[0], &w[1]);
        for k in 0..segments {
            let k1 = (k + 1) % segments;
            if lo[k] != lo[k1] {
                m.triangles.push([lo[k], lo[k1], hi[k1]]);
            }
            if hi[k] != hi[k1] {
                m.triangles.push([lo[k], hi[k1], hi[k]]);
            }
        }
    }
    for (ring, up) in [(&rings[0], false), (&rings[rings.len() - 1], true)] {
        if ring[0] == ring[1] {
            continue;
        }
        for k in 1..segments - 1 {
            let (a, b) = (ring[k], ring[k + 1]);
            m.triangles.push(if up { [ring[0], a, b] } else { [ring[0], b, a] });
        }
    }
    m.normalized()
}

/// Convex hull of points in general position except for coplanar faces,
/// which are fan-triangulated around their centroid order.
fn convex_hull(pts: Vec<[f64; 3]>) -> Mesh {
    let p: Vec<Vec3<f64>> = pts.iter().map(|a| Vec3::new(a[0], a[1], a[2])).collect();
    let n = p.len();
    let eps = 1e-9;
    let mut faces: Vec<(Vec3<f64>, f64)> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let nrm = (p[j] - p[i]).cross(p[k] - p[i]);
                if nrm.norm() < eps {
                    continue;
                }
                let mut nrm = nrm.normalized();
                let mut d = nrm.dot(p[i]);
                let above = p.iter().filter(|q| nrm.dot(**q) - d > eps).count();
                let below = p.iter().filter(|q| nrm.dot(**q) - d < -eps).count();
                if above > 0 && below > 0 {
                    continue;
                }
                if above > 0 {
                    nrm = -nrm;
                    d = -d;
                }
                if !faces.iter().any(|(m, e)| (*m - nrm).norm() < 1e-6 && (e - d).abs() < 1e-6) {
                    faces.push((nrm, d));
                }
            }
        }
    }
    let mut tris = Vec::new();
    for (nrm, d) in faces {
        let mut on: Vec<usize> = (0..n).filter(|&q| (nrm.dot(p[q]) - d).abs() <= eps).collect();
        let c = on.iter().fold(Vec3::zero(), |s, &q| s + p[q]) / on.len() as f64;
        let e1 = (p[on[0]] - c).normalized();
        let e2 = nrm.cross(e1);
        on.sort_by(|&a, &b| {
            let ang = |q: usize| (p[q] - c).dot(e2).atan2((p[q] - c).dot(e1));
            ang(a).total_cmp(&ang(b))
        });
        for w in 1..on.len() - 1 {
            tris.push([on[0] as u32, on[w] as u32, on[w + 1] as u32]);
        }
    }
    Mesh {
        vertices: pts,
        triangles: tris,
    }
    .normalized()
}

/// Boundary faces of the filled cells of an `nx × ny × nz` voxel block,
/// with lattice vertices shared between faces.
pub(crate) fn voxel_mesh(n: [usize; 3], filled: impl Fn(usize, usize, usize) -> bool) -> Mesh {
    let inside = |x: isize, y: isize, z: isize| {
        x >= 0
            && y >= 0
            && z >= 0
            && (x as usize) < n[0]
            && (y as usize) < n[1]
            && (z as usize) < n[2]
            && filled(x as usize, y as usize, z as usize)
    };
    let mut m = Mesh::default();
    let mut index: HashMap<[usize; 3], u32> = HashMap::new();
    let mut vid = |m: &mut Mesh, p: [usize; 3]| -> u32 {
        *index.entry(p).or_insert_with(|| m.push([p[0] as f64, p[1] as f64, p[2] as f64]))
    };
    for z in 0..n[2] {
        for y in 0..n[1] {
            for x in 0..n[0] {
                if !filled(x, y, z) {
                    continue;
                }
                let c = [x as isize, y as isize, z as isize];
                for axis in 0..3 {
                    for dir in [-1isize, 1] {
                        let mut nb = c;
                        nb[axis] += dir;
                        if inside(nb[0], nb[1], nb[2]) {
                            continue;
                        }
                        let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
                        let mut corner = |da: usize, db: usize| {
                            let mut p = [x, y, z];
                            p[axis] += usize::from(dir > 0);
                            p[a] += da;
                            p[b] += db;
                            vid(&mut m, p)
                        };
                        let q = [corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)];
                        if dir > 0 {
                            m.quad(q[0], q[1], q[2], q[3]);
                        } else {
                            m.quad(q[0], q[3], q[2], q[1]);
                        }
                    }
                }
            }
        }
    }
    m.normalized()
}

/// Slab with a round-topped opening cut from the bottom edge: pillars of
/// width `0.5 - r`, an opening of half-width `r` topped by a semicircle.
fn arch(segments: usize, r: f64) -> Mesh {
    let depth = 0.3;
    // front outline points, split into arc and matching outer points
    let mut arc = Vec::new();
    let mut outer = Vec::new();
    for i in 0..=segments {
        let a = PI * i as f64 / segments as f64;
        let (s, c) = a.sin_cos();
        arc.push([r * c, r * s]);
        // ray from the arc center to the top and side edges of the unit box
        let side = if c.abs() > 1e-12 { 0.5 / c.abs() } else { f64::INFINITY };
        let top = if s > 1e-12 { 0.5 / s } else { f64::INFINITY };
        let t = side.min(top);
        outer.push([t * c, t * s]);
    }
    let mut m = Mesh::default();
    let face = |m: &mut Mesh, z: f64, front: bool| {
        let put = |m: &mut Mesh, p: [f64; 2]| m.push([p[0], p[1], z]);
        let ai: Vec<u32> = arc.iter().map(|&p| put(m, p)).collect();
        let oi: Vec<u32> = outer.iter().map(|&p| put(m, p)).collect();
        let lb = [put(m, [r, -0.5]), put(m, [0.5, -0.5])];
        let rb = [put(m, [-0.5, -0.5]), put(m, [-r, -0.5])];
        let quad = |m: &mut Mesh, a: u32, b: u32, c: u32, d: u32| {
            if front {
                m.quad(a, b, c, d)
            } else {
                m.quad(a, d, c, b)
            }
        };
        for i in 0..segments {
            quad(m, ai[i], oi[i], oi[i + 1], ai[i + 1]);
        }
        quad(m, lb[0], lb[1], oi[0], ai[0]);
        quad(m, rb[0], rb[1], ai[segments], oi[segments]);
    };
    face(&mut m, depth / 2.0, true);
    face(&mut m, -depth / 2.0, false);

    // side walls along the closed outline
    let mut outline = vec![[0.5, -0.5]];
    outline.extend(outer.iter().copied());
    outline.push([-0.5, -0.5]);
    outline.push([-r, -0.5]);
    outline.extend(arc.iter().rev().copied());
    outline.push([r, -0.5]);
    let mut ring = Vec::new();
    for p in &outline {
        let f = m.push([p[0], p[1], depth / 2.0]);
        let b = m.push([p[0], p[1], -depth / 2.0]);
        ring.push((f, b));
    }
    for i in 0..ring.len() {
        let (f0, b0) = ring[i];
        let (f1, b1) = ring[(i + 1) % ring.len()];
        m.quad(f0, b0, b1, f1);
    }
    m.welded().normalized()
}
