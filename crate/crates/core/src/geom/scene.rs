//! Indexed triangle scenes and their Wavefront-style text form.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::ops::Range;

use crate::error::{PvsError, Result};
use crate::geom::{Aabb, Vec3};
use crate::Real;

/// Triangles with (doubled) area at or below this are dropped on construction.
pub const DEGENERATE_AREA_EPS: f64 = 1e-12;

/// A named group of consecutive triangles, optionally moving at constant velocity.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneObject<T> {
    pub name: String,
    pub triangles: Range<usize>,
    /// Metres per second; `None` for static geometry.
    pub velocity: Option<Vec3<T>>,
}

impl<T: Real> SceneObject<T> {
    pub fn is_dynamic(&self) -> bool {
        self.velocity.is_some()
    }
}

/// Indexed triangle mesh with one primitive id per triangle.
#[derive(Clone, Debug, PartialEq)]
pub struct TriScene<T> {
    vertices: Vec<Vec3<T>>,
    triangles: Vec<[u32; 3]>,
    primitive_ids: Vec<u32>,
    objects: Vec<SceneObject<T>>,
    dropped_degenerate: usize,
}

impl<T: Real> Default for TriScene<T> {
    fn default() -> Self {
        Self::empty()
    }
}

impl<T: Real> TriScene<T> {
    pub fn empty() -> Self {
        Self {
            vertices: Vec::new(),
            triangles: Vec::new(),
            primitive_ids: Vec::new(),
            objects: Vec::new(),
            dropped_degenerate: 0,
        }
    }

    /// Validates indices and drops triangles whose area is below
    /// [`DEGENERATE_AREA_EPS`]. Object ranges are remapped to the surviving
    /// triangles.
    pub fn from_parts(
        vertices: Vec<Vec3<T>>,
        triangles: Vec<[u32; 3]>,
        primitive_ids: Vec<u32>,
        objects: Vec<SceneObject<T>>,
    ) -> Result<Self> {
        if primitive_ids.len() != triangles.len() {
            return Err(PvsError::invalid(format!(
                "{} primitive ids for {} triangles",
                primitive_ids.len(),
                triangles.len()
            )));
        }
        if let Some(v) = vertices.iter().find(|v| !v.is_finite()) {
            return Err(PvsError::invalid(format!("non-finite vertex {v:?}")));
        }
        let nv = vertices.len() as u64;
        for (i, t) in triangles.iter().enumerate() {
            if t.iter().any(|&k| u64::from(k) >= nv) {
                return Err(PvsError::invalid(format!(
                    "triangle {i} references vertex outside 0..{nv}: {t:?}"
                )));
            }
        }
        for o in &objects {
            if o.triangles.start > o.triangles.end || o.triangles.end > triangles.len() {
                return Err(PvsError::invalid(format!(
                    "object {:?} range {:?} exceeds {} triangles",
                    o.name,
                    o.triangles,
                    triangles.len()
                )));
            }
        }

        let eps = T::lit(DEGENERATE_AREA_EPS);
        let keep: Vec<bool> = triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|k| vertices[k as usize]);
                (b - a).cross(c - a).norm() * T::lit(0.5) > eps
            })
            .collect();
        // new_index[i] = number of kept triangles before i
        let mut new_index = Vec::with_capacity(triangles.len() + 1);
        let mut n = 0;
        for &k in &keep {
            new_index.push(n);
            n += usize::from(k);
        }
        new_index.push(n);
        let dropped = triangles.len() - n;
        if dropped > 0 {
            log::warn!("dropped {dropped} degenerate triangle(s)");
        }

        let objects = objects
            .into_iter()
            .map(|o| SceneObject {
                triangles: new_index[o.triangles.start]..new_index[o.triangles.end],
                ..o
            })
            .collect();
        let (triangles, primitive_ids) = triangles
            .into_iter()
            .zip(primitive_ids)
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(tp, _)| tp)
            .unzip();

        Ok(Self {
            vertices,
            triangles,
            primitive_ids,
            objects,
            dropped_degenerate: dropped,
        })
    }

    pub fn vertices(&self) -> &[Vec3<T>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn primitive_ids(&self) -> &[u32] {
        &self.primitive_ids
    }

    pub fn objects(&self) -> &[SceneObject<T>] {
        &self.objects
    }

    pub fn dropped_degenerate(&self) -> usize {
        self.dropped_degenerate
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    #[inline]
    pub fn triangle(&self, i: usize) -> [Vec3<T>; 3] {
        self.triangles[i].map(|k| self.vertices[k as usize])
    }

    #[inline]
    pub fn primitive_id(&self, i: usize) -> u32 {
        self.primitive_ids[i]
    }

    pub fn aabb(&self) -> Aabb<T> {
        Aabb::from_points(self.triangles.iter().flatten().map(|&k| self.vertices[k as usize]))
    }

    pub fn object_aabb(&self, object: usize) -> Aabb<T> {
        let o = &self.objects[object];
        Aabb::from_points(o.triangles.clone().flat_map(|t| self.triangle(t)))
    }

    pub fn all_primitive_ids(&self) -> BTreeSet<u32> {
        self.primitive_ids.iter().copied().collect()
    }

    /// Triangles whose primitive id passes `keep`, with ids preserved.
    pub fn filter_primitives(&self, mut keep: impl FnMut(u32) -> bool) -> Self {
        let mut triangles = Vec::new();
        let mut ids = Vec::new();
        for (t, &id) in self.triangles.iter().zip(&self.primitive_ids) {
            if keep(id) {
                triangles.push(*t);
                ids.push(id);
            }
        }
        Self {
            vertices: self.vertices.clone(),
            triangles,
            primitive_ids: ids,
            objects: Vec::new(),
            dropped_degenerate: 0,
        }
    }

    /// Appends `other`, offsetting its vertex indices and object ranges.
    /// Primitive ids are kept as they are.
    pub fn append(&mut self, other: &TriScene<T>) {
        let vo = self.vertices.len() as u32;
        let to = self.triangles.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles
            .extend(other.triangles.iter().map(|t| t.map(|k| k + vo)));
        self.primitive_ids.extend_from_slice(&other.primitive_ids);
        self.objects.extend(other.objects.iter().map(|o| SceneObject {
            name: o.name.clone(),
            triangles: o.triangles.start + to..o.triangles.end + to,
            velocity: o.velocity,
        }));
        self.dropped_degenerate += other.dropped_degenerate;
    }

    /// Parses `v`/`f`/`g`/`o` records. Polygons are fan-triangulated; every
    /// triangle gets its 0-based triangle index as primitive id.
    pub fn from_obj_str(src: &str) -> Result<Self> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        let mut objects: Vec<SceneObject<T>> = Vec::new();
        let mut current: Option<(String, usize)> = None;

        let close = |cur: &mut Option<(String, usize)>, objs: &mut Vec<SceneObject<T>>, end| {
            if let Some((name, start)) = cur.take() {
                if end > start {
                    objs.push(SceneObject {
                        name,
                        triangles: start..end,
                        velocity: None,
                    });
                }
            }
        };

        for (lineno, raw) in src.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            let mut tok = line.split_whitespace();
            let Some(tag) = tok.next() else { continue };
            match tag {
                "v" => {
                    let c: Vec<f64> = tok
                        .take(3)
                        .map(|s| s.parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| PvsError::format("obj", format!("line {}: {e}", lineno + 1)))?;
                    if c.len() != 3 {
                        return Err(PvsError::format(
                            "obj",
                            format!("line {}: vertex needs 3 coordinates", lineno + 1),
                        ));
                    }
                    vertices.push(Vec3::from_f64(c[0], c[1], c[2]));
                }
                "f" => {
                    let nv = vertices.len() as i64;
                    let idx: Vec<u32> = tok
                        .map(|s| {
                            let first = s.split('/').next().unwrap_or("");
                            let i: i64 = first.parse().map_err(|e| {
                                PvsError::format("obj", format!("line {}: {e}", lineno + 1))
                            })?;
                            let resolved = if i < 0 { nv + i } else { i - 1 };
                            if resolved < 0 || resolved >= nv {
                                return Err(PvsError::format(
                                    "obj",
                                    format!("line {}: vertex index {i} out of range", lineno + 1),
                                ));
                            }
                            Ok(resolved as u32)
                        })
                        .collect::<Result<_>>()?;
                    if idx.len() < 3 {
                        return Err(PvsError::format(
                            "obj",
                            format!("line {}: face needs at least 3 vertices", lineno + 1),
                        ));
                    }
                    for k in 1..idx.len() - 1 {
                        triangles.push([idx[0], idx[k], idx[k + 1]]);
                    }
                }
                "g" | "o" => {
                    close(&mut current, &mut objects, triangles.len());
                    let name = tok.collect::<Vec<_>>().join(" ");
                    current = Some((name, triangles.len()));
                }
                _ => {}
            }
        }
        close(&mut current, &mut objects, triangles.len());

        let ids = (0..triangles.len() as u32).collect();
        Self::from_parts(vertices, triangles, ids, objects)
    }

    pub fn to_obj_string(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
        }
        let mut emitted = 0;
        let write_faces = |out: &mut String, r: Range<usize>| {
            for t in &self.triangles[r] {
                let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
            }
        };
        for o in &self.objects {
            if o.triangles.start > emitted {
                let _ = writeln!(out, "g _ungrouped_{emitted}");
                write_faces(&mut out, emitted..o.triangles.start);
            }
            let _ = writeln!(out, "g {}", o.name);
            write_faces(&mut out, o.triangles.clone());
            emitted = o.triangles.end;
        }
        if emitted < self.triangles.len() {
            if !self.objects.is_empty() {
                let _ = writeln!(out, "g _ungrouped_{emitted}");
            }
            write_faces(&mut out, emitted..self.triangles.len());
        }
        out
    }

    /// Applies a motion sidecar: one `name vx vy vz` record per line.
    /// Unknown object names are an error.
    pub fn apply_motion_table(&mut self, src: &str) -> Result<()> {
        for (lineno, raw) in src.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 4 {
                return Err(PvsError::format(
                    "motion table",
                    format!("line {}: expected `name vx vy vz`", lineno + 1),
                ));
            }
            let v: Vec<f64> = parts[1..]
                .iter()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| PvsError::format("motion table", format!("line {}: {e}", lineno + 1)))?;
            let obj = self
                .objects
                .iter_mut()
                .find(|o| o.name == parts[0])
                .ok_or_else(|| {
                    PvsError::format(
                        "motion table",
                        format!("line {}: unknown object {:?}", lineno + 1, parts[0]),
                    )
                })?;
            obj.velocity = Some(Vec3::from_f64(v[0], v[1], v[2]));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const QUADS: &str = "\
# two groups
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
g front
f 1 2 3 4
g back
f 5/1/1 6/2/2 7/3/3
";

    #[test]
    fn parses_groups_and_fans_polygons() {
        let s = TriScene::<f64>::from_obj_str(QUADS).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.primitive_ids(), &[0, 1, 2]);
        assert_eq!(s.objects().len(), 2);
        assert_eq!(s.objects()[0].triangles, 0..2);
        assert_eq!(s.objects()[1].name, "back");
    }

    #[test]
    fn obj_round_trip() {
        let s = TriScene::<f64>::from_obj_str(QUADS).unwrap();
        let back = TriScene::<f64>::from_obj_str(&s.to_obj_string()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn rejects_out_of_range_index() {
        assert!(TriScene::<f64>::from_obj_str("v 0 0 0\nf 1 2 3\n").is_err());
        let r = TriScene::<f64>::from_parts(vec![Vec3::zero()], vec![[0, 0, 1]], vec![0], vec![]);
        assert!(r.is_err());
    }

    #[test]
    fn drops_degenerate_and_remaps_objects() {
        let v = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
        ];
        // middle triangle is collinear
        let tris = vec![[0, 1, 2], [0, 1, 3], [1, 2, 3]];
        let objs = vec![
            SceneObject { name: "a".into(), triangles: 0..2, velocity: None },
            SceneObject { name: "b".into(), triangles: 2..3, velocity: None },
        ];
        let s = TriScene::from_parts(v, tris, vec![10, 11, 12], objs).unwrap();
        assert_eq!(s.dropped_degenerate(), 1);
        assert_eq!(s.primitive_ids(), &[10, 12]);
        assert_eq!(s.objects()[0].triangles, 0..1);
        assert_eq!(s.objects()[1].triangles, 1..2);
    }

    #[test]
    fn motion_table_sets_velocity() {
        let mut s = TriScene::<f64>::from_obj_str(QUADS).unwrap();
        s.apply_motion_table("# name v\nback 1 0 -2\n").unwrap();
        assert_eq!(s.objects()[1].velocity, Some(Vec3::new(1.0, 0.0, -2.0)));
        assert!(s.apply_motion_table("nobody 0 0 0").is_err());
        assert!(s.apply_motion_table("back 0 0").is_err());
    }
}
