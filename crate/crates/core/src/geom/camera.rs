//! Pinhole cameras, viewcells and the froxel frustum.
//!
//! All frusta are square (aspect 1:1). Local coordinates are
//! `(x, y, z) = ((p - o)·right, (p - o)·up, (p - o)·forward)`; the
//! normalized device coordinates used for froxelization are
//! `u = ½ + ½·x/(z·tan(fov/2))`, `v` likewise from `y`, and `w` the
//! depth mapped from `[near, far]` to `[0, 1]`.

use crate::error::{PvsError, Result};
use crate::geom::{Aabb, Vec3};
use crate::Real;

const ORTHONORMAL_TOL: f64 = 1e-6;

/// Orthonormal, right-handed camera frame with `right = forward × up`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Basis<T> {
    pub forward: Vec3<T>,
    pub up: Vec3<T>,
    pub right: Vec3<T>,
}

impl<T: Real> Basis<T> {
    /// Builds a frame looking along `forward`, with `up_hint` projected to be
    /// orthogonal to it.
    pub fn look(forward: Vec3<T>, up_hint: Vec3<T>) -> Result<Self> {
        let f = forward.normalized();
        let u = (up_hint - f * up_hint.dot(f)).normalized();
        if f.norm_squared() == T::zero() || u.norm_squared() == T::zero() {
            return Err(PvsError::invalid("degenerate camera frame"));
        }
        Ok(Self {
            forward: f,
            up: u,
            right: f.cross(u),
        })
    }

    /// World up is +y; yaw 0 looks down -z, positive yaw turns toward -x.
    pub fn from_yaw_deg(yaw_deg: T) -> Self {
        let yaw = yaw_deg.to_radians();
        let forward = Vec3::new(-yaw.sin(), T::zero(), -yaw.cos());
        let up = Vec3::unit_y();
        Self {
            forward,
            up,
            right: forward.cross(up),
        }
    }

    /// The frame rotated about its own up axis by `yaw_deg`.
    pub fn yawed(&self, yaw_deg: T) -> Self {
        let a = yaw_deg.to_radians();
        let forward = self.forward.rotated_about(self.up, a);
        let right = self.right.rotated_about(self.up, a);
        Self {
            forward,
            up: self.up,
            right,
        }
    }

    pub fn is_orthonormal(&self, tol: T) -> bool {
        let one = T::one();
        (self.forward.norm() - one).abs() <= tol
            && (self.up.norm() - one).abs() <= tol
            && (self.right.norm() - one).abs() <= tol
            && self.forward.dot(self.up).abs() <= tol
            && self.forward.dot(self.right).abs() <= tol
            && self.up.dot(self.right).abs() <= tol
            && (self.forward.cross(self.up) - self.right).norm() <= tol
    }
}

/// How view depth maps onto the `w` axis of the froxel grid.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DepthMapping {
    #[default]
    Linear,
    Logarithmic,
}

/// Normalized device coordinates, each in `[0, 1]` inside the frustum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ndc<T> {
    pub u: T,
    pub v: T,
    pub w: T,
}

/// Plane with signed distance `normal·p + offset`, positive on the inside.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Plane<T> {
    pub normal: Vec3<T>,
    pub offset: T,
}

impl<T: Real> Plane<T> {
    fn through(normal: Vec3<T>, point: Vec3<T>) -> Self {
        let n = normal.normalized();
        Self {
            normal: n,
            offset: -n.dot(point),
        }
    }

    #[inline]
    pub fn signed_distance(&self, p: Vec3<T>) -> T {
        self.normal.dot(p) + self.offset
    }
}

/// A square view frustum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frustum<T> {
    origin: Vec3<T>,
    basis: Basis<T>,
    fov_deg: T,
    near: T,
    far: T,
    tan_half: T,
    depth_mapping: DepthMapping,
    /// left, right, bottom, top, near, far
    planes: [Plane<T>; 6],
}

fn check_projection<T: Real>(fov_deg: T, near: T, far: T) -> Result<()> {
    if !(fov_deg > T::zero() && fov_deg < T::lit(180.0)) {
        return Err(PvsError::invalid(format!("field of view {fov_deg} not in (0, 180)")));
    }
    if !(near > T::zero() && near < far && far.is_finite()) {
        return Err(PvsError::invalid(format!(
            "clip range requires 0 < near < far, got near={near} far={far}"
        )));
    }
    Ok(())
}

impl<T: Real> Frustum<T> {
    pub fn new(origin: Vec3<T>, basis: Basis<T>, fov_deg: T, near: T, far: T) -> Result<Self> {
        check_projection(fov_deg, near, far)?;
        if !basis.is_orthonormal(T::lit(ORTHONORMAL_TOL)) {
            return Err(PvsError::invalid("frustum basis is not orthonormal"));
        }
        if !origin.is_finite() {
            return Err(PvsError::invalid("non-finite frustum origin"));
        }
        let tan_half = (fov_deg.to_radians() * T::lit(0.5)).tan();
        let Basis { forward, up, right } = basis;
        let planes = [
            Plane::through(forward * tan_half + right, origin),
            Plane::through(forward * tan_half - right, origin),
            Plane::through(forward * tan_half + up, origin),
            Plane::through(forward * tan_half - up, origin),
            Plane::through(forward, origin + forward * near),
            Plane::through(-forward, origin + forward * far),
        ];
        Ok(Self {
            origin,
            basis,
            fov_deg,
            near,
            far,
            tan_half,
            depth_mapping: DepthMapping::Linear,
            planes,
        })
    }

    pub fn with_depth_mapping(mut self, mapping: DepthMapping) -> Self {
        self.depth_mapping = mapping;
        self
    }

    pub fn origin(&self) -> Vec3<T> {
        self.origin
    }

    pub fn basis(&self) -> &Basis<T> {
        &self.basis
    }

    pub fn fov_deg(&self) -> T {
        self.fov_deg
    }

    pub fn near(&self) -> T {
        self.near
    }

    pub fn far(&self) -> T {
        self.far
    }

    pub fn tan_half_fov(&self) -> T {
        self.tan_half
    }

    pub fn depth_mapping(&self) -> DepthMapping {
        self.depth_mapping
    }

    pub fn planes(&self) -> &[Plane<T>; 6] {
        &self.planes
    }

    #[inline]
    pub fn to_local(&self, p: Vec3<T>) -> Vec3<T> {
        let d = p - self.origin;
        Vec3::new(d.dot(self.basis.right), d.dot(self.basis.up), d.dot(self.basis.forward))
    }

    #[inline]
    pub fn to_world(&self, local: Vec3<T>) -> Vec3<T> {
        self.origin + self.basis.right * local.x + self.basis.up * local.y + self.basis.forward * local.z
    }

    /// Maps view depth to `w`. Not clamped.
    #[inline]
    pub fn depth_to_w(&self, z: T) -> T {
        match self.depth_mapping {
            DepthMapping::Linear => (z - self.near) / (self.far - self.near),
            DepthMapping::Logarithmic => (z / self.near).ln() / (self.far / self.near).ln(),
        }
    }

    #[inline]
    pub fn w_to_depth(&self, w: T) -> T {
        match self.depth_mapping {
            DepthMapping::Linear => self.near + w * (self.far - self.near),
            DepthMapping::Logarithmic => self.near * ((self.far / self.near).ln() * w).exp(),
        }
    }

    /// Projects a local-space point; `None` when it lies outside the frustum
    /// (beyond a round-off tolerance) or behind the origin.
    #[inline]
    pub fn project_local(&self, l: Vec3<T>) -> Option<Ndc<T>> {
        if !(l.z > T::zero()) {
            return None;
        }
        let half = T::lit(0.5);
        let s = half / (l.z * self.tan_half);
        // round-off on the frustum boundary is absorbed, then clamped
        let tol = T::epsilon() * T::lit(64.0);
        let unit = |x: T| -> Option<T> {
            (x >= -tol && x <= T::one() + tol).then(|| x.max(T::zero()).min(T::one()))
        };
        Some(Ndc {
            u: unit(half + l.x * s)?,
            v: unit(half + l.y * s)?,
            w: unit(self.depth_to_w(l.z))?,
        })
    }

    #[inline]
    pub fn project_to_ndc(&self, p: Vec3<T>) -> Option<Ndc<T>> {
        self.project_local(self.to_local(p))
    }

    /// Inverse of [`Frustum::project_to_ndc`] for coordinates in `[0, 1]³`.
    pub fn unproject(&self, ndc: Ndc<T>) -> Vec3<T> {
        let z = self.w_to_depth(ndc.w);
        let two = T::lit(2.0);
        let x = (two * ndc.u - T::one()) * z * self.tan_half;
        let y = (two * ndc.v - T::one()) * z * self.tan_half;
        self.to_world(Vec3::new(x, y, z))
    }

    /// World-space direction through image position `(u, v)`, with unit
    /// forward component.
    pub fn direction(&self, u: T, v: T) -> Vec3<T> {
        let two = T::lit(2.0);
        let x = (two * u - T::one()) * self.tan_half;
        let y = (two * v - T::one()) * self.tan_half;
        self.basis.forward + self.basis.right * x + self.basis.up * y
    }

    /// True when all three vertices lie strictly outside one plane, so the
    /// triangle cannot intersect the frustum.
    pub fn excludes_triangle(&self, tri: &[Vec3<T>; 3]) -> bool {
        self.planes
            .iter()
            .any(|pl| tri.iter().all(|&v| pl.signed_distance(v) < T::zero()))
    }

    pub fn contains(&self, p: Vec3<T>) -> bool {
        self.planes.iter().all(|pl| pl.signed_distance(p) >= T::zero())
    }

    /// Corners of the near plane then the far plane, each `(u,v)` in
    /// `(0,0), (1,0), (0,1), (1,1)` order.
    pub fn corners(&self) -> [Vec3<T>; 8] {
        let mut out = [Vec3::zero(); 8];
        let (zero, one) = (T::zero(), T::one());
        for (i, c) in out.iter_mut().enumerate() {
            let u = if i & 1 == 0 { zero } else { one };
            let v = if i & 2 == 0 { zero } else { one };
            let w = if i & 4 == 0 { zero } else { one };
            *c = self.unproject(Ndc { u, v, w });
        }
        out
    }

    pub fn aabb(&self) -> Aabb<T> {
        Aabb::from_points(self.corners())
    }
}

/// A pinhole camera with a square image.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Camera<T> {
    pub position: Vec3<T>,
    pub basis: Basis<T>,
    pub fov_deg: T,
    pub near: T,
    pub far: T,
}

impl<T: Real> Camera<T> {
    pub fn new(position: Vec3<T>, basis: Basis<T>, fov_deg: T, near: T, far: T) -> Result<Self> {
        check_projection(fov_deg, near, far)?;
        if !basis.is_orthonormal(T::lit(ORTHONORMAL_TOL)) {
            return Err(PvsError::invalid("camera basis is not orthonormal"));
        }
        Ok(Self {
            position,
            basis,
            fov_deg,
            near,
            far,
        })
    }

    /// The camera's own view frustum (linear depth).
    pub fn frustum(&self) -> Frustum<T> {
        Frustum::new(self.position, self.basis, self.fov_deg, self.near, self.far)
            .expect("camera invariants imply a valid frustum")
    }

    /// Image position of a pixel center for a `width × height` image.
    #[inline]
    pub fn pixel_uv(px: usize, py: usize, width: usize, height: usize) -> (T, T) {
        let half = T::lit(0.5);
        (
            (T::lit(px as f64) + half) / T::lit(width as f64),
            (T::lit(py as f64) + half) / T::lit(height as f64),
        )
    }

    /// World point at view depth `depth` through the center of pixel `(px, py)`.
    pub fn unproject_pixel(&self, px: usize, py: usize, resolution: (usize, usize), depth: T) -> Vec3<T> {
        let (u, v) = Self::pixel_uv(px, py, resolution.0, resolution.1);
        let tan_half = (self.fov_deg.to_radians() * T::lit(0.5)).tan();
        let two = T::lit(2.0);
        let x = (two * u - T::one()) * tan_half * depth;
        let y = (two * v - T::one()) * tan_half * depth;
        self.position + self.basis.right * x + self.basis.up * y + self.basis.forward * depth
    }
}

/// Reprojects a depth-buffer fragment of `from` into `to`. `None` when the
/// depth lies outside `from`'s clip range or the point leaves `to`.
pub fn reproject<T: Real>(
    from: &Camera<T>,
    resolution: (usize, usize),
    to: &Frustum<T>,
    pixel: (usize, usize),
    depth: T,
) -> Option<Ndc<T>> {
    if !(depth >= from.near && depth <= from.far) {
        return None;
    }
    to.project_to_ndc(from.unproject_pixel(pixel.0, pixel.1, resolution, depth))
}

/// The region of camera positions a single PVS is valid for: a horizontal
/// disc of radius `radius` around `center` (spanned by the base frame's right
/// and forward axes), plus yaw rotations of up to `beta_deg` either side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ViewCell<T> {
    pub center: Vec3<T>,
    pub basis: Basis<T>,
    pub radius: T,
    pub fov_deg: T,
    pub beta_deg: T,
    pub near: T,
    /// Far distance measured from `center`.
    pub far: T,
}

impl<T: Real> ViewCell<T> {
    pub fn new(
        center: Vec3<T>,
        basis: Basis<T>,
        radius: T,
        fov_deg: T,
        beta_deg: T,
        near: T,
        far: T,
    ) -> Result<Self> {
        let cell = Self {
            center,
            basis,
            radius,
            fov_deg,
            beta_deg,
            near,
            far,
        };
        cell.validate()?;
        Ok(cell)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > T::zero()) {
            return Err(PvsError::invalid(format!("viewcell radius {} must be positive", self.radius)));
        }
        if !(self.beta_deg >= T::zero()) {
            return Err(PvsError::invalid("rotation margin must be non-negative"));
        }
        check_projection(self.fov_deg, self.near, self.far)?;
        let enlarged = self.enlarged_fov_deg();
        if !(enlarged < T::lit(180.0)) {
            return Err(PvsError::invalid(format!(
                "enlarged field of view {enlarged} must stay below 180 degrees"
            )));
        }
        if !self.basis.is_orthonormal(T::lit(ORTHONORMAL_TOL)) {
            return Err(PvsError::invalid("viewcell basis is not orthonormal"));
        }
        Ok(())
    }

    /// Backward displacement of the frustum apex, `r / tan(θ/2)`.
    pub fn displacement(&self) -> T {
        self.radius / (self.fov_deg.to_radians() * T::lit(0.5)).tan()
    }

    pub fn displaced_origin(&self) -> Vec3<T> {
        self.center - self.basis.forward * self.displacement()
    }

    pub fn enlarged_fov_deg(&self) -> T {
        self.fov_deg + T::lit(2.0) * self.beta_deg
    }

    /// Camera at the cell center with the base field of view.
    pub fn center_camera(&self) -> Camera<T> {
        Camera {
            position: self.center,
            basis: self.basis,
            fov_deg: self.fov_deg,
            near: self.near,
            far: self.far,
        }
    }
}

/// Frustum enclosing every view from inside `cell`.
///
/// The apex is moved back to `c' = c - (r/tan(θ/2))·forward` and the field
/// of view widened to `θ + 2β`. The far plane coincides with the center
/// camera's far plane; the near plane sits at the smallest depth any sampled
/// camera's near rectangle can reach.
pub fn build_viewcell_frustum<T: Real>(cell: &ViewCell<T>) -> Result<Frustum<T>> {
    cell.validate()?;
    let d = cell.displacement();
    let half = T::lit(0.5);
    let t = (cell.fov_deg.to_radians() * half).tan();
    let beta = cell.beta_deg.to_radians();
    let reach = d - cell.radius + cell.near * (beta.cos() - t * beta.sin());
    let near = reach.max(cell.near * T::lit(1e-3));
    Frustum::new(
        cell.displaced_origin(),
        cell.basis,
        cell.enlarged_fov_deg(),
        near,
        d + cell.far,
    )
}
