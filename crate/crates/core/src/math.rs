//! Minimal 3D math over any [`Scalar`].
//!
//! Hand-rolled rather than pulled from a linear-algebra crate so that every
//! component can be a tape variable; rollouts only need a handful of vector
//! and quaternion operations.

use crate::autodiff::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vec3<S> {
    pub x: S,
    pub y: S,
    pub z: S,
}

/// Plain-`f64` alias used for geometry, trajectories and file formats.
pub type V3 = Vec3<f64>;

impl<S: Scalar> Vec3<S> {
    pub fn new(x: S, y: S, z: S) -> Self {
        Vec3 { x, y, z }
    }

    pub fn zero() -> Self {
        Vec3 { x: S::zero(), y: S::zero(), z: S::zero() }
    }

    pub fn from_f64(v: V3) -> Self {
        Vec3 { x: S::constant(v.x), y: S::constant(v.y), z: S::constant(v.z) }
    }

    pub fn val(self) -> V3 {
        Vec3 { x: self.x.val(), y: self.y.val(), z: self.z.val() }
    }

    pub fn detach(self) -> Self {
        Vec3 { x: self.x.detach(), y: self.y.detach(), z: self.z.detach() }
    }

    pub fn detach_if(self, flag: bool) -> Self {
        if flag {
            self.detach()
        } else {
            self
        }
    }

    pub fn dot(self, o: Self) -> S {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        Vec3 {
            x: self.y * o.z - self.z * o.y,
            y: self.z * o.x - self.x * o.z,
            z: self.x * o.y - self.y * o.x,
        }
    }

    pub fn norm_sq(self) -> S {
        self.dot(self)
    }

    pub fn norm(self) -> S {
        self.norm_sq().sqrt()
    }

    pub fn scale(self, s: S) -> Self {
        Vec3 { x: self.x * s, y: self.y * s, z: self.z * s }
    }

    pub fn scale_f(self, s: f64) -> Self {
        self.scale(S::constant(s))
    }

    /// Unit vector; caller guarantees a nonzero norm.
    pub fn normalized(self) -> Self {
        let inv = S::one() / self.norm();
        self.scale(inv)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl<S: Scalar> std::ops::Add for Vec3<S> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Vec3 { x: self.x + o.x, y: self.y + o.y, z: self.z + o.z }
    }
}

impl<S: Scalar> std::ops::Sub for Vec3<S> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Vec3 { x: self.x - o.x, y: self.y - o.y, z: self.z - o.z }
    }
}

impl<S: Scalar> std::ops::Neg for Vec3<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Vec3 { x: -self.x, y: -self.y, z: -self.z }
    }
}

impl<S: Scalar> std::ops::AddAssign for Vec3<S> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<S: Scalar> std::ops::SubAssign for Vec3<S> {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl V3 {
    pub const fn v(x: f64, y: f64, z: f64) -> V3 {
        Vec3 { x, y, z }
    }

    pub fn dist(self, o: V3) -> f64 {
        (self - o).norm()
    }

    /// Projection onto the ground plane (z = 0).
    pub fn flat(self) -> V3 {
        Vec3 { x: self.x, y: self.y, z: 0.0 }
    }
}

/// Unit quaternion (w, x, y, z) representing a rotation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quat<S> {
    pub w: S,
    pub x: S,
    pub y: S,
    pub z: S,
}

pub type Qf = Quat<f64>;

impl<S: Scalar> Quat<S> {
    pub fn identity() -> Self {
        Quat { w: S::one(), x: S::zero(), y: S::zero(), z: S::zero() }
    }

    pub fn new(w: S, x: S, y: S, z: S) -> Self {
        Quat { w, x, y, z }
    }

    pub fn from_f64(q: Qf) -> Self {
        Quat { w: S::constant(q.w), x: S::constant(q.x), y: S::constant(q.y), z: S::constant(q.z) }
    }

    pub fn val(self) -> Qf {
        Quat { w: self.w.val(), x: self.x.val(), y: self.y.val(), z: self.z.val() }
    }

    pub fn detach(self) -> Self {
        Quat { w: self.w.detach(), x: self.x.detach(), y: self.y.detach(), z: self.z.detach() }
    }

    pub fn vec(self) -> Vec3<S> {
        Vec3 { x: self.x, y: self.y, z: self.z }
    }

    pub fn conj(self) -> Self {
        Quat { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    pub fn norm(self) -> S {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(self) -> Self {
        let inv = S::one() / self.norm();
        Quat { w: self.w * inv, x: self.x * inv, y: self.y * inv, z: self.z * inv }
    }

    /// Hamilton product.
    pub fn mul(self, o: Self) -> Self {
        Quat {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        }
    }

    /// Rotates `v` by this quaternion: v + 2 q_v × (q_v × v + w v).
    pub fn rotate(self, v: Vec3<S>) -> Vec3<S> {
        let qv = self.vec();
        let t = qv.cross(v).scale(S::constant(2.0));
        v + t.scale(self.w) + qv.cross(t)
    }

    pub fn rotate_inv(self, v: Vec3<S>) -> Vec3<S> {
        self.conj().rotate(v)
    }

    /// Exponential map: the rotation by angle |w| about axis w/|w|.
    ///
    /// Uses a Taylor branch below 1e-8 rad; the branch condition compares
    /// forward values only.
    pub fn exp_map(w: Vec3<S>) -> Self {
        let angle_sq = w.norm_sq();
        if angle_sq.val() < 1e-16 {
            // sin(a/2)/a ~ 1/2 - a^2/48, cos(a/2) ~ 1 - a^2/8
            let k = S::constant(0.5) - angle_sq * (1.0 / 48.0);
            let wq = S::one() - angle_sq * 0.125;
            Quat { w: wq, x: w.x * k, y: w.y * k, z: w.z * k }.normalized()
        } else {
            let angle = angle_sq.sqrt();
            let half = angle * 0.5;
            let k = half.sin() / angle;
            Quat { w: half.cos(), x: w.x * k, y: w.y * k, z: w.z * k }
        }
    }

    pub fn is_finite(self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Qf {
    /// Rotation of `angle` radians about a unit `axis`.
    pub fn from_axis_angle(axis: V3, angle: f64) -> Qf {
        let half = angle * 0.5;
        let s = half.sin();
        Quat { w: half.cos(), x: axis.x * s, y: axis.y * s, z: axis.z * s }
    }

    pub fn yaw(angle: f64) -> Qf {
        Qf::from_axis_angle(V3::v(0.0, 0.0, 1.0), angle)
    }

    /// Minimal rotation that takes unit vector `from` onto unit vector `to`.
    pub fn between(from: V3, to: V3) -> Qf {
        let c = from.cross(to);
        let d = from.dot(to);
        if d < -1.0 + 1e-12 {
            // Antiparallel: rotate by pi about any axis orthogonal to `from`.
            let ortho = if from.x.abs() < 0.9 { V3::v(1.0, 0.0, 0.0) } else { V3::v(0.0, 1.0, 0.0) };
            let axis = from.cross(ortho).normalized();
            return Qf::from_axis_angle(axis, std::f64::consts::PI);
        }
        Quat { w: 1.0 + d, x: c.x, y: c.y, z: c.z }.normalized()
    }

    /// Rotation angle in radians, in [0, pi].
    pub fn angle(self) -> f64 {
        2.0 * self.w.abs().min(1.0).acos()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn cross_product_basis() {
        let x = V3::v(1.0, 0.0, 0.0);
        let y = V3::v(0.0, 1.0, 0.0);
        assert_eq!(x.cross(y), V3::v(0.0, 0.0, 1.0));
    }

    #[test]
    fn quat_rotation_matches_axis_angle() {
        let q = Qf::from_axis_angle(V3::v(0.0, 0.0, 1.0), FRAC_PI_2);
        let r = q.rotate(V3::v(1.0, 0.0, 0.0));
        assert!(r.dist(V3::v(0.0, 1.0, 0.0)) < 1e-12);
        let back = q.rotate_inv(r);
        assert!(back.dist(V3::v(1.0, 0.0, 0.0)) < 1e-12);
    }

    #[test]
    fn exp_map_matches_axis_angle() {
        let w = V3::v(0.0, 0.3, 0.0);
        let q = Quat::exp_map(w);
        let expect = Qf::from_axis_angle(V3::v(0.0, 1.0, 0.0), 0.3);
        assert!((q.w - expect.w).abs() < 1e-12);
        assert!((q.y - expect.y).abs() < 1e-12);
        // Tiny angles hit the Taylor branch and stay normalized.
        let q = Quat::exp_map(V3::v(1e-10, 0.0, 0.0));
        assert!((q.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exp_map_is_differentiable() {
        let tape = Tape::new();
        let wz = tape.var(0.2).unwrap();
        let w = Vec3::new(crate::Var::constant(0.0), crate::Var::constant(0.0), wz);
        let q = Quat::exp_map(w);
        let v = q.rotate(Vec3::from_f64(V3::v(1.0, 0.0, 0.0)));
        // d/dw sin(w) at w=0.2 for the rotated x-component: d cos(w)/dw = -sin(w)
        let g = v.x.backward();
        assert!((g.wrt(wz) + 0.2_f64.sin()).abs() < 1e-9);
    }

    #[test]
    fn between_recovers_rotation() {
        let from = V3::v(1.0, 0.0, 0.0);
        let to = V3::v(0.0, 0.0, 1.0);
        let q = Qf::between(from, to);
        assert!(q.rotate(from).dist(to) < 1e-12);
        // Antiparallel case.
        let q = Qf::between(from, V3::v(-1.0, 0.0, 0.0));
        assert!(q.rotate(from).dist(V3::v(-1.0, 0.0, 0.0)) < 1e-12);
        assert!((q.angle() - PI).abs() < 1e-12);
    }
}
