//! Rigid-rod bodies, cable spring forces and the semi-implicit Euler step.
//!
//! A rod assembly is a slender cylinder with a spherical end cap at each end
//! and a motor/battery mount on each half. The composite is symmetric about
//! the rod center, so its center of mass sits at the geometric center and
//! the body-frame inertia tensor is diagonal with the rod along local +Z.
//!
//! Integration order is velocity first (from forces), then ground contact
//! impulses, then position from the new velocity — the update pattern
//! v' = v + (F/m) dt, x' = x + v' dt.

use crate::autodiff::Scalar;
use crate::contact::{self, ContactEvent, ContactParams};
use crate::error::{Error, Result};
use crate::math::{Quat, Vec3, V3};

/// Rod geometry in SI units (meters). Masses live in [`RodMasses`] so they
/// can be tape variables while the geometry stays plain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RodGeometry {
    pub rod_radius: f64,
    /// Distance between the two end-cap centers (cap centers sit at the rod ends).
    pub rod_length: f64,
    pub endcap_radius: f64,
    pub mount_radius: f64,
    pub mount_length: f64,
    /// Distance from the rod center to the near (low) end of each mount.
    pub mount_offset: f64,
}

impl RodGeometry {
    /// Measured dimensions of the physical rod assembly (converted to SI).
    pub fn default_measured() -> Self {
        RodGeometry {
            rod_radius: 1.6e-3,
            rod_length: 0.325,
            endcap_radius: 17.5e-3,
            mount_radius: 17.5e-3,
            mount_length: 45e-3,
            mount_offset: 95e-3,
        }
    }

    /// Overall length including both end caps.
    pub fn overall_length(&self) -> f64 {
        self.rod_length + 2.0 * self.endcap_radius
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("rod_radius", self.rod_radius),
            ("rod_length", self.rod_length),
            ("endcap_radius", self.endcap_radius),
            ("mount_radius", self.mount_radius),
            ("mount_length", self.mount_length),
            ("mount_offset", self.mount_offset),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidDescription(format!(
                    "rod geometry field {name} must be strictly positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Component masses in kg; one value per component kind (each rod carries
/// two caps and two mounts).
#[derive(Clone, Copy, Debug)]
pub struct RodMasses<S> {
    pub rod: S,
    pub endcap: S,
    pub mount: S,
}

impl RodMasses<f64> {
    /// Measured component masses (grams in the datasheet, kg here).
    pub fn default_measured() -> Self {
        RodMasses { rod: 3.8e-3, endcap: 10.5e-3, mount: 35.3e-3 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("rod", self.rod), ("endcap", self.endcap), ("mount", self.mount)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidDescription(format!(
                    "mass {name} must be strictly positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

impl<S: Scalar> RodMasses<S> {
    pub fn lift(m: &RodMasses<f64>) -> Self {
        RodMasses { rod: S::constant(m.rod), endcap: S::constant(m.endcap), mount: S::constant(m.mount) }
    }
}

/// Total mass and diagonal body-frame inertia of one rod assembly.
#[derive(Clone, Copy, Debug)]
pub struct MassProps<S> {
    pub mass: S,
    /// Diagonal inertia about the center of mass, rod axis along local Z.
    pub inertia: Vec3<S>,
    /// Offset of the center of mass from the rod center (zero by symmetry).
    pub com_offset: Vec3<S>,
}

/// Aggregates rod + 2 end caps + 2 mounts with parallel-axis terms.
pub fn composite_mass_properties<S: Scalar>(geom: &RodGeometry, masses: &RodMasses<S>) -> MassProps<S> {
    let half_len = geom.rod_length / 2.0;
    let mass = masses.rod + masses.endcap * 2.0 + masses.mount * 2.0;

    // Rod: solid cylinder along Z.
    let rr2 = geom.rod_radius * geom.rod_radius;
    let rod_axial = masses.rod * (0.5 * rr2);
    let rod_perp = masses.rod * ((3.0 * rr2 + geom.rod_length * geom.rod_length) / 12.0);

    // End caps: solid spheres centered on the rod ends.
    let cr2 = geom.endcap_radius * geom.endcap_radius;
    let cap_local = 0.4 * cr2;
    let cap_axial = masses.endcap * (2.0 * cap_local);
    let cap_perp = masses.endcap * (2.0 * (cap_local + half_len * half_len));

    // Mounts: coaxial cylinders spanning [offset, offset + length] on each side.
    let mr2 = geom.mount_radius * geom.mount_radius;
    let mount_center = geom.mount_offset + geom.mount_length / 2.0;
    let mount_local = (3.0 * mr2 + geom.mount_length * geom.mount_length) / 12.0;
    let mount_axial = masses.mount * (2.0 * (0.5 * mr2));
    let mount_perp = masses.mount * (2.0 * (mount_local + mount_center * mount_center));

    let perp = rod_perp + cap_perp + mount_perp;
    let axial = rod_axial + cap_axial + mount_axial;

    MassProps { mass, inertia: Vec3::new(perp, perp, axial), com_offset: Vec3::zero() }
}

/// Pose and twist of one rod, world frame, velocities about the center of mass.
#[derive(Clone, Copy, Debug)]
pub struct RodState<S> {
    pub pos: Vec3<S>,
    pub orient: Quat<S>,
    pub lin_vel: Vec3<S>,
    pub ang_vel: Vec3<S>,
}

impl<S: Scalar> RodState<S> {
    pub fn at_rest(pos: Vec3<S>, orient: Quat<S>) -> Self {
        RodState { pos, orient, lin_vel: Vec3::zero(), ang_vel: Vec3::zero() }
    }

    pub fn lift(s: &RodState<f64>) -> Self {
        RodState {
            pos: Vec3::from_f64(s.pos),
            orient: Quat::from_f64(s.orient),
            lin_vel: Vec3::from_f64(s.lin_vel),
            ang_vel: Vec3::from_f64(s.ang_vel),
        }
    }

    pub fn val(&self) -> RodState<f64> {
        RodState {
            pos: self.pos.val(),
            orient: self.orient.val(),
            lin_vel: self.lin_vel.val(),
            ang_vel: self.ang_vel.val(),
        }
    }

    pub fn detach(&self) -> Self {
        RodState {
            pos: self.pos.detach(),
            orient: self.orient.detach(),
            lin_vel: self.lin_vel.detach(),
            ang_vel: self.ang_vel.detach(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.pos.is_finite() && self.orient.is_finite() && self.lin_vel.is_finite() && self.ang_vel.is_finite()
    }

    /// World position of a body-frame point.
    pub fn to_world(&self, body_point: Vec3<S>) -> Vec3<S> {
        self.pos + self.orient.rotate(body_point)
    }

    /// World velocity of a body-frame point (rigid-body velocity field).
    pub fn point_velocity(&self, body_point: Vec3<S>) -> Vec3<S> {
        self.lin_vel + self.ang_vel.cross(self.orient.rotate(body_point))
    }
}

/// One simulated rigid rod: constant properties plus its evolving state.
#[derive(Clone, Debug)]
pub struct RodBody<S> {
    pub props: MassProps<S>,
    pub state: RodState<S>,
    /// Body-frame centers of the two end caps.
    pub cap_offsets: [Vec3<S>; 2],
    pub cap_radius: f64,
    /// Detach contact responses (actuated bodies); passive bodies keep
    /// full contact gradients.
    pub detach_contact: bool,
}

impl<S: Scalar> RodBody<S> {
    pub fn new(geom: &RodGeometry, masses: &RodMasses<S>, state: RodState<S>) -> Self {
        let half = geom.rod_length / 2.0;
        RodBody {
            props: composite_mass_properties(geom, masses),
            state,
            cap_offsets: [
                Vec3::new(S::zero(), S::zero(), S::constant(half)),
                Vec3::new(S::zero(), S::zero(), S::constant(-half)),
            ],
            cap_radius: geom.endcap_radius,
            detach_contact: true,
        }
    }

    pub fn cap_center(&self, cap: usize) -> Vec3<S> {
        self.state.to_world(self.cap_offsets[cap])
    }
}

/// Stiffness law of a cable over tensile displacement (current length minus
/// rest length, clamped at zero; cables only pull).
#[derive(Clone, Copy, Debug)]
pub enum StiffnessModel<S> {
    Linear { k: S },
    Cubic { c1: S, c2: S, c3: S },
}

impl<S: Scalar> StiffnessModel<S> {
    /// Tension at tensile displacement `d >= 0` (Horner form for the cubic).
    pub fn tension(&self, d: S) -> S {
        match *self {
            StiffnessModel::Linear { k } => k * d,
            StiffnessModel::Cubic { c1, c2, c3 } => ((c3 * d + c2) * d + c1) * d,
        }
    }

    pub fn lift(m: &StiffnessModel<f64>) -> Self {
        match *m {
            StiffnessModel::Linear { k } => StiffnessModel::Linear { k: S::constant(k) },
            StiffnessModel::Cubic { c1, c2, c3 } => StiffnessModel::Cubic {
                c1: S::constant(c1),
                c2: S::constant(c2),
                c3: S::constant(c3),
            },
        }
    }
}

/// Result of evaluating one cable: equal and opposite forces at the two
/// attachment points plus diagnostics.
#[derive(Clone, Copy, Debug)]
pub struct CableForce<S> {
    /// Force applied to the endpoint-A body at the attachment point.
    pub force_on_a: Vec3<S>,
    pub length: S,
    pub tension: S,
    /// Endpoints closer than the degeneracy threshold; force is zero.
    pub degenerate: bool,
}

/// Tension-only spring with endpoint damping.
///
/// The axial damping term is proportional to the separation speed along
/// the cable axis and is clamped so the combined force never pushes (never
/// reverses the tension sign). While the cable is taut, the same dashpot
/// coefficient also resists the transverse relative endpoint velocity;
/// purely axial dashpots leave pendulum-like swing modes of the structure
/// entirely undamped, which no physical tendon does.
pub fn cable_force<S: Scalar>(
    pos_a: Vec3<S>,
    vel_a: Vec3<S>,
    pos_b: Vec3<S>,
    vel_b: Vec3<S>,
    rest_length: S,
    model: &StiffnessModel<S>,
    damping: f64,
) -> CableForce<S> {
    let delta = pos_b - pos_a;
    let length = delta.norm();
    if length.val() < 1e-9 {
        return CableForce {
            force_on_a: Vec3::zero(),
            length,
            tension: S::zero(),
            degenerate: true,
        };
    }
    let axis = delta.scale(S::one() / length);
    let stretch = length - rest_length;
    if stretch.val() <= 0.0 {
        // Slack: no force, and no gradient through an inactive cable.
        return CableForce { force_on_a: Vec3::zero(), length, tension: S::zero(), degenerate: false };
    }
    let elastic = model.tension(stretch);
    let rel_vel = vel_b - vel_a;
    let separation_speed = rel_vel.dot(axis);
    let total = (elastic + separation_speed * damping).max(S::zero());
    let transverse = (rel_vel - axis.scale(separation_speed)).scale_f(damping);
    CableForce {
        force_on_a: axis.scale(total) + transverse,
        length,
        tension: total,
        degenerate: false,
    }
}

/// Per-body force/torque accumulator (world frame, torque about the COM).
#[derive(Clone, Copy, Debug)]
pub struct ForceAccum<S> {
    pub force: Vec3<S>,
    pub torque: Vec3<S>,
}

impl<S: Scalar> ForceAccum<S> {
    pub fn zero() -> Self {
        ForceAccum { force: Vec3::zero(), torque: Vec3::zero() }
    }

    /// Adds a force applied at a world-frame point.
    pub fn apply_at(&mut self, force: Vec3<S>, point: Vec3<S>, com: Vec3<S>) {
        self.force += force;
        self.torque += (point - com).cross(force);
    }
}

/// Advances all bodies by one step: velocity update from forces and gravity,
/// ground-contact impulses, then position/orientation update from the new
/// velocities with quaternion renormalization. Aborts with the step index if
/// any state component becomes non-finite.
pub fn step<S: Scalar>(
    bodies: &mut [RodBody<S>],
    forces: &[ForceAccum<S>],
    contact_params: &ContactParams<S>,
    gravity: f64,
    dt: f64,
    step_index: u64,
) -> Result<Vec<ContactEvent>> {
    assert_eq!(bodies.len(), forces.len());

    for (body, accum) in bodies.iter_mut().zip(forces) {
        let inv_mass = S::one() / body.props.mass;
        let mut accel = accum.force.scale(inv_mass);
        accel.z = accel.z - gravity;
        body.state.lin_vel += accel.scale_f(dt);

        // Euler's equations in the body frame: I w' = tau - w x (I w).
        let q = body.state.orient;
        let w_body = q.rotate_inv(body.state.ang_vel);
        let torque_body = q.rotate_inv(accum.torque);
        let iw = Vec3::new(
            body.props.inertia.x * w_body.x,
            body.props.inertia.y * w_body.y,
            body.props.inertia.z * w_body.z,
        );
        let rhs = torque_body - w_body.cross(iw);
        let dw = Vec3::new(rhs.x / body.props.inertia.x, rhs.y / body.props.inertia.y, rhs.z / body.props.inertia.z);
        body.state.ang_vel = q.rotate(w_body + dw.scale_f(dt));
    }

    let resolution = contact::resolve_ground_contacts(bodies, contact_params, dt);

    for body in bodies.iter_mut() {
        body.state.pos += body.state.lin_vel.scale_f(dt);
        let dq = Quat::exp_map(body.state.ang_vel.scale_f(dt));
        body.state.orient = dq.mul(body.state.orient).normalized();
    }

    resolution.apply_position_corrections(bodies, contact_params);

    for body in bodies.iter() {
        if !body.state.is_finite() {
            return Err(Error::NonFiniteState { step: step_index });
        }
    }
    Ok(resolution.events)
}

/// Kinetic plus gravitational plus cable-elastic energy for diagnostics.
///
/// `elastic` is supplied by the caller since cable bookkeeping lives above
/// this module.
pub fn mechanical_energy<S: Scalar>(bodies: &[RodBody<S>], gravity: f64, elastic: f64) -> f64 {
    let mut e = elastic;
    for body in bodies {
        let m = body.props.mass.val();
        let v2 = body.state.lin_vel.val().norm_sq();
        let w_body = body.state.orient.rotate_inv(body.state.ang_vel).val();
        let i = body.props.inertia.val();
        e += 0.5 * m * v2
            + 0.5 * (i.x * w_body.x * w_body.x + i.y * w_body.y * w_body.y + i.z * w_body.z * w_body.z)
            + m * gravity * body.state.pos.z.val();
    }
    e
}

/// Elastic energy stored in a linear or cubic cable at displacement `d`.
pub fn elastic_energy(model: &StiffnessModel<f64>, d: f64) -> f64 {
    if d <= 0.0 {
        return 0.0;
    }
    match *model {
        StiffnessModel::Linear { k } => 0.5 * k * d * d,
        StiffnessModel::Cubic { c1, c2, c3 } => {
            d * d * (c1 / 2.0 + d * (c2 / 3.0 + d * c3 / 4.0))
        }
    }
}

/// Center of mass of a set of bodies.
pub fn center_of_mass<S: Scalar>(bodies: &[RodBody<S>]) -> V3 {
    let mut total = 0.0;
    let mut acc = V3::v(0.0, 0.0, 0.0);
    for b in bodies {
        let m = b.props.mass.val();
        acc += b.state.pos.val().scale(m);
        total += m;
    }
    acc.scale(1.0 / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;
    use crate::contact::ContactParams;

    fn measured_props() -> MassProps<f64> {
        composite_mass_properties(&RodGeometry::default_measured(), &RodMasses::default_measured())
    }

    #[test]
    fn total_mass_matches_component_sum() {
        // 3.8 + 2*10.5 + 2*35.3 grams.
        let props = measured_props();
        assert!((props.mass - 95.4e-3).abs() < 1e-12);
        assert_eq!(props.com_offset.val(), V3::v(0.0, 0.0, 0.0));
    }

    #[test]
    fn inertia_is_linear_in_masses() {
        let geom = RodGeometry::default_measured();
        let m1 = RodMasses::default_measured();
        let m2 = RodMasses { rod: m1.rod * 2.0, endcap: m1.endcap * 2.0, mount: m1.mount * 2.0 };
        let p1 = composite_mass_properties(&geom, &m1);
        let p2 = composite_mass_properties(&geom, &m2);
        assert!((p2.inertia.x - 2.0 * p1.inertia.x).abs() < 1e-15);
        assert!((p2.inertia.y - 2.0 * p1.inertia.y).abs() < 1e-15);
        assert!((p2.inertia.z - 2.0 * p1.inertia.z).abs() < 1e-15);
        assert!((p2.mass - 2.0 * p1.mass).abs() < 1e-15);
    }

    #[test]
    fn point_mass_inertia_matches_parallel_axis_by_hand() {
        // Shrink everything except the mounts to (near) zero so each mount is
        // a point mass m/2 at distance d: perpendicular inertia = 2*(m/2)*d^2.
        let d = 0.2;
        let len = 1e-9;
        let geom = RodGeometry {
            rod_radius: 1e-9,
            rod_length: 1e-9,
            endcap_radius: 1e-9,
            mount_radius: 1e-9,
            mount_length: len,
            mount_offset: d - len / 2.0,
        };
        let m = 0.5;
        let masses = RodMasses { rod: 1e-15, endcap: 1e-15, mount: m / 2.0 };
        let props = composite_mass_properties(&geom, &masses);
        let expected = m * d * d;
        assert!((props.inertia.x - expected).abs() < 1e-9 * expected);
        assert!(props.inertia.z < 1e-12);
    }

    #[test]
    fn cable_slack_at_rest_length() {
        let model = StiffnessModel::Linear { k: 100.0 };
        let f = cable_force(
            V3::v(0.0, 0.0, 0.0),
            V3::v(0.0, 0.0, 0.0),
            V3::v(1.0, 0.0, 0.0),
            V3::v(0.0, 0.0, 0.0),
            1.0,
            &model,
            0.0,
        );
        assert_eq!(f.tension, 0.0);
        assert_eq!(f.force_on_a.val(), V3::v(0.0, 0.0, 0.0));
        assert!(!f.degenerate);
    }

    #[test]
    fn cable_hooke_tension() {
        // k = 100 N/m stretched 0.02 m: 2 N pulling A toward B.
        let model = StiffnessModel::Linear { k: 100.0 };
        let f = cable_force(
            V3::v(0.0, 0.0, 0.0),
            V3::v(0.0, 0.0, 0.0),
            V3::v(1.02, 0.0, 0.0),
            V3::v(0.0, 0.0, 0.0),
            1.0,
            &model,
            0.0,
        );
        assert!((f.tension - 2.0).abs() < 1e-12);
        assert!((f.force_on_a.x - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cubic_tension_matches_naive_polynomial() {
        // Horner evaluation against independent term-by-term evaluation.
        let (c1, c2, c3) = (37.0, -11.5, 402.0);
        let model = StiffnessModel::Cubic { c1, c2, c3 };
        for &d in &[0.001, 0.0123, 0.05, 0.11] {
            let naive = c1 * d + c2 * d * d + c3 * d * d * d;
            let horner = model.tension(d);
            assert!((horner - naive).abs() <= 1e-12 * naive.abs().max(1.0));
        }
    }

    #[test]
    fn cable_degenerate_endpooints_flagged() {
        let model = StiffnessModel::Linear { k: 100.0 };
        let p = V3::v(0.5, 0.5, 0.5);
        let f = cable_force(p, V3::v(0.0, 0.0, 0.0), p, V3::v(0.0, 0.0, 0.0), 0.1, &model, 0.0);
        assert!(f.degenerate);
        assert_eq!(f.tension, 0.0);
    }

    #[test]
    fn damping_never_reverses_tension() {
        let model = StiffnessModel::Linear { k: 10.0 };
        // Strong approach speed against a small stretch: force clamps at zero.
        let f = cable_force(
            V3::v(0.0, 0.0, 0.0),
            V3::v(0.0, 0.0, 0.0),
            V3::v(1.001, 0.0, 0.0),
            V3::v(-5.0, 0.0, 0.0),
            1.0,
            &model,
            1.0,
        );
        assert_eq!(f.tension, 0.0);
    }

    fn free_body(z: f64) -> RodBody<f64> {
        let geom = RodGeometry::default_measured();
        let state = RodState::at_rest(V3::v(0.0, 0.0, z), Quat::identity());
        RodBody::new(&geom, &RodMasses::default_measured(), state)
    }

    fn no_contact() -> ContactParams<f64> {
        ContactParams { restitution: 0.0, friction: 0.0, ground_height: -1e9, normal: V3::v(0.0, 0.0, 1.0) }
    }

    #[test]
    fn free_fall_matches_closed_form_sum() {
        // z after N steps of semi-implicit Euler: -g dt^2 N(N+1)/2.
        let mut bodies = vec![free_body(0.0)];
        let forces = vec![ForceAccum::zero()];
        let dt = 0.01;
        for i in 0..100 {
            step(&mut bodies, &forces, &no_contact(), 9.81, dt, i).unwrap();
        }
        let expected = -9.81 * dt * dt * (100.0 * 101.0 / 2.0);
        assert!((bodies[0].state.pos.z - expected).abs() < 1e-12);
        assert!((expected + 4.954).abs() < 1e-3);
    }

    #[test]
    fn zero_forces_zero_gravity_is_fixed_point() {
        let mut bodies = vec![free_body(0.3)];
        let before = bodies[0].state.val();
        let forces = vec![ForceAccum::zero()];
        for i in 0..50 {
            step(&mut bodies, &forces, &no_contact(), 0.0, 1e-3, i).unwrap();
        }
        let after = bodies[0].state.val();
        assert_eq!(before.pos, after.pos);
        assert_eq!(before.orient, after.orient);
    }

    #[test]
    fn axial_spin_speed_is_conserved() {
        // Torque-free symmetric rod spinning about its long axis.
        let mut bodies = vec![free_body(0.0)];
        bodies[0].state.ang_vel = V3::v(0.0, 0.0, 7.0);
        let forces = vec![ForceAccum::zero()];
        for i in 0..1000 {
            step(&mut bodies, &forces, &no_contact(), 0.0, 1e-3, i).unwrap();
        }
        let w = bodies[0].state.ang_vel.val();
        assert!((w.norm() - 7.0).abs() < 1e-10);
        // Still along the rod axis.
        let axis = bodies[0].state.orient.rotate(V3::v(0.0, 0.0, 1.0));
        assert!((w.normalized().dot(axis) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn non_finite_state_aborts_with_step_index() {
        let mut bodies = vec![free_body(0.0)];
        let forces = vec![ForceAccum { force: V3::v(f64::INFINITY, 0.0, 0.0), torque: V3::v(0.0, 0.0, 0.0) }];
        let err = step(&mut bodies, &forces, &no_contact(), 9.81, 1e-3, 42).unwrap_err();
        match err {
            Error::NonFiniteState { step } => assert_eq!(step, 42),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn internal_cable_conserves_linear_momentum() {
        // Two rods joined by one taut cable, no gravity/contact: momentum
        // stays balanced to machine precision (Newton's third law).
        let geom = RodGeometry::default_measured();
        let masses = RodMasses::default_measured();
        let mut bodies = vec![
            RodBody::new(&geom, &masses, RodState::at_rest(V3::v(0.0, 0.0, 0.0), Quat::identity())),
            RodBody::new(&geom, &masses, RodState::at_rest(V3::v(0.5, 0.2, 0.1), Quat::identity())),
        ];
        let model = StiffnessModel::Linear { k: 50.0 };
        let attach = [V3::v(0.0, 0.01, 0.1), V3::v(0.0, -0.01, -0.12)];
        for i in 0..500 {
            let mut forces = vec![ForceAccum::zero(), ForceAccum::zero()];
            let pa = bodies[0].state.to_world(attach[0]);
            let pb = bodies[1].state.to_world(attach[1]);
            let va = bodies[0].state.point_velocity(attach[0]);
            let vb = bodies[1].state.point_velocity(attach[1]);
            let f = cable_force(pa, va, pb, vb, 0.52, &model, 0.05);
            forces[0].apply_at(f.force_on_a, pa, bodies[0].state.pos);
            forces[1].apply_at(-f.force_on_a, pb, bodies[1].state.pos);
            step(&mut bodies, &forces, &no_contact(), 0.0, 1e-3, i).unwrap();
            let p = bodies[0].state.lin_vel.scale(bodies[0].props.mass)
                + bodies[1].state.lin_vel.scale(bodies[1].props.mass);
            assert!(p.norm() < 1e-10, "momentum {:?} at step {i}", p);
        }
    }

    #[test]
    fn cable_force_is_differentiable_wrt_stiffness() {
        let tape = Tape::new();
        let k = tape.var(150.0).unwrap();
        let model = StiffnessModel::Linear { k };
        let f = cable_force(
            Vec3::from_f64(V3::v(0.0, 0.0, 0.0)),
            Vec3::zero(),
            Vec3::from_f64(V3::v(1.05, 0.0, 0.0)),
            Vec3::zero(),
            crate::Var::constant(1.0),
            &model,
            0.0,
        );
        let g = f.tension.backward();
        assert!((g.wrt(k) - 0.05).abs() < 1e-12);
    }
}
