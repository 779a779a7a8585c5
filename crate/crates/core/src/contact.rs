//! Ground contact with restitution and Coulomb friction.
//!
//! Contact impulses are passive responses: differentiated naively they
//! cancel the gradients of the quantities that caused them (a clamped body
//! reports zero sensitivity to the force pressing it into the ground). The
//! fix is to detach the impulse magnitudes from the tape while re-inserting
//! the contact parameters (restitution `e`, friction `mu`) through explicit
//! terms, so those parameters keep correctly signed gradients even while
//! the body is clamped:
//!
//! - normal response: `dv = -(1 + e) * detach(v_approach)`, position
//!   correction `detach(ground - x)`;
//! - friction response: `dv = -detach(v_t)`, capped by `dp = mu N dt / m`;
//!   in the static (sticking) branch the value-neutral term
//!   `-dp + detach(dp)` carries the gradient to `mu`.
//!
//! Detaching is applied per body: actuated bodies detach their contact
//! responses; bodies moved only by contact (a struck billiard ball) must
//! keep full gradients or the actuation upstream loses its path.
//!
//! The 1D step functions below implement the update recurrences literally
//! and are used directly by the toy problems; `resolve_ground_contacts`
//! composes the same rules per end cap in 3D, turning point impulses into
//! rigid-body velocity changes.

use crate::autodiff::Scalar;
use crate::dynamics::RodBody;
use crate::error::{Error, Result};
use crate::math::{Vec3, V3};

/// Approach speeds below this bounce inelastically regardless of `e`,
/// which suppresses micro-bounce jitter in resting contact. The value must
/// exceed the per-step approach speed a loaded resting cap picks up from
/// force integration (load/mass * dt, around 0.05-0.3 m/s here), or resting
/// contact turns into a permanent restitution chatter cycle.
pub const RESTITUTION_SPEED_THRESHOLD: f64 = 0.1;

/// The effective restitution ramps linearly from 0 at the threshold to the
/// full `e` at this multiple of it. A hard on/off threshold makes rollout
/// values discontinuous in the parameters (each grazing tap flips between
/// bouncing and not), which turns loss landscapes into sawtooth noise.
const RESTITUTION_RAMP_END: f64 = 2.0;

/// Restitution scale factor for a given approach speed (a plain value;
/// branch decisions never carry gradients).
fn restitution_ramp(approach_speed: f64) -> f64 {
    let v0 = RESTITUTION_SPEED_THRESHOLD;
    ((approach_speed - v0) / (v0 * (RESTITUTION_RAMP_END - 1.0))).clamp(0.0, 1.0)
}

/// Tangential speeds below this are treated as already sticking; there is
/// no sliding direction to rub against, so no friction impulse is produced.
const SLIDING_SPEED_EPS: f64 = 1e-12;

/// Penetration allowance of the 3D projection. Correcting the full depth
/// every step pumps potential energy into a resting body (lift, fall,
/// lift again); leaving a hair of overlap lets contacts come to rest.
const PENETRATION_SLOP: f64 = 3e-4;
/// Fraction of the excess depth corrected per step; resolving it all at
/// once turns slow creep into one-step position jumps.
const PROJECTION_RELAXATION: f64 = 0.3;
/// Caps this close above the surface still take velocity-level contact
/// handling. A loaded cap parked exactly on the boundary otherwise drops
/// out of contact for single steps and picks up free-fall kicks.
const CONTACT_PROXIMITY: f64 = 1e-4;

/// Learnable contact parameters plus the ground plane.
#[derive(Clone, Copy, Debug)]
pub struct ContactParams<S> {
    /// Restitution in [0, 1].
    pub restitution: S,
    /// Coulomb friction coefficient, >= 0.
    pub friction: S,
    /// Ground plane offset along `normal`: the plane is `p . normal = ground_height`.
    pub ground_height: f64,
    pub normal: V3,
}

impl<S: Scalar> ContactParams<S> {
    pub fn flat_ground(restitution: S, friction: S) -> Self {
        ContactParams { restitution, friction, ground_height: 0.0, normal: V3::v(0.0, 0.0, 1.0) }
    }
}

/// Diagnostic record of one resolved cap-ground contact.
#[derive(Clone, Copy, Debug)]
pub struct ContactEvent {
    pub body: usize,
    pub cap: usize,
    /// Penetration depth at the start of the step (>= 0 for real events).
    pub depth: f64,
    pub normal_impulse: f64,
    pub tangential_impulse: f64,
    /// Static-friction branch: tangential point velocity is exactly zeroed.
    pub sticking: bool,
}

/// Deferred penetration projections, applied after the position update.
pub struct ContactResolution<S> {
    pub events: Vec<ContactEvent>,
    corrections: Vec<(usize, S)>,
}

/// One restitution step of the 1D vertical recurrence.
///
/// `v' = v - g dt + (F/m) dt`; on contact (at or below ground, approaching)
/// `dv = -(1+e) detach(v')` so `dv'/dF = dt/m` survives the clamp; if the
/// point started below ground the position also gains `detach(ground - x)`.
/// With `detach = false` the impulse keeps its full gradient and the
/// response cancels the incoming sensitivity exactly.
pub fn restitution_step_1d<S: Scalar>(
    v: S,
    x: S,
    force: S,
    mass: S,
    e: S,
    gravity: f64,
    ground: f64,
    dt: f64,
    detach: bool,
) -> (S, S) {
    let v_pred = v - gravity * dt + force / mass * dt;
    let in_contact = x.val() <= ground && v_pred.val() < 0.0;
    let v_next = if in_contact {
        let e_eff = e * restitution_ramp(-v_pred.val());
        let dv = -(e_eff + 1.0) * v_pred.detach_if(detach);
        v_pred + dv
    } else {
        v_pred
    };
    let x_next = if x.val() < ground {
        let correction = (S::constant(ground) - x).detach_if(detach);
        x + v_next * dt + correction
    } else {
        x + v_next * dt
    };
    (v_next, x_next)
}

/// One friction step of the 1D horizontal recurrence.
///
/// `v' = v + (F/m) dt`; the stopping impulse `dv = -detach(v')` is capped by
/// the Coulomb budget `dp = mu N dt / m`. Kinetic branch: `dv` rescaled to
/// the cap (gradient `d v_next / d mu = -sign(v') N dt / m`). Static branch:
/// `dv <- dv - dp + detach(dp)`, value-neutral but keeping `mu` updatable.
pub fn friction_step_1d<S: Scalar>(
    v: S,
    x: S,
    force: S,
    mass: S,
    mu: S,
    normal_force: S,
    dt: f64,
    detach: bool,
) -> Result<(S, S)> {
    if normal_force.val() < 0.0 {
        return Err(Error::NegativeNormalForce(normal_force.val()));
    }
    let v_pred = v + force / mass * dt;
    let dv_full = -v_pred.detach_if(detach);
    let dp = mu * normal_force * dt / mass;
    let dv = if dv_full.val().abs() > dp.val() {
        // Kinetic: scale the stopping impulse down to the Coulomb budget.
        dv_full * dp / dv_full.abs()
    } else {
        // Static: value-neutral term that carries the gradient to mu.
        // Grouped so the added value is exactly zero and sticking stops
        // the point dead in forward value.
        dv_full + (dp.detach_if(detach) - dp)
    };
    let v_next = v + force / mass * dt + dv;
    let x_next = x + v_next * dt;
    Ok((v_next, x_next))
}

/// Resolves cap-ground contacts for every body, in body/cap index order.
///
/// Must run after the velocity update and before the position update of the
/// same step; the returned resolution is applied after the position update
/// via [`ContactResolution::apply_position_corrections`]. Impulses take
/// effect immediately (sequential single pass), so the resolution order is
/// part of the deterministic contract.
pub fn resolve_ground_contacts<S: Scalar>(
    bodies: &mut [RodBody<S>],
    params: &ContactParams<S>,
    dt: f64,
) -> ContactResolution<S> {
    let mut resolution = ContactResolution { events: Vec::new(), corrections: Vec::new() };
    for body_idx in 0..bodies.len() {
        for cap in 0..2 {
            resolve_cap(bodies, body_idx, cap, params, dt, &mut resolution);
        }
    }
    resolution
}

fn resolve_cap<S: Scalar>(
    bodies: &mut [RodBody<S>],
    body_idx: usize,
    cap: usize,
    params: &ContactParams<S>,
    dt: f64,
    resolution: &mut ContactResolution<S>,
) {
    let normal = params.normal;
    let body = &bodies[body_idx];
    let detach = body.detach_contact;
    let center = body.cap_center(cap);
    let n = Vec3::from_f64(normal);
    // Penetration depth of the lowest point of the spherical cap.
    let depth_taped = S::constant(params.ground_height) - (center.dot(n) - body.cap_radius);
    let depth = depth_taped.val();
    if depth < -CONTACT_PROXIMITY {
        return;
    }

    let contact_point = center - n.scale_f(body.cap_radius);
    let r = contact_point - body.state.pos;
    let point_vel = body.state.lin_vel + body.state.ang_vel.cross(r);
    let v_n = point_vel.dot(n);

    let inv_mass = 1.0 / body.props.mass.val();
    let inertia = body.props.inertia.val();
    let orient = body.state.orient.val();
    let r_val = r.val();

    // Effective mass of the contact point along a world direction; a pure
    // geometry factor, evaluated on values.
    let eff_mass = |dir: V3| -> f64 {
        let rxd = orient.rotate_inv(r_val.cross(dir));
        let ang = rxd.x * rxd.x / inertia.x + rxd.y * rxd.y / inertia.y + rxd.z * rxd.z / inertia.z;
        1.0 / (inv_mass + ang)
    };

    // Distributes a contact-point velocity change `dv` along `dir` into
    // body linear/angular velocity. Geometry factors are plain values.
    let distribute = |body: &mut RodBody<S>, dir: V3, dv: S, m_eff: f64| {
        body.state.lin_vel += Vec3::from_f64(dir).scale(dv * (m_eff * inv_mass));
        let rxd_body = orient.rotate_inv(r_val.cross(dir));
        let gain = orient.rotate(V3::v(
            rxd_body.x / inertia.x,
            rxd_body.y / inertia.y,
            rxd_body.z / inertia.z,
        ));
        body.state.ang_vel += Vec3::from_f64(gain).scale(dv * m_eff);
    };

    let mut normal_impulse = 0.0;
    let mut tangential_impulse = 0.0;
    let mut sticking = false;
    let mut normal_force = S::zero();

    // Normal response, only while the point approaches the ground.
    if v_n.val() < 0.0 {
        let e_eff = params.restitution * restitution_ramp(-v_n.val());
        let dv_n = -(e_eff + 1.0) * v_n.detach_if(detach);
        let m_eff_n = eff_mass(normal);
        distribute(&mut bodies[body_idx], normal, dv_n, m_eff_n);
        normal_impulse = m_eff_n * dv_n.val();
        // N for the Coulomb budget: this step's normal impulse over dt.
        normal_force = (dv_n * (m_eff_n / dt)).detach_if(detach);
    }

    // Friction response against the (post-impulse) tangential point velocity.
    if normal_impulse > 0.0 {
        let body = &bodies[body_idx];
        let point_vel = body.state.lin_vel + body.state.ang_vel.cross(r);
        let v_t_vec = point_vel - n.scale(point_vel.dot(n));
        let speed = v_t_vec.val().norm();
        if speed > SLIDING_SPEED_EPS {
            let t_hat = v_t_vec.val().scale(1.0 / speed);
            let m_eff_t = eff_mass(t_hat);
            let v_t = v_t_vec.dot(Vec3::from_f64(t_hat));
            let dv_full = -v_t.detach_if(detach);
            let dp = params.friction * normal_force * (dt / m_eff_t);
            let dv_t = if dv_full.val().abs() > dp.val() {
                dv_full * dp / dv_full.abs()
            } else {
                sticking = true;
                dv_full + (dp.detach_if(detach) - dp)
            };
            distribute(&mut bodies[body_idx], t_hat, dv_t, m_eff_t);
            tangential_impulse = (m_eff_t * dv_t.val()).abs();
        }
    }

    resolution.events.push(ContactEvent {
        body: body_idx,
        cap,
        depth: depth.max(0.0),
        normal_impulse,
        tangential_impulse,
        sticking,
    });

    if depth > PENETRATION_SLOP {
        let correction =
            ((depth_taped - PENETRATION_SLOP) * PROJECTION_RELAXATION).detach_if(detach);
        match resolution.corrections.iter_mut().find(|(b, _)| *b == body_idx) {
            // Both caps of one rod penetrating: keep the deeper projection.
            Some((_, existing)) => {
                if correction.val() > existing.val() {
                    *existing = correction;
                }
            }
            None => resolution.corrections.push((body_idx, correction)),
        }
    }
}

impl<S: Scalar> ContactResolution<S> {
    /// Translates each penetrating rod along the ground normal by the depth
    /// its deepest cap had at the start of the step (detached per body).
    pub fn apply_position_corrections(&self, bodies: &mut [RodBody<S>], params: &ContactParams<S>) {
        let n = Vec3::from_f64(params.normal);
        for &(body, depth) in &self.corrections {
            bodies[body].state.pos += n.scale(depth);
        }
    }
}
