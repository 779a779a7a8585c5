//! The runtime robot: three rods, nine cables, a PID length controller and
//! the policy execution loop. Generic over the scalar type so the same
//! rollout runs plain (planning) or taped (identification).

use crate::autodiff::Scalar;
use crate::contact::ContactParams;
use crate::dynamics::{cable_force, step, ForceAccum, RodBody, RodState, StiffnessModel};
use crate::error::{Error, Result};
use crate::math::{Qf, Vec3, V3};

use super::description::RobotDescription;
use super::model::{CableKind, RobotModel};
use super::trajectory::{ControlPolicy, Dir, Frame, Trajectory, TrajectoryMeta};

/// Physical parameters a rollout can differentiate against. Everything
/// else (geometry, gains, timing) stays plain.
#[derive(Clone, Copy, Debug)]
pub struct ParamSet<S> {
    pub motor_speed: S,
    pub friction: S,
    pub restitution: S,
    pub rod_mass: S,
    pub endcap_mass: S,
    pub mount_mass: S,
    pub actuated_stiffness: S,
    pub tendon_c1: S,
    pub tendon_c2: S,
    pub tendon_c3: S,
}

pub const PARAM_NAMES: [&str; 10] = [
    "motor_speed",
    "friction",
    "restitution",
    "rod_mass",
    "endcap_mass",
    "mount_mass",
    "actuated_stiffness",
    "tendon_c1",
    "tendon_c2",
    "tendon_c3",
];

impl ParamSet<f64> {
    pub fn nominal(desc: &RobotDescription) -> Self {
        let (_, masses) = desc.rod.to_si();
        ParamSet {
            motor_speed: desc.params.motor_speed,
            friction: desc.params.friction,
            restitution: desc.params.restitution,
            rod_mass: masses.rod,
            endcap_mass: masses.endcap,
            mount_mass: masses.mount,
            actuated_stiffness: desc.actuated_stiffness_n_per_m,
            tendon_c1: desc.tendon_polynomial.c1_n_per_m,
            tendon_c2: desc.tendon_polynomial.c2_n_per_m2,
            tendon_c3: desc.tendon_polynomial.c3_n_per_m3,
        }
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        Ok(match name {
            "motor_speed" => self.motor_speed,
            "friction" => self.friction,
            "restitution" => self.restitution,
            "rod_mass" => self.rod_mass,
            "endcap_mass" => self.endcap_mass,
            "mount_mass" => self.mount_mass,
            "actuated_stiffness" => self.actuated_stiffness,
            "tendon_c1" => self.tendon_c1,
            "tendon_c2" => self.tendon_c2,
            "tendon_c3" => self.tendon_c3,
            _ => return Err(Error::UnknownParameter(name.to_string())),
        })
    }

    pub fn set(&mut self, name: &str, v: f64) -> Result<()> {
        match name {
            "motor_speed" => self.motor_speed = v,
            "friction" => self.friction = v,
            "restitution" => self.restitution = v,
            "rod_mass" => self.rod_mass = v,
            "endcap_mass" => self.endcap_mass = v,
            "mount_mass" => self.mount_mass = v,
            "actuated_stiffness" => self.actuated_stiffness = v,
            "tendon_c1" => self.tendon_c1 = v,
            "tendon_c2" => self.tendon_c2 = v,
            "tendon_c3" => self.tendon_c3 = v,
            _ => return Err(Error::UnknownParameter(name.to_string())),
        }
        Ok(())
    }
}

impl<S: Scalar> ParamSet<S> {
    /// Lifts nominal values to constants, replacing the named entries.
    pub fn lift_with(nominal: &ParamSet<f64>, overrides: &[(&str, S)]) -> Result<Self> {
        let mut out = ParamSet {
            motor_speed: S::constant(nominal.motor_speed),
            friction: S::constant(nominal.friction),
            restitution: S::constant(nominal.restitution),
            rod_mass: S::constant(nominal.rod_mass),
            endcap_mass: S::constant(nominal.endcap_mass),
            mount_mass: S::constant(nominal.mount_mass),
            actuated_stiffness: S::constant(nominal.actuated_stiffness),
            tendon_c1: S::constant(nominal.tendon_c1),
            tendon_c2: S::constant(nominal.tendon_c2),
            tendon_c3: S::constant(nominal.tendon_c3),
        };
        for (name, v) in overrides {
            match *name {
                "motor_speed" => out.motor_speed = *v,
                "friction" => out.friction = *v,
                "restitution" => out.restitution = *v,
                "rod_mass" => out.rod_mass = *v,
                "endcap_mass" => out.endcap_mass = *v,
                "mount_mass" => out.mount_mass = *v,
                "actuated_stiffness" => out.actuated_stiffness = *v,
                "tendon_c1" => out.tendon_c1 = *v,
                "tendon_c2" => out.tendon_c2 = *v,
                "tendon_c3" => out.tendon_c3 = *v,
                other => return Err(Error::UnknownParameter(other.to_string())),
            }
        }
        Ok(out)
    }

    pub fn masses(&self) -> crate::dynamics::RodMasses<S> {
        crate::dynamics::RodMasses { rod: self.rod_mass, endcap: self.endcap_mass, mount: self.mount_mass }
    }
}

/// Outcome of driving one policy step to completion.
#[derive(Clone, Copy, Debug)]
pub struct StepOutcome {
    pub duration: f64,
    pub completed: bool,
}

/// Live robot instance. Cheap to construct; clone the whole thing for
/// independent rollouts.
#[derive(Clone)]
pub struct Assembly<'m, S: Scalar> {
    pub model: &'m RobotModel,
    pub params: ParamSet<S>,
    pub bodies: Vec<RodBody<S>>,
    /// Motor spool positions, normalized [0, 1] per actuated cable.
    pub spools: [S; 6],
    integral: [S; 6],
    prev_err: [S; 6],
    /// Low-pass filtered sensed lengths (normalized) feeding the PID.
    filtered: [S; 6],
    /// Spool rates commanded at the last control tick.
    rates: [S; 6],
    /// Current policy targets being chased.
    pub commanded: [f64; 6],
    pub dirs: [Dir; 6],
    pub active_step: usize,
    pub time: f64,
    pub step_count: u64,
    /// Contact events of the most recent simulation step.
    pub last_events: Vec<crate::contact::ContactEvent>,
}

impl<'m, S: Scalar> Assembly<'m, S> {
    /// New assembly in the model's rest pose with fully extended cables.
    pub fn new(model: &'m RobotModel, params: ParamSet<S>) -> Self {
        Self::with_states(model, params, &model.rest_pose)
    }

    pub fn with_states(model: &'m RobotModel, params: ParamSet<S>, states: &[RodState<f64>; 3]) -> Self {
        let masses = params.masses();
        let bodies = states
            .iter()
            .map(|s| RodBody::new(&model.geom, &masses, RodState::lift(s)))
            .collect();
        Assembly {
            model,
            params,
            bodies,
            spools: [S::one(); 6],
            integral: [S::zero(); 6],
            prev_err: [S::zero(); 6],
            filtered: [S::one(); 6],
            rates: [S::zero(); 6],
            commanded: [1.0; 6],
            dirs: [Dir::Hold; 6],
            active_step: 0,
            time: 0.0,
            step_count: 0,
            last_events: Vec::new(),
        }
    }

    /// Lifts a plain assembly into another scalar type (typically onto a
    /// tape): all state becomes constants, parameters come from `params`.
    pub fn lift_as<T: Scalar>(src: &Assembly<'m, f64>, params: ParamSet<T>) -> Assembly<'m, T> {
        let masses = params.masses();
        let bodies = src
            .bodies
            .iter()
            .map(|b| {
                let mut body = RodBody::new(&src.model.geom, &masses, RodState::lift(&b.state.val()));
                body.detach_contact = b.detach_contact;
                body
            })
            .collect();
        Assembly {
            model: src.model,
            params,
            bodies,
            spools: src.spools.map(|v| T::constant(v.val())),
            integral: src.integral.map(|v| T::constant(v.val())),
            prev_err: src.prev_err.map(|v| T::constant(v.val())),
            filtered: src.filtered.map(|v| T::constant(v.val())),
            rates: src.rates.map(|v| T::constant(v.val())),
            commanded: src.commanded,
            dirs: src.dirs,
            active_step: src.active_step,
            time: src.time,
            step_count: src.step_count,
            last_events: Vec::new(),
        }
    }

    /// Stop-gradients the entire carried state (the between-window detach
    /// of the key-frame loss).
    pub fn detach_state(&mut self) {
        for b in &mut self.bodies {
            b.state = b.state.detach();
        }
        for k in 0..6 {
            self.spools[k] = self.spools[k].detach();
            self.integral[k] = self.integral[k].detach();
            self.prev_err[k] = self.prev_err[k].detach();
            self.filtered[k] = self.filtered[k].detach();
            self.rates[k] = self.rates[k].detach();
        }
    }

    pub fn contact_params(&self) -> ContactParams<S> {
        ContactParams {
            restitution: self.params.restitution,
            friction: self.params.friction,
            ground_height: 0.0,
            normal: V3::v(0.0, 0.0, 1.0),
        }
    }

    /// Sensed cable lengths: geometric attachment-point distances, exact.
    pub fn sensed_lengths(&self) -> [S; 9] {
        let mut out = [S::zero(); 9];
        for cable in &self.model.cables {
            let pa = self.bodies[cable.rod_a].state.to_world(Vec3::from_f64(cable.offset_a));
            let pb = self.bodies[cable.rod_b].state.to_world(Vec3::from_f64(cable.offset_b));
            out[cable.channel()] = (pb - pa).norm();
        }
        out
    }

    /// Normalized length of an actuated cable's sensor channel.
    fn normalize(&self, idx: usize, length: S) -> S {
        let c = &self.model.cables[self.model.actuated_cable_index(idx)];
        (length - c.min_length) * (1.0 / (c.max_length - c.min_length))
    }

    /// One simulation step: sensing, PID spool update, cable forces,
    /// integration with contact.
    pub fn step_sim(&mut self) -> Result<()> {
        let dt = self.model.dt;
        let gains = self.model.desc.pid;
        let deadband = self.model.desc.control.deadband;
        let mut forces = vec![ForceAccum::<S>::zero(); 3];
        let mut lengths = [S::zero(); 9];

        for cable in &self.model.cables {
            let offset_a = Vec3::from_f64(cable.offset_a);
            let offset_b = Vec3::from_f64(cable.offset_b);
            let pa = self.bodies[cable.rod_a].state.to_world(offset_a);
            let pb = self.bodies[cable.rod_b].state.to_world(offset_b);
            let va = self.bodies[cable.rod_a].state.point_velocity(offset_a);
            let vb = self.bodies[cable.rod_b].state.point_velocity(offset_b);
            let (rest, model): (S, StiffnessModel<S>) = match cable.kind {
                CableKind::Actuated(k) => {
                    // The spool reels to the sensed-length target divided by
                    // the pretension factor, so a cable holding its target
                    // carries tension rather than hanging slack.
                    let target_len =
                        self.spools[k] * (cable.max_length - cable.min_length) + cable.min_length;
                    let rest = target_len * (1.0 / (1.0 + self.model.desc.actuated_prestrain));
                    (rest, StiffnessModel::Linear { k: self.params.actuated_stiffness })
                }
                CableKind::Passive(_) => (
                    S::constant(cable.rest_length),
                    StiffnessModel::Cubic {
                        c1: self.params.tendon_c1,
                        c2: self.params.tendon_c2,
                        c3: self.params.tendon_c3,
                    },
                ),
            };
            let f = cable_force(pa, va, pb, vb, rest, &model, cable.damping);
            lengths[cable.channel()] = f.length;
            if !f.degenerate {
                forces[cable.rod_a].apply_at(f.force_on_a, pa, self.bodies[cable.rod_a].state.pos);
                forces[cable.rod_b].apply_at(-f.force_on_a, pb, self.bodies[cable.rod_b].state.pos);
            }
        }

        // PID on the low-pass filtered sensed length, updated at the control
        // rate; the spool rate holds between updates and is clamped to the
        // motor's speed limit.
        let control_every = ((1.0 / (self.model.desc.control.rate_hz * dt)).round() as u64).max(1);
        let filter_gain = (dt / self.model.desc.control.filter_tau_s).min(1.0);
        let control_dt = control_every as f64 * dt;
        for k in 0..6 {
            let sensed = self.normalize(k, lengths[self.model.actuated_channel(k)]);
            self.filtered[k] = self.filtered[k] + (sensed - self.filtered[k]) * filter_gain;
            if self.step_count % control_every == 0 {
                let err = S::constant(self.commanded[k]) - self.filtered[k];
                // Soft deadband: the command fades in over [deadband, 2*deadband]
                // so the rollout stays value-continuous in the parameters.
                let fade = ((err.val().abs() - deadband) / deadband).clamp(0.0, 1.0);
                if fade == 0.0 {
                    self.prev_err[k] = err;
                    self.rates[k] = S::zero();
                } else {
                    self.integral[k] = (self.integral[k] + err * control_dt).clamp(-0.5, 0.5);
                    let deriv = (err - self.prev_err[k]) * (1.0 / control_dt);
                    self.prev_err[k] = err;
                    let raw = (err * gains.kp + self.integral[k] * gains.ki + deriv * gains.kd) * fade;
                    self.rates[k] = raw.max(-self.params.motor_speed).min(self.params.motor_speed);
                }
            }
            self.spools[k] = (self.spools[k] + self.rates[k] * dt).clamp(0.0, 1.0);
        }

        let contact = self.contact_params();
        self.last_events =
            step(&mut self.bodies, &forces, &contact, self.model.gravity, dt, self.step_count)?;
        self.time += dt;
        self.step_count += 1;
        Ok(())
    }

    pub fn cap_positions(&self) -> [Vec3<S>; 6] {
        let mut out = [Vec3::zero(); 6];
        for rod in 0..3 {
            for cap in 0..2 {
                out[rod * 2 + cap] = self.bodies[rod].cap_center(cap);
            }
        }
        out
    }

    /// Largest cap-center speed, the quiescence measure for settling.
    pub fn max_cap_speed(&self) -> f64 {
        let mut max = 0.0f64;
        for rod in 0..3 {
            for cap in 0..2 {
                let v = self.bodies[rod].state.point_velocity(self.bodies[rod].cap_offsets[cap]).val();
                max = max.max(v.norm());
            }
        }
        max
    }

    pub fn frame(&self) -> Frame<S> {
        self.frame_with(self.sensed_lengths())
    }

    /// Frame from already-computed sensed lengths (avoids re-taping them).
    pub fn frame_with(&self, lengths: [S; 9]) -> Frame<S> {
        Frame {
            t: self.time,
            caps: self.cap_positions(),
            lengths,
            step: self.active_step,
            dirs: self.dirs,
        }
    }

    /// Simulates with controls held until every cap is quiescent
    /// (max cap speed < 1e-4 m/s) or the budget elapses.
    ///
    /// A cable structure keeps ringing at low amplitude far longer than the
    /// budget, so the budget exit still succeeds when the robot is clearly
    /// at rest: at least three caps in ground contact and every cap slower
    /// than the coarse bound. Anything else (airborne, rolling, diverging)
    /// reports the residual speed.
    pub fn settle(&mut self) -> Result<()> {
        if self.model.gravity <= 0.0 {
            return Err(Error::ZeroGravity(self.model.gravity));
        }
        // Already at a supported fixed point? A probe step on a clone
        // distinguishes genuine force balance from a merely motionless pose.
        if self.max_cap_speed() < SETTLE_SPEED && self.supported_caps() >= 3 {
            let mut probe = self.clone();
            probe.step_sim()?;
            if probe.max_cap_speed() < 3.0 * SETTLE_SPEED {
                return Ok(());
            }
        }
        let budget = self.model.desc.sim.settle_budget_s;
        let steps = (budget / self.model.dt).ceil() as usize;
        let mut residual = f64::INFINITY;
        for _ in 0..steps {
            self.step_sim()?;
            residual = self.max_cap_speed();
            if residual < SETTLE_SPEED {
                return Ok(());
            }
        }
        if self.supported_caps() >= 3 && residual < SETTLE_COARSE_SPEED {
            return Ok(());
        }
        Err(Error::SettleFailed { budget, residual })
    }

    /// Caps within a millimeter of the ground.
    pub fn supported_caps(&self) -> usize {
        self.cap_positions()
            .iter()
            .filter(|c| c.val().z < self.model.geom.endcap_radius + 1e-3)
            .count()
    }

    /// Runs one policy step until all cables reach their targets or the
    /// timeout fires. `on_frame` sees the assembly and the current sensed
    /// lengths after every sim step.
    pub fn advance_policy_step(
        &mut self,
        targets: [f64; 6],
        dirs: [Dir; 6],
        tolerance: f64,
        timeout: f64,
        mut on_frame: impl FnMut(&Assembly<'m, S>, &[S; 9]),
    ) -> Result<StepOutcome> {
        self.commanded = targets;
        self.dirs = dirs;
        let start = self.time;
        let max_steps = (timeout / self.model.dt).ceil() as usize;
        for _ in 0..max_steps {
            self.step_sim()?;
            let lengths = self.sensed_lengths();
            on_frame(self, &lengths);
            if self.step_satisfied(targets, tolerance, &lengths) {
                return Ok(StepOutcome { duration: self.time - start, completed: true });
            }
        }
        Ok(StepOutcome { duration: self.time - start, completed: false })
    }

    /// A policy step is satisfied when every cable's sensed length is
    /// within tolerance of its target, or its winch has reached (or
    /// passed) the commanded spool position in the direction of the
    /// remaining error — elastic stretch under load can hold the sensed
    /// length away from what the motor was asked to do, and the motor can
    /// do no more.
    pub fn step_satisfied(&self, targets: [f64; 6], tolerance: f64, lengths: &[S; 9]) -> bool {
        for k in 0..6 {
            let sensed = self.normalize(k, lengths[self.model.actuated_channel(k)]).val();
            let err = targets[k] - sensed;
            if err.abs() < tolerance {
                continue;
            }
            let spool = self.spools[k].val();
            let motor_done =
                (err < 0.0 && spool <= targets[k] + 1e-9) || (err > 0.0 && spool >= targets[k] - 1e-9);
            if !motor_done {
                return false;
            }
        }
        true
    }

    /// Executes a whole policy from the current state, recording frames at
    /// the model's sensor rate. A step timeout truncates the trajectory and
    /// flags it in the metadata.
    pub fn execute_policy(&mut self, policy: &ControlPolicy) -> Result<Trajectory<S>> {
        policy.validate()?;
        let sensor_dt = 1.0 / self.model.sensor_rate;
        // The initial frame belongs to the first step's interval, so it
        // carries that step's direction codes.
        if !policy.steps.is_empty() {
            self.active_step = 0;
            self.dirs = policy.directions(0);
        }
        let mut frames = vec![self.frame()];
        let mut next_sample = self.time + sensor_dt;
        let mut truncated = false;
        for (idx, &targets) in policy.steps.iter().enumerate() {
            self.active_step = idx;
            let dirs = policy.directions(idx);
            let dt = self.model.dt;
            let outcome = self.advance_policy_step(
                targets,
                dirs,
                policy.tolerance,
                policy.timeout,
                |asm, lengths| {
                    if asm.time + 0.5 * dt >= next_sample {
                        frames.push(asm.frame_with(*lengths));
                        next_sample += sensor_dt;
                    }
                },
            )?;
            if !outcome.completed {
                truncated = true;
                break;
            }
        }
        Ok(Trajectory {
            meta: TrajectoryMeta {
                robot_hash: self.model.hash.clone(),
                seed: None,
                dt: self.model.dt,
                sensor_rate: self.model.sensor_rate,
                truncated,
            },
            frames,
        })
    }
}

const SETTLE_SPEED: f64 = 1e-4;
const SETTLE_COARSE_SPEED: f64 = 5e-2;

/// Fits the assembly state to an observed frame: rigid per-rod pose from
/// the cap pair, spool targets from the sensed lengths, then settling so
/// the supporting caps actually touch the ground.
pub fn align_initial_state<'m>(
    model: &'m RobotModel,
    caps: &[V3; 6],
    lengths: &[f64; 9],
) -> Result<Assembly<'m, f64>> {
    // Cap-pairing sanity: caps of different rods must be distinguishable.
    for i in 0..6 {
        for j in (i + 1)..6 {
            if i / 2 != j / 2 {
                let d = caps[i].dist(caps[j]);
                if d < 1e-3 {
                    return Err(Error::AmbiguousCapPairing { a: i, b: j, dist_mm: d * 1e3 });
                }
            }
        }
    }

    let states = fit_states_to_caps(model, caps, &model.rest_pose);

    // Cable-length consistency: implied attachment distances must match the
    // sensed channels, catching swapped cap pairings.
    for cable in &model.cables {
        let pa = states[cable.rod_a].to_world(Vec3::from_f64(cable.offset_a));
        let pb = states[cable.rod_b].to_world(Vec3::from_f64(cable.offset_b));
        let implied = (pb - pa).norm();
        let sensed = lengths[cable.channel()];
        if (implied - sensed).abs() > CONSISTENCY_TOL {
            return Err(Error::CableConsistency {
                channel: cable.channel(),
                implied,
                sensed,
            });
        }
    }

    let params = ParamSet::nominal(&model.desc);
    let mut asm = Assembly::with_states(model, params, &states);
    // Control targets chase the observed shape; the unobservable spool
    // positions start at the zero-stretch inversion of the sensed lengths
    // (assuming the observed length is what the motor asked for), which the
    // PID then corrects against the real tension balance.
    let pre = 1.0 + model.desc.actuated_prestrain;
    let mut targets = [1.0f64; 6];
    for k in 0..6 {
        let c = &model.cables[model.actuated_cable_index(k)];
        let len = lengths[model.actuated_channel(k)];
        let norm = (len - c.min_length) / (c.max_length - c.min_length);
        targets[k] = norm.clamp(0.0, 1.0);
        let zero_stretch = (pre * len - c.min_length) / (c.max_length - c.min_length);
        asm.spools[k] = zero_stretch.clamp(0.0, 1.0);
        asm.filtered[k] = norm.clamp(0.0, 1.0);
    }
    asm.commanded = targets;
    asm.settle()?;
    Ok(asm)
}

const CONSISTENCY_TOL: f64 = 5e-3;

/// Rigid per-rod fit to observed cap positions: position from the cap
/// midpoint, axis from the cap pair, and the roll (unobservable from two
/// points) taken as the minimal rotation from the reference orientation.
pub fn fit_states_to_caps(
    model: &RobotModel,
    caps: &[V3; 6],
    reference: &[RodState<f64>; 3],
) -> [RodState<f64>; 3] {
    std::array::from_fn(|rod| {
        let c0 = caps[rod * 2];
        let c1 = caps[rod * 2 + 1];
        let axis = (c0 - c1).normalized();
        let ref_axis = reference[rod].orient.rotate(V3::v(0.0, 0.0, 1.0));
        let q = Qf::between(ref_axis, axis).mul(reference[rod].orient).normalized();
        let _ = &model;
        RodState {
            pos: (c0 + c1).scale(0.5),
            orient: q,
            lin_vel: V3::v(0.0, 0.0, 0.0),
            ang_vel: V3::v(0.0, 0.0, 0.0),
        }
    })
}
