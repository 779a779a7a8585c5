//! The identification loop: differentiable rollouts mirroring the observed
//! policy, a choice of loss, and Adam with per-parameter projection.

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::opt::{Adam, Bounds};
use crate::robot::{
    align_initial_state, assembly::fit_states_to_caps, Assembly, ControlPolicy, Dir, Frame,
    ParamSet, RobotModel, Trajectory,
};

use super::{
    align_key_frames, all_step_loss, frame_defect, key_frame_loss, last_step_loss, naive_loss,
    segment_gaits_frames, window_spans, GaitSegment,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossKind {
    Kfl,
    AllStep { windows: usize },
    LastStep { windows: usize },
    Ms { windows: usize },
    Naive,
}

impl LossKind {
    pub fn parse(s: &str) -> Option<LossKind> {
        match s {
            "kfl" => Some(LossKind::Kfl),
            "naive" => Some(LossKind::Naive),
            "allstep" => Some(LossKind::AllStep { windows: 4 }),
            "laststep" => Some(LossKind::LastStep { windows: 4 }),
            _ => {
                if let Some(k) = s.strip_prefix("ms:") {
                    return k.parse().ok().map(|windows| LossKind::Ms { windows });
                }
                if let Some(k) = s.strip_prefix("allstep:") {
                    return k.parse().ok().map(|windows| LossKind::AllStep { windows });
                }
                if let Some(k) = s.strip_prefix("laststep:") {
                    return k.parse().ok().map(|windows| LossKind::LastStep { windows });
                }
                None
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            LossKind::Kfl => "kfl".into(),
            LossKind::Naive => "naive".into(),
            LossKind::AllStep { windows } => format!("allstep:{windows}"),
            LossKind::LastStep { windows } => format!("laststep:{windows}"),
            LossKind::Ms { windows } => format!("ms:{windows}"),
        }
    }
}

/// One learnable parameter with projection bounds.
#[derive(Clone, Debug)]
pub struct ParamSpec {
    pub name: String,
    pub init: f64,
    pub bounds: Bounds,
}

impl ParamSpec {
    /// Default bounds per parameter: motor speed (0, 2], friction [0, 2],
    /// restitution [0, 1]; broad positive ranges otherwise.
    pub fn for_name(name: &str, init: f64) -> Result<ParamSpec> {
        let bounds = match name {
            "motor_speed" => Bounds::new(1e-3, 2.0),
            "friction" => Bounds::new(0.0, 2.0),
            "restitution" => Bounds::new(0.0, 1.0),
            "rod_mass" | "endcap_mass" | "mount_mass" => Bounds::new(1e-5, 1.0),
            "actuated_stiffness" => Bounds::new(1.0, 1e5),
            "tendon_c1" | "tendon_c2" | "tendon_c3" => Bounds::new(0.0, 1e7),
            other => return Err(Error::UnknownParameter(other.to_string())),
        };
        Ok(ParamSpec { name: name.to_string(), init, bounds })
    }
}

#[derive(Clone, Debug)]
pub struct SysIdProblem<'m> {
    pub model: &'m RobotModel,
    pub gt: Trajectory<f64>,
    pub params: Vec<ParamSpec>,
    pub loss: LossKind,
    pub iterations: usize,
    pub learning_rate: f64,
    /// Policy that produced the trajectory; recovered from the direction
    /// codes and sensed lengths when absent.
    pub policy: Option<ControlPolicy>,
}

#[derive(Clone, Debug)]
pub struct IterationRow {
    pub loss: f64,
    pub params: Vec<f64>,
    pub grads: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct IdentifyReport {
    pub names: Vec<String>,
    pub rows: Vec<IterationRow>,
    pub final_params: Vec<f64>,
}

impl IdentifyReport {
    pub fn final_value(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.final_params[i])
    }

    /// Plot-ready dump: `iter loss p0 p1 ...` per line.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("iter\tloss");
        for n in &self.names {
            out.push_str(&format!("\t{n}\tgrad_{n}"));
        }
        out.push('\n');
        for (i, row) in self.rows.iter().enumerate() {
            out.push_str(&format!("{i}\t{:.9e}", row.loss));
            for (p, g) in row.params.iter().zip(&row.grads) {
                out.push_str(&format!("\t{:.9e}\t{:.9e}", p, g));
            }
            out.push('\n');
        }
        out
    }
}

/// Reconstructs the policy a trajectory executed: one step per gait
/// segment, targets read from the final sensed lengths (direction codes
/// pin cables that merely held).
pub fn policy_from_trajectory(model: &RobotModel, traj: &Trajectory<f64>) -> Result<ControlPolicy> {
    let segs = segment_gaits_frames(&traj.frames)?;
    let mut steps = Vec::with_capacity(segs.len());
    let mut prev = [1.0f64; 6];
    for seg in &segs {
        let last = &traj.frames[seg.end];
        let mut targets = prev;
        for k in 0..6 {
            if seg.dirs[k] != Dir::Hold {
                let c = &model.cables[model.actuated_cable_index(k)];
                let norm = (last.lengths[model.actuated_channel(k)] - c.min_length)
                    / (c.max_length - c.min_length);
                targets[k] = norm.clamp(0.0, 1.0);
            }
        }
        steps.push(targets);
        prev = targets;
    }
    ControlPolicy::new(
        steps,
        model.desc.control.tolerance,
        model.desc.pid,
        model.desc.control.step_timeout_s,
    )
}

/// Verifies a user-provided policy agrees with the trajectory's gait
/// structure (same segment count and direction codes after merging).
pub fn check_policy_matches(gt_segs: &[GaitSegment], policy: &ControlPolicy) -> Result<()> {
    let mut merged: Vec<[Dir; 6]> = Vec::new();
    for i in 0..policy.steps.len() {
        let dirs = policy.directions(i);
        if merged.last() != Some(&dirs) {
            merged.push(dirs);
        }
    }
    let gt_dirs: Vec<[Dir; 6]> = gt_segs.iter().map(|s| s.dirs).collect();
    if merged != gt_dirs {
        let at = merged
            .iter()
            .zip(&gt_dirs)
            .position(|(a, b)| a != b)
            .unwrap_or(merged.len().min(gt_dirs.len()));
        return Err(Error::GaitCountMismatch { gt: gt_dirs.len(), predicted: merged.len(), at });
    }
    Ok(())
}

/// Control schedule of one rollout: per-step targets and direction codes.
#[derive(Clone, Debug)]
pub struct Schedule {
    pub steps: Vec<([f64; 6], [Dir; 6])>,
    pub tolerance: f64,
    pub timeout: f64,
}

impl Schedule {
    pub fn from_policy(policy: &ControlPolicy) -> Schedule {
        Schedule {
            steps: (0..policy.steps.len())
                .map(|i| (policy.steps[i], policy.directions(i)))
                .collect(),
            tolerance: policy.tolerance,
            timeout: policy.timeout,
        }
    }
}

/// Differentiable rollout following a schedule from an aligned start.
/// Records a frame every simulation step; timeouts move on to the next
/// step rather than truncating (gait counts must match the observation).
pub fn rollout<'t, 'm>(
    _tape: &'t Tape,
    start: &Assembly<'m, f64>,
    params: ParamSet<Var<'t>>,
    schedule: &Schedule,
    detach_between_steps: bool,
) -> Result<Vec<Frame<Var<'t>>>> {
    let mut asm = Assembly::<f64>::lift_as(start, params);
    let mut frames = Vec::new();
    if let Some(&(_, dirs)) = schedule.steps.first() {
        asm.dirs = dirs;
    }
    frames.push(asm.frame());
    for (idx, &(targets, dirs)) in schedule.steps.iter().enumerate() {
        asm.active_step = idx;
        asm.advance_policy_step(targets, dirs, schedule.tolerance, schedule.timeout, |a, lengths| {
            frames.push(a.frame_with(*lengths));
        })?;
        if detach_between_steps {
            asm.detach_state();
        }
    }
    Ok(frames)
}

/// Multiple-shooting rollout: the same schedule, but at each window
/// boundary of the observed timeline the rod poses are re-anchored to the
/// observed cap positions (velocities and controller state carried over,
/// detached), paying a squared defect at each boundary.
fn ms_loss<'t, 'm>(
    start: &Assembly<'m, f64>,
    params: ParamSet<Var<'t>>,
    schedule: &Schedule,
    gt_frames: &[Frame<f64>],
    windows: usize,
) -> Result<Var<'t>> {
    let spans = window_spans(gt_frames, windows)?;
    let boundaries: Vec<usize> = spans.iter().map(|s| s.end).collect();
    let mut asm = Assembly::<f64>::lift_as(start, params);
    let mut loss = Var::constant(0.0);
    let mut next_boundary = 0usize;
    let model = asm.model;
    let dt = model.dt;
    if let Some(&(_, dirs)) = schedule.steps.first() {
        asm.dirs = dirs;
    }
    for (idx, &(targets, dirs)) in schedule.steps.iter().enumerate() {
        asm.active_step = idx;
        asm.commanded = targets;
        asm.dirs = dirs;
        let max_steps = (schedule.timeout / dt).ceil() as usize;
        for _ in 0..max_steps {
            asm.step_sim()?;
            while next_boundary < boundaries.len()
                && asm.time + 0.5 * dt >= gt_frames[boundaries[next_boundary]].t
            {
                let gt = &gt_frames[boundaries[next_boundary]];
                loss += frame_defect(&asm.frame(), gt);
                // Re-anchor: poses from the observation, state detached.
                let current: [crate::dynamics::RodState<f64>; 3] =
                    std::array::from_fn(|i| asm.bodies[i].state.val());
                let fitted = fit_states_to_caps(model, &gt.caps, &current);
                for (body, s) in asm.bodies.iter_mut().zip(&fitted) {
                    let vel = body.state.lin_vel.detach();
                    let ang = body.state.ang_vel.detach();
                    body.state = crate::dynamics::RodState::lift(s);
                    body.state.lin_vel = vel;
                    body.state.ang_vel = ang;
                }
                asm.detach_state();
                next_boundary += 1;
            }
            let lengths = asm.sensed_lengths();
            if asm.step_satisfied(targets, schedule.tolerance, &lengths) {
                break;
            }
        }
    }
    Ok(loss * (1.0 / windows as f64))
}

/// Runs gradient descent over rollouts of the observed policy.
pub fn identify(problem: &SysIdProblem<'_>) -> Result<IdentifyReport> {
    let model = problem.model;
    let gt_frames = &problem.gt.frames;
    let gt_segs = segment_gaits_frames(gt_frames)?;
    let policy = match &problem.policy {
        Some(p) => {
            check_policy_matches(&gt_segs, p)?;
            p.clone()
        }
        None => policy_from_trajectory(model, &problem.gt)?,
    };
    let schedule = Schedule::from_policy(&policy);

    let f0 = &gt_frames[0];
    let start = align_initial_state(model, &f0.caps, &f0.lengths)?;

    let names: Vec<String> = problem.params.iter().map(|p| p.name.clone()).collect();
    let mut values: Vec<f64> = problem.params.iter().map(|p| p.init).collect();
    let mut adam = Adam::new(problem.learning_rate, values.len());
    let mut rows: Vec<IterationRow> = Vec::with_capacity(problem.iterations);
    let mut initial_loss = None;

    for iter in 0..problem.iterations {
        let tape = Tape::new();
        let mut nominal = ParamSet::nominal(&model.desc);
        for (spec, &v) in problem.params.iter().zip(&values) {
            nominal.set(&spec.name, v)?;
        }
        let mut lifted: Vec<(&str, Var<'_>)> = Vec::with_capacity(values.len());
        for (spec, &v) in problem.params.iter().zip(&values) {
            lifted.push((spec.name.as_str(), tape.var(v)?));
        }
        let params = ParamSet::lift_with(&nominal, &lifted)?;

        let loss = match problem.loss {
            LossKind::Kfl => {
                let pred = rollout(&tape, &start, params, &schedule, true)?;
                let pred_segs = segment_gaits_frames(&pred)?;
                let pairs = align_key_frames(gt_frames, &gt_segs, &pred, &pred_segs)?;
                key_frame_loss(gt_frames, &pred, &pairs)
            }
            LossKind::AllStep { windows } => {
                let pred = rollout(&tape, &start, params, &schedule, false)?;
                all_step_loss(gt_frames, &pred, windows)?
            }
            LossKind::LastStep { windows } => {
                let pred = rollout(&tape, &start, params, &schedule, false)?;
                last_step_loss(gt_frames, &pred, windows)?
            }
            LossKind::Naive => {
                let pred = rollout(&tape, &start, params, &schedule, false)?;
                naive_loss(gt_frames, &pred)
            }
            LossKind::Ms { windows } => ms_loss(&start, params, &schedule, gt_frames, windows)?,
        };

        let loss_val = loss.value();
        if !loss_val.is_finite() {
            return Err(Error::NonFiniteLoss { iter });
        }
        let initial = *initial_loss.get_or_insert(loss_val);
        if loss_val > 10.0 * initial && initial > 0.0 {
            return Err(Error::Diverged { iter, loss: loss_val, initial });
        }

        let grads_map = loss.backward();
        let grads: Vec<f64> = lifted.iter().map(|(_, v)| grads_map.wrt(*v)).collect();
        rows.push(IterationRow { loss: loss_val, params: values.clone(), grads: grads.clone() });

        adam.step(&mut values, &grads);
        for (spec, v) in problem.params.iter().zip(values.iter_mut()) {
            *v = spec.bounds.project(*v);
        }
    }

    Ok(IdentifyReport { names, rows, final_params: values })
}
