//! Support-triangle relabeling: maps a resting pose onto the reference
//! rest pose through the robot's symmetry group, yielding the cap and
//! cable permutations that let one short gait drive every equivalent
//! support configuration.
//!
//! Candidate transforms are rotations about the principal axis in pi/6
//! increments, optionally composed with a pi yaw about the ground normal
//! (the cross-type map), after aligning centroid and forward direction.
//! The winner is the candidate whose transformed caps land closest to the
//! reference caps with a structurally consistent matching.

use std::f64::consts::PI;

use crate::dynamics::{RodState, RodGeometry};
use crate::error::{Error, Result};
use crate::math::{Qf, V3};
use crate::robot::{CableKind, ControlPolicy, RobotModel};

use super::search::Gait;
use super::{principal_axis, CableState, REST_STATE};

/// Acceptance threshold on the mean cap-matching distance, as a fraction
/// of rod length.
const RELABEL_THRESHOLD_FRACTION: f64 = 0.25;

/// A symmetry relabeling: a rigid transform taking the current pose onto
/// the reference pose, with the induced cap and cable permutations.
#[derive(Clone, Debug)]
pub struct SymmetryMap {
    /// Reference cap played by each current cap: `cap_perm[i]` is the
    /// reference cap index that current cap `i` lands on.
    pub cap_perm: [usize; 6],
    /// Gait retargeting permutation: physical cable k takes the reference
    /// gait's target for cable `cable_perm[k]`.
    pub cable_perm: [usize; 6],
    /// Principal-axis rotation increment (multiples of pi/6) of the winner.
    pub axis_increment: usize,
    /// Whether the cross-type pi yaw was applied.
    pub flipped: bool,
    /// Mean cap-matching distance of the winning candidate.
    pub residual: f64,
    rot: Qf,
    pivot: V3,
    translation: V3,
}

impl SymmetryMap {
    pub fn is_identity_perm(&self) -> bool {
        self.cap_perm == [0, 1, 2, 3, 4, 5]
    }

    pub fn apply_point(&self, p: V3) -> V3 {
        self.rot.rotate(p - self.pivot) + self.pivot + self.translation
    }

    /// Applies the rigid transform to a full state (used by the involution
    /// property: relabeling the transformed pose is the identity).
    pub fn apply_to_states(&self, states: &[RodState<f64>; 3]) -> [RodState<f64>; 3] {
        std::array::from_fn(|i| RodState {
            pos: self.apply_point(states[i].pos),
            orient: self.rot.mul(states[i].orient).normalized(),
            lin_vel: self.rot.rotate(states[i].lin_vel),
            ang_vel: self.rot.rotate(states[i].ang_vel),
        })
    }
}

fn cap_positions(states: &[RodState<f64>; 3], geom: &RodGeometry) -> [V3; 6] {
    let half = geom.rod_length / 2.0;
    let mut out = [V3::v(0.0, 0.0, 0.0); 6];
    for rod in 0..3 {
        for cap in 0..2 {
            let sign = if cap == 0 { 1.0 } else { -1.0 };
            out[rod * 2 + cap] =
                states[rod].pos + states[rod].orient.rotate(V3::v(0.0, 0.0, sign * half));
        }
    }
    out
}

fn signed_flat_angle(from: V3, to: V3) -> f64 {
    let cross = from.x * to.y - from.y * to.x;
    let dot = from.x * to.x + from.y * to.y;
    cross.atan2(dot)
}

/// Cap pair (as cap ids rod*2+cap) of each cable, in cable order.
fn cable_cap_pairs(model: &RobotModel) -> Vec<(usize, usize, CableKind)> {
    model
        .cables
        .iter()
        .map(|c| {
            let cap_a = c.rod_a * 2 + usize::from(c.offset_a.z < 0.0);
            let cap_b = c.rod_b * 2 + usize::from(c.offset_b.z < 0.0);
            (cap_a, cap_b, c.kind)
        })
        .collect()
}

/// Finds the symmetry map from `states` onto the model's reference rest
/// pose. Fails if no candidate matches within the distance threshold.
pub fn relabel_to_reference(model: &RobotModel, states: &[RodState<f64>; 3]) -> Result<SymmetryMap> {
    best_map(model, states, &model.rest_pose, RELABEL_THRESHOLD_FRACTION * model.geom.rod_length)
}

fn best_map(
    model: &RobotModel,
    states: &[RodState<f64>; 3],
    reference: &[RodState<f64>; 3],
    threshold: f64,
) -> Result<SymmetryMap> {
    let geom = &model.geom;
    let caps_cur = cap_positions(states, geom);
    let caps_ref = cap_positions(reference, geom);
    let centroid = |caps: &[V3; 6]| caps.iter().fold(V3::v(0.0, 0.0, 0.0), |a, &b| a + b).scale(1.0 / 6.0);
    let c_cur = centroid(&caps_cur);
    let c_ref = centroid(&caps_ref);
    let pa_cur = principal_axis(states)?;
    let pa_ref = principal_axis(reference)?;

    let pairs = cable_cap_pairs(model);
    let mut best: Option<SymmetryMap> = None;

    for flip in [false, true] {
        for k in 0..12 {
            let r_axis = Qf::from_axis_angle(pa_cur.axis, k as f64 * PI / 6.0);
            let mut rot = r_axis;
            let mut fwd = pa_cur.forward;
            if flip {
                rot = Qf::yaw(PI).mul(rot).normalized();
                fwd = -fwd;
            }
            let align = signed_flat_angle(fwd, pa_ref.forward);
            rot = Qf::yaw(align).mul(rot).normalized();
            let translation = c_ref - c_cur;

            let transform = |p: V3| rot.rotate(p - c_cur) + c_cur + translation;

            // Nearest-reference matching, required to be a bijection.
            let mut cap_perm = [usize::MAX; 6];
            let mut taken = [false; 6];
            let mut total = 0.0;
            let mut ok = true;
            for (i, &cap) in caps_cur.iter().enumerate() {
                let moved = transform(cap);
                let mut nearest = (f64::INFINITY, usize::MAX);
                for (j, &r) in caps_ref.iter().enumerate() {
                    let d = moved.dist(r);
                    if d < nearest.0 {
                        nearest = (d, j);
                    }
                }
                if taken[nearest.1] {
                    ok = false;
                    break;
                }
                taken[nearest.1] = true;
                cap_perm[i] = nearest.1;
                total += nearest.0;
            }
            if !ok {
                continue;
            }
            // Rod consistency: a rod's two caps must land on one rod.
            for rod in 0..3 {
                if cap_perm[rod * 2] / 2 != cap_perm[rod * 2 + 1] / 2 {
                    ok = false;
                    break;
                }
            }
            if !ok {
                continue;
            }
            let Some(cable_perm) = induced_cable_perm(&pairs, &cap_perm) else {
                continue;
            };
            let residual = total / 6.0;
            if residual > threshold {
                continue;
            }
            if best.as_ref().map_or(true, |b| residual < b.residual) {
                best = Some(SymmetryMap {
                    cap_perm,
                    cable_perm,
                    axis_increment: k,
                    flipped: flip,
                    residual,
                    rot,
                    pivot: c_cur,
                    translation,
                });
            }
        }
    }

    best.ok_or_else(|| {
        Error::UnrecognizedPose(format!(
            "no symmetry candidate within threshold {threshold:.3} m of the reference"
        ))
    })
}

/// Cable permutation induced by a cap permutation: physical cable k's cap
/// pair must map onto exactly one reference cable's pair of the same kind.
fn induced_cable_perm(
    pairs: &[(usize, usize, CableKind)],
    cap_perm: &[usize; 6],
) -> Option<[usize; 6]> {
    let mut cable_perm = [usize::MAX; 6];
    for (_, &(a, b, kind)) in pairs.iter().enumerate() {
        let CableKind::Actuated(k) = kind else { continue };
        let ma = cap_perm[a];
        let mb = cap_perm[b];
        let mut target = None;
        for &(ra, rb, rkind) in pairs.iter() {
            let CableKind::Actuated(rk) = rkind else { continue };
            if (ra == ma && rb == mb) || (ra == mb && rb == ma) {
                target = Some(rk);
                break;
            }
        }
        cable_perm[k] = target?;
    }
    if cable_perm.iter().any(|&v| v == usize::MAX) {
        return None;
    }
    // Must be a bijection.
    let mut seen = [false; 6];
    for &v in &cable_perm {
        if seen[v] {
            return None;
        }
        seen[v] = true;
    }
    Some(cable_perm)
}

/// Self-maps of the reference rest pose (tight threshold): the cable
/// permutations under which the rest pose is indistinguishable. Used to
/// prune symmetric first moves in the gait search.
pub fn rest_automorphism_perms(model: &RobotModel) -> Vec<[usize; 6]> {
    let geom = &model.geom;
    let states = &model.rest_pose;
    let caps = cap_positions(states, geom);
    let centroid = caps.iter().fold(V3::v(0.0, 0.0, 0.0), |a, &b| a + b).scale(1.0 / 6.0);
    let Ok(pa) = principal_axis(states) else {
        return vec![[0, 1, 2, 3, 4, 5]];
    };
    let pairs = cable_cap_pairs(model);
    let mut perms = vec![[0usize, 1, 2, 3, 4, 5]];

    for flip in [false, true] {
        for k in 0..12 {
            if !flip && k == 0 {
                continue;
            }
            let mut rot = Qf::from_axis_angle(pa.axis, k as f64 * PI / 6.0);
            let mut fwd = pa.forward;
            if flip {
                rot = Qf::yaw(PI).mul(rot).normalized();
                fwd = -fwd;
            }
            let align = signed_flat_angle(fwd, pa.forward);
            rot = Qf::yaw(align).mul(rot).normalized();
            let transform = |p: V3| rot.rotate(p - centroid) + centroid;

            let mut cap_perm = [usize::MAX; 6];
            let mut taken = [false; 6];
            let mut ok = true;
            let mut total = 0.0;
            for (i, &cap) in caps.iter().enumerate() {
                let moved = transform(cap);
                let mut nearest = (f64::INFINITY, usize::MAX);
                for (j, &r) in caps.iter().enumerate() {
                    let d = moved.dist(r);
                    if d < nearest.0 {
                        nearest = (d, j);
                    }
                }
                if taken[nearest.1] {
                    ok = false;
                    break;
                }
                taken[nearest.1] = true;
                cap_perm[i] = nearest.1;
                total += nearest.0;
            }
            if !ok || total / 6.0 > 1e-3 {
                continue;
            }
            if let Some(perm) = induced_cable_perm(&pairs, &cap_perm) {
                if !perms.contains(&perm) {
                    perms.push(perm);
                }
            }
        }
    }
    perms
}

/// Expands a short gait into a long policy by relabeling after each
/// repetition: the gait is executed, the predicted end state is mapped
/// back onto the reference, and the next repetition's targets are
/// permuted accordingly.
pub fn expand_policy(model: &RobotModel, gait: &Gait, repetitions: usize) -> Result<ControlPolicy> {
    assert!(repetitions >= 1, "repetitions must be >= 1");
    let params = crate::robot::ParamSet::nominal(&model.desc);
    let mut asm = crate::robot::Assembly::new(model, params);
    let mut steps: Vec<[f64; 6]> = Vec::new();
    let tolerance = model.desc.control.tolerance;
    let timeout = model.desc.control.step_timeout_s;

    for rep in 0..repetitions {
        let states: [RodState<f64>; 3] = std::array::from_fn(|i| asm.bodies[i].state.val());
        let map = if rep == 0 {
            None
        } else {
            Some(relabel_to_reference(model, &states)?)
        };
        let mut prev = if steps.is_empty() { [1.0; 6] } else { *steps.last().unwrap() };
        for state in &gait.states {
            let permuted = match &map {
                None => *state,
                Some(m) => state.permute(&m.cable_perm),
            };
            let targets = permuted.targets();
            let mut dirs = [super::super::robot::Dir::Hold; 6];
            for c in 0..6 {
                dirs[c] = super::super::robot::Dir::from_delta(prev[c], targets[c]);
            }
            asm.advance_policy_step(targets, dirs, tolerance, timeout, |_, _| {})?;
            steps.push(targets);
            prev = targets;
        }
    }
    ControlPolicy::new(steps, tolerance, model.desc.pid, timeout)
}

/// Transition smoothing: the next gait's leading reset-to-rest step is
/// dropped and execution enters at the remaining step closest in Hamming
/// distance to the current cable state (ties resolved toward the later
/// step).
pub fn smooth_transition(current: CableState, next: &Gait) -> Result<Gait> {
    if next.states.first() != Some(&REST_STATE) {
        return Err(Error::InvalidDescription(
            "transition smoothing expects the next gait to begin with a reset-to-rest step".into(),
        ));
    }
    let rest = &next.states[1..];
    if rest.is_empty() {
        return Ok(Gait { states: vec![REST_STATE], reward: next.reward });
    }
    let mut best = (u32::MAX, 0usize);
    for (i, s) in rest.iter().enumerate() {
        let d = current.hamming(*s);
        if d <= best.0 {
            best = (d, i);
        }
    }
    Ok(Gait { states: rest[best.1..].to_vec(), reward: next.reward })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_transition_enters_at_min_hamming_breaking_ties_later() {
        let g = Gait {
            states: vec![
                REST_STATE,
                CableState::parse("110011").unwrap(),
                CableState::parse("110001").unwrap(),
            ],
            reward: 1.0,
        };
        let current = CableState::parse("110001").unwrap();
        let trimmed = smooth_transition(current, &g).unwrap();
        // The later step matches exactly (distance 0): enter there directly.
        assert_eq!(trimmed.states, vec![CableState::parse("110001").unwrap()]);

        // Brute-force check over every entry point for random states.
        for raw in [0u8, 3, 17, 42, 63, 21] {
            let cur = CableState(raw);
            let trimmed = smooth_transition(cur, &g).unwrap();
            let entered = trimmed.states[0];
            let best = g.states[1..]
                .iter()
                .map(|s| cur.hamming(*s))
                .min()
                .unwrap();
            assert_eq!(cur.hamming(entered), best);
        }
    }

    #[test]
    fn smooth_transition_requires_leading_reset() {
        let g = Gait { states: vec![CableState::parse("101010").unwrap()], reward: 0.0 };
        assert!(smooth_transition(REST_STATE, &g).is_err());
    }
}
