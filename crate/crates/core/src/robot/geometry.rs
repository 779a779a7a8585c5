//! Rest-pose construction and attachment-point inference for the 3-bar
//! prism robot.
//!
//! The canonical pose is a prismatic 3-strut tensegrity (struts B_i ->
//! T_{i+1}, side tendons B_i - T_i, twist pi/6) laid on its side so the
//! prism axis runs along +X. Rod i's body +Z points from its bottom node
//! toward its top node; cap 0 is the +Z (top) cap, cap 1 the bottom.
//!
//! Attachment points are not measured on the robot; they are inferred from
//! the rest pose: point A is the highest surface point of the center rod's
//! upper cap, the remaining points follow by 2pi/3 rotations about the rod
//! axis and mirroring onto the other cap, and each side rod picks the
//! rotational phase whose points come closest to the center rod's.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::math::{Qf, V3};

use super::description::AttachmentMode;

/// Twist between the top and bottom triangles at prism equilibrium.
pub const PRISM_TWIST: f64 = PI / 6.0;

/// Circumradius of the node triangles; chosen so the strut length works
/// out with a sensible prism height.
pub const PRISM_RADIUS: f64 = 0.12;

#[derive(Clone, Copy, Debug)]
pub struct RodPlacement {
    pub pos: V3,
    pub orient: Qf,
}

/// Node layout of the standing prism: bottom node of rod i, top node of
/// rod i (the strut runs B_i -> T_{i+1}).
fn prism_nodes(rod_length: f64) -> ([V3; 3], [V3; 3]) {
    let r = PRISM_RADIUS;
    let chord = 2.0 * r * (0.5 * (2.0 * PI / 3.0 + PRISM_TWIST)).sin();
    let h2 = rod_length * rod_length - chord * chord;
    assert!(h2 > 0.0, "prism radius too large for rod length");
    let h = h2.sqrt();
    let mut bottom = [V3::v(0.0, 0.0, 0.0); 3];
    let mut top = [V3::v(0.0, 0.0, 0.0); 3];
    for i in 0..3 {
        let a = 2.0 * PI * i as f64 / 3.0;
        bottom[i] = V3::v(r * a.cos(), r * a.sin(), 0.0);
        let b = a + PRISM_TWIST;
        top[i] = V3::v(r * b.cos(), r * b.sin(), h);
    }
    (bottom, top)
}

/// Rod placements of the canonical rest pose: the prism laid on its side
/// (axis along +X), shifted so the lowest cap center sits at cap-radius
/// height. `rod_length` is the cap-center distance.
pub fn canonical_rod_placement(rod_length: f64, cap_radius: f64) -> [RodPlacement; 3] {
    let (bottom, top) = prism_nodes(rod_length);
    // Lay the prism down: +Z (prism axis) -> +X.
    let lay = Qf::from_axis_angle(V3::v(0.0, 1.0, 0.0), PI / 2.0);
    let mut placements = Vec::with_capacity(3);
    let mut min_z = f64::INFINITY;
    for i in 0..3 {
        let b = lay.rotate(bottom[i]);
        let t = lay.rotate(top[(i + 1) % 3]);
        let axis = (t - b).normalized();
        let orient = Qf::between(V3::v(0.0, 0.0, 1.0), axis);
        let pos = (b + t).scale(0.5);
        min_z = min_z.min(b.z).min(t.z);
        placements.push(RodPlacement { pos, orient });
    }
    let lift = cap_radius - min_z;
    let mut out = [RodPlacement { pos: V3::v(0.0, 0.0, 0.0), orient: Qf::identity() }; 3];
    for (i, mut p) in placements.into_iter().enumerate() {
        p.pos.z += lift;
        out[i] = p;
    }
    out
}

/// World center of a rod's cap (cap 0 at +Z of the body frame).
pub fn cap_center(p: &RodPlacement, half_length: f64, cap: usize) -> V3 {
    let sign = if cap == 0 { 1.0 } else { -1.0 };
    p.pos + p.orient.rotate(V3::v(0.0, 0.0, sign * half_length))
}

/// Per-rod body-frame attachment points, 3 per cap (slots 0..2 on cap 0,
/// 3..5 on cap 1).
pub type AttachmentPoints = [[V3; 6]; 3];

/// Infers the 18 body-frame attachment points from a rest pose.
///
/// Points sit on the cap sphere surfaces, three per cap every 2pi/3 on the
/// circle perpendicular to the rod axis. The center rod anchors the
/// pattern at its upper cap's highest point; each side rod tries the three
/// rotational phases and keeps the one whose points land closest to the
/// center rod's.
pub fn infer_attachments(
    placements: &[RodPlacement; 3],
    rod_length: f64,
    cap_radius: f64,
) -> Result<AttachmentPoints> {
    let half = rod_length / 2.0;
    let center_rod = center_rod_index(placements);

    // Sanity check: a rest pose has all rods leaning, none vertical.
    for (i, p) in placements.iter().enumerate() {
        let axis = p.orient.rotate(V3::v(0.0, 0.0, 1.0));
        if axis.z.abs() > 0.9 {
            return Err(Error::UnrecognizedPose(format!("rod {i} is near-vertical")));
        }
    }

    // Every rod anchors its pattern at its own upper cap's highest surface
    // point; the 2pi/3 rotations then fix the remaining points. Because
    // the pattern is 3-fold symmetric, rotational re-labeling changes no
    // geometry; choosing which point serves which cable (the closest-point
    // assignment) happens in [`assign_slots`].
    let _ = center_rod;
    let mut out: AttachmentPoints = [[V3::v(0.0, 0.0, 0.0); 6]; 3];
    for rod in 0..3 {
        out[rod] = base_pattern(&placements[rod], half, cap_radius, 0.0);
    }
    Ok(out)
}

/// The rod whose midpoint is laterally closest to the robot's footprint
/// center ("one rod in the center, two on the side"). Near-ties resolve
/// by the lower midpoint, which is yaw-invariant where the lateral
/// distance alone is numerically fragile under symmetric poses.
pub fn center_rod_index(placements: &[RodPlacement; 3]) -> usize {
    let centroid = placements
        .iter()
        .fold(V3::v(0.0, 0.0, 0.0), |acc, p| acc + p.pos)
        .scale(1.0 / 3.0);
    let dist = |p: &RodPlacement| (p.pos - centroid).flat().norm();
    let min = placements.iter().map(dist).fold(f64::INFINITY, f64::min);
    let mut best = (f64::INFINITY, 0usize);
    for (i, p) in placements.iter().enumerate() {
        if dist(p) < min + 1e-3 && p.pos.z < best.0 {
            best = (p.pos.z, i);
        }
    }
    best.1
}

/// The 6-point body pattern for one rod given a rotational phase.
///
/// At phase zero the anchor is the upper cap's highest surface point in
/// this placement (cap center plus the world-up direction pulled into the
/// body frame). The other two points follow at +-2pi/3 about the rod axis
/// on the same circle, and the lower cap carries the pattern rotated pi
/// about a transverse axis through the rod center (the two end disks are
/// the same part mounted at opposite ends).
fn base_pattern(placement: &RodPlacement, half: f64, cap_radius: f64, phase: f64) -> [V3; 6] {
    // Which body cap is the upper one in this placement?
    let axis_world = placement.orient.rotate(V3::v(0.0, 0.0, 1.0));
    let upper_is_cap0 = axis_world.z >= 0.0;
    let upper_sign = if upper_is_cap0 { 1.0 } else { -1.0 };
    let upper_center = V3::v(0.0, 0.0, upper_sign * half);

    // World up in the body frame: unit vector from the upper cap center to
    // its highest surface point.
    let up_body = placement.orient.rotate_inv(V3::v(0.0, 0.0, 1.0));

    let flip = |v: V3| V3::v(v.x, -v.y, -v.z);
    let mut points = [V3::v(0.0, 0.0, 0.0); 6];
    for k in 0..3 {
        let ang = phase + 2.0 * PI * k as f64 / 3.0;
        let upper = upper_center + rotate_about_z(up_body, ang).scale(cap_radius);
        points[k] = upper;
        points[3 + k] = flip(upper);
    }
    // Slots 0..2 must belong to body cap 0 (+Z) regardless of which end is
    // up, so swap the halves when the upper cap is body cap 1.
    if !upper_is_cap0 {
        points.swap(0, 3);
        points.swap(1, 4);
        points.swap(2, 5);
    }
    points
}

fn rotate_about_z(v: V3, angle: f64) -> V3 {
    let (s, c) = angle.sin_cos();
    V3::v(c * v.x - s * v.y, s * v.x + c * v.y, v.z)
}

/// Structural cable routing of the prism: endpoints as (rod, cap) pairs.
/// Actuated 0..2 are the bottom-triangle edges, 3..5 the top-triangle
/// edges; passive 0..2 are the long side tendons.
pub fn cable_topology() -> ([[(usize, usize); 2]; 6], [[(usize, usize); 2]; 3]) {
    // Node B_i lives on rod i, cap 1; node T_j lives on rod (j + 2) % 3, cap 0.
    let b = |i: usize| (i % 3, 1usize);
    let t = |j: usize| ((j + 2) % 3, 0usize);
    let actuated = [
        [b(0), b(1)],
        [b(1), b(2)],
        [b(2), b(0)],
        [t(0), t(1)],
        [t(1), t(2)],
        [t(2), t(0)],
    ];
    let passive = [[b(0), t(0)], [b(1), t(1)], [b(2), t(2)]];
    (actuated, passive)
}

/// Assigns each cable end to one attachment slot on its cap, minimizing
/// per-cap total distance to the opposite cap centers (each cap hosts
/// exactly three cable ends, one per slot).
pub fn assign_slots(
    placements: &[RodPlacement; 3],
    attachments: &AttachmentPoints,
    mode: AttachmentMode,
    rod_length: f64,
) -> Vec<[(usize, usize); 2]> {
    let half = rod_length / 2.0;
    let (actuated, passive) = cable_topology();
    let ends: Vec<[(usize, usize); 2]> = actuated.iter().chain(passive.iter()).copied().collect();

    if mode == AttachmentMode::RodTips {
        // Tip attachment: every end at its cap center (slot index by cap).
        return ends
            .iter()
            .map(|[a, b]| [(a.0, a.1 * 3), (b.0, b.1 * 3)])
            .collect();
    }

    // For each cap, the incident cable ends and their far cap centers.
    let mut incident: Vec<Vec<(usize, usize, V3)>> = vec![Vec::new(); 6]; // cap id = rod*2+cap
    for (ci, [a, b]) in ends.iter().enumerate() {
        let far_b = cap_center(&placements[b.0], half, b.1);
        let far_a = cap_center(&placements[a.0], half, a.1);
        incident[a.0 * 2 + a.1].push((ci, 0, far_b));
        incident[b.0 * 2 + b.1].push((ci, 1, far_a));
    }

    let mut chosen: Vec<[(usize, usize); 2]> = ends.iter().map(|[a, b]| [(a.0, 0), (b.0, 0)]).collect();
    for cap_id in 0..6 {
        let rod = cap_id / 2;
        let cap = cap_id % 2;
        let list = &incident[cap_id];
        assert_eq!(list.len(), 3, "each cap hosts exactly three cable ends");
        let slot_base = cap * 3;
        let world_slot = |s: usize| -> V3 {
            placements[rod].pos + placements[rod].orient.rotate(attachments[rod][slot_base + s])
        };
        // Brute force the 6 assignments of 3 ends onto 3 slots.
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let mut best = (f64::INFINITY, perms[0]);
        for perm in perms {
            let score: f64 = list
                .iter()
                .zip(perm.iter())
                .map(|((_, _, far), &slot)| world_slot(slot).dist(*far))
                .sum();
            if score < best.0 {
                best = (score, perm);
            }
        }
        for ((ci, side, _), &slot) in list.iter().zip(best.1.iter()) {
            chosen[*ci][*side] = (rod, slot_base + slot);
        }
    }
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;

    const ROD_LEN: f64 = 0.325;
    const CAP_R: f64 = 0.0175;

    #[test]
    fn canonical_pose_touches_ground() {
        let placements = canonical_rod_placement(ROD_LEN, CAP_R);
        let mut min_z = f64::INFINITY;
        for p in &placements {
            for cap in 0..2 {
                min_z = min_z.min(cap_center(p, ROD_LEN / 2.0, cap).z);
            }
        }
        assert!((min_z - CAP_R).abs() < 1e-12);
        // Struts have the right length.
        for p in &placements {
            let c0 = cap_center(p, ROD_LEN / 2.0, 0);
            let c1 = cap_center(p, ROD_LEN / 2.0, 1);
            assert!((c0.dist(c1) - ROD_LEN).abs() < 1e-12);
        }
    }

    #[test]
    fn attachments_lie_on_cap_spheres() {
        let placements = canonical_rod_placement(ROD_LEN, CAP_R);
        let points = infer_attachments(&placements, ROD_LEN, CAP_R).unwrap();
        for rod in 0..3 {
            for slot in 0..6 {
                let cap = slot / 3;
                let center = V3::v(0.0, 0.0, if cap == 0 { ROD_LEN / 2.0 } else { -ROD_LEN / 2.0 });
                let d = points[rod][slot].dist(center);
                assert!(
                    (d - CAP_R).abs() < 1e-9,
                    "rod {rod} slot {slot}: {d} vs {CAP_R}"
                );
            }
        }
    }

    #[test]
    fn attachments_are_yaw_invariant() {
        let placements = canonical_rod_placement(ROD_LEN, CAP_R);
        let base = infer_attachments(&placements, ROD_LEN, CAP_R).unwrap();
        let yaw = Qf::yaw(1.234);
        let mut rotated = placements;
        for p in &mut rotated {
            p.pos = yaw.rotate(p.pos);
            p.orient = yaw.mul(p.orient).normalized();
        }
        let turned = infer_attachments(&rotated, ROD_LEN, CAP_R).unwrap();
        for rod in 0..3 {
            for slot in 0..6 {
                assert!(
                    base[rod][slot].dist(turned[rod][slot]) < 1e-9,
                    "rod {rod} slot {slot}"
                );
            }
        }
    }

    #[test]
    fn slot_routing_beats_alternative_assignments() {
        // On every cap, the chosen point-to-cable assignment minimizes the
        // summed end-to-far-cap distance over all 3! per-cap relabelings
        // (brute force over the rotational assignments of that cap).
        let placements = canonical_rod_placement(ROD_LEN, CAP_R);
        let points = infer_attachments(&placements, ROD_LEN, CAP_R).unwrap();
        let cables = assign_slots(&placements, &points, AttachmentMode::CapSurface, ROD_LEN);
        let half = ROD_LEN / 2.0;
        let world =
            |rod: usize, slot: usize| placements[rod].pos + placements[rod].orient.rotate(points[rod][slot]);

        for cap_rod in 0..3 {
            for cap in 0..2 {
                // Ends incident to this cap with their chosen slots and the
                // opposite cap center they reach toward.
                let mut incident: Vec<(usize, V3)> = Vec::new();
                for [a, b] in &cables {
                    let far = |e: (usize, usize)| cap_center(&placements[e.0], half, e.1 / 3);
                    if a.0 == cap_rod && a.1 / 3 == cap {
                        incident.push((a.1 % 3, far(*b)));
                    }
                    if b.0 == cap_rod && b.1 / 3 == cap {
                        incident.push((b.1 % 3, far(*a)));
                    }
                }
                assert_eq!(incident.len(), 3);
                let slot_base = cap * 3;
                let cost = |assign: &[usize; 3]| -> f64 {
                    incident
                        .iter()
                        .zip(assign)
                        .map(|((_, far), &s)| world(cap_rod, slot_base + s).dist(*far))
                        .sum()
                };
                let chosen_cost = cost(&[incident[0].0, incident[1].0, incident[2].0]);
                for perm in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
                    assert!(cost(&perm) >= chosen_cost - 1e-12);
                }
            }
        }
    }

    #[test]
    fn vertical_rod_rejected() {
        let mut placements = canonical_rod_placement(ROD_LEN, CAP_R);
        placements[0].orient = Qf::identity(); // +Z: vertical
        assert!(infer_attachments(&placements, ROD_LEN, CAP_R).is_err());
    }

    #[test]
    fn slot_assignment_is_a_bijection_per_cap() {
        let placements = canonical_rod_placement(ROD_LEN, CAP_R);
        let points = infer_attachments(&placements, ROD_LEN, CAP_R).unwrap();
        let cables = assign_slots(&placements, &points, AttachmentMode::CapSurface, ROD_LEN);
        assert_eq!(cables.len(), 9);
        let mut used = std::collections::HashSet::new();
        for [a, b] in &cables {
            assert!(used.insert(*a), "slot reused: {a:?}");
            assert!(used.insert(*b), "slot reused: {b:?}");
        }
        assert_eq!(used.len(), 18);
    }
}
