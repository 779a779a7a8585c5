//! The 3-bar tensegrity robot: description files, geometry inference,
//! runtime assembly with PID cable control, and trajectory formats.

pub mod assembly;
pub mod description;
pub mod geometry;
pub mod model;
pub mod trajectory;

pub use assembly::{align_initial_state, Assembly, ParamSet, StepOutcome, PARAM_NAMES};
pub use description::{
    AttachmentMode, CableFile, CableKindFile, ControlDefaults, LearnableParams, PidGains,
    RobotDescription, RodSpecFile, SimDefaults, TendonPolynomial, ROBOT_SCHEMA,
};
pub use geometry::{canonical_rod_placement, infer_attachments, AttachmentPoints};
pub use model::{CableKind, CableModel, RobotModel};
pub use trajectory::{ControlPolicy, Dir, Frame, Trajectory, TrajectoryMeta, TRAJECTORY_SCHEMA};

use crate::error::Result;
use crate::math::V3;
use rand::Rng;

/// Pre-tension strain of the actuated cables at the canonical pose: the
/// fully-extended spool length sits this fraction short of the geometric
/// attachment distance.
const ACTUATED_PRESTRAIN: f64 = 0.02;
/// Fully-retracted sensed length as a fraction of fully extended.
const CONTRACTION_RATIO: f64 = 0.55;
/// Equilibrium force-density ratio of the prism: the long tendons carry
/// sqrt(3) times the force density of the polygon cables, so the canonical
/// pose starts balanced and settles gently.
const TENDON_FORCE_DENSITY_RATIO: f64 = 1.732_050_807_568_877_2;

/// Builds the default 3-bar robot description with cables generated from
/// the canonical rest pose and the requested attachment mode.
pub fn description_with_mode(mode: AttachmentMode) -> RobotDescription {
    let rod = RodSpecFile::default();
    let mut desc = RobotDescription {
        schema: ROBOT_SCHEMA.to_string(),
        rod,
        attachment_mode: mode,
        actuated_stiffness_n_per_m: 1000.0,
        actuated_prestrain: ACTUATED_PRESTRAIN,
        actuated_damping_n_s_per_m: 0.0,
        tendon_polynomial: TendonPolynomial::default(),
        tendon_damping_n_s_per_m: 0.1,
        cables: Vec::new(),
        pid: PidGains::default(),
        sensor_rate_hz: 30.0,
        control: ControlDefaults::default(),
        sim: SimDefaults::default(),
        params: LearnableParams::default(),
        provenance: None,
    };

    let (geom, _) = desc.rod.to_si();
    let placements = geometry::canonical_rod_placement(geom.rod_length, geom.endcap_radius);
    let attachments = match mode {
        AttachmentMode::CapSurface => {
            geometry::infer_attachments(&placements, geom.rod_length, geom.endcap_radius)
                .expect("canonical pose is a valid rest configuration")
        }
        AttachmentMode::RodTips => {
            // Every slot at its cap center: the coplanar layout that can
            // collapse, kept constructible for the regression scenario.
            let half = geom.rod_length / 2.0;
            let tip = |cap: usize| V3::v(0.0, 0.0, if cap == 0 { half } else { -half });
            [[tip(0), tip(0), tip(0), tip(1), tip(1), tip(1)]; 3]
        }
    };
    let ends = geometry::assign_slots(&placements, &attachments, mode, geom.rod_length);
    let (actuated, passive) = geometry::cable_topology();
    let n_actuated = actuated.len();
    let _ = passive;

    // Polygon-cable force density at full extension; the tendons are
    // pre-tensioned to sqrt(3) times this so the prism starts at its
    // equilibrium ratio.
    let polygon_force_density =
        desc.actuated_stiffness_n_per_m * ACTUATED_PRESTRAIN / (1.0 + ACTUATED_PRESTRAIN);

    for (ci, [ea, eb]) in ends.iter().enumerate() {
        let pa_body = attachments[ea.0][ea.1];
        let pb_body = attachments[eb.0][eb.1];
        let pa = placements[ea.0].pos + placements[ea.0].orient.rotate(pa_body);
        let pb = placements[eb.0].pos + placements[eb.0].orient.rotate(pb_body);
        let len = pa.dist(pb);
        let (kind, min_mm, max_mm, rest_mm, damping) = if ci < n_actuated {
            // Sensor calibration: sensed length reads 1.0 at the canonical
            // pose; the spool pretension lives in `actuated_prestrain`.
            (
                CableKindFile::Actuated(ci),
                len * CONTRACTION_RATIO * 1e3,
                len * 1e3,
                len * 1e3,
                desc.actuated_damping_n_s_per_m,
            )
        } else {
            let target_tension = TENDON_FORCE_DENSITY_RATIO * polygon_force_density * len;
            let p = &desc.tendon_polynomial;
            let rest = len
                - solve_cubic_tension(
                    p.c1_n_per_m,
                    p.c2_n_per_m2,
                    p.c3_n_per_m3,
                    target_tension,
                    len,
                );
            (
                CableKindFile::Passive(ci - n_actuated),
                rest * 0.5 * 1e3,
                rest * 3.0 * 1e3,
                rest * 1e3,
                desc.tendon_damping_n_s_per_m,
            )
        };
        desc.cables.push(CableFile {
            kind,
            rod_a: ea.0,
            offset_a_mm: [pa_body.x * 1e3, pa_body.y * 1e3, pa_body.z * 1e3],
            rod_b: eb.0,
            offset_b_mm: [pb_body.x * 1e3, pb_body.y * 1e3, pb_body.z * 1e3],
            min_length_mm: min_mm,
            max_length_mm: max_mm,
            rest_length_mm: rest_mm,
            damping_n_s_per_m: damping,
        });
    }
    desc
}

/// Displacement at which the monotone cubic tension law reaches `target`
/// (bisection; the polynomial is increasing over the search range).
fn solve_cubic_tension(c1: f64, c2: f64, c3: f64, target: f64, max_d: f64) -> f64 {
    let f = |d: f64| c1 * d + c2 * d * d + c3 * d * d * d;
    let (mut lo, mut hi) = (0.0, max_d);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Default robot description (cap-surface attachments).
pub fn default_description() -> RobotDescription {
    description_with_mode(AttachmentMode::CapSurface)
}

/// Default runtime model, built and settled.
pub fn default_model() -> Result<RobotModel> {
    RobotModel::build(default_description())
}

/// Seeded random policy: uniform targets in [0, 1] per cable per step.
pub fn random_policy(
    desc: &RobotDescription,
    n_steps: usize,
    rng: &mut impl Rng,
) -> Result<ControlPolicy> {
    let steps = (0..n_steps)
        .map(|_| std::array::from_fn(|_| rng.gen_range(0.0..=1.0)))
        .collect();
    ControlPolicy::new(steps, desc.control.tolerance, desc.pid, desc.control.step_timeout_s)
}
