//! SI-unit runtime model built from a [`RobotDescription`], including the
//! settled reference rest pose.

use crate::dynamics::{RodGeometry, RodMasses, RodState};
use crate::error::{Error, Result};
use crate::math::V3;

use super::assembly::{Assembly, ParamSet};
use super::description::{CableKindFile, RobotDescription};
use super::geometry;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CableKind {
    /// Short motor-driven cable; index is its policy position 0..=5.
    Actuated(usize),
    /// Long elastic tendon; index 0..=2 (sensor channels 6..=8).
    Passive(usize),
}

#[derive(Clone, Debug)]
pub struct CableModel {
    pub kind: CableKind,
    pub rod_a: usize,
    pub offset_a: V3,
    pub rod_b: usize,
    pub offset_b: V3,
    pub min_length: f64,
    pub max_length: f64,
    /// Rest length of passive tendons (actuated cables derive theirs from
    /// the spool position between min and max).
    pub rest_length: f64,
    pub damping: f64,
}

impl CableModel {
    /// Sensor channel: actuated cables occupy 0..=5, tendons 6..=8.
    pub fn channel(&self) -> usize {
        match self.kind {
            CableKind::Actuated(k) => k,
            CableKind::Passive(k) => 6 + k,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RobotModel {
    pub desc: RobotDescription,
    pub geom: RodGeometry,
    pub masses: RodMasses<f64>,
    pub cables: Vec<CableModel>,
    /// Settled reference rest pose (recomputed deterministically on build).
    pub rest_pose: [RodState<f64>; 3],
    pub dt: f64,
    pub gravity: f64,
    pub sensor_rate: f64,
    pub hash: String,
    actuated_index: [usize; 6],
}

impl RobotModel {
    /// Builds the runtime model: converts units, wires cables, then settles
    /// the canonical pose under gravity to obtain the reference rest state.
    pub fn build(desc: RobotDescription) -> Result<Self> {
        let mut model = Self::build_unsettled(desc)?;
        // Settle, then refine: freezing the residual micro-motion and
        // settling again drives the stored rest pose toward a genuine fixed
        // point, so settling an already-settled assembly is a no-op.
        for _ in 0..2 {
            let settled = {
                let params = ParamSet::nominal(&model.desc);
                let mut asm = Assembly::with_states(&model, params, &model.rest_pose);
                asm.settle()?;
                std::array::from_fn(|i| {
                    let mut s = asm.bodies[i].state.val();
                    s.lin_vel = V3::v(0.0, 0.0, 0.0);
                    s.ang_vel = V3::v(0.0, 0.0, 0.0);
                    s
                })
            };
            model.rest_pose = settled;
        }
        Ok(model)
    }

    /// Builds the model with the analytic canonical placement as the rest
    /// pose, skipping gravity settling (diagnostics and bootstrap only).
    pub fn build_unsettled(desc: RobotDescription) -> Result<Self> {
        desc.validate()?;
        if desc.cables.is_empty() {
            return Err(Error::InvalidDescription(
                "description has no cables; generate one with the default builder".into(),
            ));
        }
        let (geom, masses) = desc.rod.to_si();
        let mut cables = Vec::with_capacity(desc.cables.len());
        let mut actuated_index = [usize::MAX; 6];
        for (i, c) in desc.cables.iter().enumerate() {
            let kind = match c.kind {
                CableKindFile::Actuated(k) => {
                    actuated_index[k] = i;
                    CableKind::Actuated(k)
                }
                CableKindFile::Passive(k) => CableKind::Passive(k),
            };
            cables.push(CableModel {
                kind,
                rod_a: c.rod_a,
                offset_a: V3::v(c.offset_a_mm[0] * 1e-3, c.offset_a_mm[1] * 1e-3, c.offset_a_mm[2] * 1e-3),
                rod_b: c.rod_b,
                offset_b: V3::v(c.offset_b_mm[0] * 1e-3, c.offset_b_mm[1] * 1e-3, c.offset_b_mm[2] * 1e-3),
                min_length: c.min_length_mm * 1e-3,
                max_length: c.max_length_mm * 1e-3,
                rest_length: c.rest_length_mm * 1e-3,
                damping: c.damping_n_s_per_m,
            });
        }

        let placements = geometry::canonical_rod_placement(geom.rod_length, geom.endcap_radius);
        let canonical: [RodState<f64>; 3] = std::array::from_fn(|i| RodState {
            pos: placements[i].pos,
            orient: placements[i].orient,
            lin_vel: V3::v(0.0, 0.0, 0.0),
            ang_vel: V3::v(0.0, 0.0, 0.0),
        });

        let hash = desc.content_hash();
        Ok(RobotModel {
            dt: desc.sim.dt_s,
            gravity: desc.sim.gravity_m_per_s2,
            sensor_rate: desc.sensor_rate_hz,
            geom,
            masses,
            cables,
            rest_pose: canonical,
            hash,
            actuated_index,
            desc,
        })
    }

    /// Index into `cables` of actuated cable `k`.
    pub fn actuated_cable_index(&self, k: usize) -> usize {
        self.actuated_index[k]
    }

    /// Sensor channel of actuated cable `k` (identity by construction).
    pub fn actuated_channel(&self, k: usize) -> usize {
        k
    }

    /// Forward direction of the rest pose (principal axis projected onto
    /// the ground), used by displacement rewards and summaries.
    pub fn rest_forward(&self) -> V3 {
        crate::gaits::principal_axis(&self.rest_pose).map(|a| a.forward).unwrap_or(V3::v(1.0, 0.0, 0.0))
    }
}
