//! Symmetry-reduced gait discovery: principal-axis geometry, support
//! relabeling, graph search over binary cable states, policy expansion and
//! transition smoothing.

pub mod search;
pub mod symmetry;

pub use search::{search_gaits, Gait, GaitOracle, RewardKind, SearchOptions, SearchOutcome};
pub use symmetry::{expand_policy, relabel_to_reference, smooth_transition, SymmetryMap};

use crate::dynamics::RodState;
use crate::error::{Error, Result};
use crate::math::V3;

/// Binary cable state: bit k set means actuated cable k extended.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CableState(pub u8);

/// The rest state: all six cables extended.
pub const REST_STATE: CableState = CableState(0b11_1111);

impl CableState {
    pub fn bit(self, k: usize) -> bool {
        self.0 >> k & 1 == 1
    }

    pub fn targets(self) -> [f64; 6] {
        std::array::from_fn(|k| if self.bit(k) { 1.0 } else { 0.0 })
    }

    pub fn hamming(self, other: CableState) -> u32 {
        (self.0 ^ other.0).count_ones()
    }

    /// Applies a cable permutation: bit k of the result is bit perm[k].
    pub fn permute(self, perm: &[usize; 6]) -> CableState {
        let mut out = 0u8;
        for (k, &src) in perm.iter().enumerate() {
            if self.bit(src) {
                out |= 1 << k;
            }
        }
        CableState(out)
    }

    pub fn parse(s: &str) -> Option<CableState> {
        if s.len() != 6 || !s.bytes().all(|b| b == b'0' || b == b'1') {
            return None;
        }
        let mut out = 0u8;
        for (k, b) in s.bytes().enumerate() {
            if b == b'1' {
                out |= 1 << k;
            }
        }
        Some(CableState(out))
    }
}

impl std::fmt::Display for CableState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for k in 0..6 {
            write!(f, "{}", if self.bit(k) { '1' } else { '0' })?;
        }
        Ok(())
    }
}

impl std::fmt::Debug for CableState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self}")
    }
}

/// Principal axis of an assembly state: the normalized average rod
/// direction with signs aligned to the first rod, plus its ground-plane
/// projection (the forward direction).
#[derive(Clone, Copy, Debug)]
pub struct PrincipalAxis {
    pub axis: V3,
    pub forward: V3,
}

pub fn principal_axis(states: &[RodState<f64>; 3]) -> Result<PrincipalAxis> {
    let mut sum = V3::v(0.0, 0.0, 0.0);
    let reference = states[0].orient.rotate(V3::v(0.0, 0.0, 1.0));
    for s in states {
        let mut a = s.orient.rotate(V3::v(0.0, 0.0, 1.0));
        if a.dot(reference) < 0.0 {
            a = -a;
        }
        sum += a;
    }
    let axis = sum.normalized();
    let flat = axis.flat();
    if flat.norm() < 0.1 {
        return Err(Error::UnrecognizedPose(format!(
            "principal axis near vertical (ground projection {:.3})",
            flat.norm()
        )));
    }
    Ok(PrincipalAxis { axis, forward: flat.normalized() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Qf;

    fn lean(yaw: f64) -> RodState<f64> {
        let q = Qf::yaw(yaw).mul(Qf::from_axis_angle(V3::v(0.0, 1.0, 0.0), 1.2)).normalized();
        RodState { pos: V3::v(0.0, 0.0, 0.2), orient: q, lin_vel: V3::v(0.0, 0.0, 0.0), ang_vel: V3::v(0.0, 0.0, 0.0) }
    }

    #[test]
    fn parallel_rods_give_their_common_direction() {
        let states = [lean(0.3), lean(0.3), lean(0.3)];
        let pa = principal_axis(&states).unwrap();
        let expect = states[0].orient.rotate(V3::v(0.0, 0.0, 1.0));
        assert!(pa.axis.dist(expect) < 1e-12);
    }

    #[test]
    fn axis_is_yaw_equivariant() {
        let states = [lean(0.1), lean(0.5), lean(0.9)];
        let pa = principal_axis(&states).unwrap();
        let theta = 0.77;
        let yaw = Qf::yaw(theta);
        let turned: [RodState<f64>; 3] = std::array::from_fn(|i| RodState {
            pos: yaw.rotate(states[i].pos),
            orient: yaw.mul(states[i].orient).normalized(),
            lin_vel: V3::v(0.0, 0.0, 0.0),
            ang_vel: V3::v(0.0, 0.0, 0.0),
        });
        let pa2 = principal_axis(&turned).unwrap();
        assert!(pa2.axis.dist(yaw.rotate(pa.axis)) < 1e-9);
        assert!(pa2.forward.dist(yaw.rotate(pa.forward)) < 1e-9);
    }

    #[test]
    fn vertical_axis_flagged() {
        let vertical = RodState {
            pos: V3::v(0.0, 0.0, 0.2),
            orient: Qf::identity(),
            lin_vel: V3::v(0.0, 0.0, 0.0),
            ang_vel: V3::v(0.0, 0.0, 0.0),
        };
        let states = [vertical, vertical, vertical];
        assert!(principal_axis(&states).is_err());
    }

    #[test]
    fn cable_state_parse_and_permute() {
        let s = CableState::parse("110001").unwrap();
        assert!(s.bit(0) && s.bit(1) && !s.bit(2) && s.bit(5));
        assert_eq!(s.to_string(), "110001");
        assert_eq!(REST_STATE.to_string(), "111111");
        // Swap cables 0 and 5.
        let perm = [5, 1, 2, 3, 4, 0];
        assert_eq!(s.permute(&perm).to_string(), "110001");
        let t = CableState::parse("100000").unwrap();
        assert_eq!(t.permute(&perm).to_string(), "000001");
    }
}
