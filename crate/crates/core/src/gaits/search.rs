//! Graph search for locomotion gaits over binary cable states.
//!
//! Nodes are cable states, edges are per-cable retract/extend/hold moves,
//! and every candidate gait starts and ends at the rest state. Candidates
//! are scored by simulating the target sequence on a rollout oracle;
//! prefixes share their simulated end states, so the budget counts
//! individual policy-step simulations rather than whole rollouts.
//!
//! The search is beam-staged: every (symmetry-reduced) first move is
//! scored, the best prefixes fan out to the next depth, and so on to the
//! depth limit. Exhausting the budget returns the best gait found so far
//! with a warning flag.

use crate::error::{Error, Result};
use crate::math::V3;
use crate::robot::{Assembly, Dir, ParamSet, RobotModel};

use super::symmetry::rest_automorphism_perms;
use super::{principal_axis, CableState, REST_STATE};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RewardKind {
    /// Center-of-mass displacement along the rest pose's forward axis.
    Forward,
    Backward,
    /// Signed principal-axis rotation about the ground normal.
    TurnCcw,
    TurnCw,
}

impl RewardKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "fwd" | "forward" => Some(RewardKind::Forward),
            "bwd" | "backward" => Some(RewardKind::Backward),
            "ccw" => Some(RewardKind::TurnCcw),
            "cw" => Some(RewardKind::TurnCw),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RewardKind::Forward => "fwd",
            RewardKind::Backward => "bwd",
            RewardKind::TurnCcw => "ccw",
            RewardKind::TurnCw => "cw",
        }
    }
}

/// A rest-to-rest sequence of binary cable targets with its score.
#[derive(Clone, Debug)]
pub struct Gait {
    pub states: Vec<CableState>,
    pub reward: f64,
}

/// Rollout backend for the search: advances a cloneable state by one
/// policy step and scores terminal states.
pub trait GaitOracle {
    type State: Clone;
    fn initial(&mut self) -> Result<Self::State>;
    /// One policy-step simulation (one budget unit). Errors discard the
    /// candidate branch.
    fn advance(&mut self, state: &Self::State, target: CableState) -> Result<Self::State>;
    fn reward(&self, state: &Self::State) -> f64;
}

#[derive(Clone, Copy, Debug)]
pub struct SearchOptions {
    /// Maximum gait length in targets, including the closing rest step.
    pub depth: usize,
    /// Budget in policy-step simulations.
    pub budget: usize,
    /// Beam widths for expanding depth-1 and depth-2 prefixes.
    pub beam1: usize,
    pub beam2: usize,
    /// Prune first moves that are equivalent under the rest-pose symmetry.
    pub symmetry_reduce: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { depth: 4, budget: 5000, beam1: 14, beam2: 10, symmetry_reduce: true }
    }
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub best: Gait,
    /// Every scored candidate (sequence, reward), in evaluation order.
    pub scores: Vec<(Vec<CableState>, f64)>,
    pub budget_spent: usize,
    pub budget_exhausted: bool,
    pub discarded: usize,
}

struct BudgetedOracle<'a, O: GaitOracle> {
    oracle: &'a mut O,
    spent: usize,
    budget: usize,
    discarded: usize,
}

impl<'a, O: GaitOracle> BudgetedOracle<'a, O> {
    fn advance(&mut self, state: &O::State, target: CableState) -> Result<Option<O::State>> {
        if self.spent >= self.budget {
            return Err(Error::BudgetExhausted { spent: self.spent });
        }
        self.spent += 1;
        match self.oracle.advance(state, target) {
            Ok(s) => Ok(Some(s)),
            Err(_) => {
                // Failed rollout: the candidate is discarded, not the search.
                self.discarded += 1;
                Ok(None)
            }
        }
    }
}

/// Exhaustive-within-budget search for the best rest-to-rest gait.
pub fn search_gaits<O: GaitOracle>(
    oracle: &mut O,
    first_move_perms: &[[usize; 6]],
    options: SearchOptions,
) -> Result<SearchOutcome> {
    let start = oracle.initial()?;
    let mut budgeted =
        BudgetedOracle { oracle, spent: 0, budget: options.budget, discarded: 0 };
    let mut scores: Vec<(Vec<CableState>, f64)> = Vec::new();
    // The empty gait is always a valid (zero-reward) fallback.
    let mut best = Gait { states: Vec::new(), reward: 0.0 };
    let mut exhausted = false;

    // Orbit representatives of the first move under the rest symmetry.
    let mut first_moves: Vec<CableState> = Vec::new();
    for raw in 0..64u8 {
        let s = CableState(raw);
        if s == REST_STATE {
            continue;
        }
        if options.symmetry_reduce {
            let canon = first_move_perms
                .iter()
                .map(|p| s.permute(p).0)
                .min()
                .unwrap_or(s.0);
            if canon != raw {
                continue;
            }
        }
        first_moves.push(s);
    }

    // prefix = (sequence so far, simulated end state)
    type Prefix<S> = (Vec<CableState>, S);
    let mut layer: Vec<(Prefix<O::State>, f64)> = Vec::new();

    'outer: {
        if options.depth == 0 {
            break 'outer;
        }
        // Depth-1 prefixes and their rest closures.
        for &mv in &first_moves {
            let Some(seq_state) = try_advance(&mut budgeted, &start, mv, &mut exhausted)? else {
                if exhausted {
                    break 'outer;
                }
                continue;
            };
            let seq = vec![mv];
            score_closure(&mut budgeted, &seq, &seq_state, &mut scores, &mut best, &mut exhausted)?;
            if exhausted {
                break 'outer;
            }
            layer.push(((seq, seq_state), best_score_of(&scores)));
        }

        for stage in 0..2 {
            let beam = if stage == 0 { options.beam1 } else { options.beam2 };
            if layer.is_empty() || options.depth < stage + 3 {
                break;
            }
            // Rank prefixes by their own closed-gait score.
            let mut ranked: Vec<(Prefix<O::State>, f64)> = Vec::new();
            for (prefix, _) in layer.drain(..) {
                let score = scores
                    .iter()
                    .filter(|(seq, _)| seq_starts_with(seq, &prefix.0))
                    .map(|(_, r)| *r)
                    .fold(f64::NEG_INFINITY, f64::max);
                ranked.push((prefix, score));
            }
            ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
            ranked.truncate(beam);

            let mut next_layer: Vec<(Prefix<O::State>, f64)> = Vec::new();
            for ((seq, state), _) in &ranked {
                for raw in 0..64u8 {
                    let mv = CableState(raw);
                    if mv == *seq.last().unwrap() {
                        continue;
                    }
                    let Some(new_state) = try_advance(&mut budgeted, state, mv, &mut exhausted)?
                    else {
                        if exhausted {
                            break 'outer;
                        }
                        continue;
                    };
                    let mut new_seq = seq.clone();
                    new_seq.push(mv);
                    score_closure(
                        &mut budgeted,
                        &new_seq,
                        &new_state,
                        &mut scores,
                        &mut best,
                        &mut exhausted,
                    )?;
                    if exhausted {
                        break 'outer;
                    }
                    next_layer.push(((new_seq, new_state), 0.0));
                }
            }
            layer = next_layer;
        }
    }

    Ok(SearchOutcome {
        best,
        scores,
        budget_spent: budgeted.spent,
        budget_exhausted: exhausted,
        discarded: budgeted.discarded,
    })
}

fn try_advance<O: GaitOracle>(
    budgeted: &mut BudgetedOracle<'_, O>,
    state: &O::State,
    mv: CableState,
    exhausted: &mut bool,
) -> Result<Option<O::State>> {
    match budgeted.advance(state, mv) {
        Ok(s) => Ok(s),
        Err(Error::BudgetExhausted { .. }) => {
            *exhausted = true;
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Scores the gait `seq + [rest]` (or `seq` itself when it already ends at
/// rest) and updates the incumbent.
fn score_closure<O: GaitOracle>(
    budgeted: &mut BudgetedOracle<'_, O>,
    seq: &[CableState],
    state: &O::State,
    scores: &mut Vec<(Vec<CableState>, f64)>,
    best: &mut Gait,
    exhausted: &mut bool,
) -> Result<()> {
    let (gait_seq, terminal) = if *seq.last().unwrap() == REST_STATE {
        (seq.to_vec(), Some(state.clone()))
    } else {
        let mut closed = seq.to_vec();
        closed.push(REST_STATE);
        match try_advance(budgeted, state, REST_STATE, exhausted)? {
            Some(s) => (closed, Some(s)),
            None => (closed, None),
        }
    };
    if let Some(terminal) = terminal {
        let reward = budgeted.oracle.reward(&terminal);
        scores.push((gait_seq.clone(), reward));
        if reward > best.reward || (best.states.is_empty() && !gait_seq.is_empty() && reward >= best.reward)
        {
            *best = Gait { states: gait_seq, reward };
        }
    }
    Ok(())
}

fn seq_starts_with(seq: &[CableState], prefix: &[CableState]) -> bool {
    seq.len() > prefix.len() && seq[..prefix.len()] == *prefix
}

fn best_score_of(scores: &[(Vec<CableState>, f64)]) -> f64 {
    scores.iter().map(|(_, r)| *r).fold(f64::NEG_INFINITY, f64::max)
}

/// The engine-backed oracle: each advance drives the assembly through one
/// policy step; the reward reads the terminal state.
pub struct RobotOracle<'m> {
    pub model: &'m RobotModel,
    pub params: ParamSet<f64>,
    pub reward: RewardKind,
    forward0: V3,
    com0: V3,
}

impl<'m> RobotOracle<'m> {
    pub fn new(model: &'m RobotModel, params: ParamSet<f64>, reward: RewardKind) -> Result<Self> {
        let pa = principal_axis(&model.rest_pose)?;
        let com0 = model
            .rest_pose
            .iter()
            .fold(V3::v(0.0, 0.0, 0.0), |a, s| a + s.pos)
            .scale(1.0 / 3.0);
        Ok(RobotOracle { model, params, reward, forward0: pa.forward, com0 })
    }
}

impl<'m> GaitOracle for RobotOracle<'m> {
    type State = Assembly<'m, f64>;

    fn initial(&mut self) -> Result<Self::State> {
        Ok(Assembly::new(self.model, self.params))
    }

    fn advance(&mut self, state: &Self::State, target: CableState) -> Result<Self::State> {
        let mut asm = state.clone();
        let targets = target.targets();
        let mut dirs = [Dir::Hold; 6];
        for c in 0..6 {
            dirs[c] = Dir::from_delta(asm.commanded[c], targets[c]);
        }
        let outcome = asm.advance_policy_step(
            targets,
            dirs,
            self.model.desc.control.tolerance,
            self.model.desc.control.step_timeout_s,
            |_, _| {},
        )?;
        if !outcome.completed {
            return Err(Error::StepTimeout {
                step: 0,
                timeout: self.model.desc.control.step_timeout_s,
            });
        }
        Ok(asm)
    }

    fn reward(&self, state: &Self::State) -> f64 {
        let states: [crate::dynamics::RodState<f64>; 3] =
            std::array::from_fn(|i| state.bodies[i].state.val());
        let com = states.iter().fold(V3::v(0.0, 0.0, 0.0), |a, s| a + s.pos).scale(1.0 / 3.0);
        match self.reward {
            RewardKind::Forward => (com - self.com0).dot(self.forward0),
            RewardKind::Backward => -(com - self.com0).dot(self.forward0),
            RewardKind::TurnCcw | RewardKind::TurnCw => {
                let Ok(pa) = principal_axis(&states) else { return f64::NEG_INFINITY };
                let cross = self.forward0.x * pa.forward.y - self.forward0.y * pa.forward.x;
                let dot = self.forward0.x * pa.forward.x + self.forward0.y * pa.forward.y;
                let angle = cross.atan2(dot);
                if self.reward == RewardKind::TurnCcw {
                    angle
                } else {
                    -angle
                }
            }
        }
    }
}

/// Convenience wrapper: search on the engine oracle with rest-symmetry
/// pruning taken from the model.
pub fn search_robot_gaits(
    model: &RobotModel,
    params: ParamSet<f64>,
    reward: RewardKind,
    options: SearchOptions,
) -> Result<SearchOutcome> {
    let perms = rest_automorphism_perms(model);
    let mut oracle = RobotOracle::new(model, params, reward)?;
    search_gaits(&mut oracle, &perms, options)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Surrogate: displacement is the number of retract transitions seen.
    struct RetractCounter;

    impl GaitOracle for RetractCounter {
        type State = (CableState, f64);

        fn initial(&mut self) -> Result<Self::State> {
            Ok((REST_STATE, 0.0))
        }

        fn advance(&mut self, state: &Self::State, target: CableState) -> Result<Self::State> {
            let retracts = (state.0 .0 & !target.0).count_ones() as f64;
            Ok((target, state.1 + retracts))
        }

        fn reward(&self, state: &Self::State) -> f64 {
            state.1
        }
    }

    fn brute_force_depth2() -> (Vec<CableState>, f64) {
        // All sequences [t1, rest] and [t1, t2, rest].
        let mut oracle = RetractCounter;
        let mut best = (Vec::new(), f64::NEG_INFINITY);
        for a in 0..64u8 {
            let t1 = CableState(a);
            if t1 == REST_STATE {
                continue;
            }
            let start = oracle.initial().unwrap();
            let s1 = oracle.advance(&start, t1).unwrap();
            let closed = oracle.advance(&s1, REST_STATE).unwrap();
            if oracle.reward(&closed) > best.1 {
                best = (vec![t1, REST_STATE], oracle.reward(&closed));
            }
            for b in 0..64u8 {
                let t2 = CableState(b);
                if t2 == t1 {
                    continue;
                }
                let s2 = oracle.advance(&s1, t2).unwrap();
                let closed = if t2 == REST_STATE {
                    s2.clone()
                } else {
                    oracle.advance(&s2, REST_STATE).unwrap()
                };
                if oracle.reward(&closed) > best.1 {
                    let mut seq = vec![t1, t2];
                    if t2 != REST_STATE {
                        seq.push(REST_STATE);
                    }
                    best = (seq, oracle.reward(&closed));
                }
            }
        }
        best
    }

    #[test]
    fn surrogate_search_matches_brute_force() {
        let (_, brute_reward) = brute_force_depth2();
        assert_eq!(brute_reward, 6.0);
        let mut oracle = RetractCounter;
        let outcome = search_gaits(
            &mut oracle,
            &[[0, 1, 2, 3, 4, 5]],
            SearchOptions { depth: 3, budget: 100_000, beam1: 63, beam2: 0, symmetry_reduce: false },
        )
        .unwrap();
        // Depth-3 search covers all depth-2 brute-force candidates; the
        // optimum (retract everything, then back to rest) scores 6.
        assert!(outcome.best.reward >= brute_reward);
        assert_eq!(outcome.best.reward, 6.0);
        assert!(!outcome.budget_exhausted);

        // Depth 4 fits retract-all / extend-all / retract-all / rest: 12.
        let mut oracle = RetractCounter;
        let outcome = search_gaits(
            &mut oracle,
            &[[0, 1, 2, 3, 4, 5]],
            SearchOptions { depth: 4, budget: 600_000, beam1: 63, beam2: 4032, symmetry_reduce: false },
        )
        .unwrap();
        assert_eq!(outcome.best.reward, 12.0);
        assert_eq!(
            outcome.best.states,
            vec![CableState(0), REST_STATE, CableState(0), REST_STATE]
        );
    }

    #[test]
    fn reward_scaling_preserves_argmax() {
        struct Scaled(f64);
        impl GaitOracle for Scaled {
            type State = (CableState, f64);
            fn initial(&mut self) -> Result<Self::State> {
                Ok((REST_STATE, 0.0))
            }
            fn advance(&mut self, state: &Self::State, target: CableState) -> Result<Self::State> {
                let retracts = (state.0 .0 & !target.0).count_ones() as f64;
                // An arbitrary but deterministic shaping.
                let bonus = (target.0 as f64) * 0.001;
                Ok((target, state.1 + retracts + bonus))
            }
            fn reward(&self, state: &Self::State) -> f64 {
                state.1 * self.0
            }
        }
        let opts = SearchOptions { depth: 2, budget: 10_000, beam1: 63, beam2: 0, symmetry_reduce: false };
        let a = search_gaits(&mut Scaled(1.0), &[[0, 1, 2, 3, 4, 5]], opts).unwrap();
        let b = search_gaits(&mut Scaled(2.0), &[[0, 1, 2, 3, 4, 5]], opts).unwrap();
        assert_eq!(a.best.states, b.best.states);
        assert!((b.best.reward - 2.0 * a.best.reward).abs() < 1e-12);
    }

    #[test]
    fn depth_zero_returns_empty_gait() {
        let mut oracle = RetractCounter;
        let outcome = search_gaits(
            &mut oracle,
            &[[0, 1, 2, 3, 4, 5]],
            SearchOptions { depth: 0, budget: 100, beam1: 4, beam2: 4, symmetry_reduce: false },
        )
        .unwrap();
        assert!(outcome.best.states.is_empty());
        assert_eq!(outcome.best.reward, 0.0);
    }

    #[test]
    fn budget_exhaustion_returns_best_so_far() {
        let mut oracle = RetractCounter;
        let outcome = search_gaits(
            &mut oracle,
            &[[0, 1, 2, 3, 4, 5]],
            SearchOptions { depth: 3, budget: 20, beam1: 63, beam2: 0, symmetry_reduce: false },
        )
        .unwrap();
        assert!(outcome.budget_exhausted);
        assert!(outcome.budget_spent <= 20);
        assert!(!outcome.best.states.is_empty());
    }
}
