//! Self-contained 1D differentiable problems exercising the detached
//! contact model (drone, box, billiards) and the key-frame loss (car).
//!
//! Each problem is deterministic: no RNG anywhere, so reports are
//! reproducible bit for bit and golden convergence outcomes can be asserted
//! in tests. Numeric constants live in [`defaults`].

pub mod car;
pub mod defaults;

use crate::autodiff::{Scalar, Tape, Var};
use crate::contact::{friction_step_1d, restitution_step_1d};
use crate::error::{Error, Result};
use crate::opt::{Adam, Bounds};

pub use car::{run_car, CarLossKind};

/// Which bodies detach their contact responses from the tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DetachMode {
    /// No detachment anywhere (the naive differentiable contact).
    None,
    /// Detach only the actuated body's responses.
    ActuatedOnly,
    /// Detach every body's responses.
    All,
}

impl DetachMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(DetachMode::None),
            "actuated-only" | "actuated" => Some(DetachMode::ActuatedOnly),
            "all" => Some(DetachMode::All),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DetachMode::None => "none",
            DetachMode::ActuatedOnly => "actuated-only",
            DetachMode::All => "all",
        }
    }
}

/// One optimizer iteration of a toy problem.
#[derive(Clone, Copy, Debug)]
pub struct IterationRecord {
    pub loss: f64,
    pub param: f64,
    pub grad: f64,
}

/// Full optimization trace plus the convergence verdict.
#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub problem: String,
    pub variant: String,
    pub iterations: Vec<IterationRecord>,
    pub converged: bool,
    /// Problem-specific final error (same quantity the tolerance applies to).
    pub final_error: f64,
    pub tolerance: f64,
    /// Number of iterations where the loss rose above the previous one.
    pub loss_increases: usize,
}

impl ConvergenceReport {
    fn new(
        problem: &str,
        variant: &str,
        iterations: Vec<IterationRecord>,
        final_error: f64,
        tolerance: f64,
    ) -> Self {
        let loss_increases = iterations
            .windows(2)
            .filter(|w| w[1].loss > w[0].loss)
            .count();
        ConvergenceReport {
            problem: problem.to_string(),
            variant: variant.to_string(),
            iterations,
            converged: final_error < tolerance,
            final_error,
            tolerance,
            loss_increases,
        }
    }

    pub fn final_param(&self) -> f64 {
        self.iterations.last().map(|r| r.param).unwrap_or(f64::NAN)
    }

    /// Plot-ready dump: one `iter loss param grad` line per iteration.
    pub fn to_tsv(&self) -> String {
        let mut out = format!(
            "# problem: {}\n# variant: {}\n# converged: {}\n# final_error: {:.6e}\n# loss_increases: {}\niter\tloss\tparam\tgrad\n",
            self.problem, self.variant, self.converged, self.final_error, self.loss_increases
        );
        for (i, r) in self.iterations.iter().enumerate() {
            out.push_str(&format!("{}\t{:.9e}\t{:.9e}\t{:.9e}\n", i, r.loss, r.param, r.grad));
        }
        out
    }
}

/// Drone lifting off against gravity: thrust `F` is learned so the height
/// at the final step hits the target. Resting on the ground with F < mg is
/// the zero-gradient trap the detached contact escapes.
pub fn run_drone(mode: DetachMode) -> Result<ConvergenceReport> {
    use defaults::*;
    let detach = mode != DetachMode::None;
    let bounds = Bounds::new(0.0, 200.0);
    let mut force = DRONE_FORCE_INIT;
    let mut adam = Adam::new(LEARNING_RATE, 1);
    let mut iterations = Vec::with_capacity(DRONE_ITERS);
    let mut final_height = 0.0;
    for iter in 0..DRONE_ITERS {
        let tape = Tape::new();
        let f = tape.var(force)?;
        let mut v = Var::constant(0.0);
        let mut x = Var::constant(0.0);
        for _ in 0..DRONE_STEPS {
            let (vn, xn) = restitution_step_1d(
                v,
                x,
                f,
                Var::constant(DRONE_MASS),
                Var::constant(0.0),
                GRAVITY,
                0.0,
                DRONE_DT,
                detach,
            );
            v = vn;
            x = xn;
        }
        let loss = (x - DRONE_TARGET) * (x - DRONE_TARGET);
        if !loss.value().is_finite() {
            return Err(Error::NonFiniteLoss { iter });
        }
        let grad = loss.backward().wrt(f);
        iterations.push(IterationRecord { loss: loss.value(), param: force, grad });
        final_height = x.value();
        adam.step(std::slice::from_mut(&mut force), &[grad]);
        force = bounds.project(force);
    }
    let final_error = (final_height - DRONE_TARGET).abs();
    Ok(ConvergenceReport::new("drone", mode.name(), iterations, final_error, DRONE_TOLERANCE))
}

/// Box pulled by a known force against learnable Coulomb friction. The
/// initial `mu` is high enough that static friction pins the box; only a
/// detached response produces the negative gradient that frees it.
pub fn run_box(mode: DetachMode) -> Result<ConvergenceReport> {
    use defaults::*;
    let detach = mode != DetachMode::None;
    // Independent target: the final position the dynamics reach at the true
    // friction value, computed with the plain-f64 path.
    let target = box_final_position(BOX_MU_TRUE)?;
    let bounds = Bounds::new(0.0, 2.0);
    let mut mu = BOX_MU_INIT;
    let mut adam = Adam::new(LEARNING_RATE, 1);
    let mut iterations = Vec::with_capacity(BOX_ITERS);
    let mut final_pos = 0.0;
    for iter in 0..BOX_ITERS {
        let tape = Tape::new();
        let mu_v = tape.var(mu)?;
        let mut v = Var::constant(0.0);
        let mut x = Var::constant(0.0);
        for _ in 0..BOX_STEPS {
            let (vn, xn) = friction_step_1d(
                v,
                x,
                Var::constant(BOX_PULL_FORCE),
                Var::constant(BOX_MASS),
                mu_v,
                Var::constant(BOX_MASS * GRAVITY),
                BOX_DT,
                detach,
            )?;
            v = vn;
            x = xn;
        }
        let loss = (x - target) * (x - target);
        if !loss.value().is_finite() {
            return Err(Error::NonFiniteLoss { iter });
        }
        let grad = loss.backward().wrt(mu_v);
        iterations.push(IterationRecord { loss: loss.value(), param: mu, grad });
        final_pos = x.value();
        adam.step(std::slice::from_mut(&mut mu), &[grad]);
        mu = bounds.project(mu);
    }
    let final_error = (final_pos - target).abs();
    Ok(ConvergenceReport::new("box", mode.name(), iterations, final_error, BOX_TOLERANCE_FRACTION * target))
}

/// Final box position under a given friction coefficient (plain rollout).
pub fn box_final_position(mu: f64) -> Result<f64> {
    use defaults::*;
    let mut v = 0.0;
    let mut x = 0.0;
    for _ in 0..BOX_STEPS {
        let (vn, xn) =
            friction_step_1d(v, x, BOX_PULL_FORCE, BOX_MASS, mu, BOX_MASS * GRAVITY, BOX_DT, true)?;
        v = vn;
        x = xn;
    }
    Ok(x)
}

/// Billiards: force `F` pushes ball A into a frictionless elastic collision
/// with ball B; B must sit on the target at the final step. Detaching both
/// balls' collision responses severs the only gradient path from B back to
/// `F`; detaching only the actuated ball A keeps it.
pub fn run_billiards(mode: DetachMode) -> Result<ConvergenceReport> {
    use defaults::*;
    let (detach_a, detach_b) = match mode {
        DetachMode::None => (false, false),
        DetachMode::ActuatedOnly => (true, false),
        DetachMode::All => (true, true),
    };
    let bounds = Bounds::new(0.0, 10.0);
    let mut force = BILLIARDS_FORCE_INIT;
    let mut adam = Adam::new(LEARNING_RATE, 1);
    let mut iterations = Vec::with_capacity(BILLIARDS_ITERS);
    let mut final_b = 0.0;
    for iter in 0..BILLIARDS_ITERS {
        let tape = Tape::new();
        let f = tape.var(force)?;
        let (xa0, xb0) = (0.0, BILLIARDS_B_START);
        let mut va = Var::constant(0.0);
        let mut vb = Var::constant(0.0);
        let mut xa = Var::constant(xa0);
        let mut xb = Var::constant(xb0);
        for step in 0..BILLIARDS_STEPS {
            let push = if step < BILLIARDS_PUSH_STEPS { f } else { Var::constant(0.0) };
            va = va + push * (BILLIARDS_DT / BILLIARDS_MASS);
            // Equal-mass elastic exchange when touching and approaching.
            let gap = xb.value() - xa.value();
            if gap <= 2.0 * BILLIARDS_RADIUS && va.value() > vb.value() {
                let rel = va - vb;
                va = va - rel.detach_if(detach_a);
                vb = vb + rel.detach_if(detach_b);
            }
            xa = xa + va * BILLIARDS_DT;
            xb = xb + vb * BILLIARDS_DT;
        }
        let loss = (xb - BILLIARDS_TARGET) * (xb - BILLIARDS_TARGET);
        if !loss.value().is_finite() {
            return Err(Error::NonFiniteLoss { iter });
        }
        let grad = loss.backward().wrt(f);
        iterations.push(IterationRecord { loss: loss.value(), param: force, grad });
        final_b = xb.value();
        adam.step(std::slice::from_mut(&mut force), &[grad]);
        force = bounds.project(force);
    }
    let final_error = (final_b - BILLIARDS_TARGET).abs();
    let tol = BILLIARDS_TOLERANCE_FRACTION * (BILLIARDS_TARGET - BILLIARDS_B_START);
    Ok(ConvergenceReport::new("billiards", mode.name(), iterations, final_error, tol))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drone_with_detach_converges() {
        let report = run_drone(DetachMode::ActuatedOnly).unwrap();
        assert!(report.converged, "final error {}", report.final_error);
        // The loss is flat while grounded, yet the thrust climbs the whole time.
        let grounded: Vec<_> = report.iterations.iter().take(50).collect();
        for pair in grounded.windows(2) {
            assert!(pair[1].param > pair[0].param, "thrust should rise while clamped");
        }
    }

    #[test]
    fn drone_without_detach_is_stuck_with_zero_gradient() {
        let report = run_drone(DetachMode::None).unwrap();
        assert!(!report.converged);
        for r in &report.iterations {
            assert_eq!(r.grad, 0.0, "clamped gradient must vanish identically");
            assert_eq!(r.param, defaults::DRONE_FORCE_INIT);
        }
    }

    #[test]
    fn drone_overthrust_init_matches_unconstrained_descent() {
        // Starting above hover thrust the drone never touches the clamp, so
        // the contact rollout must reproduce the unconstrained free-flight
        // descent oracle bit for bit, iteration by iteration, and both drive
        // the thrust toward the closed-form optimum.
        use defaults::*;
        let target_force = {
            // Closed form: x_T = (F/m - g) dt^2 T(T+1)/2 must equal target.
            let t = DRONE_STEPS as f64;
            let c = DRONE_DT * DRONE_DT * t * (t + 1.0) / 2.0;
            DRONE_MASS * (DRONE_TARGET / c + GRAVITY)
        };
        let run = |with_contact: bool| -> Vec<f64> {
            let mut force = 30.0;
            let mut adam = Adam::new(LEARNING_RATE, 1);
            let mut params = Vec::new();
            for _ in 0..DRONE_ITERS {
                let tape = Tape::new();
                let f = tape.var(force).unwrap();
                let mut v = Var::constant(0.0);
                let mut x = Var::constant(0.0);
                for _ in 0..DRONE_STEPS {
                    if with_contact {
                        let (vn, xn) = restitution_step_1d(
                            v,
                            x,
                            f,
                            Var::constant(DRONE_MASS),
                            Var::constant(0.0),
                            GRAVITY,
                            0.0,
                            DRONE_DT,
                            true,
                        );
                        v = vn;
                        x = xn;
                    } else {
                        v = v - GRAVITY * DRONE_DT + f * (DRONE_DT / DRONE_MASS);
                        x = x + v * DRONE_DT;
                    }
                }
                let loss = (x - DRONE_TARGET) * (x - DRONE_TARGET);
                let g = loss.backward().wrt(f);
                adam.step(std::slice::from_mut(&mut force), &[g]);
                params.push(force);
            }
            params
        };
        let contact_path = run(true);
        let free_path = run(false);
        for (a, b) in contact_path.iter().zip(&free_path) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert!((contact_path.last().unwrap() - target_force).abs() < 0.05);
    }

    #[test]
    fn box_with_detach_frees_itself() {
        let report = run_box(DetachMode::ActuatedOnly).unwrap();
        assert!(report.converged, "final error {}", report.final_error);
        // mu decreases monotonically until the box starts moving.
        let sticking_threshold = defaults::BOX_PULL_FORCE / (defaults::BOX_MASS * defaults::GRAVITY);
        let mut reached_motion = false;
        for pair in report.iterations.windows(2) {
            if pair[0].param <= sticking_threshold {
                reached_motion = true;
                break;
            }
            assert!(pair[1].param < pair[0].param, "mu must strictly decrease while stuck");
        }
        assert!(reached_motion, "mu never dropped below the sticking threshold");
        // While stuck the gradient is positive (push mu down), never flipped.
        for r in &report.iterations {
            if r.param > sticking_threshold {
                assert!(r.grad > 0.0);
            }
        }
    }

    #[test]
    fn box_without_detach_never_moves() {
        let report = run_box(DetachMode::None).unwrap();
        assert!(!report.converged);
        for r in &report.iterations {
            assert_eq!(r.grad, 0.0);
            assert_eq!(r.param, defaults::BOX_MU_INIT);
        }
        // Loss curve is exactly flat.
        let first = report.iterations[0].loss;
        assert!(report.iterations.iter().all(|r| r.loss == first));
    }

    #[test]
    fn box_already_moving_converges_in_both_modes() {
        // Initial mu below the sticking threshold: kinetic branch only, which
        // keeps the mu gradient with or without detachment.
        use defaults::*;
        for mode in [DetachMode::ActuatedOnly, DetachMode::None] {
            let detach = mode != DetachMode::None;
            let target = box_final_position(BOX_MU_TRUE).unwrap();
            let mut mu: f64 = 0.45;
            let mut adam = Adam::new(LEARNING_RATE, 1);
            let mut final_pos = 0.0;
            for _ in 0..BOX_ITERS {
                let tape = Tape::new();
                let mu_v = tape.var(mu).unwrap();
                let mut v = Var::constant(0.0);
                let mut x = Var::constant(0.0);
                for _ in 0..BOX_STEPS {
                    let (vn, xn) = friction_step_1d(
                        v,
                        x,
                        Var::constant(BOX_PULL_FORCE),
                        Var::constant(BOX_MASS),
                        mu_v,
                        Var::constant(BOX_MASS * GRAVITY),
                        BOX_DT,
                        detach,
                    )
                    .unwrap();
                    v = vn;
                    x = xn;
                }
                let loss = (x - target) * (x - target);
                let grad = loss.backward().wrt(mu_v);
                final_pos = x.value();
                adam.step(std::slice::from_mut(&mut mu), &[grad]);
                mu = mu.clamp(0.0, 2.0);
            }
            assert!(
                (final_pos - target).abs() < BOX_TOLERANCE_FRACTION * target,
                "mode {mode:?} failed: {final_pos} vs {target}"
            );
        }
    }

    #[test]
    fn billiards_detach_actuated_only_converges() {
        let report = run_billiards(DetachMode::ActuatedOnly).unwrap();
        assert!(report.converged, "final error {}", report.final_error);
    }

    #[test]
    fn billiards_detach_all_kills_the_gradient() {
        let report = run_billiards(DetachMode::All).unwrap();
        assert!(!report.converged);
        for r in &report.iterations {
            assert_eq!(r.grad, 0.0);
            assert_eq!(r.param, defaults::BILLIARDS_FORCE_INIT);
        }
    }

    #[test]
    fn billiards_overshoot_gradient_points_back() {
        // With a force known to overshoot, the analytic sign check: larger F
        // moves B further, so d loss / d F > 0 there. Verified against a
        // value-function finite difference.
        use defaults::*;
        let rollout = |force: f64| -> f64 {
            let mut va = 0.0;
            let mut vb = 0.0;
            let mut xa = 0.0;
            let mut xb = BILLIARDS_B_START;
            for step in 0..BILLIARDS_STEPS {
                let push = if step < BILLIARDS_PUSH_STEPS { force } else { 0.0 };
                va += push * (BILLIARDS_DT / BILLIARDS_MASS);
                let gap = xb - xa;
                if gap <= 2.0 * BILLIARDS_RADIUS && va > vb {
                    let rel = va - vb;
                    va -= rel;
                    vb += rel;
                }
                xa += va * BILLIARDS_DT;
                xb += vb * BILLIARDS_DT;
            }
            (xb - BILLIARDS_TARGET) * (xb - BILLIARDS_TARGET)
        };
        let f0 = 1.2; // overshoots
        let fd = (rollout(f0 + 1e-4) - rollout(f0 - 1e-4)) / 2e-4;
        assert!(fd > 0.0);

        let tape = Tape::new();
        let f = tape.var(f0).unwrap();
        let mut va = Var::constant(0.0);
        let mut vb = Var::constant(0.0);
        let mut xa = Var::constant(0.0);
        let mut xb = Var::constant(BILLIARDS_B_START);
        for step in 0..BILLIARDS_STEPS {
            let push = if step < BILLIARDS_PUSH_STEPS { f } else { Var::constant(0.0) };
            va = va + push * (BILLIARDS_DT / BILLIARDS_MASS);
            let gap = xb.value() - xa.value();
            if gap <= 2.0 * BILLIARDS_RADIUS && va.value() > vb.value() {
                let rel = va - vb;
                va = va - rel.detach();
                vb = vb + rel;
            }
            xa = xa + va * BILLIARDS_DT;
            xb = xb + vb * BILLIARDS_DT;
        }
        let loss = (xb - BILLIARDS_TARGET) * (xb - BILLIARDS_TARGET);
        let grad = loss.backward().wrt(f);
        assert!(grad > 0.0);
        assert!((grad - fd).abs() < 1e-3 * fd.abs());
    }
}
