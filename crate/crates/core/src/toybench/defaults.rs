//! Numeric defaults for the toy problems, versioned so golden outcomes stay
//! tied to the constants that produced them. Horizons (drone 500 steps, box
//! 200, billiards 500, car 300 with turns at 100/200/300) are structural;
//! masses, forces and timesteps are this crate's choices.

pub const DEFAULTS_VERSION: u32 = 1;

pub const GRAVITY: f64 = 9.81;
pub const LEARNING_RATE: f64 = 0.1;

// Drone: learn thrust F so height(t = 500) = 10 m, starting resting on the
// ground with F below hover thrust (the clamped zero-gradient regime).
pub const DRONE_STEPS: usize = 500;
pub const DRONE_DT: f64 = 0.01;
pub const DRONE_MASS: f64 = 1.0;
pub const DRONE_TARGET: f64 = 10.0;
pub const DRONE_FORCE_INIT: f64 = 0.0;
pub const DRONE_ITERS: usize = 600;
pub const DRONE_TOLERANCE: f64 = 0.1;

// Box: learn friction mu from a pulled box; mu starts at 1 where static
// friction pins it (F/(m g) ~ 0.51 is the sticking threshold).
pub const BOX_STEPS: usize = 200;
pub const BOX_DT: f64 = 0.01;
pub const BOX_MASS: f64 = 1.0;
pub const BOX_PULL_FORCE: f64 = 5.0;
pub const BOX_MU_INIT: f64 = 1.0;
pub const BOX_MU_TRUE: f64 = 0.3;
pub const BOX_ITERS: usize = 400;
pub const BOX_TOLERANCE_FRACTION: f64 = 0.05;

// Billiards: learn the push force on ball A so that struck ball B ends on
// the target. Frictionless, perfectly elastic, equal masses.
pub const BILLIARDS_STEPS: usize = 500;
pub const BILLIARDS_DT: f64 = 0.01;
pub const BILLIARDS_MASS: f64 = 1.0;
pub const BILLIARDS_PUSH_STEPS: usize = 100;
pub const BILLIARDS_RADIUS: f64 = 0.05;
pub const BILLIARDS_B_START: f64 = 1.0;
pub const BILLIARDS_TARGET: f64 = 2.0;
pub const BILLIARDS_FORCE_INIT: f64 = 0.3;
pub const BILLIARDS_ITERS: usize = 400;
pub const BILLIARDS_TOLERANCE_FRACTION: f64 = 0.01;

// Car: learn the speed of a shuttle driving A -> B -> A -> B; ground truth
// v = 1 m/s turns exactly at steps 100 / 200 / 300.
pub const CAR_STEPS: usize = 300;
pub const CAR_DT: f64 = 0.1;
pub const CAR_SPAN: f64 = 10.0;
pub const CAR_V_TRUE: f64 = 1.0;
pub const CAR_V_INIT: f64 = 0.6;
pub const CAR_ITERS: usize = 300;
pub const CAR_TOLERANCE: f64 = 0.01;
/// Step cap when the prediction must finish all three legs for the
/// key-frame loss (slow estimates take longer than the nominal horizon).
pub const CAR_MAX_STEPS: usize = 6000;
